"""Pure numpy versions of the hot kernels.

Every function here has a twin with the same signature and semantics in
``_ckernels.pyx``. Arrays are C-contiguous float64 of dimension 1 or 2 and
``h`` is the tuple of grid spacings.
"""
import numpy as np


# overflow on blown-up data is reported by the caller's finiteness check
@np.errstate(over="ignore", invalid="ignore")
def operator_interior(u, h, p, eps):
    """Regularized non-divergence operator ``a_ij(Du) u_ij`` at interior nodes.

    Boundary entries of the returned array are zero; non-finite input
    propagates to non-finite output.
    """
    # stencils are written as differences of neighbour differences, so on data
    # confined to one binade the result is exactly invariant under u -> u + c
    out = np.zeros_like(u)
    q = p - 2.0
    e2 = eps * eps
    if u.ndim == 1:
        hx = h[0]
        ux = (u[2:] - u[:-2]) / (2.0 * hx)
        uxx = ((u[2:] - u[1:-1]) - (u[1:-1] - u[:-2])) / (hx * hx)
        ux2 = ux * ux
        out[1:-1] = uxx + q * ux2 / (e2 + ux2) * uxx
        return out
    hx, hy = h
    c = u[1:-1, 1:-1]
    ux = (u[2:, 1:-1] - u[:-2, 1:-1]) / (2.0 * hx)
    uy = (u[1:-1, 2:] - u[1:-1, :-2]) / (2.0 * hy)
    uxx = ((u[2:, 1:-1] - c) - (c - u[:-2, 1:-1])) / (hx * hx)
    uyy = ((u[1:-1, 2:] - c) - (c - u[1:-1, :-2])) / (hy * hy)
    uxy = ((u[2:, 2:] - u[2:, :-2]) - (u[:-2, 2:] - u[:-2, :-2])) / (4.0 * hx * hy)
    s = q / (e2 + ux * ux + uy * uy)
    out[1:-1, 1:-1] = uxx + uyy + s * (ux * ux * uxx + 2.0 * ux * uy * uxy + uy * uy * uyy)
    return out


def _face_weights_1d(v, h, p, eps):
    g = (v[1:] - v[:-1]) / h[0]
    return (eps * eps + g * g) ** (0.5 * p - 1.0)


def _face_weights_2d(v, h, p, eps):
    hx, hy = h
    e2 = eps * eps
    expo = 0.5 * p - 1.0
    # x-faces between (i, j) and (i+1, j), j interior
    gx = (v[1:, 1:-1] - v[:-1, 1:-1]) / hx
    ty = ((v[:-1, 2:] - v[:-1, :-2]) + (v[1:, 2:] - v[1:, :-2])) / (4.0 * hy)
    wx = (e2 + gx * gx + ty * ty) ** expo
    # y-faces between (i, j) and (i, j+1), i interior
    gy = (v[1:-1, 1:] - v[1:-1, :-1]) / hy
    tx = ((v[2:, :-1] - v[:-2, :-1]) + (v[2:, 1:] - v[:-2, 1:])) / (4.0 * hx)
    wy = (e2 + gy * gy + tx * tx) ** expo
    return wx, wy


def _balance(v, h, p, eps):
    """Return ``(num, den, wsum)`` of the frozen-coefficient 5-point balance."""
    if v.ndim == 1:
        w = _face_weights_1d(v, h, p, eps)
        ih2 = 1.0 / (h[0] * h[0])
        we, ww = w[1:], w[:-1]
        num = (we * v[2:] + ww * v[:-2]) * ih2
        den = (we + ww) * ih2
        return num, den, we + ww
    hx, hy = h
    wx, wy = _face_weights_2d(v, h, p, eps)
    ihx2 = 1.0 / (hx * hx)
    ihy2 = 1.0 / (hy * hy)
    we, ww = wx[1:, :], wx[:-1, :]
    wn, ws = wy[:, 1:], wy[:, :-1]
    num = (we * v[2:, 1:-1] + ww * v[:-2, 1:-1]) * ihx2 + (wn * v[1:-1, 2:] + ws * v[1:-1, :-2]) * ihy2
    den = (we + ww) * ihx2 + (wn + ws) * ihy2
    return num, den, we + ww + wn + ws


def _color_masks(shape):
    idx = np.indices(shape).sum(axis=0)
    return [(idx % 2) == c for c in (0, 1)]


def _tangential_2d(v, h, e2):
    """``eps^2 + (tangential derivative)^2`` on x-faces and y-faces; no face term uses its own centre."""
    hx, hy = h
    ty = ((v[:-1, 2:] - v[:-1, :-2]) + (v[1:, 2:] - v[1:, :-2])) / (4.0 * hy)
    tx = ((v[2:, :-1] - v[:-2, :-1]) + (v[2:, 1:] - v[:-2, 1:])) / (4.0 * hx)
    return e2 + ty * ty, e2 + tx * tx


def _local_roots(x, nb, a, ih, expo, pm1, iters=60):
    """Solve ``sum_f w_f(x) (nb_f - x) ih_f^2 = 0`` node-wise, ``w_f = (a_f + ((nb_f - x) ih_f)^2)^expo``.

    Each face flux is increasing in ``nb_f - x``, so the left side is
    decreasing in ``x`` with its root between the smallest and largest
    neighbour. Newton steps leaving the current bracket are replaced by
    bisection.
    """
    lo = nb.min(axis=0)
    hi = nb.max(axis=0)
    x = np.clip(x, lo, hi)
    ih2 = (ih * ih)[:, None]
    ihc = ih[:, None]
    tol = 1e-15 * (np.abs(lo) + np.abs(hi)) + 1e-300
    active = hi - lo > tol
    for _ in range(iters):
        if not active.any():
            break
        xa = x[active]
        d = nb[:, active] - xa
        s = d * ihc
        q = a[:, active] + s * s
        w = q ** expo
        F = np.sum(w * d * ih2, axis=0)
        dF = -np.sum(w / q * (a[:, active] + pm1 * s * s) * ih2, axis=0)
        la = np.where(F > 0.0, xa, lo[active])
        ha = np.where(F < 0.0, xa, hi[active])
        step = F / dF
        xn = xa - step
        bad = ~((xn >= la) & (xn <= ha))
        xn = np.where(bad, 0.5 * (la + ha), xn)
        ta = tol[active]
        done = (np.abs(step) <= ta) | (ha - la <= ta)
        lo[active], hi[active] = la, ha
        x[active] = xn
        idx = np.flatnonzero(active)
        active[idx[done]] = False
    return x


def relax_sweep(v, h, p, eps, omega):
    """One red-black nonlinear SOR sweep, in place.

    Each node takes the exact root of its own balance equation (tangential
    differences frozen for the colour), then over-relaxes by ``omega``.
    """
    e2 = eps * eps
    expo = 0.5 * p - 1.0
    pm1 = p - 1.0
    inner = (slice(1, -1),) * v.ndim
    for mask in _color_masks(tuple(s - 2 for s in v.shape)):
        c = v[inner]
        x = c[mask]
        if v.ndim == 1:
            nb = np.stack([v[2:][mask], v[:-2][mask]])
            a = np.full_like(nb, e2)
            ih = np.full(2, 1.0 / h[0])
        else:
            ax, ay = _tangential_2d(v, h, e2)
            nb = np.stack([v[2:, 1:-1][mask], v[:-2, 1:-1][mask], v[1:-1, 2:][mask], v[1:-1, :-2][mask]])
            a = np.stack([ax[1:, :][mask], ax[:-1, :][mask], ay[:, 1:][mask], ay[:, :-1][mask]])
            ih = np.array([1.0 / h[0], 1.0 / h[0], 1.0 / h[1], 1.0 / h[1]])
        root = _local_roots(x.copy(), nb, a, ih, expo, pm1)
        c[mask] = x + omega * (root - x)


def relax_residual(v, h, p, eps):
    """Divergence-form residual normalized by the mean face weight."""
    out = np.zeros_like(v)
    num, den, wsum = _balance(v, h, p, eps)
    inner = (slice(1, -1),) * v.ndim
    out[inner] = (num - den * v[inner]) / (wsum / (2 * v.ndim))
    return out
