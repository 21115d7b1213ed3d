# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels; same contracts as ``_kernels_py``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, pow

cnp.import_array()


cdef void _op1(const double[::1] u, double hx, double q, double e2, double[::1] out) noexcept nogil:
    cdef Py_ssize_t i, nx = u.shape[0]
    cdef double ux, uxx, ux2
    cdef double i2h = 1.0 / (2.0 * hx), ih2 = 1.0 / (hx * hx)
    for i in range(1, nx - 1):
        ux = (u[i + 1] - u[i - 1]) * i2h
        uxx = ((u[i + 1] - u[i]) - (u[i] - u[i - 1])) * ih2
        ux2 = ux * ux
        out[i] = uxx + q * ux2 / (e2 + ux2) * uxx


cdef void _op2(const double[:, ::1] u, double hx, double hy, double q, double e2,
               double[:, ::1] out) noexcept nogil:
    cdef Py_ssize_t i, j, nx = u.shape[0], ny = u.shape[1]
    cdef double ux, uy, uxx, uyy, uxy, c, s
    cdef double i2hx = 1.0 / (2.0 * hx), i2hy = 1.0 / (2.0 * hy)
    cdef double ihx2 = 1.0 / (hx * hx), ihy2 = 1.0 / (hy * hy)
    cdef double ihxy = 1.0 / (4.0 * hx * hy)
    for i in range(1, nx - 1):
        for j in range(1, ny - 1):
            c = u[i, j]
            ux = (u[i + 1, j] - u[i - 1, j]) * i2hx
            uy = (u[i, j + 1] - u[i, j - 1]) * i2hy
            uxx = ((u[i + 1, j] - c) - (c - u[i - 1, j])) * ihx2
            uyy = ((u[i, j + 1] - c) - (c - u[i, j - 1])) * ihy2
            uxy = ((u[i + 1, j + 1] - u[i + 1, j - 1]) - (u[i - 1, j + 1] - u[i - 1, j - 1])) * ihxy
            s = q / (e2 + ux * ux + uy * uy)
            out[i, j] = uxx + uyy + s * (ux * ux * uxx + 2.0 * ux * uy * uxy + uy * uy * uyy)


def operator_interior(u, h, double p, double eps):
    u = np.ascontiguousarray(u, dtype=np.float64)
    out = np.zeros_like(u)
    if u.ndim == 1:
        _op1(u, h[0], p - 2.0, eps * eps, out)
    else:
        _op2(u, h[0], h[1], p - 2.0, eps * eps, out)
    return out


cdef void _weights1(const double[::1] v, double hx, double e2, double expo,
                    double[::1] w) noexcept nogil:
    cdef Py_ssize_t i
    cdef double g
    for i in range(v.shape[0] - 1):
        g = (v[i + 1] - v[i]) / hx
        w[i] = pow(e2 + g * g, expo)


cdef void _weights2(const double[:, ::1] v, double hx, double hy, double e2, double expo,
                    double[:, ::1] wx, double[:, ::1] wy) noexcept nogil:
    cdef Py_ssize_t i, j, nx = v.shape[0], ny = v.shape[1]
    cdef double g, t
    for i in range(nx - 1):
        for j in range(1, ny - 1):
            g = (v[i + 1, j] - v[i, j]) / hx
            t = ((v[i, j + 1] - v[i, j - 1]) + (v[i + 1, j + 1] - v[i + 1, j - 1])) / (4.0 * hy)
            wx[i, j - 1] = pow(e2 + g * g + t * t, expo)
    for i in range(1, nx - 1):
        for j in range(ny - 1):
            g = (v[i, j + 1] - v[i, j]) / hy
            t = ((v[i + 1, j] - v[i - 1, j]) + (v[i + 1, j + 1] - v[i - 1, j + 1])) / (4.0 * hx)
            wy[i - 1, j] = pow(e2 + g * g + t * t, expo)


cdef inline double _local_root(double x, const double* nb, const double* a, const double* ih, int m,
                               double expo, double pm1) noexcept nogil:
    """Bracketed Newton for the node balance; see ``_kernels_py._local_roots``."""
    cdef int f, it
    cdef double lo = nb[0], hi = nb[0], tol, F, dF, d, s, q, w, xn, ih2, step
    for f in range(1, m):
        if nb[f] < lo:
            lo = nb[f]
        if nb[f] > hi:
            hi = nb[f]
    tol = 1e-15 * (fabs(lo) + fabs(hi)) + 1e-300
    if hi - lo <= tol:
        return lo
    if x < lo:
        x = lo
    elif x > hi:
        x = hi
    for it in range(60):
        F = 0.0
        dF = 0.0
        for f in range(m):
            ih2 = ih[f] * ih[f]
            d = nb[f] - x
            s = d * ih[f]
            q = a[f] + s * s
            w = pow(q, expo)
            F += w * d * ih2
            dF -= w / q * (a[f] + pm1 * s * s) * ih2
        if F > 0.0:
            lo = x
        elif F < 0.0:
            hi = x
        step = F / dF
        xn = x - step
        if not (xn >= lo and xn <= hi):
            xn = 0.5 * (lo + hi)
        if fabs(step) <= tol or hi - lo <= tol:
            return xn
        x = xn
    return x


cdef void _sweep1(double[::1] v, double hx, double e2, double expo, double pm1,
                  double omega) noexcept nogil:
    cdef Py_ssize_t i, k, color, nx = v.shape[0]
    cdef double nb[2]
    cdef double a[2]
    cdef double ih[2]
    cdef double root
    a[0] = e2
    a[1] = e2
    ih[0] = 1.0 / hx
    ih[1] = 1.0 / hx
    for color in range(2):
        # same-colour nodes share no face, so the pass is order independent
        for i in range(1 + color, nx - 1, 2):
            nb[0] = v[i + 1]
            nb[1] = v[i - 1]
            root = _local_root(v[i], nb, a, ih, 2, expo, pm1)
            v[i] = v[i] + omega * (root - v[i])


cdef void _tangential2(const double[:, ::1] v, double hx, double hy, double e2,
                       double[:, ::1] ax, double[:, ::1] ay) noexcept nogil:
    cdef Py_ssize_t i, j, nx = v.shape[0], ny = v.shape[1]
    cdef double t
    for i in range(nx - 1):
        for j in range(1, ny - 1):
            t = ((v[i, j + 1] - v[i, j - 1]) + (v[i + 1, j + 1] - v[i + 1, j - 1])) / (4.0 * hy)
            ax[i, j - 1] = e2 + t * t
    for i in range(1, nx - 1):
        for j in range(ny - 1):
            t = ((v[i + 1, j] - v[i - 1, j]) + (v[i + 1, j + 1] - v[i - 1, j + 1])) / (4.0 * hx)
            ay[i - 1, j] = e2 + t * t


cdef void _sweep2(double[:, ::1] v, double hx, double hy, double e2, double expo, double pm1,
                  double omega, double[:, ::1] ax, double[:, ::1] ay) noexcept nogil:
    cdef Py_ssize_t i, j, color, nx = v.shape[0], ny = v.shape[1]
    cdef double nb[4]
    cdef double a[4]
    cdef double ih[4]
    cdef double root
    ih[0] = 1.0 / hx
    ih[1] = 1.0 / hx
    ih[2] = 1.0 / hy
    ih[3] = 1.0 / hy
    for color in range(2):
        _tangential2(v, hx, hy, e2, ax, ay)
        for i in range(1, nx - 1):
            # interior offsets (i-1) + (j-1) must have parity ``color``
            for j in range(1 + (color + i - 1) % 2, ny - 1, 2):
                nb[0] = v[i + 1, j]
                nb[1] = v[i - 1, j]
                nb[2] = v[i, j + 1]
                nb[3] = v[i, j - 1]
                a[0] = ax[i, j - 1]
                a[1] = ax[i - 1, j - 1]
                a[2] = ay[i - 1, j]
                a[3] = ay[i - 1, j - 1]
                root = _local_root(v[i, j], nb, a, ih, 4, expo, pm1)
                v[i, j] = v[i, j] + omega * (root - v[i, j])


def relax_sweep(v, h, double p, double eps, double omega):
    cdef double expo = 0.5 * p - 1.0
    if v.ndim == 1:
        _sweep1(v, h[0], eps * eps, expo, p - 1.0, omega)
    else:
        ax = np.empty((v.shape[0] - 1, v.shape[1] - 2))
        ay = np.empty((v.shape[0] - 2, v.shape[1] - 1))
        _sweep2(v, h[0], h[1], eps * eps, expo, p - 1.0, omega, ax, ay)


def relax_residual(v, h, double p, double eps):
    cdef double expo = 0.5 * p - 1.0
    cdef double e2 = eps * eps
    cdef Py_ssize_t i, j
    cdef double hx, hy, ihx2, ihy2, we, ww, wn, ws, num, den
    cdef double[::1] w1, o1
    cdef double[:, ::1] wx, wy, o2
    cdef const double[::1] v1
    cdef const double[:, ::1] v2
    v = np.ascontiguousarray(v, dtype=np.float64)
    out = np.zeros_like(v)
    if v.ndim == 1:
        v1 = v
        o1 = out
        hx = h[0]
        w1 = np.empty(v.shape[0] - 1)
        _weights1(v1, hx, e2, expo, w1)
        for i in range(1, v1.shape[0] - 1):
            num = w1[i] * (v1[i + 1] - v1[i]) + w1[i - 1] * (v1[i - 1] - v1[i])
            o1[i] = num / (hx * hx) / (0.5 * (w1[i] + w1[i - 1]))
        return out
    v2 = v
    o2 = out
    hx, hy = h[0], h[1]
    ihx2 = 1.0 / (hx * hx)
    ihy2 = 1.0 / (hy * hy)
    wx = np.empty((v.shape[0] - 1, v.shape[1] - 2))
    wy = np.empty((v.shape[0] - 2, v.shape[1] - 1))
    _weights2(v2, hx, hy, e2, expo, wx, wy)
    for i in range(1, v2.shape[0] - 1):
        for j in range(1, v2.shape[1] - 1):
            we = wx[i, j - 1]
            ww = wx[i - 1, j - 1]
            wn = wy[i - 1, j]
            ws = wy[i - 1, j - 1]
            num = (we * v2[i + 1, j] + ww * v2[i - 1, j]) * ihx2 + (wn * v2[i, j + 1] + ws * v2[i, j - 1]) * ihy2
            den = (we + ww) * ihx2 + (wn + ws) * ihy2
            o2[i, j] = (num - den * v2[i, j]) / (0.25 * (we + ww + wn + ws))
    return out
