"""Built-in initial data, evaluated on arrays of points with last axis ``n``."""
from __future__ import annotations

import numpy as np

from .exact import SelfSimilarParams, gp_exact


def _radius(x, center=0.0):
    x = np.asarray(x, dtype=float)
    d = x - np.broadcast_to(np.asarray(center, dtype=float), x.shape[-1:])
    return np.sqrt(np.sum(d * d, axis=-1))


def bump(x, center=0.0, radius=1.0, height=1.0):
    """Smooth bump ``height * exp(1 - 1 / (1 - (r/R)^2))`` supported in ``r < R``."""
    s = (_radius(x, center) / radius) ** 2
    out = np.zeros_like(s)
    inside = s < 1.0
    out[inside] = height * np.exp(1.0 - 1.0 / (1.0 - s[inside]))
    return out


def cone(x, r0=1.0):
    """Radial cone ``min(|x| - r0, r0)``: zero level set is the sphere of radius ``r0``.

    Constant (``r0``) for ``|x| >= 2 r0``.
    """
    return np.minimum(_radius(x) - r0, r0)


def concave_cone(x):
    """Concave Lipschitz datum ``min(0, 1 - |x|)``."""
    return np.minimum(0.0, 1.0 - _radius(x))


def saddle(x):
    """``x^2 - y^2`` in 2D (``x^2`` in 1D)."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] == 1:
        return x[..., 0] ** 2
    return x[..., 0] ** 2 - x[..., 1] ** 2


def gp_initial(x, p=2.0, t=1.0):
    x = np.asarray(x, dtype=float)
    return gp_exact(x, t, SelfSimilarParams(p, x.shape[-1]))


DATUMS = {
    "bump": bump,
    "cone": cone,
    "saddle": saddle,
    "gp": gp_initial,
    "concave": concave_cone,
}
