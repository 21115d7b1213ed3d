"""Uniform Cartesian grids, node-valued scalar fields and central stencils.

Arrays are indexed ``values[i]`` in 1D and ``values[i, j]`` in 2D, with the
first index running along ``x`` and the last axis varying fastest in the
flattened (row-major) order used by snapshot files.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .errors import PreconditionError, StencilError

_FMT = "%.17g"


def _as_tuple(value, n, cast):
    if np.ndim(value) == 0:
        return (cast(value),) * n
    out = tuple(cast(v) for v in value)
    if len(out) != n:
        raise ValueError(f"expected {n} entries, got {len(out)}")
    return out


@dataclass(frozen=True)
class Grid:
    """Uniform lattice over the box ``[lo, hi]`` with ``counts`` nodes per axis.

    Examples
    --------
    >>> g = Grid.square(-1.0, 1.0, 5)
    >>> g.n, g.h
    (2, (0.5, 0.5))
    """

    lo: tuple[float, ...]
    hi: tuple[float, ...]
    counts: tuple[int, ...]

    def __post_init__(self):
        lo = tuple(float(v) for v in np.atleast_1d(self.lo))
        hi = tuple(float(v) for v in np.atleast_1d(self.hi))
        counts = tuple(int(v) for v in np.atleast_1d(self.counts))
        if not (len(lo) == len(hi) == len(counts)):
            raise ValueError("lo, hi and counts must have the same length")
        if len(lo) not in (1, 2):
            raise ValueError(f"only n = 1 or n = 2 is supported, got n = {len(lo)}")
        if any(c < 3 for c in counts):
            raise ValueError(f"every axis needs at least 3 nodes, got {counts}")
        if any(not (b > a) for a, b in zip(lo, hi)):
            raise ValueError("hi must exceed lo on every axis")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        object.__setattr__(self, "counts", counts)

    @classmethod
    def square(cls, lo: float, hi: float, count: int, n: int = 2) -> "Grid":
        """Grid with identical bounds and node count on each of ``n`` axes."""
        return cls((lo,) * n, (hi,) * n, (count,) * n)

    @classmethod
    def from_spacing(cls, lo, hi, h, n: int = 2) -> "Grid":
        lo_t = _as_tuple(lo, n, float)
        hi_t = _as_tuple(hi, n, float)
        h_t = _as_tuple(h, n, float)
        counts = tuple(int(round((b - a) / s)) + 1 for a, b, s in zip(lo_t, hi_t, h_t))
        return cls(lo_t, hi_t, counts)

    @property
    def n(self) -> int:
        return len(self.counts)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.counts

    @property
    def size(self) -> int:
        return int(np.prod(self.counts))

    @property
    def h(self) -> tuple[float, ...]:
        return tuple((b - a) / (c - 1) for a, b, c in zip(self.lo, self.hi, self.counts))

    def axis(self, k: int) -> np.ndarray:
        """Node coordinates along axis ``k``: ``lo_k + i * h_k``."""
        return self.lo[k] + np.arange(self.counts[k]) * self.h[k]

    def coordinates(self) -> np.ndarray:
        """Array of shape ``counts + (n,)`` holding every node position."""
        mesh = np.meshgrid(*(self.axis(k) for k in range(self.n)), indexing="ij")
        return np.stack(mesh, axis=-1)

    def node_position(self, node: Sequence[int]) -> np.ndarray:
        return np.array([self.lo[k] + node[k] * self.h[k] for k in range(self.n)])

    def is_interior(self, node: Sequence[int]) -> bool:
        return len(node) == self.n and all(0 < i < c - 1 for i, c in zip(node, self.counts))

    def boundary_mask(self) -> np.ndarray:
        mask = np.ones(self.counts, dtype=bool)
        mask[(slice(1, -1),) * self.n] = False
        return mask

    def same_box(self, other: "Grid", tol: float = 1e-12) -> bool:
        if self.n != other.n:
            return False
        scale = max(1.0, *(abs(v) for v in self.lo + self.hi))
        return all(
            abs(a - b) <= tol * scale
            for a, b in zip(self.lo + self.hi, other.lo + other.hi)
        )

    def sample(self, func) -> np.ndarray:
        """Evaluate ``func(x)`` where ``x`` has shape ``counts + (n,)``."""
        return np.asarray(func(self.coordinates()), dtype=float)


@dataclass(frozen=True)
class ScalarField:
    """Node values of ``u(., t)`` on a grid at a fixed time."""

    grid: Grid
    values: np.ndarray = field(repr=False)
    time: float = 0.0

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.size != self.grid.size:
            raise ValueError(
                f"field has {values.size} values, grid has {self.grid.size} nodes"
            )
        values = values.reshape(self.grid.counts)
        if not np.all(np.isfinite(values)):
            raise ValueError("field values must be finite")
        if not self.time >= 0.0:
            raise ValueError("field time must be non-negative")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "time", float(self.time))

    @classmethod
    def from_function(cls, grid: Grid, func, time: float = 0.0) -> "ScalarField":
        return cls(grid, grid.sample(func), time)

    def with_values(self, values, time=None) -> "ScalarField":
        return ScalarField(self.grid, values, self.time if time is None else time)

    def interior(self) -> np.ndarray:
        return self.values[(slice(1, -1),) * self.grid.n]

    def __getitem__(self, node):
        return self.values[tuple(node)]


def _check_interior(field: ScalarField, node) -> tuple[int, ...]:
    node = tuple(int(i) for i in node)
    if not field.grid.is_interior(node):
        raise StencilError(f"node {node} has no full central stencil on {field.grid.counts}")
    return node


def _shift(node, k, d):
    out = list(node)
    out[k] += d
    return tuple(out)


def gradient_central(field: ScalarField, node) -> np.ndarray:
    """Central-difference gradient at an interior node."""
    node = _check_interior(field, node)
    u = field.values
    h = field.grid.h
    return np.array(
        [(u[_shift(node, k, 1)] - u[_shift(node, k, -1)]) / (2.0 * h[k]) for k in range(field.grid.n)]
    )


def hessian_central(field: ScalarField, node) -> np.ndarray:
    """Central-difference Hessian at an interior node.

    Diagonal entries use the 3-point second difference and off-diagonal ones
    the 4-point cross stencil. The upper triangle is mirrored, so the result
    is symmetric bit for bit.
    """
    node = _check_interior(field, node)
    u = field.values
    h = field.grid.h
    n = field.grid.n
    hess = np.empty((n, n))
    c = u[node]
    for k in range(n):
        hess[k, k] = (u[_shift(node, k, 1)] - 2.0 * c + u[_shift(node, k, -1)]) / (h[k] * h[k])
        for m in range(k + 1, n):
            pp = u[_shift(_shift(node, k, 1), m, 1)]
            pm = u[_shift(_shift(node, k, 1), m, -1)]
            mp = u[_shift(_shift(node, k, -1), m, 1)]
            mm = u[_shift(_shift(node, k, -1), m, -1)]
            hess[k, m] = hess[m, k] = (pp - pm - mp + mm) / (4.0 * h[k] * h[m])
    return hess


def gradient_array(values: np.ndarray, grid: Grid) -> np.ndarray:
    """Central gradients at all interior nodes, shape ``(n,) + interior shape``."""
    h = grid.h
    inner = (slice(1, -1),) * grid.n
    comps = []
    for k in range(grid.n):
        plus = list(inner)
        minus = list(inner)
        plus[k] = slice(2, None)
        minus[k] = slice(None, -2)
        comps.append((values[tuple(plus)] - values[tuple(minus)]) / (2.0 * h[k]))
    return np.stack(comps)


def extend_to_boundary(interior: np.ndarray) -> np.ndarray:
    """Pad an interior-node array to the full grid by copying the nearest interior node."""
    return np.pad(interior, 1, mode="edge")


def resample(field: ScalarField, finer: Grid) -> ScalarField:
    """Multilinear interpolation of ``field`` onto another grid over the same box."""
    src = field.grid
    if not src.same_box(finer):
        raise PreconditionError(
            f"domain boxes differ: {src.lo}..{src.hi} vs {finer.lo}..{finer.hi}"
        )
    if finer == src:
        return ScalarField(src, field.values.copy(), field.time)
    interp = RegularGridInterpolator(
        tuple(src.axis(k) for k in range(src.n)), field.values, method="linear"
    )
    pts = finer.coordinates()
    # clamp round-off excursions past the last node
    for k in range(src.n):
        pts[..., k] = np.clip(pts[..., k], src.axis(k)[0], src.axis(k)[-1])
    return ScalarField(finer, interp(pts), field.time)


def format_grid_header(field: ScalarField) -> str:
    g = field.grid
    nums = [_FMT % v for v in g.lo + g.hi] + [str(c) for c in g.counts] + [_FMT % field.time]
    return "# grid " + " ".join([str(g.n)] + nums)


def write_snapshot(field: ScalarField, path, comments: Sequence[str] = ()) -> None:
    """Write ``field`` in the text snapshot format.

    Optional ``#`` comment lines come first, then the header
    ``# grid n lo... hi... counts... time``, then one value per line in
    row-major order with 17 significant digits.
    """
    lines = ["# " + c for c in comments]
    lines.append(format_grid_header(field))
    lines.extend(_FMT % v for v in field.values.ravel(order="C"))
    Path(path).write_text("\n".join(lines) + "\n")


def read_snapshot(path) -> ScalarField:
    text = Path(path).read_text().splitlines()
    head = [ln for ln in text if ln.startswith("# grid ")]
    if not head:
        raise ValueError(f"{path}: missing '# grid' header line")
    tokens = head[0].split()[2:]
    n = int(tokens[0])
    if len(tokens) != 1 + 3 * n + 1:
        raise ValueError(f"{path}: malformed grid header")
    lo = [float(v) for v in tokens[1 : 1 + n]]
    hi = [float(v) for v in tokens[1 + n : 1 + 2 * n]]
    counts = [int(v) for v in tokens[1 + 2 * n : 1 + 3 * n]]
    time = float(tokens[-1])
    values = [float(line) for line in text if line.strip() and not line.startswith("#")]
    return ScalarField(Grid(tuple(lo), tuple(hi), tuple(counts)), np.array(values), time)
