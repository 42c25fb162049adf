"""Grids, discrete probability measures, and weight functions.

Everything downstream works on a fixed finite grid: probability measures are
non-negative vectors summing to one, Lyapunov/weight functions are positive
vectors bounded away from zero, and kernels are row-stochastic matrices over
the same index set.  Unbounded domains are truncated up front (the truncation
bounds are part of the domain description), so every object here is a plain
numpy array with its invariants checked at construction time.

All containers are immutable after construction: the underlying arrays are
marked read-only, so instances can be shared freely across workers.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "Domain",
    "open_interval",
    "half_line_truncated",
    "box",
    "Grid",
    "DiscreteMeasure",
    "WeightFunction",
    "build_grid",
    "discretize_density",
    "rescale_weight",
    "weighted_norm_diff",
    "total_variation",
    "save_measure",
    "load_measure",
]

_DOMAIN_KINDS = ("open_interval", "half_line_truncated", "box")


@dataclass(frozen=True)
class Domain:
    """Open truncated domain in R^d.

    ``kind`` is one of ``open_interval`` (params ``(a, b)``),
    ``half_line_truncated`` (params ``(x_min, x_max)`` with
    ``0 < x_min < x_max``, a computational window inside ``(0, inf)``), or
    ``box`` (params ``(lo, hi)`` with per-axis bounds, d in {1, 2, 3}).
    """

    kind: str
    params: tuple

    def __post_init__(self) -> None:
        if self.kind not in _DOMAIN_KINDS:
            raise ValueError(f"unknown domain kind {self.kind!r}")
        if self.kind == "open_interval":
            a, b = self.params
            if not (math.isfinite(a) and math.isfinite(b) and a < b):
                raise ValueError(f"invalid interval bounds ({a}, {b})")
        elif self.kind == "half_line_truncated":
            x_min, x_max = self.params
            if not (0.0 < x_min < x_max and math.isfinite(x_max)):
                raise ValueError(
                    f"half-line truncation needs 0 < x_min < x_max, got ({x_min}, {x_max})"
                )
        else:
            lo, hi = self.params
            lo = tuple(float(v) for v in np.atleast_1d(lo))
            hi = tuple(float(v) for v in np.atleast_1d(hi))
            if len(lo) != len(hi) or not 1 <= len(lo) <= 3:
                raise ValueError(f"box needs matching lo/hi of dimension 1..3, got {lo}, {hi}")
            if any(l >= h for l, h in zip(lo, hi)):
                raise ValueError(f"box needs lo < hi per axis, got {lo}, {hi}")
            object.__setattr__(self, "params", (lo, hi))

    @property
    def dim(self) -> int:
        if self.kind == "box":
            return len(self.params[0])
        return 1

    @property
    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        """Per-axis (lo, hi) arrays of the truncated computational window."""
        if self.kind == "box":
            lo, hi = self.params
            return np.asarray(lo, float), np.asarray(hi, float)
        a, b = self.params
        return np.asarray([a], float), np.asarray([b], float)

    @property
    def volume(self) -> float:
        lo, hi = self.bounds
        return float(np.prod(hi - lo))

    def contains_interior(self, points: np.ndarray) -> np.ndarray:
        lo, hi = self.bounds
        return np.all((points > lo) & (points < hi), axis=1)

    def boundary_distance(self, points: np.ndarray) -> np.ndarray:
        """Distance to the boundary of the underlying (untruncated) open set.

        For the truncated half-line the relevant boundary is {0}, not the
        truncation cuts, so the distance is the coordinate itself.
        """
        if self.kind == "half_line_truncated":
            return points[:, 0].copy()
        lo, hi = self.bounds
        margins = np.minimum(points - lo, hi - points)
        return margins.min(axis=1)

    def to_json(self) -> dict:
        if self.kind == "box":
            lo, hi = self.params
            return {"kind": self.kind, "params": [list(lo), list(hi)]}
        return {"kind": self.kind, "params": list(self.params)}

    @staticmethod
    def from_json(obj: dict) -> "Domain":
        kind = obj["kind"]
        params = obj["params"]
        if kind == "box":
            return Domain(kind, (tuple(params[0]), tuple(params[1])))
        return Domain(kind, tuple(params))


def open_interval(a: float, b: float) -> Domain:
    return Domain("open_interval", (float(a), float(b)))


def half_line_truncated(x_min: float, x_max: float) -> Domain:
    return Domain("half_line_truncated", (float(x_min), float(x_max)))


def box(lo: Sequence[float], hi: Sequence[float]) -> Domain:
    return Domain("box", (tuple(float(v) for v in np.atleast_1d(lo)),
                          tuple(float(v) for v in np.atleast_1d(hi))))


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=float)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class Grid:
    """Finite point set with quadrature weights inside an open domain.

    Parameters
    ----------
    points : (n, d) array
        Grid nodes, pairwise distinct, strictly interior to ``domain``.
        1-d grids are ascending; box grids are in row-major (lexicographic)
        axis order.
    cell_volumes : (n,) array
        Strictly positive quadrature weights, one cell per node.
    domain : Domain
        The open set the grid discretizes.
    """

    points: np.ndarray
    cell_volumes: np.ndarray
    domain: Domain

    def __post_init__(self) -> None:
        pts = np.ascontiguousarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        vols = np.ascontiguousarray(self.cell_volumes, dtype=float)
        if pts.ndim != 2 or pts.shape[1] not in (1, 2, 3):
            raise ValueError(f"points must be (n, d) with d in 1..3, got shape {pts.shape}")
        if vols.shape != (pts.shape[0],):
            raise ValueError(
                f"cell_volumes shape {vols.shape} does not match {pts.shape[0]} points"
            )
        if not np.all(vols > 0):
            raise ValueError("cell_volumes must be strictly positive")
        if pts.shape[1] != self.domain.dim:
            raise ValueError(
                f"points are {pts.shape[1]}-dimensional but domain is {self.domain.dim}-dimensional"
            )
        if not np.all(self.domain.contains_interior(pts)):
            raise ValueError("all grid points must lie strictly inside the open domain")
        if len(np.unique(pts, axis=0)) != len(pts):
            raise ValueError("grid points must be pairwise distinct")
        object.__setattr__(self, "points", _freeze(pts))
        object.__setattr__(self, "cell_volumes", _freeze(vols))

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def x(self) -> np.ndarray:
        """First coordinate of every node; the whole axis for 1-d grids."""
        return self.points[:, 0]

    def same_as(self, other: "Grid") -> bool:
        return self is other or (
            self.points.shape == other.points.shape
            and np.array_equal(self.points, other.points)
            and np.array_equal(self.cell_volumes, other.cell_volumes)
        )

    def require_same(self, other: "Grid", what: str = "operands") -> None:
        if not self.same_as(other):
            raise ValueError(f"{what} live on different grids")

    def boundary_distance(self) -> np.ndarray:
        return self.domain.boundary_distance(self.points)


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    """Probability measure supported on the nodes of a grid."""

    grid: Grid
    weights: np.ndarray

    def __post_init__(self) -> None:
        w = np.ascontiguousarray(self.weights, dtype=float)
        if w.shape != (self.grid.n,):
            raise ValueError(f"weights shape {w.shape} does not match grid size {self.grid.n}")
        if np.any(w < 0):
            raise ValueError(f"weights must be non-negative, min is {w.min():.3e}")
        total = w.sum()
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"weights must sum to 1 within 1e-12, got {total!r}")
        object.__setattr__(self, "weights", _freeze(w))

    @staticmethod
    def dirac(grid: Grid, index: int) -> "DiscreteMeasure":
        w = np.zeros(grid.n)
        w[index] = 1.0
        return DiscreteMeasure(grid, w)

    @staticmethod
    def uniform(grid: Grid) -> "DiscreteMeasure":
        return DiscreteMeasure(grid, np.full(grid.n, 1.0 / grid.n))

    @staticmethod
    def from_unnormalized(grid: Grid, raw: np.ndarray) -> "DiscreteMeasure":
        raw = np.asarray(raw, dtype=float)
        total = raw.sum()
        if not total > 0:
            raise ValueError("cannot normalize a measure with zero total mass")
        return DiscreteMeasure(grid, raw / total)

    def integrate(self, values: np.ndarray) -> float:
        return float(self.weights @ np.asarray(values, dtype=float))


@dataclass(frozen=True, eq=False)
class WeightFunction:
    """Positive function on grid nodes, bounded away from zero.

    ``lower_bound`` is part of the certificate: every stored value is checked
    against it, and downstream rescalings rely on it staying positive.
    """

    grid: Grid
    values: np.ndarray
    lower_bound: float = field(default=0.0)

    def __post_init__(self) -> None:
        v = np.ascontiguousarray(self.values, dtype=float)
        if v.shape != (self.grid.n,):
            raise ValueError(f"values shape {v.shape} does not match grid size {self.grid.n}")
        lb = self.lower_bound
        if lb == 0.0:
            lb = float(v.min())
        if not lb > 0:
            raise ValueError(f"weight functions must be positive, lower bound {lb!r}")
        if np.any(v < lb - 1e-15):
            raise ValueError(
                f"weight values dip below the declared lower bound {lb} (min {v.min()!r})"
            )
        object.__setattr__(self, "values", _freeze(v))
        object.__setattr__(self, "lower_bound", float(lb))

    @staticmethod
    def from_callable(grid: Grid, fn: Callable[[np.ndarray], np.ndarray]) -> "WeightFunction":
        vals = np.asarray(fn(grid.points), dtype=float).reshape(grid.n)
        return WeightFunction(grid, vals)

    def __add__(self, other: float) -> "WeightFunction":
        return WeightFunction(self.grid, self.values + float(other))

    def scaled(self, factor: float) -> "WeightFunction":
        if not factor > 0:
            raise ValueError(f"scale factor must be positive, got {factor}")
        return WeightFunction(self.grid, factor * self.values)


def build_grid(domain: Domain, n_per_dim: int) -> Grid:
    """Uniform midpoint grid over the (truncated) domain.

    Each axis of the computational window is split into ``n_per_dim`` equal
    cells and nodes sit at cell midpoints, so all nodes are strictly interior
    and cell volumes are uniform.  A box in dimension d yields n_per_dim**d
    nodes in row-major axis order.

    Examples
    --------
    >>> g = build_grid(open_interval(0.0, 1.0), 4)
    >>> g.x.tolist()
    [0.125, 0.375, 0.625, 0.875]
    """
    n = int(n_per_dim)
    if n < 2:
        raise ValueError(f"need at least 2 cells per axis, got {n}")
    lo, hi = domain.bounds
    steps = (hi - lo) / n
    axes = [lo[k] + steps[k] * (np.arange(n) + 0.5) for k in range(domain.dim)]
    if domain.dim == 1:
        pts = axes[0][:, None]
    else:
        mesh = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([m.ravel() for m in mesh], axis=1)
    vol = float(np.prod(steps))
    return Grid(pts, np.full(pts.shape[0], vol), domain)


def discretize_density(density: Callable[[np.ndarray], np.ndarray], grid: Grid) -> DiscreteMeasure:
    """Project a density onto the grid by the midpoint rule and renormalize.

    ``density`` is evaluated vectorized on ``grid.points`` (shape (n, d));
    scalar-only callables are accepted and applied row by row.  Weights are
    proportional to density * cell_volume.  A density that vanishes at every
    node leaves nothing to normalize and raises.
    """
    try:
        vals = np.asarray(density(grid.points), dtype=float).reshape(grid.n)
    except Exception:
        vals = np.asarray([float(density(p)) for p in grid.points], dtype=float)
    if not np.all(np.isfinite(vals)):
        raise ValueError("density must be finite at every grid point")
    if np.any(vals < 0):
        raise ValueError(f"density must be non-negative, min value {vals.min():.3e}")
    raw = vals * grid.cell_volumes
    total = raw.sum()
    if not total > 0:
        raise ValueError("degenerate measure: density carries no mass on this grid")
    return DiscreteMeasure(grid, raw / total)


def rescale_weight(V: WeightFunction, eps: float, c: float) -> WeightFunction:
    """Return V_bar = 1/2 + (eps / (2c)) * V.

    If P(V) <= eps*V + c then the rescaled weight satisfies
    P(V_bar) <= eps*V_bar + 1/2, which is the normalization the explicit
    bounds are stated in.  The result is bounded below by 1/2 by
    construction.
    """
    if not 0.0 < eps < 1.0:
        raise ValueError(f"eps must lie in (0, 1), got {eps}")
    if not c > 0.5:
        raise ValueError(f"c must exceed 1/2, got {c}")
    vals = 0.5 + (eps / (2.0 * c)) * V.values
    return WeightFunction(V.grid, vals, lower_bound=0.5)


def weighted_norm_diff(mu1: DiscreteMeasure, mu2: DiscreteMeasure, V: WeightFunction) -> float:
    """V-weighted total variation ||mu1 - mu2||_V = sum_i |mu1 - mu2|[i] * V[i]."""
    mu1.grid.require_same(mu2.grid, "measures")
    mu1.grid.require_same(V.grid, "measure and weight")
    return float(np.abs(mu1.weights - mu2.weights) @ V.values)


def total_variation(mu1: DiscreteMeasure, mu2: DiscreteMeasure) -> float:
    """Total variation distance, half the L1 difference of the weight vectors."""
    mu1.grid.require_same(mu2.grid, "measures")
    return 0.5 * float(np.abs(mu1.weights - mu2.weights).sum())


def save_measure(path: str | Path, mu: DiscreteMeasure) -> None:
    """Write a measure (with its grid) as JSON.

    Layout: {"points": [[...], ...], "cell_volumes": [...], "weights": [...]}
    plus a "domain" block so the grid can be rebuilt exactly.
    """
    payload = {
        "points": mu.grid.points.tolist(),
        "cell_volumes": mu.grid.cell_volumes.tolist(),
        "weights": mu.weights.tolist(),
        "domain": mu.grid.domain.to_json(),
    }
    Path(path).write_text(json.dumps(payload))


def load_measure(path: str | Path, grid: Grid | None = None) -> DiscreteMeasure:
    """Read a measure written by :func:`save_measure`.

    If ``grid`` is given the stored points must match it; otherwise the grid
    is rebuilt from the stored fields.  Files without a "domain" block get a
    bounding box padded by half a cell width, which keeps every stored point
    interior.
    """
    obj = json.loads(Path(path).read_text())
    pts = np.asarray(obj["points"], dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    vols = np.asarray(obj["cell_volumes"], dtype=float)
    if grid is None:
        if "domain" in obj:
            dom = Domain.from_json(obj["domain"])
        else:
            pad = 0.5 * float(vols.min()) ** (1.0 / pts.shape[1])
            dom = box(pts.min(axis=0) - pad, pts.max(axis=0) + pad)
        grid = Grid(pts, vols, dom)
    else:
        if not np.array_equal(pts, grid.points):
            raise ValueError("stored points do not match the supplied grid")
    return DiscreteMeasure(grid, np.asarray(obj["weights"], dtype=float))
