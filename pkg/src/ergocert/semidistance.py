"""Pairwise cost functions (semi-distances) on a grid.

A cost here is a non-negative function on grid index pairs that vanishes
exactly on the diagonal.  Weighted-discrete costs of the form
1_{x != y} * (U(x) + U(y)) get a ``weight_vector`` structure hint, which the
transport and contraction layers use to dispatch to closed forms instead of
linear programs; everything else is evaluated generically.

The one deliberate exception to the zero-diagonal axiom is the gauge
vpi_rho(x, y) = 1 + rho*(V(x) + V(y)) returned by :func:`rho_family`, whose
diagonal is strictly positive by definition.  It is flagged ``is_gauge`` and
reported (not rejected) by :func:`validate_cost`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.spatial.distance import cdist

from .measures import Grid, WeightFunction

__all__ = [
    "CostFunction",
    "CostValidation",
    "discrete_metric",
    "weighted_discrete",
    "rho_family",
    "kappa_interp",
    "additive_cost",
    "exp_cost",
    "power_metric",
    "boundary_metric",
    "validate_cost",
]

MATRIX_CACHE_LIMIT = 4096


@dataclass(frozen=True, eq=False)
class CostFunction:
    """Lazy pairwise cost with an optional dense cache.

    ``pair_fn(i, j)`` takes broadcastable integer index arrays and returns the
    cost values.  ``weight_vector`` is set when the cost equals
    1_{i != j} * (U[i] + U[j]) (or U[i] + U[j] everywhere for gauges), and
    ``power`` when the cost is ||x - y||^power.
    """

    grid: Grid
    label: str
    pair_fn: Callable[[np.ndarray, np.ndarray], np.ndarray]
    symmetric: bool = True
    kind: str = "generic"
    weight_vector: np.ndarray | None = None
    power: float | None = None
    is_gauge: bool = False
    _cache: list = field(default_factory=lambda: [None], repr=False)

    def __repr__(self) -> str:  # arrays in fields make the default repr useless
        return f"CostFunction({self.label!r}, n={self.grid.n}, kind={self.kind!r})"

    @property
    def symmetric_flag(self) -> bool:
        return self.symmetric

    def evaluate(self, i: int, j: int) -> float:
        return float(self.pair_fn(np.asarray(i), np.asarray(j)))

    def pairwise(self, i: np.ndarray, j: np.ndarray) -> np.ndarray:
        return np.asarray(self.pair_fn(np.asarray(i), np.asarray(j)), dtype=float)

    def matrix(self) -> np.ndarray:
        """Dense n x n cost matrix, cached when n <= MATRIX_CACHE_LIMIT."""
        if self._cache[0] is not None:
            return self._cache[0]
        n = self.grid.n
        idx = np.arange(n)
        mat = self.pairwise(idx[:, None], idx[None, :])
        if n <= MATRIX_CACHE_LIMIT:
            mat.flags.writeable = False
            self._cache[0] = mat
        return mat

    def submatrix(self, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
        if self._cache[0] is not None:
            return self._cache[0][np.ix_(rows, cols)]
        return self.pairwise(np.asarray(rows)[:, None], np.asarray(cols)[None, :])


def _offdiag(i: np.ndarray, j: np.ndarray) -> np.ndarray:
    return (i != j).astype(float)


def discrete_metric(grid: Grid) -> CostFunction:
    """phi_0(x, y) = 1_{x != y}.

    Registered with the constant weight vector U = 1/2, since
    1_{x != y} * (1/2 + 1/2) is the same function; this lets the
    total-variation closed form serve it.
    """
    return CostFunction(
        grid,
        label="phi0",
        pair_fn=_offdiag,
        kind="discrete",
        weight_vector=np.full(grid.n, 0.5),
    )


def weighted_discrete(V: WeightFunction) -> CostFunction:
    """phi_V(x, y) = 1_{x != y} * (V(x) + V(y))."""
    vals = V.values

    def fn(i, j):
        return _offdiag(i, j) * (vals[i] + vals[j])

    return CostFunction(
        V.grid,
        label="phiV",
        pair_fn=fn,
        kind="weighted_discrete",
        weight_vector=vals,
    )


def rho_family(V: WeightFunction, rho: float) -> tuple[WeightFunction, CostFunction, CostFunction]:
    """Rescaled family (V_rho, vpi_rho, phi_rho) built from a weight V.

    V_rho = 1/2 + rho*V, vpi_rho(x,y) = 1 + rho*(V(x)+V(y)) = V_rho(x)+V_rho(y),
    phi_rho = phi_0 * vpi_rho.  The sandwich rho*vpi_V <= vpi_rho <=
    (1+rho)*vpi_V holds pointwise (the upper half needs V >= 1/2).
    vpi_rho has a positive diagonal and is returned as a gauge, not a
    semi-distance.
    """
    if not rho > 0:
        raise ValueError(f"rho must be positive, got {rho}")
    v_rho = WeightFunction(V.grid, 0.5 + rho * V.values, lower_bound=0.5)
    vals = v_rho.values

    def gauge_fn(i, j):
        return vals[i] + vals[j]

    vpi_rho = CostFunction(
        V.grid,
        label=f"vpiRho(rho={rho:g})",
        pair_fn=gauge_fn,
        kind="gauge",
        weight_vector=vals,
        is_gauge=True,
    )

    def phi_fn(i, j):
        return _offdiag(i, j) * (vals[i] + vals[j])

    phi_rho = CostFunction(
        V.grid,
        label=f"phiRho(rho={rho:g})",
        pair_fn=phi_fn,
        kind="weighted_discrete",
        weight_vector=vals,
    )
    return v_rho, vpi_rho, phi_rho


def kappa_interp(kappa: CostFunction, V: WeightFunction, rho: float | None,
                 iota: float) -> CostFunction:
    """Geometric interpolation kappa^iota * vpi^(1-iota).

    The gauge is vpi_rho when rho is given and vpi_V (= V(x)+V(y)) when rho is
    None.  The diagonal is forced to 0: for iota > 0 that is automatic from
    kappa, and at iota = 0 it is the documented convention (the raw formula
    would give the positive gauge diagonal).
    """
    if not 0.0 <= iota <= 1.0:
        raise ValueError(f"iota must lie in [0, 1], got {iota}")
    V.grid.require_same(kappa.grid, "cost and weight")
    # the gauge is vals[i] + vals[j] in both cases: vpi_V directly, and
    # vpi_rho = 1 + rho*(V(x)+V(y)) = V_rho(x) + V_rho(y)
    vals = V.values if rho is None else (0.5 + rho * V.values)

    def fn(i, j):
        gauge = vals[i] + vals[j]
        base = kappa.pair_fn(i, j)
        with np.errstate(invalid="ignore"):
            out = np.power(base, iota) * np.power(gauge, 1.0 - iota)
        return np.where(i == j, 0.0, out)

    tag = "V" if rho is None else f"rho={rho:g}"
    return CostFunction(
        V.grid,
        label=f"kappaInterp(iota={iota:g},{tag})",
        pair_fn=fn,
        symmetric=kappa.symmetric,
        kind="interp",
    )


def additive_cost(phi: CostFunction, psi: CostFunction) -> CostFunction:
    """Pointwise sum of two costs on the same grid."""
    phi.grid.require_same(psi.grid, "costs")

    def fn(i, j):
        return phi.pair_fn(i, j) + psi.pair_fn(i, j)

    wv = None
    kind = "generic"
    if (phi.weight_vector is not None and psi.weight_vector is not None
            and not phi.is_gauge and not psi.is_gauge):
        wv = phi.weight_vector + psi.weight_vector
        kind = "weighted_discrete"
    return CostFunction(
        phi.grid,
        label=f"additive({phi.label}+{psi.label})",
        pair_fn=fn,
        symmetric=phi.symmetric and psi.symmetric,
        kind=kind,
        weight_vector=wv,
        is_gauge=phi.is_gauge or psi.is_gauge,
    )


def _pair_dist(points: np.ndarray, i: np.ndarray, j: np.ndarray) -> np.ndarray:
    diff = points[i] - points[j]
    return np.linalg.norm(np.atleast_2d(diff), axis=-1) if diff.ndim > 1 else np.abs(diff)


def exp_cost(delta: float, grid: Grid) -> CostFunction:
    """vpi_e(x, y) = 2 * (exp(delta * ||x - y|| / 2) - 1)."""
    if not delta > 0:
        raise ValueError(f"delta must be positive, got {delta}")
    pts = grid.points

    def fn(i, j):
        d = np.linalg.norm(pts[i] - pts[j], axis=-1)
        return 2.0 * np.expm1(0.5 * delta * d)

    return CostFunction(grid, label=f"expCost(delta={delta:g})", pair_fn=fn, kind="exp")


def power_metric(p: float, grid: Grid) -> CostFunction:
    """||x - y||^p on grid points (Euclidean norm)."""
    if not p > 0:
        raise ValueError(f"p must be positive, got {p}")
    pts = grid.points

    def fn(i, j):
        d = np.linalg.norm(pts[i] - pts[j], axis=-1)
        return d ** p

    return CostFunction(
        grid, label=f"powerMetric(p={p:g})", pair_fn=fn, kind="power", power=float(p)
    )


def boundary_metric(iota: float, grid: Grid) -> CostFunction:
    """Complete metric adapted to the open domain, exploding at the boundary.

    open_interval(a, b):      |1/(x-a) - 1/(y-a)|^iota + |1/(b-x) - 1/(b-y)|^iota
    half_line_truncated:      |1/x - 1/y|^iota + |x - y|   (linear far term)
    box:                      |1/d(x) - 1/d(y)|^iota + ||x - y||^iota
                              with d(.) the distance to the box boundary.
    """
    if not 0.0 < iota <= 1.0:
        raise ValueError(f"iota must lie in (0, 1], got {iota}")
    kind = grid.domain.kind
    pts = grid.points
    if kind == "open_interval":
        a, b = grid.domain.params
        left = pts[:, 0] - a
        right = b - pts[:, 0]
        if np.any(left <= 0) or np.any(right <= 0):
            raise ValueError("singular cost: a grid point touches the interval boundary")
        inv_l = 1.0 / left
        inv_r = 1.0 / right

        def fn(i, j):
            return (np.abs(inv_l[i] - inv_l[j]) ** iota
                    + np.abs(inv_r[i] - inv_r[j]) ** iota)

    elif kind == "half_line_truncated":
        x = pts[:, 0]
        if np.any(x <= 0):
            raise ValueError("singular cost: a grid point touches the origin")
        inv = 1.0 / x

        def fn(i, j):
            return np.abs(inv[i] - inv[j]) ** iota + np.abs(x[i] - x[j])

    else:
        bdist = grid.boundary_distance()
        if np.any(bdist <= 0):
            raise ValueError("singular cost: a grid point touches the box boundary")
        inv = 1.0 / bdist

        def fn(i, j):
            d = np.linalg.norm(pts[i] - pts[j], axis=-1)
            return np.abs(inv[i] - inv[j]) ** iota + d ** iota

    return CostFunction(
        grid, label=f"boundaryMetric(iota={iota:g},{kind})", pair_fn=fn, kind="boundary"
    )


@dataclass(frozen=True)
class CostValidation:
    """Semi-distance axioms and the V-domination ratio, reported not thrown."""

    max_ratio: float
    zero_diagonal: bool
    max_diagonal: float
    positive_offdiag: bool
    min_offdiag: float
    symmetric: bool
    max_asymmetry: float
    is_gauge: bool

    @property
    def valid_semidistance(self) -> bool:
        return self.zero_diagonal and self.positive_offdiag


def validate_cost(phi: CostFunction, V: WeightFunction) -> CostValidation:
    """Check the semi-distance axioms and report max phi(x,y)/(V(x)+V(y)).

    The ratio is the grid surrogate of the V-domination norm; it is exact for
    the discretized problem and a lower bound for the continuum value.
    """
    phi.grid.require_same(V.grid, "cost and weight")
    mat = phi.matrix()
    n = phi.grid.n
    diag = np.abs(np.diagonal(mat))
    off_mask = ~np.eye(n, dtype=bool)
    off = mat[off_mask]
    gauge = V.values[:, None] + V.values[None, :]
    ratio = float((mat / gauge)[off_mask].max()) if n > 1 else 0.0
    asym = float(np.abs(mat - mat.T).max())
    return CostValidation(
        max_ratio=ratio,
        zero_diagonal=bool(diag.max(initial=0.0) == 0.0),
        max_diagonal=float(diag.max(initial=0.0)),
        positive_offdiag=bool(off.min(initial=np.inf) > 0.0),
        min_offdiag=float(off.min(initial=np.inf)),
        symmetric=bool(asym <= 1e-12),
        max_asymmetry=asym,
        is_gauge=phi.is_gauge,
    )


def pairwise_weighted_l1(rows: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """All-pairs sum_k |rows[a,k] - rows[b,k]| * weights[k], as a matrix.

    This is the closed-form Kantorovich distance matrix between the row
    measures under the weighted-discrete cost with weight vector ``weights``.
    """
    return cdist(rows * weights[None, :], rows * weights[None, :], metric="cityblock")
