"""Row-stochastic kernels on grids and the example model families.

Builders integrate the transition density exactly per cell whenever the
density is piecewise analytic (the interval chain's two-piece density, the
Gaussian pieces via error functions, the Weibull refresh via its closed-form
CDF) and renormalize rows after truncation.  Out-of-window mass in the
iterated-random-function builder is clamped to the boundary cells and the
clamped fraction is reported, since stochastic rows are load-bearing for
everything downstream.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import erf

from .measures import (
    DiscreteMeasure,
    Grid,
    WeightFunction,
    build_grid,
    discretize_density,
    half_line_truncated,
    open_interval,
)

__all__ = [
    "KernelMatrix",
    "GibbsModel",
    "GibbsPair",
    "IrfModel",
    "IrfBuildReport",
    "ModelBundle",
    "left_action",
    "right_action",
    "power",
    "op_norm_V",
    "op_norm_VW",
    "cell_edges_1d",
    "build_unit_interval_kernel",
    "build_arcsine_kernel",
    "build_halfline_kernel",
    "build_irf_kernel",
    "build_langevin_kernel",
    "build_gibbs_pair",
    "build_model",
    "MODEL_DEFAULTS",
    "save_kernel_csv",
]


@dataclass(frozen=True, eq=False)
class KernelMatrix:
    """Markov kernel as a dense row-stochastic matrix over grid nodes."""

    grid: Grid
    rows: np.ndarray
    model_tag: str = "kernel"

    def __post_init__(self) -> None:
        r = np.ascontiguousarray(self.rows, dtype=float)
        if r.shape != (self.grid.n, self.grid.n):
            raise ValueError(f"kernel shape {r.shape} does not match grid size {self.grid.n}")
        if r.min(initial=0.0) < -1e-12:
            raise ValueError(f"kernel entries must be non-negative, min {r.min():.3e}")
        r = np.maximum(r, 0.0)
        sums = r.sum(axis=1)
        err = float(np.abs(sums - 1.0).max())
        if err > 1e-10:
            raise ValueError(f"kernel rows must sum to 1 within 1e-10, worst error {err:.3e}")
        r.flags.writeable = False
        object.__setattr__(self, "rows", r)

    @property
    def n(self) -> int:
        return self.grid.n

    def compose(self, other: "KernelMatrix") -> "KernelMatrix":
        self.grid.require_same(other.grid, "kernels")
        return KernelMatrix(self.grid, self.rows @ other.rows,
                            model_tag=f"{self.model_tag}*{other.model_tag}")


def left_action(mu: DiscreteMeasure, P: KernelMatrix) -> DiscreteMeasure:
    """mu P; the result is renormalized to absorb float drift (< 1e-10)."""
    mu.grid.require_same(P.grid, "measure and kernel")
    w = mu.weights @ P.rows
    return DiscreteMeasure(P.grid, w / w.sum())


def right_action(P: KernelMatrix, f: np.ndarray) -> np.ndarray:
    f = np.asarray(f, dtype=float).reshape(P.n)
    return P.rows @ f


def power(P: KernelMatrix, n: int) -> KernelMatrix:
    """P_n by binary exponentiation; P_0 is the identity."""
    if n < 0:
        raise ValueError(f"power must be non-negative, got {n}")
    result = np.eye(P.n)
    base = P.rows.copy()
    k = n
    while k:
        if k & 1:
            result = result @ base
        k >>= 1
        if k:
            base = base @ base
    return KernelMatrix(P.grid, result, model_tag=f"{P.model_tag}^{n}")


def op_norm_V(P: KernelMatrix, V: WeightFunction) -> float:
    """Operator norm ||P(V)/V|| = max_i P(V)[i] / V[i]."""
    P.grid.require_same(V.grid, "kernel and weight")
    return float((P.rows @ V.values / V.values).max())


def op_norm_VW(K: KernelMatrix, V: WeightFunction, W: WeightFunction) -> float:
    """Mixed norm ||K(W)/V||; submultiplicative along compositions."""
    K.grid.require_same(V.grid, "kernel and weight")
    K.grid.require_same(W.grid, "kernel and weight")
    return float((K.rows @ W.values / V.values).max())


def cell_edges_1d(grid: Grid) -> np.ndarray:
    """Cell boundaries for a 1-d grid: midpoints inside, domain bounds outside."""
    if grid.dim != 1:
        raise ValueError("cell edges are defined for 1-d grids only")
    x = grid.x
    lo, hi = grid.domain.bounds
    edges = np.empty(grid.n + 1)
    edges[0] = lo[0]
    edges[-1] = hi[0]
    edges[1:-1] = 0.5 * (x[1:] + x[:-1])
    return edges


def _normalize_rows(raw: np.ndarray) -> np.ndarray:
    sums = raw.sum(axis=1, keepdims=True)
    if np.any(sums <= 0):
        raise ValueError("a kernel row lost all mass under truncation")
    return raw / sums


# ---------------------------------------------------------------------------
# interval and half-line chains


def build_unit_interval_kernel(Q: KernelMatrix, nu: DiscreteMeasure) -> KernelMatrix:
    """Mixture chain on (0,1): row x is x * Q(x, .) + (1 - x) * nu."""
    Q.grid.require_same(nu.grid, "kernel and refresh measure")
    dom = Q.grid.domain
    if dom.kind != "open_interval" or dom.params != (0.0, 1.0):
        raise ValueError("the mixture chain lives on the open unit interval")
    x = Q.grid.x[:, None]
    rows = x * Q.rows + (1.0 - x) * nu.weights[None, :]
    return KernelMatrix(Q.grid, rows, model_tag="unit_interval_mixture")


def build_arcsine_kernel(grid: Grid) -> KernelMatrix:
    """Chain on (0,1) with density 1/(2x) on (0, x] and 1/(2(1-x)) on (x, 1).

    Cell masses are exact integrals of the piecewise-constant density; the
    cell containing x is split exactly.
    """
    dom = grid.domain
    if dom.kind != "open_interval" or dom.params != (0.0, 1.0):
        raise ValueError("the arcsine chain lives on the open unit interval")
    edges = cell_edges_1d(grid)
    lo = edges[:-1][None, :]
    hi = edges[1:][None, :]
    x = grid.x[:, None]
    left_len = np.clip(np.minimum(hi, x) - lo, 0.0, None)
    right_len = np.clip(hi - np.maximum(lo, x), 0.0, None)
    rows = left_len / (2.0 * x) + right_len / (2.0 * (1.0 - x))
    return KernelMatrix(grid, _normalize_rows(rows), model_tag="arcsine")


def build_halfline_kernel(delta: float, gamma: float, grid: Grid) -> KernelMatrix:
    """Half-line chain: uniform backward jump, half-Gaussian forward jump,
    Weibull refresh.

    Row x is (delta/2) * Uniform(0, x] + (delta/2) * half-Gaussian shifted to
    x + (1 - delta) * Weibull(shape 1 + gamma), all integrated exactly per
    cell (the Weibull CDF is 1 - exp(-z^(1+gamma))) and renormalized after
    truncation to the computational window.
    """
    if not 0.0 <= delta < 1.0:
        raise ValueError(f"delta must lie in [0, 1), got {delta}")
    if not gamma > 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    if grid.domain.kind != "half_line_truncated":
        raise ValueError("the half-line chain needs a truncated half-line grid")
    edges = cell_edges_1d(grid)
    lo = edges[:-1][None, :]
    hi = edges[1:][None, :]
    x = grid.x[:, None]

    uniform = np.clip(np.minimum(hi, x) - lo, 0.0, None) / x

    # half-Gaussian forward: density sqrt(2/pi) exp(-z^2/2) for z = y - x > 0,
    # CDF erf(z / sqrt 2)
    z_hi = np.clip(hi - x, 0.0, None)
    z_lo = np.clip(lo - x, 0.0, None)
    gauss = erf(z_hi / math.sqrt(2.0)) - erf(z_lo / math.sqrt(2.0))

    weib = np.exp(-lo ** (1.0 + gamma)) - np.exp(-hi ** (1.0 + gamma))
    weib = np.broadcast_to(weib, uniform.shape)

    rows = 0.5 * delta * (uniform + gauss) + (1.0 - delta) * weib
    return KernelMatrix(grid, _normalize_rows(rows), model_tag="half_line")


# ---------------------------------------------------------------------------
# iterated random functions and the Euler scheme


@dataclass(frozen=True, eq=False)
class IrfModel:
    """Random iteration x -> F(x) + G, with G drawn from ``noise``.

    ``noise`` is a discrete measure on a displacement grid; the deterministic
    part F acts on state coordinates.  ``decomposition_tag`` records the
    additive split used.
    """

    F: Callable[[np.ndarray], np.ndarray]
    noise: DiscreteMeasure
    decomposition_tag: str = "F+G_Z"

    def noise_moment(self, p: float) -> float:
        """E(||G||^p)^(1/p) over the displacement atoms."""
        z = np.abs(self.noise.grid.x)
        return float((self.noise.weights @ z ** p) ** (1.0 / p))

    def noise_exp_moment(self, delta: float) -> float:
        """E exp(delta * ||G||) over the displacement atoms."""
        z = np.abs(self.noise.grid.x)
        return float(self.noise.weights @ np.exp(delta * z))


@dataclass(frozen=True)
class IrfBuildReport:
    clamped_fraction: float
    truncation_warning: bool


def build_irf_kernel(model: IrfModel, grid: Grid) -> tuple[KernelMatrix, IrfBuildReport]:
    """Kernel rows P(x, .) = law of F(x) + G on the grid cells.

    Image mass falling outside the computational window is clamped to the
    nearest boundary cell; a clamped fraction above 1e-3 raises the
    truncation warning flag in the report.
    """
    edges = cell_edges_1d(grid)
    fx = np.asarray(model.F(grid.x), dtype=float).reshape(grid.n)
    z = model.noise.grid.x
    w = model.noise.weights
    y = fx[:, None] + z[None, :]
    cells = np.searchsorted(edges, y, side="right") - 1
    clamped = float(w[None, :].repeat(grid.n, axis=0)[(cells < 0) | (cells >= grid.n)].sum()) / grid.n
    cells = np.clip(cells, 0, grid.n - 1)
    rows = np.zeros((grid.n, grid.n))
    rr = np.repeat(np.arange(grid.n), len(z))
    np.add.at(rows, (rr, cells.ravel()), np.tile(w, grid.n))
    kernel = KernelMatrix(grid, _normalize_rows(rows), model_tag="irf")
    return kernel, IrfBuildReport(clamped_fraction=clamped,
                                  truncation_warning=clamped > 1e-3)


def build_langevin_kernel(grad_U: Callable[[np.ndarray], np.ndarray], gamma: float,
                          sigma: float, h: float, grid: Grid) -> KernelMatrix:
    """One Euler step of dX = -gamma grad U(X) dt + sigma dB.

    Rows are Gaussian with mean x - gamma * grad U(x) * h and standard
    deviation sigma * sqrt(h), integrated per cell via error functions and
    renormalized (tail mass outside the window is discarded).  sigma = 0
    degenerates to the deterministic jump onto the nearest cell.
    """
    if not h > 0:
        raise ValueError(f"step size must be positive, got {h}")
    edges = cell_edges_1d(grid)
    x = grid.x
    means = x - gamma * np.asarray(grad_U(x), dtype=float).reshape(grid.n) * h
    if sigma == 0.0:
        cells = np.clip(np.searchsorted(edges, means, side="right") - 1, 0, grid.n - 1)
        rows = np.zeros((grid.n, grid.n))
        rows[np.arange(grid.n), cells] = 1.0
        return KernelMatrix(grid, rows, model_tag="langevin")
    std = sigma * math.sqrt(h)
    zs = (edges[None, :] - means[:, None]) / (std * math.sqrt(2.0))
    cdf = 0.5 * (1.0 + erf(zs))
    rows = np.diff(cdf, axis=1)
    return KernelMatrix(grid, _normalize_rows(rows), model_tag="langevin")


# ---------------------------------------------------------------------------
# two-block Gibbs pair


@dataclass(frozen=True, eq=False)
class GibbsModel:
    """Discrete two-block Gibbs data on a shared grid.

    ``nu`` is a positive base measure (cell masses), ``g`` and ``h`` are
    normalized potentials (exp(-g) nu and exp(-h) nu are probability
    measures), and ``m[y, x]`` is the transition potential with
    exp(-m(y, .)) nu row-normalized.  ``delta`` in (0, 1/2) sets the
    Lyapunov pair (exp(delta g), exp(delta h)).
    """

    grid: Grid
    nu: np.ndarray
    g: np.ndarray
    h: np.ndarray
    m: np.ndarray
    delta: float

    def __post_init__(self) -> None:
        n = self.grid.n
        nu = np.ascontiguousarray(self.nu, dtype=float)
        g = np.ascontiguousarray(self.g, dtype=float)
        h = np.ascontiguousarray(self.h, dtype=float)
        m = np.ascontiguousarray(self.m, dtype=float)
        if nu.shape != (n,) or g.shape != (n,) or h.shape != (n,) or m.shape != (n, n):
            raise ValueError("Gibbs model arrays do not match the grid size")
        if not np.all(nu > 0):
            raise ValueError("the base measure must be strictly positive")
        if not 0.0 < self.delta < 0.5:
            raise ValueError(f"delta must lie in (0, 1/2), got {self.delta}")
        for label, pot in (("g", g), ("h", h)):
            total = float(np.exp(-pot) @ nu)
            if abs(total - 1.0) > 1e-9:
                raise ValueError(
                    f"exp(-{label}) nu must be a probability measure, total {total!r}"
                )
        row_tot = np.exp(-m) @ nu
        err = float(np.abs(row_tot - 1.0).max())
        if err > 1e-9:
            raise ValueError(f"exp(-m(y, .)) nu rows must normalize, worst error {err:.3e}")
        for name, arr in (("nu", nu), ("g", g), ("h", h), ("m", m)):
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @staticmethod
    def from_unnormalized(grid: Grid, nu: np.ndarray, g_raw: np.ndarray,
                          h_raw: np.ndarray, m_raw: np.ndarray, delta: float) -> "GibbsModel":
        """Shift raw potentials so the normalization invariants hold exactly."""
        nu = np.asarray(nu, dtype=float)
        g_raw = np.asarray(g_raw, dtype=float)
        h_raw = np.asarray(h_raw, dtype=float)
        m_raw = np.asarray(m_raw, dtype=float)
        g = g_raw + math.log(float(np.exp(-g_raw) @ nu))
        h = h_raw + math.log(float(np.exp(-h_raw) @ nu))
        m = m_raw + np.log(np.exp(-m_raw) @ nu)[:, None]
        return GibbsModel(grid, nu, g, h, m, delta)


@dataclass(frozen=True, eq=False)
class GibbsPair:
    """Kernels and Lyapunov data derived from a GibbsModel.

    K maps the x-block to the y-block leaving nu_h M invariant in the sense
    nu_h M K = nu_h; L maps back with nu_g K L = nu_g.  The pair constants
    witness the Lyapunov inequalities

        exp(-delta g) K(exp(delta h)) <= c_delta_h exp(-g_delta),
        exp(-delta h) L(exp(delta g)) <= c_delta_g exp(-h_delta).

    c_delta_g carries the exp(-m_min) factor that the derivation produces;
    the variant without it (valid only for m >= 0) is kept as
    c_delta_g_unsigned for reference.
    """

    model: GibbsModel
    M: KernelMatrix
    K: KernelMatrix
    L: KernelMatrix
    nu_g: DiscreteMeasure
    nu_h: DiscreteMeasure
    m_g: np.ndarray
    m_h: np.ndarray
    g_delta: np.ndarray
    h_delta: np.ndarray
    c_delta_h: float
    c_delta_g: float
    c_delta_g_unsigned: float

    @property
    def product(self) -> KernelMatrix:
        return self.K.compose(self.L)

    def V_weight(self) -> WeightFunction:
        return WeightFunction(self.model.grid, np.exp(self.model.delta * self.model.g))

    def W_weight(self) -> WeightFunction:
        return WeightFunction(self.model.grid, np.exp(self.model.delta * self.model.h))

    def h2g_slack(self) -> np.ndarray:
        """Pointwise rhs - lhs of the K-side Lyapunov inequality (>= 0 iff it holds)."""
        d = self.model.delta
        lhs = np.exp(-d * self.model.g) * (self.K.rows @ np.exp(d * self.model.h))
        rhs = self.c_delta_h * np.exp(-self.g_delta)
        return rhs - lhs

    def g2h_slack(self) -> np.ndarray:
        d = self.model.delta
        lhs = np.exp(-d * self.model.h) * (self.L.rows @ np.exp(d * self.model.g))
        rhs = self.c_delta_g * np.exp(-self.h_delta)
        return rhs - lhs


def build_gibbs_pair(model: GibbsModel) -> GibbsPair:
    """Assemble (M, K, L) and the Lyapunov constants from Gibbs data.

    K and L are built by discrete Bayes inversion, which makes the invariance
    identities exact up to rounding: K(x, y) = nu_h(y) M(y, x) / (nu_h M)(x)
    and L(y, x) = nu_g(x) K(x, y) / (nu_g K)(y).
    """
    nu, g, h, m, d = model.nu, model.g, model.h, model.m, model.delta
    nu_g = DiscreteMeasure.from_unnormalized(model.grid, np.exp(-g) * nu)
    nu_h = DiscreteMeasure.from_unnormalized(model.grid, np.exp(-h) * nu)

    M_rows = np.exp(-m) * nu[None, :]
    M = KernelMatrix(model.grid, _normalize_rows(M_rows), model_tag="gibbs_M")

    nu_h_M = nu_h.weights @ M.rows
    K_rows = (M.rows * nu_h.weights[:, None]).T / nu_h_M[:, None]
    K = KernelMatrix(model.grid, _normalize_rows(K_rows), model_tag="gibbs_K")

    nu_g_K = nu_g.weights @ K.rows
    L_rows = (K.rows * nu_g.weights[:, None]).T / nu_g_K[:, None]
    L = KernelMatrix(model.grid, _normalize_rows(L_rows), model_tag="gibbs_L")

    m_h = nu_h.weights @ m          # integrate the first argument of m(z, x)
    m_g = m @ nu_g.weights          # integrate the second argument of m(y, z)
    g_delta = d * g - m_h
    h_delta = d * h - m_g

    m_min = float(m.min())
    g_delta_min = float(g_delta.min())
    nu_g_g = float(nu_g.weights @ g)
    c_delta_h = math.exp(-m_min) * float(np.exp(-(1.0 - d) * h) @ nu)
    base_g = float(np.exp(-(1.0 - 2.0 * d) * g) @ nu)
    c_delta_g_unsigned = base_g * math.exp(-g_delta_min - nu_g_g)
    c_delta_g = c_delta_g_unsigned * math.exp(-m_min)

    return GibbsPair(model=model, M=M, K=K, L=L, nu_g=nu_g, nu_h=nu_h,
                     m_g=m_g, m_h=m_h, g_delta=g_delta, h_delta=h_delta,
                     c_delta_h=c_delta_h, c_delta_g=c_delta_g,
                     c_delta_g_unsigned=c_delta_g_unsigned)


# ---------------------------------------------------------------------------
# model catalog


@dataclass(frozen=True, eq=False)
class ModelBundle:
    """A built model: kernel, its natural Lyapunov weight, and extras."""

    label: str
    grid: Grid
    kernel: KernelMatrix
    V: WeightFunction
    params: dict
    extras: dict = field(default_factory=dict)


MODEL_DEFAULTS: dict[str, dict] = {
    "two_state": {"p": 0.1, "q": 0.2},
    "arcsine": {"n": 200, "iota": 0.25},
    "unit_interval_mixture": {"n": 100, "iota": 0.25, "disjoint": False},
    "half_line": {"n": 200, "delta": 0.5, "gamma": 1.0, "iota": 0.3,
                  "x_min": 1e-3, "x_max": 12.0},
    "irf": {"n": 100, "slope": 0.5, "intercept": 0.0, "noise_std": 1.0,
            "noise_n": 161, "noise_span": 6.0, "x_max": 8.0, "p": 2},
    "langevin": {"n": 160, "sigma": 1.0, "h": 0.1, "gamma": 1.0, "x_max": 8.0},
    "gibbs": {"n": 50, "delta": 0.25, "lo": -3.0, "hi": 3.0,
              "coupling_slope": 0.6, "coupling_width": 0.7},
}

MODEL_DESCRIPTIONS: dict[str, str] = {
    "two_state": "two-state analytic chain with rows (1-p, p) and (q, 1-q)",
    "arcsine": "unit-interval chain with density 1/(2x) below x and 1/(2(1-x)) above",
    "unit_interval_mixture": "mixture x Q(x,.) + (1-x) nu on (0,1); disjoint=true "
                             "switches Q and nu to disjoint supports (no TV contraction)",
    "half_line": "uniform backward / half-Gaussian forward / Weibull refresh chain on (0, inf)",
    "irf": "iterated random map x -> slope*x + intercept + Gaussian noise",
    "langevin": "Euler step for the overdamped Langevin diffusion with U(x) = x^2/2",
    "gibbs": "two-block Gibbs pair with quadratic potentials and Gaussian-type coupling",
}


def _w_iota_weight(grid: Grid, iota: float) -> WeightFunction:
    x = grid.x
    return WeightFunction(grid, x ** (-iota) + (1.0 - x) ** (-iota))


def build_model(spec: dict) -> ModelBundle:
    """Build a model bundle from a JSON-style spec {"model": tag, ...params}."""
    spec = dict(spec)
    tag = spec.pop("model", None)
    if tag not in MODEL_DEFAULTS:
        raise ValueError(f"unknown model {tag!r}; known: {sorted(MODEL_DEFAULTS)}")
    params = dict(MODEL_DEFAULTS[tag])
    unknown = set(spec) - set(params)
    if unknown:
        raise ValueError(f"unknown parameters for model {tag!r}: {sorted(unknown)}")
    params.update(spec)
    extras: dict = {}

    if tag == "two_state":
        p, q = float(params["p"]), float(params["q"])
        grid = build_grid(open_interval(0.0, 1.0), 2)
        kernel = KernelMatrix(grid, np.array([[1 - p, p], [q, 1 - q]]), model_tag=tag)
        V = WeightFunction(grid, np.ones(2))

    elif tag == "arcsine":
        grid = build_grid(open_interval(0.0, 1.0), int(params["n"]))
        kernel = build_arcsine_kernel(grid)
        V = _w_iota_weight(grid, float(params["iota"]))

    elif tag == "unit_interval_mixture":
        grid = build_grid(open_interval(0.0, 1.0), int(params["n"]))
        x = grid.x
        if params["disjoint"]:
            left = (x < 0.5).astype(float)
            right = (x >= 0.5).astype(float)
            q_row = left / left.sum()
            nu = DiscreteMeasure(grid, right / right.sum())
        else:
            q_row = np.full(grid.n, 1.0 / grid.n)
            nu = discretize_density(lambda pts: 6.0 * pts[:, 0] * (1.0 - pts[:, 0]), grid)
        Q = KernelMatrix(grid, np.tile(q_row, (grid.n, 1)), model_tag="mixture_Q")
        kernel = build_unit_interval_kernel(Q, nu)
        V = _w_iota_weight(grid, float(params["iota"]))
        extras["nu"] = nu

    elif tag == "half_line":
        grid = build_grid(half_line_truncated(float(params["x_min"]),
                                              float(params["x_max"])), int(params["n"]))
        kernel = build_halfline_kernel(float(params["delta"]), float(params["gamma"]), grid)
        iota = float(params["iota"])
        V = WeightFunction(grid, grid.x ** (-iota) + grid.x)

    elif tag == "irf":
        grid = build_grid(open_interval(-float(params["x_max"]), float(params["x_max"])),
                          int(params["n"]))
        std = float(params["noise_std"])
        span = float(params["noise_span"]) * std
        noise_grid = build_grid(open_interval(-span, span), int(params["noise_n"]))
        noise = discretize_density(
            lambda pts: np.exp(-0.5 * (pts[:, 0] / std) ** 2), noise_grid)
        slope, intercept = float(params["slope"]), float(params["intercept"])
        model = IrfModel(F=lambda x: slope * x + intercept, noise=noise)
        kernel, report = build_irf_kernel(model, grid)
        p = float(params["p"])
        V = WeightFunction(grid, 0.5 + np.abs(grid.x) ** p, lower_bound=0.5)
        extras["irf_model"] = model
        extras["build_report"] = report

    elif tag == "langevin":
        grid = build_grid(open_interval(-float(params["x_max"]), float(params["x_max"])),
                          int(params["n"]))
        sigma, h, gamma = float(params["sigma"]), float(params["h"]), float(params["gamma"])
        kernel = build_langevin_kernel(lambda x: x, gamma, sigma, h, grid)
        V = WeightFunction(grid, 0.5 + grid.x ** 2, lower_bound=0.5)
        # generator drift G(V) = -2 gamma x^2 + sigma^2 <= -a0 V + a1
        extras["a0"] = 1.0
        extras["a1"] = 0.5 + sigma ** 2
        extras["h"] = h
        extras["sigma"] = sigma
        extras["gamma"] = gamma
        extras["grad_U"] = lambda x: x

    else:  # gibbs
        grid = build_grid(open_interval(float(params["lo"]), float(params["hi"])),
                          int(params["n"]))
        x = grid.x
        a = float(params["coupling_slope"])
        s = float(params["coupling_width"])
        m_raw = (x[None, :] - a * x[:, None]) ** 2 / (2.0 * s * s)
        model = GibbsModel.from_unnormalized(
            grid, grid.cell_volumes, 0.5 * x ** 2, 0.5 * x ** 2, m_raw,
            float(params["delta"]))
        pair = build_gibbs_pair(model)
        kernel = pair.product
        V = pair.V_weight()
        extras["gibbs_model"] = model
        extras["gibbs_pair"] = pair

    return ModelBundle(label=tag, grid=grid, kernel=kernel, V=V,
                       params=params, extras=extras)


def save_kernel_csv(path, P: KernelMatrix) -> None:
    """Dense CSV export, one stochastic row per line."""
    np.savetxt(path, P.rows, delimiter=",", fmt="%.17g")
