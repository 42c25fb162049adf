"""Contraction coefficients, explicit rate bounds, and decay measurement.

The Dobrushin coefficient of a kernel is a supremum over pairs of Dirac
initial conditions, so on a grid it is an exact finite maximum.  Costs with a
weighted-discrete structure get an all-pairs closed form; the 1-d first-order
metric uses the CDF identity; everything else pays one transport solve per
pair, which keeps exactness but limits grid sizes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.spatial.distance import cdist

from .certify import DriftCertificate, certify_drift
from .kernels import KernelMatrix, cell_edges_1d
from .measures import DiscreteMeasure, Domain, Grid, WeightFunction, total_variation
from .semidistance import (CostFunction, discrete_metric, pairwise_weighted_l1,
                           weighted_discrete)
from .transport import distance, kantorovich

__all__ = [
    "ContractionEstimate",
    "BoundReport",
    "DecayFit",
    "DecayCurveResult",
    "MeasureCheckReport",
    "ComparisonCheck",
    "ComparisonReport",
    "InvariantResult",
    "ContinuousTimeRate",
    "WassersteinBound",
    "FixedPointResult",
    "dobrushin",
    "dobrushin_measure_check",
    "theorem1_bounds",
    "comparison_suite",
    "decay_curve",
    "invariant_measure",
    "continuous_time_rate",
    "wasserstein_from_vnorm",
    "fixed_point",
]


@dataclass(frozen=True)
class ContractionEstimate:
    """Grid-exact Dobrushin coefficient sup D_phi(delta_x P, delta_y P) / psi(x, y).

    Exact for the discretized chain; a lower bound for any continuum limit.
    """

    value: float
    psi_label: str
    phi_label: str
    witness_pair: tuple
    n_pairs_evaluated: int
    method: str


def _row_measure(P: KernelMatrix, i: int) -> DiscreteMeasure:
    row = P.rows[i]
    return DiscreteMeasure(P.grid, row / row.sum())


def _pairwise_row_distances(P: KernelMatrix, phi: CostFunction):
    """Matrix of D_phi between all kernel rows, via the best available route."""
    if phi.kind in ("discrete", "weighted_discrete"):
        return pairwise_weighted_l1(P.rows, phi.weight_vector), "closed_form"
    if phi.kind == "power" and phi.power == 1.0 and P.grid.dim == 1:
        x = P.grid.x
        if np.all(np.diff(x) > 0):
            scaled = np.cumsum(P.rows, axis=1)[:, :-1] * np.diff(x)[None, :]
            return cdist(scaled, scaled, metric="cityblock"), "closed_form_w1"
    n = P.n
    out = np.zeros((n, n))
    rows = [_row_measure(P, i) for i in range(n)]
    if phi.symmetric_flag:
        for i in range(n):
            for j in range(i + 1, n):
                out[i, j] = out[j, i] = kantorovich(rows[i], rows[j], phi).value
    else:
        for i in range(n):
            for j in range(n):
                if i != j:
                    out[i, j] = kantorovich(rows[i], rows[j], phi).value
    return out, "lp"


def dobrushin(P: KernelMatrix, psi: CostFunction, phi: CostFunction) -> ContractionEstimate:
    """beta_{psi, phi}(P) over all off-diagonal grid pairs.

    The denominator D_psi(delta_x, delta_y) is psi(x, y) itself, so only the
    numerators need transport.  psi must be positive off the diagonal; the
    witness value is re-verified with an independent transport solve.
    """
    P.grid.require_same(psi.grid, "kernel and cost")
    P.grid.require_same(phi.grid, "kernel and cost")
    if P.n < 2:
        raise ValueError("a contraction coefficient needs at least two grid nodes")
    denom = np.array(psi.matrix(), dtype=float, copy=True)
    off = ~np.eye(P.n, dtype=bool)
    if denom[off].min(initial=np.inf) <= 0.0:
        raise ValueError("psi vanishes (or is negative) off the diagonal; "
                         "it is not a semi-distance")
    numer, method = _pairwise_row_distances(P, phi)
    ratios = np.where(off, numer / np.where(off, denom, 1.0), -np.inf)
    flat = int(np.argmax(ratios))
    i, j = divmod(flat, P.n)
    value = float(ratios[i, j])

    check = kantorovich(_row_measure(P, i), _row_measure(P, j), phi).value
    # LP objective noise scales with the cost magnitude (solver feasibility
    # floor times the dual range), so the guard is relative above value 1
    if abs(check - numer[i, j]) > 1e-9 * max(1.0, abs(numer[i, j])):
        raise RuntimeError(f"witness distance {numer[i, j]!r} not reproduced "
                           f"by the transport solver ({check!r})")
    n_pairs = int(off.sum()) if not phi.symmetric_flag else int(off.sum() // 2)
    return ContractionEstimate(value=value, psi_label=psi.label, phi_label=phi.label,
                               witness_pair=(int(i), int(j)),
                               n_pairs_evaluated=n_pairs, method=method)


@dataclass(frozen=True)
class MeasureCheckReport:
    beta: float
    n_checked: int
    max_violation: float
    ok: bool


def dobrushin_measure_check(P: KernelMatrix, psi: CostFunction, phi: CostFunction,
                            pairs: Sequence[tuple[DiscreteMeasure, DiscreteMeasure]],
                            beta: float | None = None) -> MeasureCheckReport:
    """Check D_phi(mu1 P, mu2 P) <= beta * D_psi(mu1, mu2) on supplied pairs.

    This is the non-Dirac direction of the Dirac-pair reduction; violations
    beyond 1e-9 falsify either the coefficient or the transport solver.
    """
    if beta is None:
        beta = dobrushin(P, psi, phi).value
    worst = -math.inf
    for mu1, mu2 in pairs:
        lhs = distance(_push(mu1, P), _push(mu2, P), phi).value
        rhs = beta * distance(mu1, mu2, psi).value
        worst = max(worst, lhs - rhs)
    return MeasureCheckReport(beta=float(beta), n_checked=len(pairs),
                              max_violation=float(worst), ok=worst <= 1e-9)


def _push(mu: DiscreteMeasure, P: KernelMatrix) -> DiscreteMeasure:
    w = mu.weights @ P.rows
    return DiscreteMeasure(P.grid, w / w.sum())


# ---------------------------------------------------------------------------
# explicit bounds


@dataclass(frozen=True)
class BoundReport:
    """Contraction bounds computed from (eps, c=1/2, alpha(r), r, iota).

    bound_re3 bounds beta for the phi_rho cost at rho = rho_eps(r);
    bound_reupsilon for the interpolated cost kappa_{iota, rho};
    bound_re3cor upgrades re3 to costs phi with ||phi / phi_V|| below the
    reported threshold (``re3cor_applicable`` is None when no ratio was
    supplied); bound_pregibbs = bound_re3^2 covers operator products K L.
    """

    eps: float
    c: float
    r: float
    alpha: float
    iota: float
    r_eps: float
    delta_eps: float
    rho_eps: float
    bound_re3: float
    bound_reupsilon: float
    re3cor_threshold: float
    bound_re3cor: float
    re3cor_applicable: bool | None
    bound_pregibbs: float


def theorem1_bounds(eps: float, alpha: float | Callable[[float], float], r: float,
                    iota: float = 0.5, phi_ratio: float | None = None,
                    c: float = 0.5, r0: float | None = None) -> BoundReport:
    """Evaluate the explicit one-step contraction bounds at level r.

    Requires the drift certificate rescaled to c = 1/2 (so V >= 1/2 and
    r_eps = 1/(1 - eps) marks where delta_eps(r) changes sign).  Out-of-range
    levels raise rather than clamp: below r_eps the expressions are
    meaningless and clamping would fabricate a bound.
    """
    if not 0.0 < eps < 1.0:
        raise ValueError(f"eps must lie in (0, 1), got {eps}")
    if not 0.5 <= iota < 1.0:
        raise ValueError(f"iota must lie in [1/2, 1), got {iota}")
    r_eps = 1.0 / (1.0 - eps)
    floor = r_eps if r0 is None else max(r_eps, r0)
    if not r > floor:
        raise ValueError(f"level r = {r} must exceed max(r_eps, r0) = {floor}")
    a = float(alpha(r)) if callable(alpha) else float(alpha)
    if not 0.0 < a <= 1.0:
        raise ValueError(f"alpha(r) must lie in (0, 1], got {a}")

    delta_eps = (1.0 - eps) / (2.0 + eps) * (1.0 - r_eps / r)
    rho_eps = a / ((1.0 + eps) * 2.0 * r)
    if not 0.0 < rho_eps <= 0.5:
        raise ValueError(f"rho_eps(r) = {rho_eps} fell outside (0, 1/2]")

    bound_re3 = 1.0 - delta_eps * a / 2.0
    bound_reupsilon = (1.0 - a * min(delta_eps / 2.0, a)) ** (1.0 - iota)
    threshold = rho_eps * (1.0 - bound_re3)
    bound_re3cor = 1.0 - (1.0 - bound_re3) ** 2
    applicable = None if phi_ratio is None else bool(phi_ratio <= threshold + 1e-12)
    return BoundReport(eps=eps, c=c, r=r, alpha=a, iota=iota, r_eps=r_eps,
                       delta_eps=delta_eps, rho_eps=rho_eps, bound_re3=bound_re3,
                       bound_reupsilon=bound_reupsilon, re3cor_threshold=threshold,
                       bound_re3cor=bound_re3cor, re3cor_applicable=applicable,
                       bound_pregibbs=bound_re3 ** 2)


# ---------------------------------------------------------------------------
# structural comparison checks


@dataclass(frozen=True)
class ComparisonCheck:
    name: str
    lhs: float
    rhs: float
    ok: bool


@dataclass(frozen=True)
class ComparisonReport:
    checks: tuple
    all_ok: bool


def _derived_cost(base: CostFunction, transform, label: str,
                  kind: str = "generic", weight_vector=None) -> CostFunction:
    fn = base.pair_fn
    return CostFunction(base.grid, label=label,
                        pair_fn=lambda i, j: transform(fn(i, j), i, j),
                        symmetric=base.symmetric, kind=kind,
                        weight_vector=weight_vector)


def _random_weight_cost(grid: Grid, rng) -> CostFunction:
    u = np.exp(rng.normal(0.0, 0.7, grid.n))
    return weighted_discrete(WeightFunction(grid, u))


def _random_kernel(grid: Grid, rng) -> KernelMatrix:
    raw = rng.gamma(1.0, 1.0, (grid.n, grid.n)) + 1e-9
    return KernelMatrix(grid, raw / raw.sum(axis=1, keepdims=True), model_tag="random")


def comparison_suite(P: KernelMatrix, rng: np.random.Generator | None = None,
                     n_instances: int = 20) -> ComparisonReport:
    """Numerically verify the coefficient calculus on randomized instances.

    Per instance, with random weighted costs psi (and a random second kernel
    for the product law):

    - scaling:     beta_{a psi}(P) = beta_psi(P)            (equality, 1e-9)
    - power:       beta_{psi^iota}(P) <= beta_psi(P)^iota
    - comparison:  a*psi <= phi <= b*psi  =>  beta_phi(P) <= (b/a) beta_psi(P)
    - tex:         phi <= psi0, beta_psi0(P) < 1, iota <= 1 - beta_psi0(P)
                   =>  beta_{iota*phi + psi0}(P) <= 1 - (1 - beta_psi0(P))^2
                   (psi0 is the plain TV cost so the premise holds on every
                   strictly positive kernel)
    - product:     beta_{phi,psi}(K L) <= beta_{phi,chi}(K) * beta_{chi,psi}(L)

    Exhaustive pair evaluation bounds the grid to n <= 30.
    """
    if P.n > 30:
        raise ValueError(f"comparison_suite is exhaustive; grid n = {P.n} > 30")
    rng = rng or np.random.Generator(np.random.Philox(20240801))
    checks: list[ComparisonCheck] = []

    for _ in range(n_instances):
        psi = _random_weight_cost(P.grid, rng)
        beta = dobrushin(P, psi, psi).value

        a = float(rng.uniform(0.5, 4.0))
        psi_a = _derived_cost(psi, lambda v, i, j: a * v, f"{a:g}*psi",
                              kind="weighted_discrete",
                              weight_vector=a * psi.weight_vector)
        beta_a = dobrushin(P, psi_a, psi_a).value
        checks.append(ComparisonCheck("scaling", beta_a, beta,
                                      ok=abs(beta_a - beta) <= 1e-9))

        iota = float(rng.uniform(0.5, 0.95))
        psi_pow = _derived_cost(psi, lambda v, i, j: v ** iota, "psi^iota")
        beta_pow = dobrushin(P, psi_pow, psi_pow).value
        checks.append(ComparisonCheck("power", beta_pow, beta ** iota,
                                      ok=beta_pow <= beta ** iota + 1e-9))

        lo, hi = float(rng.uniform(0.5, 1.0)), float(rng.uniform(1.0, 2.5))
        mix = rng.uniform(lo, hi, (P.n, P.n))
        mix = 0.5 * (mix + mix.T)
        phi = _derived_cost(psi, lambda v, i, j: v * mix[i, j], "sandwiched phi")
        beta_phi = dobrushin(P, phi, phi).value
        checks.append(ComparisonCheck("comparison", beta_phi, (hi / lo) * beta,
                                      ok=beta_phi <= (hi / lo) * beta + 1e-9))

        psi0 = discrete_metric(P.grid)
        beta0 = dobrushin(P, psi0, psi0).value
        if beta0 < 1.0:
            # phi_u <= psi0 pointwise needs u <= 1/2; iota <= 1 - beta0
            u = rng.uniform(0.05, 0.5, P.n)
            iota_mix = float(rng.uniform(0.0, 1.0)) * (1.0 - beta0)
            mixed = weighted_discrete(WeightFunction(P.grid, 0.5 + iota_mix * u))
            beta_mixed = dobrushin(P, mixed, mixed).value
            tex = 1.0 - (1.0 - beta0) ** 2
            checks.append(ComparisonCheck("tex", beta_mixed, tex,
                                          ok=beta_mixed <= tex + 1e-9))

        L = _random_kernel(P.grid, rng)
        chi = _random_weight_cost(P.grid, rng)
        lhs = dobrushin(P.compose(L), phi, psi).value
        rhs = dobrushin(P, phi, chi).value * dobrushin(L, chi, psi).value
        checks.append(ComparisonCheck("product", lhs, rhs, ok=lhs <= rhs + 1e-9))

    return ComparisonReport(checks=tuple(checks),
                            all_ok=all(c.ok for c in checks))


# ---------------------------------------------------------------------------
# decay measurement


@dataclass(frozen=True)
class DecayFit:
    """Least-squares geometric fit of a distance curve past its burn-in."""

    lambda_fit: float
    prefactor: float
    r_squared: float
    burn_in: int
    n_used: int


@dataclass(frozen=True)
class DecayCurveResult:
    """Columns of ``samples``: n, D_phi(mu1 P_n, mu2 P_n), ||mu1 P_n - mu2 P_n||_V."""

    samples: np.ndarray
    fit: DecayFit | None
    truncated: bool
    fit_v: DecayFit | None = None
    bound_ratio_phi: np.ndarray | None = None
    bound_ratio_v: np.ndarray | None = None


def _pick_burn_in(log_d: np.ndarray) -> int:
    """Smallest burn-in whose remaining tail fits a line with r^2 >= 0.999.

    Drift-dominated chains straighten only after a transient whose length is
    not known a priori, so every cut is tried; if no tail qualifies, the cut
    with the best fit wins.  At least 3 points are always left in the tail.
    """
    k = len(log_d)
    ns = np.arange(k, dtype=float)
    best_i, best_r2 = 0, -np.inf
    for i in range(max(k - 2, 1)):
        logd = log_d[i:]
        ss_tot = float(((logd - logd.mean()) ** 2).sum())
        if ss_tot == 0.0:
            return i
        slope, intercept = np.polyfit(ns[i:], logd, 1)
        resid = logd - (slope * ns[i:] + intercept)
        r2 = 1.0 - float((resid ** 2).sum()) / ss_tot
        if r2 >= 0.999:
            return i
        if r2 > best_r2:
            best_i, best_r2 = i, r2
    return best_i


def _loglinear_fit(ns: np.ndarray, ds: np.ndarray, burn_in: int) -> DecayFit:
    ns = ns[burn_in:]
    logd = np.log(ds[burn_in:])
    slope, intercept = np.polyfit(ns, logd, 1)
    pred = slope * ns + intercept
    ss_res = float(((logd - pred) ** 2).sum())
    ss_tot = float(((logd - logd.mean()) ** 2).sum())
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return DecayFit(lambda_fit=float(np.exp(slope)), prefactor=float(np.exp(intercept)),
                    r_squared=r2, burn_in=burn_in, n_used=len(ns))


def decay_curve(P: KernelMatrix, mu1: DiscreteMeasure, mu2: DiscreteMeasure,
                phi: CostFunction, V: WeightFunction, N: int,
                bound: BoundReport | None = None) -> DecayCurveResult:
    """Measure d_n = D_phi(mu1 P_n, mu2 P_n) and the V-norm gap for n = 0..N.

    The curve stops early once d_n < 1e-14 (transport values below that are
    solver noise).  The geometric fit runs on log d_n past a burn-in chosen
    as the smallest cut whose tail is straight in log scale (r^2 >= 0.999);
    identical inputs skip the fit.  With a
    BoundReport, per-n ratios to the theorem curve are attached: the phi
    column divides by bound_re3^n * d_0, the V column additionally allows the
    (1 + 1/rho) prefactor from the cost sandwich.
    """
    if N < 5:
        raise ValueError(f"horizon must be at least 5, got {N}")
    P.grid.require_same(mu1.grid, "kernel and measure")
    P.grid.require_same(mu2.grid, "kernel and measure")
    P.grid.require_same(V.grid, "kernel and weight")
    w1 = mu1.weights.copy()
    w2 = mu2.weights.copy()
    rows = []
    truncated = False
    for n in range(N + 1):
        m1 = DiscreteMeasure(P.grid, w1 / w1.sum())
        m2 = DiscreteMeasure(P.grid, w2 / w2.sum())
        d_phi = distance(m1, m2, phi).value
        d_v = float(np.abs(m1.weights - m2.weights) @ V.values)
        rows.append((n, d_phi, d_v))
        if d_phi < 1e-14:
            truncated = n < N
            break
        if n < N:
            w1 = w1 @ P.rows
            w2 = w2 @ P.rows
    samples = np.array(rows)

    def fit_column(col: int) -> DecayFit | None:
        # samples at the solver-noise floor would wreck the log fit
        usable = samples[:, col] >= 1e-14
        head = int(usable.argmin()) if not usable.all() else len(samples)
        if head < 2:
            return None
        burn = _pick_burn_in(np.log(samples[:head, col]))
        return _loglinear_fit(samples[:head, 0], samples[:head, col], burn)

    fit = fit_column(1)
    fit_v = fit_column(2)

    ratio_phi = ratio_v = None
    if bound is not None and samples[0, 1] > 0:
        lam = bound.bound_re3
        decay = lam ** samples[:, 0]
        ratio_phi = samples[:, 1] / (decay * samples[0, 1])
        pref = 1.0 + 1.0 / bound.rho_eps
        if samples[0, 2] > 0:
            ratio_v = samples[:, 2] / (pref * decay * samples[0, 2])
    return DecayCurveResult(samples=samples, fit=fit, truncated=truncated,
                            fit_v=fit_v, bound_ratio_phi=ratio_phi,
                            bound_ratio_v=ratio_v)


# ---------------------------------------------------------------------------
# invariant measures and continuous time


@dataclass(frozen=True)
class InvariantResult:
    pi: DiscreteMeasure
    iterations: int
    residual: float
    converged: bool
    unique: bool
    max_pairwise_tv: float


def invariant_measure(P: KernelMatrix, tol: float = 1e-12, max_iter: int = 100000,
                      n_starts: int = 5,
                      rng: np.random.Generator | None = None) -> InvariantResult:
    """Power iteration to the invariant distribution, with a uniqueness probe.

    Iterates from the uniform start until the one-step total variation drops
    below ``tol``; non-convergence within ``max_iter`` is reported, not
    raised.  Uniqueness is probed by re-running from ``n_starts`` random
    starts and comparing the limits pairwise (flagged non-unique beyond
    10 * tol, e.g. for the identity kernel where every start is a limit).
    """
    if not tol > 0:
        raise ValueError(f"tolerance must be positive, got {tol}")
    rng = rng or np.random.Generator(np.random.Philox(71))

    def run(w0: np.ndarray):
        w = w0 / w0.sum()
        for it in range(1, max_iter + 1):
            nxt = w @ P.rows
            nxt /= nxt.sum()
            resid = 0.5 * float(np.abs(nxt - w).sum())
            w = nxt
            if resid <= tol:
                return w, it, resid, True
        return w, max_iter, resid, False

    pi_w, iterations, residual, converged = run(np.full(P.n, 1.0 / P.n))
    limits = [pi_w]
    all_converged = converged
    for _ in range(n_starts):
        w_lim, _, _, conv = run(rng.gamma(1.0, 1.0, P.n) + 1e-12)
        limits.append(w_lim)
        all_converged &= conv
    max_tv = max(0.5 * float(np.abs(a - b).sum())
                 for k, a in enumerate(limits) for b in limits[k + 1:])
    return InvariantResult(pi=DiscreteMeasure(P.grid, pi_w), iterations=iterations,
                           residual=residual, converged=converged,
                           unique=all_converged and max_tv <= 10.0 * tol,
                           max_pairwise_tv=max_tv)


@dataclass(frozen=True)
class ContinuousTimeRate:
    """Exponential rate transferred from an h-step contraction.

    The n-step bound c_h * lam_h^n at times t = n*h becomes
    c_iota_h * exp(-sigma_h * t) with sigma_h = -(1/h) log lam_h and
    c_iota_h = iota_const * c_h / lam_h; the 1/lam_h covers the fractional
    step between sampling times.
    """

    h: float
    lam_h: float
    sigma_h: float
    prefactor: float

    def bound_at(self, t) -> np.ndarray:
        return self.prefactor * np.exp(-self.sigma_h * np.asarray(t, dtype=float))


def continuous_time_rate(h: float, lam_h: float, c_h: float,
                         iota_const: float = 1.0) -> ContinuousTimeRate:
    if not 0.0 < lam_h < 1.0:
        raise ValueError(f"lam_h must lie in (0, 1), got {lam_h}")
    if not h > 0:
        raise ValueError(f"step h must be positive, got {h}")
    sigma = -math.log(lam_h) / h
    return ContinuousTimeRate(h=h, lam_h=lam_h, sigma_h=sigma,
                              prefactor=iota_const * c_h / lam_h)


@dataclass(frozen=True)
class WassersteinBound:
    """W_p^p bound curve obtained from a V-norm decay curve.

    Requires V(x) + V(y) >= c_p * ||x - y||^p; ``premise_min_slack`` is the
    worst grid-pair slack of that inequality (None when no weight was given
    to check against).
    """

    c_p: float
    curve: np.ndarray
    premise_ok: bool | None
    premise_min_slack: float | None
    fitted_curve: np.ndarray | None


def wasserstein_from_vnorm(samples: np.ndarray, v_type: str, p: float,
                           delta: float | None = None,
                           V: WeightFunction | None = None,
                           fit: DecayFit | None = None) -> WassersteinBound:
    """Turn a (n, ||mu1 P_n - mu2 P_n||_V) curve into a W_p^p bound curve.

    c_p = 2^{-(p-1)_+} for polynomial weights and delta^p / (2^{p-1} p!) for
    exponential ones; each V-norm sample divided by c_p dominates
    W_p(mu1 P_n, mu2 P_n)^p.  A fitted curve prefactor/c_p * lambda^n is
    attached when a DecayFit is supplied.
    """
    if v_type == "poly":
        c_p = 2.0 ** (-max(p - 1.0, 0.0))
    elif v_type == "exp":
        if delta is None or delta <= 0:
            raise ValueError("exponential weights need a positive delta")
        c_p = delta ** p / (2.0 ** (p - 1.0) * math.gamma(p + 1.0))
    else:
        raise ValueError(f"v_type must be 'poly' or 'exp', got {v_type!r}")

    premise_ok = premise_slack = None
    if V is not None:
        x = V.grid.points
        dists = cdist(x, x)
        vv = V.values
        slack = (vv[:, None] + vv[None, :]) - c_p * dists ** p
        premise_slack = float(slack.min())
        premise_ok = premise_slack >= -1e-12

    samples = np.asarray(samples, dtype=float)
    curve = np.column_stack([samples[:, 0], samples[:, 1] / c_p])
    fitted = None
    if fit is not None:
        fitted = np.column_stack(
            [samples[:, 0],
             fit.prefactor / c_p * fit.lambda_fit ** samples[:, 0]])
    return WassersteinBound(c_p=c_p, curve=curve, premise_ok=premise_ok,
                            premise_min_slack=premise_slack, fitted_curve=fitted)


# ---------------------------------------------------------------------------
# deterministic fixed points


@dataclass(frozen=True)
class FixedPointResult:
    y_star: float
    iterations: int
    converged: bool
    rate: DecayFit | None
    clamped_steps: int
    drift_certificate: DriftCertificate | None
    contraction_s: float | None
    certificate_holds: bool | None


def fixed_point(F: Callable[[np.ndarray], np.ndarray], y0: float,
                tol: float = 1e-12, max_iter: int = 1000,
                domain: Domain | None = None,
                certify_grid: Grid | None = None, delta: float = 1.0,
                r: float | None = None) -> FixedPointResult:
    """Iterate y_{n+1} = F(y_n) and certify the contraction behind it.

    A locally uniformly contractive map has a unique fixed point reached
    geometrically fast; the certificate realizes that statement on a grid by
    viewing x -> F(x) as the deterministic kernel delta_{F(x)}: the drift
    side certifies W = (1/2) exp(delta |x|) against the snapped kernel, the
    contraction side takes s = max |F(x) - F(y)| / |x - y| over grid pairs
    with W(x) + W(y) <= r (all pairs when r is None), using exact map values.
    Iterates are clamped to ``domain`` when given (clamps counted); hitting
    ``max_iter`` yields a divergence report, not an exception.
    """
    y = float(y0)
    clamped = 0
    traj = [y]
    converged = False
    for it in range(1, max_iter + 1):
        y_next = float(np.asarray(F(np.array([y])), dtype=float).ravel()[0])
        if domain is not None:
            lo, hi = domain.bounds
            cl = min(max(y_next, float(lo[0])), float(hi[0]))
            if cl != y_next:
                clamped += 1
                y_next = cl
        traj.append(y_next)
        if abs(y_next - y) <= tol:
            y = y_next
            converged = True
            break
        y = y_next
    iterations = len(traj) - 1
    y_star = traj[-1]

    rate = None
    dists = np.abs(np.array(traj) - y_star)
    keep = dists > max(100.0 * tol, 1e-13)
    if converged and keep.sum() >= 3:
        ns = np.flatnonzero(keep).astype(float)
        rate = _loglinear_fit(ns, dists[keep], burn_in=0)

    drift_cert = None
    s = holds = None
    if certify_grid is not None:
        grid = certify_grid
        fvals = np.asarray(F(grid.x), dtype=float).reshape(grid.n)
        edges = cell_edges_1d(grid)
        cells = np.clip(np.searchsorted(edges, fvals, side="right") - 1, 0, grid.n - 1)
        rows = np.zeros((grid.n, grid.n))
        rows[np.arange(grid.n), cells] = 1.0
        kernel = KernelMatrix(grid, rows, model_tag="deterministic")
        W = WeightFunction(grid, 0.5 * np.exp(delta * np.abs(grid.x)))
        drift_cert = certify_drift(kernel, W)
        wv = W.values
        i_idx, j_idx = np.triu_indices(grid.n, k=1)
        if r is not None:
            keep_pairs = (wv[i_idx] + wv[j_idx]) <= r + 1e-12
            i_idx, j_idx = i_idx[keep_pairs], j_idx[keep_pairs]
        if i_idx.size == 0:
            raise ValueError(f"no grid pairs with W(x)+W(y) <= {r}")
        s = float((np.abs(fvals[i_idx] - fvals[j_idx])
                   / np.abs(grid.x[i_idx] - grid.x[j_idx])).max())
        holds = bool(drift_cert.valid and s < 1.0)
    return FixedPointResult(y_star=y_star, iterations=iterations, converged=converged,
                            rate=rate, clamped_steps=clamped,
                            drift_certificate=drift_cert, contraction_s=s,
                            certificate_holds=holds)
