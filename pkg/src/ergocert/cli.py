"""Configuration-driven experiment driver and command-line interface.

The ``run`` pipeline chains build -> certify -> bounds -> beta -> decay ->
report; stages are isolated, so a failing stage records an error entry and
every stage not depending on it still runs.  All numeric CSV cells are
written with shortest round-trip float formatting, which makes outputs
byte-identical across runs for a fixed config and seed.  Decay and sweep
curves are additionally rendered to PNG next to their CSVs.

Exit codes: 0 success, 2 configuration error, 3 stage failure.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial.distance import cdist

from . import __version__
from .certify import (certify_drift, certify_drift_pair, minorization,
                      minorization_sweep)
from .contraction import (BoundReport, decay_curve, dobrushin, fixed_point,
                          invariant_measure, theorem1_bounds,
                          wasserstein_from_vnorm)
from .kernels import (MODEL_DEFAULTS, MODEL_DESCRIPTIONS, ModelBundle,
                      build_model, save_kernel_csv)
from .measures import (DiscreteMeasure, Grid, WeightFunction, box, build_grid,
                       half_line_truncated, open_interval, rescale_weight)
from .semidistance import (boundary_metric, discrete_metric, exp_cost,
                           kappa_interp, power_metric, rho_family,
                           weighted_discrete)
from .transport import kantorovich

__all__ = [
    "ExperimentConfig",
    "RunReport",
    "ConfigError",
    "run_experiment",
    "list_models",
    "main",
]


class ConfigError(ValueError):
    """Raised for unusable configuration; maps to exit code 2."""


# ---------------------------------------------------------------------------
# spec parsing


def _build_domain(spec: dict):
    kind = spec.get("kind")
    if kind == "open_interval":
        return open_interval(float(spec["a"]), float(spec["b"]))
    if kind == "half_line":
        return half_line_truncated(float(spec["x_min"]), float(spec["x_max"]))
    if kind == "box":
        return box(np.asarray(spec["lo"], dtype=float), np.asarray(spec["hi"], dtype=float))
    raise ConfigError(f"unknown domain kind {kind!r}")


def build_grid_spec(spec: dict) -> Grid:
    try:
        return build_grid(_build_domain(spec), int(spec["n"]))
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"bad grid spec {spec}: {exc}") from exc


def build_weight(spec: dict | None, grid: Grid,
                 natural: WeightFunction | None = None) -> WeightFunction:
    """Weight-function specs used by the CLI.

    kinds: natural (the model's own V), poly {p}, exp {delta},
    w_iota {iota} on the unit interval, halfline {iota}, const {value},
    values {values: [...]}.
    """
    if spec is None or spec.get("kind") == "natural":
        if natural is None:
            raise ConfigError("no natural weight available; specify one explicitly")
        return natural
    kind = spec.get("kind")
    x = grid.points
    norms = np.linalg.norm(x, axis=1)
    try:
        if kind == "poly":
            return WeightFunction(grid, 0.5 + norms ** float(spec.get("p", 1)),
                                  lower_bound=0.5)
        if kind == "exp":
            return WeightFunction(grid, 0.5 * np.exp(float(spec["delta"]) * norms))
        if kind == "w_iota":
            iota = float(spec["iota"])
            t = x[:, 0]
            return WeightFunction(grid, t ** (-iota) + (1.0 - t) ** (-iota))
        if kind == "halfline":
            iota = float(spec["iota"])
            t = x[:, 0]
            return WeightFunction(grid, t ** (-iota) + t)
        if kind == "const":
            return WeightFunction(grid, np.full(grid.n, float(spec["value"])))
        if kind == "values":
            return WeightFunction(grid, np.asarray(spec["values"], dtype=float))
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"bad weight spec {spec}: {exc}") from exc
    raise ConfigError(f"unknown weight kind {kind!r}")


def build_cost(spec: dict | None, grid: Grid,
               natural: WeightFunction | None = None):
    """Cost specs: phi0, phiV {V}, phi_rho {V, rho}, power {p}, exp {delta},
    boundary {iota}, kappa {base, V, rho, iota}."""
    if spec is None:
        spec = {"kind": "phi0"}
    kind = spec.get("kind")
    try:
        if kind == "phi0":
            return discrete_metric(grid)
        if kind == "phiV":
            return weighted_discrete(build_weight(spec.get("V"), grid, natural))
        if kind == "phi_rho":
            V = build_weight(spec.get("V"), grid, natural)
            return rho_family(V, float(spec["rho"]))[2]
        if kind == "power":
            return power_metric(float(spec.get("p", 1)), grid)
        if kind == "exp":
            return exp_cost(float(spec["delta"]), grid)
        if kind == "boundary":
            return boundary_metric(float(spec["iota"]), grid)
        if kind == "kappa":
            base = build_cost(spec["base"], grid, natural)
            V = build_weight(spec.get("V"), grid, natural)
            rho = spec.get("rho")
            return kappa_interp(base, V, None if rho is None else float(rho),
                                float(spec["iota"]))
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"bad cost spec {spec}: {exc}") from exc
    raise ConfigError(f"unknown cost kind {kind!r}")


def _build_model_checked(spec: dict) -> ModelBundle:
    try:
        return build_model(spec)
    except (KeyError, ValueError, TypeError) as exc:
        raise ConfigError(f"bad model spec {spec}: {exc}") from exc


# ---------------------------------------------------------------------------
# experiment configuration


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything a reproducible run needs; JSON round-trippable."""

    model: dict
    eps: float | None = None
    iota: float = 0.5
    r_sweep: tuple | None = None       # (lo, hi, count), linearly spaced
    horizon: int = 30
    seed: int = 0
    out_dir: str | None = None
    label: str | None = None

    @staticmethod
    def from_dict(raw: dict) -> "ExperimentConfig":
        known = {"model", "eps", "iota", "r_sweep", "horizon", "seed",
                 "out_dir", "label"}
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if "model" not in raw:
            raise ConfigError("config needs a 'model' entry")
        r_sweep = raw.get("r_sweep")
        if r_sweep is not None:
            if len(r_sweep) != 3:
                raise ConfigError(f"r_sweep must be [lo, hi, count], got {raw['r_sweep']}")
            r_sweep = (float(r_sweep[0]), float(r_sweep[1]), int(r_sweep[2]))
            if r_sweep[0] >= r_sweep[1] or r_sweep[2] < 1:
                raise ConfigError(f"r_sweep must be [lo, hi, count], got {raw['r_sweep']}")
        horizon = int(raw.get("horizon", 30))
        if horizon < 5:
            raise ConfigError(f"horizon must be at least 5, got {horizon}")
        return ExperimentConfig(
            model=dict(raw["model"]),
            eps=None if raw.get("eps") is None else float(raw["eps"]),
            iota=float(raw.get("iota", 0.5)),
            r_sweep=r_sweep,
            horizon=horizon,
            seed=int(raw.get("seed", 0)),
            out_dir=raw.get("out_dir"),
            label=raw.get("label"),
        )

    def to_dict(self) -> dict:
        return {"model": self.model, "eps": self.eps, "iota": self.iota,
                "r_sweep": None if self.r_sweep is None else list(self.r_sweep),
                "horizon": self.horizon, "seed": self.seed,
                "out_dir": self.out_dir, "label": self.label}


@dataclass
class RunReport:
    """Per-stage results (dict sections) or error entries, plus timings."""

    config: dict
    version: str = __version__
    stages: dict = field(default_factory=dict)
    errors: dict = field(default_factory=dict)
    wall_times: dict = field(default_factory=dict)

    def ok(self) -> bool:
        return not self.errors

    def to_json(self) -> str:
        payload = {"version": self.version, "config": self.config,
                   "stages": self.stages, "errors": self.errors,
                   "wall_times": self.wall_times}
        return json.dumps(payload, indent=2, sort_keys=True, default=_jsonable)


def _jsonable(obj):
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON-serializable: {type(obj)}")


# ---------------------------------------------------------------------------
# pipeline helpers


def _fmt(v) -> str:
    if isinstance(v, float) or isinstance(v, np.floating):
        return repr(float(v))
    return str(v)


def _write_csv(path: Path, header: list[str], rows) -> None:
    lines = [",".join(header)]
    lines.extend(",".join(_fmt(v) for v in row) for row in rows)
    path.write_text("\n".join(lines) + "\n")


def _beta_phi_rho_sweep(P, vbar: WeightFunction, rhos: np.ndarray) -> np.ndarray:
    """Exhaustive beta_{phi_rho}(P) for many rho at once.

    D_{phi_rho} between rows is 0.5 * L1 + rho * (V-weighted L1), both
    precomputed once, so each rho costs one O(n^2) pass.
    """
    raw = cdist(P.rows, P.rows, metric="cityblock")
    weighted = cdist(P.rows * vbar.values, P.rows * vbar.values, metric="cityblock")
    v = vbar.values
    pair_v = v[:, None] + v[None, :]
    off = ~np.eye(P.n, dtype=bool)
    out = np.empty(len(rhos))
    for k, rho in enumerate(rhos):
        ratios = (0.5 * raw + rho * weighted) / (1.0 + rho * pair_v)
        out[k] = float(ratios[off].max())
    return out


def _nudged_rescale(V: WeightFunction, eps: float, c: float):
    """Rescale to the c = 1/2 normal form; c <= 1/2 keeps the drift valid
    under any larger constant, so it is nudged just above 1/2."""
    c_eff = max(c, 0.5000001)
    return rescale_weight(V, eps, c_eff), c_eff, c_eff != c


def _auto_r_sweep(eps: float, vbar: WeightFunction, count: int = 12) -> np.ndarray:
    r_eps = 1.0 / (1.0 - eps)
    hi = max(2.0 * float(vbar.values.max()), 2.0 * r_eps)
    return np.linspace(1.05 * r_eps, hi, count)


def _dirac_pair(grid: Grid):
    return (DiscreteMeasure.dirac(grid, 0), DiscreteMeasure.dirac(grid, grid.n - 1))


def run_experiment(config: ExperimentConfig) -> RunReport:
    """Execute the full pipeline for one model.

    Single-kernel models are certified with ``certify_drift`` (eps pinned
    when the config provides one); the Gibbs model goes through the operator
    pair route, and its measured product coefficient is compared against the
    squared bound as well.  The bounds stage sweeps r, taking alpha(r) from
    the entrywise-infimum minorization at level r - 1/2 of the rescaled
    weight (pairs with V(x) + V(y) <= r have both endpoints there).
    """
    report = RunReport(config=config.to_dict())
    out_dir = Path(config.out_dir) if config.out_dir else None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)

    def stage(name, fn, *deps):
        if any(d not in report.stages for d in deps):
            report.errors[name] = "skipped: upstream stage failed"
            return None
        t0 = time.perf_counter()
        try:
            result = fn()
        except ConfigError:
            # unusable configuration is not a stage failure
            raise
        except Exception as exc:  # noqa: BLE001 - stage isolation is the contract
            report.errors[name] = f"{type(exc).__name__}: {exc}"
            return None
        report.wall_times[name] = time.perf_counter() - t0
        report.stages[name] = result
        return result

    # -- build ---------------------------------------------------------
    state: dict = {}

    def do_build():
        bundle = _build_model_checked(config.model)
        state["bundle"] = bundle
        info = {"label": bundle.label, "n": bundle.grid.n,
                "params": bundle.params}
        if "build_report" in bundle.extras:
            info["clamped_fraction"] = bundle.extras["build_report"].clamped_fraction
        return info

    stage("build", do_build)

    # -- certify -------------------------------------------------------
    def do_certify():
        bundle = state["bundle"]
        if "gibbs_pair" in bundle.extras:
            pair = bundle.extras["gibbs_pair"]
            certs = certify_drift_pair(pair.K, pair.L, pair.V_weight(),
                                       pair.W_weight(), eps=config.eps)
            eps0, c0 = certs.eps0, certs.c0
            vbar, c_eff, nudged = _nudged_rescale(pair.V_weight(), eps0, c0)
            wbar, _, _ = _nudged_rescale(pair.W_weight(), eps0, c0)
            state.update(eps=eps0, vbar=vbar, wbar=wbar, pair=pair,
                         pair_certs=certs)
            return {"pair": True, "eps0": eps0, "c0": c0,
                    "combined_eps": certs.combined.eps,
                    "combined_c": certs.combined.c,
                    "combined_residual": certs.combined.residual,
                    "c_nudged": nudged}
        cert = certify_drift(bundle.kernel, bundle.V,
                             eps_grid=None if config.eps is None else [config.eps])
        vbar, c_eff, nudged = _nudged_rescale(bundle.V, cert.eps, cert.c)
        state.update(eps=cert.eps, vbar=vbar)
        return {"pair": False, "eps": cert.eps, "c": cert.c,
                "residual": cert.residual, "c_effective": c_eff,
                "c_nudged": nudged, "objective": cert.objective}

    stage("certify", do_certify, "build")

    # -- bounds + beta (r sweep) ----------------------------------------
    def do_bounds():
        bundle = state["bundle"]
        eps = state["eps"]
        vbar = state["vbar"]
        r_eps = 1.0 / (1.0 - eps)
        if config.r_sweep is not None:
            rs = np.linspace(*config.r_sweep)
        else:
            rs = _auto_r_sweep(eps, vbar)
        bad = rs[rs <= r_eps]
        if bad.size == rs.size:
            raise ValueError(f"every sweep level is at or below r_eps = {r_eps}")
        rs = rs[rs > r_eps]

        is_pair = "pair" in state
        sweep = []
        reports: list[BoundReport] = []
        for r in rs:
            level = r - 0.5
            if is_pair:
                a_k = minorization(state["pair"].K, vbar, level).alpha
                a_l = minorization(state["pair"].L, state["wbar"], level).alpha
                alpha = min(a_k, a_l)
            else:
                if float(vbar.values.min()) > level + 1e-12:
                    continue
                alpha = minorization(bundle.kernel, vbar, level).alpha
            if alpha <= 0.0:
                sweep.append({"r": float(r), "alpha": 0.0})
                continue
            br = theorem1_bounds(eps, alpha, float(r), iota=config.iota)
            reports.append(br)
            sweep.append({"r": float(r), "alpha": alpha, "rho_eps": br.rho_eps,
                          "bound_re3": br.bound_re3,
                          "bound_reupsilon": br.bound_reupsilon,
                          "bound_pregibbs": br.bound_pregibbs})
        if not reports:
            raise ValueError("no sweep level admits a positive minorization")
        best = min(reports, key=lambda b: b.bound_re3)
        state.update(sweep_reports=reports, best_bound=best)
        if out_dir is not None:
            _write_csv(out_dir / "alpha.csv", ["r", "alpha"],
                       [(row["r"], row.get("alpha", 0.0)) for row in sweep])
        return {"r_eps": r_eps, "sweep": sweep, "best_r": best.r,
                "best_bound_re3": best.bound_re3}

    stage("bounds", do_bounds, "build", "certify")

    # -- beta ------------------------------------------------------------
    def do_beta():
        bundle = state["bundle"]
        vbar = state["vbar"]
        reports = state["sweep_reports"]
        kernel = state["pair"].product if "pair" in state else bundle.kernel
        rhos = np.array([b.rho_eps for b in reports])
        betas = _beta_phi_rho_sweep(kernel, vbar, rhos)
        rows = []
        all_valid = True
        for b, beta in zip(reports, betas):
            target = b.bound_pregibbs if "pair" in state else b.bound_re3
            valid = bool(beta <= target + 1e-6)
            all_valid &= valid
            rows.append({"r": b.r, "rho": b.rho_eps, "beta": float(beta),
                         "bound_re3": b.bound_re3,
                         "bound_pregibbs": b.bound_pregibbs,
                         "valid": bool(valid)})
        state["beta_rows"] = rows
        best = state["best_bound"]
        k_best = int(np.argmin([b.bound_re3 for b in reports]))
        state["beta_best"] = float(betas[k_best])
        if out_dir is not None:
            _write_csv(out_dir / "bounds.csv",
                       ["r", "rho", "beta", "bound_re3", "bound_pregibbs", "valid"],
                       [(r["r"], r["rho"], r["beta"], r["bound_re3"],
                         r["bound_pregibbs"], int(r["valid"])) for r in rows])
            _render_sweep_png(out_dir / "alpha.png", rows)
        return {"rows": rows, "all_valid": all_valid,
                "beta_at_best_r": float(betas[k_best]), "best_r": best.r}

    stage("beta", do_beta, "bounds")

    # -- decay -----------------------------------------------------------
    def do_decay():
        bundle = state["bundle"]
        kernel = state["pair"].product if "pair" in state else bundle.kernel
        vbar = state.get("vbar", bundle.V)
        bound = state.get("best_bound")
        rho = bound.rho_eps if bound is not None else 0.5
        phi = rho_family(vbar, rho)[2]
        mu1, mu2 = _dirac_pair(bundle.grid)
        result = decay_curve(kernel, mu1, mu2, phi, vbar, config.horizon,
                             bound=bound)
        state["decay"] = result
        lam_bound = bound.bound_re3 if bound is not None else None
        if out_dir is not None:
            rows = []
            for k, (n, d_phi, d_v) in enumerate(result.samples):
                theor = "" if lam_bound is None else _fmt(
                    lam_bound ** n * result.samples[0, 1])
                rows.append((int(n), d_phi, d_v, theor))
            _write_csv(out_dir / "decay.csv",
                       ["n", "d_phi", "d_V", "theorem_bound"], rows)
            _render_decay_png(out_dir / "decay.png", result.samples, lam_bound)
        out = {"samples": result.samples, "truncated": result.truncated}
        if result.fit is not None:
            out["lambda_fit"] = result.fit.lambda_fit
            out["r_squared"] = result.fit.r_squared
            out["burn_in"] = result.fit.burn_in
        if result.fit_v is not None:
            out["lambda_fit_v"] = result.fit_v.lambda_fit
            out["r_squared_v"] = result.fit_v.r_squared
        if result.bound_ratio_phi is not None:
            out["max_bound_ratio_phi"] = float(result.bound_ratio_phi.max())
        return out

    stage("decay", do_decay, "build")

    # -- wasserstein ------------------------------------------------------
    def do_wasserstein():
        bundle = state["bundle"]
        kernel = state["pair"].product if "pair" in state else bundle.kernel
        grid = bundle.grid
        v1 = WeightFunction(grid, 0.5 + np.linalg.norm(grid.points, axis=1),
                            lower_bound=0.5)
        mu1, mu2 = _dirac_pair(grid)
        curve = decay_curve(kernel, mu1, mu2, power_metric(1.0, grid), v1,
                            config.horizon)
        wb = wasserstein_from_vnorm(curve.samples[:, [0, 2]], "poly", 1.0, V=v1,
                                    fit=curve.fit)
        measured = curve.samples[:, 1]
        dominated = bool(np.all(measured <= wb.curve[:, 1] + 1e-9))
        if out_dir is not None:
            _write_csv(out_dir / "wasserstein.csv",
                       ["n", "w1", "d_V1", "w1_bound"],
                       [(int(n), w, dv, b) for (n, w, dv), (_, b)
                        in zip(curve.samples, wb.curve)])
        return {"c_p": wb.c_p, "premise_ok": wb.premise_ok,
                "dominated": dominated,
                "max_excess": float((measured - wb.curve[:, 1]).max())}

    stage("wasserstein", do_wasserstein, "build")

    # -- invariant --------------------------------------------------------
    def do_invariant():
        bundle = state["bundle"]
        kernel = state["pair"].product if "pair" in state else bundle.kernel
        rng = np.random.Generator(np.random.Philox(config.seed))
        res = invariant_measure(kernel, tol=1e-12, rng=rng)
        if out_dir is not None:
            _write_csv(out_dir / "invariant.csv", ["index", "weight"],
                       list(enumerate(res.pi.weights)))
        return {"iterations": res.iterations, "residual": res.residual,
                "converged": res.converged, "unique": res.unique}

    stage("invariant", do_invariant, "build")

    if out_dir is not None:
        (out_dir / "report.json").write_text(report.to_json() + "\n")
    return report


# ---------------------------------------------------------------------------
# figures (lazy matplotlib, Agg backend)


def _pyplot():
    import matplotlib
    matplotlib.use("Agg", force=False)
    import matplotlib.pyplot as plt
    return plt


def _render_decay_png(path: Path, samples: np.ndarray, lam_bound: float | None) -> None:
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    n = samples[:, 0]
    ax.semilogy(n, np.maximum(samples[:, 1], 1e-300), "o-", label="D_phi")
    ax.semilogy(n, np.maximum(samples[:, 2], 1e-300), "s--", label="V-norm")
    if lam_bound is not None and samples[0, 1] > 0:
        ax.semilogy(n, samples[0, 1] * lam_bound ** n, ":", label="theorem bound")
    ax.set_xlabel("n")
    ax.set_ylabel("distance")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)


def _render_sweep_png(path: Path, rows: list[dict]) -> None:
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    rs = [r["r"] for r in rows]
    ax.plot(rs, [r["beta"] for r in rows], "o-", label="measured beta")
    ax.plot(rs, [r["bound_re3"] for r in rows], "s--", label="bound")
    ax.set_xlabel("r")
    ax.set_ylabel("contraction coefficient")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)


# ---------------------------------------------------------------------------
# subcommands


def list_models() -> dict:
    """Tag -> {description, defaults} catalog, JSON-ready."""
    return {tag: {"description": MODEL_DESCRIPTIONS[tag],
                  "defaults": MODEL_DEFAULTS[tag]}
            for tag in sorted(MODEL_DEFAULTS)}


def _json_arg(text: str, what: str) -> dict:
    try:
        value = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"bad JSON for {what}: {exc}") from exc
    if not isinstance(value, dict):
        raise ConfigError(f"{what} must be a JSON object")
    return value


def _floats_arg(text: str) -> np.ndarray:
    try:
        return np.array([float(t) for t in text.split(",") if t.strip() != ""])
    except ValueError as exc:
        raise ConfigError(f"bad float list {text!r}: {exc}") from exc


def _parse_sweep(text: str) -> np.ndarray:
    try:
        lo, hi, step = (float(t) for t in text.split(":"))
    except ValueError as exc:
        raise ConfigError(f"r-sweep must be lo:hi:step, got {text!r}") from exc
    if step <= 0 or hi <= lo:
        raise ConfigError(f"r-sweep must be increasing, got {text!r}")
    return np.arange(lo, hi + step / 2, step)


def _cmd_transport(args) -> int:
    grid = build_grid_spec(_json_arg(args.grid, "--grid"))
    w1 = _floats_arg(args.w1)
    w2 = _floats_arg(args.w2)
    if len(w1) != grid.n or len(w2) != grid.n:
        raise ConfigError(f"weights must have length {grid.n}")
    mu1 = DiscreteMeasure.from_unnormalized(grid, w1)
    mu2 = DiscreteMeasure.from_unnormalized(grid, w2)
    phi = build_cost(_json_arg(args.cost, "--cost") if args.cost else None, grid)
    res = kantorovich(mu1, mu2, phi)
    print(json.dumps({"value": res.value, "solver": res.solver_tag,
                      "cost": phi.label}, default=_jsonable))
    return 0


def _cmd_certify(args) -> int:
    bundle = _build_model_checked(_json_arg(args.model, "--model"))
    V = build_weight(_json_arg(args.V, "--V") if args.V else None,
                     bundle.grid, bundle.V)
    cert = certify_drift(bundle.kernel, V,
                         eps_grid=None if args.eps is None else [args.eps])
    out = {"model": bundle.label, "eps": cert.eps, "c": cert.c,
           "residual": cert.residual, "objective": cert.objective}
    if args.r_sweep:
        rs = _parse_sweep(args.r_sweep)
        certs = minorization_sweep(bundle.kernel, V, rs)
        out["alpha_sweep"] = [{"r": m.r, "alpha": m.alpha} for m in certs]
        if args.out:
            path = Path(args.out)
            path.mkdir(parents=True, exist_ok=True)
            _write_csv(path / "alpha.csv", ["r", "alpha"],
                       [(m.r, m.alpha) for m in certs])
    print(json.dumps(out, default=_jsonable))
    return 0


def _cmd_bounds(args) -> int:
    alpha = args.alpha
    if args.alpha_file:
        table = np.loadtxt(args.alpha_file, delimiter=",", skiprows=1, ndmin=2)
        at_or_above = table[table[:, 0] >= args.r - 1e-12]
        if at_or_above.size == 0:
            raise ConfigError(f"alpha file has no level at or above r = {args.r}")
        # alpha at a higher level lower-bounds alpha at r (more rows in the inf)
        alpha = float(at_or_above[0, 1])
    if alpha is None:
        raise ConfigError("either --alpha or --alpha-file is required")
    try:
        br = theorem1_bounds(args.eps, alpha, args.r, iota=args.iota,
                             phi_ratio=args.phi_ratio)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    print(json.dumps(br.__dict__, default=_jsonable))
    return 0


def _cmd_beta(args) -> int:
    bundle = _build_model_checked(_json_arg(args.model, "--model"))
    psi = build_cost(_json_arg(args.psi, "--psi") if args.psi else None,
                     bundle.grid, bundle.V)
    phi = build_cost(_json_arg(args.phi, "--phi") if args.phi else None,
                     bundle.grid, bundle.V)
    est = dobrushin(bundle.kernel, psi, phi)
    print(json.dumps({"model": bundle.label, "beta": est.value,
                      "psi": est.psi_label, "phi": est.phi_label,
                      "witness": list(est.witness_pair),
                      "pairs": est.n_pairs_evaluated,
                      "method": est.method}, default=_jsonable))
    return 0


def _cmd_decay(args) -> int:
    bundle = _build_model_checked(_json_arg(args.model, "--model"))
    phi = build_cost(_json_arg(args.phi, "--phi") if args.phi else None,
                     bundle.grid, bundle.V)
    mu1, mu2 = _dirac_pair(bundle.grid)
    result = decay_curve(bundle.kernel, mu1, mu2, phi, bundle.V, args.n)
    out_path = Path(args.out)
    rows = [(int(n), d_phi, d_v, "") for n, d_phi, d_v in result.samples]
    _write_csv(out_path, ["n", "d_phi", "d_V", "theorem_bound"], rows)
    _render_decay_png(out_path.with_suffix(".png"), result.samples, None)
    summary = {"model": bundle.label, "out": str(out_path),
               "truncated": result.truncated}
    if result.fit is not None:
        summary["lambda_fit"] = result.fit.lambda_fit
        summary["r_squared"] = result.fit.r_squared
    print(json.dumps(summary, default=_jsonable))
    return 0


def _cmd_invariant(args) -> int:
    bundle = _build_model_checked(_json_arg(args.model, "--model"))
    res = invariant_measure(bundle.kernel,
                            rng=np.random.Generator(np.random.Philox(args.seed)))
    print(json.dumps({"model": bundle.label, "iterations": res.iterations,
                      "residual": res.residual, "converged": res.converged,
                      "unique": res.unique,
                      "pi_head": res.pi.weights[:8]}, default=_jsonable))
    return 0 if res.converged else 3


def _cmd_fixpoint(args) -> int:
    spec = _json_arg(args.f, "--f")
    if spec.get("kind") != "affine":
        raise ConfigError(f"unknown map kind {spec.get('kind')!r}; only 'affine'")
    a, b = float(spec.get("a", 0.5)), float(spec.get("b", 0.0))
    grid = None
    if args.certify_grid:
        grid = build_grid_spec(_json_arg(args.certify_grid, "--certify-grid"))
    res = fixed_point(lambda x: a * x + b, args.y0, tol=args.tol,
                      max_iter=args.max_iter, certify_grid=grid)
    out = {"y_star": res.y_star, "iterations": res.iterations,
           "converged": res.converged}
    if res.rate is not None:
        out["rate"] = res.rate.lambda_fit
    if res.drift_certificate is not None:
        out["drift_eps"] = res.drift_certificate.eps
        out["drift_c"] = res.drift_certificate.c
        out["contraction_s"] = res.contraction_s
        out["certificate_holds"] = res.certificate_holds
    print(json.dumps(out, default=_jsonable))
    return 0 if res.converged else 3


def _cmd_run(args) -> int:
    if args.config:
        try:
            raw = json.loads(Path(args.config).read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"bad config JSON: {exc}") from exc
    else:
        if not args.model:
            raise ConfigError("run needs --config or --model")
        raw = {"model": _json_arg(args.model, "--model")}
    if args.out:
        raw["out_dir"] = args.out
    if args.seed is not None:
        raw["seed"] = args.seed
    config = ExperimentConfig.from_dict(raw)
    report = run_experiment(config)
    summary = {"errors": report.errors,
               "stages": sorted(report.stages),
               "wall_times": report.wall_times}
    for key in ("certify", "bounds", "beta"):
        if key in report.stages:
            section = dict(report.stages[key])
            section.pop("sweep", None)
            section.pop("rows", None)
            summary[key] = section
    print(json.dumps(summary, default=_jsonable))
    return 0 if report.ok() else 3


def _cmd_list_models(_args) -> int:
    print(json.dumps(list_models(), indent=2, sort_keys=True))
    return 0


def _cmd_kernel(args) -> int:
    bundle = _build_model_checked(_json_arg(args.model, "--model"))
    save_kernel_csv(Path(args.out), bundle.kernel)
    print(json.dumps({"model": bundle.label, "n": bundle.grid.n,
                      "out": args.out}))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ergocert",
        description="Kantorovich contraction certificates for discretized "
                    "Markov kernels")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("transport", help="exact transport distance between two measures")
    p.add_argument("--grid", required=True, help="grid spec JSON")
    p.add_argument("--w1", required=True, help="comma-separated weights")
    p.add_argument("--w2", required=True, help="comma-separated weights")
    p.add_argument("--cost", help="cost spec JSON (default phi0)")
    p.set_defaults(fn=_cmd_transport)

    p = sub.add_parser("certify", help="drift certificate and minorization sweep")
    p.add_argument("--model", required=True, help="model spec JSON")
    p.add_argument("--V", help="weight spec JSON (default: the model's weight)")
    p.add_argument("--eps", type=float, help="pin the drift eps")
    p.add_argument("--r-sweep", help="lo:hi:step for the alpha sweep")
    p.add_argument("--out", help="directory for alpha.csv")
    p.set_defaults(fn=_cmd_certify)

    p = sub.add_parser("bounds", help="explicit contraction bounds at a level r")
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--r", type=float, required=True)
    p.add_argument("--alpha", type=float)
    p.add_argument("--alpha-file", help="CSV of r,alpha from a sweep")
    p.add_argument("--iota", type=float, default=0.5)
    p.add_argument("--phi-ratio", type=float, help="||phi/phi_V|| for re3cor")
    p.set_defaults(fn=_cmd_bounds)

    p = sub.add_parser("beta", help="exhaustive Dobrushin coefficient")
    p.add_argument("--model", required=True)
    p.add_argument("--psi", help="source cost spec JSON (default phi0)")
    p.add_argument("--phi", help="target cost spec JSON (default phi0)")
    p.set_defaults(fn=_cmd_beta)

    p = sub.add_parser("decay", help="distance decay curve to CSV and PNG")
    p.add_argument("--model", required=True)
    p.add_argument("--phi", help="cost spec JSON (default phi0)")
    p.add_argument("--n", type=int, default=30)
    p.add_argument("--out", required=True, help="CSV path (PNG lands beside it)")
    p.set_defaults(fn=_cmd_decay)

    p = sub.add_parser("invariant", help="invariant measure by power iteration")
    p.add_argument("--model", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=_cmd_invariant)

    p = sub.add_parser("fixpoint", help="fixed-point iteration with certificate")
    p.add_argument("--f", required=True, help='map spec JSON, e.g. {"kind":"affine","a":0.5,"b":1}')
    p.add_argument("--y0", type=float, required=True)
    p.add_argument("--tol", type=float, default=1e-12)
    p.add_argument("--max-iter", type=int, default=1000)
    p.add_argument("--certify-grid", help="grid spec JSON for the H1/H2 certificate")
    p.set_defaults(fn=_cmd_fixpoint)

    p = sub.add_parser("run", help="full pipeline from a config file")
    p.add_argument("--config", help="JSON config path")
    p.add_argument("--model", help="inline model spec JSON instead of a config")
    p.add_argument("--out", help="output directory for CSVs, PNGs, report.json")
    p.add_argument("--seed", type=int)
    p.set_defaults(fn=_cmd_run)

    p = sub.add_parser("list-models", help="print the model catalog")
    p.set_defaults(fn=_cmd_list_models)

    p = sub.add_parser("kernel", help="export a model kernel as dense CSV")
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_kernel)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
