import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_rng, random_kernel, two_state_kernel, unit_grid
from ergocert.certify import (certify_drift, certify_drift_pair,
                              generator_drift_check, gibbs_minorization,
                              irf_lyapunov, local_contraction, minorization,
                              minorization_sweep)
from ergocert.kernels import (DiscreteMeasure, IrfModel, KernelMatrix,
                              build_gibbs_pair, build_model)
from ergocert.measures import WeightFunction, build_grid, open_interval
from ergocert.semidistance import discrete_metric, weighted_discrete
from test_kernels import random_gibbs


class TestCertifyDrift:
    def test_two_state_oracle(self):
        # P(V) for V = (1, 2): (1.1, 1.8); at eps = 0.5 the tight constant is
        # max(1.1 - 0.5, 1.8 - 1.0) = 0.8
        P = two_state_kernel()
        V = WeightFunction(P.grid, np.array([1.0, 2.0]))
        cert = certify_drift(P, V, eps_grid=0.5)
        assert cert.eps == 0.5
        assert cert.c == pytest.approx(0.8, abs=1e-14)
        assert cert.objective == "fixed"
        assert cert.valid

    def test_residual_is_tight(self, rng):
        g = unit_grid(7)
        P = random_kernel(g, rng)
        V = WeightFunction(g, 0.5 + rng.gamma(2.0, 1.0, size=7))
        cert = certify_drift(P, V)
        assert cert.valid
        # the constant is attained at some node
        pv = P.rows @ V.values
        assert np.max(pv - cert.eps * V.values) == pytest.approx(cert.c, abs=1e-12)

    def test_eps_grid_list(self, rng):
        g = unit_grid(5)
        P = random_kernel(g, rng)
        V = WeightFunction(g, 1.0 + rng.random(5))
        cert = certify_drift(P, V, eps_grid=[0.3, 0.6, 0.9])
        assert cert.eps in (0.3, 0.6, 0.9)
        assert cert.objective == "balanced"

    def test_bad_eps_rejected(self):
        P = two_state_kernel()
        V = WeightFunction(P.grid, np.array([1.0, 2.0]))
        for bad in (0.0, 1.0, -0.2, 1.5):
            with pytest.raises(ValueError):
                certify_drift(P, V, eps_grid=bad)

    def test_min_c_objective(self, rng):
        g = unit_grid(6)
        P = random_kernel(g, rng)
        V = WeightFunction(g, 0.5 + rng.gamma(2.0, 1.0, size=6))
        balanced = certify_drift(P, V, objective="balanced")
        min_c = certify_drift(P, V, objective="min_c")
        assert min_c.c <= balanced.c + 1e-12

    def test_frontier_monotone(self, rng):
        # c(eps) decreases as eps grows
        g = unit_grid(6)
        P = random_kernel(g, rng)
        V = WeightFunction(g, 0.5 + rng.gamma(2.0, 1.0, size=6))
        cert = certify_drift(P, V)
        fr = sorted(cert.frontier)
        cs = [c for _, c in fr]
        assert all(cs[i] >= cs[i + 1] - 1e-12 for i in range(len(cs) - 1))


class TestCertifyDriftPair:
    def test_combined_constants(self):
        pair = build_gibbs_pair(random_gibbs(4))
        certs = certify_drift_pair(pair.K, pair.L, pair.V_weight(), pair.W_weight())
        assert certs.combined.eps == pytest.approx(certs.eps0 ** 2, abs=1e-14)
        assert certs.combined.c == pytest.approx((1 + certs.eps0) * certs.c0, abs=1e-14)
        assert certs.K_cert.valid and certs.L_cert.valid
        # the product certificate is verified against K L directly
        assert certs.combined.residual <= 1e-12

    def test_pinned_eps(self):
        pair = build_gibbs_pair(random_gibbs(5))
        certs = certify_drift_pair(pair.K, pair.L, pair.V_weight(),
                                   pair.W_weight(), eps=0.7)
        assert certs.eps0 == 0.7

    def test_combined_holds_pointwise(self):
        for seed in range(8):
            pair = build_gibbs_pair(random_gibbs(seed))
            certs = certify_drift_pair(pair.K, pair.L, pair.V_weight(), pair.W_weight())
            v = pair.V_weight().values
            pv = pair.product.rows @ v
            assert np.all(pv <= certs.combined.eps * v + certs.combined.c + 1e-10)


class TestMinorization:
    def test_two_state_oracle(self):
        P = two_state_kernel()
        V = WeightFunction(P.grid, np.ones(2))
        cert = minorization(P, V, 1.0)
        assert cert.holds
        assert cert.alpha == pytest.approx(0.3, abs=1e-14)
        np.testing.assert_allclose(cert.nu.weights, [2 / 3, 1 / 3])

    def test_empty_sublevel_raises(self):
        P = two_state_kernel()
        V = WeightFunction(P.grid, np.array([2.0, 3.0]))
        with pytest.raises(ValueError, match="empty"):
            minorization(P, V, 1.0)

    def test_disjoint_rows_report_zero(self):
        g = unit_grid(2)
        P = KernelMatrix(g, np.array([[1.0, 0.0], [0.0, 1.0]]))
        cert = minorization(P, WeightFunction(g, np.ones(2)), 1.0)
        assert not cert.holds
        assert cert.alpha == 0.0
        assert cert.nu is None

    def test_minorization_is_valid_bound(self, rng):
        g = unit_grid(8)
        P = random_kernel(g, rng)
        V = WeightFunction(g, 0.5 + rng.gamma(1.0, 1.0, size=8))
        cert = minorization(P, V, float(np.median(V.values)))
        assert cert.holds
        rows = P.rows[cert.sublevel_indices]
        assert np.all(rows >= cert.alpha * cert.nu.weights[None, :] - 1e-12)

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 10_000))
    def test_alpha_nonincreasing_in_r(self, seed):
        rng = make_rng(seed)
        g = unit_grid(7)
        P = random_kernel(g, rng)
        V = WeightFunction(g, 0.5 + rng.gamma(1.0, 1.0, size=7))
        rs = np.linspace(V.values.min(), V.values.max(), 6)
        alphas = [m.alpha for m in minorization_sweep(P, V, rs)]
        assert all(alphas[i] >= alphas[i + 1] - 1e-12 for i in range(len(alphas) - 1))


class TestLocalContraction:
    def test_two_state_tv_rate(self):
        P = two_state_kernel()
        V = WeightFunction(P.grid, np.ones(2))
        cert = local_contraction(P, discrete_metric(P.grid), V, r=2.0)
        assert cert.holds
        assert cert.s == pytest.approx(0.7, abs=1e-12)
        assert cert.alpha == pytest.approx(0.3, abs=1e-12)
        assert cert.n_pairs == 1

    def test_contraction_witness_within_pair_set(self, rng):
        g = unit_grid(9)
        P = random_kernel(g, rng)
        V = WeightFunction(g, 0.5 + rng.gamma(1.0, 1.0, size=9))
        r = float(np.median(V.values) * 2.2)
        cert = local_contraction(P, weighted_discrete(V), V, r=r)
        i, j = cert.witness_pair
        assert V.values[i] + V.values[j] <= r + 1e-9

    def test_no_contraction_reported(self):
        # a permutation kernel moves Dirac pairs at distance 1 to distance 1
        g = unit_grid(2)
        P = KernelMatrix(g, np.array([[0.0, 1.0], [1.0, 0.0]]))
        cert = local_contraction(P, discrete_metric(g),
                                 WeightFunction(g, np.ones(2)), r=2.0)
        assert not cert.holds
        assert cert.s >= 1.0
        assert cert.alpha == 0.0

    def test_pair_budget_subsamples(self, rng):
        g = unit_grid(12)
        P = random_kernel(g, rng)
        V = WeightFunction(g, np.ones(12))
        full = local_contraction(P, discrete_metric(g), V, r=2.0)
        sub = local_contraction(P, discrete_metric(g), V, r=2.0,
                                pair_budget=10, rng=make_rng(0))
        assert sub.heuristic and not full.heuristic
        assert sub.n_pairs == 10
        assert sub.s <= full.s + 1e-12


class TestIrfLyapunov:
    @staticmethod
    def noise(std=1.0, n=161, span=6.0):
        zg = build_grid(open_interval(-span * std, span * std), n)
        w = np.exp(-0.5 * (zg.x / std) ** 2)
        return DiscreteMeasure.from_unnormalized(zg, w)

    def test_polynomial_oracle(self):
        # F = x/2: lam0 = 1/2, c_lam = 0, so c_{lam,p} = E(G^2)^(1/2),
        # lam1 = 3/4, eps = 9/16, r = 4 sigma_p, c = 1/2 + (3 sigma_p)^2
        model = IrfModel(F=lambda x: 0.5 * x, noise=self.noise())
        grid = build_grid(open_interval(-8.0, 8.0), 100)
        rep = irf_lyapunov(model, grid, mode="polynomial", p=2.0)
        sig = model.noise_moment(2.0)
        assert rep.lam0 == pytest.approx(0.5, abs=1e-9)
        assert rep.c_lam == pytest.approx(0.0, abs=1e-9)
        assert rep.eps == pytest.approx(0.5625, abs=1e-9)
        assert rep.c == pytest.approx(0.5 + 9.0 * sig ** 2, rel=1e-6)
        assert not rep.not_certifiable
        assert rep.detail["r"] == pytest.approx(4.0 * sig, rel=1e-9)

    def test_polynomial_predicted_residual_small(self):
        model = IrfModel(F=lambda x: 0.5 * x, noise=self.noise())
        grid = build_grid(open_interval(-8.0, 8.0), 100)
        rep = irf_lyapunov(model, grid, mode="polynomial", p=2.0)
        # the inequality holds for the exact kernel; discretization noise only
        assert rep.predicted_residual <= 0.05
        assert rep.grid_certificate.valid

    def test_exponential_mode(self):
        model = IrfModel(F=lambda x: 0.5 * x, noise=self.noise(std=0.5))
        grid = build_grid(open_interval(-8.0, 8.0), 100)
        rep = irf_lyapunov(model, grid, mode="exponential", delta=0.5)
        a1 = math.exp(0.5 * rep.c_lam) * model.noise_exp_moment(0.5)
        lam1 = 1.0 - (1.0 - rep.lam0) ** 2
        assert rep.eps == pytest.approx(lam1, abs=1e-12)
        expect_c = 0.5 * a1 * (a1 / rep.eps) ** (rep.lam0 / (1.0 - rep.lam0))
        assert rep.c == pytest.approx(expect_c, rel=1e-9)
        assert rep.grid_certificate.valid

    def test_expanding_map_not_certifiable(self):
        model = IrfModel(F=lambda x: 1.1 * x, noise=self.noise())
        grid = build_grid(open_interval(-8.0, 8.0), 60)
        rep = irf_lyapunov(model, grid, mode="polynomial", p=2.0)
        assert rep.not_certifiable
        assert rep.grid_certificate is None

    def test_unknown_mode(self):
        model = IrfModel(F=lambda x: 0.5 * x, noise=self.noise())
        grid = build_grid(open_interval(-8.0, 8.0), 40)
        with pytest.raises(ValueError, match="mode"):
            irf_lyapunov(model, grid, mode="cubic")


class TestGeneratorDrift:
    def test_langevin_passes(self):
        bundle = build_model({"model": "langevin"})
        ex = bundle.extras
        rep = generator_drift_check(bundle.kernel, bundle.V, ex["a0"], ex["a1"],
                                    ex["h"], rel_tol=1e-3)
        assert rep.passes
        assert rep.eps_h == pytest.approx(1.0 / 1.1, abs=1e-15)
        assert rep.max_rel_violation <= 1e-3

    def test_wrong_constants_fail(self):
        bundle = build_model({"model": "langevin"})
        ex = bundle.extras
        rep = generator_drift_check(bundle.kernel, bundle.V, ex["a0"],
                                    0.1 * ex["a1"], ex["h"], rel_tol=1e-3)
        assert not rep.passes


class TestGibbsMinorization:
    def test_formula_below_direct(self):
        for seed in range(8):
            pair = build_gibbs_pair(random_gibbs(seed))
            vw = pair.V_weight().values
            ww = pair.W_weight().values
            lo = max(vw.min(), ww.min())
            hi = min(vw.max(), ww.max())
            if lo >= hi:
                continue
            for r in np.linspace(lo, hi, 4):
                rep = gibbs_minorization(pair, float(r))
                assert rep.formula_below_direct
                assert rep.slack_K >= -1e-10
                assert rep.slack_L >= -1e-10

    def test_empty_sublevel_raises(self):
        pair = build_gibbs_pair(random_gibbs(1))
        tiny = 0.5 * min(pair.V_weight().values.min(), pair.W_weight().values.min())
        with pytest.raises(ValueError):
            gibbs_minorization(pair, tiny)

    def test_alpha_positive_at_top_level(self):
        pair = build_gibbs_pair(random_gibbs(2))
        r = float(max(pair.V_weight().values.max(), pair.W_weight().values.max()))
        rep = gibbs_minorization(pair, r)
        assert rep.alpha > 0.0
        assert rep.alpha <= min(rep.alpha_direct_K, rep.alpha_direct_L) + 1e-12
