import math

import numpy as np
import pytest

from conftest import make_rng, random_kernel, two_state_kernel, unit_grid
from ergocert.kernels import (MODEL_DEFAULTS, GibbsModel, IrfModel,
                              KernelMatrix, build_arcsine_kernel,
                              build_gibbs_pair, build_halfline_kernel,
                              build_irf_kernel, build_langevin_kernel,
                              build_model, build_unit_interval_kernel,
                              cell_edges_1d, left_action, op_norm_V,
                              op_norm_VW, power, right_action,
                              save_kernel_csv)
from ergocert.measures import (DiscreteMeasure, WeightFunction, build_grid,
                               half_line_truncated, open_interval,
                               total_variation)


class TestKernelMatrix:
    def test_row_sum_enforced(self):
        g = unit_grid(2)
        with pytest.raises(ValueError, match="row"):
            KernelMatrix(g, np.array([[0.5, 0.4], [0.5, 0.5]]))

    def test_negative_rejected(self):
        g = unit_grid(2)
        with pytest.raises(ValueError):
            KernelMatrix(g, np.array([[1.2, -0.2], [0.5, 0.5]]))

    def test_compose_is_matrix_product(self, rng):
        g = unit_grid(5)
        P = random_kernel(g, rng)
        Q = random_kernel(g, rng)
        np.testing.assert_allclose(P.compose(Q).rows, P.rows @ Q.rows, atol=1e-14)

    def test_power(self, rng):
        g = unit_grid(4)
        P = random_kernel(g, rng)
        np.testing.assert_allclose(power(P, 0).rows, np.eye(4), atol=0)
        np.testing.assert_allclose(power(P, 3).rows,
                                   P.rows @ P.rows @ P.rows, atol=1e-14)

    def test_actions(self, rng):
        g = unit_grid(6)
        P = random_kernel(g, rng)
        mu = DiscreteMeasure.uniform(g)
        np.testing.assert_allclose(left_action(mu, P).weights,
                                   mu.weights @ P.rows, atol=1e-12)
        f = rng.normal(size=6)
        np.testing.assert_allclose(right_action(P, f), P.rows @ f, atol=0)

    def test_op_norms(self, rng):
        g = unit_grid(5)
        P = random_kernel(g, rng)
        V = WeightFunction(g, 0.5 + rng.random(5))
        W = WeightFunction(g, 0.5 + rng.random(5))
        assert op_norm_V(P, V) == pytest.approx(
            float(np.max((P.rows @ V.values) / V.values)))
        assert op_norm_VW(P, V, W) == pytest.approx(
            float(np.max((P.rows @ W.values) / V.values)))


class TestCellEdges:
    def test_unit_interval(self):
        g = build_grid(open_interval(0.0, 1.0), 4)
        np.testing.assert_allclose(cell_edges_1d(g), [0.0, 0.25, 0.5, 0.75, 1.0])


class TestUnitIntervalMixture:
    def test_rows_formula(self, rng):
        g = build_grid(open_interval(0.0, 1.0), 6)
        Q = random_kernel(g, rng)
        nu = DiscreteMeasure.from_unnormalized(g, rng.gamma(1.0, 1.0, size=6))
        P = build_unit_interval_kernel(Q, nu)
        x = g.x[:, None]
        np.testing.assert_allclose(P.rows, x * Q.rows + (1 - x) * nu.weights,
                                   atol=1e-14)

    def test_wrong_domain_rejected(self, rng):
        g = build_grid(open_interval(0.0, 2.0), 4)
        Q = random_kernel(g, rng)
        with pytest.raises(ValueError):
            build_unit_interval_kernel(Q, DiscreteMeasure.uniform(g))


class TestArcsine:
    def test_row_sums(self):
        P = build_arcsine_kernel(build_grid(open_interval(0.0, 1.0), 50))
        np.testing.assert_allclose(P.rows.sum(axis=1), 1.0, atol=1e-12)

    def test_exact_cell_integrals(self):
        # n = 2: cells (0, 1/2) and (1/2, 1), midpoints 1/4 and 3/4.
        # From x = 1/4: mass below x is int_0^{1/4} 1/(2x) = 1/2 in cell 1's
        # left piece, plus (1/2 - 1/4)/(2(1 - 1/4)) = 1/6 above -> cell 1
        # total 2/3, cell 2 gets (1 - 1/2)/(2 * 3/4) = 1/3.
        P = build_arcsine_kernel(build_grid(open_interval(0.0, 1.0), 2))
        np.testing.assert_allclose(P.rows[0], [2 / 3, 1 / 3], atol=1e-12)
        np.testing.assert_allclose(P.rows[1], [1 / 3, 2 / 3], atol=1e-12)

    def test_mass_below_x_is_half(self):
        # P(x, (0, x]) = 1/2 for every x by construction
        g = build_grid(open_interval(0.0, 1.0), 64)
        P = build_arcsine_kernel(g)
        edges = cell_edges_1d(g)
        for i in (5, 31, 50):
            x = g.x[i]
            full = edges[1:] <= x + 1e-15
            below = P.rows[i][full].sum()
            # the cell containing x contributes its left piece
            k = int(np.searchsorted(edges, x, side="right") - 1)
            below += (x - edges[k]) / (2 * x)
            assert below == pytest.approx(0.5, abs=1e-12)


class TestHalfLine:
    def test_row_sums_and_params(self):
        g = build_grid(half_line_truncated(1e-3, 12.0), 80)
        P = build_halfline_kernel(0.5, 1.0, g)
        np.testing.assert_allclose(P.rows.sum(axis=1), 1.0, atol=1e-12)
        with pytest.raises(ValueError):
            build_halfline_kernel(1.0, 1.0, g)
        with pytest.raises(ValueError):
            build_halfline_kernel(0.5, 0.0, g)

    def test_refresh_component_is_weibull(self):
        # delta = 0 leaves only the refresh, identical in every row
        g = build_grid(half_line_truncated(1e-3, 12.0), 60)
        P = build_halfline_kernel(0.0, 1.0, g)
        np.testing.assert_allclose(P.rows, np.tile(P.rows[0], (60, 1)), atol=1e-12)
        edges = cell_edges_1d(g)
        expect = np.exp(-edges[:-1] ** 2) - np.exp(-edges[1:] ** 2)
        expect /= expect.sum()
        np.testing.assert_allclose(P.rows[0], expect, atol=1e-12)


class TestIrf:
    def test_deterministic_noise_atom(self):
        g = build_grid(open_interval(-4.0, 4.0), 16)
        zgrid = build_grid(open_interval(-0.5, 1.5), 2)  # midpoints 0 and 1
        noise = DiscreteMeasure(zgrid, np.array([1.0, 0.0]))  # atom at 0
        model = IrfModel(F=lambda x: 0.5 * x, noise=noise)
        P, rep = build_irf_kernel(model, g)
        assert rep.clamped_fraction == 0.0
        assert not rep.truncation_warning
        edges = cell_edges_1d(g)
        for i in range(16):
            target = int(np.searchsorted(edges, 0.5 * g.x[i], side="right") - 1)
            assert P.rows[i, target] == 1.0

    def test_two_atom_noise(self):
        g = build_grid(open_interval(-4.0, 4.0), 32)
        zgrid = build_grid(open_interval(-2.0, 2.0), 2)  # atoms at -1 and 1
        noise = DiscreteMeasure.uniform(zgrid)
        model = IrfModel(F=lambda x: 0.0 * x, noise=noise)
        P, _ = build_irf_kernel(model, g)
        edges = cell_edges_1d(g)
        lo = int(np.searchsorted(edges, -1.0, side="right") - 1)
        hi = int(np.searchsorted(edges, 1.0, side="right") - 1)
        assert P.rows[7, lo] == 0.5 and P.rows[7, hi] == 0.5

    def test_truncation_warning(self):
        g = build_grid(open_interval(-1.0, 1.0), 8)
        zgrid = build_grid(open_interval(-6.0, 6.0), 13)
        rng = make_rng(5)
        noise = DiscreteMeasure.from_unnormalized(zgrid, 1.0 + rng.random(13))
        model = IrfModel(F=lambda x: x, noise=noise)
        _, rep = build_irf_kernel(model, g)
        assert rep.truncation_warning
        assert rep.clamped_fraction > 0.1

    def test_noise_moments(self):
        zgrid = build_grid(open_interval(-2.0, 2.0), 2)
        noise = DiscreteMeasure.uniform(zgrid)  # atoms at +-1
        model = IrfModel(F=lambda x: x, noise=noise)
        assert model.noise_moment(2.0) == pytest.approx(1.0)
        assert model.noise_exp_moment(1.0) == pytest.approx(math.e)


class TestLangevin:
    def test_deterministic_limit(self):
        g = build_grid(open_interval(-4.0, 4.0), 32)
        P = build_langevin_kernel(lambda x: x, gamma=1.0, sigma=0.0, h=0.25, grid=g)
        edges = cell_edges_1d(g)
        for i in (0, 10, 31):
            target = int(np.searchsorted(edges, 0.75 * g.x[i], side="right") - 1)
            assert P.rows[i, target] == 1.0

    def test_gaussian_rows_mean(self):
        g = build_grid(open_interval(-8.0, 8.0), 400)
        P = build_langevin_kernel(lambda x: x, gamma=1.0, sigma=0.8, h=0.1, grid=g)
        np.testing.assert_allclose(P.rows.sum(axis=1), 1.0, atol=1e-12)
        i = 200
        mean = float(P.rows[i] @ g.x)
        assert mean == pytest.approx(0.9 * g.x[i], abs=2e-3)

    def test_step_must_be_positive(self):
        g = build_grid(open_interval(-1.0, 1.0), 8)
        with pytest.raises(ValueError):
            build_langevin_kernel(lambda x: x, 1.0, 1.0, 0.0, g)


def random_gibbs(seed, n=None, adversarial=False):
    rng = make_rng(seed)
    if n is None:
        n = int(rng.integers(3, 12))
    g = unit_grid(n)
    nu = rng.gamma(0.5 if adversarial else 2.0, 1.0, size=n) + 1e-3
    scale = 3.0 if adversarial else 1.5
    m_raw = rng.normal(scale=scale, size=(n, n))
    if adversarial:
        m_raw[rng.random((n, n)) < 0.3] -= rng.exponential(4.0)
    return GibbsModel.from_unnormalized(
        g, nu, rng.normal(scale=2.0 if adversarial else 1.0, size=n),
        rng.normal(scale=2.0 if adversarial else 1.0, size=n),
        m_raw, delta=float(rng.uniform(0.05, 0.45)))


class TestGibbs:
    def test_normalization_enforced(self):
        g = unit_grid(3)
        nu = np.ones(3)
        with pytest.raises(ValueError, match="probability"):
            GibbsModel(g, nu, np.zeros(3), np.zeros(3), np.zeros((3, 3)), 0.25)

    def test_from_unnormalized_fixes_shifts(self):
        model = random_gibbs(1)
        nu, gg, hh, mm = model.nu, model.g, model.h, model.m
        assert float(np.exp(-gg) @ nu) == pytest.approx(1.0, abs=1e-12)
        assert float(np.exp(-hh) @ nu) == pytest.approx(1.0, abs=1e-12)
        np.testing.assert_allclose(np.exp(-mm) @ nu, 1.0, atol=1e-12)

    def test_delta_range(self):
        g = unit_grid(2)
        nu = np.ones(2)
        with pytest.raises(ValueError, match="delta"):
            GibbsModel.from_unnormalized(g, nu, np.zeros(2), np.zeros(2),
                                         np.zeros((2, 2)), 0.5)

    def test_duality_exact(self):
        for seed in range(10):
            pair = build_gibbs_pair(random_gibbs(seed))
            nh = left_action(left_action(pair.nu_h, pair.M), pair.K)
            ng = left_action(left_action(pair.nu_g, pair.K), pair.L)
            assert total_variation(nh, pair.nu_h) < 1e-12
            assert total_variation(ng, pair.nu_g) < 1e-12

    def test_product_composition(self):
        pair = build_gibbs_pair(random_gibbs(2))
        np.testing.assert_allclose(pair.product.rows,
                                   pair.K.rows @ pair.L.rows, atol=1e-14)

    def test_projected_potentials(self):
        pair = build_gibbs_pair(random_gibbs(3))
        m = pair.model.m
        np.testing.assert_allclose(pair.m_h, pair.nu_h.weights @ m, atol=1e-14)
        np.testing.assert_allclose(pair.m_g, m @ pair.nu_g.weights, atol=1e-14)

    def test_lyapunov_slacks_nonnegative(self):
        for seed in range(25):
            pair = build_gibbs_pair(random_gibbs(seed))
            assert pair.h2g_slack().min() >= -1e-10
            assert pair.g2h_slack().min() >= -1e-10

    def test_signed_constant_survives_adversarial_m(self):
        # strongly negative transition potentials break the variant without
        # the exp(-min m) factor; the shipped constant must not care
        unsigned_failed = 0
        for seed in range(60):
            pair = build_gibbs_pair(random_gibbs(10_000 + seed, adversarial=True))
            assert pair.g2h_slack().min() >= -1e-10
            d = pair.model.delta
            lhs = np.exp(-d * pair.model.h) * (pair.L.rows @ np.exp(d * pair.model.g))
            slack_u = (pair.c_delta_g_unsigned * np.exp(-pair.h_delta) - lhs).min()
            unsigned_failed += slack_u < -1e-10
        assert unsigned_failed > 0


class TestModelCatalog:
    def test_all_tags_build(self):
        for tag in MODEL_DEFAULTS:
            spec = {"model": tag}
            if tag in ("arcsine", "half_line", "langevin"):
                spec["n"] = 40
            bundle = build_model(spec)
            assert bundle.label == tag
            np.testing.assert_allclose(bundle.kernel.rows.sum(axis=1), 1.0,
                                       atol=1e-10)
            assert bundle.V.values.min() > 0

    def test_unknown_model_raises(self):
        with pytest.raises(ValueError, match="unknown model"):
            build_model({"model": "nope"})

    def test_unknown_param_raises(self):
        with pytest.raises(ValueError, match="param"):
            build_model({"model": "two_state", "zeta": 1.0})

    def test_defaults_merged(self):
        b = build_model({"model": "two_state", "p": 0.3})
        assert b.params["p"] == 0.3
        assert b.params["q"] == MODEL_DEFAULTS["two_state"]["q"]

    def test_two_state_rows(self):
        b = build_model({"model": "two_state"})
        np.testing.assert_allclose(b.kernel.rows, two_state_kernel().rows)

    def test_save_kernel_roundtrip(self, tmp_path):
        b = build_model({"model": "two_state"})
        path = tmp_path / "k.csv"
        save_kernel_csv(path, b.kernel)
        back = np.loadtxt(path, delimiter=",")
        np.testing.assert_array_equal(back, b.kernel.rows)
