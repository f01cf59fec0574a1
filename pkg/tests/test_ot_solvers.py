import numpy as np
import pytest

from geomot.errors import DimensionError, MarginalError, ValidationError
from geomot.numerics import pairwise_distance
from geomot.ot_solvers import (
    FgwConfig,
    SinkhornConfig,
    fgw_gradient_wrt_latent,
    fgw_loss,
    gw_loss,
    sinkhorn,
)

from .oracles import (
    brute_force_alignment,
    central_difference,
    quartic_alignment_value,
    sinkhorn_reference,
)


def random_metric(n, seed, scale=2.0):
    pts = np.random.default_rng(seed).normal(size=(n, 3)) * scale
    return pairwise_distance(pts)


class TestSinkhorn:
    def test_constant_cost_uniform_plan(self):
        plan = sinkhorn(np.ones((2, 2)))
        np.testing.assert_allclose(plan.coupling, np.full((2, 2), 0.25))

    def test_one_by_one(self):
        plan = sinkhorn(np.array([[3.0]]))
        np.testing.assert_allclose(plan.coupling, [[1.0]])

    def test_matches_reference_solver(self):
        cost = np.array([[0.0, 1.0], [1.0, 0.0]])
        cfg = SinkhornConfig(entropy_epsilon=0.05, max_iterations=50)
        plan = sinkhorn(cost, cfg=cfg)
        ref = sinkhorn_reference(cost, [0.5, 0.5], [0.5, 0.5], 0.05)
        np.testing.assert_allclose(plan.coupling, ref, atol=1e-6)
        assert plan.coupling[0, 0] > plan.coupling[0, 1]

    def test_random_costs_match_reference(self):
        rng = np.random.default_rng(0)
        cost = rng.random((5, 4))
        a = rng.random(5)
        a /= a.sum()
        b = rng.random(4)
        b /= b.sum()
        plan = sinkhorn(cost, a, b, SinkhornConfig(entropy_epsilon=0.1, max_iterations=500))
        ref = sinkhorn_reference(cost, a, b, 0.1)
        np.testing.assert_allclose(plan.coupling, ref, atol=1e-6)

    def test_marginal_conservation_at_defaults(self):
        rng = np.random.default_rng(1)
        for trial in range(10):
            n, m = rng.integers(2, 9, size=2)
            cost = rng.random((n, m))
            plan = sinkhorn(cost)
            assert np.abs(plan.coupling.sum(axis=1) - 1.0 / n).max() < 1e-5
            assert np.abs(plan.coupling.sum(axis=0) - 1.0 / m).max() < 1e-5
            assert np.all(plan.coupling >= 0)

    def test_non_normalized_marginals_rejected(self):
        with pytest.raises(MarginalError):
            sinkhorn(np.ones((2, 2)), a=[0.7, 0.7], b=[0.5, 0.5])
        with pytest.raises(MarginalError):
            sinkhorn(np.ones((2, 2)), a=[-0.5, 1.5], b=[0.5, 0.5])

    def test_large_cost_triggers_stable_path_no_nan(self):
        cost = np.array([[0.0, 500.0], [500.0, 0.0]])
        plan = sinkhorn(cost, cfg=SinkhornConfig(entropy_epsilon=0.05))
        assert np.all(np.isfinite(plan.coupling))
        np.testing.assert_allclose(plan.coupling.sum(), 1.0, atol=1e-6)

    def test_loss_is_transport_cost(self):
        cost = np.random.default_rng(2).random((3, 3))
        plan = sinkhorn(cost)
        assert plan.loss == pytest.approx(float(np.sum(cost * plan.coupling)))


class TestGwLoss:
    def test_isometric_spaces_near_zero(self):
        d = random_metric(8, 0)
        res = gw_loss(d, d)
        assert res.loss <= 1e-4
        # near-identity coupling: diagonal carries almost all mass
        assert np.trace(res.coupling) == pytest.approx(1.0, abs=1e-3)

    def test_permutation_invariance(self):
        d = random_metric(8, 1)
        perm = np.random.default_rng(2).permutation(8)
        res = gw_loss(d, d[np.ix_(perm, perm)])
        assert res.loss <= 1e-4

    def test_relabeling_invariance_of_loss(self):
        d1 = random_metric(7, 3)
        d2 = random_metric(7, 4)
        base = gw_loss(d1, d2).loss
        perm = np.random.default_rng(5).permutation(7)
        permuted = gw_loss(d1[np.ix_(perm, perm)], d2).loss
        assert permuted == pytest.approx(base, abs=1e-6)

    def test_three_point_within_five_percent_of_brute_force(self):
        d1 = random_metric(3, 6, scale=1.5)
        d2 = random_metric(3, 7, scale=1.5)
        res = gw_loss(d1, d2)
        best = brute_force_alignment(d1, d2)
        assert res.loss <= best * 1.05 + 1e-12
        assert abs(res.loss - best) <= 0.05 * best + 1e-9

    def test_loss_matches_quartic_oracle_at_plan(self):
        d1 = random_metric(4, 8)
        d2 = random_metric(4, 9)
        res = gw_loss(d1, d2)
        oracle = quartic_alignment_value(d1, d2, res.coupling)
        assert res.loss == pytest.approx(oracle, rel=1e-10)

    def test_nonnegative_and_monotone_history(self):
        for seed in range(6):
            d1 = random_metric(5, seed)
            d2 = random_metric(6, seed + 50)
            res = gw_loss(d1, d2)
            assert res.loss >= -1e-12
            hist = res.loss_history
            assert all(a >= b - 1e-8 for a, b in zip(hist, hist[1:]))

    def test_asymmetric_input_rejected(self):
        bad = np.array([[0.0, 1.0], [2.0, 0.0]])
        with pytest.raises(ValidationError):
            gw_loss(bad, random_metric(2, 0))

    def test_nan_input_rejected(self):
        bad = np.array([[0.0, np.nan], [np.nan, 0.0]])
        with pytest.raises(Exception):
            gw_loss(bad, random_metric(2, 0))

    def test_marginal_conservation(self):
        d1 = random_metric(5, 10)
        d2 = random_metric(7, 11)
        res = gw_loss(d1, d2)
        assert np.abs(res.coupling.sum(axis=1) - 1 / 5).max() < 1e-5
        assert np.abs(res.coupling.sum(axis=0) - 1 / 7).max() < 1e-5


class TestFgwLoss:
    def test_alpha_zero_equals_gw_bitwise(self):
        d1 = random_metric(6, 12)
        d2 = random_metric(5, 13)
        c = np.random.default_rng(14).random((6, 5))
        cfg = FgwConfig(alpha=0.0)
        g = gw_loss(d1, d2, cfg)
        f = fgw_loss(d1, d2, c, cfg)
        assert np.array_equal(g.coupling, f.coupling)
        assert g.loss == f.loss
        assert g.iterations_used == f.iterations_used

    def test_isometric_zero_feature_cost(self):
        d = random_metric(6, 15)
        res = fgw_loss(d, d, np.zeros((6, 6)), FgwConfig(alpha=1.0))
        assert res.loss <= 1e-4

    def test_three_point_brute_force_with_feature_cost(self):
        d1 = random_metric(3, 16, scale=1.5)
        d2 = random_metric(3, 17, scale=1.5)
        c = np.random.default_rng(18).random((3, 3))
        alpha = 0.7
        res = fgw_loss(d1, d2, c, FgwConfig(alpha=alpha))
        best = brute_force_alignment(d1, d2, feature_cost=c, alpha=alpha)
        assert abs(res.loss - best) <= 0.05 * best + 1e-9

    def test_shape_mismatch_rejected(self):
        with pytest.raises(DimensionError):
            fgw_loss(random_metric(3, 0), random_metric(4, 1), np.zeros((3, 3)))


class TestFgwGradient:
    def test_zero_at_matched_distances(self):
        d = random_metric(4, 20)
        plan = gw_loss(d, d)
        grad = fgw_gradient_wrt_latent(d, d, plan)
        assert np.abs(grad).max() < 1e-2  # entropic plan leaves tiny residue

    def test_matches_finite_differences(self):
        rng = np.random.default_rng(21)
        d_graph = random_metric(4, 22)
        d_latent = random_metric(4, 23)
        plan = gw_loss(d_graph, d_latent)

        def fixed_plan_objective(d_flat):
            return quartic_alignment_value(
                d_graph, d_flat.reshape(4, 4), plan.coupling
            )

        grad = fgw_gradient_wrt_latent(d_latent, d_graph, plan)
        fd = central_difference(fixed_plan_objective, d_latent, h=1e-5)
        denom = np.abs(grad) + 1e-6
        assert np.max(np.abs(grad - fd) / denom) < 1e-4

    def test_plan_product_scaling_linearity(self):
        d_graph = random_metric(3, 24)
        d_latent = random_metric(3, 25)
        plan = gw_loss(d_graph, d_latent)
        grad1 = fgw_gradient_wrt_latent(d_latent, d_graph, plan)
        scaled = type(plan)(
            coupling=2.0 * plan.coupling,
            loss=plan.loss,
            iterations_used=plan.iterations_used,
            converged=plan.converged,
        )
        grad2 = fgw_gradient_wrt_latent(d_latent, d_graph, scaled)
        np.testing.assert_allclose(grad2, 4.0 * grad1, atol=1e-12)

    def test_symmetric_output(self):
        d_graph = random_metric(5, 26)
        d_latent = random_metric(5, 27)
        plan = gw_loss(d_graph, d_latent)
        grad = fgw_gradient_wrt_latent(d_latent, d_graph, plan)
        np.testing.assert_array_equal(grad, grad.T)
