import numpy as np
import pytest

from geomot.errors import ValidationError
from geomot.factorization import LatentBatch, LossConfig, TrainConfig, init_heads, train
from geomot.graph_priors import GraphConfig, build_emotion_graph, build_identity_graph
from geomot.numerics import centered_cross_covariance, frobenius_norm
from geomot.ot_solvers import FgwConfig, SinkhornConfig
from geomot.synthetic_bench import (
    SyntheticSpec,
    ToyDecoder,
    generate,
    make_contractive_decoder,
    measure_assumption_constants,
    verify_bound,
)

from .test_factorization import identity_head


def small_spec(**kw):
    base = dict(
        n_identities=6,
        samples_per_identity=10,
        va_noise=0.05,
        shared_dim=12,
        attr_dim=4,
        id_dim=4,
        leakage_strength=0.0,
        seed=0,
    )
    base.update(kw)
    return SyntheticSpec(**base)


def build_graphs(ds, k=5, n_proto=8):
    cfg = GraphConfig(k_neighbors=k, n_prototypes=n_proto)
    ge = build_emotion_graph(
        ds.va_points, [int(v) for v in ds.emotion_labels], cfg, seed=1
    )
    gi = build_identity_graph(ds.identity_centroids, cfg)
    return ge, gi


class TestToyDecoder:
    def test_norm_violation_rejected(self):
        rng = np.random.default_rng(0)
        w = rng.normal(size=(4, 6))
        w *= 2.0 / np.linalg.norm(w, 2)
        with pytest.raises(ValidationError):
            ToyDecoder(w, np.zeros(4), lipschitz_bound=1.0)

    def test_power_iteration_matches_svd(self):
        rng = np.random.default_rng(1)
        w = rng.normal(size=(5, 7))
        true_norm = float(np.linalg.norm(w, 2))
        dec = ToyDecoder(w, np.zeros(5), lipschitz_bound=true_norm * 1.0000001)
        assert dec.lipschitz_bound >= true_norm

    def test_factory_respects_bound(self):
        dec = make_contractive_decoder(6, 4, lipschitz_bound=1.5, seed=2)
        assert float(np.linalg.norm(dec.weight, 2)) <= 1.5

    def test_decode_is_affine(self):
        dec = make_contractive_decoder(3, 2, 1.0, seed=3)
        u = np.random.default_rng(4).normal(size=(5, 3))
        np.testing.assert_allclose(dec.decode(u), u @ dec.weight.T + dec.bias)


class TestGenerate:
    def test_zero_noise_zero_leakage_identical_samples(self):
        ds = generate(small_spec(va_noise=0.0))
        labels = ds.emotion_labels
        groups = ds.identity_groups
        seen = {}
        for i in range(ds.n_samples):
            key = (int(labels[i]), int(groups[i]))
            if key in seen:
                np.testing.assert_array_equal(ds.z[i], ds.z[seen[key]])
            else:
                seen[key] = i

    def test_zero_leakage_small_cross_covariance(self):
        ds = generate(
            small_spec(n_identities=50, samples_per_identity=200, seed=3)
        )
        cov = centered_cross_covariance(ds.true_attr, ds.true_id)
        assert frobenius_norm(cov) < 0.05

    def test_leakage_raises_cross_covariance(self):
        quiet = generate(small_spec(n_identities=20, samples_per_identity=50))
        leaky = generate(
            small_spec(n_identities=20, samples_per_identity=50, leakage_strength=0.8)
        )
        c0 = frobenius_norm(centered_cross_covariance(quiet.true_attr, quiet.true_id))
        c1 = frobenius_norm(centered_cross_covariance(leaky.true_attr, leaky.true_id))
        assert c1 > c0

    def test_bit_identical_regeneration(self):
        a = generate(small_spec(seed=7))
        b = generate(small_spec(seed=7))
        np.testing.assert_array_equal(a.z, b.z)
        np.testing.assert_array_equal(a.va_points, b.va_points)
        for m in ("img", "text", "aud"):
            np.testing.assert_array_equal(
                a.modality_embeddings[m], b.modality_embeddings[m]
            )

    def test_batch_stream_deterministic(self):
        ds = generate(small_spec())
        a = [b.z.copy() for b in ds.batch_stream(8, 3, seed=5)]
        b = [b.z.copy() for b in ds.batch_stream(8, 3, seed=5)]
        for x, y in zip(a, b):
            np.testing.assert_array_equal(x, y)


class TestMeasureConstants:
    def test_isometric_heads_give_tiny_eps_e(self):
        # Path-shaped emotion graph; place one sample exactly at each
        # prototype with the attribute factor equal to a 1-D isometric
        # embedding of the graph metric, through exact identity heads.
        from .oracles import classical_mds
        from geomot.graph_priors import GraphPrior, shortest_path_matrix

        n = 5
        w = np.zeros((n, n))
        for i in range(n - 1):
            w[i, i + 1] = w[i + 1, i] = 1.0
        dist = shortest_path_matrix(
            GraphPrior(node_embeddings=np.eye(n), adjacency_weights=w), 0.0
        )
        graph = GraphPrior(
            node_embeddings=np.stack([np.arange(n, dtype=float), np.ones(n)], axis=1),
            adjacency_weights=w,
            distance_matrix=dist,
            labels=list(range(n)),
        )
        coords = classical_mds(dist, 2)
        batch = LatentBatch(
            z=coords,
            emotion_labels=np.arange(n),
            identity_groups=np.zeros(n, dtype=int),
            va_points=graph.node_embeddings.copy(),
        )
        heads = (identity_head(2), identity_head(2))
        dec = make_contractive_decoder(4, 3, 1.0, seed=0)
        report = measure_assumption_constants(heads, batch, (graph, None), dec)
        assert report.eps_e < 1e-3

    def test_identical_within_group_samples_zero_eps_i(self):
        ds = generate(small_spec(va_noise=0.0))
        ge, gi = build_graphs(ds)
        heads = init_heads(ds.spec.shared_dim, 8, 4, 4, seed=1)
        report = measure_assumption_constants(
            heads, ds.full_batch(), (ge, gi), make_contractive_decoder(8, 4, 1.0, 0)
        )
        # same emotion+identity collapse to identical z, but different
        # emotions within one group keep eps_i positive; rebuild with one
        # emotion per group to pin it at exactly zero
        labels = np.zeros(ds.n_samples, dtype=int)
        batch = LatentBatch(
            z=ds.z[labels == 0][:12],
            emotion_labels=np.zeros(12, dtype=int),
            identity_groups=np.repeat([0, 1], 6),
            va_points=ds.va_points[:12],
        )
        batch.z = np.repeat(ds.z[:2], 6, axis=0)
        report = measure_assumption_constants(
            (init_heads(ds.spec.shared_dim, 8, 4, 4, 1)[0], init_heads(ds.spec.shared_dim, 8, 4, 4, 1)[1]),
            batch,
            (ge, gi),
            make_contractive_decoder(8, 4, 1.0, 0),
        )
        assert report.eps_i == pytest.approx(0.0, abs=1e-20)

    def test_orthogonal_factors_zero_eps_perp(self):
        ds = generate(small_spec())
        ge, gi = build_graphs(ds)
        batch = ds.full_batch()
        # heads extracting disjoint coordinate blocks, with a batch whose
        # even rows live in the attribute block and odd rows in the
        # identity block: every per-sample outer product vanishes, so the
        # factor cross product is exactly zero.
        d = ds.spec.shared_dim
        half = d // 2
        h_attr = identity_head(d)
        h_id = identity_head(d)
        mask_a = np.zeros((d, d))
        mask_a[:half, :half] = np.eye(half)
        mask_i = np.zeros((d, d))
        mask_i[half:, half:] = np.eye(d - half)
        h_attr.layer2_weights = np.vstack([mask_a, -mask_a])
        h_id.layer2_weights = np.vstack([mask_i, -mask_i])
        z = batch.z.copy()
        z[::2, half:] = 0.0
        z[1::2, :half] = 0.0
        batch.z = z
        report = measure_assumption_constants(
            (h_attr, h_id), batch, (ge, gi), make_contractive_decoder(2 * d, 4, 1.0, 0)
        )
        assert report.eps_perp == pytest.approx(0.0, abs=1e-18)


class TestVerifyBound:
    def test_bound_holds_on_seeded_configs(self):
        ds = generate(small_spec(seed=11))
        ge, gi = build_graphs(ds)
        heads = init_heads(ds.spec.shared_dim, 8, 4, 4, seed=2)
        dec = make_contractive_decoder(8, 5, 1.2, seed=3)
        report = verify_bound(heads, (ge, gi), dec, ds.full_batch(), n_pairs=64, seed=4)
        assert report.holds
        assert report.pointwise_holds
        assert report.lhs <= report.rhs + 1e-9

    def test_same_node_pairs_give_zero_lhs(self):
        # All batch samples carry label 0 and exactly one prototype does
        # too, so every sampled pair is (u, u) and the mean output gap is
        # exactly zero while the bound side stays nonnegative.
        from geomot.graph_priors import GraphPrior, shortest_path_matrix

        n = 4
        w = np.zeros((n, n))
        for i in range(n - 1):
            w[i, i + 1] = w[i + 1, i] = 1.0
        dist = shortest_path_matrix(
            GraphPrior(node_embeddings=np.eye(n), adjacency_weights=w), 1e-6
        )
        graph = GraphPrior(
            node_embeddings=np.stack([np.arange(n, dtype=float), np.ones(n)], axis=1),
            adjacency_weights=w,
            distance_matrix=dist,
            labels=list(range(n)),
        )
        rng = np.random.default_rng(5)
        batch = LatentBatch(
            z=rng.normal(size=(6, 8)),
            emotion_labels=np.zeros(6, dtype=int),
            identity_groups=np.arange(6) % 2,
            va_points=rng.normal(size=(6, 2)),
        )
        heads = init_heads(8, 6, 4, 4, seed=2)
        dec = make_contractive_decoder(8, 5, 1.0, seed=3)
        report = verify_bound(heads, (graph, None), dec, batch, n_pairs=16, seed=5)
        assert report.lhs == 0.0
        assert report.holds

    def test_violating_decoder_rejected_at_construction(self):
        rng = np.random.default_rng(6)
        w = rng.normal(size=(5, 8))
        w *= 3.0 / np.linalg.norm(w, 2)
        with pytest.raises(ValidationError):
            ToyDecoder(w, np.zeros(5), lipschitz_bound=1.0)

    def test_holds_across_leakage_levels(self):
        for leak in (0.0, 0.25, 0.5):
            ds = generate(small_spec(leakage_strength=leak, seed=21))
            ge, gi = build_graphs(ds)
            heads = init_heads(ds.spec.shared_dim, 8, 4, 4, seed=7)
            dec = make_contractive_decoder(8, 4, 1.0, seed=8)
            report = verify_bound(heads, (ge, gi), dec, ds.full_batch(), 50, seed=9)
            assert report.holds and report.pointwise_holds


class TestOrthogonalityTrainingTrend:
    def test_eps_perp_decreases_with_lambda_perp(self):
        ds = generate(small_spec(leakage_strength=0.6, seed=31))
        ge, gi = build_graphs(ds)
        dec = make_contractive_decoder(8, 4, 1.0, seed=1)
        results = []
        for lam in (0.0, 0.1, 0.5, 1.0):
            heads = init_heads(ds.spec.shared_dim, 8, 4, 4, seed=2)
            cfg = LossConfig(
                lambda_e=0.0,
                lambda_i=0.0,
                lambda_perp=lam,
                lambda_lip=0.0,
                fgw=FgwConfig(
                    outer_iterations=4,
                    sinkhorn=SinkhornConfig(max_iterations=20),
                ),
            )
            tcfg = TrainConfig(learning_rate=3e-3, weight_decay=0.0, steps=120, batch_size=32, seed=3)
            stream = ds.batch_stream(32, 120, seed=4)
            trained, _ = train(stream, (ge, gi), dec, cfg, tcfg, heads)
            report = measure_assumption_constants(trained, ds.full_batch(), (ge, gi), dec)
            results.append(report.eps_perp)
        assert all(a >= b for a, b in zip(results, results[1:]))
        assert results[-1] < results[0]
