import numpy as np
import pytest

from vflbargain.estimator import (
    BundleGainEstimator,
    PriceGainEstimator,
    TrainingSample,
    load_snapshot,
    save_snapshot,
)
from vflbargain.market import FeatureBundle, QuotedPrice

Q = QuotedPrice(10, 1.2, 2.2)


def randomized(est, seed=0):
    rng = np.random.default_rng(seed)
    est.restore(rng.normal(0, 0.5, size=est.snapshot().size))
    return est


def loss_at(est, v, sample):
    est.restore(v)
    return (est.predict_sample(sample) - sample.target) ** 2


def test_untrained_prediction_is_zero():
    f = PriceGainEstimator(50, 10)
    assert f.predict(Q) == 0.0 and f.predict(QuotedPrice(30, 3, 8)) == 0.0
    g = BundleGainEstimator(["a", "b"])
    assert g.predict(FeatureBundle("F", ["a"])) == 0.0


def test_prediction_deterministic():
    f = randomized(PriceGainEstimator(50, 10, hidden=(8, 4)))
    assert f.predict(Q) == f.predict(Q)
    assert np.array_equal(f.predict_many([Q, Q]), np.array([f.predict(Q)] * 2))


def test_price_gradient_matches_finite_difference():
    f = randomized(PriceGainEstimator(50, 10, hidden=(5, 4)), seed=1)
    sample = TrainingSample(Q, 0.3)
    v0 = f.snapshot()
    loss, gw, gb = f.loss_and_grads(sample)
    analytic = np.concatenate([g.ravel() for g in [*gw, *gb]])
    h = 1e-6
    numeric = np.empty_like(v0)
    for i in range(v0.size):
        e = np.zeros_like(v0)
        e[i] = h
        numeric[i] = (loss_at(f, v0 + e, sample) - loss_at(f, v0 - e, sample)) / (2 * h)
    f.restore(v0)
    np.testing.assert_allclose(analytic, numeric, rtol=1e-4, atol=1e-9)


def test_bundle_gradient_matches_finite_difference():
    g = randomized(BundleGainEstimator(["a", "b", "c"], dim=3, hidden=(4,)), seed=2)
    sample = TrainingSample(FeatureBundle("F", ["a", "c"]), 0.2)
    v0 = g.snapshot()
    loss, gw, gb, rows, ge = g.loss_and_grads(sample)
    n_net = g.net.flat().size
    analytic = np.zeros_like(v0)
    analytic[:n_net] = np.concatenate([x.ravel() for x in [*gw, *gb]])
    emb = np.zeros_like(g.embeddings)
    emb[rows] = ge
    analytic[n_net:] = emb.ravel()
    h = 1e-6
    numeric = np.empty_like(v0)
    for i in range(v0.size):
        e = np.zeros_like(v0)
        e[i] = h
        numeric[i] = (loss_at(g, v0 + e, sample) - loss_at(g, v0 - e, sample)) / (2 * h)
    np.testing.assert_allclose(analytic, numeric, rtol=1e-4, atol=1e-9)


def test_zero_loss_leaves_parameters():
    f = PriceGainEstimator(50, 10)
    before = f.snapshot()
    assert f.update(TrainingSample(Q, 0.0)) == 0.0
    assert np.array_equal(before, f.snapshot())


def test_price_convergence_on_repeated_sample():
    f = PriceGainEstimator(50, 10, lr=1e-2)
    s = TrainingSample(Q, 0.1)
    losses = [f.update(s) for _ in range(500)]
    assert abs(f.predict(Q) - 0.1) < 1e-2
    tail = losses[100:]
    assert all(b <= a + 1e-15 for a, b in zip(tail, tail[1:]))


def test_bundle_convergence_on_repeated_sample():
    g = BundleGainEstimator(["a", "b", "c"], lr=1e-2)
    F = FeatureBundle("F", ["a", "b"])
    for _ in range(500):
        g.update(TrainingSample(F, 0.1))
    assert abs(g.predict(F) - 0.1) < 1e-2


def test_bundle_representation_properties():
    g = BundleGainEstimator(["a", "b", "c"])
    np.testing.assert_array_equal(g.represent(FeatureBundle("A", ["a"])), g.embeddings[g.index["a"]])
    assert g.predict(frozenset(["a", "b"])) == g.predict(FeatureBundle("X", ["b", "a"]))
    with pytest.raises(KeyError):
        g.predict(FeatureBundle("Z", ["zz"]))


def test_absent_feature_embedding_unchanged():
    g = randomized(BundleGainEstimator(["a", "b", "c"], hidden=(8,)), seed=3)
    c_before = g.embeddings[g.index["c"]].copy()
    g.update(TrainingSample(FeatureBundle("F", ["a", "b"]), 0.4))
    np.testing.assert_array_equal(g.embeddings[g.index["c"]], c_before)


def test_clipping_keeps_parameters_finite():
    f = PriceGainEstimator(50, 10, lr=1.0, clip_norm=0.5)
    for _ in range(50):
        f.update(TrainingSample(Q, 1e6))
    assert np.all(np.isfinite(f.snapshot()))


def test_buffer_training_schedule():
    f = PriceGainEstimator(50, 10, updates_per_round=10)
    assert np.isnan(f.buffer_mse())
    f.observe(TrainingSample(Q, 0.1, 1))
    assert len(f.buffer) == 1 and f.buffer_mse() < 0.01


def test_snapshot_roundtrip(tmp_path):
    g = randomized(BundleGainEstimator(["a", "b"], dim=4, hidden=(3,)), seed=4)
    path = tmp_path / "g.txt"
    save_snapshot(g, path)
    h = BundleGainEstimator(["a", "b"], dim=4, hidden=(3,), seed=99)
    load_snapshot(h, path)
    np.testing.assert_array_equal(g.snapshot(), h.snapshot())
    with pytest.raises(ValueError):
        PriceGainEstimator(50, 10, hidden=(3,)).restore(np.zeros(3))


def test_non_finite_target_rejected():
    with pytest.raises(ValueError):
        TrainingSample(Q, float("nan"))
