import numpy as np
import pytest

from infoadv import autodiff as ad
from infoadv.generator import (NormalizedView, ViewGenerator, edge_preserve_rate, edge_scores, generate_view,
                               logistic_noise, sample_mask)
from infoadv.graph import sym_normalize

from conftest import dense_sym_norm, make_graph, random_graph


def test_zero_interval_keeps_everything():
    g = random_graph(10, 0.4, seed=0)
    gen = ViewGenerator(3, 4, bounds=(0.0, 0.0), seed=0)
    with ad.no_record():
        s = edge_scores(gen, g)
        view = generate_view(gen, g, seed=1)
    assert np.all(s.value == 0)
    assert np.all(view.mask.value == 1)
    assert np.allclose(view.norm.matrix().to_dense(), sym_normalize(g).to_dense(), atol=1e-15)


def test_score_saturates_at_upper_bound():
    g = random_graph(6, 0.6, seed=1)
    gen = ViewGenerator(3, 4, bounds=(0.1, 0.7), seed=0)
    gen.params.set("generator.mlp2_bias", np.array([[1e3]]))
    with ad.no_record():
        s = edge_scores(gen, g).value
    assert np.allclose(s, 0.7)


def test_scores_match_hand_forward():
    g = make_graph(4, [(0, 1), (1, 2), (2, 3), (0, 3)], d=3, seed=5)
    gen = ViewGenerator(3, 2, bounds=(0.0, 0.5), seed=2)
    p = {k: t.value for k, t in gen.params.items()}
    a = dense_sym_norm(g)
    h = np.maximum(a @ g.features @ p["generator.gnn"], 0)
    pair = np.hstack([h[g.edges[:, 0]], h[g.edges[:, 1]]])
    hid = np.maximum(pair @ p["generator.mlp1_weight"] + p["generator.mlp1_bias"], 0)
    raw = hid @ p["generator.mlp2_weight"] + p["generator.mlp2_bias"]
    want = 0.5 / (1 + np.exp(-raw))
    with ad.no_record():
        got = edge_scores(gen, g).value
    assert np.max(np.abs(got - want)) < 1e-10


@pytest.mark.parametrize("s", [0.1, 0.5, 0.9])
def test_keep_rate_calibrated(s):
    n = 10_000
    with ad.no_record():
        keep = sample_mask(ad.Tensor(np.full((n, 1), s)), 0.5, seed=int(s * 100))
    assert abs(keep.value.mean() - (1 - s)) <= 4 * np.sqrt(s * (1 - s) / n)
    assert set(np.unique(keep.value)) <= {0.0, 1.0}


def test_low_temperature_is_bernoulli():
    n = 10_000
    with ad.no_record():
        keep = sample_mask(ad.Tensor(np.full((n, 1), 0.5)), 1e-3, seed=1, hard=False)
    assert abs(keep.value.mean() - 0.5) <= 4 * 0.5 / np.sqrt(n)


def test_tiny_drop_probability_keeps():
    with ad.no_record():
        keep = sample_mask(ad.Tensor(np.full((1000, 1), 1e-9)), 0.5, seed=0)
    assert keep.value.mean() == 1.0


def test_dropped_edge_contributes_nothing():
    g = make_graph(3, [(0, 1), (1, 2)], d=2, seed=0)
    view = NormalizedView(g, ad.Tensor(np.array([[0.0], [1.0]])))
    dense = view.matrix().to_dense()
    assert dense[0, 1] == 0 and dense[1, 0] == 0
    assert np.allclose(dense, dense_sym_norm(g, np.array([0.0, 1.0])), atol=1e-15)


def test_mask_gradient_with_fixed_noise():
    rng = np.random.default_rng(0)
    ps = ad.ParamStore()
    raw = ps.add("raw", rng.standard_normal((12, 1)))
    noise = logistic_noise((12, 1), 3)

    def build():
        s = ad.scale(ad.sigmoid(raw), 0.8)
        return ad.reduce_mean(sample_mask(s, 0.5, hard=False, noise=noise))

    assert ad.grad_check(build, ps) < 1e-4


def test_view_gradient_reaches_generator():
    g = random_graph(10, 0.4, d=4, seed=3)
    gen = ViewGenerator(4, 5, bounds=(0.0, 0.8), seed=1)
    w = np.random.default_rng(0).standard_normal((10, 4))
    with ad.record():
        view = generate_view(gen, g, seed=2)
        out = ad.spmm(view.norm.struct, ad.Tensor(g.features), view.norm.values)
        loss = ad.reduce_sum(ad.mul(out, ad.Tensor(w)))
    ad.backward(loss)
    for name, t in gen.params.items():
        assert t.grad is not None and np.any(t.grad != 0), name


def test_masked_adjacency_symmetric_and_rate():
    g = random_graph(20, 0.3, seed=4)
    gen = ViewGenerator(3, 4, bounds=(0.0, 0.6), seed=0)
    with ad.no_record():
        view = generate_view(gen, g, seed=5)
    a = view.adj.to_dense()
    assert np.array_equal(a, a.T)
    assert a.sum() / 2 == view.mask.value.sum()
    assert edge_preserve_rate(view.mask) == pytest.approx(view.mask.value.mean())


def test_sampling_deterministic():
    g = random_graph(12, 0.4, seed=6)
    gen = ViewGenerator(3, 4, seed=0)
    with ad.no_record():
        a = generate_view(gen, g, seed=9).mask.value
        b = generate_view(gen, g, seed=9).mask.value
    assert np.array_equal(a, b)


def test_invalid_bounds():
    with pytest.raises(ValueError):
        ViewGenerator(3, 4, bounds=(0.5, 0.2))
    with pytest.raises(ValueError):
        ViewGenerator(3, 4, temperature=0.0)
