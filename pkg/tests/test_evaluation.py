import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from infoadv.evaluation import (EvalReport, MeanClassifier, auc_score, average_precision, f1_micro, gcl_ge,
                                link_predict_eval, linear_probe, mean_classifier_eval, probe_split)
from infoadv.graph import sbm_generate, split_links


def auc_brute(pos, neg):
    return np.mean([1.0 if p > n else 0.5 if p == n else 0.0 for p in pos for n in neg])


def ap_brute(pos, neg):
    """Precision at each distinct threshold weighted by the recall gained there."""
    scores = np.concatenate([pos, neg])
    y = np.r_[np.ones(len(pos)), np.zeros(len(neg))]
    total, prev_recall = 0.0, 0.0
    for t in sorted(set(scores), reverse=True):
        sel = scores >= t
        recall = y[sel].sum() / len(pos)
        total += (recall - prev_recall) * y[sel].sum() / sel.sum()
        prev_recall = recall
    return total


@pytest.mark.parametrize("seed", range(200))
def test_rank_metrics_match_brute_force(seed):
    rng = np.random.default_rng(seed)
    n_pos, n_neg = rng.integers(1, 100, size=2)
    # coarse rounding forces ties on some lists
    dec = int(rng.integers(1, 4))
    pos = np.round(rng.normal(0.5, 1, n_pos), dec)
    neg = np.round(rng.normal(0.0, 1, n_neg), dec)
    assert abs(auc_score(pos, neg) - auc_brute(pos, neg)) < 1e-12
    assert abs(average_precision(pos, neg) - ap_brute(pos, neg)) < 1e-12


def test_rank_metric_examples():
    assert auc_score([3, 2], [1, 0]) == 1.0 and average_precision([3, 2], [1, 0]) == 1.0
    assert auc_score([1, 1], [1, 1, 1]) == 0.5
    # ranked list +, -, +, -
    assert auc_score([4, 2], [3, 1]) == pytest.approx(0.75, abs=1e-15)
    assert average_precision([4, 2], [3, 1]) == pytest.approx(5 / 6, abs=1e-15)
    with pytest.raises(ValueError):
        auc_score([], [1])
    with pytest.raises(ValueError):
        average_precision([1], [])


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(0, 4), min_size=1, max_size=60), st.integers(0, 1000))
def test_f1_micro_equals_accuracy(y, seed):
    y = np.array(y)
    pred = np.random.default_rng(seed).integers(0, 5, len(y))
    assert abs(f1_micro(y, pred) - np.mean(y == pred)) < 1e-12
    perm = np.random.default_rng(seed).permutation(len(y))
    assert f1_micro(y[perm], pred[perm]) == f1_micro(y, pred)


def test_probe_separable_gives_perfect_score():
    rng = np.random.default_rng(0)
    y = np.repeat([0, 1], 100)
    x = np.where(y[:, None] == 0, 1.0, -1.0) * np.array([[3.0, 0.0]]) + 0.1 * rng.standard_normal((200, 2))
    assert linear_probe(x, y, seed=0) == 1.0


def test_probe_random_labels_near_chance():
    scores = []
    for s in range(5):
        rng = np.random.default_rng(s)
        scores.append(linear_probe(rng.standard_normal((600, 8)), rng.integers(0, 3, 600), seed=s))
    # 540 test nodes per run: the mean of 5 runs has std about 0.009
    assert abs(np.mean(scores) - 1 / 3) < 0.06


def test_probe_deterministic_and_lbfgs():
    g = sbm_generate([40, 40, 40], 0.1, 0.01, 8, 1.0, seed=0)
    a, det = linear_probe(g.features, g.labels, seed=3, return_details=True)
    assert a == linear_probe(g.features, g.labels, seed=3)
    assert det["n_train"] == 12 and det["penalty"] in (1e-4, 1e-3, 1e-2, 1e-1, 1.0, 1e1, 1e2)
    assert 0.0 <= linear_probe(g.features, g.labels, seed=3, optimizer="lbfgs") <= 1.0


def test_probe_split_stratifies_when_needed():
    labels = np.array([0] * 95 + [1] * 5)
    for seed in range(10):
        train, test = probe_split(labels, 0.1, seed)
        assert set(labels[train]) == {0, 1}
        assert len(np.intersect1d(train, test)) == 0 and len(train) + len(test) == 100


def _toy():
    emb = np.array([[1.0, 0.0], [3.0, 0.0], [0.0, 1.0], [0.0, 3.0],
                     [1.0, 0.4], [0.5, 0.6], [-1.0, 2.0], [2.0, 1.9]])
    labels = np.array([0, 0, 1, 1, 0, 1, 1, 1])
    return emb, labels, np.arange(4)


def test_mean_classifier_hand_oracle():
    emb, labels, train = _toy()
    clf = MeanClassifier(emb, labels, train)
    assert np.array_equal(clf.means, [[2.0, 0.0], [0.0, 2.0]])
    # inner products with (2,0) and (0,2): (2, .8), (1, 1.2), (-2, 4), (4, 3.8)
    assert np.array_equal(clf.predict(emb[4:]), [0, 1, 1, 0])
    assert mean_classifier_eval(emb, labels, train) == 0.75
    z = np.array([[2.0, 0.8], [1.0, 1.2], [-2.0, 4.0], [4.0, 3.8]])
    want = np.mean(np.log(np.exp(z).sum(1)) - z[np.arange(4), labels[4:]])
    assert abs(clf.loss(emb[4:], labels[4:]) - want) < 1e-12


def test_mean_classifier_point_at_mean_and_rules():
    emb = np.array([[4.0, 0.0], [0.0, 1.0], [4.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
    labels = np.array([0, 1, 0, 1, 1])
    train = np.array([True, True, False, False, False])
    inner = MeanClassifier(emb, labels, train)
    euc = MeanClassifier(emb, labels, train, rule="euclidean")
    assert np.array_equal(inner.predict(emb[2:4]), [0, 1])
    # (1,1): inner 4 vs 1 picks class 0, distance 10 vs 1 picks class 1
    assert inner.predict(emb[4:]) == [0] and euc.predict(emb[4:]) == [1]
    with pytest.raises(ValueError):
        MeanClassifier(emb, labels, train, rule="cosine")
    with pytest.raises(ValueError):
        MeanClassifier(emb, labels, np.array([0]))


def test_mean_classifier_separated_clusters():
    rng = np.random.default_rng(0)
    y = np.repeat([0, 1], 50)
    x = np.where(y[:, None] == 0, [5.0, 0.0], [0.0, 5.0]) + 0.3 * rng.standard_normal((100, 2))
    assert mean_classifier_eval(x, y, np.r_[0:5, 50:55]) == 1.0


def test_gcl_ge_definition():
    assert gcl_ge([2.0, 1.0], [3.0, 3.0]).tolist() == [0.0, 0.5]
    with pytest.raises(ValueError):
        gcl_ge([0.0, 1.0], [1.0, 1.0])
    with pytest.raises(ValueError):
        gcl_ge([1.0], [1.0, 2.0])


def test_link_eval_block_embedding():
    # every true edge is within a block; block-indicator embeddings tie all same-block pairs
    g = sbm_generate([30, 30], 0.3, 0.0, 4, 1.0, seed=0)
    split = split_links(g, seed=0)
    emb = np.where(g.labels[:, None] == 0, [3.0, -3.0], [-3.0, 3.0])
    auc, ap = link_predict_eval(emb, split)
    neg = split.test_negatives
    cross = np.mean(g.labels[neg[:, 0]] != g.labels[neg[:, 1]])
    assert abs(auc - (cross + 0.5 * (1 - cross))) < 1e-12
    assert ap > 0.5


def test_report_consistency():
    rep = EvalReport("node")
    for s, v in enumerate([0.5, 0.7, 0.9]):
        rep.add(s, f1_micro=v)
    doc = json.loads(rep.to_json())
    m = doc["metrics"]["f1_micro"]
    assert m["per_seed"] == [0.5, 0.7, 0.9]
    assert m["mean"] == pytest.approx(0.7) and m["std"] == pytest.approx(np.std([0.5, 0.7, 0.9]))
    rows = rep.csv_rows("toy", "infoadv")
    assert rows[0] == ["dataset", "variant", "seed", "f1_micro"] and len(rows) == 4
