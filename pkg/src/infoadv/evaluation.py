"""Downstream protocols: linear probe, Mean Classifier, link prediction, GCL-GE."""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize
from scipy.special import expit, log_softmax, logsumexp

from .graph import LinkSplit

PENALTY_GRID = (1e-4, 1e-3, 1e-2, 1e-1, 1.0, 1e1, 1e2)


@dataclass
class EvalReport:
    """Per-seed metric values with their mean and (population) standard deviation."""

    task: str
    values: dict[str, list[float]] = field(default_factory=dict)
    seeds: list[int] = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    def add(self, seed: int, **metrics: float) -> None:
        self.seeds.append(int(seed))
        for k, v in metrics.items():
            self.values.setdefault(k, []).append(float(v))

    def mean(self, metric: str) -> float:
        return float(np.mean(self.values[metric]))

    def std(self, metric: str) -> float:
        return float(np.std(self.values[metric]))

    def to_dict(self) -> dict:
        return {
            "task": self.task,
            "seeds": self.seeds,
            "metrics": {
                k: {"per_seed": v, "mean": self.mean(k), "std": self.std(k)} for k, v in self.values.items()
            },
            **self.extra,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def csv_rows(self, dataset: str, variant: str) -> list[list]:
        names = sorted(self.values)
        rows = [["dataset", "variant", "seed", *names]]
        for i, s in enumerate(self.seeds):
            rows.append([dataset, variant, s, *(repr(self.values[k][i]) for k in names)])
        return rows


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------


def f1_micro(y_true, y_pred) -> float:
    """Micro-averaged F1 from pooled per-class counts."""
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    classes = np.union1d(y_true, y_pred)
    tp = fp = fn = 0
    for c in classes:
        tp += int(np.sum((y_pred == c) & (y_true == c)))
        fp += int(np.sum((y_pred == c) & (y_true != c)))
        fn += int(np.sum((y_pred != c) & (y_true == c)))
    denom = 2 * tp + fp + fn
    return 2 * tp / denom if denom else 0.0


def auc_score(pos_scores, neg_scores) -> float:
    """P(random positive outscores random negative), ties counted as one half (rank formula)."""
    pos = np.asarray(pos_scores, dtype=np.float64).ravel()
    neg = np.asarray(neg_scores, dtype=np.float64).ravel()
    if len(pos) == 0 or len(neg) == 0:
        raise ValueError("AUC needs at least one positive and one negative")
    allv = np.concatenate([pos, neg])
    order = np.argsort(allv, kind="mergesort")
    ranks = np.empty(len(allv))
    sorted_v = allv[order]
    # average 1-based ranks over tied groups
    starts = np.flatnonzero(np.r_[True, sorted_v[1:] != sorted_v[:-1]])
    ends = np.r_[starts[1:], len(allv)]
    for s, e in zip(starts, ends):
        ranks[order[s:e]] = 0.5 * (s + 1 + e)
    r_pos = ranks[: len(pos)].sum()
    return float((r_pos - len(pos) * (len(pos) + 1) / 2) / (len(pos) * len(neg)))


def average_precision(pos_scores, neg_scores) -> float:
    """Step-interpolated area under precision-recall: sum over thresholds of (dR) * P."""
    pos = np.asarray(pos_scores, dtype=np.float64).ravel()
    neg = np.asarray(neg_scores, dtype=np.float64).ravel()
    if len(pos) == 0 or len(neg) == 0:
        raise ValueError("AP needs at least one positive and one negative")
    scores = np.concatenate([pos, neg])
    y = np.concatenate([np.ones(len(pos)), np.zeros(len(neg))])
    order = np.argsort(-scores, kind="mergesort")
    scores, y = scores[order], y[order]
    # last index of every distinct-score block
    last = np.r_[np.flatnonzero(scores[1:] != scores[:-1]), len(scores) - 1]
    tp = np.cumsum(y)[last]
    seen = last + 1
    precision = tp / seen
    recall = tp / len(pos)
    d_recall = np.diff(np.r_[0.0, recall])
    return float(np.sum(d_recall * precision))


# ---------------------------------------------------------------------------
# Logistic regression probe
# ---------------------------------------------------------------------------


def _fit_logreg(x, y, n_classes, penalty, steps=500, lr=0.1, optimizer="gd"):
    """Multinomial logistic regression with an L2 penalty on the weights (bias unpenalized)."""
    n, d = x.shape
    onehot = np.eye(n_classes)[y]

    def objective(theta):
        w = theta[: d * n_classes].reshape(d, n_classes)
        b = theta[d * n_classes :]
        logp = log_softmax(x @ w + b, axis=1)
        loss = -np.sum(onehot * logp) / n + 0.5 * penalty * np.sum(w * w)
        diff = (np.exp(logp) - onehot) / n
        gw = x.T @ diff + penalty * w
        return loss, np.concatenate([gw.ravel(), diff.sum(axis=0)])

    theta = np.zeros(d * n_classes + n_classes)
    if optimizer == "gd":
        # cap the step at 1/L so large penalties stay stable
        smooth = 0.5 * (float(np.max(np.sum(x * x, axis=1), initial=0.0)) + 1.0) + penalty
        lr = min(lr, 1.0 / smooth)
        for _ in range(steps):
            theta -= lr * objective(theta)[1]
    elif optimizer == "lbfgs":
        theta = minimize(objective, theta, jac=True, method="L-BFGS-B", options={"maxiter": steps}).x
    else:
        raise ValueError(f"unknown optimizer {optimizer!r}")
    return theta[: d * n_classes].reshape(d, n_classes), theta[d * n_classes :]


def _predict(w, b, x):
    return np.argmax(x @ w + b, axis=1)


def _prep(emb):
    emb = np.asarray(emb, dtype=np.float64)
    norm = np.linalg.norm(emb, axis=1, keepdims=True)
    return emb / np.maximum(norm, 1e-12)


def probe_split(labels, train_fraction, seed):
    """Random train/test node split; re-drawn stratified if a class is missing from train."""
    labels = np.asarray(labels)
    n = len(labels)
    classes = np.unique(labels)
    rng = np.random.default_rng(seed)
    n_train = max(len(classes), int(round(train_fraction * n)))
    perm = rng.permutation(n)
    train = np.sort(perm[:n_train])
    if len(np.unique(labels[train])) < len(classes):
        picks = []
        for c in classes:
            idx = rng.permutation(np.flatnonzero(labels == c))
            picks.append(idx[: max(1, int(round(train_fraction * len(idx))))])
        train = np.sort(np.concatenate(picks))
    test = np.setdiff1d(np.arange(n), train)
    return train, test


def linear_probe(embeddings, labels, train_fraction=0.10, seed=0, folds=5,
                 grid=PENALTY_GRID, optimizer="gd", return_details=False):
    """F1-micro of an L2-regularized multinomial logistic regression on frozen embeddings.

    Rows are L2-normalized. The default optimizer is 500 full-batch gradient
    steps of size 0.1 from zero; ``optimizer="lbfgs"`` runs L-BFGS instead.
    The step is capped at the inverse smoothness constant so large penalties
    stay stable. The penalty is picked by ``folds``-fold cross validation
    inside the training split, then the model is refit on the whole training
    split and scored on the remaining nodes.
    """
    x = _prep(embeddings)
    labels = np.asarray(labels, dtype=np.int64)
    k = int(labels.max()) + 1
    train, test = probe_split(labels, train_fraction, seed)
    rng = np.random.default_rng([int(seed), 1])
    fold_of = rng.permutation(len(train)) % folds
    best, best_acc = grid[0], -1.0
    for pen in grid:
        accs = []
        for f in range(folds):
            tr, va = train[fold_of != f], train[fold_of == f]
            if len(va) == 0 or len(tr) == 0:
                continue
            w, b = _fit_logreg(x[tr], labels[tr], k, pen, optimizer=optimizer)
            accs.append(np.mean(_predict(w, b, x[va]) == labels[va]))
        acc = float(np.mean(accs)) if accs else 0.0
        if acc > best_acc:
            best, best_acc = pen, acc
    w, b = _fit_logreg(x[train], labels[train], k, best, optimizer=optimizer)
    score = f1_micro(labels[test], _predict(w, b, x[test]))
    if return_details:
        return score, {"penalty": best, "cv_accuracy": best_acc, "n_train": len(train)}
    return score


# ---------------------------------------------------------------------------
# Mean Classifier
# ---------------------------------------------------------------------------


class MeanClassifier:
    """Class-mean rows ``mu_k``; predicts by inner product (default) or Euclidean distance."""

    def __init__(self, embeddings, labels, train_mask, rule: str = "inner", num_classes: int | None = None):
        if rule not in ("inner", "euclidean"):
            raise ValueError(f"unknown rule {rule!r}")
        emb = np.asarray(embeddings, dtype=np.float64)
        labels = np.asarray(labels, dtype=np.int64)
        mask = np.asarray(train_mask)
        if mask.dtype != bool:
            m = np.zeros(len(labels), dtype=bool)
            m[mask] = True
            mask = m
        k = num_classes or int(labels.max()) + 1
        means = np.zeros((k, emb.shape[1]))
        for c in range(k):
            rows = emb[mask & (labels == c)]
            if len(rows) == 0:
                raise ValueError(f"class {c} has no training nodes")
            means[c] = rows.mean(axis=0)
        self.means = means
        self.rule = rule

    def logits(self, emb) -> np.ndarray:
        emb = np.asarray(emb, dtype=np.float64)
        if self.rule == "inner":
            return emb @ self.means.T
        d2 = (emb * emb).sum(1, keepdims=True) - 2 * emb @ self.means.T + (self.means**2).sum(1)
        return -d2

    def predict(self, emb) -> np.ndarray:
        return np.argmax(self.logits(emb), axis=1)

    def loss(self, emb, labels) -> float:
        """Mean cross-entropy of the softmax over the logits."""
        z = self.logits(emb)
        labels = np.asarray(labels, dtype=np.int64)
        return float(np.mean(logsumexp(z, axis=1) - z[np.arange(len(labels)), labels]))


def mean_classifier_eval(embeddings, labels, train_mask, rule: str = "inner") -> float:
    clf = MeanClassifier(embeddings, labels, train_mask, rule)
    mask = np.zeros(len(labels), dtype=bool)
    mask[np.asarray(train_mask)] = True
    test = ~mask
    return f1_micro(np.asarray(labels)[test], clf.predict(np.asarray(embeddings)[test]))


# ---------------------------------------------------------------------------
# Link prediction and GCL-GE
# ---------------------------------------------------------------------------


def link_scores(embeddings, pairs) -> np.ndarray:
    z = np.asarray(embeddings, dtype=np.float64)
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    return expit(np.einsum("ij,ij->i", z[pairs[:, 0]], z[pairs[:, 1]]))


def link_predict_eval(embeddings, split: LinkSplit, which: str = "test") -> tuple[float, float]:
    """(AUC, AP) of inner-product link scores on the test (or val) pairs."""
    pos = split.test_edges if which == "test" else split.val_edges
    neg = split.test_negatives if which == "test" else split.val_negatives
    if len(pos) == 0 or len(neg) == 0:
        raise ValueError("link evaluation needs non-empty positive and negative sets")
    ps, ns = link_scores(embeddings, pos), link_scores(embeddings, neg)
    return auc_score(ps, ns), average_precision(ps, ns)


def gcl_ge(pretext_losses, downstream_losses) -> np.ndarray:
    """|L_T(e)/L_T(1) - L_P(e)/L_P(1)| per epoch."""
    lp = np.asarray(pretext_losses, dtype=np.float64)
    lt = np.asarray(downstream_losses, dtype=np.float64)
    if lp.size == 0 or lt.size == 0 or lp.shape != lt.shape:
        raise ValueError("loss series must be non-empty and of equal length")
    if lp[0] == 0 or lt[0] == 0:
        raise ValueError("first-epoch losses must be non-zero")
    return np.abs(lt / lt[0] - lp / lp[0])
