"""Noise-aware linear classifier trained on probabilistic labels.

Features are binary token n-grams around the entity pair: 1/2/3-grams over
the span between the entities, a 3-token window left of the earlier span
and right of the later span, and entity-tag n-grams over the between span.
Windows are padded with boundary markers so adjacent entities still emit
features. Precomputed opaque features attached to an example (for corpora
shipping e.g. dependency-path strings) pass through under their own
namespace.

Training minimizes the expected logistic loss under the probabilistic
labels:  sum_j [ p_j l(+1, s_j) + (1 - p_j) l(-1, s_j) ] + l2 ||w||^2,
whose gradient per example is sigma(s_j) - p_j. Full-batch gradient descent
with step halving keeps the objective non-increasing.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
from scipy import sparse
from scipy.special import expit

from .corpus import Example

__all__ = [
    "LinearModel",
    "TrainConfig",
    "PRF",
    "DiscriminativeError",
    "extract_features",
    "train_noise_aware",
    "predict",
    "predict_score",
    "evaluate",
]

_BOUNDARY_L = "<s>"
_BOUNDARY_R = "</s>"
_CONTEXT_K = 3


class DiscriminativeError(Exception):
    pass


def _ngrams(tokens: Sequence[str], nmax: int = 3) -> list[str]:
    padded = [_BOUNDARY_L] + list(tokens) + [_BOUNDARY_R]
    out = []
    for n in range(1, nmax + 1):
        for i in range(len(padded) - n + 1):
            out.append(" ".join(padded[i : i + n]))
    return out


def extract_features(example: Example) -> dict[str, float]:
    """Binary features keyed by namespaced n-grams; deterministic."""
    lo = [t.lower() for t in example.tokens]
    first, second = sorted([example.span_x, example.span_y])
    between = lo[first[1] : second[0]]
    left_ctx = lo[max(0, first[0] - _CONTEXT_K) : first[0]]
    right_ctx = lo[second[1] : second[1] + _CONTEXT_K]
    tags = example.entity_tags[first[1] : second[0]]

    feats: dict[str, float] = {}
    for g in _ngrams(between):
        feats[f"between:{g}"] = 1.0
    for g in _ngrams(left_ctx):
        feats[f"left_x:{g}"] = 1.0
    for g in _ngrams(right_ctx):
        feats[f"right_y:{g}"] = 1.0
    for g in _ngrams(tags):
        feats[f"tags:{g}"] = 1.0
    for extra in example.features:
        feats[f"extra:{extra}"] = 1.0
    return feats


@dataclass(frozen=True)
class LinearModel:
    weights: Mapping[str, float]
    bias: float = 0.0
    threshold: float = 0.5

    def __post_init__(self) -> None:
        if not all(math.isfinite(v) for v in self.weights.values()) or not math.isfinite(self.bias):
            raise DiscriminativeError("model weights must be finite")

    def score(self, feats: Mapping[str, float]) -> float:
        return self.bias + sum(self.weights.get(f, 0.0) * v for f, v in feats.items())

    def to_json(self) -> dict:
        return {
            "weights": dict(sorted(self.weights.items())),
            "bias": self.bias,
            "threshold": self.threshold,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "LinearModel":
        return cls(dict(obj["weights"]), float(obj["bias"]), float(obj.get("threshold", 0.5)))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), sort_keys=True), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "LinearModel":
        return cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 0.5
    epochs: int = 300
    l2: float = 1e-4
    seed: int = 0
    subsample: float = 0.0  # down-weighting of negative-leaning examples
    threshold: float = 0.5

    def __post_init__(self) -> None:
        if self.lr <= 0 or self.epochs <= 0:
            raise DiscriminativeError("lr and epochs must be positive")
        if not 0.0 <= self.subsample < 1.0:
            raise DiscriminativeError("subsample must be in [0, 1)")


def _vectorize(
    feature_dicts: Sequence[Mapping[str, float]],
) -> tuple[sparse.csr_matrix, list[str]]:
    vocab: dict[str, int] = {}
    rows, cols, vals = [], [], []
    for j, feats in enumerate(feature_dicts):
        for name in sorted(feats):
            idx = vocab.setdefault(name, len(vocab))
            rows.append(j)
            cols.append(idx)
            vals.append(feats[name])
    X = sparse.csr_matrix(
        (vals, (rows, cols)), shape=(len(feature_dicts), max(len(vocab), 1)), dtype=float
    )
    names = [None] * len(vocab)
    for name, idx in vocab.items():
        names[idx] = name
    return X, names


def loss_and_grad(
    X: sparse.csr_matrix,
    p: np.ndarray,
    w: np.ndarray,
    b: float,
    l2: float,
    ex_weights: np.ndarray,
) -> tuple[float, np.ndarray, float]:
    """Expected logistic loss under soft labels, with its gradient.

    loss = mean_j weight_j * [p_j*softplus(-s_j) + (1-p_j)*softplus(s_j)]
           + l2*||w||^2, where s = Xw + b; d loss/d s_j = sigma(s_j) - p_j.
    """
    wsum = ex_weights.sum()
    s = X @ w + b
    loss = p * np.logaddexp(0.0, -s) + (1.0 - p) * np.logaddexp(0.0, s)
    obj = float((ex_weights * loss).sum() / wsum + l2 * (w @ w))
    resid = ex_weights * (expit(s) - p) / wsum
    g_w = X.T @ resid + 2.0 * l2 * w
    g_b = float(resid.sum())
    return obj, np.asarray(g_w).ravel(), g_b


def train_noise_aware(
    feature_dicts: Sequence[Mapping[str, float]],
    marginals: Sequence[float],
    config: TrainConfig | None = None,
) -> LinearModel:
    """Fit the linear model to soft targets; deterministic per config."""
    cfg = config or TrainConfig()
    if len(feature_dicts) == 0:
        raise DiscriminativeError("empty training set")
    p = np.asarray(marginals, dtype=float)
    if p.shape[0] != len(feature_dicts):
        raise DiscriminativeError("marginals length does not match feature rows")

    X, names = _vectorize(feature_dicts)
    n = X.shape[0]
    weights_ex = np.ones(n)
    if cfg.subsample > 0:
        weights_ex = np.where(p < 0.5, 1.0 - cfg.subsample, 1.0)

    w = np.zeros(X.shape[1])
    b = 0.0
    lr = cfg.lr
    current, g_w, g_b = loss_and_grad(X, p, w, b, cfg.l2, weights_ex)
    for _ in range(cfg.epochs):
        stepped = False
        for _ in range(30):
            w_try = w - lr * g_w
            b_try = b - lr * g_b
            obj_try, gw_try, gb_try = loss_and_grad(X, p, w_try, b_try, cfg.l2, weights_ex)
            if obj_try <= current + 1e-12:
                w, b, current, g_w, g_b = w_try, b_try, obj_try, gw_try, gb_try
                stepped = True
                break
            lr *= 0.5
        if not stepped:
            break

    weight_map = {name: float(v) for name, v in zip(names, w) if v != 0.0}
    return LinearModel(weight_map, float(b), cfg.threshold)


def predict_score(model: LinearModel, example: Example) -> float:
    return model.score(extract_features(example))


def predict(model: LinearModel, example: Example) -> float:
    """Probability of the positive class."""
    return float(expit(predict_score(model, example)))


@dataclass(frozen=True)
class PRF:
    precision: float
    recall: float
    f1: float
    tp: int = 0
    fp: int = 0
    fn: int = 0

    def to_dict(self) -> dict:
        return {
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "tp": self.tp,
            "fp": self.fp,
            "fn": self.fn,
        }


def _prf_from_counts(tp: int, fp: int, fn: int) -> PRF:
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return PRF(precision, recall, f1, tp, fp, fn)


def evaluate(
    model_or_probs: LinearModel | Sequence[float],
    examples: Sequence[Example],
    threshold: float | None = None,
) -> PRF:
    """Positive-class precision/recall/F1 against gold labels.

    Accepts either a trained model (probabilities computed per example) or a
    precomputed probability sequence aligned with ``examples``. Predictions
    are positive strictly above the threshold, so an uninformative 0.5 is a
    negative call."""
    if len(examples) == 0:
        raise DiscriminativeError("empty evaluation set")
    if isinstance(model_or_probs, LinearModel):
        thr = model_or_probs.threshold if threshold is None else threshold
        probs = [predict(model_or_probs, ex) for ex in examples]
    else:
        thr = 0.5 if threshold is None else threshold
        probs = list(model_or_probs)
        if len(probs) != len(examples):
            raise DiscriminativeError("probability vector does not match example count")
    tp = fp = fn = 0
    for prob, ex in zip(probs, examples):
        if ex.gold_label is None:
            raise DiscriminativeError(f"example {ex.id} lacks gold_label")
        pred = 1 if prob > thr else -1
        if pred == 1 and ex.gold_label == 1:
            tp += 1
        elif pred == 1 and ex.gold_label == -1:
            fp += 1
        elif pred == -1 and ex.gold_label == 1:
            fn += 1
    return _prf_from_counts(tp, fp, fn)
