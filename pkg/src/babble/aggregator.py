"""Aggregate labeling-function votes into probabilistic labels.

The generative model places two factors on every (function i, example j)
pair: a labeling-propensity factor (did the function vote?) and an accuracy
factor (did it agree with the latent label y_j?). With weights w in R^{2m},

    p_w(L, Y) = Z_w^{-1} exp( sum_j w . phi_j(L, Y) )

The factors make columns independent and, within a column, rows independent
given y_j, so the log marginal likelihood of an observed vote matrix L is
closed-form:

    log sum_Y p_w(L, Y)
        = sum_j logsumexp_y( sum_i w_lab[i] 1{L_ij != 0} + w_acc[i] 1{L_ij = y} )
          - n * [ log 2 + sum_i logsumexp(0, w_lab[i], w_lab[i] + w_acc[i]) ]

Training minimizes the negative log marginal likelihood. The exact path
uses the closed-form gradient (difference of clamped and free factor
expectations); the gibbs path estimates both expectations by sampling,
matching the classic stochastic recipe. Marginals p(y_j = +1 | L) are exact
or Gibbs-estimated; a majority-vote baseline is included for comparison.

Two identifiability facts shape the trainer:

- The point w_acc = 0 (with w_lab matched to observed propensities) is an
  exact stationary point, so gradient descent started at w = 0 never moves
  the accuracy weights. They start at a positive prior value instead
  (default 1.0, "functions beat chance").
- The latent labels' sign is not identified by the votes alone: the
  reparameterization (w_lab + w_acc, -w_acc) yields the identical vote
  likelihood with all marginals flipped. After fitting, the mode whose
  mean accuracy weight is non-negative is selected, anchoring the latent
  sign to what the authored polarities assert.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .corpus import Example
from .execution import EvalContext, execute_on_context
from .filterbank import CandidateLF

__all__ = [
    "LabelMatrix",
    "GenerativeWeights",
    "Marginals",
    "GenerativeConfig",
    "GibbsConfig",
    "AggregatorError",
    "build_label_matrix",
    "log_marginal_likelihood",
    "neg_log_ml_grad",
    "fit_generative",
    "exact_marginals",
    "gibbs_marginals",
    "majority_vote",
    "sample_planted_matrix",
]


class AggregatorError(Exception):
    pass


@dataclass(frozen=True)
class LabelMatrix:
    """m x n matrix of votes in {-1, 0, +1}; rows are labeling functions."""

    data: np.ndarray
    lf_ids: tuple[str, ...]
    example_ids: tuple[str, ...]

    def __post_init__(self) -> None:
        d = np.asarray(self.data, dtype=np.int8)
        object.__setattr__(self, "data", d)
        if d.ndim != 2:
            raise AggregatorError("label matrix must be 2-D")
        m, n = d.shape
        if self.lf_ids and len(self.lf_ids) != m:
            raise AggregatorError("row ids do not match matrix height")
        if self.example_ids and len(self.example_ids) != n:
            raise AggregatorError("column ids do not match matrix width")
        if not np.isin(d, (-1, 0, 1)).all():
            raise AggregatorError("label matrix entries must be -1, 0, or +1")

    @property
    def m(self) -> int:
        return self.data.shape[0]

    @property
    def n(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class GenerativeWeights:
    w_lab: np.ndarray
    w_acc: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "w_lab", np.asarray(self.w_lab, dtype=float))
        object.__setattr__(self, "w_acc", np.asarray(self.w_acc, dtype=float))
        if self.w_lab.shape != self.w_acc.shape or self.w_lab.ndim != 1:
            raise AggregatorError("weight vectors must be 1-D and the same length")
        if not (np.isfinite(self.w_lab).all() and np.isfinite(self.w_acc).all()):
            raise AggregatorError("weights must be finite")


@dataclass(frozen=True)
class Marginals:
    p: np.ndarray
    example_ids: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        p = np.asarray(self.p, dtype=float)
        object.__setattr__(self, "p", p)
        if p.ndim != 1 or ((p < 0) | (p > 1)).any():
            raise AggregatorError("marginals must be probabilities")


def build_label_matrix(lfs: Sequence[CandidateLF], pool: Sequence[Example]) -> LabelMatrix:
    """Execute every function on every pool example."""
    if not lfs:
        raise AggregatorError("no labeling functions to aggregate")
    if not pool:
        raise AggregatorError("empty pool: nothing to label")
    contexts = [EvalContext.from_example(ex) for ex in pool]
    data = np.zeros((len(lfs), len(pool)), dtype=np.int8)
    for i, cand in enumerate(lfs):
        for j, ctx in enumerate(contexts):
            data[i, j] = execute_on_context(cand.lf, ctx)
    return LabelMatrix(data, tuple(c.lf_id for c in lfs), tuple(ex.id for ex in pool))


def _column_scores(w: GenerativeWeights, L: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """log s_j(y) for y = +1 and y = -1 (per column)."""
    nonzero = L != 0
    lab = w.w_lab @ nonzero
    pos = w.w_acc @ (L == 1)
    neg = w.w_acc @ (L == -1)
    return lab + pos, lab + neg


def _log_z_per_column(w: GenerativeWeights) -> float:
    # per (i) three vote states: 0, vote-disagree, vote-agree
    stacked = np.stack([np.zeros_like(w.w_lab), w.w_lab, w.w_lab + w.w_acc])
    from scipy.special import logsumexp

    return float(np.log(2.0) + logsumexp(stacked, axis=0).sum())


def log_marginal_likelihood(w: GenerativeWeights, L: LabelMatrix) -> float:
    """log sum_Y p_w(L, Y), exact."""
    if w.w_lab.shape[0] != L.m:
        raise AggregatorError("weight length does not match matrix height")
    s_pos, s_neg = _column_scores(w, L.data)
    col = np.logaddexp(s_pos, s_neg)
    return float(col.sum() - L.n * _log_z_per_column(w))


def exact_marginals(w: GenerativeWeights, L: LabelMatrix) -> Marginals:
    """p(y_j = +1 | L) in closed form."""
    if w.w_lab.shape[0] != L.m:
        raise AggregatorError("weight length does not match matrix height")
    s_pos, s_neg = _column_scores(w, L.data)
    from scipy.special import expit

    return Marginals(expit(s_pos - s_neg), L.example_ids)


def majority_vote(L: LabelMatrix) -> Marginals:
    """1.0 when positive votes outnumber negative, 0.0 when fewer, 0.5 on
    ties (including all-abstain columns)."""
    pos = (L.data == 1).sum(axis=0)
    neg = (L.data == -1).sum(axis=0)
    p = np.where(pos > neg, 1.0, np.where(pos < neg, 0.0, 0.5))
    return Marginals(p.astype(float), L.example_ids)


def neg_log_ml_grad(
    w: GenerativeWeights, L: LabelMatrix, l2: float = 0.0
) -> tuple[float, np.ndarray, np.ndarray]:
    """Negative log marginal likelihood and its exact gradient.

    Gradient = free-phase expectation minus clamped-phase expectation of the
    factor counts (per weight), plus the L2 term.
    """
    data = L.data
    n = L.n
    from scipy.special import expit

    s_pos, s_neg = _column_scores(w, data)
    p = expit(s_pos - s_neg)  # p(y_j = +1 | L)

    # clamped phase: E_{Y|L}[factor counts]
    clamped_lab = (data != 0).sum(axis=1).astype(float)
    clamped_acc = ((data == 1) * p).sum(axis=1) + ((data == -1) * (1.0 - p)).sum(axis=1)

    # free phase: closed-form per-cell expectations, identical across columns
    stacked = np.stack([np.zeros_like(w.w_lab), w.w_lab, w.w_lab + w.w_acc])
    mx = stacked.max(axis=0)
    z = np.exp(stacked - mx).sum(axis=0)
    e_vote = (np.exp(w.w_lab - mx) + np.exp(w.w_lab + w.w_acc - mx)) / z
    e_agree = np.exp(w.w_lab + w.w_acc - mx) / z

    g_lab = n * e_vote - clamped_lab + 2.0 * l2 * w.w_lab
    g_acc = n * e_agree - clamped_acc + 2.0 * l2 * w.w_acc
    obj = -log_marginal_likelihood(w, L) + l2 * float(w.w_lab @ w.w_lab + w.w_acc @ w.w_acc)
    return obj, g_lab, g_acc


@dataclass(frozen=True)
class GenerativeConfig:
    lr: float = 0.3
    epochs: int = 300
    seed: int = 0
    gradient_mode: str = "exact"  # exact | gibbs
    init_acc: float = 1.0
    l2: float = 0.0
    batch_size: int | None = None  # exact mode only; None = full batch
    gibbs_samples: int = 500
    gibbs_burn_in: int = 50

    def __post_init__(self) -> None:
        if self.lr <= 0:
            raise AggregatorError("lr must be positive")
        if self.epochs <= 0:
            raise AggregatorError("epochs must be positive")
        if self.gradient_mode not in ("exact", "gibbs"):
            raise AggregatorError("gradient_mode must be exact or gibbs")


def _gibbs_grad(
    w: GenerativeWeights, L: LabelMatrix, rng: np.random.Generator, cfg: GenerativeConfig
) -> tuple[np.ndarray, np.ndarray]:
    """Sampled gradient estimate: clamped phase draws Y | L; free phase draws
    (L', Y) from the joint by alternating conditionals."""
    data = L.data
    m, n = data.shape
    from scipy.special import expit

    s_pos, s_neg = _column_scores(w, data)
    p = expit(s_pos - s_neg)

    total = cfg.gibbs_burn_in + cfg.gibbs_samples
    # clamped: y_j are conditionally independent given L
    clamped_lab = (data != 0).sum(axis=1).astype(float)
    acc_sum = np.zeros(m)
    kept = 0
    y = np.where(rng.random(n) < p, 1, -1)
    for sweep in range(total):
        y = np.where(rng.random(n) < p, 1, -1)
        if sweep >= cfg.gibbs_burn_in:
            acc_sum += ((data == y).astype(float)).sum(axis=1)
            kept += 1
    clamped_acc = acc_sum / kept

    # free: alternate L' | Y and Y | L'
    e_lab = np.zeros(m)
    e_acc = np.zeros(m)
    kept = 0
    y = np.where(rng.random(n) < 0.5, 1, -1)
    w_lab = w.w_lab[:, None]
    w_acc = w.w_acc[:, None]
    for sweep in range(total):
        # sample each vote from {0, agree, disagree} given y
        logits = np.stack(
            [np.zeros((m, n)), np.broadcast_to(w_lab + w_acc, (m, n)), np.broadcast_to(w_lab, (m, n))]
        )
        mx = logits.max(axis=0)
        probs = np.exp(logits - mx)
        probs /= probs.sum(axis=0)
        u = rng.random((m, n))
        pick_agree = u < probs[1]
        pick_dis = (~pick_agree) & (u < probs[1] + probs[2])
        votes = np.where(pick_agree, y[None, :], np.where(pick_dis, -y[None, :], 0)).astype(np.int8)
        # resample y given votes
        sp, sn = _column_scores(w, votes)
        y = np.where(rng.random(n) < expit(sp - sn), 1, -1)
        if sweep >= cfg.gibbs_burn_in:
            e_lab += (votes != 0).sum(axis=1)
            e_acc += (votes == y).sum(axis=1)
            kept += 1
    e_lab /= kept
    e_acc /= kept

    g_lab = e_lab - clamped_lab + 2.0 * cfg.l2 * w.w_lab
    g_acc = e_acc - clamped_acc + 2.0 * cfg.l2 * w.w_acc
    return g_lab, g_acc


def fit_generative(L: LabelMatrix, config: GenerativeConfig | None = None) -> GenerativeWeights:
    """Gradient descent on the negative log marginal likelihood.

    Exact mode is deterministic full-batch descent with step halving on any
    objective increase (optionally minibatch SGD via ``batch_size``); gibbs
    mode estimates the gradient by sampling both phases. Deterministic for a
    fixed (config, L)."""
    cfg = config or GenerativeConfig()
    if L.m < 1 or L.n < 1:
        raise AggregatorError("label matrix must be at least 1 x 1")
    rng = np.random.default_rng(cfg.seed)
    w = GenerativeWeights(np.zeros(L.m), np.full(L.m, float(cfg.init_acc)))
    lr = cfg.lr

    def objective(weights: GenerativeWeights) -> float:
        return -log_marginal_likelihood(weights, L) + cfg.l2 * float(
            weights.w_lab @ weights.w_lab + weights.w_acc @ weights.w_acc
        )

    if cfg.gradient_mode == "exact" and cfg.batch_size:
        # minibatch SGD over columns (parity option; no monotonicity guarantee)
        cols = np.arange(L.n)
        for _ in range(cfg.epochs):
            rng.shuffle(cols)
            for start in range(0, L.n, cfg.batch_size):
                batch = cols[start : start + cfg.batch_size]
                sub = LabelMatrix(L.data[:, batch], L.lf_ids, tuple(L.example_ids[j] for j in batch))
                _, g_lab, g_acc = neg_log_ml_grad(w, sub, cfg.l2)
                scale = L.n / len(batch)
                w = GenerativeWeights(
                    w.w_lab - lr * g_lab * scale / L.n, w.w_acc - lr * g_acc * scale / L.n
                )
        return _orient(w)

    current = objective(w)
    for _ in range(cfg.epochs):
        if cfg.gradient_mode == "exact":
            _, g_lab, g_acc = neg_log_ml_grad(w, L, cfg.l2)
        else:
            g_lab, g_acc = _gibbs_grad(w, L, rng, cfg)
        stepped = False
        for _ in range(30):
            trial = GenerativeWeights(w.w_lab - lr * g_lab / L.n, w.w_acc - lr * g_acc / L.n)
            trial_obj = objective(trial)
            if trial_obj <= current + 1e-12:
                w, current = trial, trial_obj
                stepped = True
                break
            lr *= 0.5
        if not stepped:
            break
    return _orient(w)


def _orient(w: GenerativeWeights) -> GenerativeWeights:
    """Pick the likelihood-equivalent mode that trusts the authored
    polarities: (w_lab + w_acc, -w_acc) reproduces the same vote
    distribution with the latent labels flipped."""
    if w.w_acc.sum() < 0:
        return GenerativeWeights(w.w_lab + w.w_acc, -w.w_acc)
    return w


@dataclass(frozen=True)
class GibbsConfig:
    samples: int = 20_000
    burn_in: int = 1_000
    seed: int = 0

    def __post_init__(self) -> None:
        if self.samples < 1:
            raise AggregatorError("samples must be >= 1")


def gibbs_marginals(w: GenerativeWeights, L: LabelMatrix, config: GibbsConfig | None = None) -> Marginals:
    """Monte-Carlo estimate of the exact marginals; deterministic per seed."""
    cfg = config or GibbsConfig()
    rng = np.random.default_rng(cfg.seed)
    from scipy.special import expit

    s_pos, s_neg = _column_scores(w, L.data)
    p = expit(s_pos - s_neg)
    counts = np.zeros(L.n)
    for sweep in range(cfg.burn_in + cfg.samples):
        y = rng.random(L.n) < p
        if sweep >= cfg.burn_in:
            counts += y
    return Marginals(counts / cfg.samples, L.example_ids)


def sample_planted_matrix(
    accuracies: Sequence[float],
    propensities: Sequence[float],
    n: int,
    seed: int,
) -> tuple[LabelMatrix, np.ndarray]:
    """Draw a vote matrix from the generative story: y uniform, each function
    votes with its propensity and is correct with its accuracy. Returns the
    matrix and the true labels."""
    rng = np.random.default_rng(seed)
    m = len(accuracies)
    y = np.where(rng.random(n) < 0.5, 1, -1)
    data = np.zeros((m, n), dtype=np.int8)
    for i, (acc, beta) in enumerate(zip(accuracies, propensities)):
        votes = rng.random(n) < beta
        correct = rng.random(n) < acc
        data[i] = np.where(votes, np.where(correct, y, -y), 0)
    ids = tuple(f"lf{i}" for i in range(m))
    ex_ids = tuple(f"ex{j}" for j in range(n))
    return LabelMatrix(data, ids, ex_ids), y
