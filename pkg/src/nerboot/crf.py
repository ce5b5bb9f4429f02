"""Linear-chain CRF: partition function, Viterbi, marginals, exact
gradients, and AdaGrad training.

A path through tags y_1..y_n is scored as

    score(y) = sum_i emit[i, y_i] + A[START, y_1]
             + sum_i A[y_i, y_{i+1}] + A[y_n, END]

where A is a (K+2) x (K+2) transition matrix whose last two states are the
distinguished START and END boundary states.  All dynamic programs run in
log space with max-subtraction, so arbitrary finite scores are safe.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .corpus import LabeledDataset, Sentence, WeakDataset
from .emissions import (
    EmbeddingScorer,
    EmissionMatrix,
    EmissionScorer,
    LinearFeatureScorer,
)
from .errors import DataError, NumericalError
from .tags import TagSequence, TagSet

_ADAGRAD_EPS = 1e-8


def _logsumexp(a: np.ndarray, axis: int) -> np.ndarray:
    m = a.max(axis=axis, keepdims=True)
    return (m + np.log(np.exp(a - m).sum(axis=axis, keepdims=True))).squeeze(axis)


@dataclass(frozen=True)
class TransitionModel:
    """Transition log-scores with START = K and END = K + 1.

    Rows with START as destination and END as source are never read.
    """

    matrix: np.ndarray  # (K+2, K+2)

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=np.float64)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 3:
            raise DataError(f"bad transition matrix shape {m.shape}")
        if not np.all(np.isfinite(m)):
            raise DataError("non-finite transition scores")
        object.__setattr__(self, "matrix", m)

    @classmethod
    def zeros(cls, num_tags: int) -> "TransitionModel":
        return cls(np.zeros((num_tags + 2, num_tags + 2)))

    @property
    def num_tags(self) -> int:
        return self.matrix.shape[0] - 2

    @property
    def start(self) -> int:
        return self.num_tags

    @property
    def end(self) -> int:
        return self.num_tags + 1

    def copy(self) -> "TransitionModel":
        return TransitionModel(self.matrix.copy())


@dataclass(frozen=True)
class CrfModel:
    scorer: EmissionScorer
    transitions: TransitionModel
    tagset: TagSet
    # per-epoch mean training loss, populated by train()
    train_losses: tuple[float, ...] | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.scorer.num_tags != self.tagset.size:
            raise DataError(
                f"scorer has {self.scorer.num_tags} tags, tag set has {self.tagset.size}"
            )
        if self.transitions.num_tags != self.tagset.size:
            raise DataError(
                f"transitions have {self.transitions.num_tags} tags, "
                f"tag set has {self.tagset.size}"
            )

    def copy(self) -> "CrfModel":
        return replace(self, scorer=self.scorer.copy(), transitions=self.transitions.copy())

    def predict(self, sentence: Sentence) -> TagSequence:
        y, _ = viterbi(self.scorer.emissions(sentence), self.transitions)
        return y


def _forward(scores: np.ndarray, trans: TransitionModel) -> tuple[np.ndarray, float]:
    """Forward recursion; returns (alpha, log partition)."""
    a = trans.matrix
    k = trans.num_tags
    n = scores.shape[0]
    alpha = np.empty_like(scores)
    alpha[0] = scores[0] + a[trans.start, :k]
    for i in range(1, n):
        alpha[i] = scores[i] + _logsumexp(alpha[i - 1][:, None] + a[:k, :k], axis=0)
    log_z = float(_logsumexp(alpha[n - 1] + a[:k, trans.end], axis=0))
    return alpha, log_z


def _backward(scores: np.ndarray, trans: TransitionModel) -> np.ndarray:
    a = trans.matrix
    k = trans.num_tags
    n = scores.shape[0]
    beta = np.empty_like(scores)
    beta[n - 1] = a[:k, trans.end]
    for i in range(n - 2, -1, -1):
        beta[i] = _logsumexp(a[:k, :k] + (scores[i + 1] + beta[i + 1])[None, :], axis=1)
    return beta


def log_partition(emissions: EmissionMatrix, trans: TransitionModel) -> float:
    """log Z: log-sum-exp of path scores over all K^n tag paths."""
    _, log_z = _forward(emissions.scores, trans)
    return log_z


def _path_score(y: TagSequence, scores: np.ndarray, trans: TransitionModel) -> float:
    a = trans.matrix
    y = np.asarray(y, dtype=np.int64)
    if y.shape[0] != scores.shape[0]:
        raise DataError(f"tag length {y.shape[0]} != sentence length {scores.shape[0]}")
    if np.any(y < 0) or np.any(y >= trans.num_tags):
        raise DataError("tag index out of range")
    total = scores[np.arange(len(y)), y].sum()
    total += a[trans.start, y[0]] + a[y[-1], trans.end]
    total += a[y[:-1], y[1:]].sum()
    return float(total)


def sequence_log_prob(
    y: TagSequence, emissions: EmissionMatrix, trans: TransitionModel
) -> float:
    """log p(y | X): path score minus log partition; always <= 0."""
    return _path_score(y, emissions.scores, trans) - log_partition(emissions, trans)


def viterbi(emissions: EmissionMatrix, trans: TransitionModel) -> tuple[TagSequence, float]:
    """Highest-scoring tag path and its unnormalized score.

    Ties break toward the lowest tag index at every backpointer decision.
    """
    scores = emissions.scores
    a = trans.matrix
    k = trans.num_tags
    n = scores.shape[0]
    delta = scores[0] + a[trans.start, :k]
    backptr = np.empty((n, k), dtype=np.int64)
    for i in range(1, n):
        cand = delta[:, None] + a[:k, :k]  # (from, to)
        backptr[i] = cand.argmax(axis=0)
        delta = scores[i] + cand.max(axis=0)
    delta = delta + a[:k, trans.end]
    last = int(delta.argmax())
    best = float(delta[last])
    path = [0] * n
    path[n - 1] = last
    for i in range(n - 1, 0, -1):
        path[i - 1] = int(backptr[i, path[i]])
    return tuple(path), best


def marginals(emissions: EmissionMatrix, trans: TransitionModel) -> np.ndarray:
    """Posterior tag probabilities per position; rows sum to 1."""
    alpha, log_z = _forward(emissions.scores, trans)
    beta = _backward(emissions.scores, trans)
    return np.exp(alpha + beta - log_z)


def _sentence_gradients(scores: np.ndarray, y: TagSequence, trans: TransitionModel):
    """NLL and exact gradients w.r.t. emission scores and transitions."""
    a = trans.matrix
    k = trans.num_tags
    n = scores.shape[0]
    alpha, log_z = _forward(scores, trans)
    beta = _backward(scores, trans)
    marg = np.exp(alpha + beta - log_z)

    y_arr = np.asarray(y, dtype=np.int64)
    gscores = marg.copy()
    gscores[np.arange(n), y_arr] -= 1.0

    gtrans = np.zeros_like(a)
    if n > 1:
        pair = np.exp(
            alpha[:-1, :, None]
            + a[None, :k, :k]
            + (scores[1:] + beta[1:])[:, None, :]
            - log_z
        )
        gtrans[:k, :k] = pair.sum(axis=0)
        np.subtract.at(gtrans, (y_arr[:-1], y_arr[1:]), 1.0)
    gtrans[trans.start, :k] += marg[0]
    gtrans[trans.start, y_arr[0]] -= 1.0
    gtrans[:k, trans.end] += marg[-1]
    gtrans[y_arr[-1], trans.end] -= 1.0

    nll = log_z - _path_score(y, scores, trans)
    return nll, gscores, gtrans


@dataclass
class ModelGradient:
    """Dense gradients matching ``scorer.weights`` and the transition matrix."""

    emission_weights: np.ndarray
    transitions: np.ndarray


def nll_and_gradient(
    batch: list[tuple[Sentence, TagSequence]], model: CrfModel, l2: float = 0.0
) -> tuple[float, ModelGradient]:
    """Negative log-likelihood of the batch plus L2, with exact gradients.

    loss = -sum log p(y | X) + (l2 / 2) * (||W||^2 + ||A||^2)
    """
    if not batch:
        raise DataError("batch must be nonempty")
    scorer = model.scorer
    trans = model.transitions
    dw = np.zeros_like(scorer.weights)
    da = np.zeros_like(trans.matrix)
    loss = 0.0
    for sentence, y in batch:
        ctx = scorer.context(sentence)
        scores = scorer.scores_from(ctx)
        nll, gscores, gtrans = _sentence_gradients(scores, y, trans)
        loss += nll
        da += gtrans
        rows, grad = scorer.weight_gradient(ctx, gscores)
        if rows is None:
            dw += grad
        else:
            np.add.at(dw, rows, grad)
    if l2 > 0:
        loss += 0.5 * l2 * (float(np.sum(scorer.weights**2)) + float(np.sum(trans.matrix**2)))
        dw += l2 * scorer.weights
        da += l2 * trans.matrix
    return loss, ModelGradient(dw, da)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 10
    learning_rate: float = 0.1
    l2: float = 1e-4
    rng_seed: int = 0
    shuffle: bool = True

    def __post_init__(self):
        if self.epochs < 1:
            raise DataError(f"epochs must be >= 1, got {self.epochs}")
        if self.learning_rate <= 0:
            raise DataError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.l2 < 0:
            raise DataError(f"l2 must be >= 0, got {self.l2}")


def epochs_for_ratio(ratio: float) -> int:
    """Default epoch schedule: more epochs for smaller seeds."""
    if ratio <= 0.10 + 1e-12:
        return 30
    if ratio <= 0.30 + 1e-12:
        return 20
    return 10


def train(
    data: LabeledDataset | WeakDataset,
    config: TrainConfig,
    init: CrfModel | None = None,
) -> CrfModel:
    """Train by per-sentence AdaGrad; deterministic given ``config.rng_seed``.

    ``init`` provides the starting parameters (it is copied, never mutated);
    when absent, a zero-initialized hashed-feature model is built from the
    data's tag set.  Weak and seed items are weighted equally.  The list of
    per-epoch mean losses is attached to the returned model as
    ``train_losses`` (regularizer term excluded).
    """
    items = data.pairs() if isinstance(data, WeakDataset) else list(data.items)
    if not items:
        raise DataError("training data must be nonempty")
    tagset = data.tagset
    if init is None:
        model = CrfModel(LinearFeatureScorer(tagset.size), TransitionModel.zeros(tagset.size), tagset)
    else:
        if init.tagset != tagset:
            raise DataError("init model tag set differs from training data tag set")
        model = init.copy()
    scorer = model.scorer
    a = model.transitions.matrix
    trans = model.transitions
    lr = config.learning_rate
    l2 = config.l2

    contexts = [scorer.context(s) for s, _ in items]
    g2_w = np.zeros_like(scorer.weights)
    g2_a = np.zeros_like(a)
    rng = np.random.default_rng(config.rng_seed)

    losses = []
    for epoch in range(config.epochs):
        order = rng.permutation(len(items)) if config.shuffle else np.arange(len(items))
        epoch_loss = 0.0
        for idx in order:
            sentence, y = items[idx]
            ctx = contexts[idx]
            scores = scorer.scores_from(ctx)
            nll, gscores, gtrans = _sentence_gradients(scores, y, trans)
            if not np.isfinite(nll):
                raise NumericalError(
                    f"non-finite loss at epoch {epoch}, sentence {idx}: {nll}"
                )
            epoch_loss += nll

            gtrans += l2 * a
            g2_a += gtrans * gtrans
            a -= lr * gtrans / (np.sqrt(g2_a) + _ADAGRAD_EPS)

            rows, grad = scorer.weight_gradient(ctx, gscores)
            if rows is None:
                grad += l2 * scorer.weights
                g2_w += grad * grad
                scorer.weights -= lr * grad / (np.sqrt(g2_w) + _ADAGRAD_EPS)
            else:
                # l2 applied to the rows active in this sentence only
                grad += l2 * scorer.weights[rows]
                g2_w[rows] += grad * grad
                scorer.weights[rows] -= lr * grad / (np.sqrt(g2_w[rows]) + _ADAGRAD_EPS)
        losses.append(epoch_loss / len(items))

    return CrfModel(scorer, trans, tagset, train_losses=tuple(losses))


def predict_with_confidence(
    model: CrfModel, sentence: Sentence, mode: str = "softmax"
) -> tuple[TagSequence, list[float]]:
    """Viterbi path plus a per-token confidence for each decoded tag.

    ``softmax`` reads the emission softmax probability of the decoded tag;
    ``marginal`` reads the CRF posterior marginal instead.
    """
    if mode not in ("softmax", "marginal"):
        raise DataError(f"unknown confidence mode {mode!r}")
    em = model.scorer.emissions(sentence)
    y, _ = viterbi(em, model.transitions)
    source = em.probs if mode == "softmax" else marginals(em, model.transitions)
    conf = source[np.arange(len(y)), list(y)]
    return y, [float(c) for c in conf]
