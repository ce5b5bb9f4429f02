"""Per-token emission scoring: hashed sparse features or embedding windows.

Both scorer variants produce an n x K score matrix that feeds the CRF, plus
its row-softmax, which is what confidence thresholding reads.  The hashed
linear variant is the default tagger input; the embedding variant plugs an
(optionally domain-adapted) embedding table into the same interface.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass

import numpy as np

from .corpus import Sentence
from .errors import DataError
from .tags import TagSet

DEFAULT_HASH_SPACE = 2**18


@dataclass(frozen=True)
class FeatureVector:
    """Strictly increasing hashed feature ids with implicit value 1.0."""

    indices: tuple[int, ...]


def token_shape(token: str) -> str:
    """Per-character shape: upper -> A, lower -> a, digit -> 9, other kept."""
    return "".join(
        "A" if c.isupper() else "a" if c.islower() else "9" if c.isdigit() else c
        for c in token
    )


def token_features(sentence: Sentence, i: int) -> list[str]:
    """Raw feature strings for position ``i``.

    Template: lowercased word identity, shape, prefixes/suffixes of length
    1-3 (where the word is long enough), lowercased previous/next word, and
    BOS/EOS boundary markers.
    """
    if not 0 <= i < len(sentence):
        raise IndexError(f"position {i} out of range for length {len(sentence)}")
    tok = sentence.tokens[i]
    low = tok.lower()
    feats = [f"w={low}", f"shape={token_shape(tok)}"]
    for k in (1, 2, 3):
        if len(low) >= k:
            feats.append(f"pre{k}={low[:k]}")
            feats.append(f"suf{k}={low[-k:]}")
    feats.append("BOS" if i == 0 else f"prev={sentence.tokens[i - 1].lower()}")
    feats.append("EOS" if i == len(sentence) - 1 else f"next={sentence.tokens[i + 1].lower()}")
    return feats


def hash_feature(feature: str, hash_space: int = DEFAULT_HASH_SPACE) -> int:
    return zlib.crc32(feature.encode("utf-8")) % hash_space


def extract_features(
    sentence: Sentence, i: int, hash_space: int = DEFAULT_HASH_SPACE
) -> FeatureVector:
    """Hash the position's feature strings into ``hash_space`` buckets."""
    ids = sorted({hash_feature(f, hash_space) for f in token_features(sentence, i)})
    return FeatureVector(tuple(ids))


def softmax_probs(scores: np.ndarray) -> np.ndarray:
    """Numerically stable row softmax (max subtraction)."""
    scores = np.asarray(scores, dtype=np.float64)
    if not np.all(np.isfinite(scores)):
        raise DataError("non-finite emission scores")
    shifted = scores - scores.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


@dataclass(frozen=True)
class EmissionMatrix:
    """Pre-softmax scores and their row-stochastic softmax."""

    scores: np.ndarray  # (n, K)
    probs: np.ndarray  # (n, K), rows sum to 1

    @classmethod
    def from_scores(cls, scores: np.ndarray) -> "EmissionMatrix":
        scores = np.asarray(scores, dtype=np.float64)
        return cls(scores=scores, probs=softmax_probs(scores))

    @property
    def length(self) -> int:
        return self.scores.shape[0]

    @property
    def num_tags(self) -> int:
        return self.scores.shape[1]


class LinearFeatureScorer:
    """Hashed sparse linear model: score[i, k] = sum of W[j, k] over active j."""

    variant = "linear-features"

    def __init__(self, num_tags: int, hash_space: int = DEFAULT_HASH_SPACE, weights=None):
        if num_tags < 1:
            raise DataError("num_tags must be >= 1")
        self.num_tags = num_tags
        self.hash_space = hash_space
        if weights is None:
            weights = np.zeros((hash_space, num_tags))
        weights = np.asarray(weights, dtype=np.float64)
        if weights.shape != (hash_space, num_tags):
            raise DataError(
                f"weight shape {weights.shape} != ({hash_space}, {num_tags})"
            )
        if not np.all(np.isfinite(weights)):
            raise DataError("non-finite scorer weights")
        self.weights = weights

    def copy(self) -> "LinearFeatureScorer":
        return LinearFeatureScorer(self.num_tags, self.hash_space, self.weights.copy())

    def context(self, sentence: Sentence) -> "_SparseContext":
        per_pos = [
            np.fromiter(
                sorted({hash_feature(f, self.hash_space) for f in token_features(sentence, i)}),
                dtype=np.int64,
            )
            for i in range(len(sentence))
        ]
        return _SparseContext(per_pos)

    def scores_from(self, ctx: "_SparseContext") -> np.ndarray:
        gathered = self.weights[ctx.padded]  # (n, max_f, K)
        return np.where(ctx.pad_mask[:, :, None], gathered, 0.0).sum(axis=1)

    def weight_gradient(self, ctx: "_SparseContext", gscores: np.ndarray):
        """Gradient w.r.t. weights as (active row ids, rows x K matrix)."""
        grad = np.zeros((len(ctx.uniq), self.num_tags))
        np.add.at(grad, ctx.inv, gscores[ctx.flat_pos])
        return ctx.uniq, grad

    def score_matrix(self, sentence: Sentence) -> np.ndarray:
        return self.scores_from(self.context(sentence))

    def emissions(self, sentence: Sentence) -> EmissionMatrix:
        return EmissionMatrix.from_scores(self.score_matrix(sentence))


class _SparseContext:
    """Precomputed hashed feature layout for one sentence."""

    __slots__ = ("per_pos", "padded", "pad_mask", "flat_pos", "uniq", "inv")

    def __init__(self, per_pos: list[np.ndarray]):
        self.per_pos = per_pos
        n = len(per_pos)
        width = max(len(f) for f in per_pos)
        self.padded = np.zeros((n, width), dtype=np.int64)
        self.pad_mask = np.zeros((n, width), dtype=bool)
        for i, f in enumerate(per_pos):
            self.padded[i, : len(f)] = f
            self.pad_mask[i, : len(f)] = True
        flat_rows = np.concatenate(per_pos)
        self.flat_pos = np.repeat(
            np.arange(n), np.fromiter((len(f) for f in per_pos), dtype=np.int64)
        )
        self.uniq, self.inv = np.unique(flat_rows, return_inverse=True)


class EmbeddingScorer:
    """Embedding-window scorer: token representation = mean of embeddings
    in a window of the given radius, projected to K tag scores."""

    variant = "embedding"

    def __init__(self, table, num_tags: int, radius: int = 1, weights=None):
        if num_tags < 1:
            raise DataError("num_tags must be >= 1")
        if radius < 0:
            raise DataError("radius must be >= 0")
        self.table = table
        self.num_tags = num_tags
        self.radius = radius
        if weights is None:
            weights = np.zeros((table.dim, num_tags))
        weights = np.asarray(weights, dtype=np.float64)
        if weights.shape != (table.dim, num_tags):
            raise DataError(f"weight shape {weights.shape} != ({table.dim}, {num_tags})")
        if not np.all(np.isfinite(weights)):
            raise DataError("non-finite scorer weights")
        self.weights = weights

    def copy(self) -> "EmbeddingScorer":
        return EmbeddingScorer(self.table, self.num_tags, self.radius, self.weights.copy())

    def with_table(self, table) -> "EmbeddingScorer":
        """Same projection weights over a different embedding table."""
        if table.dim != self.table.dim:
            raise DataError(f"table dim {table.dim} != scorer dim {self.table.dim}")
        return EmbeddingScorer(table, self.num_tags, self.radius, self.weights.copy())

    def context(self, sentence: Sentence) -> np.ndarray:
        """(n, d) matrix of window-averaged token representations."""
        ids = self.table.lookup(sentence.tokens)
        vecs = self.table.vectors[ids]  # (n, d)
        n = len(sentence)
        reps = np.empty_like(vecs)
        for i in range(n):
            lo = max(0, i - self.radius)
            hi = min(n, i + self.radius + 1)
            reps[i] = vecs[lo:hi].mean(axis=0)
        return reps

    def scores_from(self, ctx: np.ndarray) -> np.ndarray:
        return ctx @ self.weights

    def weight_gradient(self, ctx: np.ndarray, gscores: np.ndarray):
        """Dense gradient w.r.t. the projection weights."""
        return None, ctx.T @ gscores

    def score_matrix(self, sentence: Sentence) -> np.ndarray:
        return self.scores_from(self.context(sentence))

    def emissions(self, sentence: Sentence) -> EmissionMatrix:
        return EmissionMatrix.from_scores(self.score_matrix(sentence))


EmissionScorer = LinearFeatureScorer | EmbeddingScorer


def emission_scores(scorer: EmissionScorer, sentence: Sentence) -> EmissionMatrix:
    """Score a sentence with either scorer variant."""
    return scorer.emissions(sentence)


def default_scorer(tagset: TagSet, hash_space: int = DEFAULT_HASH_SPACE) -> LinearFeatureScorer:
    return LinearFeatureScorer(tagset.size, hash_space)
