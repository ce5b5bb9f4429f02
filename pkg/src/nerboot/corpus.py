"""Sentence corpora: CoNLL ingestion, seed splitting, synthetic generation.

Labels live on datasets as tag-index sequences, not on tokens, so labeled
and unlabeled data share one Sentence type.  All types are immutable after
construction and operations are pure given their inputs.
"""

from __future__ import annotations

import io
import math
import string
from dataclasses import dataclass, field
from typing import IO, Iterator

import numpy as np

from .errors import DataError
from .tags import TagSequence, TagSet

Provenance = str  # "seed" | "weak"


@dataclass(frozen=True)
class Sentence:
    """Pre-tokenized sentence; tokens are non-empty and whitespace-free."""

    tokens: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(self.tokens))
        if len(self.tokens) == 0:
            raise DataError("sentence must contain at least one token")
        for tok in self.tokens:
            if not tok or any(c.isspace() for c in tok):
                raise DataError(f"bad token {tok!r}: empty or contains whitespace")

    def __len__(self) -> int:
        return len(self.tokens)


@dataclass(frozen=True)
class LabeledDataset:
    """Aligned (sentence, tag sequence) pairs over one tag set."""

    items: tuple[tuple[Sentence, TagSequence], ...]
    tagset: TagSet

    def __post_init__(self):
        object.__setattr__(self, "items", tuple((s, tuple(t)) for s, t in self.items))
        for s, tags in self.items:
            if len(s) != len(tags):
                raise DataError(f"sentence length {len(s)} != tag length {len(tags)}")
            for t in tags:
                if not 0 <= t < self.tagset.size:
                    raise DataError(f"tag index {t} out of range for K={self.tagset.size}")

    def __len__(self) -> int:
        return len(self.items)

    def __iter__(self) -> Iterator[tuple[Sentence, TagSequence]]:
        return iter(self.items)

    @property
    def sentences(self) -> tuple[Sentence, ...]:
        return tuple(s for s, _ in self.items)


@dataclass(frozen=True)
class UnlabeledCorpus:
    """Sentences with no label information."""

    sentences: tuple[Sentence, ...]

    def __post_init__(self):
        object.__setattr__(self, "sentences", tuple(self.sentences))

    def __len__(self) -> int:
        return len(self.sentences)

    def __iter__(self) -> Iterator[Sentence]:
        return iter(self.sentences)


@dataclass(frozen=True)
class WeakDataset:
    """Labeled items tagged with their provenance: gold seed or weak model output."""

    items: tuple[tuple[Sentence, TagSequence, Provenance], ...]
    tagset: TagSet

    def __post_init__(self):
        object.__setattr__(self, "items", tuple((s, tuple(t), p) for s, t, p in self.items))
        for s, tags, prov in self.items:
            if len(s) != len(tags):
                raise DataError(f"sentence length {len(s)} != tag length {len(tags)}")
            if prov not in ("seed", "weak"):
                raise DataError(f"bad provenance {prov!r}")

    def __len__(self) -> int:
        return len(self.items)

    def __iter__(self) -> Iterator[tuple[Sentence, TagSequence, Provenance]]:
        return iter(self.items)

    def pairs(self) -> list[tuple[Sentence, TagSequence]]:
        return [(s, t) for s, t, _ in self.items]


def _text_lines(source: IO) -> Iterator[str]:
    data = source.read()
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    return iter(data.split("\n"))


def read_conll(source: IO, tagset: TagSet | None = None, sep: str = "\t") -> LabeledDataset:
    """Read token-per-line CoNLL data: two columns, blank line ends a sentence.

    Lines whose first column is ``-DOCSTART-`` are skipped.  When ``tagset``
    is None the entity types are inferred from the file (sorted order).
    """
    raw: list[tuple[list[str], list[str]]] = []
    tokens: list[str] = []
    tag_strs: list[str] = []
    types_seen: set[str] = set()

    for lineno, line in enumerate(_text_lines(source), 1):
        line = line.rstrip("\r")
        if not line.strip():
            if tokens:
                raw.append((tokens, tag_strs))
                tokens, tag_strs = [], []
            continue
        fields = line.split(sep)
        if fields[0] == "-DOCSTART-":
            continue
        if len(fields) != 2:
            raise DataError(
                f"line {lineno}: expected 2 columns separated by {sep!r}, "
                f"got {len(fields)}: {line!r}"
            )
        tok, tag = fields
        if tag != "O":
            prefix, _, etype = tag.partition("-")
            if prefix not in ("B", "I") or not etype:
                raise DataError(f"line {lineno}: tag {tag!r} is not BIO-shaped")
            if tagset is not None and not tagset.contains(tag):
                raise DataError(f"line {lineno}: tag {tag!r} not in configured tag set")
            types_seen.add(etype)
        tokens.append(tok)
        tag_strs.append(tag)
    if tokens:
        raw.append((tokens, tag_strs))

    if tagset is None:
        tagset = TagSet(tuple(sorted(types_seen)))
    items = tuple(
        (Sentence(tuple(toks)), tuple(tagset.index(t) for t in tags)) for toks, tags in raw
    )
    return LabeledDataset(items, tagset)


def write_conll(data: LabeledDataset, sink: IO, sep: str = "\t") -> None:
    """Write CoNLL lines; blank line between sentences, no trailing blank."""
    chunks = []
    for sent, tags in data:
        chunks.append(
            "".join(f"{tok}{sep}{data.tagset.tag(t)}\n" for tok, t in zip(sent.tokens, tags))
        )
    text = "\n".join(chunks)
    if isinstance(sink, (io.RawIOBase, io.BufferedIOBase)):
        sink.write(text.encode("utf-8"))
    else:
        sink.write(text)


def read_text_corpus(source: IO) -> UnlabeledCorpus:
    """One whitespace-tokenized sentence per line; blank lines are skipped."""
    sentences = []
    for line in _text_lines(source):
        toks = line.split()
        if toks:
            sentences.append(Sentence(tuple(toks)))
    return UnlabeledCorpus(tuple(sentences))


def write_text_corpus(corpus: UnlabeledCorpus, sink: IO) -> None:
    text = "".join(" ".join(s.tokens) + "\n" for s in corpus)
    if isinstance(sink, (io.RawIOBase, io.BufferedIOBase)):
        sink.write(text.encode("utf-8"))
    else:
        sink.write(text)


def strip_labels(data: LabeledDataset) -> UnlabeledCorpus:
    """Drop labels, keeping sentences in order."""
    return UnlabeledCorpus(data.sentences)


def split_seed(
    data: LabeledDataset, ratio: float, rng_seed: int
) -> tuple[LabeledDataset, UnlabeledCorpus]:
    """Split into a labeled seed subset and an unlabeled remainder.

    Seed size is ``max(1, round(ratio * M))`` (round half up); selection is
    uniform without replacement and deterministic given ``rng_seed``.  Both
    halves keep the original sentence order.
    """
    if not 0 < ratio <= 1:
        raise DataError(f"seed ratio must be in (0, 1], got {ratio}")
    if len(data) == 0:
        raise DataError("cannot split an empty dataset")
    m = len(data)
    n_seed = min(m, max(1, int(math.floor(ratio * m + 0.5))))
    rng = np.random.default_rng(rng_seed)
    chosen = set(rng.choice(m, size=n_seed, replace=False).tolist())
    seed_items = tuple(data.items[i] for i in range(m) if i in chosen)
    rest = tuple(data.items[i][0] for i in range(m) if i not in chosen)
    return LabeledDataset(seed_items, data.tagset), UnlabeledCorpus(rest)


@dataclass(frozen=True)
class SyntheticSpec:
    """Recipe for a deterministic synthetic NER corpus.

    Each entity type draws its surface forms from a disjoint vocabulary
    block, and a type-specific cue word precedes an entity with probability
    ``cue_rate``, so both word identity and left context carry signal.
    """

    vocab_size: int
    entity_types: tuple[str, ...]
    sentence_length_range: tuple[int, int]
    entity_rate: float
    rng_seed: int
    num_sentences: int = 500
    cue_rate: float = 0.5
    entity_length_range: tuple[int, int] = (1, 3)

    def __post_init__(self):
        object.__setattr__(self, "entity_types", tuple(self.entity_types))
        lo, hi = self.sentence_length_range
        if self.vocab_size < 10:
            raise DataError("vocab_size must be >= 10")
        if self.vocab_size < 4 * (len(self.entity_types) + 1):
            raise DataError("vocab_size too small for the requested entity types")
        if not 0 <= self.entity_rate < 1:
            raise DataError(f"entity_rate must be in [0, 1), got {self.entity_rate}")
        if lo < 1 or hi < lo:
            raise DataError(f"bad sentence_length_range {self.sentence_length_range}")
        if not 0 <= self.cue_rate <= 1:
            raise DataError(f"cue_rate must be in [0, 1], got {self.cue_rate}")
        elo, ehi = self.entity_length_range
        if elo < 1 or ehi < elo:
            raise DataError(f"bad entity_length_range {self.entity_length_range}")
        if self.num_sentences < 0:
            raise DataError("num_sentences must be >= 0")


def _random_words(rng: np.random.Generator, count: int) -> list[str]:
    letters = np.array(list(string.ascii_lowercase))
    words: list[str] = []
    seen = set()
    while len(words) < count:
        length = int(rng.integers(4, 9))
        word = "".join(rng.choice(letters, size=length))
        if word not in seen:
            seen.add(word)
            words.append(word)
    return words


def generate_synthetic(spec: SyntheticSpec) -> LabeledDataset:
    """Generate a labeled corpus with class-correlated token distributions.

    Deterministic given ``spec.rng_seed``.  The expected fraction of non-O
    tokens equals ``spec.entity_rate``.
    """
    rng = np.random.default_rng(spec.rng_seed)
    tagset = TagSet(spec.entity_types)
    n_types = len(spec.entity_types)

    words = _random_words(rng, spec.vocab_size)
    block = max(1, (spec.vocab_size // 2) // n_types) if n_types else 0
    entity_words = [words[t * block : (t + 1) * block] for t in range(n_types)]
    background = words[n_types * block :]
    n_cues = min(5, max(1, len(background) // (2 * n_types))) if n_types else 0
    cue_words = [background[t * n_cues : (t + 1) * n_cues] for t in range(n_types)]

    # start probability solving E[non-O fraction] = entity_rate given the
    # mean entity length and the extra cue token per entity
    elo, ehi = spec.entity_length_range
    mean_len = (elo + ehi) / 2
    p = spec.entity_rate
    denom = mean_len - p * (mean_len + spec.cue_rate - 1)
    start_prob = p / denom if denom > 0 else 0.0

    items = []
    for _ in range(spec.num_sentences):
        lo, hi = spec.sentence_length_range
        length = int(rng.integers(lo, hi + 1))
        tokens: list[str] = []
        tag_idx: list[int] = []
        while len(tokens) < length:
            room = length - len(tokens)
            if start_prob > 0 and rng.random() < start_prob:
                t = int(rng.integers(n_types))
                if spec.cue_rate > 0 and rng.random() < spec.cue_rate and room > 1:
                    tokens.append(str(rng.choice(cue_words[t])))
                    tag_idx.append(0)
                    room -= 1
                elen = min(int(rng.integers(elo, ehi + 1)), room)
                for k in range(elen):
                    tokens.append(str(rng.choice(entity_words[t])))
                    tag_idx.append(tagset.begin(spec.entity_types[t]) + (0 if k == 0 else 1))
            else:
                tokens.append(str(rng.choice(background)))
                tag_idx.append(0)
        items.append((Sentence(tuple(tokens)), tuple(tag_idx)))
    return LabeledDataset(tuple(items), tagset)
