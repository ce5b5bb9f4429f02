"""BIO tag alphabet, span <-> tag-sequence conversion, validation and repair.

Tag indices are stable: O is always index 0, then B-<type>, I-<type> pairs
in the order the entity types were given.  Invalid model output is repaired
with the conlleval convention (a stray I-X counts as B-X), which keeps span
decoding total.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

# A tag sequence is a tuple of indices into a TagSet's alphabet.
TagSequence = tuple[int, ...]

OUTSIDE = 0


class Span(NamedTuple):
    """Entity mention as a half-open token interval, ``end`` exclusive."""

    start: int
    end: int
    entity_type: str


@dataclass(frozen=True)
class TagSet:
    """BIO alphabet over an ordered list of entity types.

    The alphabet has size ``2 * len(entity_types) + 1``: O at index 0,
    then B-T at ``1 + 2i`` and I-T at ``2 + 2i`` for the i-th type.
    """

    entity_types: tuple[str, ...]
    _index: dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        seen = set()
        for t in self.entity_types:
            if not t or any(c.isspace() for c in t) or "-" in t:
                raise ValueError(f"bad entity type name: {t!r}")
            if t == "O":
                raise ValueError("'O' is reserved for the outside tag")
            if t in seen:
                raise ValueError(f"duplicate entity type: {t!r}")
            seen.add(t)
        object.__setattr__(self, "entity_types", tuple(self.entity_types))
        index = {tag: i for i, tag in enumerate(self.tag_strings())}
        object.__setattr__(self, "_index", index)

    @property
    def size(self) -> int:
        """Number of tags K."""
        return 2 * len(self.entity_types) + 1

    def tag_strings(self) -> list[str]:
        tags = ["O"]
        for t in self.entity_types:
            tags.append(f"B-{t}")
            tags.append(f"I-{t}")
        return tags

    def index(self, tag: str) -> int:
        try:
            return self._index[tag]
        except KeyError:
            raise ValueError(f"tag {tag!r} not in tag set {self.tag_strings()}") from None

    def tag(self, i: int) -> str:
        if not 0 <= i < self.size:
            raise ValueError(f"tag index {i} out of range for K={self.size}")
        if i == OUTSIDE:
            return "O"
        t = self.entity_types[(i - 1) // 2]
        return f"B-{t}" if (i - 1) % 2 == 0 else f"I-{t}"

    def begin(self, entity_type: str) -> int:
        return self.index(f"B-{entity_type}")

    def inside(self, entity_type: str) -> int:
        return self.index(f"I-{entity_type}")

    def is_begin(self, i: int) -> bool:
        return i != OUTSIDE and (i - 1) % 2 == 0

    def is_inside(self, i: int) -> bool:
        return i != OUTSIDE and (i - 1) % 2 == 1

    def entity_type_of(self, i: int) -> str:
        """Entity type of a B- or I- tag index."""
        if i == OUTSIDE:
            raise ValueError("O carries no entity type")
        return self.entity_types[(i - 1) // 2]

    def contains(self, tag: str) -> bool:
        return tag in self._index


def encode_spans(spans: list[Span], length: int, tagset: TagSet) -> TagSequence:
    """BIO-encode non-overlapping spans; uncovered positions get O."""
    tags = [OUTSIDE] * length
    for span in sorted(spans):
        if not 0 <= span.start < span.end <= length:
            raise ValueError(f"span {span} out of range for length {length}")
        b = tagset.begin(span.entity_type)
        for pos in range(span.start, span.end):
            if tags[pos] != OUTSIDE:
                raise ValueError(f"span {span} overlaps an earlier span at position {pos}")
            tags[pos] = b if pos == span.start else b + 1
    return tuple(tags)


def repair(tags: TagSequence, tagset: TagSet) -> TagSequence:
    """Rewrite stray I-X tags (no compatible predecessor) as B-X."""
    out = list(tags)
    for i, t in enumerate(out):
        if not tagset.is_inside(t):
            continue
        prev = out[i - 1] if i > 0 else OUTSIDE
        # compatible predecessor: B-X or I-X for the same type X
        if prev == t or prev == t - 1:
            continue
        out[i] = t - 1
    return tuple(out)


def validate(tags: TagSequence, tagset: TagSet) -> list[int]:
    """Positions whose I-tag lacks a compatible predecessor."""
    bad = []
    for i, t in enumerate(tags):
        if not 0 <= t < tagset.size:
            raise ValueError(f"tag index {t} at position {i} out of range for K={tagset.size}")
        if not tagset.is_inside(t):
            continue
        prev = tags[i - 1] if i > 0 else OUTSIDE
        if prev != t and prev != t - 1:
            bad.append(i)
    return bad


def decode_spans(tags: TagSequence, tagset: TagSet) -> list[Span]:
    """Decode a tag sequence into sorted, non-overlapping spans.

    Invalid sequences are repaired first, so decoding is total.
    """
    tags = repair(tags, tagset)
    spans: list[Span] = []
    start = -1
    for i, t in enumerate(tags):
        if tagset.is_inside(t):
            continue  # extends the open span
        if start >= 0:
            spans.append(Span(start, i, tagset.entity_type_of(tags[start])))
            start = -1
        if tagset.is_begin(t):
            start = i
    if start >= 0:
        spans.append(Span(start, len(tags), tagset.entity_type_of(tags[start])))
    return spans
