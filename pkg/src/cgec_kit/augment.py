"""Error-invariant augmentation: swap named entities, keep the error intact.

Entities that occur identically on both sides of a pair, away from the edit
spans, are replaced by same-class substitutes from a lexicon.  Every emitted
variant is re-checked: its char-level edit set must equal the parent's after
the deterministic offset shift, otherwise the plan is discarded.
"""

from __future__ import annotations

import itertools
import logging
import random
from dataclasses import dataclass
from typing import Mapping, Sequence

from .corpus import PairSource, ParallelPair
from .edits import Edit, Granularity, extract_edits
from .errors import InputFormatError, ValidationError

logger = logging.getLogger(__name__)

# Full enumeration of the substitution-plan space is used below this size;
# larger spaces fall back to seeded rejection sampling.
_ENUMERATION_LIMIT = 4096


@dataclass(frozen=True)
class EntityLexicon:
    """Entity surface -> ordered substitutes of the same entity class."""

    entries: Mapping[str, tuple[str, ...]]

    def __post_init__(self) -> None:
        normalized: dict[str, tuple[str, ...]] = {}
        for entity, substitutes in self.entries.items():
            if not entity:
                raise ValidationError("entity surface must be non-empty")
            deduped: list[str] = []
            for substitute in substitutes:
                if not substitute:
                    raise ValidationError(f"entity {entity!r}: empty substitute")
                if substitute == entity:
                    raise ValidationError(
                        f"entity {entity!r}: substitute equals the entity itself"
                    )
                if substitute not in deduped:
                    deduped.append(substitute)
            if not deduped:
                raise ValidationError(f"entity {entity!r}: no substitutes")
            normalized[entity] = tuple(deduped)
        object.__setattr__(self, "entries", normalized)

    @classmethod
    def load(cls, path: str) -> "EntityLexicon":
        """Load a TSV lexicon: entity <TAB> substitute1 <TAB> substitute2 ..."""
        entries: dict[str, tuple[str, ...]] = {}
        with open(path, encoding="utf-8") as handle:
            for lineno, line in enumerate(handle, start=1):
                line = line.rstrip("\n").rstrip("\r")
                if not line:
                    continue
                fields = line.split("\t")
                if len(fields) < 2:
                    raise InputFormatError(
                        f"{path}:{lineno}: expected entity and at least one substitute"
                    )
                if fields[0] in entries:
                    raise InputFormatError(f"{path}:{lineno}: duplicate entity {fields[0]!r}")
                try:
                    lexicon = cls({fields[0]: tuple(fields[1:])})
                except ValidationError as exc:
                    raise InputFormatError(f"{path}:{lineno}: {exc}") from exc
                entries[fields[0]] = lexicon.entries[fields[0]]
        return cls(entries)


@dataclass(frozen=True)
class SubstitutableEntity:
    """An entity with its rank-paired occurrence offsets on both sides."""

    entity: str
    src_offsets: tuple[int, ...]
    tgt_offsets: tuple[int, ...]


@dataclass(frozen=True)
class AugmentationPlan:
    """The substitutions applied to one pair, for provenance and replay."""

    pair_id: str
    substitutions: tuple[tuple[str, str, int], ...]  # (entity, replacement, occurrence)
    seed: int


def _edit_spans(edits: Sequence[Edit]) -> tuple[list[tuple[int, int]], list[tuple[int, int]]]:
    """Char spans touched by edits on the source and target sides."""
    src_spans: list[tuple[int, int]] = []
    tgt_spans: list[tuple[int, int]] = []
    delta = 0
    for edit in edits:
        src_spans.append((edit.start, edit.end))
        tgt_start = edit.start + delta
        tgt_spans.append((tgt_start, tgt_start + len(edit.replacement)))
        delta += len(edit.replacement) - (edit.end - edit.start)
    return src_spans, tgt_spans


def _blocked(start: int, end: int, spans: Sequence[tuple[int, int]]) -> bool:
    for span_start, span_end in spans:
        if span_start == span_end:
            # Zero-width span (insertion point / deletion site): substituting
            # across it would split the edit, so it blocks interior overlap.
            if start < span_start < end:
                return True
        elif max(start, span_start) < min(end, span_end):
            return True
    return False


def _occurrences(
    text: str, entity: str, blocked_spans: Sequence[tuple[int, int]]
) -> list[int]:
    """Non-overlapping left-to-right occurrences clear of blocked spans."""
    offsets: list[int] = []
    pos = 0
    while True:
        pos = text.find(entity, pos)
        if pos < 0:
            return offsets
        if _blocked(pos, pos + len(entity), blocked_spans):
            pos += 1
            continue
        offsets.append(pos)
        pos += len(entity)


def find_substitutable_spans(
    pair: ParallelPair, lexicon: EntityLexicon
) -> list[SubstitutableEntity]:
    """Lexicon entities occurring equally often on both sides, off the edits.

    Longest entities claim their spans first; within one entity occurrences
    resolve left-to-right.  Entities whose occurrence counts differ across
    the two sides are skipped.
    """
    edits = extract_edits(pair.ungrammatical, pair.grammatical, Granularity.char())
    src_blocked, tgt_blocked = _edit_spans(edits)
    found: list[SubstitutableEntity] = []
    for entity in sorted(lexicon.entries, key=lambda e: (-len(e), e)):
        src_offsets = _occurrences(pair.ungrammatical, entity, src_blocked)
        tgt_offsets = _occurrences(pair.grammatical, entity, tgt_blocked)
        if not src_offsets or len(src_offsets) != len(tgt_offsets):
            continue
        found.append(SubstitutableEntity(entity, tuple(src_offsets), tuple(tgt_offsets)))
        src_blocked = src_blocked + [(o, o + len(entity)) for o in src_offsets]
        tgt_blocked = tgt_blocked + [(o, o + len(entity)) for o in tgt_offsets]
    return found


def _plan_choices(
    candidates: Sequence[SubstitutableEntity],
    lexicon: EntityLexicon,
    rng: random.Random,
    max_plans: int,
) -> list[tuple[int, ...]]:
    """Up to max_plans distinct substitute-index tuples, deterministic per rng."""
    sizes = [len(lexicon.entries[c.entity]) for c in candidates]
    space = 1
    for size in sizes:
        space *= size
    if space <= _ENUMERATION_LIMIT:
        plans = list(itertools.product(*(range(size) for size in sizes)))
        rng.shuffle(plans)
        return plans[:max_plans]
    plans = []
    seen: set[tuple[int, ...]] = set()
    attempts = 16 * max_plans + 64
    for _ in range(attempts):
        plan = tuple(rng.randrange(size) for size in sizes)
        if plan not in seen:
            seen.add(plan)
            plans.append(plan)
            if len(plans) >= max_plans:
                break
    return plans


def _splice(text: str, replacements: Sequence[tuple[int, int, str]]) -> str:
    for start, end, replacement in sorted(replacements, key=lambda r: -r[0]):
        text = text[:start] + replacement + text[end:]
    return text


def _shifted_edits(
    edits: Sequence[Edit], substitutions: Sequence[tuple[int, int, str]]
) -> list[Edit]:
    shifted = []
    for edit in edits:
        delta = sum(
            len(replacement) - (end - start)
            for start, end, replacement in substitutions
            if end <= edit.start
        )
        shifted.append(Edit(edit.start + delta, edit.end + delta, edit.replacement))
    return shifted


def _augment_variants(
    pair: ParallelPair, lexicon: EntityLexicon, seed: int, count: int
) -> list[tuple[ParallelPair, AugmentationPlan]]:
    candidates = find_substitutable_spans(pair, lexicon)
    if not candidates:
        return []
    parent_edits = extract_edits(pair.ungrammatical, pair.grammatical, Granularity.char())
    rng = random.Random(f"{seed}:{pair.id}")
    variants: list[tuple[ParallelPair, AugmentationPlan]] = []
    for plan in _plan_choices(candidates, lexicon, rng, max_plans=4 * count + 8):
        src_subs: list[tuple[int, int, str]] = []
        tgt_subs: list[tuple[int, int, str]] = []
        recorded: list[tuple[str, str, int]] = []
        for candidate, choice in zip(candidates, plan):
            replacement = lexicon.entries[candidate.entity][choice]
            width = len(candidate.entity)
            for rank, (src_off, tgt_off) in enumerate(
                zip(candidate.src_offsets, candidate.tgt_offsets)
            ):
                src_subs.append((src_off, src_off + width, replacement))
                tgt_subs.append((tgt_off, tgt_off + width, replacement))
                recorded.append((candidate.entity, replacement, rank))
        aug_ungrammatical = _splice(pair.ungrammatical, src_subs)
        aug_grammatical = _splice(pair.grammatical, tgt_subs)
        if aug_ungrammatical == aug_grammatical:
            continue
        expected = _shifted_edits(parent_edits, src_subs)
        actual = extract_edits(aug_ungrammatical, aug_grammatical, Granularity.char())
        if actual != expected:
            logger.warning(
                "pair %s: plan %r re-anchors the edit set, discarding variant",
                pair.id,
                recorded,
            )
            continue
        variant = ParallelPair(
            id=f"{pair.id}-aug{len(variants) + 1}",
            ungrammatical=aug_ungrammatical,
            grammatical=aug_grammatical,
            error_type=pair.error_type,
            source=PairSource.AUGMENTED,
            parent_id=pair.id,
        )
        variants.append((variant, AugmentationPlan(pair.id, tuple(recorded), seed)))
        if len(variants) >= count:
            break
    return variants


def augment_pair(pair: ParallelPair, lexicon: EntityLexicon, seed: int) -> ParallelPair | None:
    """One deterministic augmented variant of a pair, or None.

    Substitutes are drawn pseudo-randomly per entity from the lexicon, the
    identical substitution is applied to both sides at rank-paired
    occurrences, and the result keeps the parent's error (verified).
    """
    variants = _augment_variants(pair, lexicon, seed, count=1)
    return variants[0][0] if variants else None


def augment_corpus(
    pairs: Sequence[ParallelPair], lexicon: EntityLexicon, factor: int, seed: int
) -> list[ParallelPair]:
    """Up to ``factor`` distinct augmented variants per pair, originals excluded.

    Deterministic given (seed, input order); variants carry parent_id and
    the parent's error type.
    """
    if factor < 1:
        raise ValueError(f"factor must be >= 1, got {factor}")
    out: list[ParallelPair] = []
    for pair in pairs:
        out.extend(variant for variant, _ in _augment_variants(pair, lexicon, seed, factor))
    return out
