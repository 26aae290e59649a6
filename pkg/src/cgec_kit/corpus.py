"""Parallel-pair corpus model: domain types, JSONL/TSV I/O, dataset statistics.

A corpus is a list of (ungrammatical, grammatical) sentence pairs, each
optionally labeled with one of six native grammatical error types.  Pairs are
stored as JSON-lines (full fidelity) or 3-column TSV (quick authoring).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Mapping, Sequence

from ._util import atomic_write, percentage
from .errors import InputFormatError, ValidationError


class ClueClass(Enum):
    """Whether an error type is betrayed by a surface lexical pattern."""

    WITH_CLUES = "with_clues"
    WITHOUT_CLUES = "without_clues"


class ErrorType(Enum):
    """The six native grammatical error types.

    RC/SC/IC carry surface clues (redundant component, structural confusion,
    improper collocation); IWO/IL/MC do not (improper word order, improper
    logicality, missing component).
    """

    RC = "RC"
    SC = "SC"
    IC = "IC"
    IWO = "IWO"
    IL = "IL"
    MC = "MC"

    @property
    def clue_class(self) -> ClueClass:
        if self in (ErrorType.RC, ErrorType.SC, ErrorType.IC):
            return ClueClass.WITH_CLUES
        return ClueClass.WITHOUT_CLUES

    @property
    def chinese_label(self) -> str:
        return _CHINESE_LABELS[self]


_CHINESE_LABELS = {
    ErrorType.RC: "成分赘余",
    ErrorType.SC: "结构混乱",
    ErrorType.IC: "搭配不当",
    ErrorType.IWO: "语序不当",
    ErrorType.IL: "不合逻辑",
    ErrorType.MC: "成分残缺",
}

# Canonical bucket order for statistics tables.
STAT_BUCKETS = [t.value for t in ErrorType] + ["unlabeled"]


class PairSource(Enum):
    """Provenance of a parallel pair."""

    RULE_SYNTHESIZED = "rule_synthesized"
    LLM_GENERATED = "llm_generated"
    HUMAN_ANNOTATED = "human_annotated"
    AUGMENTED = "augmented"


@dataclass(frozen=True)
class ParallelPair:
    """An (ungrammatical, grammatical) sentence pair with label and provenance.

    ``parent_id`` is set exactly when the pair was derived by augmentation,
    and then names the pair it was derived from.
    """

    id: str
    ungrammatical: str
    grammatical: str
    error_type: ErrorType | None = None
    source: PairSource = PairSource.HUMAN_ANNOTATED
    parent_id: str | None = None

    def __post_init__(self) -> None:
        if not self.id:
            raise ValidationError("pair id must be non-empty")
        if not self.ungrammatical or not self.grammatical:
            raise ValidationError(f"pair {self.id}: both sentences must be non-empty")
        if self.ungrammatical == self.grammatical:
            raise ValidationError(
                f"pair {self.id}: ungrammatical and grammatical sides are identical"
            )
        if (self.parent_id is not None) != (self.source is PairSource.AUGMENTED):
            raise ValidationError(
                f"pair {self.id}: parent_id must be set iff source is augmented"
            )


@dataclass(frozen=True)
class DatasetStats:
    """Per-error-type counts and 2-decimal percentages over a pair list."""

    total: int
    per_type: Mapping[str, tuple[int, float]]

    def as_dict(self) -> dict:
        return {
            "total": self.total,
            "per_type": {
                bucket: {"count": count, "percentage": pct}
                for bucket, (count, pct) in self.per_type.items()
            },
        }


def _pair_to_obj(pair: ParallelPair) -> dict:
    obj: dict = {
        "id": pair.id,
        "ungrammatical": pair.ungrammatical,
        "grammatical": pair.grammatical,
    }
    if pair.error_type is not None:
        obj["error_type"] = pair.error_type.value
    obj["source"] = pair.source.value
    if pair.parent_id is not None:
        obj["parent_id"] = pair.parent_id
    return obj


_JSONL_KEYS = {"id", "ungrammatical", "grammatical", "error_type", "source", "parent_id"}


def _pair_from_obj(obj: dict, ordinal: int) -> ParallelPair:
    if not isinstance(obj, dict):
        raise ValidationError("record is not a JSON object")
    unknown = set(obj) - _JSONL_KEYS
    if unknown:
        raise ValidationError(f"unknown fields: {', '.join(sorted(unknown))}")
    for key in ("ungrammatical", "grammatical"):
        if key not in obj:
            raise ValidationError(f"missing field: {key}")
        if not isinstance(obj[key], str):
            raise ValidationError(f"field {key} must be a string")
    error_type = None
    if obj.get("error_type") is not None:
        error_type = _parse_error_code(obj["error_type"])
    source = PairSource.HUMAN_ANNOTATED
    if obj.get("source") is not None:
        try:
            source = PairSource(obj["source"])
        except ValueError:
            raise ValidationError(f"unknown source: {obj['source']!r}") from None
    return ParallelPair(
        id=obj.get("id") or f"{ordinal:06d}",
        ungrammatical=obj["ungrammatical"],
        grammatical=obj["grammatical"],
        error_type=error_type,
        source=source,
        parent_id=obj.get("parent_id"),
    )


def _parse_error_code(code: object) -> ErrorType:
    try:
        return ErrorType(code)
    except ValueError:
        raise ValidationError(f"unknown error type code: {code!r}") from None


def load_pairs(path: str, format: str = "jsonl") -> list[ParallelPair]:
    """Load parallel pairs from a JSONL or TSV file.

    Records keep file order; missing ids are auto-assigned as zero-padded
    ordinals.  Malformed records raise :class:`InputFormatError` naming the
    offending line; duplicate ids are rejected.
    """
    _check_format(format)
    try:
        with open(path, encoding="utf-8") as handle:
            lines = handle.read().split("\n")
    except UnicodeDecodeError as exc:
        raise InputFormatError(f"{path}: not valid UTF-8 ({exc})") from exc

    pairs: list[ParallelPair] = []
    seen_ids: dict[str, int] = {}
    ordinal = 0
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            if format == "jsonl":
                try:
                    obj = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise ValidationError(f"invalid JSON: {exc}") from exc
                pair = _pair_from_obj(obj, ordinal)
            else:
                pair = _pair_from_tsv(line, ordinal)
        except ValidationError as exc:
            raise InputFormatError(f"{path}:{lineno}: {exc}") from exc
        if pair.id in seen_ids:
            raise InputFormatError(
                f"{path}:{lineno}: duplicate id {pair.id!r} "
                f"(first seen on line {seen_ids[pair.id]})"
            )
        seen_ids[pair.id] = lineno
        pairs.append(pair)
        ordinal += 1
    return pairs


def _pair_from_tsv(line: str, ordinal: int) -> ParallelPair:
    fields = line.split("\t")
    if len(fields) not in (2, 3):
        raise ValidationError(f"expected 2 or 3 tab-separated fields, got {len(fields)}")
    error_type = None
    if len(fields) == 3 and fields[2]:
        error_type = _parse_error_code(fields[2])
    return ParallelPair(
        id=f"{ordinal:06d}",
        ungrammatical=fields[0],
        grammatical=fields[1],
        error_type=error_type,
    )


def save_pairs(pairs: Sequence[ParallelPair], path: str, format: str = "jsonl") -> None:
    """Write pairs to ``path``; ``load_pairs`` round-trips the stored fields.

    TSV stores only (ungrammatical, grammatical, error_type); use JSONL to
    preserve id, source and parent_id.
    """
    _check_format(format)
    if format == "tsv":
        for pair in pairs:
            for text in (pair.ungrammatical, pair.grammatical):
                if "\t" in text or "\n" in text or "\r" in text:
                    raise ValidationError(
                        f"pair {pair.id}: sentence contains a tab or newline; "
                        "tsv cannot store it, use the jsonl format"
                    )
    with atomic_write(path) as handle:
        for pair in pairs:
            if format == "jsonl":
                handle.write(json.dumps(_pair_to_obj(pair), ensure_ascii=False))
            else:
                fields = [pair.ungrammatical, pair.grammatical]
                if pair.error_type is not None:
                    fields.append(pair.error_type.value)
                handle.write("\t".join(fields))
            handle.write("\n")


def _check_format(format: str) -> None:
    if format not in ("jsonl", "tsv"):
        raise ValidationError(f"unknown corpus format: {format!r} (expected jsonl or tsv)")


def compute_stats(pairs: Iterable[ParallelPair]) -> DatasetStats:
    """Count pairs per error type and derive half-up 2-decimal percentages.

    Pairs without a label are counted under the ``unlabeled`` bucket.
    Percentages are always derived from counts, never the reverse.
    """
    counts = {bucket: 0 for bucket in STAT_BUCKETS}
    total = 0
    for pair in pairs:
        bucket = pair.error_type.value if pair.error_type is not None else "unlabeled"
        counts[bucket] += 1
        total += 1
    per_type = {
        bucket: (counts[bucket], percentage(counts[bucket], total)) for bucket in STAT_BUCKETS
    }
    return DatasetStats(total=total, per_type=per_type)


def format_stats(stats: DatasetStats) -> str:
    """Human-readable statistics table."""
    lines = [f"{'type':<10} {'count':>7} {'percent':>8}"]
    for bucket, (count, pct) in stats.per_type.items():
        lines.append(f"{bucket:<10} {count:>7} {pct:>8.2f}")
    lines.append(f"{'total':<10} {stats.total:>7} {'':>8}")
    return "\n".join(lines)


def validate_pair_set(pairs: Sequence[ParallelPair]) -> dict[str, ParallelPair]:
    """Validate a pair list as a dataset: unique ids, resolvable parents.

    Returns the id -> pair index for convenience.
    """
    by_id: dict[str, ParallelPair] = {}
    for pair in pairs:
        if pair.id in by_id:
            raise ValidationError(f"duplicate pair id: {pair.id!r}")
        by_id[pair.id] = pair
    for pair in pairs:
        if pair.parent_id is not None and pair.parent_id not in by_id:
            raise ValidationError(
                f"pair {pair.id}: parent_id {pair.parent_id!r} not found in dataset"
            )
    return by_id
