"""MaxMatch evaluation: multi-annotator gold comparison and P/R/F0.5.

Per sentence, system edits (extracted from source vs hypothesis) are matched
against each gold annotator's edit set; the annotator that maximizes the
cumulative F0.5 is credited.  Empty denominators score 1.0 (vacuous
precision/recall convention, declared in the report header).
"""

from __future__ import annotations

import json
import unicodedata
from collections import Counter
from dataclasses import dataclass
from typing import Mapping, Sequence, TextIO

from ._util import atomic_write, ratio_pct
from .errors import InputFormatError, ValidationError
from .edits import CHAR, Edit, Granularity, extract_edits, segment

NO_ERROR_MARKER = "-NONE-"

VACUOUS_CONVENTION = "empty denominators score 1.0 (vacuous precision/recall)"

# Default M2 type labels by edit kind: missing / unnecessary / replacement.
_KIND_LABELS = {"insert": "M", "delete": "U", "substitute": "R"}


@dataclass(frozen=True)
class GoldAnnotation:
    """One annotator's edit set for one source sentence.

    An empty edit list is a valid "no error" annotation.  ``edit_types``
    preserves the M2 type labels; they play no role in matching.
    """

    sentence_id: str
    annotator_id: int
    edits: tuple[Edit, ...]
    edit_types: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        if self.annotator_id < 0:
            raise ValidationError(f"annotator id must be >= 0, got {self.annotator_id}")
        object.__setattr__(self, "edits", tuple(self.edits))
        _check_sorted_disjoint(self.edits, f"gold for sentence {self.sentence_id}")
        if self.edit_types is not None:
            object.__setattr__(self, "edit_types", tuple(self.edit_types))
            if len(self.edit_types) != len(self.edits):
                raise ValidationError(
                    f"gold for sentence {self.sentence_id}: "
                    "edit_types length differs from edits"
                )


@dataclass(frozen=True)
class SentenceScore:
    sentence_id: str
    annotator_id: int
    tp: int
    fp: int
    fn: int


@dataclass(frozen=True)
class ScoreReport:
    """Corpus totals plus the per-sentence annotator choices behind them."""

    tp: int
    fp: int
    fn: int
    granularity: Granularity
    per_sentence: tuple[SentenceScore, ...]

    @property
    def precision(self) -> float:
        return _ratio(self.tp, self.tp + self.fp)

    @property
    def recall(self) -> float:
        return _ratio(self.tp, self.tp + self.fn)

    @property
    def f_half(self) -> float:
        return f_beta(self.precision, self.recall, 0.5)

    def as_dict(self) -> dict:
        return {
            "granularity": self.granularity.mode,
            "convention": VACUOUS_CONVENTION,
            "tp": self.tp,
            "fp": self.fp,
            "fn": self.fn,
            "precision": self.precision,
            "recall": self.recall,
            "f0.5": self.f_half,
            "precision_pct": ratio_pct(self.precision),
            "recall_pct": ratio_pct(self.recall),
            "f0.5_pct": ratio_pct(self.f_half),
            "per_sentence": [
                {
                    "sentence_id": s.sentence_id,
                    "annotator_id": s.annotator_id,
                    "tp": s.tp,
                    "fp": s.fp,
                    "fn": s.fn,
                }
                for s in self.per_sentence
            ],
        }


def _ratio(num: int, den: int) -> float:
    return 1.0 if den == 0 else num / den


def f_beta(precision: float, recall: float, beta: float) -> float:
    """(1+b^2)PR / (b^2 P + R), or 0 when the denominator is 0."""
    if beta <= 0:
        raise ValueError(f"beta must be positive, got {beta}")
    if not (0 <= precision <= 1 and 0 <= recall <= 1):
        raise ValueError("precision and recall must lie in [0, 1]")
    b2 = beta * beta
    denominator = b2 * precision + recall
    if denominator == 0:
        return 0.0
    return (1 + b2) * precision * recall / denominator


def _check_sorted_disjoint(edits: Sequence[Edit], what: str) -> None:
    prev_end = -1
    prev_start = -1
    for edit in edits:
        if edit.start < prev_start or edit.start < prev_end:
            raise ValidationError(f"{what}: edits must be sorted and non-overlapping")
        prev_start, prev_end = edit.start, edit.end


def _match_key(edit: Edit) -> tuple[int, int, str]:
    # NFC-normalize replacements so composed/decomposed forms compare equal.
    return (edit.start, edit.end, unicodedata.normalize("NFC", edit.replacement))


def match_edits(system: Sequence[Edit], gold: Sequence[Edit]) -> tuple[int, int, int]:
    """(tp, fp, fn) under exact (start, end, replacement) matching."""
    _check_sorted_disjoint(system, "system edits")
    _check_sorted_disjoint(gold, "gold edits")
    gold_keys = Counter(_match_key(e) for e in gold)
    system_keys = Counter(_match_key(e) for e in system)
    tp = sum(min(count, gold_keys[key]) for key, count in system_keys.items())
    return tp, len(system) - tp, len(gold) - tp


def select_reference(
    per_annotator: Sequence[tuple[int, int, int, int]],
    cumulative: tuple[int, int, int],
) -> int:
    """Pick the annotator maximizing cumulative F0.5 after this sentence.

    Ties break toward larger sentence tp, then smaller annotator id.
    """
    if not per_annotator:
        raise ValueError("at least one annotator required")
    cum_tp, cum_fp, cum_fn = cumulative

    def goodness(entry: tuple[int, int, int, int]) -> tuple[float, int, int]:
        annotator_id, tp, fp, fn = entry
        p = _ratio(cum_tp + tp, cum_tp + tp + cum_fp + fp)
        r = _ratio(cum_tp + tp, cum_tp + tp + cum_fn + fn)
        return (f_beta(p, r, 0.5), tp, -annotator_id)

    return max(per_annotator, key=goodness)[0]


def score_corpus(
    sources: Sequence[str],
    hypotheses: Sequence[str],
    gold: Mapping[str, Sequence[GoldAnnotation]],
    granularity: Granularity,
    ids: Sequence[str] | None = None,
) -> ScoreReport:
    """Score a corpus of hypotheses against multi-annotator gold edits.

    Sources and hypotheses align by index; sentence ids default to "0", "1",
    ... matching :func:`read_m2`.  Reference selection runs in file order, so
    corpus order is part of the contract.
    """
    if len(sources) != len(hypotheses):
        raise ValidationError(
            f"length mismatch: {len(sources)} sources vs {len(hypotheses)} hypotheses"
        )
    if ids is None:
        ids = [str(i) for i in range(len(sources))]
    elif len(ids) != len(sources):
        raise ValidationError(f"length mismatch: {len(ids)} ids vs {len(sources)} sources")

    totals = (0, 0, 0)
    per_sentence: list[SentenceScore] = []
    for sentence_id, source, hypothesis in zip(ids, sources, hypotheses):
        annotations = gold.get(sentence_id)
        if not annotations:
            raise ValidationError(f"no gold annotation for sentence id {sentence_id!r}")
        system_edits = extract_edits(source, hypothesis, granularity)
        per_annotator = [
            (ann.annotator_id, *match_edits(system_edits, ann.edits)) for ann in annotations
        ]
        chosen = select_reference(per_annotator, totals)
        tp, fp, fn = next(
            (t, f, n) for aid, t, f, n in per_annotator if aid == chosen
        )
        totals = (totals[0] + tp, totals[1] + fp, totals[2] + fn)
        per_sentence.append(SentenceScore(sentence_id, chosen, tp, fp, fn))
    return ScoreReport(
        tp=totals[0],
        fp=totals[1],
        fn=totals[2],
        granularity=granularity,
        per_sentence=tuple(per_sentence),
    )


def format_report(report: ScoreReport) -> str:
    """Human-readable score table with the convention header."""
    lines = [
        f"granularity   {report.granularity.mode}",
        f"convention    {VACUOUS_CONVENTION}",
        f"tp/fp/fn      {report.tp}/{report.fp}/{report.fn}",
        f"precision     {ratio_pct(report.precision):.2f}",
        f"recall        {ratio_pct(report.recall):.2f}",
        f"F0.5          {ratio_pct(report.f_half):.2f}",
    ]
    return "\n".join(lines)


def read_m2(path: str) -> tuple[list[str], dict[str, list[GoldAnnotation]]]:
    """Parse an M2 gold file into sources and per-sentence annotations.

    Blocks are "S " + source followed by "A " edit lines and a blank line;
    sentence ids are block ordinals "0", "1", ...  A correction of -NONE-
    marks a no-error annotation; a block without edit lines gets annotator 0
    with an empty edit set.
    """
    sources: list[str] = []
    gold: dict[str, list[GoldAnnotation]] = {}
    # annotator -> (edits, types) or None for an explicit no-error annotation
    block_edits: dict[int, list[tuple[Edit, str]] | None] = {}
    block_source: str | None = None

    def close_block() -> None:
        nonlocal block_source, block_edits
        if block_source is None:
            return
        sentence_id = str(len(sources))
        annotations = []
        if not block_edits:
            block_edits[0] = None
        for annotator_id, collected in block_edits.items():
            if collected is None:
                annotations.append(GoldAnnotation(sentence_id, annotator_id, ()))
            else:
                ordered = sorted(collected, key=lambda item: (item[0].start, item[0].end))
                annotations.append(
                    GoldAnnotation(
                        sentence_id,
                        annotator_id,
                        tuple(edit for edit, _ in ordered),
                        tuple(label for _, label in ordered),
                    )
                )
        sources.append(block_source)
        gold[sentence_id] = annotations
        block_source, block_edits = None, {}

    with open(path, encoding="utf-8") as handle:
        for lineno, raw in enumerate(handle, start=1):
            line = raw.rstrip("\n").rstrip("\r")
            if not line:
                close_block()
                continue
            if line.startswith("S "):
                if block_source is not None:
                    raise InputFormatError(
                        f"{path}:{lineno}: source line inside an open block "
                        "(missing blank separator)"
                    )
                block_source = line[2:]
                continue
            if not line.startswith("A "):
                raise InputFormatError(f"{path}:{lineno}: expected S/A/blank line")
            if block_source is None:
                raise InputFormatError(f"{path}:{lineno}: edit line before any source line")
            try:
                annotator_id, parsed = _parse_edit_line(line[2:])
            except ValidationError as exc:
                raise InputFormatError(f"{path}:{lineno}: {exc}") from exc
            existing = block_edits.get(annotator_id, [])
            if parsed is None:
                if existing:
                    raise InputFormatError(
                        f"{path}:{lineno}: annotator {annotator_id} mixes "
                        f"{NO_ERROR_MARKER} with real edits"
                    )
                block_edits[annotator_id] = None
            else:
                if existing is None:
                    raise InputFormatError(
                        f"{path}:{lineno}: annotator {annotator_id} mixes "
                        f"{NO_ERROR_MARKER} with real edits"
                    )
                existing.append(parsed)
                block_edits[annotator_id] = existing
    close_block()
    return sources, gold


def _parse_edit_line(body: str) -> tuple[int, tuple[Edit, str] | None]:
    fields = body.split("|||")
    if len(fields) != 6:
        raise ValidationError(f"expected 6 |||-separated fields, got {len(fields)}")
    span, type_label, correction, _required, _none, annotator = fields
    span_parts = span.split()
    if len(span_parts) != 2:
        raise ValidationError(f"bad edit span: {span!r}")
    try:
        start, end = int(span_parts[0]), int(span_parts[1])
    except ValueError:
        raise ValidationError(f"bad edit span: {span!r}") from None
    try:
        annotator_id = int(annotator)
    except ValueError:
        raise ValidationError(f"bad annotator id: {annotator!r}") from None
    if annotator_id < 0:
        raise ValidationError(f"annotator id must be >= 0, got {annotator_id}")
    if correction == NO_ERROR_MARKER:
        return annotator_id, None
    if start < 0 or end < start:
        raise ValidationError(f"bad edit span: {span!r}")
    return annotator_id, (Edit(start, end, correction), type_label)


def write_m2(
    sources: Sequence[str],
    gold: Mapping[str, Sequence[GoldAnnotation]],
    path_or_file: str | TextIO,
    ids: Sequence[str] | None = None,
) -> None:
    """Write sources and annotations in the M2 gold format read by read_m2."""
    if ids is None:
        ids = [str(i) for i in range(len(sources))]
    elif len(ids) != len(sources):
        raise ValidationError(f"length mismatch: {len(ids)} ids vs {len(sources)} sources")
    if isinstance(path_or_file, str):
        with atomic_write(path_or_file) as handle:
            _write_m2_blocks(sources, gold, ids, handle)
    else:
        _write_m2_blocks(sources, gold, ids, path_or_file)


def _write_m2_blocks(
    sources: Sequence[str],
    gold: Mapping[str, Sequence[GoldAnnotation]],
    ids: Sequence[str],
    handle: TextIO,
) -> None:
    for sentence_id, source in zip(ids, sources):
        annotations = gold.get(sentence_id)
        if not annotations:
            raise ValidationError(f"no gold annotation for sentence id {sentence_id!r}")
        handle.write(f"S {source}\n")
        for ann in annotations:
            if not ann.edits:
                handle.write(
                    f"A -1 -1|||noop|||{NO_ERROR_MARKER}|||REQUIRED|||-NONE-|||"
                    f"{ann.annotator_id}\n"
                )
                continue
            for index, edit in enumerate(ann.edits):
                label = (
                    ann.edit_types[index]
                    if ann.edit_types is not None
                    else _KIND_LABELS[edit.kind]
                )
                handle.write(
                    f"A {edit.start} {edit.end}|||{label}|||{edit.replacement}"
                    f"|||REQUIRED|||-NONE-|||{ann.annotator_id}\n"
                )
        handle.write("\n")


def annotate_corpus(
    sources: Sequence[str],
    targets: Sequence[str],
    granularity: Granularity,
    annotator_id: int = 0,
) -> tuple[list[str], dict[str, list[GoldAnnotation]]]:
    """Extract edits per (source, target) pair into single-annotator gold.

    Returns M2-ready sources: word-level sources are re-emitted space-joined
    so the gold file is self-describing.
    """
    if len(sources) != len(targets):
        raise ValidationError(
            f"length mismatch: {len(sources)} sources vs {len(targets)} targets"
        )
    out_sources: list[str] = []
    gold: dict[str, list[GoldAnnotation]] = {}
    for index, (source, target) in enumerate(zip(sources, targets)):
        sentence_id = str(index)
        edits = extract_edits(source, target, granularity)
        if granularity.mode == CHAR:
            out_sources.append(source)
        else:
            out_sources.append(" ".join(t.surface for t in segment(source, granularity)))
        gold[sentence_id] = [GoldAnnotation(sentence_id, annotator_id, tuple(edits))]
    return out_sources, gold
