"""Clue-rule corruption of grammatical sentences, plus generation prompts.

A clue rule pairs a corruption regex/template (grammatical -> ungrammatical)
with a repair regex/template that inverts it.  Rules only exist for the three
with-clues error types; synthesized pairs are round-trip checked and dropped
with a warning when repair does not recover the original byte-exact.

Replacement templates use $1..$9 for capture groups and $$ for a literal
dollar sign; everything else is literal text.
"""

from __future__ import annotations

import hashlib
import json
import logging
import re
from dataclasses import dataclass
from typing import Iterable, Sequence

from .corpus import ClueClass, ErrorType, PairSource, ParallelPair
from .errors import InputFormatError, ValidationError

logger = logging.getLogger(__name__)

_RULE_KEYS = (
    "id",
    "error_type",
    "corrupt_pattern",
    "corrupt_template",
    "repair_pattern",
    "repair_template",
)


@dataclass(frozen=True)
class ClueRule:
    """An invertible corruption rule for one with-clues error type."""

    id: str
    error_type: ErrorType
    corrupt_pattern: str
    corrupt_template: str
    repair_pattern: str
    repair_template: str

    def __post_init__(self) -> None:
        if not self.id:
            raise ValidationError("rule id must be non-empty")
        if self.error_type.clue_class is not ClueClass.WITH_CLUES:
            raise ValidationError(
                f"rule {self.id}: error type {self.error_type.value} has no clues; "
                "rules exist only for RC, SC, IC"
            )
        for name in ("corrupt_pattern", "repair_pattern"):
            pattern = getattr(self, name)
            try:
                compiled = re.compile(pattern)
            except re.error as exc:
                raise ValidationError(f"rule {self.id}: {name} does not compile: {exc}") from exc
            template = getattr(self, name.replace("_pattern", "_template"))
            for group in _template_groups(template):
                if group > compiled.groups:
                    raise ValidationError(
                        f"rule {self.id}: template references group ${group} "
                        f"but {name} has only {compiled.groups} group(s)"
                    )


def _template_groups(template: str) -> list[int]:
    # drop $$ escapes first so "$$1" is not taken for a group reference
    return [int(digit) for digit in re.findall(r"\$(\d)", template.replace("$$", ""))]


def _render_template(template: str, match: re.Match) -> str:
    out: list[str] = []
    i = 0
    while i < len(template):
        ch = template[i]
        if ch == "$" and i + 1 < len(template):
            nxt = template[i + 1]
            if nxt == "$":
                out.append("$")
                i += 2
                continue
            if nxt.isdigit():
                out.append(match.group(int(nxt)) or "")
                i += 2
                continue
        out.append(ch)
        i += 1
    return "".join(out)


def _substitute_first(pattern: str, template: str, text: str) -> str:
    """Replace the first match of ``pattern`` via template; no match -> unchanged."""
    match = re.search(pattern, text)
    if match is None:
        return text
    return text[: match.start()] + _render_template(template, match) + text[match.end() :]


def corrupt_once(rule: ClueRule, grammatical: str) -> str:
    """First-match corruption; returns the input unchanged when nothing matches."""
    return _substitute_first(rule.corrupt_pattern, rule.corrupt_template, grammatical)


def repair_once(rule: ClueRule, ungrammatical: str) -> str:
    """First-match repair; returns the input unchanged when nothing matches."""
    return _substitute_first(rule.repair_pattern, rule.repair_template, ungrammatical)


def _pair_id(rule: ClueRule, text: str, tag: str = "") -> str:
    digest = hashlib.sha1(text.encode("utf-8")).hexdigest()[:10]
    return f"{rule.id}{tag}-{digest}"


def apply_rule(rule: ClueRule, grammatical: str) -> ParallelPair | None:
    """Corrupt one grammatical sentence with a rule (first match only).

    Returns None when the rule does not match, when corruption is a no-op,
    or when the repair round-trip fails (logged as a warning).
    """
    corrupted = corrupt_once(rule, grammatical)
    if corrupted == grammatical:
        return None
    repaired = repair_once(rule, corrupted)
    if repaired != grammatical:
        logger.warning(
            "rule %s: repair round-trip failed, discarding pair for %r", rule.id, grammatical
        )
        return None
    return ParallelPair(
        id=_pair_id(rule, grammatical),
        ungrammatical=corrupted,
        grammatical=grammatical,
        error_type=rule.error_type,
        source=PairSource.RULE_SYNTHESIZED,
    )


def synthesize_corpus(
    rules: Sequence[ClueRule], sentences: Sequence[str], max_per_rule: int
) -> list[ParallelPair]:
    """Apply every rule to every sentence; cap per rule; dedup on ungrammatical text.

    Output order follows (rule order, sentence order).
    """
    if max_per_rule < 0:
        raise ValueError(f"max_per_rule must be >= 0, got {max_per_rule}")
    out: list[ParallelPair] = []
    seen: set[str] = set()
    for rule in rules:
        kept = 0
        for sentence in sentences:
            if kept >= max_per_rule:
                break
            pair = apply_rule(rule, sentence)
            if pair is None or pair.ungrammatical in seen:
                continue
            seen.add(pair.ungrammatical)
            out.append(pair)
            kept += 1
    return out


def load_rules(path: str) -> list[ClueRule]:
    """Load clue rules from a JSONL file (one rule object per line)."""
    rules: list[ClueRule] = []
    seen_ids: set[str] = set()
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise InputFormatError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
            if not isinstance(obj, dict):
                raise InputFormatError(f"{path}:{lineno}: rule is not a JSON object")
            missing = [key for key in _RULE_KEYS if key not in obj]
            if missing:
                raise InputFormatError(
                    f"{path}:{lineno}: missing fields: {', '.join(missing)}"
                )
            unknown = set(obj) - set(_RULE_KEYS)
            if unknown:
                raise InputFormatError(
                    f"{path}:{lineno}: unknown fields: {', '.join(sorted(unknown))}"
                )
            try:
                error_type = ErrorType(obj["error_type"])
            except ValueError:
                raise InputFormatError(
                    f"{path}:{lineno}: unknown error type {obj['error_type']!r}"
                ) from None
            try:
                rule = ClueRule(
                    id=obj["id"],
                    error_type=error_type,
                    corrupt_pattern=obj["corrupt_pattern"],
                    corrupt_template=obj["corrupt_template"],
                    repair_pattern=obj["repair_pattern"],
                    repair_template=obj["repair_template"],
                )
            except ValidationError as exc:
                raise InputFormatError(f"{path}:{lineno}: {exc}") from exc
            if rule.id in seen_ids:
                raise InputFormatError(f"{path}:{lineno}: duplicate rule id {rule.id!r}")
            seen_ids.add(rule.id)
            rules.append(rule)
    return rules


# Greedy numeral run after 超过: lazy matching would stop at the first
# numeral that doubles as a magnitude character (e.g. 百 inside 一百万).
_NUMERAL_RUN = "[零一二两三四五六七八九十百千万亿0-9]{1,8}"

STARTER_RULES: list[ClueRule] = [
    ClueRule(
        id="rc-exceed-about",
        error_type=ErrorType.RC,
        corrupt_pattern=f"超过({_NUMERAL_RUN})",
        corrupt_template="超过$1左右",
        repair_pattern=f"超过({_NUMERAL_RUN})左右",
        repair_template="超过$1",
    ),
    ClueRule(
        id="sc-cause-by",
        error_type=ErrorType.SC,
        corrupt_pattern="原因是(.{1,20}?)。",
        corrupt_template="原因是由$1引起的。",
        repair_pattern="原因是由(.{1,20}?)引起的。",
        repair_template="原因是$1。",
    ),
    ClueRule(
        id="ic-accelerate-pace",
        error_type=ErrorType.IC,
        corrupt_pattern="加快(.{0,20}?步伐)",
        corrupt_template="提升$1",
        repair_pattern="提升(.{0,20}?步伐)",
        repair_template="加快$1",
    ),
]

# Clue string pairs whose joint presence signals each starter rule's error.
STARTER_CLUES: dict[str, tuple[str, str]] = {
    "rc-exceed-about": ("超过", "左右"),
    "sc-cause-by": ("原因是", "引起的"),
    "ic-accelerate-pace": ("提升", "步伐"),
}


@dataclass(frozen=True)
class CluePrompt:
    """A rendered generation prompt carrying both clue strings verbatim."""

    error_type: ErrorType
    clue_pair: tuple[str, str]
    n_samples: int
    rendered: str

    def __post_init__(self) -> None:
        for clue in self.clue_pair:
            if clue not in self.rendered:
                raise ValidationError(f"rendered prompt does not contain clue {clue!r}")


DEFAULT_PROMPT_TEMPLATE = (
    "请构造{n}个含有语法错误的中文病句。要求：每个句子必须同时使用"
    "“{clue_a}”和“{clue_b}”这两个表达，使句子构成{error_type}类型的语病；"
    "句子题材各不相同，长度在15到40字之间。"
    "每行输出一个句子，使用“1. ”这样的编号，不要输出任何解释。"
)


def build_prompt(
    error_type: ErrorType,
    clue_pair: tuple[str, str],
    n_samples: int,
    template: str | None = None,
) -> CluePrompt:
    """Render the generation prompt for one clue pair.

    The template may reference {clue_a}, {clue_b}, {error_type} and {n};
    rendering is deterministic.
    """
    if error_type.clue_class is not ClueClass.WITH_CLUES:
        raise ValidationError(
            f"error type {error_type.value} has no clues; prompts exist only for RC, SC, IC"
        )
    if n_samples < 1:
        raise ValueError(f"n_samples must be >= 1, got {n_samples}")
    clue_a, clue_b = clue_pair
    if not clue_a or not clue_b:
        raise ValidationError("both clue strings must be non-empty")
    template = template if template is not None else DEFAULT_PROMPT_TEMPLATE
    try:
        rendered = template.format(
            clue_a=clue_a,
            clue_b=clue_b,
            error_type=f"{error_type.chinese_label}({error_type.value})",
            n=n_samples,
        )
    except (KeyError, IndexError, ValueError) as exc:
        raise ValidationError(f"bad prompt template: {exc}") from exc
    return CluePrompt(
        error_type=error_type,
        clue_pair=(clue_a, clue_b),
        n_samples=n_samples,
        rendered=rendered,
    )


def load_sentences(path: str) -> list[str]:
    """Load a seed-sentence file: one non-empty sentence per line, UTF-8."""
    sentences: list[str] = []
    with open(path, encoding="utf-8") as handle:
        for line in handle:
            sentence = line.rstrip("\n").rstrip("\r")
            if sentence:
                sentences.append(sentence)
    return sentences


def find_rule_for_clues(
    clue_pair: tuple[str, str], rules: Iterable[ClueRule] | None = None
) -> ClueRule:
    """Find the first rule whose repair pattern literally contains both clues."""
    clue_a, clue_b = clue_pair
    candidates = STARTER_RULES if rules is None else rules
    for rule in candidates:
        if clue_a in rule.repair_pattern and clue_b in rule.repair_pattern:
            return rule
    raise ValidationError(f"no repair rule matches clue pair ({clue_a!r}, {clue_b!r})")
