"""Render parallel pairs into four-component instruction records.

A record is a fixed prefix, a task description, the ungrammatical input and
the grammatical output, laid out by a template.  The prompt is everything
rendered before the output slot; the completion is the grammatical sentence,
byte-exact.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from typing import Sequence

from ._util import atomic_write
from .corpus import ParallelPair
from .errors import ValidationError

DEFAULT_TASK_PREFIX = (
    "A chat between a curious human and an artificial intelligence assistant. "
    "The assistant gives helpful, detailed, and polite answers to the human's questions."
)
DEFAULT_TASK_DESCRIPTION = "Evaluate this sentence for grammar mistake"
DEFAULT_LAYOUT = "{prefix}\n\nHuman: {description} {input}\nAssistant: {output}"

_SLOTS = ("{prefix}", "{description}", "{input}", "{output}")

FORMATS = ("prompt_completion_jsonl", "conversation_jsonl")


@dataclass(frozen=True)
class InstructionTemplate:
    """Prefix and description texts plus the layout holding the four slots.

    The layout must contain {prefix}, {description}, {input} and {output}
    exactly once each, with {output} last so the prompt/completion split is
    well defined.
    """

    task_prefix: str = DEFAULT_TASK_PREFIX
    task_description: str = DEFAULT_TASK_DESCRIPTION
    layout: str = DEFAULT_LAYOUT

    def __post_init__(self) -> None:
        for slot in _SLOTS:
            count = self.layout.count(slot)
            if count != 1:
                raise ValidationError(
                    f"layout must contain {slot} exactly once, found {count}"
                )
        if not self.layout.endswith("{output}"):
            raise ValidationError("layout must end with the {output} slot")

    @classmethod
    def load(cls, path: str) -> "InstructionTemplate":
        """Load a template from a JSON file; missing keys fall back to defaults."""
        with open(path, encoding="utf-8") as handle:
            try:
                obj = json.load(handle)
            except json.JSONDecodeError as exc:
                raise ValidationError(f"{path}: invalid JSON: {exc}") from exc
        if not isinstance(obj, dict):
            raise ValidationError(f"{path}: template file must hold a JSON object")
        unknown = set(obj) - {"task_prefix", "task_description", "layout"}
        if unknown:
            raise ValidationError(f"{path}: unknown template fields: {', '.join(sorted(unknown))}")
        return cls(
            task_prefix=obj.get("task_prefix", DEFAULT_TASK_PREFIX),
            task_description=obj.get("task_description", DEFAULT_TASK_DESCRIPTION),
            layout=obj.get("layout", DEFAULT_LAYOUT),
        )


@dataclass(frozen=True)
class InstructionRecord:
    """One fine-tuning record; completion is the grammatical sentence exactly."""

    id: str
    prompt: str
    completion: str
    pair_id: str


def render_instruction(pair: ParallelPair, template: InstructionTemplate) -> InstructionRecord:
    """Deterministically render one pair through the template."""
    values = {
        "{prefix}": template.task_prefix,
        "{description}": template.task_description,
        "{input}": pair.ungrammatical,
    }
    # Single pass over the layout so slot-like text inside substituted values
    # is never re-expanded.
    prompt_layout = template.layout[: -len("{output}")]
    parts = re.split(r"(\{prefix\}|\{description\}|\{input\})", prompt_layout)
    prompt = "".join(values.get(part, part) for part in parts)
    return InstructionRecord(
        id=pair.id,
        prompt=prompt,
        completion=pair.grammatical,
        pair_id=pair.id,
    )


def render_text(pair: ParallelPair, template: InstructionTemplate) -> str:
    """The full rendered instruction (prompt + completion) as one string."""
    record = render_instruction(pair, template)
    return record.prompt + record.completion


def _record_obj(
    pair: ParallelPair,
    record: InstructionRecord,
    format: str,
    template: InstructionTemplate,
) -> dict:
    if format == "prompt_completion_jsonl":
        return {
            "id": record.id,
            "prompt": record.prompt,
            "completion": record.completion,
            "pair_id": record.pair_id,
        }
    # The conversation schema maps the template parts onto chat roles and
    # ignores the flat layout string.
    return {
        "id": record.id,
        "messages": [
            {"role": "system", "content": template.task_prefix},
            {"role": "user", "content": f"{template.task_description} {pair.ungrammatical}"},
            {"role": "assistant", "content": record.completion},
        ],
        "pair_id": record.pair_id,
    }


def emit_dataset(
    pairs: Sequence[ParallelPair],
    template: InstructionTemplate,
    path: str,
    format: str = "prompt_completion_jsonl",
) -> int:
    """Write one JSONL record per pair; returns the number written."""
    if format not in FORMATS:
        raise ValidationError(f"unknown dataset format: {format!r} (expected one of {FORMATS})")
    count = 0
    with atomic_write(path) as handle:
        for pair in pairs:
            record = render_instruction(pair, template)
            obj = _record_obj(pair, record, format, template)
            handle.write(json.dumps(obj, ensure_ascii=False))
            handle.write("\n")
            count += 1
    return count
