"""Command-line pipeline: synthesize, generate, augment, build-instructions,
extract-edits, score, stats.

Exit codes: 0 success, 1 validation error (including bad flags), 2 I/O or
network error.  Diagnostics go to stderr; data goes to stdout or files, and
output files are written atomically (temp + rename).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from typing import Callable, Sequence, TextIO

from .augment import EntityLexicon, augment_corpus
from .corpus import (
    ErrorType,
    compute_stats,
    format_stats,
    load_pairs,
    save_pairs,
)
from .edits import Granularity, load_lexicon
from .errors import (
    CgecError,
    ConfigurationError,
    InputFormatError,
    TransportError,
    ValidationError,
)
from .instructions import FORMATS, InstructionTemplate, emit_dataset
from .llm import GenerationRequest, generate_many, validate_generated
from .scorer import annotate_corpus, format_report, read_m2, score_corpus, write_m2
from .synthesis import (
    STARTER_RULES,
    build_prompt,
    load_rules,
    load_sentences,
    synthesize_corpus,
)

# Default RNG seed for augmentation and any other seeded subcommand.
DEFAULT_SEED = 42

logger = logging.getLogger(__name__)

# Config-file keys (flat key=value) and how to coerce their string values.
_CONFIG_KEYS: dict[str, Callable[[str], object]] = {
    "seed": int,
    "factor": int,
    "granularity": str,
    "max_per_rule": int,
    "endpoint": str,
    "model": str,
    "temperature": float,
    "max_tokens": int,
    "cache_dir": str,
    "concurrency": int,
    "n_samples": int,
    "lexicon": str,
    "rules": str,
}


def _build_parser() -> tuple[argparse.ArgumentParser, list[argparse.ArgumentParser]]:
    parser = argparse.ArgumentParser(
        prog="cgec",
        description="Chinese grammatical error correction data pipeline and scorer.",
    )
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--config", help="flat key=value file supplying flag defaults")
    subcommands = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    # subparsers are collected so config-file defaults can be applied to the
    # parser that actually fills the namespace
    built: list[argparse.ArgumentParser] = []

    def add_subcommand(*args, **kwargs) -> argparse.ArgumentParser:
        p = subcommands.add_parser(*args, **kwargs)
        built.append(p)
        return p

    p = add_subcommand(
        "synthesize", parents=[shared], help="corrupt grammatical sentences via clue rules"
    )
    p.add_argument("--sentences", required=True, help="seed sentences, one per line")
    p.add_argument("--rules", help="clue rule JSONL file (default: shipped starter rules)")
    p.add_argument("--output", required=True, help="output pair file")
    p.add_argument("--max-per-rule", type=int, default=50, dest="max_per_rule")
    p.add_argument("--format", choices=["jsonl", "tsv"], default="jsonl")
    p.set_defaults(func=_cmd_synthesize)

    p = add_subcommand(
        "generate", parents=[shared], help="LLM-generate ungrammatical sentences from clues"
    )
    p.add_argument("--error-type", choices=["RC", "SC", "IC"], dest="error_type")
    p.add_argument("--clue-a", dest="clue_a")
    p.add_argument("--clue-b", dest="clue_b")
    p.add_argument("--clue-file", dest="clue_file",
                   help="TSV rows: error_type <TAB> clue_a <TAB> clue_b")
    p.add_argument("--n-samples", type=int, default=5, dest="n_samples")
    p.add_argument("--model", default="gpt-3.5-turbo")
    p.add_argument("--temperature", type=float, default=1.0)
    p.add_argument("--max-tokens", type=int, default=512, dest="max_tokens")
    p.add_argument("--endpoint", help="chat-completion base URL")
    p.add_argument("--cache-dir", default=".cgec-cache", dest="cache_dir")
    p.add_argument("--concurrency", type=int, default=4)
    p.add_argument("--rules", help="repair rules JSONL (default: shipped starter rules)")
    p.add_argument("--prompt-template", dest="prompt_template",
                   help="file with a {clue_a}/{clue_b}/{error_type}/{n} template")
    p.add_argument("--output", required=True)
    p.set_defaults(func=_cmd_generate)

    p = add_subcommand(
        "augment", parents=[shared], help="error-invariant entity substitution"
    )
    p.add_argument("--pairs", required=True)
    p.add_argument("--lexicon", help="entity TSV: entity <TAB> substitutes... "
                                     "(flag or config)")
    p.add_argument("--factor", type=int, default=1)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--output", required=True)
    p.set_defaults(func=_cmd_augment)

    p = add_subcommand(
        "build-instructions", parents=[shared], help="emit instruction-tuning records"
    )
    p.add_argument("--pairs", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--format", choices=list(FORMATS), default="prompt_completion_jsonl")
    p.add_argument("--template", help="JSON template file (task_prefix/task_description/layout)")
    p.set_defaults(func=_cmd_build_instructions)

    p = add_subcommand(
        "extract-edits", parents=[shared], help="extract edits into M2 gold format"
    )
    p.add_argument("--source", help="source sentences, one per line")
    p.add_argument("--target", help="target sentences, one per line")
    p.add_argument("--pairs", help="pair file to use instead of --source/--target")
    p.add_argument("--granularity", choices=["char", "word"], default="char")
    p.add_argument("--lexicon", help="word list for word-level segmentation")
    p.add_argument("--output", help="output M2 file (default: stdout)")
    p.set_defaults(func=_cmd_extract_edits)

    p = add_subcommand("score", parents=[shared], help="MaxMatch P/R/F0.5 scoring")
    p.add_argument("--source", help="source sentences (default: S lines of the gold file)")
    p.add_argument("--hypothesis", required=True)
    p.add_argument("--gold", required=True, help="gold edits in M2 format")
    p.add_argument("--granularity", choices=["char", "word"], default="char")
    p.add_argument("--lexicon", help="word list for word-level segmentation")
    p.add_argument("--json", action="store_true", help="emit the report as JSON")
    p.set_defaults(func=_cmd_score)

    p = add_subcommand("stats", parents=[shared], help="dataset statistics")
    p.add_argument("--pairs", required=True)
    p.add_argument("--format", choices=["jsonl", "tsv"], default="jsonl")
    p.add_argument("--json", action="store_true", help="emit statistics as JSON")
    p.set_defaults(func=_cmd_stats)
    return parser, built


def _load_config(path: str) -> dict[str, object]:
    values: dict[str, object] = {}
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise InputFormatError(f"{path}:{lineno}: expected key=value")
            key, _, value = line.partition("=")
            key = key.strip().replace("-", "_")
            if key not in _CONFIG_KEYS:
                raise ConfigurationError(f"{path}:{lineno}: unknown config key {key!r}")
            try:
                values[key] = _CONFIG_KEYS[key](value.strip())
            except ValueError as exc:
                raise ConfigurationError(f"{path}:{lineno}: bad value for {key}: {exc}") from exc
            if key == "granularity" and values[key] not in ("char", "word"):
                raise ConfigurationError(
                    f"{path}:{lineno}: granularity must be char or word"
                )
    return values


def _read_sentence_lines(path: str) -> list[str]:
    sentences = []
    with open(path, encoding="utf-8") as handle:
        lines = handle.read().split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    for lineno, line in enumerate(lines, start=1):
        line = line.rstrip("\r")
        if not line:
            raise InputFormatError(f"{path}:{lineno}: empty sentence line")
        sentences.append(line)
    return sentences


def _granularity(args: argparse.Namespace) -> Granularity:
    if args.granularity == "word":
        lexicon = load_lexicon(args.lexicon) if args.lexicon else None
        return Granularity.word(lexicon)
    return Granularity.char()


def _cmd_synthesize(args: argparse.Namespace) -> int:
    rules = load_rules(args.rules) if args.rules else STARTER_RULES
    sentences = load_sentences(args.sentences)
    pairs = synthesize_corpus(rules, sentences, args.max_per_rule)
    save_pairs(pairs, args.output, args.format)
    print(f"wrote {len(pairs)} pairs to {args.output}", file=sys.stderr)
    return 0


def _cmd_generate(args: argparse.Namespace) -> int:
    if not args.endpoint:
        raise ConfigurationError("generate needs --endpoint (flag or config)")
    rules = load_rules(args.rules) if args.rules else None
    template = None
    if args.prompt_template:
        with open(args.prompt_template, encoding="utf-8") as handle:
            template = handle.read()

    rows: list[tuple[ErrorType, str, str]] = []
    if args.clue_file:
        with open(args.clue_file, encoding="utf-8") as handle:
            for lineno, line in enumerate(handle, start=1):
                line = line.rstrip("\n").rstrip("\r")
                if not line:
                    continue
                fields = line.split("\t")
                if len(fields) != 3:
                    raise InputFormatError(
                        f"{args.clue_file}:{lineno}: expected error_type, clue_a, clue_b"
                    )
                try:
                    rows.append((ErrorType(fields[0]), fields[1], fields[2]))
                except ValueError:
                    raise InputFormatError(
                        f"{args.clue_file}:{lineno}: unknown error type {fields[0]!r}"
                    ) from None
    elif args.error_type and args.clue_a and args.clue_b:
        rows.append((ErrorType(args.error_type), args.clue_a, args.clue_b))
    else:
        raise ConfigurationError(
            "generate needs --clue-file or all of --error-type/--clue-a/--clue-b"
        )

    requests_batch = [
        GenerationRequest(
            prompt=build_prompt(error_type, (clue_a, clue_b), args.n_samples, template),
            model_name=args.model,
            temperature=args.temperature,
            max_tokens=args.max_tokens,
        )
        for error_type, clue_a, clue_b in rows
    ]
    credentials = os.environ.get("CGEC_API_KEY")
    results = generate_many(
        requests_batch,
        args.endpoint,
        credentials,
        args.cache_dir,
        max_concurrency=args.concurrency,
    )
    pairs = []
    seen_ids: set[str] = set()
    for (_, clue_a, clue_b), result in zip(rows, results):
        for pair in validate_generated(result.parsed_sentences, (clue_a, clue_b), rules):
            if pair.id not in seen_ids:
                seen_ids.add(pair.id)
                pairs.append(pair)
    save_pairs(pairs, args.output, "jsonl")
    hits = sum(1 for r in results if r.cache_hit)
    print(
        f"wrote {len(pairs)} pairs to {args.output} "
        f"({len(results)} requests, {hits} cache hits)",
        file=sys.stderr,
    )
    return 0


def _cmd_augment(args: argparse.Namespace) -> int:
    if not args.lexicon:
        raise ConfigurationError("augment needs --lexicon (flag or config)")
    pairs = load_pairs(args.pairs)
    lexicon = EntityLexicon.load(args.lexicon)
    augmented = augment_corpus(pairs, lexicon, args.factor, args.seed)
    save_pairs(augmented, args.output, "jsonl")
    print(f"wrote {len(augmented)} augmented pairs to {args.output}", file=sys.stderr)
    return 0


def _cmd_build_instructions(args: argparse.Namespace) -> int:
    pairs = load_pairs(args.pairs)
    template = InstructionTemplate.load(args.template) if args.template else InstructionTemplate()
    count = emit_dataset(pairs, template, args.output, args.format)
    print(f"wrote {count} records to {args.output}", file=sys.stderr)
    return 0


def _cmd_extract_edits(args: argparse.Namespace) -> int:
    if args.pairs:
        pairs = load_pairs(args.pairs)
        sources = [p.ungrammatical for p in pairs]
        targets = [p.grammatical for p in pairs]
    elif args.source and args.target:
        sources = _read_sentence_lines(args.source)
        targets = _read_sentence_lines(args.target)
    else:
        raise ConfigurationError("extract-edits needs --pairs or both --source and --target")
    granularity = _granularity(args)
    m2_sources, gold = annotate_corpus(sources, targets, granularity)
    if args.output:
        write_m2(m2_sources, gold, args.output)
    else:
        write_m2(m2_sources, gold, sys.stdout)
    return 0


def _cmd_score(args: argparse.Namespace) -> int:
    hypotheses = _read_sentence_lines(args.hypothesis)
    m2_sources, gold = read_m2(args.gold)
    sources = _read_sentence_lines(args.source) if args.source else m2_sources
    report = score_corpus(sources, hypotheses, gold, _granularity(args))
    if args.json:
        print(json.dumps(report.as_dict(), ensure_ascii=False, indent=2))
    else:
        print(format_report(report))
    return 0


def _cmd_stats(args: argparse.Namespace) -> int:
    pairs = load_pairs(args.pairs, args.format)
    stats = compute_stats(pairs)
    if args.json:
        print(json.dumps(stats.as_dict(), ensure_ascii=False, indent=2))
    else:
        print(format_stats(stats))
    return 0


def run(argv: Sequence[str]) -> int:
    """Parse arguments, dispatch, and map errors to exit codes."""
    logging.basicConfig(stream=sys.stderr, format="%(levelname)s: %(message)s")
    parser, _ = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 1
    try:
        if args.config:
            defaults = _load_config(args.config)
            parser, subparsers = _build_parser()
            for subparser in subparsers:
                subparser.set_defaults(**defaults)
            try:
                args = parser.parse_args(argv)
            except SystemExit as exc:
                return 0 if exc.code == 0 else 1
        return args.func(args)
    except (TransportError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (CgecError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
