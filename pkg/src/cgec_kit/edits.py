"""Tokenization, minimal-cost alignment, and merged edit-span extraction.

Two granularities are supported: char (one token per Unicode code point) and
word (greedy forward maximum match against a lexicon, or pre-segmented input
with ASCII spaces as separators).  Edits are span replacements over source
tokens; runs of consecutive non-match alignment ops merge into one edit.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import ConfigurationError, ValidationError

CHAR = "char"
WORD = "word"

# Alignment op codes, in traceback preference order at equal cost.
OP_MATCH = "match"
OP_SUB = "sub"
OP_DEL = "del"
OP_INS = "ins"


@dataclass(frozen=True)
class Token:
    """One token with its [char_start, char_end) span in the source sentence.

    For pre-segmented word input the offsets index the logical sentence, i.e.
    the input with separator spaces removed.
    """

    surface: str
    char_start: int
    char_end: int

    def __post_init__(self) -> None:
        if not (0 <= self.char_start < self.char_end):
            raise ValidationError(
                f"token {self.surface!r}: invalid span [{self.char_start}, {self.char_end})"
            )


@dataclass(frozen=True)
class Granularity:
    """Tokenization mode plus the word lexicon it may need.

    Word mode requires either pre-segmented input (ASCII-space separated) or
    a lexicon for maximum matching.
    """

    mode: str
    lexicon: frozenset[str] | None = None

    def __post_init__(self) -> None:
        if self.mode not in (CHAR, WORD):
            raise ValidationError(f"unknown granularity mode: {self.mode!r}")
        if self.lexicon is not None and not isinstance(self.lexicon, frozenset):
            object.__setattr__(self, "lexicon", frozenset(self.lexicon))

    @classmethod
    def char(cls) -> "Granularity":
        return cls(CHAR)

    @classmethod
    def word(cls, lexicon: Iterable[str] | None = None) -> "Granularity":
        return cls(WORD, frozenset(lexicon) if lexicon is not None else None)


@dataclass(frozen=True)
class Edit:
    """Replacement of source tokens [start, end) by ``replacement`` text.

    start == end with non-empty replacement is an insertion; start < end with
    empty replacement is a deletion; otherwise a substitution.
    """

    start: int
    end: int
    replacement: str

    def __post_init__(self) -> None:
        if self.start < 0 or self.end < self.start:
            raise ValidationError(f"invalid edit span [{self.start}, {self.end})")
        if self.start == self.end and not self.replacement:
            raise ValidationError(f"empty edit at position {self.start}")

    @property
    def kind(self) -> str:
        if self.start == self.end:
            return "insert"
        if not self.replacement:
            return "delete"
        return "substitute"


def load_lexicon(path: str) -> frozenset[str]:
    """Load a word list (one word per line, UTF-8) for maximum matching."""
    words = set()
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            word = line.rstrip("\n").rstrip("\r")
            if not word:
                continue
            if " " in word:
                raise ValidationError(f"{path}:{lineno}: lexicon word contains a space")
            words.add(word)
    return frozenset(words)


def segment(sentence: str, granularity: Granularity) -> list[Token]:
    """Split a sentence into tokens that tile it without gaps or overlaps.

    Char mode yields one token per code point.  Word mode splits on ASCII
    spaces when present (pre-segmented input; spaces are separators only,
    offsets index the de-spaced sentence), otherwise applies greedy forward
    maximum match against the lexicon with single-char fallback.
    """
    if not sentence:
        raise ValueError("sentence must be non-empty")
    if granularity.mode == CHAR:
        return [Token(ch, i, i + 1) for i, ch in enumerate(sentence)]

    if " " in sentence:
        fields = [f for f in sentence.split(" ") if f]
        if not fields:
            raise ValueError("sentence contains only separator spaces")
        tokens = []
        pos = 0
        for field in fields:
            tokens.append(Token(field, pos, pos + len(field)))
            pos += len(field)
        return tokens

    if granularity.lexicon is None:
        raise ConfigurationError(
            "word granularity needs a lexicon or pre-segmented (space-separated) input"
        )
    max_len = max((len(w) for w in granularity.lexicon), default=1)
    tokens = []
    pos = 0
    n = len(sentence)
    while pos < n:
        for size in range(min(max_len, n - pos), 0, -1):
            piece = sentence[pos : pos + size]
            if piece in granularity.lexicon:
                tokens.append(Token(piece, pos, pos + size))
                pos += size
                break
        else:
            tokens.append(Token(sentence[pos], pos, pos + 1))
            pos += 1
    return tokens


def _surfaces(tokens: Sequence[Token] | Sequence[str]) -> list[str]:
    return [t.surface if isinstance(t, Token) else t for t in tokens]


def align(
    src: Sequence[Token] | Sequence[str], tgt: Sequence[Token] | Sequence[str]
) -> list[tuple[str, int, int]]:
    """Minimal-cost alignment path under unit costs (match free).

    Returns (op, i, j) triples in order; match/sub consume src[i] and tgt[j],
    del consumes src[i] with j the current target cursor, ins conversely.
    Traceback deterministically prefers match > sub > del > ins at equal cost.
    """
    a = _surfaces(src)
    b = _surfaces(tgt)
    n, m = len(a), len(b)
    dist = [[0] * (m + 1) for _ in range(n + 1)]
    for i in range(1, n + 1):
        dist[i][0] = i
    for j in range(1, m + 1):
        dist[0][j] = j
    for i in range(1, n + 1):
        row = dist[i]
        prev = dist[i - 1]
        ai = a[i - 1]
        for j in range(1, m + 1):
            cost = 0 if ai == b[j - 1] else 1
            row[j] = min(prev[j - 1] + cost, prev[j] + 1, row[j - 1] + 1)

    ops: list[tuple[str, int, int]] = []
    i, j = n, m
    while i > 0 or j > 0:
        here = dist[i][j]
        if i > 0 and j > 0 and a[i - 1] == b[j - 1] and dist[i - 1][j - 1] == here:
            ops.append((OP_MATCH, i - 1, j - 1))
            i, j = i - 1, j - 1
        elif i > 0 and j > 0 and a[i - 1] != b[j - 1] and dist[i - 1][j - 1] + 1 == here:
            ops.append((OP_SUB, i - 1, j - 1))
            i, j = i - 1, j - 1
        elif i > 0 and dist[i - 1][j] + 1 == here:
            ops.append((OP_DEL, i - 1, j))
            i -= 1
        else:
            ops.append((OP_INS, i, j - 1))
            j -= 1
    ops.reverse()
    return ops


def extract_edits(
    src_sentence: str, tgt_sentence: str, granularity: Granularity
) -> list[Edit]:
    """Extract merged edit spans turning the source into the target.

    Maximal runs of consecutive non-match alignment ops (no intervening
    match) merge into single edits sorted by start; applying them all to the
    source tokens reconstructs the target exactly.  Merged edits whose
    replacement equals the source span text (word-level re-tokenization
    artifacts) are dropped.
    """
    if not src_sentence or not tgt_sentence:
        raise ValueError("both sentences must be non-empty")
    src_tokens = segment(src_sentence, granularity)
    tgt_tokens = segment(tgt_sentence, granularity)
    src_surfaces = [t.surface for t in src_tokens]
    tgt_surfaces = [t.surface for t in tgt_tokens]
    path = align(src_surfaces, tgt_surfaces)

    edits: list[Edit] = []
    run_start = run_end = -1
    run_repl: list[str] = []

    def flush() -> None:
        nonlocal run_start, run_end, run_repl
        if run_start < 0:
            return
        replacement = "".join(run_repl)
        if replacement != "".join(src_surfaces[run_start:run_end]):
            edits.append(Edit(run_start, run_end, replacement))
        run_start, run_end, run_repl = -1, -1, []

    for op, i, j in path:
        if op == OP_MATCH:
            flush()
            continue
        if run_start < 0:
            run_start = i
            run_end = i
        if op in (OP_SUB, OP_DEL):
            run_end = i + 1
        if op in (OP_SUB, OP_INS):
            run_repl.append(tgt_surfaces[j])
    flush()
    return edits


def apply_edits(tokens: Sequence[Token] | Sequence[str], edits: Sequence[Edit]) -> str:
    """Apply sorted, non-overlapping edits to source tokens; returns the text."""
    surfaces = _surfaces(tokens)
    prev_end = 0
    for edit in edits:
        if edit.start < prev_end:
            raise ValidationError(
                f"edits overlap or are unsorted near token index {edit.start}"
            )
        if edit.end > len(surfaces):
            raise ValidationError(f"edit span [{edit.start}, {edit.end}) exceeds input")
        prev_end = edit.end
    for edit in reversed(edits):
        surfaces[edit.start : edit.end] = [edit.replacement]
    return "".join(surfaces)
