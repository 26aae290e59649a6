"""Small shared helpers: atomic file writes and half-up 2-decimal rounding."""

from __future__ import annotations

import os
import tempfile
from contextlib import contextmanager
from decimal import ROUND_HALF_UP, Decimal
from typing import Iterator, TextIO


@contextmanager
def atomic_write(path: str | os.PathLike[str], encoding: str = "utf-8") -> Iterator[TextIO]:
    """Write to a temp file next to ``path`` and rename into place on success.

    A failure inside the block leaves no partial output file behind.
    """
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp_path = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix="~")
    try:
        with os.fdopen(fd, "w", encoding=encoding, newline="") as handle:
            yield handle
        os.replace(tmp_path, path)
    except BaseException:
        try:
            os.unlink(tmp_path)
        except OSError:
            pass
        raise


def percentage(count: int, total: int) -> float:
    """count/total as a percentage rounded half-up to 2 decimals; 0.00 for empty totals."""
    if total == 0:
        return 0.0
    value = (Decimal(count) * 100 / Decimal(total)).quantize(
        Decimal("0.01"), rounding=ROUND_HALF_UP
    )
    return float(value)


def ratio_pct(ratio: float) -> float:
    """A [0, 1] ratio scaled to a percentage, rounded half-up to 2 decimals."""
    value = (Decimal(repr(ratio)) * 100).quantize(Decimal("0.01"), rounding=ROUND_HALF_UP)
    return float(value)
