"""Output helpers shared by the writers: paths or open text streams."""

from __future__ import annotations

import csv
import json
from contextlib import contextmanager


@contextmanager
def open_text(target):
    """Yield a writable text stream for a path, or pass an open stream through."""
    if hasattr(target, "write"):
        yield target
    else:
        with open(target, "w", newline="", encoding="utf-8") as fh:
            yield fh


def csv_writer(fh):
    return csv.writer(fh, lineterminator="\n")


def fmt(x: float) -> str:
    """17 significant digits, enough to round-trip a double."""
    return f"{x:.17g}"


def write_json(obj, target) -> None:
    """JSON with Python's shortest round-trip float repr, newline-terminated."""
    with open_text(target) as fh:
        json.dump(obj, fh)
        fh.write("\n")
