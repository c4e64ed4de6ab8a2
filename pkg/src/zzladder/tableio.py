"""Deterministic CSV output: fixed float formatting, stable row order."""

from __future__ import annotations

import math
import os


def format_value(v) -> str:
    """17-significant-digit floats; bools as 0/1; everything else via str."""
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float) or hasattr(v, "dtype"):
        x = float(v)
        if math.isnan(x):
            return "nan"
        return f"{x:.17g}"
    return str(v)


def render_row(values) -> str:
    return ",".join(format_value(v) for v in values)


def write_csv(path, header, lines) -> None:
    """Write pre-rendered CSV lines (or value lists) under a header row."""
    rendered = [line if isinstance(line, str) else render_row(line) for line in lines]
    text = ",".join(header) + "\n" + "".join(s + "\n" for s in rendered)
    if path is None:
        import sys

        sys.stdout.write(text)
        return
    tmp = f"{path}.tmp"
    with open(tmp, "w", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def read_csv_lines(path):
    """(header fields, raw data lines) of an existing CSV, or (None, [])."""
    if path is None or not os.path.exists(path):
        return None, []
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    if not lines:
        return None, []
    return lines[0].split(","), [ln for ln in lines[1:] if ln]
