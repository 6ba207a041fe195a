"""Deterministic CSV/JSON writers with an embedded metadata header."""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import __version__


def fmt(x) -> str:
    """17 significant digits, locale independent; round-trips any double."""
    return format(float(x), ".17g")


def fmt_complex(z) -> str:
    """``re+imj`` with both parts at 17 significant digits."""
    z = complex(z)
    sign = "-" if np.signbit(z.imag) else "+"
    return f"{fmt(z.real)}{sign}{fmt(abs(z.imag))}j"


def parse_complex(text: str) -> complex:
    return complex(text.strip())


def metadata(command: str, config: dict, tolerances: dict) -> dict:
    return {"toolkit": "nhph", "version": __version__, "command": command,
            "config": config, "tolerances": tolerances}


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence], meta: dict) -> Path:
    """Rows are written as given; floats must already be formatted strings."""
    buf = io.StringIO()
    for line in json.dumps(meta, sort_keys=True, indent=1).splitlines():
        buf.write(f"# {line}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow(row)
    path = Path(path)
    path.write_text(buf.getvalue())
    return path


def read_csv(path):
    """Returns ``(meta, header, rows)`` of a file written by :func:`write_csv`."""
    lines = Path(path).read_text().splitlines()
    meta_lines = [ln[2:] for ln in lines if ln.startswith("# ")]
    body = [ln for ln in lines if not ln.startswith("#")]
    rows = list(csv.reader(body))
    return json.loads("\n".join(meta_lines)), rows[0], rows[1:]


def write_json(path, payload: dict, meta: dict) -> Path:
    path = Path(path)
    path.write_text(json.dumps({"meta": meta, **payload}, sort_keys=True, indent=1) + "\n")
    return path
