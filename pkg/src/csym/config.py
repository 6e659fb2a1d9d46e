"""Config files, model construction from options, and JSON/CSV output."""

from __future__ import annotations

import csv
import io
import json
import sys
from pathlib import Path

from .errors import ModelError
from .linalg import ExactMatrix
from .models import EntryDistribution, MatrixModel

CSV_COLUMNS = ("label", "count", "freq", "ref_prob", "abs_diff")
MODEL_KEYS = ("model", "n", "m", "modulus", "dist", "dist2", "c_file", "h", "positions", "units", "k")


def load_config(path) -> dict[str, str]:
    """key=value lines; blank lines and lines starting with # are skipped."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ValueError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        out[key.strip().replace("-", "_")] = value.strip()
    return out


def _pairs(text: str) -> tuple:
    """'0-1,2-3' -> ((0, 1), (2, 3))."""
    out = []
    for tok in text.split(","):
        i, _, j = tok.strip().partition("-")
        out.append((int(i), int(j)))
    return tuple(out)


def model_from_options(opts: dict) -> MatrixModel:
    kind = opts.get("model")
    if not kind:
        raise ModelError("no model given (model=...)")
    kind = kind.replace("-", "_")
    modulus = int(opts.get("modulus", 0) or 0)
    dist = EntryDistribution.parse(opts["dist"], modulus) if opts.get("dist") else None
    n = int(opts["n"]) if opts.get("n") else None
    if kind == "c_symmetric":
        if not opts.get("c_file"):
            raise ModelError("c_symmetric needs c_file")
        C = ExactMatrix.load(opts["c_file"])
        if modulus and C.modulus != modulus:
            raise ModelError(f"c_file modulus {C.modulus} differs from modulus {modulus}")
        if n is not None and C.rows != n:
            raise ModelError(f"c_file is {C.rows} x {C.cols}, n is {n}")
        return MatrixModel.c_symmetric(C, dist)
    if n is None:
        raise ModelError("n is required")
    if kind == "iid":
        return MatrixModel.iid(n, modulus, dist, int(opts["m"]) if opts.get("m") else None)
    if kind == "symmetric":
        return MatrixModel.symmetric(n, modulus, dist)
    if kind == "symmetric_mod_h":
        dist2 = EntryDistribution.parse(opts["dist2"], modulus) if opts.get("dist2") else None
        return MatrixModel.symmetric_mod_h(n, int(opts["h"]), modulus, dist, dist2)
    if kind == "corner_perturbed":
        positions = _pairs(opts["positions"])
        units = tuple(int(u) for u in opts["units"].split(",")) if opts.get("units") else None
        return MatrixModel.corner_perturbed(n, positions, units, modulus, dist)
    if kind == "alternating_uniform":
        return MatrixModel.alternating_uniform(n, modulus)
    if kind == "random_corner":
        return MatrixModel.random_corner(n, int(opts["k"]), modulus, dist)
    raise ModelError(f"unknown model {kind!r}")


def table_csv(rows) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, extrasaction="ignore", lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: ("" if row.get(k) is None else row.get(k)) for k in CSV_COLUMNS})
    return buf.getvalue()


def emit(payload: dict, out=None, fmt: str = "json"):
    """Write a result as JSON, or its ``rows`` as CSV."""
    if fmt == "csv":
        if "rows" not in payload:
            raise ValueError("csv output needs a tabular result")
        text = table_csv(payload["rows"])
    else:
        text = json.dumps(payload, indent=2, default=str) + "\n"
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)
