"""Text file formats: SMC matrix collections, OBS observation matrices, records.

SMC holds a symmetric matrix collection:

    # optional comment lines anywhere
    SMC 1 <p> <L>
    <L blocks, each p lines of p whitespace-separated floats>

OBS holds an observation matrix:

    OBS <N> <p>
    <N lines of p comma-separated floats>

Records are flat key=value lines; floats are written with 17 significant
digits so every format round-trips exactly through float64.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .linalg import MatrixCollection

__all__ = [
    "read_smc",
    "write_smc",
    "read_obs",
    "write_obs",
    "write_record",
    "parse_record",
    "write_jsonl",
]


class FormatError(ValueError):
    """Malformed input file."""


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _data_lines(path) -> list[str]:
    lines = []
    for raw in Path(path).read_text().splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        lines.append(line)
    return lines


def write_smc(path, X: MatrixCollection, comment: str | None = None) -> None:
    """Write a matrix collection in SMC format."""
    out = []
    if comment:
        for c in comment.splitlines():
            out.append(f"# {c}")
    out.append(f"SMC 1 {X.p} {X.L}")
    for l in range(X.L):
        for row in X.arr[l]:
            out.append(" ".join(_fmt(v) for v in row))
    Path(path).write_text("\n".join(out) + "\n")


def read_smc(path) -> MatrixCollection:
    """Read a matrix collection from SMC format."""
    lines = _data_lines(path)
    if not lines:
        raise FormatError(f"{path}: empty file")
    head = lines[0].split()
    if len(head) != 4 or head[0] != "SMC" or head[1] != "1":
        raise FormatError(f"{path}: bad header {lines[0]!r}")
    try:
        p, L = int(head[2]), int(head[3])
    except ValueError as e:
        raise FormatError(f"{path}: bad header {lines[0]!r}") from e
    if p < 1 or L < 1:
        raise FormatError(f"{path}: bad dimensions p={p} L={L}")
    body = lines[1:]
    if len(body) != L * p:
        raise FormatError(f"{path}: expected {L * p} data lines, found {len(body)}")
    arr = np.empty((L, p, p))
    for l in range(L):
        for i in range(p):
            vals = body[l * p + i].split()
            if len(vals) != p:
                raise FormatError(f"{path}: row {l * p + i} has {len(vals)} values, expected {p}")
            try:
                arr[l, i] = [float(v) for v in vals]
            except ValueError as e:
                raise FormatError(f"{path}: non-numeric value in row {l * p + i}") from e
    if not np.all(np.isfinite(arr)):
        raise FormatError(f"{path}: non-finite entries")
    scale = max(1.0, float(np.abs(arr).max()))
    if np.abs(arr - arr.transpose(0, 2, 1)).max() > 1e-9 * scale:
        raise FormatError(f"{path}: matrices are not symmetric")
    return MatrixCollection(arr)


def write_obs(path, obs: np.ndarray) -> None:
    """Write an N x p observation matrix in OBS format."""
    obs = np.asarray(obs, dtype=np.float64)
    if obs.ndim != 2:
        raise ValueError(f"expected an N x p matrix, got shape {obs.shape}")
    n, p = obs.shape
    out = [f"OBS {n} {p}"]
    for row in obs:
        out.append(",".join(_fmt(v) for v in row))
    Path(path).write_text("\n".join(out) + "\n")


def read_obs(path) -> np.ndarray:
    """Read an observation matrix from OBS format."""
    lines = _data_lines(path)
    if not lines:
        raise FormatError(f"{path}: empty file")
    head = lines[0].split()
    if len(head) != 3 or head[0] != "OBS":
        raise FormatError(f"{path}: bad header {lines[0]!r}")
    try:
        n, p = int(head[1]), int(head[2])
    except ValueError as e:
        raise FormatError(f"{path}: bad header {lines[0]!r}") from e
    body = lines[1:]
    if len(body) != n:
        raise FormatError(f"{path}: expected {n} rows, found {len(body)}")
    arr = np.empty((n, p))
    for i, line in enumerate(body):
        vals = line.replace(",", " ").split()
        if len(vals) != p:
            raise FormatError(f"{path}: row {i} has {len(vals)} values, expected {p}")
        try:
            arr[i] = [float(v) for v in vals]
        except ValueError as e:
            raise FormatError(f"{path}: non-numeric value in row {i}") from e
    if not np.all(np.isfinite(arr)):
        raise FormatError(f"{path}: non-finite entries")
    return arr


def write_record(path, record: dict) -> None:
    """Write a flat key=value text record."""
    out = []
    for k, v in record.items():
        if isinstance(v, bool):
            out.append(f"{k}={str(v).lower()}")
        elif isinstance(v, (int, np.integer)):
            out.append(f"{k}={int(v)}")
        elif isinstance(v, (float, np.floating)):
            out.append(f"{k}={_fmt(v)}")
        else:
            out.append(f"{k}={v}")
    Path(path).write_text("\n".join(out) + "\n")


def parse_record(text: str) -> dict:
    """Parse a key=value record back into python values (int/float/bool/str)."""
    rec: dict = {}
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise FormatError(f"bad record line {line!r}")
        k, v = line.split("=", 1)
        rec[k.strip()] = _coerce(v.strip())
    return rec


def _coerce(v: str):
    if v == "true":
        return True
    if v == "false":
        return False
    try:
        return int(v)
    except ValueError:
        pass
    try:
        return float(v)
    except ValueError:
        pass
    return v


def write_jsonl(path, records: list[dict]) -> None:
    """Write records as line-delimited JSON."""
    with open(path, "w") as fh:
        for rec in records:
            fh.write(json.dumps(rec) + "\n")
