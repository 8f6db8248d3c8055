"""On-disk formats: binary event files, coefficient/histogram CSVs and
JSON-lines training reports. Every writer is atomic (temp file + rename).
"""

from __future__ import annotations

import contextlib
import csv
import io
import json
import os
import struct
import tempfile
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .errors import FormatError
from .showersim import DetectorGeometry, EventSet

MAGIC = b"CALO"
VERSION = 1
# magic, version, n_events, n_rows, n_cols, beam energy (GeV), seed
HEADER = struct.Struct("<4sIQIIfQ")

_UMASK = os.umask(0)
os.umask(_UMASK)


@contextlib.contextmanager
def atomic_write(path, mode="wb"):
    """Write to a sibling temp file and move it into place on success."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        newline = None if "b" in mode else ""
        with os.fdopen(fd, mode, newline=newline) as fh:
            yield fh
        os.chmod(tmp, 0o666 & ~_UMASK)
        os.replace(tmp, path)
    except BaseException:
        with contextlib.suppress(FileNotFoundError):
            os.unlink(tmp)
        raise


def write_events(path, e: EventSet) -> None:
    g = e.geometry
    header = HEADER.pack(MAGIC, VERSION, e.n_events, g.n_rows, g.n_cols,
                         e.beam_energy, e.seed & 0xFFFFFFFFFFFFFFFF)
    with atomic_write(path) as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(e.events, dtype="<f4").tobytes())


def read_events(path, cell_pitch: float = DetectorGeometry.cell_pitch) -> EventSet:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < HEADER.size:
        raise FormatError(f"{path}: file has {len(raw)} bytes, header needs {HEADER.size}")
    magic, version, n_events, n_rows, n_cols, beam, seed = HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    if n_events < 1 or n_rows < 1 or n_cols < 1:
        raise FormatError(f"{path}: empty dimensions {n_events}x{n_rows}x{n_cols}")
    expected = HEADER.size + 4 * n_events * n_rows * n_cols
    if len(raw) != expected:
        raise FormatError(f"{path}: expected {expected} bytes, found {len(raw)}")
    data = np.frombuffer(raw, dtype="<f4", offset=HEADER.size)
    events = data.reshape(n_events, n_rows, n_cols).astype(np.float64)
    try:
        geom = DetectorGeometry(n_rows, n_cols, cell_pitch)
        return EventSet(geom, events, float(beam), int(seed))
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from exc


def export_events_csv(path, e: EventSet) -> None:
    """One row per event, one column per cell, for inspection."""
    names = [f"r{r}c{c}" for r in range(e.geometry.n_rows) for c in range(e.geometry.n_cols)]
    with atomic_write(path, "w") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["event", *names])
        for i, row in enumerate(e.flat().astype(np.float32)):
            w.writerow([i, *(f"{v:.9g}" for v in row)])


def coefficients_text(a) -> str:
    """``row,col,a,A`` per cell with 9 significant digits."""
    lines = ["row,col,a,A"]
    for (r, c), v in np.ndenumerate(np.asarray(a, dtype=np.float64)):
        lines.append(f"{r},{c},{v:.9g},{1.0 / v:.9g}")
    return "\n".join(lines) + "\n"


def write_coefficients(path, a) -> None:
    text = coefficients_text(a)
    with atomic_write(path, "w") as fh:
        fh.write(text)


def read_coefficients(path) -> np.ndarray:
    try:
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
    except UnicodeDecodeError as exc:
        raise FormatError(f"{path}: not a text file") from exc
    if not rows or set(rows[0]) != {"row", "col", "a", "A"}:
        raise FormatError(f"{path}: expected header row,col,a,A")
    try:
        idx = np.array([(int(r["row"]), int(r["col"])) for r in rows])
        vals = np.array([float(r["a"]) for r in rows])
    except (TypeError, ValueError) as exc:
        raise FormatError(f"{path}: {exc}") from exc
    shape = tuple(idx.max(axis=0) + 1)
    if len(rows) != shape[0] * shape[1]:
        raise FormatError(f"{path}: {len(rows)} rows do not cover a {shape[0]}x{shape[1]} grid")
    out = np.full(shape, np.nan)
    out[idx[:, 0], idx[:, 1]] = vals
    if np.isnan(out).any():
        raise FormatError(f"{path}: duplicate or missing cells")
    return out


def write_histogram(path, h) -> None:
    with atomic_write(path, "w") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["bin_lo", "bin_hi", "count"])
        for lo, hi, n in zip(h.edges[:-1], h.edges[1:], h.counts):
            w.writerow([f"{lo:.9g}", f"{hi:.9g}", int(n)])
        fh.write(f"# underflow={h.underflow} overflow={h.overflow}\n")


def write_rows(path, header, rows) -> None:
    with atomic_write(path, "w") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([f"{v:.9g}" if isinstance(v, float) else v for v in row])


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def report_lines(report, config_echo: dict) -> str:
    """Serialize a TrainReport: a header line, one line per epoch, a
    summary line. Wall-clock time is left out so reruns are byte-identical.
    """
    buf = io.StringIO()
    head = {"record": "config", "config": config_echo, "scale": report.scale,
            "mask": report.mask}
    buf.write(json.dumps(_jsonable(head), sort_keys=True) + "\n")
    for rec in report.records:
        buf.write(json.dumps(_jsonable({"record": "epoch", **asdict(rec)}), sort_keys=True) + "\n")
    tail = {"record": "final", "masked_coefficients": report.masked_coefficients,
            "border_coefficients": report.border_coefficients}
    buf.write(json.dumps(_jsonable(tail), sort_keys=True) + "\n")
    return buf.getvalue()


def write_report(path, report, config_echo: dict) -> None:
    text = report_lines(report, config_echo)
    with atomic_write(path, "w") as fh:
        fh.write(text)


def read_report(path) -> dict:
    """Parse a report file into ``{"config": ..., "epochs": [...], "final": ...}``."""
    out = {"config": None, "epochs": [], "final": None}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                kind = rec.pop("record")
            except (json.JSONDecodeError, KeyError, AttributeError) as exc:
                raise FormatError(f"{path}:{lineno}: not a report record") from exc
            if kind == "epoch":
                out["epochs"].append(rec)
            elif kind in ("config", "final"):
                out[kind] = rec
            else:
                raise FormatError(f"{path}:{lineno}: unknown record type {kind!r}")
    if not out["epochs"]:
        raise FormatError(f"{path}: no epoch records")
    return out
