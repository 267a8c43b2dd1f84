"""Output formats: fixed-schema CSV tables, spectrum dumps and JSON manifests.

All writes go to a temporary file in the target directory followed by an
atomic rename, so a partially written file is never observed.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
import tempfile
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from .model import OperatorMatrix

OFS_SWEEP_COLUMNS = ("lambda", "t", "mode", "beta", "chi1", "chi2", "D_c", "K")
PARTIAL_SUM_COLUMNS = ("lambda", "t", "mode", "D", "chi1_partial")
HISTOGRAM_COLUMNS = ("bin_left", "bin_right", "density", "poisson_ref_midpoint", "wigner_ref_midpoint")
LEVELSTATS_SUMMARY_COLUMNS = ("lambda", "KS_poisson", "KS_wigner", "n_levels")
ORACLE_COLUMNS = ("K", "lambda", "delta_lambda", "t", "mode", "F", "fd_chi", "chi1", "chi2", "mismatch")
EIGENVALUE_COLUMNS = ("index", "eigenvalue")


def fmt(x: Any) -> str:
    """Floats with 17 significant digits; everything else via ``str``."""
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        if math.isnan(x):
            return "nan"
        return format(x, ".17g")
    if isinstance(x, (np.integer,)):
        return str(int(x))
    return str(x)


def atomic_write_bytes(path: str | Path, data: bytes) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def atomic_write_text(path: str | Path, text: str) -> Path:
    return atomic_write_bytes(path, text.encode("utf-8"))


def csv_text(columns: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        if len(row) != len(columns):
            raise ValueError(f"row has {len(row)} fields, schema has {len(columns)}")
        writer.writerow([fmt(v) for v in row])
    return buf.getvalue()


def write_csv(path: str | Path, columns: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
    return atomic_write_text(path, csv_text(columns, rows))


def read_csv(path: str | Path, columns: Sequence[str] | None = None) -> list[dict[str, str]]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if columns is not None and tuple(reader.fieldnames or ()) != tuple(columns):
            raise ValueError(f"{path}: header {reader.fieldnames} != expected {list(columns)}")
        return list(reader)


def write_json(path: str | Path, payload: Any) -> Path:
    return atomic_write_text(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


def read_json(path: str | Path) -> Any:
    return json.loads(Path(path).read_text(encoding="utf-8"))


def config_hash(payload: Any) -> str:
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()[:12]


def file_sha256(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


# spectra and operator dumps


def spectrum_filename(K: int, index: int) -> str:
    return f"K{K}_lam{index:04d}.npz"


def save_spectrum(path: str | Path, lam: float, K: int, eigenvalues, eigenvectors=None) -> Path:
    buf = io.BytesIO()
    arrays = {"lam": np.float64(lam), "K": np.int64(K), "eigenvalues": np.asarray(eigenvalues)}
    if eigenvectors is not None:
        arrays["eigenvectors"] = np.asarray(eigenvectors)
    np.savez(buf, **arrays)
    return atomic_write_bytes(path, buf.getvalue())


def load_spectrum(path: str | Path) -> dict[str, Any]:
    with np.load(path) as z:
        out = {k: z[k] for k in z.files}
    out["lam"] = float(out["lam"])
    out["K"] = int(out["K"])
    return out


def dump_operator(path: str | Path, op: OperatorMatrix) -> Path:
    """Debug dump: CSV ``row,col,value`` of the nonzero entries, or ``.npy`` by suffix."""
    path = Path(path)
    if path.suffix == ".npy":
        buf = io.BytesIO()
        np.save(buf, op.entries)
        return atomic_write_bytes(path, buf.getvalue())
    rows, cols = np.nonzero(op.entries)
    return write_csv(
        path, ("row", "col", "value"), ((int(r), int(c), op.entries[r, c]) for r, c in zip(rows, cols))
    )
