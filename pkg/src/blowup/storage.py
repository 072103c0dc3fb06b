"""Files written by the command line: atomic writes, CSV tables, snapshots, manifests.

Snapshot layout. ``<stem>.json`` holds the header::

    {"format": "blowup-snapshot/1", "dtype": "<f8", "order": "C",
     "tau": ..., "p": ..., "a": [a1, a2, a3], "T": ...,
     "basis": {"N": ..., "Lmax": ..., "m": ...},
     "arrays": [{"name": "c1", "shape": [n_l, N + 1], "offset": 0},
                {"name": "c2", "shape": [n_l, N + 1], "offset": <bytes>}]}

and ``<stem>.bin`` the arrays back to back as little-endian IEEE-754 doubles
in C order, starting at the byte offsets above. Row i of c1 and c2 holds
the Chebyshev coefficients (in x = 2 rho^2 - 1) of l = |m| + i.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .harmonics import ModeState, ParityBasis

SNAPSHOT_FORMAT = "blowup-snapshot/1"
TRAJECTORY_COLUMNS = ("tau", "norm_total", "norm_sobolev", "a1", "a2", "a3")


def atomic_write_bytes(path, data: bytes):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path, text: str):
    atomic_write_bytes(path, text.encode("utf-8"))


def _fmt(x):
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def write_csv(path, header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(x) for x in row])
    atomic_write_text(path, buf.getvalue())


def read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def write_json(path, obj):
    atomic_write_text(path, json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n")


def _json_default(x):
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, complex):
        return [x.real, x.imag]
    raise TypeError(f"cannot serialise {type(x).__name__}")


def config_hash(config: dict) -> str:
    canon = json.dumps(config, sort_keys=True, default=_json_default)
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


def write_snapshot(directory, stem, state: ModeState, tau, p, a=(0.0, 0.0, 0.0), T=1.0, text=False):
    """Write one modal state; ``text`` switches the sidecar to CSV (l, k, c1, c2)."""
    d = Path(directory)
    b = state.basis
    header = {
        "format": SNAPSHOT_FORMAT,
        "tau": float(tau),
        "p": float(p),
        "a": [float(x) for x in a],
        "T": float(T),
        "basis": {"N": b.N, "Lmax": b.Lmax, "m": b.m},
    }
    if text:
        rows = [(l, k, state.c1[i, k], state.c2[i, k]) for i, l in enumerate(b.ells) for k in range(b.N + 1)]
        header["data"] = f"{stem}.csv"
        write_csv(d / f"{stem}.csv", ("l", "k", "c1", "c2"), rows)
    else:
        c1 = np.ascontiguousarray(state.c1, dtype="<f8")
        c2 = np.ascontiguousarray(state.c2, dtype="<f8")
        header.update(dtype="<f8", order="C", data=f"{stem}.bin")
        header["arrays"] = [
            {"name": "c1", "shape": list(c1.shape), "offset": 0},
            {"name": "c2", "shape": list(c2.shape), "offset": c1.nbytes},
        ]
        atomic_write_bytes(d / f"{stem}.bin", c1.tobytes() + c2.tobytes())
    write_json(d / f"{stem}.json", header)


def read_snapshot(path):
    """Inverse of write_snapshot; returns (state, header)."""
    path = Path(path)
    header = json.loads(path.read_text())
    if header.get("format") != SNAPSHOT_FORMAT:
        raise ConfigError(f"{path} is not a snapshot header")
    bi = header["basis"]
    basis = ParityBasis(bi["N"], bi["Lmax"], bi["m"])
    data = path.parent / header["data"]
    if data.suffix == ".csv":
        _, rows = read_csv(data)
        c1, c2 = np.zeros(basis.shape), np.zeros(basis.shape)
        l0 = basis.ells[0]
        for l, k, v1, v2 in rows:
            c1[int(l) - l0, int(k)] = float(v1)
            c2[int(l) - l0, int(k)] = float(v2)
        return ModeState(basis, c1, c2), header
    raw = data.read_bytes()
    arrays = {}
    for spec in header["arrays"]:
        count = int(np.prod(spec["shape"]))
        arrays[spec["name"]] = np.frombuffer(raw, dtype="<f8", count=count, offset=spec["offset"]).reshape(spec["shape"])
    return ModeState(basis, arrays["c1"].astype(float), arrays["c2"].astype(float)), header
