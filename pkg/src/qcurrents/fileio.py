"""Trajectory, currents and manifest files.

Text layouts
------------
Both text files start with ``# key: value`` header lines (values are JSON).

Trajectory: one row per output time, ``t`` followed by ``Re rho_ij, Im rho_ij``
for ``i, j`` in row-major order (``1 + 2 N^2`` columns).

Currents: one row per output time and coupled pair ``l < n``:
``t l n j_total j_unitary j_relax j_pop j_coher j_dephas``. Pairs not listed
carry zero current.

Binary layout: a numpy ``.npz`` archive holding the same arrays in full
(``times``, ``states`` or the six current matrices) plus a ``meta`` JSON string.
"""
from __future__ import annotations

import hashlib
import io
import json
import zipfile
from pathlib import Path
from typing import Any

import numpy as np

from .currents import CurrentSeries
from .propagator import Trajectory

TRAJECTORY_MAGIC = "qcurrents trajectory v1"
CURRENTS_MAGIC = "qcurrents currents v1"
CURRENT_COLUMNS = ("j_total", "j_unitary", "j_relax", "j_pop", "j_coher", "j_dephas_check")


class FileFormatError(ValueError):
    pass


def _fmt(x: float) -> str:
    return repr(float(x))


def _header(magic: str, meta: dict) -> str:
    lines = [f"# {magic}"]
    lines += [f"# {k}: {json.dumps(v, sort_keys=True)}" for k, v in meta.items()]
    return "\n".join(lines) + "\n"


def _read_header(lines: list[str]) -> tuple[str | None, dict, int]:
    magic, meta, i = None, {}, 0
    for i, line in enumerate(lines):
        if not line.startswith("#"):
            break
        body = line[1:].strip()
        if i == 0 and ":" not in body:
            magic = body
            continue
        key, _, val = body.partition(":")
        try:
            meta[key.strip()] = json.loads(val)
        except json.JSONDecodeError:
            meta[key.strip()] = val.strip()
    else:
        i = len(lines)
    return magic, meta, i


def _savez(fh, **arrays) -> None:
    """``np.savez`` equivalent with fixed zip timestamps, so output bytes are reproducible."""
    with zipfile.ZipFile(fh, "w", compression=zipfile.ZIP_STORED) as zf:
        for name in sorted(arrays):
            info = zipfile.ZipInfo(name + ".npy", date_time=(1980, 1, 1, 0, 0, 0))
            buf = io.BytesIO()
            np.lib.format.write_array(buf, np.asanyarray(arrays[name]), allow_pickle=False)
            zf.writestr(info, buf.getvalue())


def run_id(command: str, params: dict, model_hash: str) -> str:
    blob = json.dumps([command, params, model_hash], sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


# ---------------------------------------------------------------------------
# trajectories
# ---------------------------------------------------------------------------


def write_trajectory(path: str | Path, traj: Trajectory, meta: dict[str, Any],
                     fmt: str = "text") -> None:
    meta = {"n_sites": traj.n_sites, "dt": traj.dt, "integrator": traj.integrator, **meta}
    path = Path(path)
    if fmt == "binary":
        with open(path, "wb") as fh:
            _savez(fh, times=traj.times, states=traj.states,
                   meta=np.array(json.dumps(meta, sort_keys=True)))
        return
    if fmt != "text":
        raise ValueError(f"unknown format {fmt!r}")
    n = traj.n_sites
    flat = np.empty((len(traj), 1 + 2 * n * n))
    flat[:, 0] = traj.times
    flat[:, 1::2] = traj.states.real.reshape(len(traj), -1)
    flat[:, 2::2] = traj.states.imag.reshape(len(traj), -1)
    with open(path, "w") as fh:
        fh.write(_header(TRAJECTORY_MAGIC, meta))
        fh.write("# columns: " + json.dumps(
            ["t"] + [f"{p}{i},{j}" for i in range(n) for j in range(n) for p in ("re", "im")])
            + "\n")
        for row in flat:
            fh.write(" ".join(_fmt(x) for x in row) + "\n")


def read_trajectory(path: str | Path) -> tuple[Trajectory, dict]:
    """Load a trajectory file; headerless delimited text from other tools is accepted."""
    path = Path(path)
    raw = path.read_bytes()
    if raw[:2] == b"PK":
        with np.load(io.BytesIO(raw)) as z:
            meta = json.loads(str(z["meta"]))
            return Trajectory(z["times"], z["states"], dt=meta.get("dt"),
                              integrator=meta.get("integrator", "rk4")), meta
    lines = raw.decode().splitlines()
    _, meta, start = _read_header(lines)
    body = [ln for ln in lines[start:] if ln.strip() and not ln.startswith("#")]
    if not body:
        raise FileFormatError(f"{path}: no data rows")
    try:
        data = np.loadtxt(body, ndmin=2, delimiter=None if "," not in body[0] else ",")
    except ValueError as exc:
        raise FileFormatError(f"{path}: {exc}") from None
    ncol = data.shape[1]
    n = int(round(np.sqrt((ncol - 1) / 2)))
    if 1 + 2 * n * n != ncol:
        raise FileFormatError(f"{path}: {ncol} columns is not 1 + 2 N^2 for any N")
    if "n_sites" in meta and meta["n_sites"] != n:
        raise FileFormatError(f"{path}: header says {meta['n_sites']} sites, data has {n}")
    states = (data[:, 1::2] + 1j * data[:, 2::2]).reshape(-1, n, n)
    try:
        traj = Trajectory(data[:, 0], states, dt=meta.get("dt"),
                          integrator=meta.get("integrator", "external"))
    except ValueError as exc:
        raise FileFormatError(f"{path}: {exc}") from None
    return traj, meta


# ---------------------------------------------------------------------------
# currents
# ---------------------------------------------------------------------------


def active_pairs(currents: CurrentSeries, pairs=None) -> list[tuple[int, int]]:
    if pairs is not None:
        return sorted((min(a, b), max(a, b)) for a, b in pairs)
    n = currents.n_sites
    nz = np.zeros((n, n), dtype=bool)
    for name in CURRENT_COLUMNS:
        nz |= np.any(currents.component(name) != 0, axis=0)
    return [(l, m) for l in range(n) for m in range(l + 1, n) if nz[l, m] or nz[m, l]]


def write_currents(path: str | Path, currents: CurrentSeries, meta: dict[str, Any],
                   fmt: str = "text", pairs=None) -> None:
    meta = {"n_sites": currents.n_sites,
            "labels": list(currents.labels) if currents.labels else None, **meta}
    path = Path(path)
    if fmt == "binary":
        with open(path, "wb") as fh:
            _savez(fh, times=currents.times,
                   **{name: currents.component(name) for name in CURRENT_COLUMNS},
                   meta=np.array(json.dumps(meta, sort_keys=True)))
        return
    if fmt != "text":
        raise ValueError(f"unknown format {fmt!r}")
    pairs = active_pairs(currents, pairs)
    meta["pairs"] = [list(p) for p in pairs]
    cols = [currents.component(name) for name in CURRENT_COLUMNS]
    with open(path, "w") as fh:
        fh.write(_header(CURRENTS_MAGIC, meta))
        fh.write("# columns: " + json.dumps(["t", "l", "n", *CURRENT_COLUMNS]) + "\n")
        for k, t in enumerate(currents.times):
            for l, m in pairs:
                vals = " ".join(_fmt(c[k, l, m]) for c in cols)
                fh.write(f"{_fmt(t)} {l} {m} {vals}\n")


def read_currents(path: str | Path) -> tuple[CurrentSeries, dict]:
    path = Path(path)
    raw = path.read_bytes()
    if raw[:2] == b"PK":
        with np.load(io.BytesIO(raw)) as z:
            meta = json.loads(str(z["meta"]))
            labels = tuple(meta["labels"]) if meta.get("labels") else None
            return CurrentSeries(z["times"], z["j_total"], z["j_unitary"],
                                 z["j_dephas_check"], z["j_relax"], z["j_pop"],
                                 z["j_coher"], labels), meta
    lines = raw.decode().splitlines()
    magic, meta, start = _read_header(lines)
    if magic != CURRENTS_MAGIC:
        raise FileFormatError(f"{path}: not a currents file")
    n = int(meta["n_sites"])
    pairs = [tuple(p) for p in meta.get("pairs", [])]
    body = [ln for ln in lines[start:] if ln.strip() and not ln.startswith("#")]
    data = np.loadtxt(body, ndmin=2) if body else np.zeros((0, 3 + len(CURRENT_COLUMNS)))
    if data.shape[1] != 3 + len(CURRENT_COLUMNS):
        raise FileFormatError(f"{path}: unexpected column count {data.shape[1]}")
    npairs = max(len(pairs), 1)
    if len(data) % npairs:
        raise FileFormatError(f"{path}: row count not a multiple of the pair count")
    T = len(data) // npairs if pairs else 0
    times = data[::npairs, 0] if pairs else np.zeros(0)
    mats = {name: np.zeros((T, n, n)) for name in CURRENT_COLUMNS}
    if T:
        d = data.reshape(T, npairs, -1)
        ls, ms = d[0, :, 1].astype(int), d[0, :, 2].astype(int)
        for c, name in enumerate(CURRENT_COLUMNS):
            mats[name][:, ls, ms] = d[:, :, 3 + c]
            mats[name][:, ms, ls] = -d[:, :, 3 + c]
    labels = tuple(meta["labels"]) if meta.get("labels") else None
    return CurrentSeries(times, mats["j_total"], mats["j_unitary"], mats["j_dephas_check"],
                         mats["j_relax"], mats["j_pop"], mats["j_coher"], labels), meta


def write_manifest(path: str | Path, manifest: dict) -> None:
    Path(path).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
