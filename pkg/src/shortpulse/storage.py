"""Snapshot files, CSV tables, and trajectory manifests.

Snapshot file layout (format tag ``SPFLD01``)::

    bytes  0..7    magic ``b"SPFLD01\\0"``
    bytes  8..15   sample count n, unsigned 64-bit little-endian
    bytes 16..23   sample time t, IEEE-754 binary64 little-endian
    bytes 24..     n node values, binary64 little-endian

A trajectory directory holds one ``manifest.json`` plus one snapshot file
per stored time.  The manifest is the source of truth for the grid and the
snapshot index; the per-file headers exist so a single snapshot is
self-describing.

CSV dialect: comma separator, ``.`` decimal point, 17 significant digits,
mandatory header row.  Every table starts with a single ``#`` comment line
carrying the config hash so each output file is traceable to the run that
produced it (readers that dislike comments can skip the first line).
"""

import json
import os
import struct
from datetime import datetime, timezone

import numpy as np

from . import __version__
from .errors import ConfigError, MissingSnapshots
from .evolve import Snapshot, SolverConfig, Trajectory
from .spectral import Field, Grid, antiderivative, derivative

MAGIC = b"SPFLD01\x00"
_HEADER = struct.Struct("<8sQd")
HEADER_BYTES = _HEADER.size  # 24

MANIFEST_NAME = "manifest.json"


class CorruptSnapshot(Exception):
    """A snapshot file failed its header or length checks."""


# ---------------------------------------------------------------------------
# snapshot binaries


def write_field(path, field, t):
    """Write one field as a snapshot file; returns the byte count."""
    values = np.asarray(field.values)
    if np.iscomplexobj(values):
        if np.max(np.abs(values.imag)) > 1e-12 * max(1.0, np.max(np.abs(values.real))):
            raise ValueError("snapshot format stores real fields only")
        values = values.real
    values = np.ascontiguousarray(values, dtype="<f8")
    blob = _HEADER.pack(MAGIC, values.size, float(t)) + values.tobytes()
    with open(path, "wb") as fh:
        fh.write(blob)
    return len(blob)


def read_field(path, grid=None):
    """Read a snapshot file -> (t, Field).

    When ``grid`` is given the stored sample count must match it; otherwise a
    unit-spacing grid of the stored size is fabricated (callers that know the
    box length should pass the real grid).
    """
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < HEADER_BYTES:
        raise CorruptSnapshot(f"{path}: truncated header ({len(raw)} bytes)")
    magic, n, t = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise CorruptSnapshot(f"{path}: bad magic {magic!r}")
    expected = HEADER_BYTES + 8 * n
    if len(raw) != expected:
        raise CorruptSnapshot(
            f"{path}: expected {expected} bytes for n={n}, found {len(raw)}"
        )
    values = np.frombuffer(raw, dtype="<f8", offset=HEADER_BYTES).astype(np.float64)
    if grid is None:
        grid = Grid(n=int(n), length=float(n))
    elif grid.n != n:
        raise CorruptSnapshot(f"{path}: n={n} does not match grid n={grid.n}")
    return float(t), Field(grid, values, real=True)


# ---------------------------------------------------------------------------
# CSV tables


def format_cell(value):
    """One CSV cell: floats at 17 significant digits, bools as 0/1."""
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return "%.17g" % float(value)
    return str(value)


def write_csv(path, header, rows, config_hash=""):
    """Write a table; returns the row count (excluding the header)."""
    count = 0
    with open(path, "w", newline="") as fh:
        if config_hash:
            fh.write(f"# config_hash={config_hash} code_version={__version__}\n")
        fh.write(",".join(header) + "\n")
        for row in rows:
            cells = [format_cell(v) for v in row]
            if len(cells) != len(header):
                raise ValueError(
                    f"row has {len(cells)} cells for {len(header)} columns"
                )
            fh.write(",".join(cells) + "\n")
            count += 1
    return count


def read_csv(path):
    """Read a table written by write_csv -> (header, rows as float lists).

    Non-numeric cells come back as nan; the leading comment line is skipped.
    """
    header = None
    rows = []
    with open(path, "r", newline="") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            cells = line.split(",")
            if header is None:
                header = cells
                continue
            parsed = []
            for cell in cells:
                try:
                    parsed.append(float(cell))
                except ValueError:
                    parsed.append(float("nan"))
            rows.append(parsed)
    if header is None:
        raise ValueError(f"{path}: no header row")
    return header, rows


# ---------------------------------------------------------------------------
# manifests and trajectory directories


def _snapshot_name(index):
    return f"snap_{index:05d}.bin"


def write_json(path, document):
    """Canonical JSON writer: sorted keys, 2-space indent, trailing newline."""
    with open(path, "w") as fh:
        json.dump(document, fh, sort_keys=True, indent=2)
        fh.write("\n")


def save_trajectory(out_dir, traj, experiment=None, config_hash=None, timestamp=True):
    """Persist a trajectory; returns the manifest path.

    ``experiment`` is the full experiment-config dict (all sections) when the
    run came from a config file; library callers may omit it.  The manifest's
    only non-deterministic field is ``metadata.created_utc``, and ``timestamp=
    False`` suppresses even that (used by the determinism tests).
    """
    os.makedirs(out_dir, exist_ok=True)
    if config_hash is None:
        config_hash = traj.config_hash or traj.config.config_hash()
    index = []
    for i, snap in enumerate(traj.snapshots):
        name = _snapshot_name(i)
        write_field(os.path.join(out_dir, name), snap.u, snap.t)
        index.append({"t": snap.t, "file": name})
    from dataclasses import asdict

    manifest = {
        "format": {"snapshot": MAGIC.rstrip(b"\x00").decode(), "version": 1},
        "grid": {"n": traj.config.n, "length": traj.config.length},
        "solver": asdict(traj.config),
        "experiment": experiment,
        "provenance": {
            "config_hash": config_hash,
            "code_version": traj.code_version,
            "status": traj.status,
            "halvings": traj.halvings,
        },
        "snapshots": index,
        "metadata": {
            "created_utc": datetime.now(timezone.utc).isoformat() if timestamp else ""
        },
    }
    path = os.path.join(out_dir, MANIFEST_NAME)
    write_json(path, manifest)
    return path


def load_manifest(traj_dir):
    path = os.path.join(traj_dir, MANIFEST_NAME)
    if not os.path.exists(path):
        raise ConfigError(f"no {MANIFEST_NAME} in {traj_dir}")
    with open(path) as fh:
        return json.load(fh)


def load_trajectory(traj_dir, mean_tol=None):
    """Rebuild a Trajectory (with derived fields recomputed) from a directory.

    Snapshot norms are left unset; derivative and antiderivative are cheap to
    recompute spectrally and doing so keeps the file format down to the bare
    node values.
    """
    manifest = load_manifest(traj_dir)
    solver = dict(manifest["solver"])
    cfg = SolverConfig(**solver)
    grid = cfg.grid()
    if mean_tol is None:
        mean_tol = cfg.mean_tol
    traj = Trajectory(
        config=cfg,
        config_hash=manifest["provenance"]["config_hash"],
        code_version=manifest["provenance"]["code_version"],
        status=manifest["provenance"].get("status", "completed"),
        halvings=manifest["provenance"].get("halvings", 0),
    )
    for entry in manifest["snapshots"]:
        path = os.path.join(traj_dir, entry["file"])
        t, u = read_field(path, grid)
        if abs(t - entry["t"]) > 1e-9 * max(1.0, abs(entry["t"])):
            raise CorruptSnapshot(
                f"{path}: header t={t} disagrees with manifest t={entry['t']}"
            )
        snap = Snapshot(
            t=t,
            u=u,
            u_x=derivative(u),
            u_anti=antiderivative(u, mean_tol=mean_tol),
        )
        traj.append(snap)
    return traj, manifest


def require_times(traj, times, rel_tol=1e-9):
    """Map requested times onto stored snapshots or raise MissingSnapshots."""
    stored = np.asarray(traj.times, dtype=float)
    picked = []
    for t in times:
        if stored.size:
            j = int(np.argmin(np.abs(stored - t)))
            if abs(stored[j] - t) <= rel_tol * max(1.0, abs(t)):
                picked.append(traj.snapshots[j])
                continue
        raise MissingSnapshots(
            f"trajectory has no snapshot at t={t:g} "
            f"(stored times {stored[0]:g}..{stored[-1]:g}, {stored.size} total)"
            if stored.size
            else f"trajectory has no snapshots (first missing t={t:g})"
        )
    return picked
