"""CSV writers for snapshots, traces, sharp trajectories and sweep summaries.

Floats are written with ``repr`` (shortest round-trip form), so repeated
runs produce byte-identical files.
"""

from __future__ import annotations

import csv
from pathlib import Path


def fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, str):
        return x
    if isinstance(x, (int,)) and not isinstance(x, bool):
        return str(x)
    return repr(float(x))


def _write(path, header, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(v) for v in row])
    return path


def snapshot_name(preset: str, t: float) -> str:
    return f"{preset}_t{t:.4f}.csv"


def write_snapshot(path, state):
    return _write(path, ["coord", "u", "w"], zip(state.mesh.coords, state.u, state.w))


def write_trace(path, trace):
    rows = []
    for t, e, m, faces in zip(trace.times, trace.energy, trace.mass, trace.interfaces):
        f1 = faces[0] if len(faces) > 0 else None
        f2 = faces[1] if len(faces) > 1 else None
        rows.append([t, e, m, f1, f2])
    return _write(path, ["t", "energy", "mass", "iface1", "iface2"], rows)


def _append_event(path, event):
    if event is None:
        return
    with Path(path).open("a", newline="", encoding="utf-8") as fh:
        csv.writer(fh, lineterminator="\n").writerow(["event", fmt(event.time), event.kind])


def write_cap_trajectory(path, traj):
    path = _write(path, ["t", "theta1", "theta2", "energy"],
                  zip(traj.times, traj.theta1, traj.theta2, traj.energy))
    _append_event(path, traj.event)
    return path


def write_interval_trajectory(path, traj):
    path = _write(path, ["t", "lambda"], zip(traj.times, traj.lam))
    _append_event(path, traj.event)
    return path


def write_rows(path, header, rows):
    return _write(path, header, rows)


def read_rows(path):
    """Rows of a CSV file as lists of strings, header included."""
    with Path(path).open(newline="", encoding="utf-8") as fh:
        return list(csv.reader(fh))
