"""Tick-log CSV and run summary.

Column order is fixed: ``t``, ``leader.{px,py,pz,psi,unorm}``, then for
every follower ``i`` (0-based) the block ``f{i}.{L,phi,xi,alpha,Ld,phid,
xid,alphad,hx1..hx6,minh,unom0..3,usafe0..3,z1..z6,interv,qpstat}``.
Floats are written with 17 significant digits so they read back bit-exact.
Ticks after a follower left the valid domain hold ``nan`` in its float
columns. ``qpstat`` is 0 optimal, 1 iteration limit, 2 infeasible, -1 for a
follower without the filter.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Dict, List, Sequence

import numpy as np

from lff3d.geometry import wrap_angle
from lff3d.qp import STATUS_CODES
from lff3d.sim import SimLog

LEADER_COLUMNS = ("px", "py", "pz", "psi", "unorm")
FOLLOWER_FIELDS = (
    ("L", "phi", "xi", "alpha", "Ld", "phid", "xid", "alphad")
    + tuple(f"hx{k}" for k in range(1, 7))
    + ("minh",)
    + tuple(f"unom{k}" for k in range(4))
    + tuple(f"usafe{k}" for k in range(4))
    + tuple(f"z{k}" for k in range(1, 7))
    + ("interv", "qpstat")
)
INT_FIELDS = ("interv", "qpstat")
STATUS_NAMES = {code: name for name, code in STATUS_CODES.items()}
STATUS_NAMES[-1] = "disabled"


class LogFormatError(ValueError):
    pass


def columns(n_followers: int) -> List[str]:
    cols = ["t"] + [f"leader.{c}" for c in LEADER_COLUMNS]
    for i in range(n_followers):
        cols += [f"f{i}.{c}" for c in FOLLOWER_FIELDS]
    return cols


def n_followers_of(cols: Sequence[str]) -> int:
    n = (len(cols) - 1 - len(LEADER_COLUMNS)) // len(FOLLOWER_FIELDS)
    if list(cols) != columns(n):
        raise LogFormatError("log header does not match the column contract")
    return n


def log_table(log: SimLog) -> Dict[str, np.ndarray]:
    """Column name -> array, exactly the values written to the CSV."""
    tab = {"t": log.t.copy()}
    for k, c in enumerate(LEADER_COLUMNS[:4]):
        tab[f"leader.{c}"] = log.leader_pose[:, k].copy()
    tab["leader.unorm"] = log.leader_unorm
    for i, f in enumerate(log.followers):
        blocks = [f.x, f.x_d, f.h, f.h.min(axis=1)[:, None], f.u_nom, f.u_safe, f.slacks]
        data = np.hstack(blocks)
        for name, col in zip(FOLLOWER_FIELDS[:-2], data.T):
            tab[f"f{i}.{name}"] = col.copy()
        tab[f"f{i}.interv"] = f.interv.astype(int)
        tab[f"f{i}.qpstat"] = f.qpstat.astype(int)
    return tab


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return "%.17g" % v


def write_csv(table: Dict[str, np.ndarray], path) -> None:
    n_followers_of(list(table))
    write_columns(table, path)


def write_columns(table: Dict[str, np.ndarray], path) -> None:
    """Write equal-length columns with the log's number formatting."""
    cols = list(table)
    n = len(table[cols[0]])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        arrays = [table[c] for c in cols]
        for k in range(n):
            w.writerow([_fmt(a[k]) for a in arrays])


def write_log(log: SimLog, path) -> Dict[str, np.ndarray]:
    table = log_table(log)
    write_csv(table, path)
    return table


def read_csv(path) -> Dict[str, np.ndarray]:
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise LogFormatError(f"cannot read log {path}: {exc}") from exc
    if not rows:
        raise LogFormatError(f"log {path} is empty")
    cols = rows[0]
    n_followers_of(cols)
    body = rows[1:]
    if not body:
        raise LogFormatError(f"log {path} has a header but no ticks")
    if any(len(r) != len(cols) for r in body):
        raise LogFormatError(f"log {path} has rows of the wrong width")
    table = {}
    for j, c in enumerate(cols):
        try:
            if c.rsplit(".", 1)[-1] in INT_FIELDS:
                table[c] = np.array([int(r[j]) for r in body], dtype=int)
            else:
                table[c] = np.array([float(r[j]) for r in body])
        except ValueError as exc:
            raise LogFormatError(f"bad value in column {c}: {exc}") from exc
    return table


# --------------------------------------------------------------------------
# summary


def _stage_windows(t: np.ndarray, starts: Sequence[float]):
    """Tick masks for each stage; a stage runs until the next one starts."""
    out = []
    for k, t0 in enumerate(starts):
        t1 = starts[k + 1] if k + 1 < len(starts) else math.inf
        out.append((t >= t0) & (t < t1))
    return out


def _nanmax(a) -> float:
    a = np.asarray(a, dtype=float)
    a = a[~np.isnan(a)]
    return float(a.max()) if a.size else None


def _nanmin(a) -> float:
    a = np.asarray(a, dtype=float)
    a = a[~np.isnan(a)]
    return float(a.min()) if a.size else None


def errors_from_table(table, i: int) -> np.ndarray:
    """Tracking error columns recomputed from states and targets."""
    p = f"f{i}."
    e = np.empty((len(table["t"]), 4))
    e[:, 0] = table[p + "L"] - table[p + "Ld"]
    for k, (a, b) in enumerate((("phi", "phid"), ("xi", "xid"), ("alpha", "alphad")), start=1):
        diff = table[p + a] - table[p + b]
        e[:, k] = [wrap_angle(d) if math.isfinite(d) else math.nan for d in diff]
    return e


def summarize(table, dt: float, stage_starts: Sequence[Sequence[float]], names: Sequence[str] = ()) -> dict:
    """Run summary computed only from log columns and the config.

    ``stage_starts[i]`` lists the reference stage start times of follower i.
    """
    n = n_followers_of(list(table))
    t = table["t"]
    out = {"ticks": int(len(t)), "dt": dt, "followers": []}
    for i in range(n):
        p = f"f{i}."
        e = np.abs(errors_from_table(table, i))
        stages = []
        for k, mask in enumerate(_stage_windows(t, stage_starts[i])):
            em = e[mask]
            stages.append({
                "stage": k + 1,
                "t_start": float(stage_starts[i][k]),
                "max_abs_e": [_nanmax(em[:, c]) if em.size else None for c in range(4)],
            })
        interv = table[p + "interv"]
        qpstat = table[p + "qpstat"]
        alive = ~np.isnan(table[p + "L"])
        counts = {STATUS_NAMES[c]: int(np.sum(qpstat[alive] == c)) for c in sorted(STATUS_NAMES)}
        out["followers"].append({
            "index": i,
            "name": names[i] if i < len(names) else "",
            "stages": stages,
            "min_h": _nanmin(table[p + "minh"]),
            "intervention_ticks": int(interv.sum()),
            "intervention_duration": int(interv.sum()) * dt,
            "max_slack": _nanmax(np.column_stack([table[f"{p}z{k}"] for k in range(1, 7)])),
            "qp_status_counts": counts,
            "terminated_tick": None if alive.all() else int(np.argmin(alive)),
        })
    return out


def summary_for_config(table, cfg) -> dict:
    """Summary of a log produced by ``cfg`` (a ``ScenarioConfig``)."""
    starts = [cfg.stage_times(i) for i in range(len(cfg.followers))]
    return summarize(table, cfg.dt, starts, [f.name for f in cfg.followers])


def dump_summary(summary: dict) -> str:
    return json.dumps(summary, indent=2, allow_nan=False) + "\n"


def write_summary(summary: dict, path) -> None:
    Path(path).write_text(dump_summary(summary))
