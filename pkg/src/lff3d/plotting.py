"""Panel extracts and static SVG charts from a tick log.

Four panels: relative states against their targets, the minimum barrier
value, the leader command norm, and nominal against filtered command
norms. Each panel is written as a CSV projection of the log and as an SVG
line chart. Frustum parameters, when available, shade the unsafe part of
the state plots; ticks where the filter modified the command are shaded
on the barrier panel.
"""

from __future__ import annotations

from pathlib import Path
from typing import Dict, List, Optional

import numpy as np

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from lff3d.geometry import FrustumParams  # noqa: E402
from lff3d.logio import LogFormatError, n_followers_of, write_columns  # noqa: E402

PANELS = ("states", "min_h", "u_j", "u_norms")
UNSAFE = "#e040c0"
INTERVENTION = "#4f7fd8"
STATE_NAMES = ("L", "phi", "xi", "alpha")
STATE_UNITS = ("m", "rad", "rad", "rad")


def _norm(table, prefix, i) -> np.ndarray:
    return np.sqrt(sum(table[f"f{i}.{prefix}{k}"] ** 2 for k in range(4)))


def unsafe_bounds(table, i: int, frustum: FrustumParams) -> Dict[str, np.ndarray]:
    """Per-tick limits beyond which a single state leaves the frustum with
    the other states held at their logged values."""
    p = f"f{i}."
    phi, xi = table[p + "phi"], table[p + "xi"]
    with np.errstate(divide="ignore", invalid="ignore"):
        proj = np.cos(xi) * np.cos(phi)
        L_lo = np.where(proj > 0.0, frustum.x_near / proj, np.inf)
        L_hi = np.where(proj > 0.0, frustum.x_far / proj, np.inf)
        xi_max = np.arctan(frustum.tan_half_theta * np.maximum(np.cos(phi), 0.0))
    phi_max = np.full_like(phi, 0.5 * frustum.phi_fov)
    return {"L_lo": L_lo, "L_hi": L_hi, "phi_max": phi_max, "xi_max": xi_max}


def panel_tables(table, frustum: Optional[FrustumParams] = None) -> Dict[str, Dict[str, np.ndarray]]:
    n = n_followers_of(list(table))
    t = table["t"]
    states = {"t": t}
    for i in range(n):
        for s in STATE_NAMES:
            states[f"f{i}.{s}"] = table[f"f{i}.{s}"]
            states[f"f{i}.{s}d"] = table[f"f{i}.{s}d"]
        if frustum is not None:
            for key, col in unsafe_bounds(table, i, frustum).items():
                states[f"f{i}.{key}"] = col
    min_h = {"t": t}
    for i in range(n):
        min_h[f"f{i}.minh"] = table[f"f{i}.minh"]
        min_h[f"f{i}.interv"] = table[f"f{i}.interv"]
    u_j = {"t": t, "leader.unorm": table["leader.unorm"]}
    u_norms = {"t": t}
    for i in range(n):
        u_norms[f"f{i}.unom_norm"] = _norm(table, "unom", i)
        u_norms[f"f{i}.usafe_norm"] = _norm(table, "usafe", i)
    return {"states": states, "min_h": min_h, "u_j": u_j, "u_norms": u_norms}


def _spans(t, mask):
    """Contiguous ``[t0, t1)`` intervals where ``mask`` holds."""
    out = []
    k, n = 0, len(mask)
    dt = t[1] - t[0] if n > 1 else 1.0
    while k < n:
        if mask[k]:
            j = k
            while j + 1 < n and mask[j + 1]:
                j += 1
            out.append((t[k], t[j] + dt))
            k = j + 1
        else:
            k += 1
    return out


def _shade_outside(ax, t, lo, hi):
    """Shade below ``lo`` and above ``hi`` (arrays, may be infinite)."""
    y0, y1 = ax.get_ylim()
    if lo is not None:
        ax.fill_between(t, y0, np.clip(lo, y0, y1), color=UNSAFE, alpha=0.15, lw=0, step="post")
    if hi is not None:
        ax.fill_between(t, np.clip(hi, y0, y1), y1, color=UNSAFE, alpha=0.15, lw=0, step="post")
    ax.set_ylim(y0, y1)


def _new_figure(rows, height=2.0):
    fig, axes = plt.subplots(rows, 1, figsize=(8.0, height * rows), sharex=True, squeeze=False)
    return fig, axes[:, 0]


def _save(fig, path):
    fig.tight_layout()
    # fixed salt and no timestamp keep the SVG byte-identical across runs
    with plt.rc_context({"svg.hashsalt": "lff3d"}):
        fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def _colors(n):
    base = ["tab:blue", "tab:red", "tab:green", "tab:orange", "tab:purple", "tab:brown"]
    return [base[i % len(base)] for i in range(n)]


def _label(i, names):
    return names[i] if i < len(names) and names[i] else f"f{i}"


def plot_states(panel, n, path, frustum=None, names=()):
    t = panel["t"]
    fig, axes = _new_figure(4)
    for i, color in enumerate(_colors(n)):
        for ax, s in zip(axes, STATE_NAMES):
            ax.plot(t, panel[f"f{i}.{s}"], color=color, lw=1.2, label=_label(i, names))
            ax.plot(t, panel[f"f{i}.{s}d"], color=color, lw=0.9, ls="--")
    for ax, s, unit in zip(axes, STATE_NAMES, STATE_UNITS):
        ax.set_ylabel(f"{s} [{unit}]")
        ax.grid(alpha=0.3)
    if frustum is not None and n:
        # the bounds depend on the other states, shade for the first follower
        _shade_outside(axes[0], t, panel["f0.L_lo"], panel["f0.L_hi"])
        _shade_outside(axes[1], t, -panel["f0.phi_max"], panel["f0.phi_max"])
        _shade_outside(axes[2], t, -panel["f0.xi_max"], panel["f0.xi_max"])
    axes[0].legend(loc="upper right", fontsize=8)
    axes[-1].set_xlabel("t [s]")
    _save(fig, path)


def plot_min_h(panel, n, path, names=()):
    t = panel["t"]
    fig, axes = _new_figure(1, 2.6)
    ax = axes[0]
    for i, color in enumerate(_colors(n)):
        ax.plot(t, panel[f"f{i}.minh"], color=color, lw=1.2, label=_label(i, names))
    ax.axhline(0.0, color="k", lw=0.8)
    y0, y1 = ax.get_ylim()
    ax.axhspan(min(y0, 0.0), 0.0, color=UNSAFE, alpha=0.15, lw=0)
    for i in range(n):
        for a, b in _spans(t, panel[f"f{i}.interv"] > 0):
            ax.axvspan(a, b, color=INTERVENTION, alpha=0.12, lw=0)
    ax.set_ylim(y0, y1)
    ax.set_ylabel("min h [m]")
    ax.set_xlabel("t [s]")
    ax.grid(alpha=0.3)
    ax.legend(loc="upper right", fontsize=8)
    _save(fig, path)


def plot_u_j(panel, path):
    fig, axes = _new_figure(1, 2.4)
    ax = axes[0]
    ax.plot(panel["t"], panel["leader.unorm"], color="tab:green", lw=1.2)
    ax.set_ylabel("|u_j|")
    ax.set_xlabel("t [s]")
    ax.grid(alpha=0.3)
    _save(fig, path)


def plot_u_norms(panel, n, path, names=()):
    t = panel["t"]
    fig, axes = _new_figure(1, 2.6)
    ax = axes[0]
    for i, color in enumerate(_colors(n)):
        ax.plot(t, panel[f"f{i}.unom_norm"], color=color, lw=0.9, ls="--")
        ax.plot(t, panel[f"f{i}.usafe_norm"], color=color, lw=1.2, label=_label(i, names))
    ax.set_ylabel("|u_nom| (dashed), |u_safe|")
    ax.set_xlabel("t [s]")
    ax.grid(alpha=0.3)
    ax.legend(loc="upper right", fontsize=8)
    _save(fig, path)


def write_panels(table, out_dir, frustum: Optional[FrustumParams] = None, names=()) -> List[Path]:
    """Write ``<panel>.csv`` and ``<panel>.svg`` for every panel."""
    if len(table.get("t", ())) == 0:
        raise LogFormatError("log has no ticks")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    n = n_followers_of(list(table))
    panels = panel_tables(table, frustum)
    written = []
    for name in PANELS:
        path = out / f"{name}.csv"
        write_columns(panels[name], path)
        written.append(path)
    plot_states(panels["states"], n, out / "states.svg", frustum, names)
    plot_min_h(panels["min_h"], n, out / "min_h.svg", names)
    plot_u_j(panels["u_j"], out / "u_j.svg")
    plot_u_norms(panels["u_norms"], n, out / "u_norms.svg", names)
    written += [out / f"{name}.svg" for name in PANELS]
    return written

