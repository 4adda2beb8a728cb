"""Acceptance criteria 1-10, one PASS/FAIL line each.

Lines are collected in ``RESULTS`` and printed at the end of the pytest run
(see conftest.py), or directly when this file is executed as a script.
"""

import math
import time

import numpy as np
import pytest

from lff3d import kinematics, qp
from lff3d.barriers import constraint_matrices
from lff3d.cli import main as cli_main
from lff3d.config import load_preset
from lff3d.controller import Gains
from lff3d.geometry import FrustumParams, RelativeState
from lff3d.oracles import enumerate_filter_qp, fd_xdot
from lff3d.safety_filter import CbfParams, build_problem, filter_command
from lff3d.sim import run_scenario
from lff3d.verify import SEED, random_filter_instance, random_state, run_checks

RESULTS = {}


def record(n: int, ok: bool, detail: str) -> None:
    RESULTS[n] = f"{'PASS' if ok else 'FAIL'} criterion {n:>2}: {detail}"
    print(RESULTS[n])


def _sample_kinematics(n, seed):
    rng = np.random.default_rng(seed)
    for _ in range(n):
        x = random_state(rng)
        d = rng.uniform(0.0, 0.3)
        yield x, d, rng.normal(size=4), rng.normal(size=4)


def test_c01_kinematics_oracle():
    t0 = time.perf_counter()
    fd_worst = scalar_worst = 0.0
    n = 10_000
    for x, d, ui, uj in _sample_kinematics(n, SEED):
        an = kinematics.xdot(x, d, ui, uj)
        scale = max(1.0, np.abs(an).max())
        fd_worst = max(fd_worst, np.abs(fd_xdot(x, d, ui, uj) - an).max() / scale)
        scalar_worst = max(scalar_worst, np.abs(kinematics.xdot_components(x, d, ui, uj) - an).max() / scale)
    secs = time.perf_counter() - t0
    ok = fd_worst <= 1e-6 and scalar_worst <= 1e-12 and secs <= 10.0
    record(1, ok, f"n={n} fd rel={fd_worst:.2e} (<=1e-6) scalar rel={scalar_worst:.2e} (<=1e-12) "
                  f"runtime={secs:.2f}s (<=10)")
    assert ok


def test_c02_determinant_identity():
    worst = 0.0
    n = 10_000
    for x, d, _, _ in _sample_kinematics(n, SEED):
        det = np.linalg.det(kinematics.eval_G(x, d))
        worst = max(worst, abs(det * x.L ** 2 * math.cos(x.xi) - 1.0))
    ok = worst <= 1e-10
    record(2, ok, f"n={n} |det(G) L^2 cos(xi) - 1| max={worst:.2e} (<=1e-10)")
    assert ok


def test_c03_exponential_tracking():
    base = load_preset("hold")
    target = np.array(base.followers[0].reference.stages[0].x)
    rng = np.random.default_rng(SEED)
    lam = Gains(**base.gains.model_dump()).lambda_min
    worst_ratio = 0.0
    for _ in range(5):
        e0 = rng.normal(size=4)
        e0 *= rng.uniform(0.1, 0.5) / np.linalg.norm(e0)
        data = base.model_dump(mode="json")
        data["followers"][0]["cbf_enabled"] = False
        data["followers"][0]["initial"] = {"relative": (target + e0).tolist()}
        cfg = type(base).model_validate(data)
        log = run_scenario(cfg)
        f = log.followers[0]
        t = log.t
        norms = np.linalg.norm(f.e, axis=1)
        envelope = np.exp(-lam * t) * np.linalg.norm(f.e[0])
        worst_ratio = max(worst_ratio, float((norms / envelope).max()))
    ok = worst_ratio <= 1.05
    record(3, ok, f"5 initial errors, max ||e(t)|| / (e^(-{lam:g} t)||e(0)||) = {worst_ratio:.6f} (<=1.05) on [0, 5] s")
    assert ok


def _unique_active_runs(trace, row):
    mask = np.array([a == (row,) for a in trace.cbf_active])
    k, n = 0, len(mask)
    while k < n:
        if mask[k]:
            j = k
            while j + 1 < n and mask[j + 1]:
                j += 1
            yield k, j
            k = j + 1
        else:
            k += 1


def _invariance(cfg, log):
    f = log.followers[0]
    kappa = cfg.cbf.kappa
    min_h = float(np.nanmin(f.min_h))
    max_slack = float(np.nanmax(f.slacks))
    bound_gap = math.inf
    runs = 0
    for row in range(6):
        for a, b in _unique_active_runs(f, row):
            runs += 1
            tau = log.t[a:b + 1] - log.t[a]
            gap = f.h[a:b + 1, row] - (np.exp(-kappa * tau) * f.h[a, row] - 5e-3)
            bound_gap = min(bound_gap, float(gap.min()))
    return min_h, max_slack, bound_gap, runs


def test_c04_forward_invariance(three_stage, abrupt):
    parts, ok = [], True
    for name, (cfg, log, _) in (("three_stage", three_stage), ("abrupt", abrupt)):
        min_h, max_slack, gap, runs = _invariance(cfg, log)
        good = min_h >= -1e-3 and max_slack == 0.0 and gap >= 0.0
        ok &= good
        parts.append(f"{name}: min_h={min_h:.2e} max_slack={max_slack:.1e} "
                     f"exp-bound margin={gap:.2e} over {runs} unique-active runs")
    record(4, ok, "; ".join(parts) + " (min_h>=-1e-3, slack=0, margin>=0)")
    assert ok


def test_c05_baseline_contrast(three_stage):
    cfg, log, _ = three_stage
    t = log.t
    cbf, nocbf = log.followers
    stage2 = (t >= 10.0) & (t < 25.0)
    nocbf_min = float(np.nanmin(nocbf.min_h[stage2]))
    cbf_min = float(np.nanmin(cbf.min_h))
    late = t >= 28.0
    e_cbf = float(np.linalg.norm(cbf.e[late], axis=1).max())
    e_nocbf = float(np.linalg.norm(nocbf.e[late], axis=1).max())
    ok = nocbf_min < -0.05 and cbf_min >= -1e-3 and e_cbf <= 1e-2 and e_nocbf <= 1e-2
    record(5, ok, f"NoCBF stage-2 min_h={nocbf_min:.3f} (<-0.05), CBF min_h={cbf_min:.2e} (>=-1e-3), "
                  f"||e|| from 28 s: CBF {e_cbf:.1e}, NoCBF {e_nocbf:.1e} (<=1e-2)")
    assert ok


def test_c06_abrupt_contrast(abrupt):
    cfg, log, _ = abrupt
    cbf, nocbf = log.followers
    nocbf_min = float(np.nanmin(nocbf.min_h))
    cbf_min = float(np.nanmin(cbf.min_h))
    stop = float(log.t[np.flatnonzero(np.linalg.norm(log.leader_u, axis=1) > 0)[-1] + 1])
    after = log.t >= stop + 3.0
    e_cbf = float(np.linalg.norm(cbf.e[after], axis=1).max())
    ok = nocbf_min < 0.0 and cbf_min >= -1e-3 and e_cbf <= 1e-2
    record(6, ok, f"leader stops at {stop:.2f} s; NoCBF min_h={nocbf_min:.4f} (<0), CBF min_h={cbf_min:.4f} "
                  f"(>=-1e-3), CBF ||e|| from {stop + 3:.2f} s={e_cbf:.1e} (<=1e-2)")
    assert ok


def test_c07_qp_against_enumeration():
    rng = np.random.default_rng(SEED + 70)
    n = 1000
    dz = kkt = 0.0
    deterministic = True
    for _ in range(n):
        A, b, u_nom, params = random_filter_instance(rng)
        p = build_problem(A, b, u_nom, params)
        s1, s2 = qp.solve(p), qp.solve(p)
        deterministic &= bool(np.array_equal(s1.z, s2.z)) and s1.active_set == s2.active_set
        z, _ = enumerate_filter_qp(A, b, u_nom, params.rho, params.u_min, params.u_max)
        dz = max(dz, float(np.abs(s1.z - z).max()))
        kkt = max(kkt, s1.kkt_residual if s1.optimal else math.inf)
    ok = dz <= 1e-7 and kkt <= 1e-8 and deterministic
    record(7, ok, f"n={n} max|z - z_oracle|={dz:.2e} (<=1e-7) max KKT={kkt:.2e} (<=1e-8) "
                  f"deterministic={deterministic}")
    assert ok


def test_c08_minimal_modification():
    rng = np.random.default_rng(SEED + 80)
    fr = FrustumParams(math.pi / 2, math.pi / 3, 0.3, 3.0, 0.05)
    params = CbfParams()
    n_feasible = n_single = 0
    exact = True
    proj_err = 0.0
    while n_feasible < 500 or n_single < 500:
        x = RelativeState(rng.uniform(0.4, 2.8), rng.uniform(-0.7, 0.7), rng.uniform(-0.45, 0.45),
                          rng.uniform(-math.pi, math.pi))
        u_j = rng.normal(size=4) * 0.5
        u_nom = rng.normal(size=4) * rng.uniform(0.1, 2.0)
        A, b, _ = constraint_matrices(x, fr.d_cam, fr, u_j, params.kappa)
        viol = A @ u_nom < b
        in_box = np.all(np.abs(u_nom) <= 2.0)
        if not viol.any() and in_box and n_feasible < 500:
            n_feasible += 1
            r = filter_command(x, fr.d_cam, fr, u_nom, u_j, params)
            exact &= bool(np.array_equal(r.u_safe.as_array(), u_nom)) and not r.slacks.any()
        elif viol.sum() == 1 and in_box and n_single < 500:
            k = int(np.flatnonzero(viol)[0])
            a = A[k]
            lam = (b[k] - a @ u_nom) / (a @ a)
            proj = u_nom + lam * a
            # single active halfspace: projection stays in the box, keeps the
            # other rows and its multiplier is below the slack price
            if np.all(np.abs(proj) < 2.0) and np.all(np.delete(A @ proj - b, k) > 0) and lam < params.rho:
                n_single += 1
                r = filter_command(x, fr.d_cam, fr, u_nom, u_j, params)
                proj_err = max(proj_err, float(np.abs(r.u_safe.as_array() - proj).max()))
    ok = exact and proj_err <= 1e-9
    record(8, ok, f"{n_feasible} feasible u_nom returned exactly={exact}; {n_single} single-halfspace "
                  f"max|u_safe - projection|={proj_err:.2e} (<=1e-9)")
    assert ok


def _stage1_means(log):
    f = log.followers[0]
    s1 = log.t < 10.0
    return np.abs(f.e[s1]).mean(axis=0)


def test_c09_time_averaged_errors(lemniscate):
    cfg, log, _ = lemniscate
    cbf = cfg.cbf.model_dump(mode="json")
    cbf["delta"] = [0.0] * 6
    ideal_log = run_scenario(load_preset("lemniscate", tau_lag=0.0, cbf=cbf, duration=10.0))
    ideal = _stage1_means(ideal_log)
    lag = _stage1_means(log)
    ok_ideal = ideal[0] <= 0.005 and ideal[2] <= 0.005 and ideal[3] <= 0.005
    ok_lag = lag[0] <= 0.040 and lag[2] <= 0.020 and lag[3] <= 0.058
    ok = bool(ok_ideal and ok_lag)
    record(9, ok, f"ideal |eL|,|exi|,|ealpha| = {ideal[0]:.1e},{ideal[2]:.1e},{ideal[3]:.1e} (<=0.005); "
                  f"lag {cfg.tau_lag}s = {lag[0]:.4f},{lag[2]:.4f},{lag[3]:.4f} (<=0.040,0.020,0.058)")
    assert ok


def test_c10_reproducibility(tmp_path, session_start):
    results = run_checks()
    green = all(r.passed for r in results)
    for d in ("a", "b"):
        cli_main(["simulate", "--preset", "three_stage", "--out", str(tmp_path / d)])
    same = all((tmp_path / "a" / n).read_bytes() == (tmp_path / "b" / n).read_bytes()
               for n in ("log.csv", "summary.json"))
    elapsed = time.monotonic() - session_start
    ok = green and same and elapsed <= 120.0
    record(10, ok, f"verify green={green} ({len(results)} checks), simulate logs byte-identical={same}, "
                   f"suite time so far {elapsed:.1f}s (<=120; full-suite time printed at the end)")
    assert ok


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-q"]))
