import json

import numpy as np
import pytest

from lff3d import logio

GOLDEN_HEADER = (
    "t,leader.px,leader.py,leader.pz,leader.psi,leader.unorm,"
    "f0.L,f0.phi,f0.xi,f0.alpha,f0.Ld,f0.phid,f0.xid,f0.alphad,"
    "f0.hx1,f0.hx2,f0.hx3,f0.hx4,f0.hx5,f0.hx6,f0.minh,"
    "f0.unom0,f0.unom1,f0.unom2,f0.unom3,f0.usafe0,f0.usafe1,f0.usafe2,f0.usafe3,"
    "f0.z1,f0.z2,f0.z3,f0.z4,f0.z5,f0.z6,f0.interv,f0.qpstat"
)


def test_golden_header(hold, tmp_path):
    _, log, _ = hold
    path = tmp_path / "log.csv"
    logio.write_log(log, path)
    assert path.read_text().splitlines()[0] == GOLDEN_HEADER
    assert ",".join(logio.columns(1)) == GOLDEN_HEADER


def test_csv_round_trip_is_bit_exact(three_stage, tmp_path):
    cfg, log, table = three_stage
    path = tmp_path / "log.csv"
    logio.write_csv(table, path)
    back = logio.read_csv(path)
    assert list(back) == list(table)
    for c in table:
        np.testing.assert_array_equal(back[c], table[c])


def test_summary_recomputable_from_csv(three_stage, tmp_path):
    cfg, log, table = three_stage
    path = tmp_path / "log.csv"
    logio.write_csv(table, path)
    a = logio.dump_summary(logio.summary_for_config(table, cfg))
    b = logio.dump_summary(logio.summary_for_config(logio.read_csv(path), cfg))
    assert a == b
    s = json.loads(a)
    cbf, nocbf = s["followers"]
    assert [st["t_start"] for st in cbf["stages"]] == [0.0, 10.0, 25.0]
    assert cbf["qp_status_counts"] == {"disabled": 0, "optimal": 3500, "max_iterations": 0, "infeasible": 0}
    assert nocbf["qp_status_counts"]["disabled"] == 3500
    assert cbf["intervention_duration"] == pytest.approx(cbf["intervention_ticks"] * 0.01)
    assert nocbf["min_h"] < -0.05 <= cbf["min_h"]


def test_nan_columns_after_termination(tmp_path):
    table = {c: np.array([0.0, 1.0]) for c in logio.columns(1)}
    table["f0.interv"] = np.array([0, 0])
    table["f0.qpstat"] = np.array([-1, -1])
    for c in logio.FOLLOWER_FIELDS[:-2]:
        table[f"f0.{c}"][1] = np.nan
    s = logio.summarize(table, 0.01, [[0.0]])
    assert s["followers"][0]["terminated_tick"] == 1
    path = tmp_path / "log.csv"
    logio.write_csv(table, path)
    assert np.isnan(logio.read_csv(path)["f0.L"][1])


@pytest.mark.parametrize("text, match", [
    ("", "empty"),
    (GOLDEN_HEADER + "\n", "no ticks"),
    ("t,x\n0,1\n", "column contract"),
    (GOLDEN_HEADER + "\n" + "0," * 3 + "\n", "wrong width"),
])
def test_bad_logs_rejected(tmp_path, text, match):
    path = tmp_path / "log.csv"
    path.write_text(text)
    with pytest.raises(logio.LogFormatError, match=match):
        logio.read_csv(path)


def test_missing_file_rejected(tmp_path):
    with pytest.raises(logio.LogFormatError):
        logio.read_csv(tmp_path / "absent.csv")
