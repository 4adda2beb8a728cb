import numpy as np
import pytest

from lff3d import logio
from lff3d.plotting import PANELS, panel_tables, unsafe_bounds, write_panels


def test_four_panels_written(three_stage, tmp_path):
    cfg, _, table = three_stage
    paths = write_panels(table, tmp_path, cfg.frustum_params(), ["cbf", "nocbf"])
    assert sorted(p.name for p in paths) == sorted([f"{n}.csv" for n in PANELS] + [f"{n}.svg" for n in PANELS])
    for p in paths:
        assert p.stat().st_size > 0
    header = (tmp_path / "states.csv").read_text().splitlines()[0].split(",")
    assert header[:3] == ["t", "f0.L", "f0.Ld"]
    assert "f0.xi_max" in header
    assert (tmp_path / "min_h.svg").read_text().lstrip().startswith("<?xml")


def test_panels_are_column_projections(three_stage):
    cfg, _, table = three_stage
    panels = panel_tables(table)
    np.testing.assert_array_equal(panels["min_h"]["f1.minh"], table["f1.minh"])
    un = np.sqrt(sum(table[f"f0.usafe{k}"] ** 2 for k in range(4)))
    np.testing.assert_array_equal(panels["u_norms"]["f0.usafe_norm"], un)


def test_unsafe_bounds_on_boresight(three_stage):
    cfg, _, table = three_stage
    fr = cfg.frustum_params()
    small = {c: v[:1].copy() for c, v in table.items()}
    small["f0.phi"][:] = 0.0
    small["f0.xi"][:] = 0.0
    b = unsafe_bounds(small, 0, fr)
    assert b["L_lo"][0] == pytest.approx(fr.x_near)
    assert b["L_hi"][0] == pytest.approx(fr.x_far)
    assert b["xi_max"][0] == pytest.approx(fr.theta_fov / 2)


def test_u_j_panel_shows_the_stop(abrupt):
    _, _, table = abrupt
    panel = panel_tables(table)["u_j"]
    t, u = panel["t"], panel["leader.unorm"]
    assert u[(t > 2.0) & (t < 8.0)].min() == pytest.approx(1.6)
    assert u[t >= 8.0].max() == 0.0


def test_empty_log_is_an_error(tmp_path):
    table = {c: np.array([]) for c in logio.columns(1)}
    with pytest.raises(logio.LogFormatError):
        write_panels(table, tmp_path)


def test_svg_output_is_deterministic(hold, tmp_path):
    _, _, table = hold
    write_panels(table, tmp_path / "a")
    write_panels(table, tmp_path / "b")
    for n in PANELS:
        assert (tmp_path / "a" / f"{n}.svg").read_bytes() == (tmp_path / "b" / f"{n}.svg").read_bytes()
