import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lff3d.geometry import RelativeState
from lff3d.kinematics import (
    det_G_closed_form,
    eval_F,
    eval_G,
    qdot_direct,
    solve_G,
    xdot,
    xdot_components,
)
from lff3d.oracles import fd_xdot

X0 = RelativeState(1.0, 0.0, 0.0, 0.0)
angles = st.floats(-math.pi, math.pi)
states = st.builds(RelativeState, st.floats(0.2, 5.0), angles, st.floats(-1.3, 1.3), angles)
cmds = st.lists(st.floats(-2.0, 2.0), min_size=4, max_size=4).map(np.array)


def test_F_examples():
    F1 = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 1, 0], [0, -1, 0, 1]], dtype=float)
    np.testing.assert_allclose(eval_F(X0), F1, atol=1e-15)
    F2 = np.array([[1, 0, 0, 0], [0, 0.5, 0, 0], [0, 0, 0.5, 0], [0, -0.5, 0, 1]])
    np.testing.assert_allclose(eval_F(RelativeState(2.0, 0.0, 0.0, 0.0)), F2, atol=1e-15)


def test_G_examples():
    G = np.array([[-1, 0, 0, 0], [0, -1, 0, -1.1], [0, 0, -1, 0], [0, 1, 0, 0.1]])
    np.testing.assert_allclose(eval_G(X0, 0.1), G, atol=1e-15)
    assert np.linalg.det(eval_G(X0, 0.1)) == pytest.approx(1.0, abs=1e-14)
    G0 = eval_G(X0, 0.0)
    np.testing.assert_allclose(G0[3], -G0[1] + [0, 0, 0, -1], atol=1e-15)
    assert np.linalg.det(G0) == pytest.approx(1.0, abs=1e-14)


def test_solve_G_example():
    np.testing.assert_allclose(solve_G(X0, 0.1, [-0.1, 0, 0, 0]), [0.1, 0, 0, 0], atol=1e-15)


def test_qdot_examples():
    np.testing.assert_allclose(qdot_direct(X0, 0.1, [1, 0, 0, 0], np.zeros(4)), [-1, 0, 0], atol=1e-15)
    np.testing.assert_allclose(qdot_direct(X0, 0.1, [0, 0, 0, 1], np.zeros(4)), [0, -1.1, 0], atol=1e-15)
    np.testing.assert_allclose(qdot_direct(X0, 0.1, np.zeros(4), [1, 0, 0, 0]), [1, 0, 0], atol=1e-15)


@settings(max_examples=200)
@given(states, st.floats(0.0, 0.3), cmds, cmds)
def test_scalar_formulas_match_matrix_form(x, d, ui, uj):
    np.testing.assert_allclose(xdot_components(x, d, ui, uj), xdot(x, d, ui, uj), rtol=0, atol=1e-11)


@settings(max_examples=200)
@given(states, st.floats(0.0, 0.3))
def test_det_identity(x, d):
    det = np.linalg.det(eval_G(x, d))
    assert det * x.L ** 2 * math.cos(x.xi) == pytest.approx(1.0, rel=1e-10)
    assert det_G_closed_form(x) == pytest.approx(det, rel=1e-10)


@settings(max_examples=100)
@given(states, st.floats(0.0, 0.3), cmds, cmds)
def test_finite_difference_of_simulated_motion(x, d, ui, uj):
    fd = fd_xdot(x, d, ui, uj)
    an = xdot(x, d, ui, uj)
    assert np.abs(fd - an).max() <= 1e-6 * max(1.0, np.abs(an).max())


def test_singular_elevation_rejected():
    x = RelativeState(1.0, 0.0, math.pi / 2 - 1e-9, 0.0)
    with pytest.raises(ArithmeticError):
        eval_G(x, 0.0)
