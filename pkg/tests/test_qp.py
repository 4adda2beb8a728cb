import numpy as np
import pytest

from lff3d import qp
from lff3d.oracles import enumerate_qp


def test_unconstrained_minimizer():
    p = qp.QpProblem(np.eye(2), [-1.0, -2.0], [[1.0, 0.0]], [-10.0])
    s = qp.solve(p)
    assert s.optimal
    np.testing.assert_allclose(s.z, [1.0, 2.0], atol=1e-15)
    assert s.active_set == ()


def test_halfspace_projection():
    u0 = np.array([1.0, -0.5, 0.3, 0.0])
    a = np.array([0.3, 1.0, -0.2, 0.5])
    b = 1.0
    s = qp.solve(qp.QpProblem(np.eye(4), -u0, a[None, :], [b]))
    expected = u0 + a * (b - a @ u0) / (a @ a)
    np.testing.assert_allclose(s.z, expected, atol=1e-12)
    assert s.active_set == (0,)
    assert s.kkt_residual <= 1e-12


def test_infeasible_detected():
    # z >= 1 and -z >= 0 cannot both hold
    s = qp.solve(qp.QpProblem(np.eye(1), [0.0], [[1.0], [-1.0]], [1.0, 0.0]))
    assert s.status == qp.INFEASIBLE


def test_rejects_bad_problem():
    with pytest.raises(qp.QpError):
        qp.QpProblem([[1.0, 2.0], [0.0, 1.0]], [0, 0], np.zeros((0, 2)), [])
    with pytest.raises(qp.QpError):
        qp.QpProblem(np.eye(2), [np.nan, 0.0], np.zeros((0, 2)), [])


@pytest.mark.parametrize("seed", range(4))
def test_random_instances_match_enumeration(seed):
    rng = np.random.default_rng(seed)
    n, m = 10, 8
    Q = np.diag(rng.uniform(0.5, 5.0, n))
    c = rng.normal(size=n)
    A = rng.normal(size=(m, n))
    b = A @ rng.normal(size=n) - rng.uniform(0.0, 1.0, m)  # feasible by construction
    s = qp.solve(qp.QpProblem(Q, c, A, b))
    z, _ = enumerate_qp(Q, c, A, b)
    assert s.optimal
    np.testing.assert_allclose(s.z, z, atol=1e-7)
    assert s.kkt_residual <= 1e-8


def test_warm_start_changes_only_iterations():
    rng = np.random.default_rng(7)
    Q = np.eye(6)
    c = rng.normal(size=6)
    A = rng.normal(size=(9, 6))
    b = A @ rng.normal(size=6) + 0.3
    p = qp.QpProblem(Q, c, A, b)
    cold = qp.solve(p)
    warm = qp.solve(p, warm_start=cold.active_set)
    np.testing.assert_allclose(warm.z, cold.z, atol=1e-12)
    assert warm.iterations <= cold.iterations
