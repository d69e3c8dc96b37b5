import numpy as np
import pytest
import scipy.sparse as sp

from voltacell import assemble as asm
from voltacell import spaces as sps
from voltacell.mesh import rectangle_mesh
from voltacell.solve import SolveError, SpdFactor, solve_spd


def test_identity_returns_rhs():
    a = sp.eye(5, format="csr")
    b = np.arange(5.0)
    assert np.allclose(solve_spd(a, b), b)


def test_hand_2x2():
    a = sp.csr_matrix(np.array([[2.0, 1.0], [1.0, 2.0]]))
    x = solve_spd(a, np.array([3.0, 3.0]))
    assert np.allclose(x, [1.0, 1.0], atol=1e-14)


def test_zero_rhs_shortcut():
    a = sp.eye(4, format="csr") * 3.0
    assert np.array_equal(solve_spd(a, np.zeros(4)), np.zeros(4))


@pytest.mark.parametrize("method", ["direct", "cg"])
def test_assembled_system_matches_dense_factorization(method):
    m = rectangle_mesh(1.0, 1.0, 4, 4, degree=2)
    s = sps.build_field_space(m, sps.OMEGA, name="t")
    a = asm.assemble_stiffness(s, 2.0) + asm.assemble_mass(s, 1.0)
    rng = np.random.default_rng(5)
    b = rng.normal(size=s.ndof)
    x = solve_spd(a, b, method=method)
    x_dense = np.linalg.solve(a.toarray(), b)
    assert np.linalg.norm(x - x_dense) / np.linalg.norm(x_dense) < 1e-8


def test_factor_reuse():
    a = sp.csr_matrix(np.diag([1.0, 2.0, 4.0]))
    f = SpdFactor(a)
    for k in range(3):
        b = np.full(3, float(k + 1))
        assert np.allclose(f.solve(b), b / np.array([1.0, 2.0, 4.0]))


def test_non_convergence_reports_residual():
    # an indefinite matrix defeats CG; the failure carries the residual
    a = sp.csr_matrix(np.array([[1.0, 0.0], [0.0, -1.0]]))
    with pytest.raises(SolveError):
        solve_spd(a, np.array([1.0, 1.0]), method="cg")


def test_rtol_enforced():
    a = sp.eye(3, format="csr")
    f = SpdFactor(a, rtol=1e-10)
    x = f.solve(np.ones(3))
    assert np.allclose(x, 1.0)
