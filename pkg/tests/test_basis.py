import numpy as np
import pytest

from voltacell import basis


def test_bilinear_center():
    vals, _ = basis.shape_eval((1, 1), (0.0, 0.0))
    assert np.allclose(vals, 0.25)


@pytest.mark.parametrize("degrees", [(1, 1), (2, 2), (3, 4), (4, 2)])
def test_partition_of_unity(degrees):
    rng = np.random.default_rng(42)
    pts = rng.uniform(-1.0, 1.0, size=(25, 2))
    vals, grads = basis.shape_eval(degrees, pts)
    assert np.allclose(vals.sum(axis=1), 1.0, atol=1e-13)
    assert np.allclose(grads.sum(axis=1), 0.0, atol=1e-11)


def test_indicator_at_nodes():
    ref = basis.ref_element(2, 2)
    vals, _ = basis.shape_eval((2, 2), ref.node_grid())
    assert np.allclose(vals, np.eye(9), atol=1e-12)


@pytest.mark.parametrize("p", [1, 2, 3, 4])
def test_derivatives_match_finite_differences(p):
    xs = np.array([-0.83, -0.31, 0.05, 0.47, 0.92])
    _, ders = basis.lagrange_eval(p, xs)
    h = 1e-6
    vp, _ = basis.lagrange_eval(p, xs + h)
    vmn, _ = basis.lagrange_eval(p, xs - h)
    assert np.allclose((vp - vmn) / (2 * h), ders, atol=1e-8)


def test_derivatives_at_nodes_consistent():
    p = 3
    nodes = basis.gauss_lobatto_nodes(p)
    _, at_nodes = basis.lagrange_eval(p, nodes)
    _, nearby = basis.lagrange_eval(p, nodes + 1e-9)
    assert np.allclose(at_nodes, nearby, atol=1e-6)


def test_gauss_lobatto_endpoints_and_symmetry():
    for p in range(1, 8):
        nodes = basis.gauss_lobatto_nodes(p)
        assert len(nodes) == p + 1
        assert nodes[0] == -1.0 and nodes[-1] == 1.0
        assert np.allclose(nodes, -nodes[::-1], atol=1e-14)


@pytest.mark.parametrize("n", [1, 2, 3, 5, 8])
def test_quadrature_exactness(n):
    rule = basis.gauss_legendre(n)
    assert np.all(rule.weights > 0)
    for k in range(2 * n):
        exact = 0.0 if k % 2 else 2.0 / (k + 1)
        got = float((rule.weights * rule.points ** k).sum())
        assert got == pytest.approx(exact, abs=1e-14)


def test_shape_eval_reproduces_polynomials():
    """The degree-(px,py) basis interpolates x^px * y^py exactly."""
    px, py = 3, 2
    ref = basis.ref_element(px, py)
    nodes = ref.node_grid()
    coeffs = nodes[:, 0] ** px * nodes[:, 1] ** py
    pts = np.random.default_rng(0).uniform(-1, 1, size=(20, 2))
    vals, _ = basis.shape_eval((px, py), pts)
    exact = pts[:, 0] ** px * pts[:, 1] ** py
    assert np.allclose(vals @ coeffs, exact, atol=1e-12)


def test_degree_bounds():
    with pytest.raises(ValueError):
        basis.gauss_lobatto_nodes(0)
    with pytest.raises(ValueError):
        basis.gauss_legendre(0)
