import numpy as np
import pytest
from hypothesis import given, strategies as st

from bbmfem.mesh import (
    MAX_DEGREE, Bc, ConfigurationError, FemFunction, UniformMesh, assemble_coupling,
    build_space, evaluate, gauss_legendre, interpolate, l2_project, project_broken_derivative,
    project_function, quadrature_for, reference_basis,
)

degrees = st.integers(1, MAX_DEGREE)
bcs = st.sampled_from(list(Bc))


@given(n=st.integers(1, 8), k=st.integers(0, 15))
def test_gauss_legendre_exactness(n, k):
    rule = gauss_legendre(n)
    approx = rule.weights @ rule.nodes**k
    exact = 1.0 / (k + 1)
    if k <= 2 * n - 1:
        assert approx == pytest.approx(exact, abs=1e-14)


@given(p=st.integers(0, 12))
def test_quadrature_for_is_exact(p):
    rule = quadrature_for(p)
    assert rule.exact_degree >= p
    assert rule.weights @ rule.nodes**p == pytest.approx(1.0 / (p + 1), abs=1e-14)


@given(r=degrees, xi=st.floats(0, 1))
def test_reference_basis_partition_of_unity(r, xi):
    vals, dvals = reference_basis(r, np.array([xi]))
    assert vals.sum() == pytest.approx(1.0, abs=1e-12)
    assert dvals.sum() == pytest.approx(0.0, abs=1e-10)


@given(r=degrees)
def test_reference_basis_is_nodal(r):
    vals, _ = reference_basis(r, np.linspace(0, 1, r + 1))
    np.testing.assert_allclose(vals, np.eye(r + 1), atol=1e-12)


@pytest.mark.parametrize("bc,expected", [(Bc.FREE, 31), (Bc.ZERO, 29), (Bc.PERIODIC, 30)])
def test_dof_counts(bc, expected):
    assert build_space(0, 1, 10, 3, bc).dof_count == expected


def test_configuration_errors():
    with pytest.raises(ConfigurationError):
        UniformMesh(1.0, 0.0, 4)
    with pytest.raises(ConfigurationError):
        UniformMesh(0.0, 1.0, 1)
    with pytest.raises(ConfigurationError):
        build_space(0, 1, 4, 5, Bc.FREE)
    with pytest.raises(ValueError):
        FemFunction(build_space(0, 1, 4, 1, Bc.FREE), np.zeros(3))


def test_mesh_nodes_are_exact_at_endpoints():
    m = UniformMesh(-0.3, 0.7, 7)
    assert m.node(7) == 0.7
    assert m.node(0) == -0.3


@given(r=degrees, bc=bcs, n=st.integers(2, 9))
def test_mass_and_stiffness_properties(r, bc, n):
    space = build_space(-1.0, 2.0, n, r, bc)
    M, S = space.mass(), space.stiffness()
    assert abs(M - M.T).max() < 1e-14
    assert abs(S - S.T).max() < 1e-14
    if bc is not Bc.ZERO:
        one = np.ones(space.dof_count)
        assert one @ M @ one == pytest.approx(3.0, rel=1e-13)
        assert np.abs(S @ one).max() < 1e-11
    assert np.linalg.eigvalsh(M.toarray()).min() > 0


@given(r=degrees, n=st.integers(2, 8), coeffs=st.lists(st.floats(-2, 2), min_size=5, max_size=5))
def test_interpolation_reproduces_polynomials(r, n, coeffs):
    poly = np.polynomial.Polynomial(coeffs[: r + 1])
    space = build_space(0.0, 1.5, n, r, Bc.FREE)
    f = interpolate(space, poly)
    x = np.linspace(0, 1.5, 37)
    v, d = evaluate(f, x)
    np.testing.assert_allclose(v, poly(x), atol=1e-11)
    np.testing.assert_allclose(d[1:], poly.deriv()(x[1:]), atol=1e-9)


@given(r=degrees, bc=bcs)
def test_projection_is_idempotent(r, bc):
    space = build_space(0.0, 2 * np.pi, 6, r, bc)
    f = l2_project(space, lambda x: np.sin(x) ** 2)
    g = project_function(f, space)
    np.testing.assert_allclose(g.values, f.values, atol=1e-12)


@given(r=degrees)
def test_projected_derivative_of_smooth_function(r):
    space = build_space(0.0, 2 * np.pi, 40, r, Bc.PERIODIC)
    f = l2_project(space, np.sin)
    df = project_broken_derivative(f, space)
    x = np.linspace(0, 2 * np.pi, 50)
    assert np.abs(df(x) - np.cos(x)).max() < 0.05 ** r * 5


def test_coupling_matches_derivative_load():
    space = build_space(0.0, 1.0, 5, 2, Bc.FREE)
    G = assemble_coupling(space, space)
    rng = np.random.default_rng(0)
    a, b = rng.normal(size=(2, space.dof_count))
    fa = FemFunction(space, a)
    fb = FemFunction(space, b)
    rule = quadrature_for(4)
    w = space.quad_weights(rule)
    direct = w @ (space.at_quad(a, rule, derivative=True) * space.at_quad(b, rule))
    assert a @ G @ b == pytest.approx(direct, abs=1e-12)
    assert fa(0.5) == pytest.approx(evaluate(fa, 0.5)[0])
    del fb


@given(x=st.floats(-50, 50))
def test_periodic_evaluation_wraps(x):
    space = build_space(0.0, 2.0, 8, 2, Bc.PERIODIC)
    f = l2_project(space, lambda s: np.cos(np.pi * s))
    assert f(x) == pytest.approx(f(float(space.wrap(x))), abs=1e-12)


def test_evaluate_preserves_shape_and_rejects_outside():
    space = build_space(0.0, 1.0, 4, 3, Bc.FREE)
    f = interpolate(space, lambda x: x**2)
    v, d = evaluate(f, np.full((3, 2), 0.5))
    assert v.shape == d.shape == (3, 2)
    assert np.ndim(evaluate(f, 0.25)[0]) == 0
    with pytest.raises(ValueError):
        evaluate(f, 1.5)


def test_zero_space_vanishes_at_endpoints():
    space = build_space(0.0, 1.0, 5, 2, Bc.ZERO)
    f = FemFunction(space, np.random.default_rng(1).normal(size=space.dof_count))
    assert f(0.0) == 0.0 and f(1.0) == 0.0


def test_projection_error_fourth_order_against_dense_quadrature():
    f = lambda x: np.sin(2 * np.pi * np.asarray(x))  # noqa: E731
    errs = []
    for n in (20, 40):
        space = build_space(0.0, 1.0, n, 3, Bc.PERIODIC)
        Pf = l2_project(space, f)
        x = np.linspace(0.0, 1.0, 200_001)
        diff2 = (Pf(x) - f(x)) ** 2
        errs.append(np.sqrt(np.trapezoid(diff2, x)))
    assert errs[1] <= 10 * (1 / 40) ** 4
    assert np.log2(errs[0] / errs[1]) == pytest.approx(4.0, abs=0.15)
