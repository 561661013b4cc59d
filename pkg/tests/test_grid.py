import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spectral import ExternalPotential, GridFunction, assemble_operator, build_domain, realize_potential
from spectral.oracle import dense_eig, laplacian_eigenvalues_1d


def test_build_domain_1d():
    d = build_domain(1, [1.0], [3])
    assert d.spacing == (0.25,)
    assert d.n == 3


def test_build_domain_2d():
    d = build_domain(2, [1.0, 1.0], [4, 4])
    assert d.n == 16
    assert d.spacing == pytest.approx((0.2, 0.2))


@pytest.mark.parametrize("dim", [0, 4])
def test_dimension_limit(dim):
    with pytest.raises(ValueError, match="dimension must be <= 3"):
        build_domain(dim, [1.0] * max(dim, 1), [3] * max(dim, 1))


@pytest.mark.parametrize("extents, points", [([0.0], [3]), ([-1.0], [3]), ([1.0], [2]), ([1.0], [0])])
def test_rejects_bad_axes(extents, points):
    with pytest.raises(ValueError):
        build_domain(1, extents, points)


@given(st.lists(st.integers(3, 6), min_size=1, max_size=3))
def test_index_maps_are_inverse(points):
    d = build_domain(len(points), [1.0] * len(points), points)
    idx = np.arange(d.n)
    assert np.array_equal(d.to_linear(d.to_multi(idx)), idx)


def test_coordinates_follow_linear_index():
    d = build_domain(2, [1.0, 2.0], [3, 4])
    x = d.coordinates()
    i = d.to_linear([1, 2])
    assert x[i] == pytest.approx([0.5, 1.2])


def test_operator_1d_small():
    d = build_domain(1, [1.0], [3])
    A = assemble_operator(d).matrix.toarray()
    assert np.array_equal(np.diag(A), [32.0, 32.0, 32.0])
    assert np.array_equal(np.diag(A, 1), [-16.0, -16.0])
    assert A[0, 2] == 0.0


def test_constant_potential_shifts_diagonal():
    d = build_domain(1, [1.0], [3])
    A = assemble_operator(d, np.full(3, 5.0)).matrix.toarray()
    assert np.array_equal(np.diag(A), [37.0, 37.0, 37.0])
    assert np.array_equal(np.diag(A, -1), [-16.0, -16.0])


def test_smallest_eigenvalue_near_pi_squared():
    d = build_domain(1, [1.0], [199])
    lam = dense_eig(assemble_operator(d).matrix).eigenvalues
    assert abs(lam[0] - math.pi**2) / math.pi**2 < 1e-3


@pytest.mark.parametrize("dim, points", [(1, [7]), (2, [4, 5]), (3, [3, 4, 3])])
def test_operator_structure(dim, points):
    d = build_domain(dim, [1.0, 0.7, 1.3][:dim], points)
    A = assemble_operator(d).matrix
    assert (A != A.T).nnz == 0
    expected = sum(2.0 / h**2 for h in d.spacing)
    assert np.all(A.diagonal() == expected)
    assert np.max(np.diff(A.indptr)) <= 2 * dim + 1
    coo = A.tocoo()
    off = coo.row != coo.col
    steps = np.abs(d.to_multi(coo.row[off]) - d.to_multi(coo.col[off]))
    assert np.all(steps.sum(axis=1) == 1)
    axis = np.argmax(steps, axis=1)
    assert np.allclose(coo.data[off], [-1.0 / d.spacing[a] ** 2 for a in axis], rtol=0, atol=0)


@pytest.mark.parametrize("m", [1, 2, 5, 17])
def test_dirichlet_consistency(m):
    d = build_domain(1, [1.0], [99])
    h = d.spacing[0]
    x = d.axis_coordinates(0)
    u = np.sin(m * math.pi * x)
    Au = assemble_operator(d).matrix @ u
    factor = 4 / h**2 * math.sin(m * math.pi * h / 2) ** 2
    assert np.max(np.abs(Au - factor * u)) / np.max(np.abs(factor * u)) <= 1e-12


def test_positive_potential_keeps_spectrum_positive():
    d = build_domain(2, [1.0, 1.0], [6, 6])
    op = assemble_operator(d, ExternalPotential.harmonic([0.5, 0.5], 30.0))
    assert dense_eig(op.matrix).eigenvalues[0] > 0


def test_weyl_scaling():
    d = build_domain(1, [1.0], [400])
    lam = dense_eig(assemble_operator(d).matrix).eigenvalues
    m = np.arange(1, 41)
    ratio = lam[:40] / m**2
    assert np.all((ratio >= 9.0) & (ratio <= 10.5))
    assert np.allclose(lam, laplacian_eigenvalues_1d(400), rtol=1e-10)


def test_realize_zero():
    d = build_domain(2, [1.0, 1.0], [3, 3])
    assert np.array_equal(realize_potential(ExternalPotential.zero(), d).values, np.zeros(9))


def test_realize_harmonic():
    d = build_domain(1, [1.0], [3])
    v = ExternalPotential.harmonic(0.5, 100.0).realize(d).values
    assert v == pytest.approx([6.25, 0.0, 6.25])


def test_realize_square_well():
    d = build_domain(1, [1.0], [3])
    v = ExternalPotential.square_well(-50.0, [0.25], [0.75]).realize(d).values
    assert np.array_equal(v, [-50.0, -50.0, -50.0])
    narrow = ExternalPotential.square_well(-50.0, [0.4], [0.6]).realize(d).values
    assert np.array_equal(narrow, [0.0, -50.0, 0.0])


def test_realize_rejects_bad_parameters():
    d = build_domain(1, [1.0], [3])
    with pytest.raises(ValueError, match="outside"):
        ExternalPotential.square_well(-1.0, [0.5], [1.5]).realize(d)
    with pytest.raises(ValueError, match="finite"):
        ExternalPotential.harmonic(0.5, float("inf")).realize(d)
    with pytest.raises(ValueError, match="finite"):
        ExternalPotential.square_well(float("nan"), [0.2], [0.4]).realize(d)


def test_potential_domain_mismatch():
    d1 = build_domain(1, [1.0], [3])
    d2 = build_domain(1, [1.0], [5])
    with pytest.raises(ValueError, match="different domain"):
        assemble_operator(d2, ExternalPotential.zero().realize(d1))
    with pytest.raises(ValueError):
        assemble_operator(d2, np.zeros(3))


def test_grid_function_rejects_nonfinite():
    d = build_domain(1, [1.0], [3])
    with pytest.raises(ValueError):
        GridFunction(d, [0.0, np.nan, 1.0])
    with pytest.raises(ValueError):
        GridFunction(d, [0.0, 1.0])


@settings(max_examples=25, deadline=None)
@given(st.integers(3, 30), st.floats(-100, 100))
def test_quadratic_form_matches_matrix(points, shift):
    d = build_domain(1, [1.0], [points])
    op = assemble_operator(d, np.full(points, shift))
    u = np.random.default_rng(points).standard_normal((points, 2))
    direct = d.cell_volume * np.einsum("ij,ij->j", u, op.matrix @ u)
    assert np.allclose(op.quadratic_form(u), direct, rtol=1e-10, atol=1e-10 * np.abs(direct).max())
