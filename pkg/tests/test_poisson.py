import numpy as np
import pytest

from spectral import Frame, build_domain, hartree_potential, solve_poisson
from spectral.poisson import PoissonError, PoissonSolver, dirichlet_energy
from spectral.oracle import sin2_poisson_1d, torsion_square


def test_constant_source_1d(line199):
    x = line199.axis_coordinates(0)
    V = solve_poisson(line199, np.ones(199), 1e-10).values
    assert np.max(np.abs(V - x * (1 - x) / 2)) <= 2e-5


def test_zero_source(line199):
    assert np.array_equal(solve_poisson(line199, np.zeros(199)).values, np.zeros(199))


def test_torsion_square():
    d = build_domain(2, [1.0, 1.0], [49, 49])
    V = solve_poisson(d, np.ones(d.n), 1e-10).values
    assert torsion_square(0.5, 0.5) == pytest.approx(0.07367, abs=1e-5)
    assert abs(V.max() - 0.07367) / 0.07367 <= 0.01
    x = d.coordinates()
    assert np.max(np.abs(V - torsion_square(x[:, 0], x[:, 1]))) <= 1e-3 * 0.07367


def test_cg_path_3d():
    d = build_domain(3, [1.0, 1.0, 1.0], [9, 9, 9])
    solver = PoissonSolver(d)
    assert solver._lu is None
    f = np.random.default_rng(0).uniform(0, 1, d.n)
    V = solver.solve(f, 1e-8)
    assert solver.residual(V, f) <= 1e-8
    dense = np.linalg.solve(solver.matrix.toarray(), f)
    assert np.allclose(V, dense, rtol=1e-8, atol=1e-12)


def test_unreachable_tolerance_reports_residual(line199):
    solver = PoissonSolver(line199, max_refinements=0)
    with pytest.raises(PoissonError) as info:
        solver.solve(np.ones(199), 1e-30)
    assert info.value.residual > 1e-30


def test_rejects_bad_input(line199):
    with pytest.raises(ValueError):
        solve_poisson(line199, np.ones(10))
    with pytest.raises(ValueError):
        solve_poisson(line199, np.full(199, np.nan))
    with pytest.raises(ValueError):
        solve_poisson(line199, np.ones(199), tolerance=0.0)


def _sin_frame(d):
    x = d.axis_coordinates(0)
    u = np.sin(np.pi * x)
    u /= np.sqrt(d.cell_volume * u @ u)
    return Frame(u[:, None], d.cell_volume, d)


def test_hartree_single_sine(line199):
    frame = _sin_frame(line199)
    x = line199.axis_coordinates(0)
    h = hartree_potential(frame, [1.0], line199)
    assert np.allclose(h.source.values, 2 * np.sin(np.pi * x) ** 2, rtol=1e-4, atol=1e-12)
    exact = sin2_poisson_1d(x)
    assert np.max(np.abs(h.potential.values - exact)) <= 0.01 * exact.max()
    assert h.duality_gap <= 1e-10


def test_hartree_empty_frame(line199):
    h = hartree_potential(Frame(np.zeros((199, 0)), line199.cell_volume, line199), [], line199)
    assert np.array_equal(h.potential.values, np.zeros(199))
    assert h.dirichlet_energy == 0.0


@pytest.mark.parametrize("shape", [(1, [60]), (2, [9, 12])])
def test_maximum_principle_and_duality(shape):
    dim, points = shape
    d = build_domain(dim, [1.0] * dim, points)
    rng = np.random.default_rng(7)
    for _ in range(100):
        f = rng.uniform(0, 1, d.n) * (rng.uniform(size=d.n) < 0.3)
        V = solve_poisson(d, f).values
        assert np.min(V) >= 0.0
        grad = dirichlet_energy(d, V)
        dual = 0.5 * d.cell_volume * f @ V
        if dual > 0:
            assert abs(grad - dual) <= 1e-10 * dual


def test_linfty_ratio_bounded(line199):
    rng = np.random.default_rng(3)
    ratios = []
    for _ in range(50):
        f = rng.uniform(0, 1, 199)
        V = solve_poisson(line199, f).values
        ratios.append(V.max() / f.max())
    ratios.append(solve_poisson(line199, np.ones(199)).values.max())
    assert max(ratios) <= 1.05 / 8
    # constant data attains the continuum constant 1/8 up to discretization
    assert ratios[-1] == pytest.approx(1 / 8, rel=1e-4)


def test_linearity(line199):
    rng = np.random.default_rng(11)
    f, g = rng.standard_normal(199), rng.standard_normal(199)
    a, b = 2.5, -0.75
    lhs = solve_poisson(line199, a * f + b * g).values
    rhs = a * solve_poisson(line199, f).values + b * solve_poisson(line199, g).values
    assert np.linalg.norm(lhs - rhs) <= 1e-10 * np.linalg.norm(lhs)
