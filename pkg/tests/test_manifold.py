import math

import numpy as np
import pytest

from spectral import (
    Frame,
    SkewDirection,
    block_rotate,
    build_domain,
    eval_j0,
    identity_frame,
    random_frame,
    reorthonormalize,
    retract,
)
from spectral.manifold import curve_velocity, gram_error, tangent_of
from spectral.oracle import dense_eig
from spectral.poisson import density


def test_random_frame_square():
    d = build_domain(1, [1.0], [3])
    f = random_frame(d, 3, seed=7)
    assert f.columns.shape == (3, 3)
    assert gram_error(f) <= 1e-12


def test_random_frame_single_column(line199):
    f = random_frame(line199, 1, seed=3)
    assert f.gram()[0, 0] == pytest.approx(1.0, abs=1e-12)


def test_random_frame_deterministic(line199):
    a = random_frame(line199, 4, seed=5)
    b = random_frame(line199, 4, seed=5)
    assert np.array_equal(a.columns, b.columns)
    assert not np.array_equal(a.columns, random_frame(line199, 4, seed=6).columns)


def test_random_frame_too_many_columns():
    with pytest.raises(ValueError):
        random_frame(build_domain(1, [1.0], [3]), 4)


def test_identity_frame_coordinates():
    d = build_domain(1, [1.0], [3])
    f = identity_frame(d, 2)
    assert np.allclose(f.columns, np.eye(3)[:, :2] / math.sqrt(0.25))
    assert gram_error(f) == 0.0


def test_identity_frame_eigenbasis(line199):
    from spectral import assemble_operator

    op = assemble_operator(line199)
    ref = dense_eig(op.matrix)
    f = identity_frame(line199, 3, ref.eigenvectors)
    rho = np.array([3.0, 2.0, 1.0])
    assert eval_j0(f, op, rho) == pytest.approx(rho @ ref.eigenvalues[:3], rel=1e-10)


def test_identity_frame_empty_and_insufficient():
    assert identity_frame(5, 0).M == 0
    with pytest.raises(ValueError):
        identity_frame(5, 3, np.eye(5)[:, :2])
    with pytest.raises(ValueError):
        identity_frame(2, 3)


def test_retract_zero_step_is_identity(rng):
    f = random_frame(20, 3, 1)
    out = retract(f, SkewDirection.random(f, rng), 0.0)
    assert np.array_equal(out.columns, f.columns)


def test_retract_quarter_turn():
    f = identity_frame(2, 2)
    out = retract(f, SkewDirection(np.array([[0.0, 1.0], [-1.0, 0.0]])), math.pi / 2)
    assert np.allclose(out.columns, [[0.0, -1.0], [1.0, 0.0]], atol=1e-15)


@pytest.mark.parametrize("seed", range(5))
def test_retract_tangency_is_second_order(seed):
    d = build_domain(1, [1.0], [30])
    rng = np.random.default_rng(seed)
    f = random_frame(d, 3, seed)
    dirn = SkewDirection.random(f, rng)
    T = tangent_of(dirn, f)

    def defect(t):
        return np.linalg.norm(retract(f, dirn, t).columns - (f.columns + t * T)) * math.sqrt(f.cell_volume)

    assert 80 <= defect(1e-2) / defect(1e-3) <= 120


def test_retract_keeps_orthonormality():
    d = build_domain(1, [1.0], [40])
    rng = np.random.default_rng(2)
    f = random_frame(d, 4, 0)
    for _ in range(1000):
        f = retract(f, SkewDirection.random(f, rng), rng.uniform(-2, 2))
    assert gram_error(f) <= 1e-10


def test_retract_group_law(rng):
    f = random_frame(25, 4, 3)
    dirn = SkewDirection.random(f, rng, in_span_only=True)
    two = retract(retract(f, dirn, 0.3), dirn, 0.45)
    one = retract(f, dirn, 0.75)
    assert np.max(np.abs(two.columns - one.columns)) <= 1e-10


def test_retract_square_frame_ignores_orthogonal_component(rng):
    f = random_frame(4, 4, 0)
    dirn = SkewDirection(np.zeros((4, 4)), np.full((4, 4), 1e-17))
    assert gram_error(retract(f, dirn, 1.0)) <= 1e-14


def test_skew_generator_is_antisymmetric(rng):
    f = random_frame(10, 3, 0)
    d = SkewDirection.random(f, rng)
    assert np.array_equal(d.generator, -d.generator.T)
    assert np.max(np.abs(f.cell_volume * f.columns.T @ d.component)) <= 1e-10


def test_reorthonormalize_noop():
    f = random_frame(build_domain(1, [1.0], [20]), 5, 4)
    g = reorthonormalize(f)
    assert np.max(np.abs(g.columns - f.columns)) * math.sqrt(f.cell_volume) <= 1e-12


def test_reorthonormalize_scaled():
    f = random_frame(12, 3, 4)
    g = reorthonormalize(f.replace(2 * f.columns))
    assert gram_error(g) <= 1e-12
    assert np.allclose(g.columns, f.columns, atol=1e-12)


def test_reorthonormalize_rank_deficient():
    f = random_frame(12, 3, 4)
    cols = f.columns.copy()
    cols[:, 2] = cols[:, 0]
    with pytest.raises(ValueError, match="rank deficient"):
        reorthonormalize(f.replace(cols))


def test_block_rotate_singletons_unchanged():
    f = random_frame(6, 3, 1)
    A = np.diag([1.0, 2.0, 3.0, 4.0, 5.0, 6.0])
    out = block_rotate(f, A, ((0,), (1,), (2,)))
    assert np.array_equal(out.columns, f.columns)


def test_block_rotate_diagonal_block_unchanged_up_to_sign():
    f = Frame(np.eye(3)[:, [0, 1]] * np.array([1.0, -1.0]))
    out = block_rotate(f, np.diag([1.0, 2.0, 3.0]), ((0, 1),))
    assert np.array_equal(np.abs(out.columns), np.abs(f.columns))


@pytest.mark.parametrize("spectrum", [(1.0, 1.0, 2.0), (1.0, 2.0, 3.0)])
def test_block_rotate_diagonalizes(spectrum):
    A = np.diag(spectrum)
    c, s = math.cos(0.4), math.sin(0.4)
    f = Frame(np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]]))
    rho = [1.0, 1.0, 0.5]
    out = block_rotate(f, A, ((0, 1), (2,)))
    G = out.columns.T @ A @ out.columns
    assert abs(G[0, 1]) <= 1e-10
    # reference: 2x2 eigendecomposition of the block Gram matrix
    ref = dense_eig(f.columns[:, :2].T @ A @ f.columns[:, :2]).eigenvalues
    assert np.allclose(np.diag(G)[:2], ref, atol=1e-12)
    assert eval_j0(out, A, rho) == pytest.approx(eval_j0(f, A, rho), rel=1e-10)
    assert np.allclose(density(out.columns, rho), density(f.columns, rho), atol=1e-10)
    assert np.array_equal(out.columns[:, 2], f.columns[:, 2])


def _random_symmetric(n, seed):
    A = np.random.default_rng(seed).standard_normal((n, n))
    return A + A.T


@pytest.mark.parametrize("seed", range(5))
def test_block_rotate_idempotent_and_span_preserving(seed):
    A = _random_symmetric(10, seed)
    f = random_frame(10, 5, seed)
    blocks = ((0, 1, 2), (3,), (4,))
    once = block_rotate(f, A, blocks)
    twice = block_rotate(once, A, blocks)
    assert np.max(np.abs(twice.columns - once.columns)) <= 1e-10
    P0 = f.columns @ f.columns.T
    P1 = once.columns @ once.columns.T
    assert np.linalg.norm(P1 - P0) <= 1e-10
    rq = np.einsum("ij,ij->j", once.columns, A @ once.columns)[:3]
    assert np.all(np.diff(rq) >= 0)


def test_block_rotate_sign_convention():
    A = _random_symmetric(8, 1)
    out = block_rotate(random_frame(8, 3, 2), A, ((0, 1, 2),))
    for k in range(3):
        v = out.columns[:, k]
        assert v[np.argmax(np.abs(v))] > 0


def test_block_rotate_out_of_range():
    with pytest.raises(IndexError):
        block_rotate(random_frame(5, 2, 0), np.eye(5), ((1, 2),))


@pytest.mark.parametrize("in_span", [True, False])
def test_curve_velocity_matches_differences(in_span):
    d = build_domain(1, [1.0], [30])
    f = random_frame(d, 3, 1)
    direction = SkewDirection.random(f, np.random.default_rng(0), in_span_only=in_span)
    assert np.allclose(curve_velocity(f, direction, 0.0), tangent_of(direction, f), atol=1e-13)
    t, h = 0.7, 1e-5
    fd = (retract(f, direction, t + h).columns - retract(f, direction, t - h).columns) / (2 * h)
    assert np.max(np.abs(curve_velocity(f, direction, t) - fd)) <= 1e-8 * np.max(np.abs(fd))
