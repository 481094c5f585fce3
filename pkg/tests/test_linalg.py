import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from phfeedback.linalg import (
    DEFAULT_TOL,
    DimensionError,
    TolerancePolicy,
    col_compress,
    left_nullspace,
    penrose_residuals,
    pinv,
    psd_project_check,
    random_complex,
    random_unitary,
    rank_blocks,
    rank_of,
    right_nullspace,
    row_compress,
    unitarity_defect,
)

EPS = np.finfo(float).eps


def test_tolerance_defaults():
    t = TolerancePolicy()
    assert (t.rank_rel, t.psd_tol, t.stab_margin, t.equality_tol) == (1e-10, 1e-10, 1e-8, 1e-10)


@pytest.mark.parametrize("field", ["rank_rel", "psd_tol", "stab_margin", "equality_tol"])
def test_tolerance_must_be_positive(field):
    with pytest.raises(ValueError):
        TolerancePolicy(**{field: 0.0})


def test_rank_rel_below_eps_rejected():
    with pytest.raises(ValueError):
        TolerancePolicy(rank_rel=EPS / 4)


def test_tolerance_round_trip():
    t = TolerancePolicy(rank_rel=1e-9)
    assert TolerancePolicy.from_dict(t.to_dict()) == t


def test_rank_examples():
    assert rank_of(np.eye(3)) == 3
    assert rank_of(np.zeros((2, 5))) == 0
    assert rank_of(np.diag([1, 1e-30]), TolerancePolicy(rank_rel=1e-12)) == 1
    assert rank_of(np.zeros((0, 4))) == 0


def test_nullspace_examples():
    N = right_nullspace(np.zeros((1, 1)))
    assert N.shape == (1, 1) and abs(abs(N[0, 0]) - 1) < 1e-15
    assert right_nullspace(np.eye(2)).shape == (2, 0)
    v = left_nullspace(np.array([[1.0], [1.0]]))
    assert v.shape == (2, 1)
    assert abs(np.linalg.norm(v) - 1) < 1e-14
    assert np.linalg.norm(v.conj().T @ np.array([[1.0], [1.0]])) < 1e-14


def test_nullspace_empty_conventions():
    assert right_nullspace(np.zeros((3, 0))).shape == (0, 0)
    L = left_nullspace(np.zeros((3, 0)))
    assert L.shape == (3, 3) and unitarity_defect(L) < 1e-14


def test_row_compress_examples():
    U, r = row_compress(np.array([[0.0], [2.0]]))
    M = U.conj().T @ np.array([[0.0], [2.0]])
    assert r == 1 and abs(abs(M[0, 0]) - 2) < 1e-14 and abs(M[1, 0]) < 1e-14
    U, r = row_compress(np.zeros((3, 2)))
    assert r == 0 and np.allclose(U, np.eye(3))
    rng = np.random.default_rng(0)
    _, r = row_compress(random_complex(4, 4, rng))
    assert r == 4


def test_col_compress_orientation():
    rng = np.random.default_rng(1)
    M = random_complex(3, 2, rng) @ random_complex(2, 5, rng)
    V, r = col_compress(M, lead="zero")
    MV = M @ V
    assert r == 2
    assert np.linalg.norm(MV[:, :3]) < 1e-12 * np.linalg.norm(M)
    V, r = col_compress(M, lead="full")
    assert np.linalg.norm((M @ V)[:, 2:]) < 1e-12 * np.linalg.norm(M)


def test_psd_examples():
    c = psd_project_check(np.diag([1.0, 0.0]))
    assert c.is_psd and not c.is_pd
    assert not psd_project_check(np.array([[0.0, 1.0], [-1.0, 0.0]])).is_hermitian
    assert psd_project_check(np.diag([1.0, -1e-20]), TolerancePolicy(psd_tol=1e-12)).is_psd
    assert psd_project_check(np.zeros((0, 0))).is_pd
    with pytest.raises(DimensionError):
        psd_project_check(np.zeros((2, 3)))


def test_pinv_examples():
    assert np.allclose(pinv(np.diag([2.0, 0.0])), np.diag([0.5, 0.0]))
    assert pinv(np.zeros((2, 3))).shape == (3, 2)
    assert np.allclose(pinv(np.zeros((2, 3))), 0)
    rng = np.random.default_rng(2)
    M = random_complex(4, 3, rng)
    assert np.linalg.norm(pinv(M) @ M - np.eye(3)) < 1e-12
    assert max(penrose_residuals(M, pinv(M))) < 1e-12


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 6), st.integers(0, 6), st.integers(0, 6), st.integers(0, 2**31 - 1))
def test_rank_unitary_invariance_and_nullity(rows, cols, k, seed):
    rng = np.random.default_rng(seed)
    k = min(k, rows, cols)
    M = random_complex(rows, k, rng) @ random_complex(k, cols, rng)
    r = rank_of(M)
    assert r == k
    assert rank_of(random_unitary(rows, rng) @ M @ random_unitary(cols, rng)) == r
    assert right_nullspace(M).shape[1] + r == cols
    assert left_nullspace(M).shape[1] + r == rows


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 7), st.integers(1, 7), st.integers(0, 2**31 - 1))
def test_compressions_reconstruct(rows, cols, seed):
    rng = np.random.default_rng(seed)
    M = random_complex(rows, cols, rng)
    for U, r in (row_compress(M),):
        assert unitarity_defect(U) <= 64 * rows * EPS
        assert np.linalg.norm(U @ (U.conj().T @ M) - M) <= DEFAULT_TOL.equality_tol * np.linalg.norm(M, 2)
        assert np.linalg.norm((U.conj().T @ M)[r:]) <= 1e-12 * np.linalg.norm(M, 2)
    V, r = col_compress(M)
    assert unitarity_defect(V) <= 64 * cols * EPS
    assert np.linalg.norm((M @ V) @ V.conj().T - M) <= DEFAULT_TOL.equality_tol * np.linalg.norm(M, 2)


def test_rank_blocks_scale_independent():
    rng = np.random.default_rng(3)
    a = random_complex(4, 2, rng)
    b = random_complex(4, 1, rng) * 1e-9
    assert rank_of(np.hstack([a * 1e9, b])) == 2
    assert rank_blocks([a * 1e9, b]).rank == 3
