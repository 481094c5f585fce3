import numpy as np
import pytest

from phfeedback.linalg import psd_project_check, random_unitary
from phfeedback.model import GeneralPHDAE, validate_general, validate_simplified
from phfeedback.reform import (
    NotFullRankError,
    ReducedQ,
    StructuralInconsistencyError,
    eliminate_Q,
    remove_feedthrough,
    simplify,
)

from conftest import random_general, random_psd, random_skew


def general(E, Q, J, R, B, P, S, N):
    return GeneralPHDAE(E=E, Q=Q, J=J, R=R, B=B, P=P, S=S, N=N)


def test_eliminate_identity_Q_is_copy():
    rng = np.random.default_rng(0)
    sys = random_general(3, 2, rng, Q=np.eye(3))
    out = eliminate_Q(sys)
    for k in "EJRBPSN":
        assert np.array_equal(getattr(out, k), getattr(sys, k))
    assert np.array_equal(out.Q, np.eye(3))


def test_eliminate_scalar():
    one, zero = [[1.0]], [[0.0]]
    out = eliminate_Q(general(one, [[2.0]], zero, zero, zero, zero, zero, zero))
    assert np.allclose(out.E, [[2.0]])


@pytest.mark.parametrize("seed", range(10))
def test_eliminate_random_unitary_Q(seed):
    rng = np.random.default_rng(seed)
    sys = random_general(4, 2, rng, Q=random_unitary(4, rng))
    out = eliminate_Q(sys)
    assert validate_general(out).ok
    assert psd_project_check(out.E).is_psd and psd_project_check(out.E).is_hermitian
    x = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    assert abs(out.hamiltonian(x) - sys.hamiltonian(x)) < 1e-10 * max(1, abs(sys.hamiltonian(x)))


def test_rank_deficient_Q():
    rng = np.random.default_rng(1)
    n = 4
    Q = np.diag([1.0, 2.0, 0.0, 0.0]).astype(complex)
    M = np.zeros((n, n), dtype=complex)
    M[:2, :2] = random_psd(2, 2, rng)
    E = np.linalg.pinv(Q.conj().T) @ M  # Q^H E = M on the range of Q
    sys = general(E, Q, random_skew(n, rng), random_psd(n, n, rng), np.ones((n, 1)),
                  np.zeros((n, 1)), np.zeros((1, 1)), np.zeros((1, 1)))
    with pytest.raises(NotFullRankError) as err:
        eliminate_Q(sys)
    assert err.value.rank == 2
    red = eliminate_Q(sys, allow_rank_deficient=True)
    assert isinstance(red, ReducedQ)
    assert red.system.n == 2 and red.discarded_states == 2 and red.discarded_equations == 2
    assert validate_general(red.system).ok


def test_feedthrough_absent_is_identity():
    rng = np.random.default_rng(2)
    n, m = 3, 2
    sys = general(random_psd(n, 2, rng), np.eye(n), random_skew(n, rng), random_psd(n, n, rng),
                  rng.standard_normal((n, m)), np.zeros((n, m)), np.zeros((m, m)), np.zeros((m, m)))
    out, emb = remove_feedthrough(sys)
    assert emb.k == 0
    for k in "EJRB":
        assert np.array_equal(getattr(out, k), getattr(sys, k))


def test_feedthrough_scalar_example():
    one, zero = [[1.0]], [[0.0]]
    out, emb = remove_feedthrough(general(one, one, zero, zero, one, zero, one, zero))
    # block formulas with D1 = 1, P1 = 0: A_ext = [[0, 0], [0, -1]], B_ext = [[1], [1]]
    assert np.allclose(out.E, np.diag([1.0, 0.0]))
    assert np.allclose(out.R, np.diag([0.0, 1.0]))
    assert np.allclose(out.J, 0)
    assert np.allclose(out.B, [[1.0], [1.0]])
    assert emb.path == "eig"


@pytest.mark.parametrize("seed", range(100))
def test_feedthrough_random(seed):
    rng = np.random.default_rng(seed)
    n, m = 3, 3
    sys = random_general(n, m, rng, Q=np.eye(n), rank_S=int(rng.integers(0, m + 1)))
    out, emb = remove_feedthrough(sys)
    rank_D = np.linalg.matrix_rank(sys.D, tol=1e-10 * max(np.linalg.norm(sys.D, 2), 1e-300))
    assert out.n == n + rank_D
    rep = validate_simplified(out)
    assert all(c.passed for c in rep.checks if c.name != "B_full_column_rank")
    # Hamiltonian unchanged on the embedding image
    x = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    u = rng.standard_normal(m) + 1j * rng.standard_normal(m)
    xt = emb.extend(x, u)
    assert abs(out.hamiltonian(xt) - 0.5 * np.real(np.vdot(x, sys.E @ x))) < 1e-10 * (1 + np.linalg.norm(x) ** 2)
    x_back, _ = emb.restrict(xt)
    assert np.allclose(x_back, x)


@pytest.mark.parametrize("seed", range(10))
def test_feedthrough_preserves_input_output_map(seed):
    # transfer functions of the general and extended systems agree at random s
    rng = np.random.default_rng(100 + seed)
    n, m = 3, 2
    sys = random_general(n, m, rng, Q=np.eye(n))
    out, _ = remove_feedthrough(sys)
    for _ in range(3):
        s = complex(rng.standard_normal(), rng.standard_normal())
        A = sys.J - sys.R
        G1 = (sys.B + sys.P).conj().T @ np.linalg.solve(s * sys.E - A, sys.B - sys.P) + sys.S - sys.N
        G2 = out.B.conj().T @ np.linalg.solve(s * out.E - out.A, out.B)
        assert np.allclose(G1, G2, atol=1e-9 * np.linalg.norm(G1))


def test_skew_coupled_kernel_uses_svd_path():
    # S = diag(1, 0) with N coupling the kernel of S: D is nonsingular though S is not
    one = np.eye(2)
    S = np.diag([1.0, 0.0]).astype(complex)
    N = np.array([[0, 1], [-1, 0]], dtype=complex)
    Z = np.zeros((2, 2))
    sys = general(one, one, Z, one, one, Z, S, N)
    out, emb = remove_feedthrough(sys)
    assert emb.path == "svd" and emb.k == 2
    assert validate_simplified(out).ok


def test_nonzero_P_on_kernel_rejected():
    one = [[1.0]]
    # W = [[R, P], [P, S]] with S = 0 and P != 0 is not PSD; remove_feedthrough refuses it
    sys = general(one, one, [[0.0]], one, one, one, [[0.0]], [[0.0]])
    with pytest.raises(StructuralInconsistencyError):
        remove_feedthrough(sys)


def test_simplify_pipeline():
    rng = np.random.default_rng(5)
    sys = random_general(4, 2, rng)
    out, emb, info = simplify(sys)
    assert info["rank_Q"] == 4 and info["extra_states"] == emb.k
    assert out.n == 4 + emb.k
