import itertools

import numpy as np
import pytest

from phfeedback.condense import (
    InvalidSystemError,
    condensed_form,
    condensed_violations,
    scaled_condensed_form,
    structural_indices,
)
from phfeedback.generator import GeneratorSpec, SpecError, generate
from phfeedback.linalg import left_nullspace, psd_project_check, random_unitary, rank_of, right_nullspace
from phfeedback.model import SimplifiedPHDAE


def coupling_rank_oracle(sys, tol=1e-9):
    """n1 + n2 and n5 from ranks of J - R on the left kernel of [E B] (no staircase)."""
    A = sys.A
    K = left_nullspace(np.hstack([sys.E, sys.B]))
    M = K.conj().T @ A @ K
    n5 = rank_of(M, scale=np.linalg.norm(A, 2))
    Z6 = K @ right_nullspace(M, scale=np.linalg.norm(A, 2))
    n12 = rank_of(Z6.conj().T @ A, scale=np.linalg.norm(A, 2)) if Z6.shape[1] else 0
    return n12, n5, Z6.shape[1]


def test_scalar_algebraic_input():
    # E = 0, B = 1: a group-2 row would need an n6 coupling partner, so the row is group 3
    cf = condensed_form(SimplifiedPHDAE([[0]], [[0]], [[0]], [[1]]))
    assert cf.dims == (0, 0, 1, 0, 0, 0)
    assert not condensed_violations(cf, SimplifiedPHDAE([[0]], [[0]], [[0]], [[1]]))


def test_scalar_damped():
    cf = condensed_form(SimplifiedPHDAE([[1]], [[0]], [[1]], [[1]]))
    assert cf.dims == (0, 0, 1, 0, 0, 0)
    assert abs(cf.E(3, 3)[0, 0] - 1) < 1e-14
    assert abs(cf.A(3, 3)[0, 0] + 1) < 1e-14
    assert abs(abs(cf.B(3, 2)[0, 0]) - 1) < 1e-14


def test_rotation_with_one_input():
    sys = SimplifiedPHDAE(np.zeros((2, 2)), [[0, 1], [-1, 0]], np.zeros((2, 2)), [[1], [0]])
    cf = condensed_form(sys)
    assert cf.dims == (0, 1, 0, 0, 0, 1)
    si = structural_indices(sys)
    assert (si.n1_plus_n4, si.n3_plus_n4, si.cond1_holds) == (0, 0, True)
    assert coupling_rank_oracle(sys)[::2] == (1, 1)


def test_invalid_system_rejected():
    with pytest.raises(InvalidSystemError):
        condensed_form(SimplifiedPHDAE([[-1]], [[0]], [[0]], [[1]]))


def test_indices_trivial_examples():
    rng = np.random.default_rng(0)
    n, m = 5, 2
    B = rng.standard_normal((n, m))
    J = rng.standard_normal((n, n))
    J = J - J.T
    si = structural_indices(SimplifiedPHDAE(np.eye(n), J, np.eye(n), B))
    assert si.n1_plus_n4 == n - m
    si = structural_indices(SimplifiedPHDAE(np.zeros((n, n)), J, np.eye(n), B))
    assert si.n1_plus_n4 == 0


LATTICE = [d for d in itertools.product(range(2), repeat=6) if d[5] >= d[0] + d[1]]


@pytest.mark.parametrize("dims", LATTICE)
def test_corner_dims_round_trip(dims):
    sys, truth = generate(GeneratorSpec(dims=dims, seed=sum(dims)))
    cf = condensed_form(sys)
    assert cf.dims == truth.dims == dims
    assert not condensed_violations(cf, sys)


@pytest.mark.parametrize("seed", range(40))
def test_round_trip_and_invariants(seed):
    spec = GeneratorSpec(seed=seed, cond1=[None, True, False][seed % 3])
    sys, truth = generate(spec)
    cf = condensed_form(sys)
    assert cf.dims == truth.dims
    assert not condensed_violations(cf, sys)
    E, A, B = cf.reconstruct()
    assert np.linalg.norm(E - sys.E) <= 1e-10 * max(np.linalg.norm(sys.E), 1)
    assert np.linalg.norm(cf.E_c - cf.E_c.conj().T) <= 1e-12 * max(np.linalg.norm(sys.E), 1)
    lhs = cf.A_c + cf.A_c.conj().T
    rhs = cf.U.conj().T @ (-2 * sys.R) @ cf.U
    assert np.linalg.norm(lhs - rhs) <= 1e-10 * max(np.linalg.norm(sys.R), 1)
    n12, n5, n6 = coupling_rank_oracle(sys)
    d = truth.dims
    assert (n12, n5, n6) == (d[0] + d[1], d[4], d[5])


@pytest.mark.parametrize("seed", range(30))
def test_dims_unitary_invariance(seed):
    rng = np.random.default_rng(seed)
    sys, truth = generate(GeneratorSpec(seed=500 + seed))
    moved = sys.transformed(random_unitary(sys.n, rng), random_unitary(sys.m, rng))
    assert condensed_form(moved).dims == truth.dims


@pytest.mark.parametrize("seed", range(40))
def test_indices_match_condensed_dims(seed):
    sys, truth = generate(GeneratorSpec(seed=1000 + seed, cond1=[None, True, False][seed % 3]))
    cf = condensed_form(sys)
    si = structural_indices(sys)
    n1, n2, n3, n4, n5, n6 = cf.dims
    assert si.n1_plus_n4 == n1 + n4
    assert si.n3_plus_n4 == n3 + n4
    # the identity refers to E13 after block elimination, not the unitary E13
    sf = scaled_condensed_form(cf)
    assert si.rank_E13 == rank_of(sf.E(1, 3), scale=cf.scales["E"])
    assert si.cond1_holds == (n6 == n1 + n2)
    assert si.cond3_holds == (si.rank_E13 == n1)


def test_scaled_form_scalar_identity():
    cf = condensed_form(SimplifiedPHDAE([[1]], [[0]], [[1]], [[1]]))
    sf = scaled_condensed_form(cf)
    assert np.allclose(sf.S, [[1]]) and np.allclose(sf.T, [[1]])


@pytest.mark.parametrize("seed", range(40))
def test_scaled_form_pattern(seed):
    sys, truth = generate(GeneratorSpec(seed=2000 + seed))
    cf = condensed_form(sys)
    sf = scaled_condensed_form(cf)
    n1, n2, n3, n4, n5, n6 = sf.dims
    assert sf.scales["elimination_residual"] <= 1e-10
    # S (sE - A) T and S B V reproduce the stored blocks
    S, T = sf.S, sf.T
    nS = np.linalg.norm(S) * np.linalg.norm(T)
    sE = np.linalg.norm(sys.E)
    assert np.linalg.norm(S @ sys.E @ T - sf.E_s) <= 1e-9 * sE * nS
    assert np.linalg.norm(S @ sys.A @ T - sf.A_s) <= 1e-9 * np.linalg.norm(sys.A) * nS
    # S B = T^H B
    assert np.linalg.norm(S @ sys.B - T.conj().T @ sys.B) <= 1e-9 * np.linalg.norm(sys.B) * np.linalg.norm(S)
    if n1:
        assert psd_project_check(sf.E(1, 1)).is_pd
    if n4:
        assert psd_project_check(sf.E(4, 4)).is_pd
    sl = np.cumsum((0,) + sf.dims)
    k = sl[3]
    assert psd_project_check(sf.E_s[:k, :k], scale=sE).is_psd
    for i in (1, 2, 3):
        if n4:
            assert np.all(sf.E(i, 4) == 0)
    assert np.all(sf.E(1, 2) == 0)
    if n3:
        assert np.all(sf.B_s[: sl[2], sf.m - n3:] == 0)
