import numpy as np
import pytest

from phfeedback.generator import GeneratorSpec, generate
from phfeedback.linalg import DimensionError, psd_project_check
from phfeedback.model import (
    FeedbackSolution,
    GeneralPHDAE,
    RankDeficientInputError,
    SimplifiedPHDAE,
    closed_loop,
    closed_loop_matrices,
    compress_input,
    require_full_rank,
    validate_general,
    validate_simplified,
)

from conftest import random_general, random_ph, random_psd, random_skew


def scalar_general(R=1.0, J=0.0):
    one, zero = [[1.0]], [[0.0]]
    return GeneralPHDAE(E=one, Q=one, J=[[J]], R=[[R]], B=zero, P=zero, S=zero, N=zero)


def test_general_scalar_valid():
    assert validate_general(scalar_general()).ok


def test_general_negative_damping_fails_W():
    rep = validate_general(scalar_general(R=-1.0))
    assert rep.failures == ["W_psd"]
    assert rep["W_psd"].residual < 0


def test_general_non_skew_J_still_valid():
    # only J - J^H enters the condition, and Q^H (J - J^H) Q has zero Hermitian part
    rep = validate_general(scalar_general(J=1.0))
    assert rep.ok


def test_general_records_rank_Q():
    rng = np.random.default_rng(0)
    sys = random_general(3, 2, rng)
    rep = validate_general(sys)
    assert rep.ok and rep.info["rank_Q"] == 3


def test_general_dimension_error_names_field():
    with pytest.raises(DimensionError, match="field P"):
        GeneralPHDAE(E=np.eye(2), Q=np.eye(2), J=np.zeros((2, 2)), R=np.zeros((2, 2)),
                     B=np.ones((2, 1)), P=np.ones((3, 1)), S=np.zeros((1, 1)), N=np.zeros((1, 1)))


def test_simplified_examples():
    assert validate_simplified(SimplifiedPHDAE([[1]], [[0]], [[1]], [[1]])).ok
    tall = SimplifiedPHDAE(np.eye(2), np.zeros((2, 2)), np.zeros((2, 2)), [[1], [1e-30]])
    assert validate_simplified(tall)["B_full_column_rank"].passed
    square = SimplifiedPHDAE(np.eye(2), np.zeros((2, 2)), np.zeros((2, 2)), [[1, 1], [1, 1]])
    rep = validate_simplified(square)
    assert rep.failures == ["B_full_column_rank"]
    indef = SimplifiedPHDAE([[1, 2], [2, 1]], np.zeros((2, 2)), np.zeros((2, 2)), [[1], [0]])
    rep = validate_simplified(indef)
    assert rep.failures == ["E_psd"]
    assert abs(rep["E_psd"].residual + 1) < 1e-12  # eigenvalues 3 and -1


def test_require_full_rank_and_compression():
    sys = SimplifiedPHDAE(np.eye(2), np.zeros((2, 2)), np.eye(2), [[1, 1], [1, 1]])
    with pytest.raises(RankDeficientInputError):
        require_full_rank(sys)
    red, comp = compress_input(sys)
    assert red.m == 1 and validate_simplified(red).ok
    fb = FeedbackSolution(np.zeros((1, 1)), [[2.0]], [[0.5]])
    full = comp.expand_feedback(fb)
    E1, J1, R1 = closed_loop_matrices(red, fb)
    E2, J2, R2 = closed_loop_matrices(sys, full)
    assert np.allclose(E1, E2) and np.allclose(R1, R2) and np.allclose(J1, J2)


def test_closed_loop_examples():
    p = closed_loop(SimplifiedPHDAE([[2]], [[0]], [[1]], [[1]]), FeedbackSolution.zero(1))
    assert np.allclose(p.E, [[2]]) and np.allclose(p.A, [[-1]])
    sys0 = SimplifiedPHDAE([[0]], [[0]], [[0]], [[1]])
    p = closed_loop(sys0, FeedbackSolution(np.zeros((1, 1)), [[1.0]]))
    assert np.allclose(p.E, 0) and np.allclose(p.A, [[-1]])
    p = closed_loop(sys0, FeedbackSolution(np.zeros((1, 1)), np.zeros((1, 1)), [[1.0]]))
    assert np.allclose(p.E, [[1]]) and np.allclose(p.A, 0)


def test_closed_loop_dimension_mismatch():
    sys = SimplifiedPHDAE([[1]], [[0]], [[1]], [[1]])
    with pytest.raises(DimensionError):
        closed_loop(sys, FeedbackSolution.zero(2))


@pytest.mark.parametrize("seed", range(20))
def test_closed_loop_preserves_structure(seed):
    rng = np.random.default_rng(seed)
    n, m = 5, 2
    sys = random_ph(n, m, rng, rank_E=3, rank_R=2)
    fb = FeedbackSolution(random_skew(m, rng), random_psd(m, 1, rng), random_psd(m, 2, rng))
    p = closed_loop(sys, fb)
    assert psd_project_check(p.E).is_psd
    Rcl = -(p.A + p.A.conj().T) / 2
    assert psd_project_check(Rcl).is_psd
    assert np.linalg.norm(Rcl - (sys.R + sys.B @ fb.F_H @ sys.B.conj().T)) < 1e-10 * np.linalg.norm(Rcl)


def test_generated_systems_validate():
    for seed in range(100):
        sys, _ = generate(GeneratorSpec(seed=seed))
        assert validate_simplified(sys).ok, seed
