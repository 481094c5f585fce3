import numpy as np
import pytest
import scipy.linalg as sla

from phfeedback.generator import GeneratorSpec, generate
from phfeedback.linalg import DimensionError, random_unitary
from phfeedback.model import Pencil
from phfeedback.verify import (
    SingularPencilError,
    algebraic_certificate,
    finite_eigenvalues,
    index_of,
    is_asymptotically_stable,
    is_regular,
    uncontrollable_imaginary_modes,
)

from conftest import det_regular, match_sets, qz_finite_eigs


def nilpotent(k):
    return np.eye(k, k=1)


def kronecker_pencil(eigs, nil_sizes, rng, scramble=True):
    """Regular pencil with given finite eigenvalues and nilpotent block sizes."""
    f = len(eigs)
    blocks_E = [np.eye(f)] + [nilpotent(k) for k in nil_sizes]
    blocks_A = [np.diag(np.asarray(eigs, dtype=complex)) if f else np.zeros((0, 0))] + [np.eye(k) for k in nil_sizes]
    E = sla.block_diag(*blocks_E).astype(complex)
    A = sla.block_diag(*blocks_A).astype(complex)
    if scramble:
        n = E.shape[0]
        P = np.eye(n) + 0.3 * rng.standard_normal((n, n))
        Q = np.eye(n) + 0.3 * rng.standard_normal((n, n))
        E, A = P @ E @ Q, P @ A @ Q
    return Pencil(E, A)


def test_regular_examples():
    rng = np.random.default_rng(0)
    assert is_regular(Pencil(np.eye(3), rng.standard_normal((3, 3))))[0]
    reg, method = is_regular(Pencil([[0.0]], [[0.0]]))
    assert not reg and method == "probabilistic"
    assert not is_regular(Pencil(np.diag([1.0, 0.0]), np.zeros((2, 2))))[0]
    assert is_regular(Pencil(np.zeros((0, 0)), np.zeros((0, 0))))[0]


def test_singular_kronecker_blocks():
    # L1 (1x2) and its transpose (2x1) stacked to a square 3x3 singular pencil
    E = np.array([[1, 0, 0], [0, 0, 1], [0, 0, 0]], dtype=complex)
    A = np.array([[0, 1, 0], [0, 0, 0], [0, 0, 1]], dtype=complex)
    assert not is_regular(Pencil(E, A))[0]
    assert not det_regular(E, A)
    with pytest.raises(SingularPencilError):
        index_of(Pencil(E, A))
    with pytest.raises(SingularPencilError):
        finite_eigenvalues(Pencil(E, A))


def test_non_square_rejected():
    with pytest.raises(DimensionError):
        Pencil(np.zeros((2, 3)), np.zeros((2, 3)))


def test_index_examples():
    rng = np.random.default_rng(1)
    assert index_of(Pencil(np.eye(2), rng.standard_normal((2, 2)))) == 0
    assert index_of(Pencil([[0.0]], [[1.0]])) == 1
    assert index_of(Pencil([[0.0, 1.0], [0.0, 0.0]], np.eye(2))) == 2


def test_finite_eig_examples():
    assert np.allclose(finite_eigenvalues(Pencil([[1.0]], [[-1.0]])), [-1])
    assert finite_eigenvalues(Pencil([[0.0]], [[1.0]])).size == 0
    ev = finite_eigenvalues(Pencil(np.eye(2), [[0.0, 1.0], [-1.0, 0.0]]))
    assert match_sets(ev, [1j, -1j])


def test_stability_examples():
    assert is_asymptotically_stable(Pencil([[1.0]], [[-1.0]])).stable
    rep = is_asymptotically_stable(Pencil([[0.0]], [[-1.0]]))
    assert rep.stable and rep.finite_eigs == [] and rep.index == 1
    rep = is_asymptotically_stable(Pencil(np.eye(2), [[0.0, 1.0], [-1.0, 0.0]]))
    assert rep.regular and not rep.stable and rep.axis_semisimple == "yes"
    rep = is_asymptotically_stable(Pencil([[0.0, 1.0], [0.0, 0.0]], np.eye(2)))
    assert rep.regular and not rep.index_le_1 and not rep.stable


@pytest.mark.parametrize("seed", range(30))
def test_kronecker_index_and_spectrum(seed):
    rng = np.random.default_rng(seed)
    f = int(rng.integers(0, 4))
    eigs = rng.standard_normal(f) + 1j * rng.standard_normal(f)
    nil = [int(k) for k in rng.integers(1, 4, size=int(rng.integers(0, 3)))]
    p = kronecker_pencil(eigs, nil, rng)
    assert is_regular(p)[0]
    assert index_of(p) == (max(nil) if nil else 0)
    assert match_sets(finite_eigenvalues(p), eigs)
    cert, _ = algebraic_certificate(p)
    if cert:
        assert index_of(p) <= 1


@pytest.mark.parametrize("seed", range(50))
def test_finite_eigs_unitary_equivalence(seed):
    rng = np.random.default_rng(100 + seed)
    sys, _ = generate(GeneratorSpec(seed=seed))
    p = sys.pencil()
    if not is_regular(p)[0]:
        return
    U, V = random_unitary(sys.n, rng), random_unitary(sys.n, rng)
    q = Pencil(U @ p.E @ V.conj().T, U @ p.A @ V.conj().T)
    e1, e2 = finite_eigenvalues(p), finite_eigenvalues(q)
    assert match_sets(e1, e2, rel=1e-7)
    # independent QZ oracle
    if index_of(p) <= 1:
        assert match_sets(e1, qz_finite_eigs(p.E, p.A), rel=1e-6)


def test_uncontrollable_examples():
    modes = uncontrollable_imaginary_modes(np.eye(2), np.diag([-1.0, 0.0]), [[1.0], [0.0]])
    assert len(modes) == 1 and abs(modes[0]) < 1e-12
    assert uncontrollable_imaginary_modes(np.eye(3), -np.eye(3), np.zeros((3, 1))) == []
    J = np.array([[0.0, 1.0], [-1.0, 0.0]])
    assert uncontrollable_imaginary_modes(np.eye(2), J, [[1.0], [0.0]]) == []


@pytest.mark.parametrize("seed", range(20))
def test_planted_uncontrollable_mode_found(seed):
    sys, truth = generate(GeneratorSpec(seed=seed, uncontrollable_mode=True))
    modes = uncontrollable_imaginary_modes(sys.E, sys.A, sys.B)
    for z in truth.planted_modes:
        assert any(abs(z - s) < 1e-6 * max(1, abs(z)) for s in modes)


@pytest.mark.parametrize("seed", range(40))
def test_regularity_matches_determinant_oracle(seed):
    sys, _ = generate(GeneratorSpec(seed=3000 + seed, cond1=[None, True, False][seed % 3]))
    assert is_regular(sys.pencil())[0] == det_regular(sys.E, sys.A)
