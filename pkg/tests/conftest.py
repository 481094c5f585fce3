import numpy as np
import pytest
import scipy.linalg as sla

from phfeedback.model import GeneralPHDAE, SimplifiedPHDAE


def random_psd(n, rank, rng):
    G = rng.standard_normal((n, rank)) + 1j * rng.standard_normal((n, rank))
    return G @ G.conj().T


def random_skew(n, rng):
    G = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return G - G.conj().T


def random_ph(n, m, rng, rank_E=None, rank_R=None):
    """Unstructured valid pH system (no planted dims)."""
    rank_E = n if rank_E is None else rank_E
    rank_R = n if rank_R is None else rank_R
    B = rng.standard_normal((n, m)) + 1j * rng.standard_normal((n, m))
    return SimplifiedPHDAE(random_psd(n, rank_E, rng), random_skew(n, rng), random_psd(n, rank_R, rng), B)


def qz_finite_eigs(E, A, rel=1e-9):
    """Finite generalized eigenvalues from QZ (independent of the Wong-sequence code)."""
    if E.shape[0] == 0:
        return np.zeros(0, dtype=complex)
    AA, BB, _, _, _, _ = sla.ordqz(A, E, output="complex")
    alpha, beta = np.diag(AA), np.diag(BB)
    scale = max(np.linalg.norm(E, 2), 1e-300)
    keep = np.abs(beta) > rel * scale * max(E.shape[0], 1)
    return alpha[keep] / beta[keep]


def det_regular(E, A, trials=6, seed=0):
    """Regular iff sE - A is nonsingular at some random complex shift."""
    rng = np.random.default_rng(seed)
    n = E.shape[0]
    if n == 0:
        return True
    scale = np.linalg.norm(E, 2) + np.linalg.norm(A, 2)
    for _ in range(trials):
        s = complex(rng.standard_normal(), rng.standard_normal()) * 1.7
        sv = np.linalg.svd(s * E - A, compute_uv=False)
        if sv[-1] > 1e-8 * (abs(s) * np.linalg.norm(E, 2) + np.linalg.norm(A, 2) + scale * 1e-300):
            return True
    return False


def match_sets(a, b, rel=1e-6):
    """Greedy bipartite match of two eigenvalue lists."""
    a, b = list(a), list(b)
    if len(a) != len(b):
        return False
    for z in a:
        if not b:
            return False
        d = [abs(z - w) for w in b]
        j = int(np.argmin(d))
        if d[j] > rel * max(1.0, abs(z)):
            return False
        b.pop(j)
    return True


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_general(n, m, rng, Q=None, rank_S=None, N_scale=1.0):
    """Valid general pH system with l = n built from a random PSD dissipation matrix."""
    if Q is None:
        Q = np.eye(n) + 0.3 * (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n)))
    Qi = np.linalg.inv(Q)
    if rank_S is None:
        W = random_psd(n + m, n + m, rng)
    else:
        # input rows of the factor have rank rank_S, so ker(S) has dimension m - rank_S
        k = n + m
        G = rng.standard_normal((n + m, k)) + 1j * rng.standard_normal((n + m, k))
        G[n:] = rng.standard_normal((m, rank_S)) @ rng.standard_normal((rank_S, k))
        W = G @ G.conj().T
    M = random_psd(n, n, rng)
    return GeneralPHDAE(
        E=Qi.conj().T @ M, Q=Q, J=random_skew(n, rng), R=Qi.conj().T @ W[:n, :n] @ Qi,
        B=rng.standard_normal((n, m)) + 1j * rng.standard_normal((n, m)),
        P=Qi.conj().T @ W[:n, n:], S=W[n:, n:], N=N_scale * random_skew(m, rng),
    )
