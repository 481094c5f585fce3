"""Reduce a general pHDAE to the simplified form ``E x' = (J - R) x + B u, y = B^H x``."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .linalg import (
    DEFAULT_TOL,
    TolerancePolicy,
    complement,
    herm,
    hermitian_part,
    norm2,
    rank_of,
    right_nullspace,
    skew_part,
)
from .model import GeneralPHDAE, SimplifiedPHDAE, validate_general


class NotFullRankError(ValueError):
    """``Q`` does not have full column rank."""

    def __init__(self, rank, n):
        self.rank = rank
        self.n = n
        super().__init__(f"Q has rank {rank} < n = {n}; use allow_rank_deficient=True")


class StructuralInconsistencyError(ValueError):
    """The data claim to be port-Hamiltonian but violate an implied identity."""


@dataclass(frozen=True)
class ReducedQ:
    """Result of the rank-deficient ``Q`` path.

    ``basis`` (n x r, orthonormal) maps reduced states back by ``x = basis z``;
    the ``n - r`` state directions and ``l - r`` equations not represented
    are reported as ``discarded_states`` / ``discarded_equations``.
    """

    system: GeneralPHDAE
    basis: np.ndarray
    discarded_states: int
    discarded_equations: int


def eliminate_Q(sys: GeneralPHDAE, tol: TolerancePolicy = DEFAULT_TOL, allow_rank_deficient: bool = False):
    """Multiply the state equation by ``Q^H`` so that ``Q`` becomes the identity.

    With full column rank ``Q`` this returns a :class:`GeneralPHDAE` with
    ``l = n`` and ``Q = I``.  With ``allow_rank_deficient=True`` a rank-``r``
    ``Q = U1 S1 V1^H`` is handled by restricting to ``x = V1 z`` and projecting
    with ``(U1 S1)^H``; this is exact for the projected equations because
    ``Q^H E`` vanishes on ``ker Q``.  That path returns a :class:`ReducedQ`.
    """
    Q = sys.Q
    n = sys.n
    r = rank_of(Q, tol)
    if r == n:
        Qh = herm(Q)
        return GeneralPHDAE(
            E=Qh @ sys.E, Q=np.eye(n, dtype=complex), J=Qh @ sys.J @ Q, R=Qh @ sys.R @ Q,
            B=Qh @ sys.B, P=Qh @ sys.P, S=sys.S.copy(), N=sys.N.copy(),
        )
    if not allow_rank_deficient:
        raise NotFullRankError(r, n)
    U, s, Vh = np.linalg.svd(Q)
    V1 = herm(Vh)[:, :r]
    Qt = U[:, :r] * s[:r]  # l x r, full column rank, Q V1 = Qt
    Qth = herm(Qt)
    reduced = GeneralPHDAE(
        E=Qth @ sys.E @ V1, Q=np.eye(r, dtype=complex), J=Qth @ sys.J @ Qt, R=Qth @ sys.R @ Qt,
        B=Qth @ sys.B, P=Qth @ sys.P, S=sys.S.copy(), N=sys.N.copy(),
    )
    return ReducedQ(reduced, V1, n - r, sys.l - r)


@dataclass(frozen=True)
class StateEmbedding:
    """Relates the extended state ``[x; x2]`` to the original ``(x, u)``.

    ``x2 = D1 u1 + P1^H x`` with ``u1 = U1^H u``; ``U_D = [U1, U2]``.
    """

    n: int
    U_D: np.ndarray
    D1: np.ndarray
    P1: np.ndarray
    path: str
    checks: dict = field(default_factory=dict)

    @property
    def k(self) -> int:
        return self.D1.shape[0]

    def extend(self, x, u):
        """Extended state for original state ``x`` and input ``u``."""
        x = np.asarray(x, dtype=complex)
        u1 = herm(self.U_D[:, : self.k]) @ np.asarray(u, dtype=complex)
        x2 = self.D1 @ u1 + herm(self.P1) @ x
        return np.concatenate([x, x2])

    def restrict(self, xt):
        """``(x, u1)`` from an extended state."""
        xt = np.asarray(xt, dtype=complex)
        x, x2 = xt[: self.n], xt[self.n:]
        u1 = np.linalg.solve(self.D1, x2 - herm(self.P1) @ x) if self.k else x2[:0]
        return x, u1


def _split_feedthrough(D, S, tol):
    """Unitary ``U_D`` with ``U_D^H D U_D = diag(D1, 0)``, ``D1`` nonsingular.

    Tries the kernel of the Hermitian part first.  The kernel of ``D`` is the
    intersection of the kernels of ``S`` and ``N`` (its left and right kernels
    coincide because ``S >= 0``), so when ``N`` couples the kernel of ``S`` the
    split is recomputed from ``D`` itself.
    """
    m = D.shape[0]
    if m == 0:
        return np.eye(0, dtype=complex), 0, "eig"
    sD = max(norm2(D), 1e-300)
    lam, W = np.linalg.eigh(hermitian_part(S))
    order = np.argsort(lam)[::-1]
    lam, W = lam[order], W[:, order]
    k = int(np.sum(lam > tol.rank_rel * m * max(abs(lam[0]), 1e-300))) if lam[0] > 0 else 0
    U1, U0 = W[:, :k], W[:, k:]
    D1 = herm(U1) @ D @ U1
    coupled = norm2(D @ U0) > tol.equality_tol * sD or norm2(herm(U0) @ D) > tol.equality_tol * sD
    if not coupled and (k == 0 or rank_of(D1, tol, scale=sD) == k):
        return W, k, "eig"
    K = right_nullspace(D, tol, scale=sD)
    U1 = complement(K, m)
    return np.hstack([U1, K]), U1.shape[1], "svd"


def remove_feedthrough(sys: GeneralPHDAE, tol: TolerancePolicy = DEFAULT_TOL):
    """Absorb ``D = S - N`` into ``rank(D)`` extra algebraic states.

    Returns ``(SimplifiedPHDAE, StateEmbedding)``.  The extended input map is
    expressed in the original input coordinates, ``B_ext = [[B1, B2], [I, 0]] U_D^H``,
    so the extended output equals the original output.  ``J_ext`` and
    ``R_ext`` are the skew-Hermitian and negative Hermitian parts of the
    extended system matrix; they reduce to the textbook block formulas when
    ``D1`` is Hermitian.
    """
    n, m = sys.n, sys.m
    if sys.l != n or norm2(sys.Q - np.eye(n)) > tol.equality_tol * max(1.0, norm2(sys.Q)):
        raise ValueError("remove_feedthrough needs Q = I (run eliminate_Q first)")
    rep = validate_general(sys, tol)
    if not rep.ok:
        raise StructuralInconsistencyError(f"input is not a valid pHDAE: {rep.failures}")
    D = sys.D
    U_D, k, path = _split_feedthrough(D, sys.S, tol)
    PU = sys.P @ U_D
    BU = sys.B @ U_D
    P1, P2 = PU[:, :k], PU[:, k:]
    B1, B2 = BU[:, :k], BU[:, k:]
    scale = max(norm2(sys.P), norm2(sys.B), 1.0)
    p2 = norm2(P2)
    checks = {"P2_zero": p2, "path": path}
    if p2 > tol.equality_tol * scale:
        raise StructuralInconsistencyError(
            f"P restricted to ker(D) is {p2:.3e}, but W >= 0 forces it to vanish")
    D1 = herm(U_D[:, :k]) @ D @ U_D[:, :k]
    if k == 0:
        emb = StateEmbedding(n, U_D, D1, P1, path, checks)
        return SimplifiedPHDAE(sys.E, sys.J, sys.R, sys.B), emb
    D1inv = np.linalg.inv(D1)
    A = sys.J - sys.R
    A_ext = np.block([
        [A + P1 @ D1inv @ herm(P1), -P1 @ D1inv],
        [D1inv @ herm(P1), -D1inv],
    ])
    E_ext = np.zeros((n + k, n + k), dtype=complex)
    E_ext[:n, :n] = sys.E
    B_split = np.block([
        [B1, B2],
        [np.eye(k), np.zeros((k, m - k))],
    ])
    B_ext = B_split @ herm(U_D)
    J_ext = skew_part(A_ext)
    R_ext = -hermitian_part(A_ext)
    emb = StateEmbedding(n, U_D, D1, P1, path, checks)
    return SimplifiedPHDAE(E_ext, J_ext, R_ext, B_ext), emb


def simplify(sys: GeneralPHDAE, tol: TolerancePolicy = DEFAULT_TOL, allow_rank_deficient: bool = False):
    """``eliminate_Q`` then ``remove_feedthrough``; returns ``(system, embedding, info)``."""
    out = eliminate_Q(sys, tol, allow_rank_deficient=allow_rank_deficient)
    info = {"rank_Q": rank_of(sys.Q, tol), "discarded_states": 0, "discarded_equations": 0}
    if isinstance(out, ReducedQ):
        info["discarded_states"] = out.discarded_states
        info["discarded_equations"] = out.discarded_equations
        out = out.system
    simple, emb = remove_feedthrough(out, tol)
    info["feedthrough_path"] = emb.path
    info["extra_states"] = emb.k
    return simple, emb, info
