"""pHDAE system types, structural validation and closed-loop assembly."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .linalg import (
    DEFAULT_TOL,
    DimensionError,
    TolerancePolicy,
    as_cmatrix,
    herm,
    hermitian_part,
    norm2,
    psd_project_check,
    range_basis,
    rank_info,
    rank_of,
)


class RankDeficientInputError(ValueError):
    """The input matrix B does not have full column rank."""


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    residual: float
    detail: str = ""


@dataclass(frozen=True)
class ValidationReport:
    checks: tuple[Check, ...]
    info: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def failures(self) -> list[str]:
        return [c.name for c in self.checks if not c.passed]

    def __getitem__(self, name: str) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)


def _field(M, rows, cols, name):
    try:
        return as_cmatrix(M, name=name) if rows is None else as_cmatrix(M, rows, cols, name=name)
    except DimensionError as exc:
        raise DimensionError(f"field {name}: {exc}") from None


@dataclass(frozen=True, eq=False)
class GeneralPHDAE:
    """``E x' = (J - R) Q x + (B - P) u``, ``y = (B + P)^H Q x + (S - N) u``."""

    E: np.ndarray
    Q: np.ndarray
    J: np.ndarray
    R: np.ndarray
    B: np.ndarray
    P: np.ndarray
    S: np.ndarray
    N: np.ndarray

    def __post_init__(self):
        E = _field(self.E, None, None, "E")
        l, n = E.shape
        B = _field(self.B, l, None, "B")
        m = B.shape[1]
        object.__setattr__(self, "E", E)
        object.__setattr__(self, "Q", _field(self.Q, l, n, "Q"))
        object.__setattr__(self, "J", _field(self.J, l, l, "J"))
        object.__setattr__(self, "R", _field(self.R, l, l, "R"))
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "P", _field(self.P, l, m, "P"))
        object.__setattr__(self, "S", _field(self.S, m, m, "S"))
        object.__setattr__(self, "N", _field(self.N, m, m, "N"))

    @property
    def l(self) -> int:
        return self.E.shape[0]

    @property
    def n(self) -> int:
        return self.E.shape[1]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    @property
    def D(self) -> np.ndarray:
        return self.S - self.N

    def dissipation_matrix(self) -> np.ndarray:
        Q = self.Q
        return np.block([[herm(Q) @ self.R @ Q, herm(Q) @ self.P], [herm(self.P) @ Q, self.S]])

    def hamiltonian(self, x) -> float:
        x = np.asarray(x)
        return 0.5 * float(np.real(np.vdot(self.Q @ x, self.E @ x)))


@dataclass(frozen=True, eq=False)
class SimplifiedPHDAE:
    """``E x' = (J - R) x + B u``, ``y = B^H x`` with ``E, R >= 0``, ``J = -J^H``.

    Construction checks shapes only.  Full column rank of ``B`` is enforced by
    :func:`require_full_rank` (called by every analysis entry point) so that
    :func:`validate_simplified` can still report a rank-deficient ``B``.
    """

    E: np.ndarray
    J: np.ndarray
    R: np.ndarray
    B: np.ndarray

    def __post_init__(self):
        E = _field(self.E, None, None, "E")
        n = E.shape[0]
        if E.shape[1] != n:
            raise DimensionError(f"field E: must be square, got {E.shape}")
        object.__setattr__(self, "E", E)
        object.__setattr__(self, "J", _field(self.J, n, n, "J"))
        object.__setattr__(self, "R", _field(self.R, n, n, "R"))
        B = np.asarray(self.B)
        if B.size == 0 and B.ndim < 2:
            B = np.zeros((n, 0), dtype=complex)
        object.__setattr__(self, "B", _field(B, n, None, "B"))

    @property
    def n(self) -> int:
        return self.E.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    @property
    def A(self) -> np.ndarray:
        return self.J - self.R

    def hamiltonian(self, x) -> float:
        x = np.asarray(x)
        return 0.5 * float(np.real(np.vdot(x, self.E @ x)))

    def transformed(self, U, W=None) -> "SimplifiedPHDAE":
        """Congruence ``x = U z`` (state) and ``u = W v`` (input)."""
        Uh = herm(U)
        B = Uh @ self.B
        if W is not None:
            B = B @ W
        return SimplifiedPHDAE(Uh @ self.E @ U, Uh @ self.J @ U, Uh @ self.R @ U, B)

    def pencil(self) -> "Pencil":
        return Pencil(self.E, self.A)


@dataclass(frozen=True, eq=False)
class Pencil:
    """The pencil ``s E - A``.

    ``E_ref`` / ``A_ref`` are optional reference norms for rank decisions.
    A closed loop such as ``E + B K B^H`` can cancel to roundoff level, and
    its rank must then be judged against the size of the terms, not of the
    (tiny) result.
    """

    E: np.ndarray
    A: np.ndarray
    E_ref: Optional[float] = None
    A_ref: Optional[float] = None

    def __post_init__(self):
        E = as_cmatrix(self.E, name="E")
        if E.shape[0] != E.shape[1]:
            raise DimensionError(f"pencil E must be square, got {E.shape}")
        object.__setattr__(self, "E", E)
        object.__setattr__(self, "A", as_cmatrix(self.A, E.shape[0], E.shape[1], name="A"))

    @property
    def n(self) -> int:
        return self.E.shape[0]


@dataclass(frozen=True, eq=False)
class FeedbackSolution:
    """``u = (F_S - F_H) y + K y' + v``; any of the matrices may be zero."""

    F_S: np.ndarray
    F_H: np.ndarray
    K: Optional[np.ndarray] = None
    problem: str = ""
    rank_target: Optional[int] = None
    certificate: Optional[object] = None  # verify.PencilReport
    details: dict = field(default_factory=dict)

    def __post_init__(self):
        F_S = as_cmatrix(self.F_S, name="F_S")
        m = F_S.shape[0]
        object.__setattr__(self, "F_S", as_cmatrix(F_S, m, m, name="F_S"))
        object.__setattr__(self, "F_H", as_cmatrix(self.F_H, m, m, name="F_H"))
        if self.K is not None:
            object.__setattr__(self, "K", as_cmatrix(self.K, m, m, name="K"))

    @property
    def m(self) -> int:
        return self.F_S.shape[0]

    @classmethod
    def zero(cls, m: int, problem: str = "") -> "FeedbackSolution":
        Z = np.zeros((m, m), dtype=complex)
        return cls(Z, Z.copy(), None, problem)


def _small(res: float, scale: float, tol: TolerancePolicy) -> bool:
    return res == 0.0 or res <= tol.equality_tol * scale


def validate_general(sys: GeneralPHDAE, tol: TolerancePolicy = DEFAULT_TOL) -> ValidationReport:
    """Itemised check of the pHDAE conditions on a general system.

    The real part of a square matrix ``M`` is read as its Hermitian part
    ``(M + M^H) / 2``, so the skew condition only ever sees ``J`` through
    ``J - J^H``.  ``rank(Q)`` is recorded in ``info`` but never assumed.
    """
    Q, E, J = sys.Q, sys.E, sys.J
    QE = herm(Q) @ E
    scale = max(norm2(QE), norm2(herm(E) @ Q))
    sym_res = norm2(QE - herm(E) @ Q)
    qe = psd_project_check(QE, tol) if sys.n else None
    skew = hermitian_part(herm(Q) @ (J - herm(J)) @ Q)
    W = sys.dissipation_matrix()
    w = psd_project_check(W, tol)
    S_res = norm2(sys.S - herm(sys.S))
    N_res = norm2(sys.N + herm(sys.N))
    checks = (
        Check("QhE_hermitian", _small(sym_res, scale, tol), sym_res),
        Check("QhE_psd", qe is None or qe.is_psd, 0.0 if qe is None else qe.min_eig),
        Check("QhJQ_real_part_zero", _small(norm2(skew), norm2(Q) ** 2 * norm2(J), tol), norm2(skew)),
        Check("W_hermitian", w.is_hermitian, w.hermitian_residual),
        Check("W_psd", w.is_psd, w.min_eig),
        Check("S_hermitian", _small(S_res, norm2(sys.S), tol), S_res),
        Check("N_skew", _small(N_res, norm2(sys.N), tol), N_res),
    )
    return ValidationReport(checks, {"rank_Q": rank_of(Q, tol), "n": sys.n, "l": sys.l, "m": sys.m})


def validate_simplified(sys: SimplifiedPHDAE, tol: TolerancePolicy = DEFAULT_TOL) -> ValidationReport:
    e = psd_project_check(sys.E, tol)
    r = psd_project_check(sys.R, tol)
    J_res = norm2(sys.J + herm(sys.J))
    J_ok = _small(J_res, norm2(sys.J), tol)
    ri = rank_info(sys.B, tol)
    checks = (
        Check("E_hermitian", e.is_hermitian, e.hermitian_residual),
        Check("E_psd", e.is_psd, e.min_eig),
        Check("J_skew", J_ok, J_res),
        Check("R_hermitian", r.is_hermitian, r.hermitian_residual),
        Check("R_psd", r.is_psd, r.min_eig),
        Check("B_full_column_rank", ri.rank == sys.m, ri.sigma if ri.rank == sys.m else ri.next_sigma,
              f"rank {ri.rank} of {sys.m} columns"),
    )
    return ValidationReport(checks, {"n": sys.n, "m": sys.m, "rank_B": ri.rank})


def require_full_rank(sys: SimplifiedPHDAE, tol: TolerancePolicy = DEFAULT_TOL) -> SimplifiedPHDAE:
    r = rank_of(sys.B, tol)
    if r != sys.m:
        raise RankDeficientInputError(f"B has rank {r} < m = {sys.m}; use compress_input")
    return sys


@dataclass(frozen=True, eq=False)
class InputCompression:
    """``B_full = B @ basis``; feedbacks map back by ``basis F basis^H``."""

    basis: np.ndarray  # m x r, orthonormal columns spanning range(B^H)

    def expand(self, F):
        if F is None:
            return None
        return self.basis @ F @ herm(self.basis)

    def expand_feedback(self, fb: FeedbackSolution) -> FeedbackSolution:
        return FeedbackSolution(
            self.expand(fb.F_S), self.expand(fb.F_H), self.expand(fb.K),
            fb.problem, fb.rank_target, fb.certificate, dict(fb.details),
        )


def compress_input(sys: SimplifiedPHDAE, tol: TolerancePolicy = DEFAULT_TOL):
    """Replace a rank-deficient ``B`` by ``B W`` with ``W`` spanning ``range(B^H)``.

    ``u = W v`` restricts the inputs; since ``B F B^H = (B W)(W^H F W)(B W)^H``
    for every ``F`` supported on that subspace, feedbacks designed for the
    compressed system are returned to original input coordinates by
    :meth:`InputCompression.expand`.
    """
    W = range_basis(herm(sys.B), tol)
    reduced = SimplifiedPHDAE(sys.E, sys.J, sys.R, sys.B @ W)
    return reduced, InputCompression(W)


def closed_loop_matrices(sys: SimplifiedPHDAE, fb: FeedbackSolution):
    """Return ``(E', J', R')`` of the closed loop driven by the new input ``v``."""
    if fb.m != sys.m:
        raise DimensionError(f"feedback is {fb.m}x{fb.m} but system has m = {sys.m}")
    B, Bh = sys.B, herm(sys.B)
    E = sys.E if fb.K is None else sys.E + B @ fb.K @ Bh
    J = sys.J + B @ fb.F_S @ Bh
    R = sys.R + B @ fb.F_H @ Bh
    return E, J, R


def closed_loop_scales(sys: SimplifiedPHDAE, fb: FeedbackSolution):
    """Reference norms ``(E_ref, A_ref)`` of the closed-loop coefficients."""
    b2 = norm2(sys.B) ** 2
    E_ref = norm2(sys.E) + (b2 * norm2(fb.K) if fb.K is not None else 0.0)
    A_ref = norm2(sys.A) + b2 * (norm2(fb.F_S) + norm2(fb.F_H))
    return E_ref, A_ref


def closed_loop(sys: SimplifiedPHDAE, fb: FeedbackSolution) -> Pencil:
    E, J, R = closed_loop_matrices(sys, fb)
    E_ref, A_ref = closed_loop_scales(sys, fb)
    return Pencil(E, J - R, E_ref, A_ref)


def closed_loop_system(sys: SimplifiedPHDAE, fb: FeedbackSolution) -> SimplifiedPHDAE:
    E, J, R = closed_loop_matrices(sys, fb)
    return SimplifiedPHDAE(E, J, R, sys.B)
