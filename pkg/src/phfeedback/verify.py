"""Independent certification of closed-loop pencils.

Nothing here looks at how a feedback was constructed: the oracles take a
pencil ``s E - A`` and decide regularity, index, finite spectrum and
stability from the matrices alone.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg as sla

from .linalg import (
    DEFAULT_TOL,
    DimensionError,
    TolerancePolicy,
    complement,
    herm,
    left_nullspace,
    norm2,
    rank_info,
    rank_of,
    range_basis,
    right_nullspace,
    svdvals,
)
from .model import Pencil

# fixed stream for regularity shifts so verdicts are reproducible
_SHIFT_SEED = 20240611


class SingularPencilError(ValueError):
    """An operation that needs a regular pencil got a singular one."""


class WongIterationError(RuntimeError):
    """A Wong sequence did not stabilise within n + 1 steps."""


def _as_pencil(p) -> Pencil:
    if isinstance(p, Pencil):
        return p
    E, A = p
    return Pencil(E, A)


def _scales(p: Pencil):
    sE = max(norm2(p.E), p.E_ref or 0.0, 1e-300)
    sA = max(norm2(p.A), p.A_ref or 0.0, 1e-300)
    return sE, sA


def algebraic_certificate(p: Pencil, tol: TolerancePolicy = DEFAULT_TOL):
    """Return ``(certified, sigma_min)`` for ``T_inf(E)^H A S_inf(E)`` nonsingular.

    When it holds the pencil is regular with index at most one.
    """
    p = _as_pencil(p)
    sE, sA = _scales(p)
    S = right_nullspace(p.E, tol, scale=sE)
    T = left_nullspace(p.E, tol, scale=sE)
    if S.shape[1] != T.shape[1]:
        return False, 0.0
    if S.shape[1] == 0:
        return True, float("inf")
    M = herm(T) @ p.A @ S
    s = svdvals(M)
    ok = s[-1] > tol.rank_rel * max(M.shape) * sA
    return bool(ok), float(s[-1])


def is_regular(p, tol: TolerancePolicy = DEFAULT_TOL):
    """Return ``(regular, method)`` with method ``"deterministic"`` or ``"probabilistic"``.

    A full-rank evaluation ``s E - A`` at any shift proves regularity.  If all
    ``n + 1`` shifts on a circle give rank deficiency the pencil is declared
    singular; ``det(s E - A)`` has degree at most ``n``, so in exact arithmetic
    this verdict cannot be wrong, but it rests on rank decisions at sampled
    points and is labelled probabilistic.
    """
    p = _as_pencil(p)
    n = p.n
    if n == 0:
        return True, "deterministic"
    sE, sA = _scales(p)
    if rank_of(p.E, tol, scale=sE) == n:
        return True, "deterministic"
    if algebraic_certificate(p, tol)[0]:
        return True, "deterministic"
    radius = 1.0 + sA / sE if rank_of(p.E, tol, scale=sE) > 0 else 1.0
    rng = np.random.default_rng(_SHIFT_SEED)
    phases = rng.uniform(0.0, 2 * np.pi, n + 1)
    for phi in phases:
        s = radius * np.exp(1j * phi)
        M = s * p.E - p.A
        scale = abs(s) * sE + sA
        if rank_of(M, tol, scale=scale) == n:
            return True, "deterministic"
    return False, "probabilistic"


def _preimage(M: np.ndarray, Q: np.ndarray, tol, scale) -> np.ndarray:
    """Orthonormal basis of ``{x : M x in range(Q)}``."""
    n = M.shape[1]
    C = complement(Q, M.shape[0])
    if C.shape[1] == 0:
        return np.eye(n, dtype=complex)
    return right_nullspace(herm(C) @ M, tol, scale=scale)


def _image(M: np.ndarray, X: np.ndarray, tol, scale) -> np.ndarray:
    if X.shape[1] == 0:
        return np.zeros((M.shape[0], 0), dtype=complex)
    return range_basis(M @ X, tol, scale=scale)


def wong_infinite(p, tol: TolerancePolicy = DEFAULT_TOL):
    """Second Wong sequence ``W_{i+1} = E^{-1}(A W_i)``, ``W_0 = {0}``.

    Returns ``(basis of W*, steps)`` where ``steps`` is the first ``i`` with
    ``W_i = W*``; for a regular pencil that is the index.
    """
    p = _as_pencil(p)
    n = p.n
    sE, sA = _scales(p)
    W = np.zeros((n, 0), dtype=complex)
    for i in range(n + 2):
        W_next = _preimage(p.E, _image(p.A, W, tol, sA), tol, sE)
        if W_next.shape[1] == W.shape[1]:
            return W, i
        if W_next.shape[1] < W.shape[1]:
            raise WongIterationError("infinite Wong sequence lost dimension; tolerance inconsistency")
        W = W_next
    raise WongIterationError(f"infinite Wong sequence did not stabilise in {n + 1} steps")


def wong_finite(p, tol: TolerancePolicy = DEFAULT_TOL):
    """First Wong sequence ``V_{i+1} = A^{-1}(E V_i)``, ``V_0 = C^n``."""
    p = _as_pencil(p)
    n = p.n
    sE, sA = _scales(p)
    V = np.eye(n, dtype=complex)
    for _ in range(n + 2):
        V_next = _preimage(p.A, _image(p.E, V, tol, sE), tol, sA)
        if V_next.shape[1] == V.shape[1]:
            return V
        if V_next.shape[1] > V.shape[1]:
            raise WongIterationError("finite Wong sequence gained dimension; tolerance inconsistency")
        V = V_next
    raise WongIterationError(f"finite Wong sequence did not stabilise in {n + 1} steps")


def index_of(p, tol: TolerancePolicy = DEFAULT_TOL) -> int:
    p = _as_pencil(p)
    regular, _ = is_regular(p, tol)
    if not regular:
        raise SingularPencilError("index is undefined for a singular pencil")
    if p.n == 0:
        return 0
    sE, _ = _scales(p)
    if rank_of(p.E, tol, scale=sE) == p.n:
        return 0
    if algebraic_certificate(p, tol)[0]:
        return 1
    _, steps = wong_infinite(p, tol)
    return steps


def finite_eigenvalues(p, tol: TolerancePolicy = DEFAULT_TOL) -> np.ndarray:
    """Finite eigenvalues of a regular pencil, with algebraic multiplicity.

    The pencil is restricted to its finite deflating subspace ``V*`` (limit of
    the first Wong sequence); ``E`` is injective there, so the restriction is
    a standard eigenproblem.
    """
    p = _as_pencil(p)
    regular, _ = is_regular(p, tol)
    if not regular:
        raise SingularPencilError("finite spectrum of a singular pencil is not defined here")
    n = p.n
    if n == 0:
        return np.zeros(0, dtype=complex)
    sE, _ = _scales(p)
    if rank_of(p.E, tol, scale=sE) == n:
        return sla.eigvals(p.A, p.E)
    X = wong_finite(p, tol)
    f = X.shape[1]
    if f == 0:
        return np.zeros(0, dtype=complex)
    EX = p.E @ X
    Y, _ = np.linalg.qr(EX)
    M = np.linalg.solve(herm(Y) @ EX, herm(Y) @ p.A @ X)
    return np.linalg.eigvals(M)


def _cluster_sizes(eigs: np.ndarray, rel: float = 1e-6) -> list[int]:
    sizes = []
    for lam in eigs:
        close = np.abs(eigs - lam) <= rel * max(1.0, abs(lam))
        sizes.append(int(np.sum(close)))
    return sizes


@dataclass
class PencilReport:
    regular: bool
    regular_method: str
    index: Optional[int]
    finite_eigs: list
    stable: bool
    index_le_1: bool
    max_real: Optional[float]
    margins: dict = field(default_factory=dict)
    axis_semisimple: str = "n/a"
    tolerances: Optional[dict] = None

    def satisfies(self, claims) -> bool:
        """Check the properties named in ``claims`` (``regular``, ``index<=1``, ``stable``)."""
        ok = True
        for c in claims:
            if c == "regular":
                ok &= self.regular
            elif c == "index<=1":
                ok &= self.regular and self.index_le_1
            elif c == "stable":
                ok &= self.stable
            else:
                raise ValueError(f"unknown claim {c!r}")
        return bool(ok)


def is_asymptotically_stable(p, tol: TolerancePolicy = DEFAULT_TOL) -> PencilReport:
    """Regular, index at most one, all finite eigenvalues with ``Re < -stab_margin``."""
    p = _as_pencil(p)
    regular, method = is_regular(p, tol)
    margins = {}
    cert, smin = algebraic_certificate(p, tol)
    margins["algebraic_block_sigma_min"] = smin
    if not regular:
        return PencilReport(False, method, None, [], False, False, None, margins,
                            "n/a", tol.to_dict())
    idx = index_of(p, tol)
    eigs = finite_eigenvalues(p, tol)
    max_real = float(np.max(eigs.real)) if eigs.size else None
    stable = idx <= 1 and (max_real is None or max_real < -tol.stab_margin)
    axis = [lam for lam in eigs if abs(lam.real) <= tol.stab_margin]
    semisimple = "n/a"
    if axis:
        sizes = _cluster_sizes(eigs)
        axis_sizes = [sz for lam, sz in zip(eigs, sizes) if abs(lam.real) <= tol.stab_margin]
        semisimple = "yes" if all(sz == 1 for sz in axis_sizes) else "undetermined"
    margins["max_real_part"] = max_real
    return PencilReport(True, method, idx, [complex(z) for z in eigs], bool(stable), idx <= 1,
                        max_real, margins, semisimple, tol.to_dict())


def controllability_rank(E, A, B, s: complex, tol: TolerancePolicy = DEFAULT_TOL):
    M = np.hstack([A - s * E, B])
    scale = norm2(A) + abs(s) * norm2(E) + norm2(B)
    return rank_info(M, tol, scale=scale)


def uncontrollable_imaginary_modes(E, A, B, tol: TolerancePolicy = DEFAULT_TOL, *, report: dict | None = None):
    """Purely imaginary ``s`` with ``rank [A - s E, B] < n``.

    Candidates are ``s = 0`` and the imaginary parts of finite eigenvalues of
    ``(E, A)`` lying within ``stab_margin`` of the axis.  A rank drop can only
    happen at an eigenvalue of the pencil, which makes the candidate set
    complete for regular pencils.  For a singular ``(E, A)`` the candidates are
    taken from ``(E, A - B F B^H)`` with a random positive definite ``F``; the
    rank test itself is feedback invariant.  ``report`` (if given) receives the
    path taken.
    """
    E = np.asarray(E, dtype=complex)
    A = np.asarray(A, dtype=complex)
    B = np.asarray(B, dtype=complex)
    n = E.shape[0]
    if E.shape != (n, n) or A.shape != (n, n) or B.shape[0] != n:
        raise DimensionError("uncontrollable_imaginary_modes needs square E, A and conformable B")
    info = {} if report is None else report
    pencil = Pencil(E, A)
    regular, _ = is_regular(pencil, tol)
    info["path"] = "direct"
    if not regular and B.shape[1] > 0:
        rng = np.random.default_rng(_SHIFT_SEED)
        G = rng.standard_normal((B.shape[1], B.shape[1]))
        F = G @ G.T + np.eye(B.shape[1])
        scale = max(norm2(A), 1.0) / max(norm2(B) ** 2, 1e-300)
        pencil = Pencil(E, A - scale * B @ F @ herm(B))
        regular, _ = is_regular(pencil, tol)
        info["path"] = "feedback-regularised"
    candidates = [0.0]
    if regular:
        for lam in finite_eigenvalues(pencil, tol):
            if abs(lam.real) <= tol.stab_margin:
                candidates.append(float(lam.imag))
    else:
        info["path"] = "singular"
    found = []
    for w in candidates:
        s = 1j * w
        if controllability_rank(E, A, B, s, tol).rank < n:
            if not any(abs(s - t) <= 1e-8 * max(1.0, abs(s)) for t in found):
                found.append(s)
    return found


# generator lives in its own module; re-exported for callers that expect it next to the oracles
from .generator import GeneratorSpec, GroundTruth, SpecError, generate  # noqa: E402,F401
