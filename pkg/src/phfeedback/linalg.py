"""Tolerance-aware dense complex linear algebra.

Every rank decision in the package goes through :func:`rank_of` and the
nullspace/compression helpers below, which all use the same singular-value
cutoff::

    sigma_i > rank_rel * max(rows, cols) * scale

where ``scale`` is the largest singular value of the matrix unless the caller
passes an explicit reference norm (used inside staircase reductions, where a
sub-block must be judged against the norm of the matrix it came from).
"""
from __future__ import annotations

from dataclasses import dataclass, asdict
from typing import NamedTuple

import numpy as np
import scipy.linalg as sla

EPS = np.finfo(float).eps


class DimensionError(ValueError):
    """Matrix shapes are inconsistent."""


@dataclass(frozen=True)
class TolerancePolicy:
    rank_rel: float = 1e-10
    psd_tol: float = 1e-10
    stab_margin: float = 1e-8
    equality_tol: float = 1e-10

    def __post_init__(self):
        for name, value in asdict(self).items():
            if not (np.isfinite(value) and value > 0):
                raise ValueError(f"tolerance {name} must be positive, got {value!r}")
        if self.rank_rel < EPS:
            raise ValueError("rank_rel must be at least machine epsilon")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TolerancePolicy":
        return cls(**{k: float(v) for k, v in d.items()})


DEFAULT_TOL = TolerancePolicy()


def as_cmatrix(M, rows=None, cols=None, name="matrix") -> np.ndarray:
    """Return ``M`` as a finite 2-D complex array (copy)."""
    A = np.array(M, dtype=complex)
    if A.ndim == 0:
        A = A.reshape(1, 1)
    elif A.ndim == 1:
        A = A.reshape(-1, 1) if A.size else A.reshape(0, 0)
    if A.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError(f"{name} has non-finite entries")
    if rows is not None and A.shape[0] != rows:
        raise DimensionError(f"{name} has {A.shape[0]} rows, expected {rows}")
    if cols is not None and A.shape[1] != cols:
        raise DimensionError(f"{name} has {A.shape[1]} columns, expected {cols}")
    return A


def norm2(M) -> float:
    M = np.asarray(M)
    if M.size == 0:
        return 0.0
    return float(np.linalg.norm(M, 2))


def herm(M):
    return M.conj().T


def hermitian_part(M):
    return 0.5 * (M + herm(M))


def skew_part(M):
    return 0.5 * (M - herm(M))


def cutoff(M, tol: TolerancePolicy = DEFAULT_TOL, scale: float | None = None) -> float:
    """Singular-value threshold used for rank decisions on ``M``."""
    rows, cols = np.shape(M)
    if rows == 0 or cols == 0:
        return 0.0
    if scale is None:
        scale = norm2(M)
    return tol.rank_rel * max(rows, cols) * scale


def svdvals(M) -> np.ndarray:
    M = np.asarray(M)
    if M.size == 0:
        return np.zeros(0)
    return sla.svdvals(M)


def rank_of(M, tol: TolerancePolicy = DEFAULT_TOL, scale: float | None = None) -> int:
    M = np.asarray(M)
    if M.size == 0:
        return 0
    s = svdvals(M)
    c = cutoff(M, tol, scale)
    if s[0] == 0.0:
        return 0
    return int(np.sum(s > c))


class RankInfo(NamedTuple):
    """Rank decision with the singular value that decided it."""

    rank: int
    sigma: float  # smallest singular value counted as nonzero (inf if rank 0)
    next_sigma: float  # largest singular value counted as zero (0 if none)
    cutoff: float


def rank_info(M, tol: TolerancePolicy = DEFAULT_TOL, scale: float | None = None) -> RankInfo:
    s = svdvals(M)
    c = cutoff(M, tol, scale)
    r = int(np.sum(s > c)) if s.size and s[0] > 0 else 0
    sigma = float(s[r - 1]) if r > 0 else float("inf")
    nxt = float(s[r]) if r < s.size else 0.0
    return RankInfo(r, sigma, nxt, c)


def _full_svd(M):
    rows, cols = M.shape
    if rows == 0 or cols == 0:
        return np.eye(rows, dtype=complex), np.zeros(0), np.eye(cols, dtype=complex)
    U, s, Vh = sla.svd(M, full_matrices=True, lapack_driver="gesvd")
    return U, s, herm(Vh)


def _split_rank(M, tol, scale):
    U, s, V = _full_svd(M)
    if s.size == 0 or s[0] == 0.0:
        return U, V, 0
    r = int(np.sum(s > cutoff(M, tol, scale)))
    return U, V, r


def right_nullspace(M, tol: TolerancePolicy = DEFAULT_TOL, scale: float | None = None) -> np.ndarray:
    """Orthonormal basis (columns) of ``{x : M x = 0}``."""
    M = np.asarray(M, dtype=complex)
    _, V, r = _split_rank(M, tol, scale)
    return V[:, r:]


def left_nullspace(M, tol: TolerancePolicy = DEFAULT_TOL, scale: float | None = None) -> np.ndarray:
    """Orthonormal basis (columns) of ``{y : y^H M = 0}``."""
    M = np.asarray(M, dtype=complex)
    U, _, r = _split_rank(M, tol, scale)
    return U[:, r:]


def range_basis(M, tol: TolerancePolicy = DEFAULT_TOL, scale: float | None = None) -> np.ndarray:
    """Orthonormal basis of the column space of ``M``."""
    M = np.asarray(M, dtype=complex)
    U, _, r = _split_rank(M, tol, scale)
    return U[:, :r]


def complement(Q: np.ndarray, n: int | None = None) -> np.ndarray:
    """Orthonormal basis of the orthogonal complement of the orthonormal columns ``Q``."""
    if n is None:
        n = Q.shape[0]
    if Q.shape[1] == 0:
        return np.eye(n, dtype=complex)
    U, _, _ = _full_svd(Q)
    return U[:, Q.shape[1]:]


def row_compress(M, tol: TolerancePolicy = DEFAULT_TOL, scale: float | None = None):
    """Unitary ``U`` with ``U^H M = [M1; 0]``, ``M1`` of full row rank ``r``."""
    M = np.asarray(M, dtype=complex)
    U, _, r = _split_rank(M, tol, scale)
    return U, r


def col_compress(M, tol: TolerancePolicy = DEFAULT_TOL, scale: float | None = None, lead: str = "zero"):
    """Unitary ``V`` compressing the columns of ``M``.

    With ``lead="zero"`` (default) ``M V = [0, M2]``; with ``lead="full"``
    ``M V = [M2, 0]``.  ``M2`` has full column rank ``r``.
    """
    M = np.asarray(M, dtype=complex)
    _, V, r = _split_rank(M, tol, scale)
    if lead == "zero":
        V = np.hstack([V[:, r:], V[:, :r]])
    elif lead != "full":
        raise ValueError("lead must be 'zero' or 'full'")
    return V, r


@dataclass(frozen=True)
class PSDCheck:
    is_hermitian: bool
    is_psd: bool
    is_pd: bool
    min_eig: float
    hermitian_residual: float
    norm: float


def psd_project_check(M, tol: TolerancePolicy = DEFAULT_TOL, scale: float | None = None) -> PSDCheck:
    """Hermitian / semidefinite / definite classification of a square matrix.

    Definiteness is judged on the Hermitian part.  The 0x0 matrix is PD.
    ``scale`` replaces ``||M||`` as the reference norm when ``M`` is a sum
    whose terms may cancel.
    """
    M = np.asarray(M, dtype=complex)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DimensionError(f"psd check needs a square matrix, got shape {M.shape}")
    if M.shape[0] == 0:
        return PSDCheck(True, True, True, float("inf"), 0.0, 0.0)
    nrm = norm2(M) if scale is None else max(float(scale), norm2(M))
    res = norm2(M - herm(M))
    H = hermitian_part(M)
    lam = float(np.min(np.linalg.eigvalsh(H)))
    return PSDCheck(
        is_hermitian=res <= tol.equality_tol * nrm,
        is_psd=lam >= -tol.psd_tol * nrm,
        is_pd=lam > tol.psd_tol * nrm,
        min_eig=lam,
        hermitian_residual=res,
        norm=nrm,
    )


def pinv(M, tol: TolerancePolicy = DEFAULT_TOL, scale: float | None = None) -> np.ndarray:
    """Moore-Penrose inverse with the package rank cutoff."""
    M = np.asarray(M, dtype=complex)
    rows, cols = M.shape
    if M.size == 0:
        return np.zeros((cols, rows), dtype=complex)
    U, s, Vh = sla.svd(M, full_matrices=False)
    c = cutoff(M, tol, scale)
    keep = s > c
    if not np.any(keep) or s[0] == 0.0:
        return np.zeros((cols, rows), dtype=complex)
    return (herm(Vh[keep]) / s[keep]) @ herm(U[:, keep])


def penrose_residuals(M, X) -> tuple[float, float, float, float]:
    """Residual norms of the four Penrose identities for ``X = pinv(M)``."""
    M = np.asarray(M)
    X = np.asarray(X)
    return (
        norm2(M @ X @ M - M),
        norm2(X @ M @ X - X),
        norm2(herm(M @ X) - M @ X),
        norm2(herm(X @ M) - X @ M),
    )


def random_unitary(n: int, rng: np.random.Generator) -> np.ndarray:
    if n == 0:
        return np.zeros((0, 0), dtype=complex)
    Z = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    Q, R = np.linalg.qr(Z)
    d = np.diag(R)
    return Q * (d / np.abs(d))


def random_complex(rows: int, cols: int, rng: np.random.Generator) -> np.ndarray:
    return (rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols))) / np.sqrt(2)


def unitarity_defect(U) -> float:
    U = np.asarray(U)
    if U.size == 0:
        return 0.0
    return float(np.linalg.norm(herm(U) @ U - np.eye(U.shape[1]), "fro"))


def rank_blocks(blocks, tol: TolerancePolicy = DEFAULT_TOL, scales=None) -> RankInfo:
    """Rank of ``[M1, M2, ...]`` with each block normalised by its own norm.

    Keeps rank decisions on concatenations such as ``[E, J - R, B]`` independent
    of how the individual blocks are scaled.  ``scales[i]``, when given and not
    None, replaces the norm of block ``i``: a product such as ``(J - R) S``
    may be roundoff, and must then be measured against ``J - R``.
    """
    cols = []
    scales = [None] * len(blocks) if scales is None else list(scales)
    for M, ref in zip(blocks, scales):
        M = np.asarray(M, dtype=complex)
        nrm = norm2(M) if ref is None else max(float(ref), norm2(M))
        if M.shape[1] and nrm > 0:
            cols.append(M / nrm)
    if not cols:
        return RankInfo(0, float("inf"), 0.0, 0.0)
    return rank_info(np.hstack(cols), tol, scale=1.0)
