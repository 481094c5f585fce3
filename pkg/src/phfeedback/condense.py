"""Unitary staircase condensed form and the quantities derived from it.

The condensed form splits the state space into six groups of sizes
``n1..n6`` and the input space into ``m - n3`` and ``n3`` columns::

    U^H B V       rows n1: [0    B12]       U^H E U  zero outside the
                       n2: [B21  B22]                 leading (n1..n4) block
                       n3: [0    B32]
                       n4..n6: 0

    U^H (J-R) U   column n6 is [J16; J26; 0; 0; 0; 0], row n6 its negated
                  adjoint, the trailing (n5, n6) block is diag(A55, 0)

with ``[J16; J26]`` of full row rank, ``B21`` full row rank, ``B32``
nonsingular, ``A55`` nonsingular and ``E44 > 0``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .linalg import (
    DEFAULT_TOL,
    TolerancePolicy,
    complement,
    herm,
    left_nullspace,
    norm2,
    psd_project_check,
    rank_blocks,
    rank_info,
    rank_of,
    right_nullspace,
    row_compress,
    col_compress,
    unitarity_defect,
)
from .model import SimplifiedPHDAE, require_full_rank, validate_simplified

LABELS = ("1", "2", "3", "4", "5", "6")


class CondensedFormError(RuntimeError):
    """The computed condensed form violates one of its defining properties."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("condensed form self-check failed: " + "; ".join(self.violations))


class InvalidSystemError(ValueError):
    """The input is not a valid simplified pHDAE."""


class ConditioningError(RuntimeError):
    """A pivot block of the block elimination is numerically singular."""


def _slices(sizes):
    out, start = [], 0
    for s in sizes:
        out.append(slice(start, start + s))
        start += s
    return out


@dataclass(eq=False)
class CondensedForm:
    U: np.ndarray
    V: np.ndarray
    dims: tuple
    E_c: np.ndarray
    A_c: np.ndarray
    B_c: np.ndarray
    scales: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.U.shape[0]

    @property
    def m(self) -> int:
        return self.V.shape[0]

    @property
    def row_slices(self):
        return _slices(self.dims)

    @property
    def col_slices(self):
        n3 = self.dims[2]
        return _slices((self.m - n3, n3))

    def _rs(self, i):
        return self.row_slices[int(i) - 1]

    def E(self, i, j):
        return self.E_c[self._rs(i), self._rs(j)]

    def A(self, i, j):
        return self.A_c[self._rs(i), self._rs(j)]

    def J(self, i, j):
        return 0.5 * (self.A(i, j) - herm(self.A(j, i)))

    def R(self, i, j):
        return -0.5 * (self.A(i, j) + herm(self.A(j, i)))

    def B(self, i, j):
        return self.B_c[self._rs(i), self.col_slices[int(j) - 1]]

    def block(self, name: str):
        """Block by label, e.g. ``"E13"``, ``"A55"``, ``"B32"``, ``"J16"``."""
        kind, i, j = name[0], name[1], name[2]
        return getattr(self, kind)(i, j)

    def reconstruct(self):
        """Return ``(E, A, B)`` in original coordinates."""
        U, V = self.U, self.V
        return U @ self.E_c @ herm(U), U @ self.A_c @ herm(U), U @ self.B_c @ herm(V)


def condensed_form(sys: SimplifiedPHDAE, tol: TolerancePolicy = DEFAULT_TOL, check: bool = True) -> CondensedForm:
    """Staircase reduction to the unitary condensed form.

    Steps: compress ``B``; split ``E`` on the orthogonal complement of
    ``range(B)`` into its definite part and kernel (which is the left
    nullspace of ``[E B]``); split ``J - R`` on that kernel into a
    nonsingular part (n5) and the common kernel (n6); finally, inside
    ``range([E B])``, separate the rows reached by the n6 coupling (n1+n2)
    from the rest, and use ``B`` to split each group further.
    """
    rep = validate_simplified(sys, tol)
    if not rep.ok:
        raise InvalidSystemError(f"not a valid simplified pHDAE: {rep.failures}")
    n, m = sys.n, sys.m
    E, A, B = sys.E, sys.A, sys.B
    sE = max(norm2(E), 1e-300)
    sA = max(norm2(A), 1e-300)
    sB = max(norm2(B), 1e-300)

    # Step 1: range(B) and its complement
    U1, mu1 = row_compress(B, tol, scale=sB)
    Ub, Uc = U1[:, :mu1], U1[:, mu1:]

    # Step 2: definite part of E on the complement
    E22 = herm(Uc) @ E @ Uc
    E22 = 0.5 * (E22 + herm(E22))
    if E22.shape[0]:
        lam, W = np.linalg.eigh(E22)
        order = np.argsort(lam)[::-1]
        lam, W = lam[order], W[:, order]
        mu2 = int(np.sum(lam > tol.rank_rel * max(E22.shape[0], 1) * sE))
    else:
        W = np.zeros((0, 0), dtype=complex)
        mu2 = 0
    top = np.hstack([Ub, Uc @ W[:, :mu2]])
    Z = Uc @ W[:, mu2:]

    # Step 3: the trailing block of J - R on left-null([E B])
    A33 = herm(Z) @ A @ Z
    U3, n5 = row_compress(A33, tol, scale=sA)
    Z5 = Z @ U3[:, :n5]
    Z6 = Z @ U3[:, n5:]
    n6 = Z6.shape[1]

    # Step 4a: rows of range([E B]) coupled to the n6 columns
    k = top.shape[1]
    G = herm(top) @ A @ Z6
    UG, t = row_compress(G, tol, scale=sA)
    T_top = top @ UG[:, :t]
    L = top @ UG[:, t:]

    # Step 4b: B restricted to the remaining rows fixes n3 and the column split V
    BL = herm(L) @ B
    V, n3 = col_compress(BL, tol, scale=sB, lead="zero")
    Va, Vb = V[:, : m - n3], V[:, m - n3:]
    UL, _ = row_compress(BL @ Vb, tol, scale=sB)
    L3 = L @ UL[:, :n3]
    L4 = L @ UL[:, n3:]

    # Step 4c: the first m - n3 input columns on the coupled rows fix n1 / n2
    BT1 = herm(T_top) @ B @ Va
    UT, n2 = row_compress(BT1, tol, scale=sB)
    T2 = T_top @ UT[:, :n2]
    T1 = T_top @ UT[:, n2:]

    n1 = t - n2
    n4 = k - t - n3
    U = np.hstack([T1, T2, L3, L4, Z5, Z6])
    dims = (n1, n2, n3, n4, n5, n6)
    E_c = herm(U) @ E @ U
    E_c = 0.5 * (E_c + herm(E_c))
    A_c = herm(U) @ A @ U
    B_c = herm(U) @ B @ V
    cf = CondensedForm(U, V, dims, E_c, A_c, B_c, {"E": sE, "A": sA, "B": sB})
    cf = _clean(cf)
    if check:
        violations = condensed_violations(cf, sys, tol)
        if violations:
            raise CondensedFormError(violations)
    return cf


def _clean(cf: CondensedForm) -> CondensedForm:
    """Set the structurally zero blocks to exact zeros (after measuring them)."""
    res = {}
    E_c, A_c, B_c = cf.E_c.copy(), cf.A_c.copy(), cf.B_c.copy()
    rs = cf.row_slices
    cs = cf.col_slices
    ez = np.zeros_like(E_c, dtype=bool)
    for i in (4, 5):
        ez[rs[i], :] = True
        ez[:, rs[i]] = True
    az = np.zeros_like(A_c, dtype=bool)
    for i in (2, 3, 4, 5):
        az[rs[i], rs[5]] = True
        az[rs[5], rs[i]] = True
    bz = np.zeros_like(B_c, dtype=bool)
    for i in (3, 4, 5):
        bz[rs[i], :] = True
    bz[rs[0], cs[0]] = True
    bz[rs[2], cs[0]] = True
    res["E_pattern"] = float(np.abs(E_c[ez]).max(initial=0.0))
    res["A_pattern"] = float(np.abs(A_c[az]).max(initial=0.0))
    res["B_pattern"] = float(np.abs(B_c[bz]).max(initial=0.0))
    E_c[ez] = 0
    A_c[az] = 0
    B_c[bz] = 0
    out = CondensedForm(cf.U, cf.V, cf.dims, E_c, A_c, B_c, dict(cf.scales))
    out.scales["pattern_residuals"] = res
    return out


def condensed_violations(cf: CondensedForm, sys: SimplifiedPHDAE, tol: TolerancePolicy = DEFAULT_TOL) -> list[str]:
    """Every defining property of the condensed form that fails, as text."""
    out = []
    n1, n2, n3, n4, n5, n6 = cf.dims
    if sum(cf.dims) != sys.n:
        out.append(f"dims {cf.dims} do not sum to n = {sys.n}")
    sE, sA, sB = cf.scales["E"], cf.scales["A"], cf.scales["B"]
    pr = cf.scales.get("pattern_residuals", {})
    eq = 1e-8
    if pr.get("E_pattern", 0) > eq * sE:
        out.append(f"E zero pattern residual {pr['E_pattern']:.3e}")
    if pr.get("A_pattern", 0) > eq * sA:
        out.append(f"A zero pattern residual {pr['A_pattern']:.3e}")
    if pr.get("B_pattern", 0) > eq * sB:
        out.append(f"B zero pattern residual {pr['B_pattern']:.3e}")
    for name, U in (("U", cf.U), ("V", cf.V)):
        d = unitarity_defect(U)
        if d > 64 * max(U.shape[0], 1) * np.finfo(float).eps * 10:
            out.append(f"{name} not unitary (defect {d:.3e})")
    E, A, B = cf.reconstruct()
    for name, X, Y, s in (("E", E, sys.E, sE), ("A", A, sys.A, sA), ("B", B, sys.B, sB)):
        if norm2(X - Y) > eq * max(s, 1e-300) and norm2(X - Y) > 0:
            out.append(f"reconstruction of {name} off by {norm2(X - Y):.3e}")
    J16_26 = np.vstack([cf.A(1, 6), cf.A(2, 6)])
    if rank_of(J16_26, tol, scale=sA) != n1 + n2:
        out.append("rank [J16; J26] != n1 + n2")
    if rank_of(cf.B(2, 1), tol, scale=sB) != n2:
        out.append("rank B21 != n2")
    if rank_of(cf.B(3, 2), tol, scale=sB) != n3:
        out.append("rank B32 != n3")
    if rank_of(cf.A(5, 5), tol, scale=sA) != n5:
        out.append("rank A55 != n5")
    k = n1 + n2 + n3 + n4
    compound = np.hstack([cf.E_c[:k, :k], cf.B_c[:k, :]])
    if rank_of(compound, tol, scale=max(sE, sB)) != k:
        out.append("rank of the [E B] compound != n1+n2+n3+n4")
    if n4 and not psd_project_check(cf.E(4, 4), tol).is_pd:
        out.append("E44 not positive definite")
    return out


@dataclass
class StructuralIndices:
    n1_plus_n4: int
    n3_plus_n4: int
    rank_E13: int
    cond1_holds: bool
    cond3_holds: bool
    margins: dict = field(default_factory=dict)

    def as_tuple(self):
        return (self.n1_plus_n4, self.n3_plus_n4, self.rank_E13, self.cond1_holds, self.cond3_holds)


def structural_indices(sys: SimplifiedPHDAE, tol: TolerancePolicy = DEFAULT_TOL) -> StructuralIndices:
    """Coordinate-free dimension formulas, evaluated with nullspace bases.

    ``n1+n4 = rank[E B] - rank B``;
    ``n3+n4 = rank(T(A S([E; B^H]))^H [E B])``;
    ``rank E13 = rank(T(B)^H E S(T([E B])^H A)) - n4``;
    cond1: ``rank [E, A, B] = n``; cond3: the ``rank E13`` term equals ``n1+n4``.
    Here ``S`` / ``T`` are right / left nullspace bases and ``A = J - R``.
    """
    require_full_rank(sys, tol)
    E, A, B = sys.E, sys.A, sys.B
    n = sys.n
    sE = max(norm2(E), 1e-300)
    sA = max(norm2(A), 1e-300)
    sB = max(norm2(B), 1e-300)
    sEB = max(sE, sB)
    EB = np.hstack([E, B])
    r_EB = rank_of(EB, tol, scale=sEB)
    r_B = rank_of(B, tol, scale=sB)
    n14 = r_EB - r_B

    S_EBh = right_nullspace(np.vstack([E, herm(B)]), tol, scale=sEB)
    T1 = left_nullspace(A @ S_EBh, tol, scale=sA) if S_EBh.shape[1] else np.eye(n, dtype=complex)
    n34 = rank_of(herm(T1) @ EB, tol, scale=sEB)

    T_EB = left_nullspace(EB, tol, scale=sEB)
    S2 = right_nullspace(herm(T_EB) @ A, tol, scale=sA) if T_EB.shape[1] else np.eye(n, dtype=complex)
    T_B = left_nullspace(B, tol, scale=sB)
    M = herm(T_B) @ E @ S2
    r_M = rank_of(M, tol, scale=sE)
    n4 = _n4(sys, tol, sA, sB, sEB)
    rank_E13 = r_M - n4

    full = rank_blocks([E, A, B], tol)
    cond1 = full.rank == n
    cond3 = r_M == n14
    margins = {"cond1_sigma": full.sigma if cond1 else full.next_sigma, "cond1_cutoff": full.cutoff}
    return StructuralIndices(n14, n34, rank_E13, bool(cond1), bool(cond3), margins)


def _n4(sys, tol, sA, sB, sEB) -> int:
    """``n4`` as the rank of ``E`` on the rows missed by both ``B`` and ``A Z``.

    ``Z`` spans the common kernel of the trailing block (the n6 directions),
    so ``[B, A Z]`` reaches exactly the row groups 1..3.
    """
    E, A, B = sys.E, sys.A, sys.B
    n = sys.n
    T_EB = left_nullspace(np.hstack([E, B]), tol, scale=sEB)
    if T_EB.shape[1]:
        K = right_nullspace(herm(T_EB) @ A @ T_EB, tol, scale=sA)
        AZ = A @ T_EB @ K
    else:
        AZ = np.zeros((n, 0), dtype=complex)
    # columns of A Z are judged against ||A||, columns of B against ||B||
    BZ = np.hstack([B / sB, AZ / sA])
    T = left_nullspace(BZ, tol, scale=1.0)
    return rank_of(herm(T) @ E, tol, scale=max(norm2(E), 1e-300))


@dataclass(eq=False)
class ScaledForm:
    """Non-unitary refinement: ``S (sE - (J - R)) T`` and ``S B V``.

    Rows/columns use the same six groups as the condensed form.  ``S B = T^H B``
    holds and the E blocks satisfy ``E12 = 0``, ``E_i4 = 0`` (i != 4),
    ``E11 > 0``, ``E44 > 0``; ``A`` has zero off-diagonal blocks in row and
    column group 5.
    """

    S: np.ndarray
    T: np.ndarray
    V: np.ndarray
    dims: tuple
    E_s: np.ndarray
    A_s: np.ndarray
    B_s: np.ndarray
    scales: dict = field(default_factory=dict)

    @property
    def m(self) -> int:
        return self.V.shape[0]

    def _rs(self, i):
        return _slices(self.dims)[int(i) - 1]

    def E(self, i, j):
        return self.E_s[self._rs(i), self._rs(j)]

    def A(self, i, j):
        return self.A_s[self._rs(i), self._rs(j)]

    def B(self, i, j):
        n3 = self.dims[2]
        cs = _slices((self.m - n3, n3))[int(j) - 1]
        return self.B_s[self._rs(i), cs]

    def block(self, name: str):
        return getattr(self, name[0])(name[1], name[2])


def _solve_pd(P, X, name, tol):
    """``X P^{-1}`` with a conditioning guard on ``P``."""
    if P.shape[0] == 0:
        return np.zeros((X.shape[0], 0), dtype=complex)
    s = np.linalg.svd(P, compute_uv=False)
    if s[-1] <= tol.rank_rel * P.shape[0] * max(s[0], 1e-300) or s[-1] == 0:
        raise ConditioningError(f"pivot block {name} is numerically singular (sigma_min {s[-1]:.3e})")
    return np.linalg.solve(P.T, X.T).T


def scaled_condensed_form(cf: CondensedForm, tol: TolerancePolicy = DEFAULT_TOL) -> ScaledForm:
    """Block Gaussian elimination on the unitary condensed form.

    Congruence steps (so ``E`` stays Hermitian and ``S B = T^H B``):
      1. clear ``B12``, ``B22`` with the rows of the nonsingular ``B32``;
      2. clear ``E14``, ``E24``, ``E34`` with ``E44``;
      3. clear ``E12`` with ``E11``.
    Then an equivalence step clears row and column group 5 of ``A`` with ``A55``;
    ``E`` and ``B`` vanish on group 5, so they are untouched.
    """
    n = cf.n
    sl = cf.row_slices
    E = cf.E_c.copy()
    A = cf.A_c.copy()
    Bc = cf.B_c.copy()
    X = np.eye(n, dtype=complex)  # accumulated congruence, rows

    def congruence(Xstep):
        nonlocal E, A, Bc, X
        E = Xstep @ E @ herm(Xstep)
        A = Xstep @ A @ herm(Xstep)
        Bc = Xstep @ Bc
        X = Xstep @ X

    n1, n2, n3, n4, n5, n6 = cf.dims
    m = cf.m
    cB2 = slice(m - n3, m)
    # 1
    if n3:
        B32 = Bc[sl[2], cB2]
        Xs = np.eye(n, dtype=complex)
        for i in (0, 1):
            Xs[sl[i], sl[2]] = -_solve_pd(B32, Bc[sl[i], cB2], "B32", tol)
        congruence(Xs)
    # 2
    if n4:
        E44 = E[sl[3], sl[3]]
        Xs = np.eye(n, dtype=complex)
        for i in (0, 1, 2):
            Xs[sl[i], sl[3]] = -_solve_pd(E44, E[sl[i], sl[3]], "E44", tol)
        congruence(Xs)
    # 3
    if n1 and n2:
        E11 = E[sl[0], sl[0]]
        Xs = np.eye(n, dtype=complex)
        Xs[sl[1], sl[0]] = -_solve_pd(E11, E[sl[1], sl[0]], "E11", tol)
        congruence(Xs)
    E = 0.5 * (E + herm(E))
    S = X.copy()
    T = herm(X).copy()
    # 4
    if n5:
        A55 = A[sl[4], sl[4]]
        Sr = np.eye(n, dtype=complex)
        Tc = np.eye(n, dtype=complex)
        for i in (0, 1, 2, 3, 5):
            Sr[sl[i], sl[4]] = -_solve_pd(A55, A[sl[i], sl[4]], "A55", tol)
            # T column op: col_j -= col_5 A55^{-1} A_5j
            Tc[sl[4], sl[i]] = -np.linalg.solve(A55, A[sl[4], sl[i]])
        A = Sr @ A @ Tc
        S = Sr @ S
        T = T @ Tc
    S_full = S @ herm(cf.U)
    T_full = cf.U @ T
    sf = ScaledForm(S_full, T_full, cf.V, cf.dims, E, A, Bc, dict(cf.scales))
    _check_scaled(sf, cf, tol)
    return sf


def _check_scaled(sf: ScaledForm, cf: CondensedForm, tol):
    n1, n2, n3, n4, n5, n6 = sf.dims
    sE, sA = cf.scales["E"], cf.scales["A"]
    for name, P in (("E11", sf.E(1, 1)), ("E44", sf.E(4, 4))):
        if P.shape[0] and not psd_project_check(P, tol).is_pd:
            raise ConditioningError(f"{name} lost definiteness during elimination")
    # make the eliminated blocks exact zeros, reporting how large they were
    sl = _slices(sf.dims)
    m = sf.m
    resid = 0.0
    zero_E = [(0, 1), (1, 0)] + [(i, 3) for i in (0, 1, 2)] + [(3, i) for i in (0, 1, 2)]
    for i, j in zero_E:
        resid = max(resid, float(np.abs(sf.E_s[sl[i], sl[j]]).max(initial=0.0)) / max(sE, 1e-300))
        sf.E_s[sl[i], sl[j]] = 0
    for i in (0, 1, 2, 3, 5):
        for blk in ((sl[i], sl[4]), (sl[4], sl[i])):
            resid = max(resid, float(np.abs(sf.A_s[blk]).max(initial=0.0)) / max(sA, 1e-300))
            sf.A_s[blk] = 0
    cB2 = slice(m - n3, m)
    for i in (0, 1):
        resid = max(resid, float(np.abs(sf.B_s[sl[i], cB2]).max(initial=0.0)) / max(cf.scales["B"], 1e-300))
        sf.B_s[sl[i], cB2] = 0
    sf.scales["elimination_residual"] = resid
