"""Solvability tests and constructive output feedback.

Every construction works in the scaled condensed coordinates, where
``S B = T^H B`` and the input map is ``B_s = [0 0; B21 0; 0 B32; 0 ...]``.
A feedback ``F`` or ``K`` given in the rotated inputs ``V^H u`` therefore
acts on the closed loop only through ``diag(B21, B32)``, which is square and
nonsingular.  Feedback matrices are returned in the original input
coordinates and every returned solution carries an independent certificate
from :mod:`phfeedback.verify`.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .condense import (
    CondensedForm,
    ScaledForm,
    condensed_form,
    scaled_condensed_form,
    structural_indices,
)
from .linalg import (
    DEFAULT_TOL,
    TolerancePolicy,
    herm,
    left_nullspace,
    norm2,
    psd_project_check,
    rank_blocks,
    rank_of,
    right_nullspace,
    svdvals,
)
from .model import (
    FeedbackSolution,
    SimplifiedPHDAE,
    closed_loop,
    closed_loop_matrices,
    closed_loop_scales,
    require_full_rank,
)
from .verify import PencilReport, is_asymptotically_stable, uncontrollable_imaginary_modes

GAMMA_GRID = tuple(2.0 ** e for k in range(10) for e in ((k, -k - 1) if k else (0, -1)))[:20]
_FALLBACK_SEED = 7


class InfeasibleError(ValueError):
    """The requested closed-loop properties cannot be achieved."""

    def __init__(self, message, failed=()):
        self.failed = list(failed)
        super().__init__(message)


class RangeError(ValueError):
    """Requested rank outside the achievable range."""

    def __init__(self, r, lo, hi):
        self.r, self.lo, self.hi = r, lo, hi
        super().__init__(f"rank {r} outside the achievable range [{lo}, {hi}]")


class CertificationError(RuntimeError):
    """A constructed feedback failed independent verification."""

    def __init__(self, message, report=None):
        self.report = report
        super().__init__(message)


@dataclass
class Condition:
    name: str
    holds: bool
    margin: dict = field(default_factory=dict)


@dataclass
class SolvabilityVerdict:
    problem: str
    solvable: bool
    conditions: list
    witness: list = field(default_factory=list)
    verdict: Optional[str] = None
    details: dict = field(default_factory=dict)

    def condition(self, name) -> Condition:
        for c in self.conditions:
            if c.name == name:
                return c
        raise KeyError(name)

    def failed(self) -> list[str]:
        return [c.name for c in self.conditions if not c.holds]


@dataclass(frozen=True)
class RankRange:
    lo: int
    hi: int

    @property
    def empty(self) -> bool:
        return self.lo > self.hi

    def __contains__(self, r) -> bool:
        return self.lo <= r <= self.hi

    def values(self):
        return range(self.lo, self.hi + 1)


# ---------------------------------------------------------------- conditions

def _rank_condition(name, blocks, n, tol, scales=None):
    ri = rank_blocks(blocks, tol, scales)
    margin = {"rank": ri.rank, "n": n, "decisive_sigma": ri.sigma if ri.rank == n else ri.next_sigma,
              "cutoff": ri.cutoff}
    return Condition(name, ri.rank == n, margin)


def cond1(sys, tol=DEFAULT_TOL) -> Condition:
    """``rank [E, J - R, B] = n``."""
    return _rank_condition("cond1", [sys.E, sys.A, sys.B], sys.n, tol)


def con1(sys, tol=DEFAULT_TOL) -> Condition:
    """``rank [E, (J - R) S(E), B] = n`` with ``S(E)`` a kernel basis of ``E``."""
    S = right_nullspace(sys.E, tol)
    return _rank_condition("con1", [sys.E, sys.A @ S, sys.B], sys.n, tol, [None, norm2(sys.A), None])


def cond11(sys, tol=DEFAULT_TOL) -> Condition:
    """``rank [E, (J - R) S([E; B^H]), B] = n``."""
    S = right_nullspace(np.vstack([sys.E, herm(sys.B)]), tol)
    return _rank_condition("cond11", [sys.E, sys.A @ S, sys.B], sys.n, tol, [None, norm2(sys.A), None])


def cond3(sys, tol=DEFAULT_TOL) -> Condition:
    si = structural_indices(sys, tol)
    return Condition("cond3", si.cond3_holds, {"rank_E13": si.rank_E13, "n1_plus_n4": si.n1_plus_n4})


def conS1(sys, tol=DEFAULT_TOL):
    """No purely imaginary ``s`` with ``rank [J - R - sE, B] < n``; returns ``(Condition, witness)``."""
    info = {}
    modes = uncontrollable_imaginary_modes(sys.E, sys.A, sys.B, tol, report=info)
    return Condition("conS1", not modes, {"path": info.get("path"), "count": len(modes)}), modes


def rank_range_B2(sys, tol=DEFAULT_TOL) -> RankRange:
    """``rank [E B] - rank B <= r <= rank [E B]``."""
    si = structural_indices(sys, tol)
    r_EB = rank_blocks([sys.E, sys.B], tol).rank
    return RankRange(si.n1_plus_n4, r_EB)


def rank_range_B4(sys, tol=DEFAULT_TOL) -> RankRange:
    """``rank [E B] - rank B <= r <= n3 + n4`` (coordinate-free form)."""
    si = structural_indices(sys, tol)
    return RankRange(si.n1_plus_n4, si.n3_plus_n4)


def _verdict(problem, conds, witness=()):
    return SolvabilityVerdict(problem, all(c.holds for c in conds), list(conds), list(witness))


def solvable_p1(sys, tol=DEFAULT_TOL) -> SolvabilityVerdict:
    require_full_rank(sys, tol)
    return _verdict("1", [cond1(sys, tol)])


def solvable_p2(sys, tol=DEFAULT_TOL) -> SolvabilityVerdict:
    require_full_rank(sys, tol)
    return _verdict("2", [con1(sys, tol)])


def solvable_p3(sys, tol=DEFAULT_TOL) -> SolvabilityVerdict:
    require_full_rank(sys, tol)
    c, modes = conS1(sys, tol)
    return _verdict("3", [con1(sys, tol), c], modes)


def solvable_B1(sys, tol=DEFAULT_TOL) -> SolvabilityVerdict:
    require_full_rank(sys, tol)
    return _verdict("B1", [cond1(sys, tol)])


def solvable_B3(sys, tol=DEFAULT_TOL) -> SolvabilityVerdict:
    require_full_rank(sys, tol)
    return _verdict("B3", [cond1(sys, tol), cond3(sys, tol)])


def solvable_B5(sys, tol=DEFAULT_TOL) -> SolvabilityVerdict:
    require_full_rank(sys, tol)
    c, modes = conS1(sys, tol)
    return _verdict("B5", [cond1(sys, tol), cond3(sys, tol), c], modes)


def max_rank_K_index1(sys, tol=DEFAULT_TOL) -> SolvabilityVerdict:
    """Can ``K`` reach ``rank(E + B K B^H) = rank [E B]`` with a regular index-one loop?"""
    require_full_rank(sys, tol)
    return _verdict("B-max-rank", [cond11(sys, tol)])


# ---------------------------------------------------------------- design data

@dataclass
class _Design:
    sys: SimplifiedPHDAE
    cf: CondensedForm
    sf: ScaledForm
    tol: TolerancePolicy

    @property
    def dims(self):
        return self.cf.dims

    @property
    def V(self):
        return self.cf.V

    def gamma_scale(self) -> float:
        sB = norm2(self.sys.B)
        if sB == 0:
            return 1.0
        ref = norm2(self.sys.A) or norm2(self.sys.E) or 1.0
        return ref / sB ** 2

    def k_scale(self) -> float:
        sB = norm2(self.sys.B)
        if sB == 0:
            return 1.0
        ref = norm2(self.sys.E) or norm2(self.sys.A) or 1.0
        return ref / sB ** 2

    def embed_trailing(self, G):
        """``V diag(0, G) V^H`` for an ``n3 x n3`` block ``G``."""
        m, n3 = self.sys.m, self.dims[2]
        M = np.zeros((m, m), dtype=complex)
        M[m - n3:, m - n3:] = G
        return self.V @ M @ herm(self.V)

    def Bhat(self):
        n1, n2, n3 = self.dims[:3]
        m = self.sys.m
        Bh = np.zeros((n2 + n3, m), dtype=complex)
        Bh[:n2, : m - n3] = self.sf.B(2, 1)
        Bh[n2:, m - n3:] = self.sf.B(3, 2)
        return Bh

    def E23(self):
        n1, n2, n3 = self.dims[:3]
        return self.sf.E_s[n1:n1 + n2 + n3, n1:n1 + n2 + n3]

    def K_for_target(self, Y):
        """``K`` with ``(E + B K B^H)`` equal to ``Y`` on groups 2 and 3 (scaled coordinates)."""
        Bh = self.Bhat()
        if Bh.size == 0:
            return np.zeros((self.sys.m, self.sys.m), dtype=complex)
        Kv = np.linalg.solve(Bh, np.linalg.solve(Bh, (Y - self.E23()).T.conj()).T.conj())
        Kv = 0.5 * (Kv + herm(Kv))
        return self.V @ Kv @ herm(self.V)


def _design(sys, tol) -> _Design:
    require_full_rank(sys, tol)
    cf = condensed_form(sys, tol)
    sf = scaled_condensed_form(cf, tol)
    return _Design(sys, cf, sf, tol)


def _nonsingular(M, tol) -> tuple[bool, float]:
    if M.size == 0:
        return True, float("inf")
    s = svdvals(M)
    return bool(s[-1] > tol.rank_rel * max(M.shape) * max(s[0], 1e-300)), float(s[-1])


def structure_check(sys, fb: FeedbackSolution, tol=DEFAULT_TOL) -> dict:
    """Port-Hamiltonian structure of the closed loop (skew ``F_S``, PSD damping and energy)."""
    E_cl, _, R_cl = closed_loop_matrices(sys, fb)
    b2 = norm2(sys.B) ** 2
    fs = norm2(fb.F_S + herm(fb.F_S))
    fs_ok = fs <= tol.equality_tol * max(norm2(fb.F_S), 1e-300) or fs == 0.0
    r = psd_project_check(R_cl, tol, scale=norm2(sys.R) + b2 * norm2(fb.F_H))
    out = {
        "F_S_skew": bool(fs_ok), "F_S_skew_residual": fs,
        "R_closed_psd": bool(r.is_psd), "R_closed_min_eig": r.min_eig,
        "F_H_hermitian": bool(psd_project_check(fb.F_H, tol).is_hermitian),
    }
    ok = fs_ok and r.is_psd and out["F_H_hermitian"]
    if fb.K is not None:
        e = psd_project_check(E_cl, tol, scale=norm2(sys.E) + b2 * norm2(fb.K))
        out["E_closed_psd"] = bool(e.is_psd)
        out["E_closed_min_eig"] = e.min_eig
        out["K_hermitian"] = bool(psd_project_check(fb.K, tol).is_hermitian)
        ok = ok and e.is_psd and out["K_hermitian"]
    out["ok"] = bool(ok)
    return out


CLAIMS = {
    "1": ("regular",), "2": ("regular", "index<=1"), "3": ("regular", "index<=1", "stable"),
    "B1": ("regular",), "B2": ("regular",), "B3": ("regular", "index<=1"),
    "B4": ("regular", "index<=1"), "B5": ("regular", "index<=1", "stable"),
}


def certify(sys, fb: FeedbackSolution, claims, tol=DEFAULT_TOL):
    """Return ``(ok, PencilReport, structure)`` for the closed loop of ``fb``."""
    report = is_asymptotically_stable(closed_loop(sys, fb), tol)
    struct = structure_check(sys, fb, tol)
    ok = report.satisfies(claims) and struct["ok"]
    if fb.rank_target is not None and fb.K is not None:
        E_cl, _, _ = closed_loop_matrices(sys, fb)
        achieved = rank_of(E_cl, tol, scale=closed_loop_scales(sys, fb)[0])
        struct["rank_achieved"] = achieved
        ok = ok and achieved == fb.rank_target
    return bool(ok), report, struct


def _search(d: _Design, problem, build: Callable, size: int, scale: float, target=None, rank_target=None):
    """Try ``G = gamma * scale * I`` over the grid, then a perturbed fallback.

    ``build(G)`` returns ``(F_H, K, details)``; ``target(G)`` (optional)
    returns the matrix the construction needs to be nonsingular.  The first
    candidate whose target is nonsingular and whose closed loop passes
    certification is returned.
    """
    tol = d.tol
    m = d.sys.m
    claims = CLAIMS[problem]
    last = None
    rng = np.random.default_rng(_FALLBACK_SEED)
    candidates = [g * scale * np.eye(size) for g in GAMMA_GRID]
    if size == 0:
        candidates = candidates[:1]
    for _ in range(3 if size else 0):
        H = rng.standard_normal((size, size)) + 1j * rng.standard_normal((size, size))
        H = H @ herm(H) / max(size, 1)
        candidates.append(scale * (np.eye(size) + 0.1 * H))
    for G in candidates:
        if target is not None:
            ok, _ = _nonsingular(target(G), tol)
            if not ok:
                continue
        F_H, K, details = build(G)
        fb = FeedbackSolution(np.zeros((m, m), dtype=complex), F_H, K, problem, rank_target)
        ok, report, struct = certify(d.sys, fb, claims, tol)
        last = (report, struct)
        if ok:
            details = dict(details)
            details["structure"] = struct
            details["gamma"] = float(np.real(G[0, 0])) / scale if size else None
            return FeedbackSolution(fb.F_S, fb.F_H, fb.K, problem, rank_target, report, details)
    raise CertificationError(
        f"problem {problem}: no candidate feedback passed certification "
        f"(last structure check {last[1] if last else None})",
        last[0] if last else None,
    )


def _require(verdict: SolvabilityVerdict):
    if not verdict.solvable:
        raise InfeasibleError(
            f"problem {verdict.problem} infeasible: condition(s) {', '.join(verdict.failed())} fail",
            verdict.failed(),
        )


# ---------------------------------------------------------------- proportional feedback

def synthesize_p1(sys, tol=DEFAULT_TOL) -> FeedbackSolution:
    """Regularise with ``F_S = 0``, ``F_H = V diag(0, F22) V^H``."""
    _require(solvable_p1(sys, tol))
    d = _design(sys, tol)
    n3 = d.dims[2]
    A33, B32 = d.sf.A(3, 3), d.sf.B(3, 2)
    return _search(d, "1", lambda G: (d.embed_trailing(G), None, {}), n3, d.gamma_scale(),
                   target=lambda G: A33 - B32 @ G @ herm(B32))


def synthesize_p2(sys, tol=DEFAULT_TOL) -> FeedbackSolution:
    """Regular and index at most one with ``F_H = V diag(0, F22) V^H``."""
    _require(solvable_p2(sys, tol))
    d = _design(sys, tol)
    n3 = d.dims[2]
    E33, A33, B32 = d.sf.E(3, 3), d.sf.A(3, 3), d.sf.B(3, 2)
    sE = max(norm2(d.sys.E), 1e-300)
    T = left_nullspace(E33, tol, scale=sE)
    S = right_nullspace(E33, tol, scale=sE)
    return _search(d, "2", lambda G: (d.embed_trailing(G), None, {}), n3, d.gamma_scale(),
                   target=lambda G: herm(T) @ (A33 - B32 @ G @ herm(B32)) @ S)


def _damping_compound(sys, F_H, tol):
    """The damping block of the stabilisation argument, in coordinates splitting ``range(B)``.

    With ``U = [U_0, U_B, U_2]`` where ``U_B`` spans ``range(B)`` and ``U_0``
    spans the part of ``range(R)`` outside it, the compound
    ``[R11 R12; R12^H R22 + B2 F_H B2^H]`` must be positive definite.
    """
    n = sys.n
    R_cl = sys.R + sys.B @ F_H @ herm(sys.B)
    UB = np.linalg.svd(sys.B, full_matrices=True)[0][:, : rank_of(sys.B, tol)] if sys.m else np.zeros((n, 0))
    rng_RB = rank_blocks([sys.R, sys.B], tol).rank
    P = np.eye(n) - UB @ herm(UB)
    U0 = np.linalg.svd(P @ sys.R, full_matrices=True)[0][:, : rng_RB - UB.shape[1]]
    U = np.hstack([U0, UB])
    return herm(U) @ R_cl @ U


def _check_output_blocks(sys, F_H, tol):
    """Inputs must not reach directions that are both energy-free and undamped."""
    E, R_cl = sys.E, sys.R + sys.B @ F_H @ herm(sys.B)
    K = right_nullspace(np.vstack([E, R_cl]), tol)
    B3 = herm(K) @ sys.B
    res = norm2(B3)
    return res <= tol.equality_tol * max(norm2(sys.B), 1e-300) or res == 0.0, res


def synthesize_p3(sys, tol=DEFAULT_TOL) -> FeedbackSolution:
    """Regular, index at most one and asymptotically stable with ``F_H = gamma I``."""
    _require(solvable_p3(sys, tol))
    d = _design(sys, tol)
    m = sys.m

    def build(G):
        F_H = G
        ok, res = _check_output_blocks(sys, F_H, tol)
        if not ok:
            raise CertificationError(f"input map reaches energy-free undamped directions (residual {res:.3e})")
        comp = psd_project_check(_damping_compound(sys, F_H, tol), tol)
        return F_H, None, {"damping_compound_pd": bool(comp.is_pd), "damping_compound_min_eig": comp.min_eig,
                           "undamped_input_residual": res}

    def target(G):
        return _damping_compound(sys, G, tol)

    return _search(d, "3", build, m, d.gamma_scale(), target=target)


# ---------------------------------------------------------------- derivative feedback

def synthesize_K_regularize(sys, tol=DEFAULT_TOL) -> FeedbackSolution:
    """Regularise by derivative feedback ``K = V diag(0, K22) V^H``."""
    _require(solvable_B1(sys, tol))
    d = _design(sys, tol)
    n3 = d.dims[2]
    E33, B32 = d.sf.E(3, 3), d.sf.B(3, 2)
    m = sys.m

    def build(G):
        return np.zeros((m, m), dtype=complex), d.embed_trailing(G), {}

    def target(G):
        # nonsingular iff positive definite here, since E33 >= 0 and G > 0
        return E33 + B32 @ G @ herm(B32)

    return _search(d, "B1", build, n3, d.k_scale(), target=target)


def _schur_target(d: _Design, P):
    """Groups 2-3 energy block ``X^H E11^{-1} X + P`` with ``X = [0, E13]``."""
    n1, n2, n3 = d.dims[:3]
    if n1 == 0:
        return P
    E11, E13 = d.sf.E(1, 1), d.sf.E(1, 3)
    X = np.hstack([np.zeros((n1, n2), dtype=complex), E13])
    Y = herm(X) @ np.linalg.solve(E11, X) + P
    return 0.5 * (Y + herm(Y))


def synthesize_KF_rank(sys, r: int, tol=DEFAULT_TOL) -> FeedbackSolution:
    """Regular closed loop with ``rank(E + B K B^H) = r`` and ``F_H = V diag(0, F22) V^H``."""
    _require(solvable_B1(sys, tol))
    rr = rank_range_B2(sys, tol)
    if r not in rr:
        raise RangeError(r, rr.lo, rr.hi)
    d = _design(sys, tol)
    n1, n2, n3, n4 = d.dims[:4]
    q = r - n1 - n4
    c = max(norm2(sys.E), 1.0)
    P = np.zeros((n2 + n3, n2 + n3), dtype=complex)
    P[np.arange(q), np.arange(q)] = c
    Y = _schur_target(d, P)
    K = d.K_for_target(Y)
    A33, B32 = d.sf.A(3, 3), d.sf.B(3, 2)
    E33n = Y[n2:, n2:]
    sE = max(norm2(sys.E), 1e-300)
    T = left_nullspace(E33n, tol, scale=sE)
    S = right_nullspace(E33n, tol, scale=sE)
    return _search(d, "B2", lambda G: (d.embed_trailing(G), K, {"rank_range": [rr.lo, rr.hi]}), n3,
                   d.gamma_scale(), target=lambda G: herm(T) @ (A33 - B32 @ G @ herm(B32)) @ S,
                   rank_target=r)


def _index1_energy(d: _Design, r: int, c: float):
    """Energy block on group 3 for the index-one constructions.

    With ``E13 = Ut [Sigma 0] Wt^H`` this is
    ``Z = Wt diag(Sigma Ut^H E11^{-1} Ut Sigma, c I_{r-n1-n4}, 0) Wt^H``, so that
    ``E13 Z^+ E13^H = E11`` and ``rank Z = r - n4``.  Returns ``(Z, W0)`` with
    ``W0`` spanning ``ker Z``.
    """
    n1, n2, n3, n4 = d.dims[:4]
    E11, E13 = d.sf.E(1, 1), d.sf.E(1, 3)
    if n3 == 0:
        return np.zeros((0, 0), dtype=complex), np.zeros((0, 0), dtype=complex)
    if n1:
        Ut, sig, Wh = np.linalg.svd(E13, full_matrices=True)
        Wt = herm(Wh)
        Sg = np.diag(sig[:n1])
        top = Sg @ herm(Ut) @ np.linalg.solve(E11, Ut) @ Sg
    else:
        Wt = np.eye(n3, dtype=complex)
        top = np.zeros((0, 0), dtype=complex)
    q = r - n1 - n4
    D = np.zeros((n3, n3), dtype=complex)
    D[:n1, :n1] = top
    D[n1:n1 + q, n1:n1 + q] = c * np.eye(q)
    Z = Wt @ D @ herm(Wt)
    return 0.5 * (Z + herm(Z)), Wt[:, n1 + q:]


def _index1_feedback(d: _Design, r: int):
    n2 = d.dims[1]
    c = max(norm2(d.sys.E), 1.0)
    Z, W0 = _index1_energy(d, r, c)
    n3 = Z.shape[0]
    Y = np.zeros((n2 + n3, n2 + n3), dtype=complex)
    Y[n2:, n2:] = Z
    return d.K_for_target(Y), Z, W0


def _require_index1(sys, tol):
    v = solvable_B3(sys, tol)
    _require(v)
    return v


def synthesize_K_index1(sys, tol=DEFAULT_TOL) -> FeedbackSolution:
    """Derivative feedback alone: regular, index at most one, ``E + B K B^H >= 0``."""
    _require_index1(sys, tol)
    d = _design(sys, tol)
    n1, n2, n3, n4 = d.dims[:4]
    r = n3 + n4
    K, Z, _ = _index1_feedback(d, r)
    m = sys.m
    checks = {
        "E33_closed_pd": bool(psd_project_check(Z, tol).is_pd),
        "schur_rank": rank_of(np.block([[d.sf.E(1, 1), d.sf.E(1, 3)], [herm(d.sf.E(1, 3)), Z]]), tol),
    }
    return _search(d, "B3", lambda G: (np.zeros((m, m), dtype=complex), K, checks), 0, 1.0)


def synthesize_KF_index1_rank(sys, r: int, tol=DEFAULT_TOL) -> FeedbackSolution:
    """Regular, index at most one, ``rank(E + B K B^H) = r`` for ``r`` in the index-one range."""
    _require_index1(sys, tol)
    rr = rank_range_B4(sys, tol)
    if r not in rr:
        raise RangeError(r, rr.lo, rr.hi)
    d = _design(sys, tol)
    K, Z, W0 = _index1_feedback(d, r)
    A33, B32 = d.sf.A(3, 3), d.sf.B(3, 2)
    n3 = d.dims[2]
    return _search(d, "B4", lambda G: (d.embed_trailing(G), K, {"rank_range": [rr.lo, rr.hi]}), n3,
                   d.gamma_scale(), target=lambda G: herm(W0) @ (A33 - B32 @ G @ herm(B32)) @ W0,
                   rank_target=r)


def synthesize_KF_stabilize(sys, r_opt: Optional[int] = None, tol=DEFAULT_TOL) -> FeedbackSolution:
    """Index-one rank-targeted feedback plus extra damping ``gamma' I`` on all inputs."""
    v = solvable_B5(sys, tol)
    _require(v)
    rr = rank_range_B4(sys, tol)
    r = rr.hi if r_opt is None else r_opt
    if r not in rr:
        raise RangeError(r, rr.lo, rr.hi)
    d = _design(sys, tol)
    K, Z, W0 = _index1_feedback(d, r)
    m, n3 = sys.m, d.dims[2]
    g = d.gamma_scale()

    def build(G):
        F_first = d.embed_trailing(G[m:, m:]) if n3 else np.zeros((m, m), dtype=complex)
        F_extra = G[:m, :m]
        F_H = F_first + F_extra
        ok, res = _check_output_blocks(sys, F_H, tol)
        if not ok:
            raise CertificationError(f"input map reaches energy-free undamped directions (residual {res:.3e})")
        return F_H, K, {"rank_range": [rr.lo, rr.hi], "first_stage_F_H": F_first, "extra_F_H": F_extra}

    return _search(d, "B5", build, m + n3, g, rank_target=r)


def derivative_only_stabilizable(sys, tol=DEFAULT_TOL, samples: int = 20, seed: int = 0) -> SolvabilityVerdict:
    """Can derivative feedback ``u = K y'`` alone make the loop asymptotically stable?

    Verdict ``"provably-no"`` when regularisation is impossible, when an
    imaginary mode is uncontrollable (derivative feedback cannot move it),
    when the system is lossless but must keep finite eigenvalues (they stay
    on the imaginary axis), or when ``K`` cannot change the loop and the
    open loop is unstable.  Otherwise a sampled search over admissible ``K``
    gives ``"sampled-yes"`` (with a certified witness) or ``"inconclusive"``.
    """
    require_full_rank(sys, tol)
    c1 = cond1(sys, tol)
    cs, modes = conS1(sys, tol)
    conds = [c1, cs]
    si = structural_indices(sys, tol)
    lossless = norm2(sys.R) <= tol.equality_tol * max(norm2(sys.A), 1e-300) or norm2(sys.R) == 0.0
    conds.append(Condition("lossless_with_dynamics", lossless and si.n1_plus_n4 > 0, {"n1_plus_n4": si.n1_plus_n4}))

    def out(verdict, witness=(), **details):
        v = SolvabilityVerdict("derivative-only", verdict == "sampled-yes", conds, list(witness), verdict, details)
        return v

    if not c1.holds:
        return out("provably-no", reason="cond1 fails, no feedback regularises")
    if not cs.holds:
        return out("provably-no", modes, reason="uncontrollable imaginary modes persist under any K")
    if lossless and si.n1_plus_n4 > 0:
        return out("provably-no", reason="lossless loop keeps rank(E + B K B^H) >= 1 finite eigenvalues on the axis")
    d = _design(sys, tol)
    m = sys.m
    zero = np.zeros((m, m), dtype=complex)
    n1, n2, n3 = d.dims[:3]

    def try_K(K, label):
        fb = FeedbackSolution(zero, zero, K, "derivative-only")
        ok, report, struct = certify(sys, fb, ("regular", "index<=1", "stable"), tol)
        return (ok, report, label, K)

    if n3 == 0:
        res = try_K(zero, "K = 0")
        if res[0]:
            return out("sampled-yes", [res[3]], witness_label=res[2], certificate=res[1])
        return out("provably-no", reason="n3 = 0, so the closed loop does not depend on K and is not stable")
    trials = [try_K(zero, "K = 0")]
    if si.cond3_holds:
        trials.append(try_K(_index1_feedback(d, si.n3_plus_n4)[0], "index-one K"))
    rng = np.random.default_rng(seed)
    for i in range(samples):
        k = int(rng.integers(0, n2 + n3 + 1))
        L = rng.standard_normal((n2 + n3, k)) + 1j * rng.standard_normal((n2 + n3, k))
        P = L @ herm(L) * max(norm2(sys.E), 1.0) / max(k, 1)
        trials.append(try_K(d.K_for_target(_schur_target(d, P)), f"sample {i}"))
    for ok, report, label, K in trials:
        if ok:
            return out("sampled-yes", [K], witness_label=label, certificate=report)
    return out("inconclusive", tried=len(trials))


# ---------------------------------------------------------------- dispatch

PROBLEMS = ("1", "2", "3", "B1", "B2", "B3", "B4", "B5")


def solvability(sys, problem: str, tol=DEFAULT_TOL) -> SolvabilityVerdict:
    table = {"1": solvable_p1, "2": solvable_p2, "3": solvable_p3, "B1": solvable_B1, "B2": solvable_B1,
             "B3": solvable_B3, "B4": solvable_B3, "B5": solvable_B5}
    if problem not in table:
        raise ValueError(f"unknown problem {problem!r}; expected one of {PROBLEMS}")
    v = table[problem](sys, tol)
    v.problem = problem
    return v


def synthesize(sys, problem: str, rank: Optional[int] = None, tol=DEFAULT_TOL) -> FeedbackSolution:
    if problem == "1":
        return synthesize_p1(sys, tol)
    if problem == "2":
        return synthesize_p2(sys, tol)
    if problem == "3":
        return synthesize_p3(sys, tol)
    if problem == "B1":
        return synthesize_K_regularize(sys, tol)
    if problem == "B2":
        if rank is None:
            rank = rank_range_B2(sys, tol).hi
        return synthesize_KF_rank(sys, rank, tol)
    if problem == "B3":
        return synthesize_K_index1(sys, tol)
    if problem == "B4":
        if rank is None:
            rank = rank_range_B4(sys, tol).hi
        return synthesize_KF_index1_rank(sys, rank, tol)
    if problem == "B5":
        return synthesize_KF_stabilize(sys, rank, tol)
    raise ValueError(f"unknown problem {problem!r}; expected one of {PROBLEMS}")
