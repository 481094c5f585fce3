"""Random pHDAE systems with known condensed-form dimensions and labels.

Systems are assembled block by block in the scaled condensed coordinates,
where every structural property can be read off directly, and are then
hidden behind a random congruence of the state and a random unitary change
of the inputs.  All dimensions and the solvability labels are invariant
under both, so the pre-scramble values are the ground truth.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .linalg import herm, random_complex, random_unitary
from .model import SimplifiedPHDAE


class SpecError(ValueError):
    """The generator spec asks for something no system can have."""


E_MODES = ("index1", "cond3", "nocond3")


@dataclass(frozen=True)
class GeneratorSpec:
    """What to build.

    ``dims`` fixes ``(n1, ..., n6)``; ``m`` is then ``n2 + n3``.  When ``dims``
    is omitted they are drawn at random for the given ``n`` and ``m``,
    subject to the requested properties.  ``e_mode`` shapes the energy
    matrix: ``"index1"`` gives the block structure that makes index-one
    output feedback possible, ``"cond3"`` keeps ``rank E13 = n1`` but breaks
    that structure, and ``"nocond3"`` sets ``E13 = 0``.  ``uncontrollable_mode``
    plants an undamped decoupled oscillator that no input reaches;
    ``axis_mode`` plants an undamped oscillator on an input-driven coordinate,
    so the open loop is only marginally stable but can be stabilised.
    """

    dims: Optional[tuple] = None
    n: Optional[int] = None
    m: Optional[int] = None
    cond1: Optional[bool] = None
    e_mode: Optional[str] = None
    uncontrollable_mode: bool = False
    axis_mode: bool = False
    scramble: bool = True
    seed: int = 0

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        if d["dims"] is not None:
            d["dims"] = list(d["dims"])
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "GeneratorSpec":
        d = dict(d)
        if d.get("dims") is not None:
            d["dims"] = tuple(int(x) for x in d["dims"])
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise SpecError(f"unknown generator fields {sorted(unknown)}")
        return cls(**d)


@dataclass
class GroundTruth:
    dims: tuple
    labels: dict
    planted_modes: list = field(default_factory=list)
    spec: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "dims": list(self.dims),
            "labels": dict(self.labels),
            "planted_modes": [[z.real, z.imag] for z in self.planted_modes],
            "spec": dict(self.spec),
        }


def _check_dims(dims, spec: GeneratorSpec):
    if len(dims) != 6 or any(int(d) < 0 for d in dims):
        raise SpecError(f"dims must be six nonnegative counts, got {dims}")
    n1, n2, n3, n4, n5, n6 = dims
    if spec.n is not None and sum(dims) != spec.n:
        raise SpecError(f"dims sum to {sum(dims)} but n = {spec.n}")
    if spec.m is not None and spec.m != n2 + n3:
        raise SpecError(f"full column rank of B forces m = n2 + n3 = {n2 + n3}, got m = {spec.m}")
    if n6 < n1 + n2:
        raise SpecError("the coupling [J16; J26] needs n6 >= n1 + n2")
    if spec.cond1 is True and n6 != n1 + n2:
        raise SpecError("cond1 requires n6 = n1 + n2")
    if spec.cond1 is False and n6 == n1 + n2:
        raise SpecError("violating cond1 requires n6 > n1 + n2")
    mode = spec.e_mode
    if spec.axis_mode:
        if n3 == 0:
            raise SpecError("an input-driven oscillator is planted in group 3, which is empty")
        n3 -= 1
    if mode is not None and mode not in E_MODES:
        raise SpecError(f"e_mode must be one of {E_MODES}")
    if mode == "index1" and n1 > n3:
        raise SpecError("the index-one structure needs n3 >= n1")
    if mode == "cond3" and n1 > n3:
        raise SpecError("rank E13 = n1 needs n3 >= n1")
    if mode == "cond3" and n1 + n2 == 0:
        raise SpecError("with n1 = n2 = 0 the index-one structure cannot be broken")
    if mode == "nocond3" and n1 == 0:
        raise SpecError("E13 = 0 only violates rank E13 = n1 when n1 >= 1")
    if spec.uncontrollable_mode and n4 == 0:
        raise SpecError("an unreachable oscillator is planted in group 4, which is empty")


def random_dims(rng: np.random.Generator, spec: GeneratorSpec, n_max: int = 20, m_max: int = 6, tries: int = 2000):
    """Draw dims compatible with ``spec`` (rejection sampling)."""
    for _ in range(tries):
        m = spec.m if spec.m is not None else int(rng.integers(0, m_max + 1))
        n2 = int(rng.integers(0, m + 1))
        n3 = m - n2
        n1 = int(rng.integers(0, 3))
        n4 = int(rng.integers(0, 4))
        n5 = int(rng.integers(0, 4))
        if spec.cond1 is False:
            n6 = n1 + n2 + int(rng.integers(1, 3))
        else:
            n6 = n1 + n2
        if spec.uncontrollable_mode and n4 == 0:
            n4 = 1
        if spec.axis_mode and n3 == 0:
            continue
        dims = (n1, n2, n3, n4, n5, n6)
        if spec.n is not None:
            slack = spec.n - sum(dims)
            if slack < 0:
                continue
            # pad groups that do not disturb the requested properties
            extra = rng.multinomial(slack, [1 / 3] * 3)
            dims = (n1, n2, n3, n4 + int(extra[0]), n5 + int(extra[1] + extra[2]), n6)
        elif sum(dims) > n_max:
            continue
        if sum(dims) == 0:
            continue
        try:
            _check_dims(dims, GeneratorSpec(**{**spec.__dict__, "dims": dims, "m": None, "n": None}))
        except SpecError:
            continue
        return dims
    raise SpecError("could not find dims compatible with the spec")


def _well_conditioned(k, rng):
    """Random ``k x k`` matrix with singular values in [0.5, 2]."""
    if k == 0:
        return np.zeros((0, 0), dtype=complex)
    return random_unitary(k, rng) @ np.diag(rng.uniform(0.5, 2.0, k)) @ random_unitary(k, rng)


def _psd(k, rank, rng):
    if k == 0:
        return np.zeros((0, 0), dtype=complex)
    L = random_complex(k, rank, rng)
    return L @ herm(L)


def _pd(k, rng):
    W = _well_conditioned(k, rng)
    return W @ herm(W)


def _skew(k, rng):
    G = random_complex(k, k, rng)
    return 0.5 * (G - herm(G))


def _energy_blocks(dims, mode, rng):
    """Groups 1..3 of the energy matrix, in the scaled pattern (E12 = 0)."""
    n1, n2, n3 = dims[:3]
    k = n1 + n2 + n3
    E = np.zeros((k, k), dtype=complex)
    s1, s2, s3 = slice(0, n1), slice(n1, n1 + n2), slice(n1 + n2, k)
    if mode == "index1":
        rho = int(rng.integers(n1, n3 + 1)) if n3 else 0
        rho = max(rho, n1)
        E33 = _psd(n3, rho, rng)
        M = random_complex(n1, n3, rng)
        E[s3, s3] = E33
        E[s1, s3] = M @ E33
        E[s3, s1] = herm(E[s1, s3])
        E[s1, s1] = M @ E33 @ herm(M)
    elif mode == "cond3":
        # a definite compound on groups (1, 3) plus, if present, a definite E22
        C = _pd(n1 + n3, rng)
        idx = np.r_[0:n1, n1 + n2:k]
        E[np.ix_(idx, idx)] = C
        if n2:
            E[s2, s2] = _pd(n2, rng)
    elif mode == "nocond3":
        E[s1, s1] = _pd(n1, rng)
        rho = int(rng.integers(0, n2 + n3 + 1))
        E[n1:, n1:] = _psd(n2 + n3, rho, rng)
    else:
        raise SpecError(f"unknown e_mode {mode!r}")
    return 0.5 * (E + herm(E))


def _labels(Es, dims, cond1, planted_uncontrollable):
    """Solvability labels read from the pre-scramble scaled blocks."""
    n1, n2, n3 = dims[:3]
    s1, s2, s3 = slice(0, n1), slice(n1, n1 + n2), slice(n1 + n2, n1 + n2 + n3)
    E11, E13, E22, E23, E33 = Es[s1, s1], Es[s1, s3], Es[s2, s2], Es[s2, s3], Es[s3, s3]

    def rk(M):
        if M.size == 0:
            return 0
        s = np.linalg.svd(M, compute_uv=False)
        return int(np.sum(s > 1e-9 * max(s[0], 1.0)))

    def small(M):
        return M.size == 0 or np.linalg.norm(M) <= 1e-9 * max(1.0, np.linalg.norm(Es))

    cond3 = rk(E13) == n1
    E33p = np.linalg.pinv(E33, rcond=1e-9) if E33.size else E33
    cond7 = small(E22) and small(E23) and small(E11 - E13 @ E33p @ herm(E13))
    con1 = cond1 and cond7
    conS1 = cond1 and not planted_uncontrollable
    cond11 = dims[5] == 0
    return {
        "cond1": bool(cond1),
        "cond3": bool(cond3),
        "cond7": bool(cond7),
        "con1": bool(con1),
        "conS1": bool(conS1),
        "cond11": bool(cond11),
        "p1": bool(cond1),
        "p2": bool(con1),
        "p3": bool(con1 and conS1),
        "B1": bool(cond1),
        "B3": bool(cond1 and cond3),
        "B5": bool(cond1 and cond3 and conS1),
    }


def generate(spec: GeneratorSpec):
    """Return ``(system, GroundTruth)`` for ``spec``."""
    rng = np.random.default_rng(spec.seed)
    dims = tuple(int(d) for d in spec.dims) if spec.dims is not None else random_dims(rng, spec)
    _check_dims(dims, spec)
    n1, n2, n3, n4, n5, n6 = dims
    n = sum(dims)
    m = n2 + n3
    mode = spec.e_mode
    n3e = n3 - 1 if spec.axis_mode else n3
    if mode is None:
        mode = "index1" if n1 <= n3e else "nocond3"
    sl = []
    start = 0
    for d in dims:
        sl.append(slice(start, start + d))
        start += d
    k3 = n1 + n2 + n3

    E = np.zeros((n, n), dtype=complex)
    if spec.axis_mode:
        # the last coordinate of group 3 is a decoupled undamped oscillator
        E[:k3 - 1, :k3 - 1] = _energy_blocks((n1, n2, n3e), mode, rng)
        E[k3 - 1, k3 - 1] = rng.uniform(0.5, 2.0)
    else:
        E[:k3, :k3] = _energy_blocks(dims, mode, rng)
    E44 = _pd(n4, rng)
    planted = []
    if spec.uncontrollable_mode:
        E44[-1, :] = 0
        E44[:, -1] = 0
        E44[-1, -1] = rng.uniform(0.5, 2.0)
    E[sl[3], sl[3]] = E44

    J = np.zeros((n, n), dtype=complex)
    k4 = k3 + n4
    J[:k4, :k4] = _skew(k4, rng)
    J[sl[4], sl[4]] = _skew(n5, rng)
    C = random_complex(n1 + n2, n6, rng)
    J[: n1 + n2, sl[5]] = C
    J[sl[5], : n1 + n2] = -herm(C)

    R = np.zeros((n, n), dtype=complex)
    R[:k4, :k4] = _psd(k4, k4, rng) * 0.5
    R[sl[4], sl[4]] = _pd(n5, rng)

    if spec.uncontrollable_mode:
        c = sl[3].stop - 1
        for M in (J, R):
            M[c, :] = 0
            M[:, c] = 0
        beta = rng.uniform(0.5, 2.0)
        J[c, c] = 1j * beta
        planted.append(1j * beta / E[c, c].real)
    if spec.axis_mode:
        c = k3 - 1
        for M in (J, R):
            M[c, :] = 0
            M[:, c] = 0
        J[c, c] = 1j * rng.uniform(0.5, 2.0)

    B = np.zeros((n, m), dtype=complex)
    B[sl[1], :n2] = _well_conditioned(n2, rng)
    B[sl[2], n2:] = _well_conditioned(n3, rng)

    labels = _labels(E[:k3, :k3], dims, n6 == n1 + n2, bool(planted))
    truth = GroundTruth(dims, labels, planted, spec.to_dict())
    sys = SimplifiedPHDAE(E, J, R, B)
    if spec.scramble:
        sys = scramble(sys, dims, rng)
    return sys, truth


def scramble(sys: SimplifiedPHDAE, dims, rng):
    """Undo-the-elimination congruence, a unitary state rotation and a unitary input change.

    The first factor re-introduces the couplings that block elimination
    removes (B12, B22, E12, E_i4, the group-5 couplings) so the condensed
    form has real work to do.
    """
    n, m = sys.n, sys.m
    X = np.eye(n, dtype=complex)
    sl = []
    start = 0
    for d in dims:
        sl.append(slice(start, start + d))
        start += d
    # x = X z; coupling rows of later groups into earlier ones
    for i, j in ((2, 0), (2, 1), (3, 0), (3, 1), (3, 2), (0, 1), (4, 0), (4, 1), (4, 2), (4, 3)):
        X[sl[i], sl[j]] = 0.3 * random_complex(dims[i], dims[j], rng)
    U = random_unitary(n, rng)
    W = random_unitary(m, rng)
    return sys.transformed(X @ U, W)
