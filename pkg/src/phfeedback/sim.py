"""Time integration of simplified pHDAEs and energy bookkeeping.

The integrator is the implicit midpoint rule applied to ``E x' = A x + B u``::

    (E/h - A/2) x[k+1] = (E/h + A/2) x[k] + B u(t[k] + h/2)

It reproduces the discrete energy balance exactly at the step midpoints,
so the power-balance residual is measured with the trapezoidal rule on the
step end points instead (second order, see :func:`power_balance_residual`).
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg as sla

from .linalg import DEFAULT_TOL, TolerancePolicy, herm, left_nullspace, norm2, right_nullspace
from .model import FeedbackSolution, Pencil, SimplifiedPHDAE, closed_loop, closed_loop_system
from .verify import index_of, is_asymptotically_stable, is_regular


class SimulationError(ValueError):
    """The pencil cannot be integrated (singular, index > 1, bad step)."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


INPUT_KINDS = ("zero", "step", "sinusoid", "table")


@dataclass(frozen=True)
class InputSignal:
    """Input ``u(t)`` as a zero, step, sinusoid or sampled (linearly interpolated) signal.

    ``amplitude`` is a scalar (all channels) or one value per channel.  A step
    switches on at ``t0``; a sinusoid is ``amplitude * sin(2 pi freq t + phase)``.
    A table holds sample ``times`` (increasing) and ``values`` (len(times) x m);
    it is held constant outside its time range.
    """

    kind: str = "zero"
    amplitude: object = 1.0
    t0: float = 0.0
    freq: float = 1.0
    phase: float = 0.0
    times: Optional[np.ndarray] = None
    values: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.kind not in INPUT_KINDS:
            raise ValueError(f"input kind must be one of {INPUT_KINDS}, got {self.kind!r}")
        if self.kind == "table":
            if self.times is None or self.values is None:
                raise ValueError("a table input needs times and values")
            t = np.asarray(self.times, dtype=float)
            v = np.asarray(self.values, dtype=complex)
            if v.ndim == 1:
                v = v.reshape(-1, 1)
            if t.ndim != 1 or v.shape[0] != t.size or t.size == 0:
                raise ValueError("table times and values do not match")
            if np.any(np.diff(t) <= 0):
                raise ValueError("table times must be strictly increasing")
            object.__setattr__(self, "times", t)
            object.__setattr__(self, "values", v)

    def _amp(self, m):
        a = np.atleast_1d(np.asarray(self.amplitude, dtype=complex))
        if a.size == 1:
            return np.full(m, a[0])
        if a.size != m:
            raise ValueError(f"input amplitude has {a.size} entries, system has m = {m}")
        return a

    def __call__(self, t: float, m: int) -> np.ndarray:
        if self.kind == "zero":
            return np.zeros(m, dtype=complex)
        if self.kind == "step":
            return self._amp(m) * (1.0 if t >= self.t0 else 0.0)
        if self.kind == "sinusoid":
            return self._amp(m) * np.sin(2 * np.pi * self.freq * t + self.phase)
        if self.values.shape[1] != m:
            raise ValueError(f"input table has {self.values.shape[1]} channels, system has m = {m}")
        return np.array([np.interp(t, self.times, self.values[:, j].real)
                         + 1j * np.interp(t, self.times, self.values[:, j].imag) for j in range(m)])

    @classmethod
    def parse(cls, text: str) -> "InputSignal":
        """Parse ``zero``, ``step:AMP[:T0]``, ``sin:AMP[:FREQ[:PHASE]]`` or ``table:FILE.csv``.

        ``AMP`` is a number or a comma separated list (one per channel).  The
        table file has a header row and columns ``t, u1, ..., um``.
        """
        parts = text.strip().split(":")
        kind = parts[0].lower()

        def amp(s):
            vals = [float(v) for v in s.split(",")]
            return vals[0] if len(vals) == 1 else vals

        try:
            if kind == "zero" and len(parts) == 1:
                return cls("zero")
            if kind == "step" and 2 <= len(parts) <= 3:
                return cls("step", amp(parts[1]), t0=float(parts[2]) if len(parts) > 2 else 0.0)
            if kind in ("sin", "sinusoid") and 2 <= len(parts) <= 4:
                freq = float(parts[2]) if len(parts) > 2 else 1.0
                phase = float(parts[3]) if len(parts) > 3 else 0.0
                return cls("sinusoid", amp(parts[1]), freq=freq, phase=phase)
            if kind == "table" and len(parts) >= 2:
                data = np.loadtxt(":".join(parts[1:]), delimiter=",", skiprows=1, ndmin=2)
                return cls("table", times=data[:, 0], values=data[:, 1:])
        except (OSError, ValueError) as exc:
            raise ValueError(f"bad input spec {text!r}: {exc}") from exc
        raise ValueError(f"bad input spec {text!r}")


@dataclass
class Trajectory:
    """Samples at ``t[k] = k h``; ``residual[k-1]`` belongs to the step ending at ``t[k]``."""

    t: np.ndarray
    x: np.ndarray
    u: np.ndarray
    y: np.ndarray
    H: np.ndarray
    residual: np.ndarray
    h: float
    info: dict = field(default_factory=dict)

    def to_csv(self, path) -> None:
        n = self.x.shape[1]
        header = ["t"]
        for i in range(n):
            header += [f"re_x{i + 1}", f"im_x{i + 1}"]
        header += ["H", "residual"]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for k in range(self.t.size):
                row = [repr(float(self.t[k]))]
                for i in range(n):
                    row += [repr(float(self.x[k, i].real)), repr(float(self.x[k, i].imag))]
                res = "" if k == 0 else repr(float(self.residual[k - 1]))
                row += [repr(float(self.H[k])), res]
                w.writerow(row)

    def summary(self) -> dict:
        dH = np.diff(self.H)
        return {
            "steps": int(self.t.size - 1),
            "h": self.h,
            "T": float(self.t[-1]),
            "H_initial": float(self.H[0]),
            "H_final": float(self.H[-1]),
            "max_H_increase": float(dH.max()) if dH.size else 0.0,
            "max_abs_residual": float(np.abs(self.residual).max()) if self.residual.size else 0.0,
            **{k: v for k, v in self.info.items() if isinstance(v, (int, float, str, bool))},
        }


def _energy(E, x):
    # 1/2 x^H E x row-wise
    return 0.5 * np.real(np.einsum("ki,ij,kj->k", x.conj(), E, x))


def consistent_initial_state(pencil: Pencil, B, u0, x0, tol: TolerancePolicy = DEFAULT_TOL):
    """Project ``x0`` onto the constraint ``T^H (A x + B u0) = 0`` along ``ker E``.

    ``T`` spans the left kernel of ``E``.  Returns ``(x, distance, residual)``
    where ``distance = |x - x0|`` and ``residual`` is the remaining constraint
    violation (nonzero only if the pencil has index above one).
    """
    E, A = pencil.E, pencil.A
    x0 = np.asarray(x0, dtype=complex)
    sE = max(norm2(E), pencil.E_ref or 0.0)
    if sE == 0.0:
        S = np.eye(E.shape[0], dtype=complex)
        T = np.eye(E.shape[0], dtype=complex)
    else:
        S = right_nullspace(E, tol, scale=sE)
        T = left_nullspace(E, tol, scale=sE)
    if S.shape[1] == 0:
        return x0.copy(), 0.0, 0.0
    g = herm(T) @ (A @ x0 + B @ u0)
    z = np.linalg.lstsq(herm(T) @ A @ S, -g, rcond=None)[0]
    x = x0 + S @ z
    return x, float(np.linalg.norm(S @ z)), float(np.linalg.norm(herm(T) @ (A @ x + B @ u0)))


def simulate(sys: SimplifiedPHDAE, u: InputSignal | None, x0, T: float, h: float,
             fb: FeedbackSolution | None = None, tol: TolerancePolicy = DEFAULT_TOL,
             rule: str = "trapezoid") -> Trajectory:
    """Integrate ``sys`` (closed by ``fb`` if given) from ``x0`` over ``[0, T]``.

    The pencil must be regular with index at most one; otherwise
    :class:`SimulationError` is raised with the :class:`PencilReport`
    attached.  ``x0`` is first made consistent (see
    :func:`consistent_initial_state`); the distance moved is reported in
    ``info["projection_distance"]``.  ``rule`` selects how the power-balance
    residual is measured.
    """
    if not (h > 0 and np.isfinite(h)):
        raise SimulationError(f"step size must be positive, got {h!r}")
    if not (T >= 0 and np.isfinite(T)):
        raise SimulationError(f"horizon must be nonnegative, got {T!r}")
    u = u or InputSignal("zero")
    if fb is not None:
        pencil = closed_loop(sys, fb)
        csys = closed_loop_system(sys, fb)
    else:
        pencil = Pencil(sys.E, sys.A)
        csys = sys
    regular, _ = is_regular(pencil, tol)
    if not regular or index_of(pencil, tol) > 1:
        rep = is_asymptotically_stable(pencil, tol)
        why = "singular" if not rep.regular else f"of index {rep.index}"
        raise SimulationError(f"cannot integrate: the pencil is {why}", rep)
    n, m = sys.n, sys.m
    E, A, B = pencil.E, pencil.A, sys.B
    x0 = np.asarray(x0, dtype=complex).reshape(-1)
    if x0.size != n:
        raise SimulationError(f"x0 has {x0.size} entries, system has n = {n}")
    steps = int(np.ceil(T / h - 1e-9)) if T > 0 else 0
    t = np.arange(steps + 1) * h
    us = np.array([u(tk, m) for tk in t]).reshape(steps + 1, m)
    xc, dist, cres = consistent_initial_state(pencil, B, us[0], x0, tol)
    lu = sla.lu_factor(E / h - A / 2, check_finite=True)
    rhs_M = E / h + A / 2
    xs = np.empty((steps + 1, n), dtype=complex)
    xs[0] = xc
    for k in range(steps):
        um = u(t[k] + h / 2, m)
        xs[k + 1] = sla.lu_solve(lu, rhs_M @ xs[k] + B @ um)
    if not np.all(np.isfinite(xs)):
        raise SimulationError("integration produced non-finite values")
    ys = xs @ B.conj()
    H = _energy(E, xs)
    traj = Trajectory(t, xs, us, ys, H, np.zeros(steps), h,
                      {"projection_distance": dist, "constraint_residual": cres, "rule": rule})
    traj.residual = power_balance_residual(traj, csys, rule=rule, u=u)
    return traj


def power_balance_residual(traj: Trajectory, sys: SimplifiedPHDAE, rule: str = "trapezoid",
                           u: InputSignal | None = None) -> np.ndarray:
    """Per-step defect of ``dH/dt = -x^H R x + Re(y^H u)``.

    ``r[k] = (H[k+1] - H[k]) / h + q`` where ``q`` is the dissipated minus
    supplied power ``x^H R x - Re(y^H u)``.  With ``rule="trapezoid"`` ``q`` is
    the mean of its values at the two step ends, an O(h^2) quadrature of the
    exact balance.  With ``rule="midpoint"`` it is taken at the midpoint
    state and input; the midpoint integrator satisfies that form to
    roundoff.  Pass the closed-loop system when a feedback was used.
    """
    x, h = traj.x, traj.h
    if x.shape[0] < 2:
        return np.zeros(0)
    R, B = sys.R, sys.B
    dH = np.diff(traj.H) / h

    def supply(xs, us):
        ys = xs @ B.conj()
        diss = np.real(np.einsum("ki,ij,kj->k", xs.conj(), R, xs))
        return diss - np.real(np.sum(ys.conj() * us, axis=1))

    if rule == "trapezoid":
        q = supply(x, traj.u)
        return dH + 0.5 * (q[:-1] + q[1:])
    if rule == "midpoint":
        xm = 0.5 * (x[:-1] + x[1:])
        m = B.shape[1]
        if u is None:
            um = 0.5 * (traj.u[:-1] + traj.u[1:])
        else:
            um = np.array([u(tk + h / 2, m) for tk in traj.t[:-1]]).reshape(len(traj.t) - 1, m)
        return dH + supply(xm, um)
    raise ValueError(f"rule must be 'trapezoid' or 'midpoint', got {rule!r}")
