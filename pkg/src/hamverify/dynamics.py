"""Numerical flows of the Hamilton equations, with conservation monitors.

Two right-hand sides are integrated: the time-dependent equations
``dq/dt = dH/dp, dp/dt = -dH/dq`` on (t, q, p), and the autonomous lifted
equations ``dt/ds = 1, dp0/ds = -dH/dt, dq/ds = dH/dp, dp/ds = -dH/dq`` on
(t, q, p0, p).  The default integrator is fixed-step classical RK4, which
keeps error budgets predictable in verification runs; an embedded
Dormand-Prince 5(4) pair is available for adaptive stepping.

No symplectic integrator is provided: runs are short and all checks are
drift-based.  This is an extension point, not an omission.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import BlowupDetected, EvalError, StepLimitExceeded
from .lift import ExtendedPoint, project, section_H
from .phase_space import PhasePoint, SystemSpec

__all__ = [
    "IntegratorConfig", "Monitor", "Trajectory",
    "integrate_vertical", "integrate_extended",
    "equivalence_check", "EquivalenceReport",
    "completeness_probe", "ProbeResult", "trajectory_rows", "csv_header",
]


@dataclass(frozen=True)
class IntegratorConfig:
    method: str = "rk4"          # "rk4" (fixed step) or "dp54" (adaptive)
    step: float = 1e-3           # rk4 step; initial step for dp54
    rtol: float = 1e-10
    atol: float = 1e-10
    max_steps: int = 2_000_000
    blowup_threshold: float = 1e8

    def __post_init__(self):
        if self.method not in ("rk4", "dp54"):
            raise ValueError(f"unknown integrator method {self.method!r}")
        if self.step <= 0 or self.rtol <= 0 or self.atol <= 0:
            raise ValueError("step and tolerances must be positive")
        if self.max_steps < 1 or self.blowup_threshold <= 0:
            raise ValueError("max_steps and blowup threshold must be positive")


@dataclass
class Monitor:
    """Drift record for one conserved-quantity candidate along a trajectory."""
    name: str
    initial: float
    max_drift: float
    final: float


@dataclass
class Trajectory:
    """Discrete flow samples with strictly increasing parameter values.

    ``states`` rows are (q, p) for kind="vertical" and (t, q, p0, p) for
    kind="extended"; for extended trajectories dt/ds = 1, so the coordinate
    t equals t0 + s up to round-off.
    """
    kind: str
    m: int
    s: np.ndarray
    states: np.ndarray
    integrator: str
    config: IntegratorConfig
    monitors: dict = field(default_factory=dict)

    def phase_point(self, i: int) -> PhasePoint:
        if self.kind == "vertical":
            return PhasePoint(t=self.s[i], q=self.states[i, :self.m],
                              p=self.states[i, self.m:])
        row = self.states[i]
        return PhasePoint(t=row[0], q=row[1:self.m + 1], p=row[self.m + 2:])

    def extended_point(self, i: int) -> ExtendedPoint:
        if self.kind != "extended":
            raise ValueError("not an extended trajectory")
        row = self.states[i]
        return ExtendedPoint(t=row[0], q=row[1:self.m + 1],
                             p0=row[self.m + 1], p=row[self.m + 2:])

    def __len__(self):
        return len(self.s)


# -- core steppers -------------------------------------------------------------

def _check_state(s: float, y: np.ndarray, skip: int, threshold: float):
    norm = float(np.max(np.abs(y[skip:])))
    if not math.isfinite(norm) or norm > threshold:
        raise BlowupDetected(s, norm)


def _run_rk4(rhs, s0, y0, s_end, cfg, skip):
    span = s_end - s0
    if span == 0.0:
        return np.array([s0]), np.array([y0])
    n_steps = max(1, math.ceil(abs(span) / cfg.step - 1e-12))
    if n_steps > cfg.max_steps:
        raise StepLimitExceeded(f"{n_steps} steps exceed limit {cfg.max_steps}")
    h_nominal = math.copysign(cfg.step, span)
    ss = [s0]
    ys = [np.asarray(y0, dtype=float)]
    s, y = s0, np.asarray(y0, dtype=float)
    for i in range(n_steps):
        h = (s_end - s) if i == n_steps - 1 else h_nominal
        k1 = rhs(s, y)
        k2 = rhs(s + 0.5 * h, y + (0.5 * h) * k1)
        k3 = rhs(s + 0.5 * h, y + (0.5 * h) * k2)
        k4 = rhs(s + h, y + h * k3)
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        s = s0 + (i + 1) * h_nominal if i < n_steps - 1 else s_end
        _check_state(s, y, skip, cfg.blowup_threshold)
        ss.append(s)
        ys.append(y)
    return np.array(ss), np.array(ys)


# Dormand-Prince 5(4) tableau; the 5th-order solution is propagated.
_DP_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_DP_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
_DP_B5 = (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0)
_DP_B4 = (5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200,
          187 / 2100, 1 / 40)


def _run_dp54(rhs, s0, y0, s_end, cfg, skip):
    span = s_end - s0
    if span == 0.0:
        return np.array([s0]), np.array([y0])
    direction = math.copysign(1.0, span)
    h = direction * min(cfg.step, abs(span))
    s, y = s0, np.asarray(y0, dtype=float)
    ss, ys = [s0], [y]
    k = [None] * 7
    k[0] = rhs(s, y)
    for _ in range(cfg.max_steps):
        if direction * (s_end - s) <= 0.0:
            return np.array(ss), np.array(ys)
        if direction * (s + h - s_end) > 0.0:
            h = s_end - s
        for stage in range(1, 7):
            acc = y + h * sum(a * k[j] for j, a in enumerate(_DP_A[stage]))
            k[stage] = rhs(s + _DP_C[stage] * h, acc)
        y5 = y + h * sum(b * k[j] for j, b in enumerate(_DP_B5) if b)
        y4 = y + h * sum(b * k[j] for j, b in enumerate(_DP_B4) if b)
        scale = cfg.atol + cfg.rtol * np.maximum(np.abs(y), np.abs(y5))
        err = math.sqrt(float(np.mean(((y5 - y4) / scale) ** 2)))
        if err <= 1.0:
            s = s + h
            y = y5
            k[0] = k[6]  # first-same-as-last
            _check_state(s, y, skip, cfg.blowup_threshold)
            ss.append(s)
            ys.append(y)
        factor = 0.9 * (err ** -0.2) if err > 0.0 else 5.0
        h = h * min(5.0, max(0.2, factor))
    raise StepLimitExceeded(f"adaptive run exceeded {cfg.max_steps} steps")


def _integrate(rhs, s0, y0, s_end, cfg, skip=0):
    if cfg.method == "rk4":
        return _run_rk4(rhs, s0, y0, s_end, cfg, skip)
    return _run_dp54(rhs, s0, y0, s_end, cfg, skip)


def _wrap_rhs(fn):
    def rhs(s, y):
        try:
            return fn(s, y)
        except OverflowError:
            raise BlowupDetected(s, math.inf) from None
        except (ValueError, ZeroDivisionError) as exc:
            raise EvalError(str(exc)) from exc
    return rhs


# -- system flows ---------------------------------------------------------------

def _vertical_rhs(system: SystemSpec):
    m = system.m
    grad = system.H.compiled_gradient()

    def fn(t, y):
        _, d = grad((t, *y))
        return np.array([*d[m + 1:2 * m + 1], *(-x for x in d[1:m + 1])])
    return _wrap_rhs(fn)


def _extended_rhs(system: SystemSpec):
    m = system.m
    grad = system.H.compiled_gradient()

    def fn(s, y):
        _, d = grad((y[0], *y[1:m + 1], *y[m + 2:]))
        return np.array([1.0, *d[m + 1:2 * m + 1], -d[0],
                         *(-x for x in d[1:m + 1])])
    return _wrap_rhs(fn)


def _monitor_fields(system: SystemSpec):
    fields = []
    if system.H.time_independent:
        fields.append(("H", system.H))
    for i, phi in enumerate(system.integrals, start=1):
        fields.append((phi.name or f"phi{i}", phi))
    return fields


def _attach_monitors(traj: Trajectory, system: SystemSpec):
    points = [(traj.s[i], traj.states[i]) for i in range(len(traj))]
    m = traj.m
    extended = traj.kind == "extended"

    def values(field_fn):
        out = np.empty(len(points))
        for i, (s, row) in enumerate(points):
            if extended:
                out[i] = field_fn(row[0], row[1:m + 1], row[m + 2:])
            else:
                out[i] = field_fn(s, row[:m], row[m:])
        return out

    for name, fld in _monitor_fields(system):
        vals = values(fld.value_at)
        traj.monitors[name] = Monitor(name=name, initial=float(vals[0]),
                                      max_drift=float(np.max(np.abs(vals - vals[0]))),
                                      final=float(vals[-1]))
    if extended:
        h_of = system.H.value_at
        vals = np.array([row[m + 1] + h_of(row[0], row[1:m + 1], row[m + 2:])
                         for _, row in points])
        traj.monitors["I0"] = Monitor(name="I0", initial=float(vals[0]),
                                      max_drift=float(np.max(np.abs(vals - vals[0]))),
                                      final=float(vals[-1]))


def integrate_vertical(system: SystemSpec, x0: PhasePoint, t_end: float,
                       cfg: IntegratorConfig = IntegratorConfig()) -> Trajectory:
    """Integrate the time-dependent Hamilton equations from x0 to t_end.

    Monitors record the drift of H (when time-independent) and of every
    declared integral.  Raises :class:`BlowupDetected` when the max-norm of
    (q, p) exceeds the configured threshold, and :class:`StepLimitExceeded`
    when the step budget runs out.
    """
    y0 = np.array([*x0.q, *x0.p], dtype=float)
    ss, ys = _integrate(_vertical_rhs(system), x0.t, y0, t_end, cfg)
    if t_end < x0.t:  # keep sample parameter strictly increasing
        ss, ys = ss[::-1].copy(), ys[::-1].copy()
    traj = Trajectory(kind="vertical", m=system.m, s=ss, states=ys,
                      integrator=cfg.method, config=cfg)
    _attach_monitors(traj, system)
    return traj


def integrate_extended(system: SystemSpec, X0: ExtendedPoint, s_end: float,
                       cfg: IntegratorConfig = IntegratorConfig()) -> Trajectory:
    """Integrate the autonomous lifted equations for parameter length s_end.

    The monitor set additionally contains I0 = p0 + H, the Hamiltonian of
    the lifted system, which must be conserved."""
    y0 = np.array([X0.t, *X0.q, X0.p0, *X0.p], dtype=float)
    ss, ys = _integrate(_extended_rhs(system), 0.0, y0, s_end, cfg, skip=1)
    if s_end < 0.0:
        ss, ys = ss[::-1].copy(), ys[::-1].copy()
    traj = Trajectory(kind="extended", m=system.m, s=ss, states=ys,
                      integrator=cfg.method, config=cfg)
    _attach_monitors(traj, system)
    return traj


@dataclass
class EquivalenceReport:
    """Sampled distance between the lifted flow (projected) and the direct one."""
    max_deviation: float
    max_t_deviation: float
    i0_drift: float
    n_samples: int
    vertical: Trajectory
    extended: Trajectory


def equivalence_check(system: SystemSpec, x0: PhasePoint, t_end: float,
                      cfg: IntegratorConfig = IntegratorConfig()) -> EquivalenceReport:
    """Integrate x0 directly and through the lift, then compare sample by sample.

    Requires a fixed-step method so both runs share the same parameter grid.
    """
    if cfg.method != "rk4":
        raise ValueError("equivalence_check requires the fixed-step rk4 method")
    traj_v = integrate_vertical(system, x0, t_end, cfg)
    traj_e = integrate_extended(system, section_H(system, x0), t_end - x0.t, cfg)
    if len(traj_v) != len(traj_e):
        raise RuntimeError("sample grids unexpectedly differ")
    m = system.m
    qp_v = traj_v.states
    qp_e = np.hstack([traj_e.states[:, 1:m + 1], traj_e.states[:, m + 2:]])
    deviation = float(np.max(np.abs(qp_v - qp_e)))
    t_dev = float(np.max(np.abs(traj_e.states[:, 0]
                                - (x0.t + (traj_e.s - traj_e.s[0])))))
    return EquivalenceReport(max_deviation=deviation, max_t_deviation=t_dev,
                             i0_drift=traj_e.monitors["I0"].max_drift,
                             n_samples=len(traj_v),
                             vertical=traj_v, extended=traj_e)


@dataclass
class ProbeResult:
    seed: PhasePoint
    forward: tuple   # ("completed", None) or ("blowup", s)
    backward: tuple


def completeness_probe(system: SystemSpec, which: str | int,
                       seeds: Sequence[PhasePoint], horizon: float,
                       cfg: IntegratorConfig = IntegratorConfig()) -> list:
    """Probe completeness of a flow: integrate each seed to +-horizon.

    ``which`` is "gamma_H" for the Hamilton vector field or an integral
    index (0-based) for the Hamiltonian vector field of that integral.
    This gives heuristic evidence only; a finite horizon certifies nothing.
    """
    if horizon <= 0:
        raise ValueError("horizon must be positive")

    results = []
    for seed in seeds:
        verdicts = []
        for sign in (+1.0, -1.0):
            try:
                if which == "gamma_H":
                    integrate_vertical(system, seed, seed.t + sign * horizon, cfg)
                else:
                    phi = system.integrals[which]
                    _probe_theta_flow(phi, seed, sign * horizon, cfg)
                verdicts.append(("completed", None))
            except BlowupDetected as blow:
                verdicts.append(("blowup", blow.s))
        results.append(ProbeResult(seed=seed, forward=verdicts[0],
                                   backward=verdicts[1]))
    return results


def _probe_theta_flow(phi, seed: PhasePoint, s_end: float, cfg: IntegratorConfig):
    """Flow of the vertical field of phi; time stays frozen at the seed value."""
    m = seed.m
    t_frozen = seed.t

    def fn(s, y):
        g = phi.gradient_at(t_frozen, y[:m], y[m:])
        return np.concatenate([g.dp, -g.dq])
    y0 = np.array([*seed.q, *seed.p], dtype=float)
    _integrate(_wrap_rhs(fn), 0.0, y0, s_end, cfg)


# -- export ---------------------------------------------------------------------

def csv_header(m: int, extended: bool) -> list:
    cols = ["s", "t"] + [f"q{i}" for i in range(1, m + 1)] \
        + [f"p{i}" for i in range(1, m + 1)]
    if extended:
        cols += ["p0", "I0"]
    return cols


def trajectory_rows(traj: Trajectory, system: SystemSpec):
    """Yield CSV rows matching :func:`csv_header` column order."""
    m = traj.m
    if traj.kind == "vertical":
        t0 = traj.s[0]
        for i in range(len(traj)):
            row = traj.states[i]
            yield [traj.s[i] - t0, traj.s[i], *row[:m], *row[m:]]
    else:
        for i in range(len(traj)):
            row = traj.states[i]
            t, q, p0, p = row[0], row[1:m + 1], row[m + 1], row[m + 2:]
            yield [traj.s[i], t, *q, *p, p0,
                   p0 + system.H.value_at(t, q, p)]
