"""Action-angle charts: numerical actions, frequencies and chart verification.

Charts are catalog-supplied closed forms; this module verifies their
structure rather than synthesizing charts for arbitrary systems (chart
construction in general means solving for generating functions, which is
far beyond a verifiable artifact component).

A chart splits the 2m+1 coordinates into canonical pairs (p_A, q^A), action
coordinates I with conjugate angle coordinates y, and the time t.  The first
``r`` angles are 2pi-periodic (compact directions); the rest are plain reals.
Verified fingerprints:

* canonical bracket table, including that each action brackets to zero with
  every coordinate except its own angle (the Casimir property of actions);
* the dynamics in the chart is Hamiltonian for the declared chart
  Hamiltonian, a function of actions only -- checked pointwise through Lie
  derivatives, which works for time-dependent (initial-data style) charts
  where naive composition of H with the inverse map would be wrong;
* the declared integrals, composed with the inverse map, are independent of
  t and of the angles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.optimize import brentq

from . import duals
from .duals import Dual2
from .dynamics import IntegratorConfig, Trajectory, integrate_vertical
from .errors import (ChartDomainError, EvalError, NonConvergedPeriod,
                     NotClosedOrbit)
from .expr import FunctionField, ScalarField
from .phase_space import PhasePoint, SystemSpec, lie_derivative, vertical_bracket

__all__ = [
    "ChartPoint", "ActionAngleChart", "RegaugeSpec",
    "action_loop_integral", "frequencies", "measured_frequencies",
    "chart_verify", "ChartVerifyReport", "initial_data_check",
    "InitialDataReport", "regauge", "round_trip_defect",
    "transform_trajectory",
]

CHART_TOL = 1e-8
ACTION_DRIFT_TOL = 1e-7
SLOPE_TOL = 1e-5


@dataclass(frozen=True)
class ChartPoint:
    pair_p: tuple
    pair_q: tuple
    actions: tuple
    t: float
    angles: tuple


def _field_call(f, t, q, p):
    """Evaluate a coordinate field at possibly dual-valued (t, q, p)."""
    if isinstance(f, ScalarField):
        env = {"t": t}
        for i, v in enumerate(q):
            env[f"q{i + 1}"] = v
        for i, v in enumerate(p):
            env[f"p{i + 1}"] = v
        return f.eval_with(env)
    if isinstance(f, FunctionField):
        return f.fn(t, tuple(q), tuple(p))
    raise TypeError(f"not a field: {f!r}")


@dataclass(frozen=True)
class ActionAngleChart:
    """Closed-form chart (p_A, q^A, I, t, y) on a neighborhood in phase space.

    ``inverse`` maps chart values back to phase space,
    ``fn(pair_p, pair_q, actions, t, angles) -> (q, p)``, and must be written
    against :mod:`hamverify.duals` so it is exactly differentiable.
    ``hamiltonian`` is the Hamiltonian expressed in the chart -- a callable
    of the action tuple alone (0 for initial-data charts).
    """
    name: str
    m: int
    k: int
    r: int
    pair_fields: tuple      # ((p_A field, q^A field), ...)
    action_fields: tuple
    angle_fields: tuple
    inverse: Callable
    hamiltonian: Callable
    pair_q_periodic: tuple = ()

    def __post_init__(self):
        if not (0 <= self.r <= self.k):
            raise ValueError("need 0 <= r <= k")
        if len(self.action_fields) != self.k or len(self.angle_fields) != self.k:
            raise ValueError("need k action and k angle fields")
        if not self.pair_q_periodic:
            object.__setattr__(self, "pair_q_periodic",
                               (False,) * len(self.pair_fields))

    @property
    def n_minus_m(self) -> int:
        return len(self.pair_fields)

    def forward(self, x: PhasePoint) -> ChartPoint:
        try:
            return ChartPoint(
                pair_p=tuple(f.value_at(x.t, x.q, x.p) for f, _ in self.pair_fields),
                pair_q=tuple(g.value_at(x.t, x.q, x.p) for _, g in self.pair_fields),
                actions=tuple(f.value_at(x.t, x.q, x.p) for f in self.action_fields),
                t=x.t,
                angles=tuple(f.value_at(x.t, x.q, x.p) for f in self.angle_fields))
        except EvalError as exc:
            raise ChartDomainError(str(exc)) from exc

    def inverse_point(self, cp: ChartPoint) -> PhasePoint:
        try:
            q, p = self.inverse(cp.pair_p, cp.pair_q, cp.actions, cp.t, cp.angles)
        except (EvalError, ValueError, ZeroDivisionError, OverflowError) as exc:
            raise ChartDomainError(str(exc)) from exc
        return PhasePoint(t=cp.t, q=q, p=p)

    def hamiltonian_gradient(self, actions) -> np.ndarray:
        """Exact dH/dI of the chart Hamiltonian at an action tuple."""
        seeds = duals.seed_variables(actions)
        try:
            out = self.hamiltonian(tuple(seeds))
        except (EvalError, ValueError, ZeroDivisionError) as exc:
            raise ChartDomainError(str(exc)) from exc
        if isinstance(out, Dual2):
            return out.first.copy()
        return np.zeros(self.k)


@dataclass(frozen=True)
class RegaugeSpec:
    """A function of the actions used to re-gauge a chart, with its gradient.

    Both callables take the action tuple and must be dual-friendly; the
    gradient is supplied explicitly so regauged coordinate fields stay
    exactly differentiable."""
    hamiltonian: Callable
    gradient: Callable
    name: str = "Hprime"


def round_trip_defect(chart: ActionAngleChart, x: PhasePoint) -> float:
    back = chart.inverse_point(chart.forward(x))
    return max(float(np.max(np.abs(np.subtract(back.q, x.q)))),
               float(np.max(np.abs(np.subtract(back.p, x.p)))))


# -- loop-integral actions -------------------------------------------------------

def action_loop_integral(factor: ScalarField, energy: float,
                         cfg: IntegratorConfig = IntegratorConfig(),
                         horizon: float = 50.0, q_section: float = 0.0) -> float:
    """Action (1/2pi) * closed integral of p dq of a 1-dof factor orbit.

    Integrates the factor orbit from a seed on the energy level until it
    recrosses the section plane through the seed (transverse to the initial
    velocity), locating the crossing by quadratic interpolation, then applies
    trapezoidal quadrature to p*qdot over the period.  Raises
    :class:`NotClosedOrbit` when no return occurs within the horizon.
    """
    if factor.m != 1:
        raise ValueError("loop integrals are defined for 1-dof factors")
    if not factor.time_independent:
        raise ValueError("factor Hamiltonian must be time-independent")

    p_seed = _level_seed(factor, energy, q_section)
    grad = factor.compiled_gradient()

    def rhs(y):
        _, d = grad((0.0, y[0], y[1]))
        return np.array([d[2], -d[1]])

    y = np.array([q_section, p_seed])
    v0 = rhs(y)
    normal = v0 / np.linalg.norm(v0)
    y0 = y.copy()

    h = cfg.step
    n_max = int(math.ceil(horizon / h))
    times = [0.0]
    states = [y0.copy()]
    integrand = [y0[1] * v0[0]]
    sigma_prev = 0.0
    crossing = None
    for i in range(1, n_max + 1):
        k1 = rhs(y)
        k2 = rhs(y + 0.5 * h * k1)
        k3 = rhs(y + 0.5 * h * k2)
        k4 = rhs(y + h * k3)
        y = y + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        t = i * h
        times.append(t)
        states.append(y.copy())
        vel = rhs(y)
        integrand.append(y[1] * vel[0])
        sigma = float(np.dot(normal, y - y0))
        if i >= 3 and sigma_prev < 0.0 <= sigma:
            crossing = i
            break
        sigma_prev = sigma
    if crossing is None:
        raise NotClosedOrbit(
            f"orbit did not return within horizon {horizon}")

    t_star, y_star = _interpolate_crossing(times, states, crossing, normal, y0)
    g_star = y_star[1] * rhs(y_star)[0]
    # full samples up to the one before the crossing, then the crossing itself
    ts = np.append(times[:crossing], t_star)
    gs = np.append(integrand[:crossing], g_star)
    loop = float(np.trapz(gs, ts))
    return loop / (2.0 * math.pi)


def _level_seed(factor: ScalarField, energy: float, q_section: float) -> float:
    def residual(p):
        return factor.value_at(0.0, (q_section,), (p,)) - energy

    r0 = residual(0.0)
    if r0 > 0.0:
        raise NotClosedOrbit(
            f"energy level {energy} does not meet the section q={q_section}")
    if r0 == 0.0:
        raise NotClosedOrbit("seed has zero momentum; section would be tangent")
    upper = 1.0
    while residual(upper) < 0.0:
        upper *= 2.0
        if upper > 1e8:
            raise NotClosedOrbit("no momentum seed found on the energy level")
    return float(brentq(residual, 0.0, upper, xtol=1e-14, rtol=1e-15))


def _interpolate_crossing(times, states, i, normal, y0):
    """Quadratic root of the section function through samples i-2, i-1, i."""
    ts = np.array(times[i - 2:i + 1])
    ys = np.array(states[i - 2:i + 1])
    sigmas = ys @ normal - float(np.dot(normal, y0))
    t_mid = ts[1]
    coeffs = np.polyfit(ts - t_mid, sigmas, 2)
    roots = np.roots(coeffs)
    roots = roots[np.isreal(roots)].real + t_mid
    candidates = [r for r in roots if ts[1] - 1e-12 <= r <= ts[2] + 1e-12]
    if not candidates:
        if sigmas[2] == sigmas[1]:
            raise NonConvergedPeriod("degenerate section crossing")
        # linear fallback
        t_star = ts[1] + (ts[2] - ts[1]) * (-sigmas[1]) / (sigmas[2] - sigmas[1])
    else:
        t_star = float(candidates[0])
    # quadratic (Lagrange) interpolation of the state at t_star
    y_star = np.zeros_like(y0)
    for a in range(3):
        weight = 1.0
        for b in range(3):
            if a != b:
                weight *= (t_star - ts[b]) / (ts[a] - ts[b])
        y_star = y_star + weight * ys[a]
    return t_star, y_star


# -- frequencies ------------------------------------------------------------------

def frequencies(chart: ActionAngleChart, actions, h: float = 1e-5) -> np.ndarray:
    """Central finite differences of the chart Hamiltonian over the actions."""
    actions = tuple(float(a) for a in actions)
    out = np.zeros(chart.k)
    for lam in range(chart.k):
        plus = list(actions)
        minus = list(actions)
        plus[lam] += h
        minus[lam] -= h
        try:
            out[lam] = (chart.hamiltonian(tuple(plus))
                        - chart.hamiltonian(tuple(minus))) / (2.0 * h)
        except (EvalError, ValueError, ZeroDivisionError) as exc:
            raise ChartDomainError(str(exc)) from exc
    return out


def transform_trajectory(traj: Trajectory, chart: ActionAngleChart):
    """Map a vertical trajectory into chart coordinates.

    Returns (times, pair_p, pair_q, actions, angles) arrays; periodic
    coordinates are unwrapped so drift accounting survives 2pi wraps.
    """
    if traj.kind != "vertical":
        raise ValueError("chart transforms apply to vertical trajectories")
    points = [traj.phase_point(i) for i in range(len(traj))]
    chart_points = [chart.forward(x) for x in points]
    times = np.array([x.t for x in points])
    pair_p = np.array([cp.pair_p for cp in chart_points]).reshape(len(points), -1)
    pair_q = np.array([cp.pair_q for cp in chart_points]).reshape(len(points), -1)
    actions = np.array([cp.actions for cp in chart_points])
    angles = np.array([cp.angles for cp in chart_points])
    for lam in range(chart.k):
        if lam < chart.r:
            angles[:, lam] = np.unwrap(angles[:, lam])
    for j, periodic in enumerate(chart.pair_q_periodic):
        if periodic:
            pair_q[:, j] = np.unwrap(pair_q[:, j])
    return times, pair_p, pair_q, actions, angles


def measured_frequencies(system: SystemSpec, chart: ActionAngleChart,
                         x0: PhasePoint, t_end: float,
                         cfg: IntegratorConfig = IntegratorConfig()) -> np.ndarray:
    """Rotation rates of the chart angles along an integrated trajectory."""
    traj = integrate_vertical(system, x0, t_end, cfg)
    times, _, _, _, angles = transform_trajectory(traj, chart)
    return np.array([np.polyfit(times, angles[:, lam], 1)[0]
                     for lam in range(chart.k)])


# -- chart verification -------------------------------------------------------------

@dataclass
class ChartVerifyReport:
    canonical_max_defect: float
    hamiltonian_max_residual: float
    integrals_max_partial: float
    tolerance: float
    n_samples: int

    @property
    def canonical_ok(self):
        return self.canonical_max_defect < self.tolerance

    @property
    def hamiltonian_ok(self):
        return self.hamiltonian_max_residual < self.tolerance

    @property
    def integrals_ok(self):
        return self.integrals_max_partial < self.tolerance

    @property
    def passed(self):
        return self.canonical_ok and self.hamiltonian_ok and self.integrals_ok

    def as_dict(self):
        return {"canonical_max_defect": self.canonical_max_defect,
                "hamiltonian_max_residual": self.hamiltonian_max_residual,
                "integrals_max_partial": self.integrals_max_partial,
                "tolerance": self.tolerance, "n_samples": self.n_samples,
                "canonical_ok": self.canonical_ok,
                "hamiltonian_ok": self.hamiltonian_ok,
                "integrals_ok": self.integrals_ok, "passed": self.passed}


def _chart_coordinates(chart: ActionAngleChart):
    coords = []
    for j, (fp, fq) in enumerate(chart.pair_fields):
        coords.append(("pair_p", j, fp))
        coords.append(("pair_q", j, fq))
    for lam, f in enumerate(chart.action_fields):
        coords.append(("action", lam, f))
    for lam, f in enumerate(chart.angle_fields):
        coords.append(("angle", lam, f))
    return coords


def _expected_bracket(kind_i, idx_i, kind_j, idx_j) -> float:
    if kind_i == "pair_p" and kind_j == "pair_q" and idx_i == idx_j:
        return 1.0
    if kind_i == "pair_q" and kind_j == "pair_p" and idx_i == idx_j:
        return -1.0
    if kind_i == "action" and kind_j == "angle" and idx_i == idx_j:
        return 1.0
    if kind_i == "angle" and kind_j == "action" and idx_i == idx_j:
        return -1.0
    return 0.0


def chart_verify(system: SystemSpec, chart: ActionAngleChart,
                 samples: Sequence[PhasePoint],
                 tolerance: float = CHART_TOL) -> ChartVerifyReport:
    """Three sampled sub-checks of a chart against its system.

    (a) brackets of chart coordinates take the canonical form
        {p_A, q^B} = delta, {I, y} = delta, all others zero;
    (b) the flow is Hamiltonian for the declared chart Hamiltonian H(I):
        Lie derivatives of pair and action coordinates vanish and each angle
        advances at dH/dI of its action values;
    (c) every declared integral, composed with the inverse chart map, has
        vanishing partials along t and along every angle.
    """
    coords = _chart_coordinates(chart)
    max_canonical = 0.0
    max_ham = 0.0
    max_partial = 0.0
    for x in samples:
        try:
            for i in range(len(coords)):
                for j in range(i + 1, len(coords)):
                    ki, ii, fi = coords[i]
                    kj, jj, fj = coords[j]
                    value = vertical_bracket(fi, fj, x)
                    expected = _expected_bracket(ki, ii, kj, jj)
                    max_canonical = max(max_canonical, abs(value - expected))

            omega = chart.hamiltonian_gradient(
                tuple(f.value_at(x.t, x.q, x.p) for f in chart.action_fields))
            for kind, idx, f in coords:
                lie = lie_derivative(system, f, x)
                target = omega[idx] if kind == "angle" else 0.0
                max_ham = max(max_ham, abs(lie - target))

            max_partial = max(max_partial, _integral_chart_partials(system, chart, x))
        except EvalError as exc:
            raise ChartDomainError(str(exc)) from exc
    return ChartVerifyReport(canonical_max_defect=max_canonical,
                             hamiltonian_max_residual=max_ham,
                             integrals_max_partial=max_partial,
                             tolerance=tolerance, n_samples=len(samples))


def _integral_chart_partials(system: SystemSpec, chart: ActionAngleChart,
                             x: PhasePoint) -> float:
    """Max |d(Phi o inverse)/dt| and |d(Phi o inverse)/dy| at the chart image
    of x, via dual seeds over the chart variables."""
    cp = chart.forward(x)
    npairs = chart.n_minus_m
    values = (*cp.pair_p, *cp.pair_q, *cp.actions, cp.t, *cp.angles)
    seeds = duals.seed_variables(values)
    pp = tuple(seeds[:npairs])
    pq = tuple(seeds[npairs:2 * npairs])
    acts = tuple(seeds[2 * npairs:2 * npairs + chart.k])
    t_index = 2 * npairs + chart.k
    t_dual = seeds[t_index]
    ys = tuple(seeds[t_index + 1:])
    try:
        q, p = chart.inverse(pp, pq, acts, t_dual, ys)
    except (EvalError, ValueError, ZeroDivisionError) as exc:
        raise ChartDomainError(str(exc)) from exc
    worst = 0.0
    for phi in system.integrals:
        out = _field_call(phi, t_dual, q, p)
        if not isinstance(out, Dual2):
            continue
        worst = max(worst, abs(float(out.first[t_index])))
        for lam in range(chart.k):
            worst = max(worst, abs(float(out.first[t_index + 1 + lam])))
    return worst


# -- initial-data coordinates --------------------------------------------------------

@dataclass
class InitialDataReport:
    max_action_drift: float
    max_pair_drift: float
    max_angle_residual: float
    max_slope_error: float
    angle_tolerance: float
    drift_tolerance: float

    @property
    def passed(self):
        return bool(self.max_action_drift < self.drift_tolerance
                    and self.max_pair_drift < self.drift_tolerance
                    and self.max_angle_residual < self.angle_tolerance
                    and self.max_slope_error < SLOPE_TOL)

    def as_dict(self):
        return {"max_action_drift": self.max_action_drift,
                "max_pair_drift": self.max_pair_drift,
                "max_angle_residual": self.max_angle_residual,
                "max_slope_error": self.max_slope_error,
                "angle_tolerance": self.angle_tolerance,
                "drift_tolerance": self.drift_tolerance,
                "passed": self.passed}


def initial_data_check(system: SystemSpec, chart: ActionAngleChart,
                       trajectories: Sequence[Trajectory]) -> InitialDataReport:
    """Transform trajectories into the chart and check the flow is trivial
    modulo the declared angle rotation.

    Actions and canonical-pair coordinates must be constant along every
    trajectory; angles must advance linearly at dH/dI.  For an initial-data
    chart (chart Hamiltonian identically 0) everything is constant and the
    tight drift tolerance applies to the angles too.
    """
    max_action = 0.0
    max_pair = 0.0
    max_residual = 0.0
    max_slope = 0.0
    trivial = True
    for traj in trajectories:
        times, pair_p, pair_q, actions, angles = transform_trajectory(traj, chart)
        omega = chart.hamiltonian_gradient(tuple(actions[0]))
        if np.any(omega != 0.0):
            trivial = False
        max_action = max(max_action,
                         float(np.max(np.abs(actions - actions[0]))) if actions.size else 0.0)
        if pair_p.size:
            max_pair = max(max_pair, float(np.max(np.abs(pair_p - pair_p[0]))),
                           float(np.max(np.abs(pair_q - pair_q[0]))))
        for lam in range(chart.k):
            line = angles[0, lam] + omega[lam] * (times - times[0])
            max_residual = max(max_residual,
                               float(np.max(np.abs(angles[:, lam] - line))))
            slope = float(np.polyfit(times, angles[:, lam], 1)[0])
            max_slope = max(max_slope, float(abs(slope - omega[lam])))
    angle_tol = ACTION_DRIFT_TOL if trivial else SLOPE_TOL
    return InitialDataReport(max_action_drift=max_action,
                             max_pair_drift=max_pair,
                             max_angle_residual=max_residual,
                             max_slope_error=max_slope,
                             angle_tolerance=angle_tol,
                             drift_tolerance=ACTION_DRIFT_TOL)


# -- regauging ------------------------------------------------------------------------

def regauge(chart: ActionAngleChart, spec: RegaugeSpec) -> ActionAngleChart:
    """Shift each angle by t * dH'/dI and add H' to the chart Hamiltonian.

    The transform preserves the canonical bracket table; with H' = 0 it is
    the identity, and regauging by H' then -H' returns the original chart
    (up to round-off).  The non-autonomous Hamiltonian in the new chart is
    the old one plus H'.
    """
    old_inverse = chart.inverse
    old_h = chart.hamiltonian
    action_fields = chart.action_fields

    def make_angle(old_field, lam):
        def fn(t, q, p):
            acts = tuple(_field_call(a, t, q, p) for a in action_fields)
            return _field_call(old_field, t, q, p) + t * spec.gradient(acts)[lam]
        label = getattr(old_field, "name", f"y{lam + 1}")
        return FunctionField(fn, chart.m, name=f"{label}+t*d{spec.name}")

    new_angles = tuple(make_angle(f, lam)
                       for lam, f in enumerate(chart.angle_fields))

    def new_inverse(pair_p, pair_q, actions, t, angles):
        shift = spec.gradient(tuple(actions))
        old_angles = tuple(y - t * shift[lam] for lam, y in enumerate(angles))
        return old_inverse(pair_p, pair_q, actions, t, old_angles)

    def new_hamiltonian(actions):
        return old_h(actions) + spec.hamiltonian(actions)

    return ActionAngleChart(name=f"{chart.name}|{spec.name}", m=chart.m,
                            k=chart.k, r=chart.r,
                            pair_fields=chart.pair_fields,
                            action_fields=chart.action_fields,
                            angle_fields=new_angles,
                            inverse=new_inverse,
                            hamiltonian=new_hamiltonian,
                            pair_q_periodic=chart.pair_q_periodic)
