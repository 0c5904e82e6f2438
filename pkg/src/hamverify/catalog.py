"""Built-in reference systems with declared integrals and expected outcomes.

Positive entries pass their declared checks under default configuration;
negative fixtures fail exactly the declared check.  The 2-dof free particle
is the canonical genuinely time-dependent example (time appears explicitly
in its third integral) with every bracket hand-checkable; the 2-dof
oscillator uses the integral set (E1, S1, L) rather than (H, L, S1) so the
structure functions stay single-valued on E1 > 0, avoiding square-root
branches in the closure test.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

from .action_angle import ActionAngleChart
from .duals import cos, sin, sqrt
from .expr import ScalarField
from .phase_space import PhasePoint, SystemSpec
from .sampling import Box

__all__ = ["ActionFactor", "Expected", "CatalogEntry", "catalog_entries",
           "get_entry"]


@dataclass(frozen=True)
class ActionFactor:
    """A 1-dof factor of a separable system, used for loop-integral actions."""
    name: str
    hamiltonian: ScalarField
    compact: bool
    closed_form_action: Optional[Callable] = None


@dataclass(frozen=True)
class Expected:
    """Declared verifier outcomes; None means 'not applicable / not asserted'."""
    n: Optional[int] = None
    k: Optional[int] = None
    r: Optional[int] = None
    independence: Optional[bool] = None
    closure: Optional[bool] = None
    corank: Optional[bool] = None
    involution: Optional[bool] = None


@dataclass(frozen=True)
class CatalogEntry:
    name: str
    system: SystemSpec
    box: Box
    expected: Optional[Expected] = None
    chart: Optional[ActionAngleChart] = None
    exclusion: Optional[Callable] = None
    exclusion_note: str = ""
    notes: str = ""
    reference_point: Optional[PhasePoint] = None
    flow_complete: bool = True
    feature_flagged: bool = False
    action_factors: tuple = ()


def _fields(m, allow_p0=False, **named):
    return {name: ScalarField.from_source(src, m, allow_p0, name=name)
            for name, src in named.items()}


def _free2d() -> CatalogEntry:
    f = _fields(2, H="(p1^2+p2^2)/2", phi1="p1", phi2="p2", phi3="q1 - t*p1")
    system = SystemSpec(m=2, H=f["H"],
                        integrals=(f["phi1"], f["phi2"], f["phi3"]),
                        name="free2d", catalog="free2d")

    def inverse(pair_p, pair_q, actions, t, angles):
        p1 = pair_p[0]
        q1 = pair_q[0] + t * p1
        p2 = actions[0]
        q2 = angles[0] + t * p2
        return (q1, q2), (p1, p2)

    chart = ActionAngleChart(
        name="free2d-initial-data", m=2, k=1, r=0,
        pair_fields=((ScalarField.from_source("p1", 2, name="pA1"),
                      ScalarField.from_source("q1 - t*p1", 2, name="qA1")),),
        action_fields=(ScalarField.from_source("p2", 2, name="I1"),),
        angle_fields=(ScalarField.from_source("q2 - t*p2", 2, name="y1"),),
        inverse=inverse,
        hamiltonian=lambda actions: 0.0)

    return CatalogEntry(
        name="free2d", system=system, box=Box.default(2),
        expected=Expected(n=3, k=1, r=0, independence=True, closure=True,
                          corank=True),
        chart=chart,
        reference_point=PhasePoint(0.0, (0.4, -0.3), (0.9, 0.5)),
        notes="time appears explicitly in the third integral; the chart is "
              "an initial-data chart, so its Hamiltonian is identically 0",
        action_factors=(ActionFactor(
            "free-factor", ScalarField.from_source("p1^2/2", 1, name="Hfree"),
            compact=False),))


def _osc1d() -> CatalogEntry:
    f = _fields(1, H="(p1^2+q1^2)/2")
    E = ScalarField.from_source("(p1^2+q1^2)/2", 1, name="E")
    system = SystemSpec(m=1, H=f["H"], integrals=(E,), name="osc1d",
                        catalog="osc1d")

    def inverse(pair_p, pair_q, actions, t, angles):
        amplitude = sqrt(2.0 * actions[0])
        return (amplitude * sin(angles[0]),), (amplitude * cos(angles[0]),)

    chart = ActionAngleChart(
        name="osc1d-polar", m=1, k=1, r=1,
        pair_fields=(),
        action_fields=(ScalarField.from_source("(p1^2+q1^2)/2", 1, name="I1"),),
        angle_fields=(ScalarField.from_source("atan2(q1,p1)", 1, name="y1"),),
        inverse=inverse,
        hamiltonian=lambda actions: actions[0])

    def low_energy(x):
        return (x.q[0] ** 2 + x.p[0] ** 2) / 2.0 <= 0.1

    return CatalogEntry(
        name="osc1d", system=system, box=Box.default(1),
        expected=Expected(n=1, k=1, r=1, involution=True, independence=True),
        chart=chart, exclusion=low_energy, exclusion_note="E > 0.1",
        reference_point=PhasePoint(0.0, (1.0,), (0.0,)),
        action_factors=(ActionFactor(
            "oscillator", ScalarField.from_source("(p1^2+q1^2)/2", 1,
                                                  name="Hosc"),
            compact=True, closed_form_action=lambda energy: energy),))


def _osc2d() -> CatalogEntry:
    f = _fields(2, H="(p1^2+q1^2)/2 + (p2^2+q2^2)/2",
                E1="(p1^2+q1^2)/2", S1="p1*p2 + q1*q2", L="q1*p2 - q2*p1")
    system = SystemSpec(m=2, H=f["H"], integrals=(f["E1"], f["S1"], f["L"]),
                        name="osc2d", catalog="osc2d")

    def inverse(pair_p, pair_q, actions, t, angles):
        e2 = pair_p[0]
        e1 = actions[0] - e2
        phi1 = angles[0]
        phi2 = pair_q[0] + angles[0]
        a1 = sqrt(2.0 * e1)
        a2 = sqrt(2.0 * e2)
        return (a1 * sin(phi1), a2 * sin(phi2)), (a1 * cos(phi1), a2 * cos(phi2))

    chart = ActionAngleChart(
        name="osc2d-resonant", m=2, k=1, r=1,
        pair_fields=((ScalarField.from_source("(p2^2+q2^2)/2", 2, name="pA1"),
                      ScalarField.from_source("atan2(q2,p2) - atan2(q1,p1)", 2,
                                              name="qA1")),),
        action_fields=(ScalarField.from_source(
            "(p1^2+q1^2)/2 + (p2^2+q2^2)/2", 2, name="I1"),),
        angle_fields=(ScalarField.from_source("atan2(q1,p1)", 2, name="y1"),),
        inverse=inverse,
        hamiltonian=lambda actions: actions[0],
        pair_q_periodic=(True,))

    def low_energy(x):
        e1 = (x.q[0] ** 2 + x.p[0] ** 2) / 2.0
        e2 = (x.q[1] ** 2 + x.p[1] ** 2) / 2.0
        return e1 <= 0.1 or e2 <= 0.1

    return CatalogEntry(
        name="osc2d", system=system, box=Box.default(2),
        expected=Expected(n=3, k=1, r=1, independence=True, closure=True,
                          corank=True),
        chart=chart, exclusion=low_energy,
        exclusion_note="E1 > 0.1 and E2 > 0.1",
        reference_point=PhasePoint(0.0, (1.0, 0.3), (0.2, 1.1)),
        notes="brackets close on {E1,S1}=-L, {E1,L}=S1, {S1,L}=2(E2-E1) with "
              "E2 = (S1^2+L^2)/(4 E1) on E1 > 0",
        action_factors=(
            ActionFactor("oscillator-1",
                         ScalarField.from_source("(p1^2+q1^2)/2", 1, name="H1"),
                         compact=True, closed_form_action=lambda energy: energy),
            ActionFactor("oscillator-2",
                         ScalarField.from_source("(p1^2+q1^2)/2", 1, name="H2"),
                         compact=True, closed_form_action=lambda energy: energy)))


def _driven_osc() -> CatalogEntry:
    f = _fields(1, H="(p1^2+q1^2)/2 - sin(t)*q1")
    system = SystemSpec(m=1, H=f["H"], integrals=(), name="driven_osc",
                        catalog="driven_osc")
    return CatalogEntry(
        name="driven_osc", system=system, box=Box.default(1),
        reference_point=PhasePoint(0.0, (0.5,), (0.0,)),
        notes="no declared integrals; lift and flow-equivalence fixture")


def _blowup_fixture() -> CatalogEntry:
    f = _fields(1, H="p1^2/2 - q1^4")
    system = SystemSpec(m=1, H=f["H"], integrals=(), name="blowup_fixture",
                        catalog="blowup_fixture")
    return CatalogEntry(
        name="blowup_fixture", system=system, box=Box.default(1),
        reference_point=PhasePoint(0.0, (1.0,), (0.0,)),
        flow_complete=False,
        notes="inverted quartic potential; escapes to infinity in finite "
              "time, negative fixture for the completeness probe")


def _broken_closure() -> CatalogEntry:
    f = _fields(2, H="0", phi1="q1", phi2="p1*q2")
    system = SystemSpec(m=2, H=f["H"], integrals=(f["phi1"], f["phi2"]),
                        name="broken_closure", catalog="broken_closure")
    return CatalogEntry(
        name="broken_closure", system=system, box=Box.default(2),
        expected=Expected(n=2, independence=True, closure=False),
        reference_point=PhasePoint(0.0, (0.3, 0.4), (0.5, 0.6)),
        notes="{q1, p1*q2} = -q2 is functionally independent of the "
              "integrals, so closure must fail; with H = 0 both candidates "
              "are genuine integrals and nothing else breaks")


def _duplicate_integrals() -> CatalogEntry:
    f = _fields(2, H="(p1^2+p2^2)/2", phi1="p1", phi2="2*p1")
    system = SystemSpec(m=2, H=f["H"], integrals=(f["phi1"], f["phi2"]),
                        name="duplicate_integrals", catalog="duplicate_integrals")
    return CatalogEntry(
        name="duplicate_integrals", system=system, box=Box.default(2),
        expected=Expected(n=2, independence=False),
        reference_point=PhasePoint(0.0, (0.1, 0.2), (0.7, -0.4)),
        notes="proportional integrals; independence rank is 1, must fail")


def _kepler2d() -> CatalogEntry:
    f = _fields(2, H="(p1^2+p2^2)/2 - 1/sqrt(q1^2+q2^2)",
                L="q1*p2 - q2*p1",
                A1="p2*(q1*p2 - q2*p1) - q1/sqrt(q1^2+q2^2)")
    system = SystemSpec(m=2, H=f["H"], integrals=(f["H"], f["L"], f["A1"]),
                        name="kepler2d", catalog="kepler2d")

    box = Box(t_range=(0.0, 2.0),
              q_ranges=((0.9, 1.1), (-0.1, 0.1)),
              p_ranges=((0.2, 0.4), (1.0, 1.2)))

    def outside_branch(x):
        q1, q2 = x.q
        p1, p2 = x.p
        r = math.hypot(q1, q2)
        energy = (p1 * p1 + p2 * p2) / 2.0 - 1.0 / r
        ell = q1 * p2 - q2 * p1
        a2 = -p1 * ell - q2 / r
        return energy >= -0.05 or abs(a2) <= 0.05

    return CatalogEntry(
        name="kepler2d", system=system, box=box,
        expected=Expected(n=3, k=1, r=1, independence=True, closure=True,
                          corank=True),
        exclusion=outside_branch,
        exclusion_note="bound orbits (H < -0.05) with the second eccentricity "
                       "component bounded away from 0",
        reference_point=PhasePoint(0.0, (1.0, 0.0), (0.3, 1.1)),
        feature_flagged=True,
        notes="closure holds only on a branch: {L, A1} = +-sqrt(1 + 2*H*L^2 "
              "- A1^2); the box is restricted so a single branch covers it")


@functools.lru_cache(maxsize=None)
def _all_entries() -> tuple:
    return (_free2d(), _osc1d(), _osc2d(), _driven_osc(), _blowup_fixture(),
            _broken_closure(), _duplicate_integrals(), _kepler2d())


def catalog_entries(include_flagged: bool = False) -> tuple:
    """All built-in entries; feature-flagged ones only on request."""
    entries = _all_entries()
    if include_flagged:
        return entries
    return tuple(e for e in entries if not e.feature_flagged)


def get_entry(name: str) -> CatalogEntry:
    for entry in _all_entries():
        if entry.name == name:
            return entry
    raise KeyError(f"unknown catalog system {name!r}")
