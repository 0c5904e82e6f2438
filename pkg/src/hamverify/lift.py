"""Extended (autonomous) phase space with coordinates (t, q, p0, p).

The extra momentum p0 is conjugate to time; the symplectic bracket gains the
pair ``{p0, t} = 1`` on top of the vertical one.  A non-autonomous system is
embedded by the section p0 = -H(t, q, p), and the function Hstar = p0 + H
generates an equivalent autonomous flow.  Functions pulled back from the
time-dependent phase space are exactly the p0-independent ones, which makes
the pullback a bracket homomorphism; the implementation shares the vertical
summation between both brackets so that identity holds to the last bit.

A single global chart is assumed (configuration space R x R^m); the general
transition law for p0 under time-dependent coordinate changes,
p0' = p0 + (dq^j/dt') p_j, is documented here but no atlas is implemented.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .expr import BinOp, ScalarField, Var
from .phase_space import PhasePoint, SystemSpec, _bracket_from_gradients, lie_derivative

__all__ = [
    "ExtendedPoint", "ExtendedTangent", "LiftedSystem", "lift_system",
    "section_H", "project", "i0", "extended_bracket", "u_H_star",
    "projection_identity_defect",
]


@dataclass(frozen=True)
class ExtendedPoint:
    """A point (t, q^1..q^m, p0, p_1..p_m) on the extended phase space."""
    t: float
    q: tuple
    p0: float
    p: tuple

    def __post_init__(self):
        object.__setattr__(self, "q", tuple(float(v) for v in self.q))
        object.__setattr__(self, "p", tuple(float(v) for v in self.p))
        object.__setattr__(self, "t", float(self.t))
        object.__setattr__(self, "p0", float(self.p0))
        if len(self.q) != len(self.p):
            raise ValueError("q and p must have equal length")
        if not all(map(math.isfinite, (self.t, self.p0, *self.q, *self.p))):
            raise ValueError("extended point entries must be finite")

    @property
    def m(self) -> int:
        return len(self.q)


@dataclass(frozen=True)
class ExtendedTangent:
    dt: float
    dq: np.ndarray
    dp0: float
    dp: np.ndarray


@dataclass(frozen=True)
class LiftedSystem:
    """A system together with its autonomous Hamiltonian Hstar = p0 + H.

    On the section p0 = -H the value of Hstar is identically zero, and it is
    conserved along the lifted flow.
    """
    base: SystemSpec
    Hstar: ScalarField


def lift_system(system: SystemSpec) -> LiftedSystem:
    hstar = ScalarField(BinOp("+", Var("p0"), system.H.expression),
                        system.m, allow_p0=True,
                        name=f"p0 + {system.H.name or 'H'}")
    return LiftedSystem(base=system, Hstar=hstar)


def project(X: ExtendedPoint) -> PhasePoint:
    """Forget p0."""
    return PhasePoint(t=X.t, q=X.q, p=X.p)


def section_H(system: SystemSpec, x: PhasePoint) -> ExtendedPoint:
    """Embed x by setting p0 = -H(x)."""
    return ExtendedPoint(t=x.t, q=x.q, p0=-system.H.value_at(x.t, x.q, x.p),
                         p=x.p)


def i0(system: SystemSpec, X: ExtendedPoint) -> float:
    """The conserved fibre coordinate p0 + H; zero on the section."""
    return X.p0 + system.H.value_at(X.t, X.q, X.p)


def _ext_gradient(f, X: ExtendedPoint):
    if getattr(f, "allow_p0", False):
        return f.gradient_at(X.t, X.q, X.p, X.p0)
    return f.gradient_at(X.t, X.q, X.p)


def extended_bracket(f, g, X: ExtendedPoint) -> float:
    """Full symplectic bracket d0f dtg - d0g dtf + d^if d_ig - d^ig d_if.

    Accepts fields with or without p0; for p0-independent pairs the value
    equals the vertical bracket at the projected point exactly.
    """
    gf = _ext_gradient(f, X)
    gg = _ext_gradient(g, X)
    return gf.dp0 * gg.dt - gg.dp0 * gf.dt + _bracket_from_gradients(gf, gg)


def u_H_star(system: SystemSpec, X: ExtendedPoint) -> ExtendedTangent:
    """Autonomous Hamiltonian vector field of Hstar:
    dt = 1, dq = dH/dp, dp0 = -dH/dt, dp = -dH/dq."""
    gh = system.H.gradient_at(X.t, X.q, X.p)
    return ExtendedTangent(dt=1.0, dq=gh.dp.copy(), dp0=-gh.dt, dp=-gh.dq)


def projection_identity_defect(system: SystemSpec, f, X: ExtendedPoint) -> float:
    """|LieDerivative_H(f) at the projection - {Hstar, pullback f} at X|.

    Zero everywhere for smooth f; this is the pointwise statement that the
    lifted flow projects onto the time-dependent one.
    """
    lifted = lift_system(system)
    lhs = lie_derivative(system, f, project(X))
    rhs = extended_bracket(lifted.Hstar, f, X)
    return abs(lhs - rhs)
