"""Geometry of the time-dependent phase space with coordinates (t, q, p).

Index convention, fixed once for the whole package: ``d^i`` denotes a
momentum partial (d/dp_i) and ``d_i`` a position partial (d/dq^i).  The
bracket of a canonical pair is ``vertical_bracket(p1, q1) = +1``; getting
this sign wrong is the classic failure mode, so every formula below is
written against that normalization.

Time is a base coordinate here, not a canonical variable: the bracket reads
no t-derivatives, and its symplectic leaves are the constant-time slices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .expr import Gradient, ScalarField

__all__ = [
    "PhasePoint", "SystemSpec", "VerticalTangent",
    "vertical_bracket", "hamiltonian_vector_field", "gamma_H",
    "lie_derivative", "bracket_gradient", "commutator_defect",
    "gamma_commutator_defect",
]


@dataclass(frozen=True)
class PhasePoint:
    """A point (t, q^1..q^m, p_1..p_m); all entries finite."""
    t: float
    q: tuple
    p: tuple

    def __post_init__(self):
        object.__setattr__(self, "q", tuple(float(v) for v in self.q))
        object.__setattr__(self, "p", tuple(float(v) for v in self.p))
        object.__setattr__(self, "t", float(self.t))
        if len(self.q) != len(self.p):
            raise ValueError("q and p must have equal length")
        if not all(map(math.isfinite, (self.t, *self.q, *self.p))):
            raise ValueError("phase point entries must be finite")

    @property
    def m(self) -> int:
        return len(self.q)


@dataclass(frozen=True)
class VerticalTangent:
    """Tangent vector with dt fixed (0 for Hamiltonian fields, 1 for the
    Hamilton vector field)."""
    dt: float
    dq: np.ndarray
    dp: np.ndarray


@dataclass(frozen=True)
class SystemSpec:
    """A Hamiltonian plus declared candidate integrals of motion."""
    m: int
    H: ScalarField
    integrals: tuple = ()
    name: str = ""
    catalog: Optional[str] = field(default=None, compare=False)

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("m must be >= 1")
        if self.H.m != self.m:
            raise ValueError("Hamiltonian degree count does not match system")
        object.__setattr__(self, "integrals", tuple(self.integrals))
        for phi in self.integrals:
            if phi.m != self.m:
                raise ValueError(f"integral {phi.name!r} has wrong m")

    @property
    def n(self) -> int:
        return len(self.integrals)


def _check_vertical(*fields):
    for f in fields:
        if getattr(f, "allow_p0", False):
            raise ValueError(f"{f!r} references p0; vertical operations "
                             "require fields on the time-dependent phase space")


def _bracket_from_gradients(gf: Gradient, gg: Gradient) -> float:
    return float(np.dot(gf.dp, gg.dq) - np.dot(gg.dp, gf.dq))


def vertical_bracket(f, g, x: PhasePoint) -> float:
    """Poisson bracket sum_i (df/dp_i dg/dq^i - dg/dp_i df/dq^i) at x."""
    _check_vertical(f, g)
    gf = f.gradient_at(x.t, x.q, x.p)
    gg = g.gradient_at(x.t, x.q, x.p)
    return _bracket_from_gradients(gf, gg)


def hamiltonian_vector_field(f, x: PhasePoint) -> VerticalTangent:
    """The vertical vector field of f: dq^i = df/dp_i, dp_i = -df/dq^i."""
    _check_vertical(f)
    gf = f.gradient_at(x.t, x.q, x.p)
    return VerticalTangent(dt=0.0, dq=gf.dp.copy(), dp=-gf.dq)


def gamma_H(system: SystemSpec, x: PhasePoint) -> VerticalTangent:
    """The Hamilton vector field: dt = 1, dq = dH/dp, dp = -dH/dq."""
    gh = system.H.gradient_at(x.t, x.q, x.p)
    return VerticalTangent(dt=1.0, dq=gh.dp.copy(), dp=-gh.dq)


def lie_derivative(system: SystemSpec, F, x: PhasePoint) -> float:
    """dF/dt + {H, F} at x; F is an integral of motion iff this vanishes
    identically."""
    _check_vertical(F)
    gh = system.H.gradient_at(x.t, x.q, x.p)
    gf = F.gradient_at(x.t, x.q, x.p)
    return gf.dt + _bracket_from_gradients(gh, gf)


# -- second-order machinery ---------------------------------------------------

def _slices(m: int):
    return slice(1, m + 1), slice(m + 1, 2 * m + 1)


def bracket_gradient(f, g, x: PhasePoint) -> np.ndarray:
    """Gradient over (t, q, p) of the field {f, g}, from exact Hessians."""
    _check_vertical(f, g)
    m = x.m
    Q, P = _slices(m)
    hf = f.hessian_at(x.t, x.q, x.p)
    hg = g.hessian_at(x.t, x.q, x.p)
    gf, gg = hf.gradient, hg.gradient
    return (hf.matrix[P, :].T @ gg.dq + hg.matrix[Q, :].T @ gf.dp
            - hg.matrix[P, :].T @ gf.dq - hf.matrix[Q, :].T @ gg.dp)


def _field_jacobian(hess_matrix: np.ndarray, m: int) -> np.ndarray:
    """Jacobian over (q, p) of the Hamiltonian vector field of a function
    with the given Hessian (components ordered q-block then p-block)."""
    Q, P = _slices(m)
    Z = slice(1, 2 * m + 1)
    top = hess_matrix[P, Z]
    bottom = -hess_matrix[Q, Z]
    return np.vstack([top, bottom])


def commutator_defect(f, g, x: PhasePoint) -> np.ndarray:
    """Componentwise difference [X_f, X_g] - X_{f,g} at x (2m entries).

    The commutator is assembled from exact Hessians rather than flow
    composition, so integrator error never enters this algebraic identity;
    the result is zero up to round-off for smooth fields.
    """
    _check_vertical(f, g)
    m = x.m
    hf = f.hessian_at(x.t, x.q, x.p)
    hg = g.hessian_at(x.t, x.q, x.p)
    Xf = np.concatenate([hf.gradient.dp, -hf.gradient.dq])
    Xg = np.concatenate([hg.gradient.dp, -hg.gradient.dq])
    Df = _field_jacobian(hf.matrix, m)
    Dg = _field_jacobian(hg.matrix, m)
    commutator = Dg @ Xf - Df @ Xg

    grad_b = bracket_gradient(f, g, x)
    Q, P = _slices(m)
    X_bracket = np.concatenate([grad_b[P], -grad_b[Q]])
    return commutator - X_bracket


def gamma_commutator_defect(system: SystemSpec, F, x: PhasePoint) -> np.ndarray:
    """Defect of [gamma_H, X_F] = X_{dF/dt + {H,F}} at x (2m entries).

    Vanishes identically for any smooth F; in particular, when F is an
    integral of motion the flows of gamma_H and X_F commute to second order.
    """
    _check_vertical(F)
    m = x.m
    Q, P = _slices(m)
    hh = system.H.hessian_at(x.t, x.q, x.p)
    hf = F.hessian_at(x.t, x.q, x.p)

    Y = np.concatenate([hf.gradient.dp, -hf.gradient.dq])
    gamma_z = np.concatenate([hh.gradient.dp, -hh.gradient.dq])
    DY = _field_jacobian(hf.matrix, m)
    Dgamma = _field_jacobian(hh.matrix, m)
    dt_Y = np.concatenate([hf.matrix[P, 0], -hf.matrix[Q, 0]])
    commutator = dt_Y + DY @ gamma_z - Dgamma @ Y

    grad_L = hf.matrix[0, :] + bracket_gradient(system.H, F, x)
    X_L = np.concatenate([grad_L[P], -grad_L[Q]])
    return commutator - X_L
