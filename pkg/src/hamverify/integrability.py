"""Sampled verification of integrability structure.

A system with n declared integrals is probed for:

* independence -- the n x (2m+1) Jacobian of the integrals has rank n;
* bracket closure -- every pairwise bracket B_ab = {Phi_a, Phi_b} is
  functionally dependent on the integrals, tested by the augmented-rank
  criterion rank([DPhi; DB_ab]) = n (no fitted structure functions, no
  regression hyperparameters);
* constant corank -- the antisymmetric bracket-value matrix has corank
  k = 2m - n at every sample;
* integral residuals -- dPhi/dt + {H, Phi} vanishes;
* the lifted picture -- {Hstar, Phi_a} = 0 on the extended space, and the
  bordered (n+1) x (n+1) matrix keeps corank 2m+1-n;
* involution -- for the n = m case, all pairwise brackets vanish.

Derivatives are exact (dual numbers), so the rank tolerances below guard
against round-off only.  All verdicts are sampled evidence: a finite sample
cannot certify a condition "at all points", and reports say so.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import WrongCount
from .lift import ExtendedPoint, extended_bracket, lift_system, project
from .phase_space import (PhasePoint, SystemSpec, bracket_gradient,
                          lie_derivative, vertical_bracket)

__all__ = [
    "RANK_REL_TOL", "RANK_ABS_FLOOR", "RESIDUAL_TOL", "INVOLUTION_TOL",
    "LIFTED_TOL", "CONSENSUS_SHARE", "decided_rank",
    "RankSample", "RankReport", "StructureMatrix", "ClosureReport",
    "CorankReport", "InvolutionReport", "ResidualReport", "LiftedReport",
    "VerifierVerdict", "full_jacobian", "independence_check", "closure_check",
    "structure_matrix", "corank_check", "involution_check",
    "integrals_residual", "lifted_report", "verify_superintegrable",
    "verify_complete",
]

# Singular value s_i counts as nonzero iff s_i > max(REL * s_1, ABS floor).
RANK_REL_TOL = 1e-9
RANK_ABS_FLOOR = 1e-12
RESIDUAL_TOL = 1e-10
INVOLUTION_TOL = 1e-10
LIFTED_TOL = 1e-10
CONSENSUS_SHARE = 0.95


def decided_rank(singular_values: np.ndarray) -> int:
    if singular_values.size == 0:
        return 0
    cutoff = max(RANK_REL_TOL * float(singular_values[0]), RANK_ABS_FLOOR)
    return int(np.sum(singular_values > cutoff))


def _point_tuple(x) -> tuple:
    if isinstance(x, ExtendedPoint):
        return (x.t, *x.q, x.p0, *x.p)
    return (x.t, *x.q, *x.p)


@dataclass
class RankSample:
    point: tuple
    singular_values: np.ndarray
    rank: int

    def as_dict(self):
        return {"point": list(self.point),
                "singular_values": [float(s) for s in self.singular_values],
                "rank": self.rank}


@dataclass
class RankReport:
    expected: int
    consensus_rank: Optional[int]
    consensus_share: float
    failures: list
    passed: bool
    n_samples: int

    def as_dict(self):
        return {"expected_rank": self.expected,
                "consensus_rank": self.consensus_rank,
                "consensus_share": self.consensus_share,
                "n_samples": self.n_samples,
                "passed": self.passed,
                "failures": [f.as_dict() for f in self.failures]}


@dataclass
class StructureMatrix:
    """Bracket values {Phi_a, Phi_b} at one point, with the integral values
    (the image coordinates of the point) alongside."""
    point: tuple
    values: np.ndarray
    phi_values: np.ndarray


@dataclass
class PairEvidence:
    alpha: int
    beta: int
    passed: bool
    witness: Optional[RankSample] = None

    def as_dict(self):
        out = {"pair": [self.alpha + 1, self.beta + 1], "passed": self.passed}
        if self.witness is not None:
            out["witness"] = self.witness.as_dict()
        return out


@dataclass
class ClosureReport:
    pairs: list
    passed: bool

    def as_dict(self):
        return {"passed": self.passed,
                "pairs": [p.as_dict() for p in self.pairs]}


@dataclass
class CorankReport:
    corank: Optional[int]
    constant: bool
    expected: int
    passed: bool
    witness: Optional[RankSample] = None

    def as_dict(self):
        out = {"corank": self.corank, "constant": self.constant,
               "expected_corank": self.expected, "passed": self.passed}
        if self.witness is not None:
            out["witness"] = self.witness.as_dict()
        return out


@dataclass
class ResidualReport:
    per_integral: dict
    max_residual: float
    tolerance: float
    passed: bool

    def as_dict(self):
        return {"per_integral": self.per_integral,
                "max_residual": self.max_residual,
                "tolerance": self.tolerance, "passed": self.passed}


@dataclass
class InvolutionReport:
    max_bracket: float
    independence: RankReport
    tolerance: float
    passed: bool

    def as_dict(self):
        return {"max_bracket": self.max_bracket,
                "independence": self.independence.as_dict(),
                "tolerance": self.tolerance, "passed": self.passed}


@dataclass
class LiftedReport:
    max_s0: float
    corank: Optional[int]
    constant: bool
    expected_corank: int
    passed: bool

    def as_dict(self):
        return {"max_s0": self.max_s0, "bordered_corank": self.corank,
                "constant": self.constant,
                "expected_corank": self.expected_corank, "passed": self.passed}


def full_jacobian(system: SystemSpec, x: PhasePoint) -> np.ndarray:
    """Rows (dPhi/dt, dPhi/dq, dPhi/dp) for each integral; columns ordered
    t, q1..qm, p1..pm."""
    if system.n < 1:
        raise ValueError("system declares no integrals")
    rows = []
    for phi in system.integrals:
        g = phi.gradient_at(x.t, x.q, x.p)
        rows.append(np.concatenate([[g.dt], g.dq, g.dp]))
    return np.array(rows)


def independence_check(system: SystemSpec, samples: Sequence[PhasePoint],
                       quota: int = 0) -> RankReport:
    """Rank of the integral Jacobian must equal n at (almost) every sample."""
    n = system.n
    rank_samples = []
    for x in samples:
        sv = np.linalg.svd(full_jacobian(system, x), compute_uv=False)
        rank_samples.append(RankSample(_point_tuple(x), sv, decided_rank(sv)))
    ranks = [s.rank for s in rank_samples]
    values, counts = np.unique(ranks, return_counts=True)
    best = int(np.argmax(counts))
    consensus = int(values[best])
    share = float(counts[best]) / len(ranks)
    failures = [s for s in rank_samples if s.rank != consensus]
    passed = (consensus == n and share >= CONSENSUS_SHARE
              and len(failures) <= quota)
    return RankReport(expected=n, consensus_rank=consensus,
                      consensus_share=share, failures=failures,
                      passed=passed, n_samples=len(ranks))


def closure_check(system: SystemSpec, samples: Sequence[PhasePoint]) -> ClosureReport:
    """Augmented-rank surrogate for bracket closure.

    For the bracket field B_ab of each integral pair, appending grad(B_ab)
    to the integral Jacobian must not raise its rank: that is precisely
    local functional dependence of B_ab on the integrals.  Branch-ambiguous
    structure functions (Kepler-style square roots) still pass wherever a
    single branch covers the sampled box.
    """
    n = system.n
    pairs = []
    all_passed = True
    for alpha in range(n):
        for beta in range(alpha + 1, n):
            witness = None
            passed = True
            for x in samples:
                jac = full_jacobian(system, x)
                row = bracket_gradient(system.integrals[alpha],
                                       system.integrals[beta], x)
                sv = np.linalg.svd(np.vstack([jac, row]), compute_uv=False)
                if decided_rank(sv) != n:
                    passed = False
                    witness = RankSample(_point_tuple(x), sv, decided_rank(sv))
                    break
            pairs.append(PairEvidence(alpha, beta, passed, witness))
            all_passed &= passed
    return ClosureReport(pairs=pairs, passed=all_passed)


def structure_matrix(system: SystemSpec, x: PhasePoint) -> StructureMatrix:
    n = system.n
    grads = [phi.gradient_at(x.t, x.q, x.p) for phi in system.integrals]
    values = np.zeros((n, n))
    for a in range(n):
        for b in range(a + 1, n):
            v = float(np.dot(grads[a].dp, grads[b].dq)
                      - np.dot(grads[b].dp, grads[a].dq))
            values[a, b] = v
            values[b, a] = -v
    phi_values = np.array([g.value for g in grads])
    return StructureMatrix(point=_point_tuple(x), values=values,
                           phi_values=phi_values)


def _corank_over(matrices, size: int, expected: int):
    coranks = []
    witness = None
    for point, mat in matrices:
        sv = np.linalg.svd(mat, compute_uv=False)
        coranks.append(size - decided_rank(sv))
        if coranks[-1] != expected and witness is None:
            witness = RankSample(point, sv, decided_rank(sv))
    constant = len(set(coranks)) == 1
    corank = coranks[0] if constant else None
    passed = constant and corank == expected
    return corank, constant, passed, witness


def corank_check(system: SystemSpec, samples: Sequence[PhasePoint]) -> CorankReport:
    """Corank of the sampled structure matrix; must be 2m - n everywhere."""
    expected = 2 * system.m - system.n
    mats = [(_point_tuple(x), structure_matrix(system, x).values) for x in samples]
    corank, constant, passed, witness = _corank_over(mats, system.n, expected)
    return CorankReport(corank=corank, constant=constant, expected=expected,
                        passed=passed, witness=witness)


def involution_check(system: SystemSpec, samples: Sequence[PhasePoint],
                     tolerance: float = INVOLUTION_TOL) -> InvolutionReport:
    """Complete-integrability check: n = m, pairwise brackets vanish,
    differentials independent."""
    if system.n != system.m:
        raise WrongCount(f"involution check needs n = m, got n={system.n}, "
                         f"m={system.m}")
    worst = 0.0
    for x in samples:
        mat = structure_matrix(system, x).values
        worst = max(worst, float(np.max(np.abs(mat))) if mat.size else 0.0)
    rank_rep = independence_check(system, samples)
    passed = worst < tolerance and rank_rep.passed
    return InvolutionReport(max_bracket=worst, independence=rank_rep,
                            tolerance=tolerance, passed=passed)


def integrals_residual(system: SystemSpec, samples: Sequence[PhasePoint],
                       tolerance: float = RESIDUAL_TOL) -> ResidualReport:
    """Max |dPhi/dt + {H, Phi}| per declared integral over the samples."""
    per = {}
    for i, phi in enumerate(system.integrals, start=1):
        name = phi.name or f"phi{i}"
        per[name] = max(abs(lie_derivative(system, phi, x)) for x in samples)
    worst = max(per.values()) if per else 0.0
    return ResidualReport(per_integral=per, max_residual=worst,
                          tolerance=tolerance, passed=worst < tolerance)


def lifted_report(system: SystemSpec,
                  ext_samples: Sequence[ExtendedPoint],
                  tolerance: float = LIFTED_TOL) -> LiftedReport:
    """Extended-space picture: brackets of Hstar with the pulled-back
    integrals vanish, and the bordered bracket matrix (s_0a; s_ab) keeps
    corank 2m+1-n."""
    n = system.n
    lifted = lift_system(system)
    expected = 2 * system.m + 1 - n
    max_s0 = 0.0
    mats = []
    for X in ext_samples:
        s0 = np.array([extended_bracket(lifted.Hstar, phi, X)
                       for phi in system.integrals])
        max_s0 = max(max_s0, float(np.max(np.abs(s0))) if s0.size else 0.0)
        inner = structure_matrix(system, project(X)).values
        bordered = np.zeros((n + 1, n + 1))
        bordered[0, 1:] = s0
        bordered[1:, 0] = -s0
        bordered[1:, 1:] = inner
        mats.append((_point_tuple(X), bordered))
    corank, constant, corank_ok, _ = _corank_over(mats, n + 1, expected)
    passed = max_s0 < tolerance and corank_ok
    return LiftedReport(max_s0=max_s0, corank=corank, constant=constant,
                        expected_corank=expected, passed=passed)


@dataclass
class VerifierVerdict:
    """Aggregated verdict; all sub-reports are sampled evidence, not proofs."""
    system: str
    m: int
    n: int
    expected_corank: int
    independence: Optional[RankReport] = None
    closure: Optional[ClosureReport] = None
    corank: Optional[CorankReport] = None
    residuals: Optional[ResidualReport] = None
    lifted: Optional[LiftedReport] = None
    involution: Optional[InvolutionReport] = None
    evidence: str = "sampled"

    @property
    def overall(self) -> bool:
        reports = [r for r in (self.independence, self.closure, self.corank,
                               self.residuals, self.lifted, self.involution)
                   if r is not None]
        return bool(reports) and all(r.passed for r in reports)

    def as_dict(self):
        out = {"system": self.system, "m": self.m, "n": self.n,
               "expected_corank": self.expected_corank,
               "evidence": self.evidence, "overall": self.overall}
        for key in ("independence", "closure", "corank", "residuals",
                    "lifted", "involution"):
            rep = getattr(self, key)
            if rep is not None:
                out[key] = rep.as_dict()
        return out


def verify_superintegrable(system: SystemSpec,
                           samples: Sequence[PhasePoint],
                           ext_samples: Sequence[ExtendedPoint],
                           quota: int = 0) -> VerifierVerdict:
    """Run the full superintegrability battery (m <= n < 2m expected).

    Closure presupposes rank n, so it is skipped (left None) when the
    independence check fails.
    """
    if not (system.m <= system.n < 2 * system.m):
        raise WrongCount(f"superintegrability needs m <= n < 2m, got "
                         f"n={system.n}, m={system.m}")
    verdict = VerifierVerdict(system=system.name, m=system.m, n=system.n,
                              expected_corank=2 * system.m - system.n)
    verdict.residuals = integrals_residual(system, samples)
    verdict.independence = independence_check(system, samples, quota)
    if verdict.independence.passed:
        verdict.closure = closure_check(system, samples)
    verdict.corank = corank_check(system, samples)
    verdict.lifted = lifted_report(system, ext_samples)
    return verdict


def verify_complete(system: SystemSpec,
                    samples: Sequence[PhasePoint]) -> VerifierVerdict:
    """Run the complete-integrability battery (n = m)."""
    verdict = VerifierVerdict(system=system.name, m=system.m, n=system.n,
                              expected_corank=system.m)
    verdict.residuals = integrals_residual(system, samples)
    verdict.involution = involution_check(system, samples)
    return verdict
