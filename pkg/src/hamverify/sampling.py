"""Low-discrepancy sampling of phase-space boxes.

Pointwise identities are falsified by any finite sample, so checks run over
scrambled Halton points in a configurable box.  Degeneracy loci (e.g. zero
oscillator energy) are removed by an explicit exclusion predicate rather
than silently, keeping the sampled region visible in configuration.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.stats import qmc

from .errors import DegenerateSampleBox
from .lift import ExtendedPoint
from .phase_space import PhasePoint

__all__ = ["Box", "sample_phase_points", "sample_extended_points"]

_MAX_ROUNDS = 64


@dataclass(frozen=True)
class Box:
    """Axis-aligned sampling region; one (lo, hi) interval per coordinate."""
    t_range: tuple
    q_ranges: tuple
    p_ranges: tuple
    p0_range: tuple = (-2.0, 2.0)

    @classmethod
    def default(cls, m: int) -> "Box":
        return cls(t_range=(0.0, 2.0),
                   q_ranges=((-2.0, 2.0),) * m,
                   p_ranges=((-2.0, 2.0),) * m)

    @property
    def m(self) -> int:
        return len(self.q_ranges)

    def bounds(self, with_p0: bool):
        ranges = [self.t_range, *self.q_ranges, *self.p_ranges]
        if with_p0:
            ranges.append(self.p0_range)
        lows = [r[0] for r in ranges]
        highs = [r[1] for r in ranges]
        return lows, highs


def _sample(box: Box, count: int, seed: int, with_p0: bool,
            make_point: Callable, exclusion: Optional[Callable]):
    if count < 1:
        raise ValueError("sample count must be >= 1")
    dim = 1 + 2 * box.m + (1 if with_p0 else 0)
    lows, highs = box.bounds(with_p0)
    halton = qmc.Halton(d=dim, scramble=True, seed=seed)
    points = []
    for _ in range(_MAX_ROUNDS):
        raw = qmc.scale(halton.random(max(count, 64)), lows, highs)
        for row in raw:
            point = make_point(row)
            if exclusion is not None and exclusion(point):
                continue
            points.append(point)
            if len(points) == count:
                return points
    raise DegenerateSampleBox(
        f"exclusion predicate rejected nearly all of {_MAX_ROUNDS} sampling rounds")


def sample_phase_points(box: Box, count: int, seed: int,
                        exclusion: Optional[Callable] = None) -> list:
    """Halton-sample points (t, q, p); drop those with exclusion(point) true."""
    m = box.m

    def make(row):
        return PhasePoint(t=row[0], q=row[1:m + 1], p=row[m + 1:2 * m + 1])
    return _sample(box, count, seed, False, make, exclusion)


def sample_extended_points(box: Box, count: int, seed: int,
                           exclusion: Optional[Callable] = None) -> list:
    """Halton-sample extended points (t, q, p0, p); the exclusion predicate
    is evaluated on the projected phase point."""
    m = box.m

    def make(row):
        return ExtendedPoint(t=row[0], q=row[1:m + 1], p0=row[2 * m + 1],
                             p=row[m + 1:2 * m + 1])

    if exclusion is None:
        return _sample(box, count, seed, True, make, None)

    def exclude_projected(X):
        return exclusion(PhasePoint(t=X.t, q=X.q, p=X.p))
    return _sample(box, count, seed, True, make, exclude_projected)
