"""Closed subsets of the line given by finitely many intervals and points."""

import math
from dataclasses import dataclass, field
from typing import Sequence, Tuple

import numpy as np

from .errors import InvalidInputError


@dataclass(frozen=True)
class ClosedSetSpec:
    """Finite union of disjoint closed intervals (endpoints may be +-inf) and
    isolated points, with an exact 1-Lipschitz distance function."""

    intervals: Tuple[Tuple[float, float], ...] = ()
    points: Tuple[float, ...] = ()

    def __post_init__(self):
        ivs = tuple((float(lo), float(hi)) for lo, hi in self.intervals)
        pts = tuple(float(p) for p in self.points)
        for lo, hi in ivs:
            if math.isnan(lo) or math.isnan(hi) or lo > hi:
                raise InvalidInputError(f"bad interval [{lo}, {hi}]")
            if lo == math.inf or hi == -math.inf:
                raise InvalidInputError("interval endpoints must bound a nonempty set")
        for p in pts:
            if not math.isfinite(p):
                raise InvalidInputError("points must be finite")
        srt = sorted(ivs)
        for (_, h1), (l2, _) in zip(srt, srt[1:]):
            if h1 >= l2:
                raise InvalidInputError("intervals must be disjoint")
        if not ivs and not pts:
            raise InvalidInputError("the set must be nonempty")
        object.__setattr__(self, "intervals", ivs)
        object.__setattr__(self, "points", pts)

    def distance(self, beta):
        betas = np.atleast_1d(np.asarray(beta, dtype=float))
        d = np.full_like(betas, np.inf)
        for lo, hi in self.intervals:
            # distance to [lo, hi] is max(lo - beta, beta - hi, 0)
            d = np.minimum(d, np.maximum.reduce(
                [lo - betas, betas - hi, np.zeros_like(betas)]))
        for p in self.points:
            d = np.minimum(d, np.abs(betas - p))
        return float(d[0]) if np.asarray(beta).ndim == 0 else d

    def contains(self, beta, tol: float = 0.0) -> bool:
        return bool(self.distance(float(beta)) <= tol)

    def is_bounded(self) -> bool:
        return all(math.isfinite(lo) and math.isfinite(hi)
                   for lo, hi in self.intervals)

    @classmethod
    def from_config(cls, spec: dict) -> "ClosedSetSpec":
        """Parse {"intervals": [[lo, hi], ...], "points": [p, ...]} with
        decimal-string numerics; "inf"/"-inf" are accepted as endpoints."""
        def num(s):
            return float(s)

        intervals = tuple((num(lo), num(hi))
                          for lo, hi in spec.get("intervals", []))
        points = tuple(num(p) for p in spec.get("points", []))
        return cls(intervals=intervals, points=points)
