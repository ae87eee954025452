"""Finite probability blocks, truncated product systems and conformality checks.

A block is a finite group carrying a full-support probability measure mu and a
positive potential H.  The translation cocycle O(g,h) = log mu(gh) - log mu(h)
has, for every inverse temperature beta, a unique conformal measure given by
the normalized beta-th power of mu; everything downstream is built from these
blocks and their finite products.
"""

from dataclasses import dataclass, field
import itertools
import math
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import logsumexp

from .errors import InvalidInputError, UnsupportedGeneratorError

NORM_TOL = 1e-12       # accepted deviation of a probability vector from 1
RENORM_LIMIT = 1e-9    # constructors renormalize below this, reject above
MAX_TABLE_ORDER = 64   # explicit multiplication tables only up to this order


def _require_finite(x, name):
    if not math.isfinite(x):
        raise InvalidInputError(f"{name} must be finite, got {x!r}")


@dataclass(frozen=True)
class FiniteGroupTable:
    """Explicit finite group: multiplication table, inverses and identity.

    Elements are the indices 0..order-1.  Tables are validated exhaustively on
    construction, which is why the order is capped at MAX_TABLE_ORDER.
    """

    order: int
    mul: Tuple[Tuple[int, ...], ...]
    inv: Tuple[int, ...]
    identity: int

    def __post_init__(self):
        n = self.order
        if n < 1 or n > MAX_TABLE_ORDER:
            raise InvalidInputError(f"group order {n} outside 1..{MAX_TABLE_ORDER}")
        if len(self.mul) != n or any(len(row) != n for row in self.mul):
            raise InvalidInputError("multiplication table has wrong shape")
        e = self.identity
        for x in range(n):
            if self.mul[e][x] != x or self.mul[x][e] != x:
                raise InvalidInputError("identity is not two-sided neutral")
            ix = self.inv[x]
            if self.mul[ix][x] != e or self.mul[x][ix] != e:
                raise InvalidInputError(f"inv({x}) is not a two-sided inverse")
        for x in range(n):
            for y in range(n):
                for z in range(n):
                    if self.mul[self.mul[x][y]][z] != self.mul[x][self.mul[y][z]]:
                        raise InvalidInputError("multiplication is not associative")

    @classmethod
    def cyclic(cls, n: int) -> "FiniteGroupTable":
        mul = tuple(tuple((i + j) % n for j in range(n)) for i in range(n))
        inv = tuple((-i) % n for i in range(n))
        return cls(order=n, mul=mul, inv=inv, identity=0)


@dataclass(frozen=True)
class ProbVector:
    """Full-support probability weights on a finite index set."""

    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 1 or w.size == 0:
            raise InvalidInputError("weights must be a nonempty 1-d array")
        if not np.all(np.isfinite(w)) or np.any(w <= 0.0):
            raise InvalidInputError("weights must be strictly positive and finite")
        s = float(w.sum())
        if abs(s - 1.0) > RENORM_LIMIT:
            raise InvalidInputError(f"weights sum to {s!r}, too far from 1 to renormalize")
        if abs(s - 1.0) > NORM_TOL:
            w = w / s
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    def __len__(self):
        return self.weights.size

    @property
    def log_weights(self) -> np.ndarray:
        return np.log(self.weights)

    @classmethod
    def uniform(cls, n: int) -> "ProbVector":
        return cls(np.full(n, 1.0 / n))


@dataclass(frozen=True)
class FiniteConformalBlock:
    """One finite block: group, base measure mu and potential H in [1/a, a].

    The group table is optional; blocks produced by the large staged
    constructions only carry their order, since no downstream computation on
    them needs explicit multiplication.
    """

    base_measure: ProbVector
    potential: np.ndarray
    base: float
    group: Optional[FiniteGroupTable] = None

    def __post_init__(self):
        h = np.asarray(self.potential, dtype=float)
        if h.shape != (len(self.base_measure),):
            raise InvalidInputError("potential must have one value per group element")
        if not np.all(np.isfinite(h)) or np.any(h <= 0.0):
            raise InvalidInputError("potential values must be strictly positive")
        a = float(self.base)
        if not a > 1.0:
            raise InvalidInputError("block base must exceed 1")
        if np.any(h > a * (1 + 1e-12)) or np.any(h < (1 + 1e-12) / a):
            raise InvalidInputError("potential values must lie in [1/a, a]")
        if self.group is not None and self.group.order != len(self.base_measure):
            raise InvalidInputError("group order does not match measure length")
        h.setflags(write=False)
        object.__setattr__(self, "potential", h)

    @property
    def order(self) -> int:
        return len(self.base_measure)


def conformal_weights(block: FiniteConformalBlock, beta: float) -> ProbVector:
    """Unique conformal measure of the block's translation cocycle at beta.

    Returns the normalized beta-th power of the base measure, computed in the
    log domain so that |beta| * |log min weight| up to ~700 cannot overflow.
    """
    _require_finite(beta, "beta")
    logw = beta * block.base_measure.log_weights
    return ProbVector(np.exp(logw - logsumexp(logw)))


def integrate_potential(block: FiniteConformalBlock, beta: float) -> float:
    """Value of the block factor: integral of H^beta against the beta-conformal measure."""
    _require_finite(beta, "beta")
    logw = beta * block.base_measure.log_weights
    return float(math.exp(logsumexp(beta * np.log(block.potential) + logw) - logsumexp(logw)))


def cohomologous_transform(measure: ProbVector, H: Sequence[float], beta: float) -> ProbVector:
    """Reweight a measure by exp(beta * H) and renormalize.

    H enters as an exponent, so applying the transform again with -H inverts
    it up to rounding.
    """
    _require_finite(beta, "beta")
    h = np.asarray(H, dtype=float)
    if h.shape != (len(measure),):
        raise InvalidInputError("H must be defined on the same index set as the measure")
    logw = measure.log_weights + beta * h
    return ProbVector(np.exp(logw - logsumexp(logw)))


def product_measure(blocks: Sequence[FiniteConformalBlock], beta: float) -> List[ProbVector]:
    """Per-block conformal weights; the truncation measure is their product."""
    return [conformal_weights(b, beta) for b in blocks]


@dataclass(frozen=True)
class TruncatedProductSystem:
    """A finite prefix of an infinite product of blocks plus a tail bound.

    tail_bound must dominate |log prod_{n>N} integral H_n^beta dmu_{n,beta}|
    over the declared beta range; it is carried into every certified tolerance.
    """

    blocks: Tuple[FiniteConformalBlock, ...]
    tail_bound: float = 0.0

    def __post_init__(self):
        if self.tail_bound < 0.0:
            raise InvalidInputError("tail_bound must be nonnegative")
        object.__setattr__(self, "blocks", tuple(self.blocks))

    @property
    def orders(self) -> Tuple[int, ...]:
        return tuple(b.order for b in self.blocks)

    def configurations(self):
        return itertools.product(*(range(n) for n in self.orders))

    def measure_on_truncation(self, beta: float) -> dict:
        """Product conformal measure as a dict {configuration tuple: mass}."""
        per_block = product_measure(self.blocks, beta)
        out = {}
        for cfg in self.configurations():
            m = 1.0
            for i, c in enumerate(cfg):
                m *= per_block[i].weights[c]
            out[cfg] = m
        return out

    @staticmethod
    def tail_bound_from_schedule(bases: Sequence[float], beta_max: float) -> float:
        """Tail bound |log prod integral H_n^beta| <= |beta| sum log a_n for omitted blocks."""
        return abs(beta_max) * float(sum(math.log(a) for a in bases))


@dataclass(frozen=True)
class ConformalityReport:
    max_defect: float
    tol: float

    @property
    def passed(self) -> bool:
        return self.max_defect <= self.tol


def check_conformality(system: TruncatedProductSystem,
                       measure: dict,
                       beta: float,
                       generators: Sequence[Tuple[int, int]],
                       tol: float) -> ConformalityReport:
    """Brute-force conformality defect of a measure on the truncation.

    Each generator is a pair (block index, group element) acting by left
    translation on that coordinate.  For every generator g and every
    configuration indicator f the defect
    | integral f o phi_g e^{beta O(g,.)} dm  -  integral f dm |
    is computed exactly; the report carries the maximum.
    """
    _require_finite(beta, "beta")
    n_blocks = len(system.blocks)
    for i, _ in generators:
        if not 0 <= i < n_blocks:
            raise UnsupportedGeneratorError(f"generator block index {i} outside truncation")
        if system.blocks[i].group is None:
            raise UnsupportedGeneratorError(f"block {i} carries no explicit group table")

    max_defect = 0.0
    for i, g in generators:
        block = system.blocks[i]
        table = block.group
        logmu = block.base_measure.log_weights
        ginv = table.inv[g]
        for cfg in system.configurations():
            # integral of the indicator of cfg composed with phi_g picks out
            # the unique preimage x = g^{-1} . cfg
            pre = list(cfg)
            pre[i] = table.mul[ginv][cfg[i]]
            pre = tuple(pre)
            omega = logmu[cfg[i]] - logmu[pre[i]]
            defect = abs(math.exp(beta * omega) * measure[pre] - measure[cfg])
            if defect > max_defect:
                max_defect = defect
    return ConformalityReport(max_defect=max_defect, tol=tol)


@dataclass(frozen=True)
class CylinderFunction:
    """A function on a product space depending on finitely many coordinates."""

    window: Tuple[int, ...]
    shape: Tuple[int, ...]
    table: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.table, dtype=float)
        if t.shape != tuple(self.shape):
            raise InvalidInputError("table shape does not match window shape")
        t.setflags(write=False)
        object.__setattr__(self, "table", t)
        object.__setattr__(self, "window", tuple(self.window))
        object.__setattr__(self, "shape", tuple(self.shape))

    def __call__(self, configuration: Sequence[int]) -> float:
        idx = tuple(configuration[i] for i in self.window)
        return float(self.table[idx])


# ---------------------------------------------------------------------------
# Serialization: one record per block, decimal strings via repr() so the
# round trip is bit-faithful.

def blocks_to_text(blocks: Sequence[FiniteConformalBlock]) -> str:
    lines = []
    for b in blocks:
        lines.append("block")
        lines.append(f"order {b.order}")
        lines.append(f"base {b.base!r}")
        lines.append("weights " + " ".join(repr(float(w)) for w in b.base_measure.weights))
        lines.append("potential " + " ".join(repr(float(h)) for h in b.potential))
        if b.group is None:
            lines.append("group none")
        else:
            lines.append(f"group table identity={b.group.identity}")
            for row in b.group.mul:
                lines.append("row " + " ".join(str(x) for x in row))
    return "\n".join(lines) + "\n"


def blocks_from_text(text: str) -> List[FiniteConformalBlock]:
    blocks = []
    it = iter(text.strip().splitlines())
    for line in it:
        if line != "block":
            raise InvalidInputError(f"expected 'block', got {line!r}")
        order = int(next(it).split()[1])
        base = float(next(it).split()[1])
        weights = np.array([float(x) for x in next(it).split()[1:]])
        potential = np.array([float(x) for x in next(it).split()[1:]])
        gline = next(it)
        group = None
        if gline != "group none":
            identity = int(gline.split("identity=")[1])
            mul = tuple(tuple(int(x) for x in next(it).split()[1:]) for _ in range(order))
            inv = [0] * order
            for x in range(order):
                for y in range(order):
                    if mul[x][y] == identity:
                        inv[x] = y
            group = FiniteGroupTable(order=order, mul=mul, inv=tuple(inv), identity=identity)
        blocks.append(FiniteConformalBlock(base_measure=ProbVector(weights),
                                           potential=potential, base=base, group=group))
    return blocks
