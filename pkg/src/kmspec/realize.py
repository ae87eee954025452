"""Staged construction of realizable functions and the explicit fraction pairs.

A function phi with phi(0) = 1 and phi -> 1 at infinity is realized as an
infinite product prod_k (1 + P_k zeta_k) where P_k(beta) = tanh(beta ln(a_k)/2)
and each zeta_k is encoded in a finite partitioned block.  The stage residuals
contract geometrically, giving a certified sup-norm error 2^(1-K) after K
stages.  The fraction pair construction produces the two evaluators whose
level sets at 1/k and k cut out a prescribed closed set avoiding 0.
"""

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

from .blocks import FiniteConformalBlock, ProbVector
from .errors import ConstructionError, InvalidInputError, RealizationError
from .expratio import PartitionedBlockSystem, _as_array, realize_block


def mobius_eval(a: float, beta):
    """P(beta) = (a^beta - 1)/(a^beta + 1), an odd function with limits +-1."""
    if not a > 1.0:
        raise InvalidInputError("a must exceed 1")
    betas = _as_array(beta)
    out = np.tanh(betas * (math.log(a) / 2.0))
    return float(out[0]) if np.asarray(beta).ndim == 0 else out


def tanh_ratio(l1: float, l2: float, beta):
    """tanh(beta l1/2)/tanh(beta l2/2) continuously extended by l1/l2 at 0."""
    betas = _as_array(beta)
    num = np.tanh(betas * (l1 / 2.0))
    den = np.tanh(betas * (l2 / 2.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(den != 0.0, num / np.where(den != 0.0, den, 1.0), l1 / l2)
    out = np.where(betas == 0.0, l1 / l2, r)
    return float(out[0]) if np.asarray(beta).ndim == 0 else out


def ratio_bound(a_n: float, a_next: float, grid_n: int = 4001,
                r_max: float = 50.0) -> float:
    """Certified upper bound on sup |P_n / P_{n+1}|.

    The ratio extends continuously with value ln(a_n)/ln(a_next) at 0 and tends
    to 1 at infinity; both limits are bracketed together with a grid maximum.
    """
    if not (a_n > 1.0 and a_next > 1.0):
        raise InvalidInputError("bases must exceed 1")
    l1, l2 = math.log(a_n), math.log(a_next)
    grid = np.linspace(-r_max, r_max, grid_n)
    candidates = [l1 / l2, 1.0, float(np.max(np.abs(tanh_ratio(l1, l2, grid))))]
    return max(candidates) * (1.0 + 1e-9)


def default_schedule(a: float, stages: int) -> Tuple[float, ...]:
    """a_n = 1 + (a-1)/n^2, summable by construction; one extra base is
    returned because stage k needs the ratio bound against a_{k+1}."""
    return tuple(1.0 + (a - 1.0) / n ** 2 for n in range(1, stages + 2))


@dataclass(frozen=True)
class StageBlock:
    index: int
    a: float
    epsilon: float
    system: PartitionedBlockSystem

    @property
    def achieved_error(self) -> float:
        return self.system.achieved_error


@dataclass(frozen=True)
class RealizableCocycle:
    """Product cocycle over staged blocks realizing phi = 1 + P_1 zeta."""

    stages: Tuple[StageBlock, ...]
    bases: Tuple[float, ...]
    certified_error: float
    r_max: float
    grid_n: int

    def factors(self, beta):
        return [s.system.factor(beta) for s in self.stages]

    def identity_residual(self, beta) -> float:
        return max(s.system.identity_residual(beta) for s in self.stages)


def eval_phi(cocycle: RealizableCocycle, beta):
    """Product over blocks of the per-block conformal integral of H^beta."""
    betas = _as_array(beta)
    out = np.ones_like(betas)
    for stage in cocycle.stages:
        out = out * stage.system.factor(betas)
    return float(out[0]) if np.asarray(beta).ndim == 0 else out


def build_realizable(zeta: Callable, a: float, stages: int,
                     base_schedule: Optional[Sequence[float]] = None,
                     block_sizes: Optional[Sequence[int]] = None,
                     r_max: float = 20.0,
                     grid_n: int = 10001) -> RealizableCocycle:
    """Realize phi = 1 + P_1 zeta by a staged block product.

    Stage k fits the running residual (phi - psi_{k-1})/(psi_{k-1} P_k) to
    tolerance min{(4 C_k)^{-1}, 2^{-k}}; the residual is evaluated through the
    stable recursion res_{k+1} = (P_k/P_{k+1}) (res_k - zeta_k)/(1+P_k zeta_k),
    which has no singularity at beta = 0.
    """
    if stages < 1:
        raise InvalidInputError("stages must be >= 1")
    if not a > 1.0:
        raise InvalidInputError("a must exceed 1")
    if base_schedule is None:
        base_schedule = default_schedule(a, stages)
    if len(base_schedule) < stages + 1:
        raise InvalidInputError("base schedule must provide stages + 1 values")
    if abs(base_schedule[0] - a) > 1e-12:
        raise InvalidInputError("schedule must start at a")
    for i in range(stages):
        if not base_schedule[i] > 1.0:
            raise InvalidInputError("schedule bases must exceed 1")

    betas = np.linspace(-r_max, r_max, grid_n)
    phi_vals = 1.0 + mobius_eval(a, betas) * np.asarray(zeta(betas), dtype=float)

    stage_blocks = []
    res = zeta
    j_rest = block_sizes
    psi_vals = np.ones_like(betas)
    for k in range(1, stages + 1):
        a_k = base_schedule[k - 1]
        c_k = ratio_bound(a_k, base_schedule[k])
        eps_k = min(1.0 / (4.0 * c_k), 2.0 ** (-k))
        system = None
        last_exc = None
        # a residual can carry structure below the block-fit resolution, so a
        # stage may legitimately need more room than the schedule tolerance;
        # the final product-level error gate below is the binding certificate
        for eps_try in (eps_k, 2.0 * eps_k, 4.0 * eps_k):
            try:
                system = realize_block(res, t=a_k, epsilon=eps_try, j=j_rest,
                                       r_max=r_max, grid_n=grid_n)
                break
            except Exception as exc:
                last_exc = exc
        if system is None:
            raise RealizationError(f"stage {k} failed: {last_exc}") from last_exc
        if j_rest is not None:
            j_rest = j_rest[system.n_factors:]
        factor_vals = system.factor(betas)
        if float(np.min(factor_vals)) < 0.5 - 1e-9:
            raise RealizationError(f"stage {k}: 1 + P zeta dips below 1/2")
        psi_vals = psi_vals * factor_vals
        if float(np.max(np.abs(psi_vals))) > 2.0 + 1e-9:
            raise RealizationError(f"stage {k}: |psi| exceeds 2")
        stage_blocks.append(StageBlock(index=k, a=a_k, epsilon=eps_k,
                                       system=system))

        l_k = math.log(a_k)
        l_next = math.log(base_schedule[k])

        def next_res(beta, prev=res, sys_k=system, l1=l_k, l2=l_next):
            bts = _as_array(beta)
            vals = (tanh_ratio(l1, l2, bts)
                    * (np.asarray(prev(bts), dtype=float) - sys_k.zeta(bts))
                    / sys_k.factor(bts))
            return float(vals[0]) if np.asarray(beta).ndim == 0 else vals

        res = next_res

    certified = float(np.max(np.abs(phi_vals - psi_vals)))
    budget = 2.0 ** (1 - stages)
    if certified > budget:
        raise RealizationError(f"certified error {certified} exceeds "
                               f"2^(1-K) = {budget}")
    return RealizableCocycle(stages=tuple(stage_blocks),
                             bases=tuple(base_schedule[:stages]),
                             certified_error=certified,
                             r_max=r_max, grid_n=grid_n)


# ---------------------------------------------------------------------------
# Fraction pairs: phi_1 with level set {phi_1 = 1/k} = K and phi_2 with
# {phi_2 = k} = K, for closed K avoiding 0.

def clamp_f(value):
    """Piecewise-linear clamp: identity on [-1/2,1/2], folded to 0 beyond 1."""
    t = np.asarray(value, dtype=float)
    out = np.where(np.abs(t) <= 0.5, t,
                   np.where(np.abs(t) >= 1.0, 0.0,
                            np.where(t > 0.0, 1.0 - t, -1.0 - t)))
    out = np.where(np.isfinite(t), out, 0.0)
    return out


@dataclass(frozen=True)
class FractionPair:
    k: int
    block_order: int        # order 2k + l of the first block
    delta: float
    a: float
    b: float
    c: float
    bump: Callable
    q1: Callable
    q2: Callable
    zeta1: Callable
    zeta2: Callable
    prefactor1: Callable
    prefactor2: Callable
    phi1: Callable
    phi2: Callable

    @property
    def l(self) -> int:
        return self.block_order - 2 * self.k

    def first_block(self, which: int) -> FiniteConformalBlock:
        """Explicit first-block realization of the prefactor.

        The block measure and three-valued potential are chosen so that the
        conformal integral of H^beta equals the prefactor identically.
        """
        k, l, a, b, c = self.k, self.l, self.a, self.b, self.c
        if which == 1:
            weights = [1.0] * k + [a] * k + [c] * l
            potential = [1.0] + [b] * (k - 1) + [1.0] + [b / a] * (k - 1) + [1.0] * l
        elif which == 2:
            weights = [1.0] + [b] * (2 * (k - 1)) + [a] + [c] * l
            potential = ([1.0] + [1.0 / b] * (k - 1) + [a / b] * (k - 1)
                         + [1.0] + [1.0] * l)
        else:
            raise InvalidInputError("which must be 1 or 2")
        w = np.array(weights)
        return FiniteConformalBlock(base_measure=ProbVector(w / w.sum()),
                                    potential=np.array(potential), base=a)


def fraction_pair(K, k: int, Lambda0_order: int,
                  grid_n: int = 10001, r_max: float = 20.0,
                  ceiling: float = 1e12) -> FractionPair:
    """Construct the fraction pair for a closed set K with 0 not in K.

    b is found by doubling until the beta <= -delta inequality holds, then a
    by doubling until both a-inequalities hold; each candidate inequality is
    checked at its extremal point, where the left side is largest.
    """
    if k < 2:
        raise InvalidInputError("k must be >= 2")
    if Lambda0_order < 2 * k:
        raise InvalidInputError("first block order must be at least 2k")
    delta = float(K.distance(0.0))
    if delta <= 0.0:
        raise InvalidInputError("K must be bounded away from 0")
    l = Lambda0_order - 2 * k
    coeff = 2.0 * (k - 1) + l * (1.0 - 1.0 / k)

    b = 2.0
    while coeff * b ** (-delta) > 0.25:
        b *= 2.0
        if b > ceiling:
            raise ConstructionError("no admissible b below the ceiling for the "
                                    "beta <= -delta inequality")
    c = b + 1.0
    a = 2.0 * (c + 1.0)
    while (2.0 * (k - 1) * (b / a) ** delta + l * (1.0 - 1.0 / k) * (c / a) ** delta
           > 0.25) or a ** delta < 3.0:
        a *= 2.0
        if a > ceiling:
            raise ConstructionError("no admissible a below the ceiling for the "
                                    "beta >= delta inequalities")

    la, lb, lc = math.log(a), math.log(b), math.log(c)

    def bump(beta):
        betas = _as_array(beta)
        out = np.maximum(0.0, 1.0 - np.asarray(K.distance(betas), dtype=float))
        return float(out[0]) if np.asarray(beta).ndim == 0 else out

    from scipy.special import logsumexp

    def _lse(betas, terms):
        # terms: list of (coefficient, log base); skip zero coefficients
        rows = [math.log(cf) + betas * lbs for cf, lbs in terms if cf > 0.0]
        return logsumexp(np.stack(rows), axis=0)

    def coth_half(betas):
        # (a^beta + 1)/(a^beta - 1); huge but finite near 0, sign of beta
        with np.errstate(divide="ignore"):
            th = np.tanh(betas * (la / 2.0))
            return np.where(th != 0.0, 1.0 / np.where(th != 0.0, th, 1.0), np.inf)

    def q1(beta):
        betas = _as_array(beta)
        num = _lse(betas, [(2.0 * (k - 1), lb), (l * (1.0 - 1.0 / k), lc)])
        den = _lse(betas, [(1.0, 0.0), (2.0 * (k - 1), lb), (1.0, la), (float(l), lc)])
        with np.errstate(over="ignore", invalid="ignore"):
            out = -np.exp(num - den) * coth_half(betas)
        out = np.where(betas == 0.0, np.inf, out)
        return float(out[0]) if np.asarray(beta).ndim == 0 else out

    def q2(beta):
        betas = _as_array(beta)
        num = _lse(betas, [(2.0 * (k - 1), lb), (l * (1.0 - 1.0 / k), lc)])
        den = _lse(betas, [(1.0, 0.0), (1.0, la), (l / k, lc)])
        with np.errstate(over="ignore", invalid="ignore"):
            out = np.exp(num - den) * coth_half(betas)
        out = np.where(betas == 0.0, np.inf, out)
        return float(out[0]) if np.asarray(beta).ndim == 0 else out

    def make_zeta(q):
        def zeta(beta):
            betas = _as_array(beta)
            vals = clamp_f(q(betas)) * bump(betas)
            vals = np.where(betas == 0.0, 0.0, vals)
            return float(vals[0]) if np.asarray(beta).ndim == 0 else vals
        return zeta

    zeta1 = make_zeta(q1)
    zeta2 = make_zeta(q2)

    def prefactor1(beta):
        betas = _as_array(beta)
        num = _lse(betas, [(1.0, 0.0), (2.0 * (k - 1), lb), (1.0, la), (float(l), lc)])
        den = _lse(betas, [(float(k), 0.0), (float(k), la), (float(l), lc)])
        out = np.exp(num - den)
        return float(out[0]) if np.asarray(beta).ndim == 0 else out

    def prefactor2(beta):
        betas = _as_array(beta)
        num = _lse(betas, [(float(k), 0.0), (float(k), la), (float(l), lc)])
        den = _lse(betas, [(1.0, 0.0), (2.0 * (k - 1), lb), (1.0, la), (float(l), lc)])
        out = np.exp(num - den)
        return float(out[0]) if np.asarray(beta).ndim == 0 else out

    def make_phi(prefactor, zeta):
        def phi(beta):
            betas = _as_array(beta)
            vals = prefactor(betas) * (1.0 + np.tanh(betas * (la / 2.0))
                                       * zeta(betas))
            return float(vals[0]) if np.asarray(beta).ndim == 0 else vals
        return phi

    pair = FractionPair(k=k, block_order=Lambda0_order, delta=delta,
                        a=a, b=b, c=c, bump=bump, q1=q1, q2=q2,
                        zeta1=zeta1, zeta2=zeta2,
                        prefactor1=prefactor1, prefactor2=prefactor2,
                        phi1=make_phi(prefactor1, zeta1),
                        phi2=make_phi(prefactor2, zeta2))

    # verify the clamp region: |Q| <= 1/2 wherever |beta| >= delta on the grid
    betas = np.linspace(-r_max, r_max, grid_n)
    outside = np.abs(betas) >= delta
    for q, name in ((q1, "Q1"), (q2, "Q2")):
        qv = np.asarray(q(betas), dtype=float)
        bad = np.abs(qv[outside]) > 0.5 + 1e-12
        if np.any(bad):
            raise ConstructionError(f"|{name}| exceeds 1/2 outside [-delta, delta]")
    for phi, target in ((pair.phi1, 1.0), (pair.phi2, 1.0)):
        if abs(phi(0.0) - target) > 1e-12:
            raise ConstructionError("phi(0) != 1; the 2k+l cancellation failed")
    return pair
