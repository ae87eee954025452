import math

import numpy as np
import pytest

from kmspec.blocks import conformal_weights, integrate_potential
from kmspec.errors import DomainError, InvalidInputError
from kmspec.realize import (build_realizable, clamp_f, default_schedule,
                            eval_phi, fraction_pair, mobius_eval, ratio_bound,
                            tanh_ratio)
from kmspec.sets import ClosedSetSpec

GRID = np.linspace(-20.0, 20.0, 4001)


def test_mobius_eval_is_tanh():
    a = 3.0
    expect = np.tanh(GRID * math.log(a) / 2.0)
    assert np.max(np.abs(mobius_eval(a, GRID) - expect)) < 1e-14


def test_tanh_ratio_bounded_and_consistent():
    l1, l2 = math.log(3.0), math.log(1.5)
    vals = tanh_ratio(l1, l2, GRID)
    mask = np.abs(GRID) > 1e-6
    with np.errstate(invalid="ignore"):
        expect = np.tanh(GRID * l1 / 2.0) / np.tanh(GRID * l2 / 2.0)
    assert np.max(np.abs(vals[mask] - expect[mask])) < 1e-12
    # removable singularity at 0: the ratio tends to l1/l2
    assert abs(float(tanh_ratio(l1, l2, 0.0)) - l1 / l2) < 1e-9
    assert float(np.max(np.abs(vals))) <= ratio_bound(3.0, 1.5) + 1e-12


def test_default_schedule_shape():
    sched = default_schedule(3.0, 4)
    assert len(sched) == 5
    assert sched[0] == 3.0
    assert all(x > y > 1.0 for x, y in zip(sched, sched[1:]))


def test_clamp_properties():
    assert clamp_f(0.3) == 0.3
    assert clamp_f(-0.5) == -0.5
    assert clamp_f(2.0) == 0.0
    assert abs(clamp_f(0.75) - 0.25) < 1e-15
    assert abs(clamp_f(-0.75) + 0.25) < 1e-15


def zeta_from_interval(K):
    def zeta(beta):
        b = np.asarray(beta, dtype=float)
        vals = np.asarray(K.distance(b), dtype=float) / (2.0 * (1.0 + b * b))
        return float(vals[0]) if np.asarray(beta).ndim == 0 else vals
    return zeta


def test_build_realizable_two_stages():
    K = ClosedSetSpec(intervals=((-1.0, 1.0),))
    cocycle = build_realizable(zeta_from_interval(K), a=3.0, stages=2,
                               r_max=20.0, grid_n=4001)
    assert cocycle.certified_error <= 0.5
    assert cocycle.identity_residual(GRID) <= 1e-10
    phi = eval_phi(cocycle, GRID)
    target = 1.0 + mobius_eval(3.0, GRID) * zeta_from_interval(K)(GRID)
    assert float(np.max(np.abs(phi - target))) <= cocycle.certified_error + 1e-12
    assert abs(eval_phi(cocycle, 0.0) - 1.0) < 1e-12


def test_build_realizable_guards():
    K = ClosedSetSpec(intervals=((-1.0, 1.0),))
    with pytest.raises(InvalidInputError):
        build_realizable(zeta_from_interval(K), a=1.0, stages=2)
    with pytest.raises(InvalidInputError):
        build_realizable(zeta_from_interval(K), a=2.0, stages=0)


@pytest.mark.parametrize("K,expected_abc", [
    (ClosedSetSpec(intervals=((1.0, 2.0),)), (80.0, 8.0, 9.0)),
    (ClosedSetSpec(intervals=((3.0, math.inf),)), (8.0, 2.0, 3.0)),
])
def test_fraction_pair_parameters(K, expected_abc):
    pair = fraction_pair(K, k=2, Lambda0_order=4, r_max=10.0)
    assert (pair.a, pair.b, pair.c) == expected_abc
    assert pair.c == pair.b + 1.0
    assert pair.delta == K.distance(0.0)


def test_fraction_pair_values():
    K = ClosedSetSpec(intervals=((1.0, 2.0),))
    pair = fraction_pair(K, k=2, Lambda0_order=4, r_max=10.0)
    assert abs(float(pair.phi1(0.0)) - 1.0) <= 1e-12
    assert abs(float(pair.phi2(0.0)) - 1.0) <= 1e-12
    inside = np.linspace(1.0, 2.0, 101)
    assert np.max(np.abs(np.asarray(pair.phi1(inside)) - 0.5)) < 1e-13
    assert np.max(np.abs(np.asarray(pair.phi2(inside)) - 2.0)) < 1e-12
    outside = np.array([-5.0, 0.5, 2.5, 8.0])
    assert np.all(np.abs(np.asarray(pair.phi1(outside)) - 0.5) > 1e-13)
    assert np.all(np.abs(np.asarray(pair.phi2(outside)) - 2.0) > 1e-13)


def test_fraction_pair_rejects_zero_in_K():
    with pytest.raises(InvalidInputError):
        fraction_pair(ClosedSetSpec(intervals=((-1.0, 1.0),)), k=2,
                      Lambda0_order=4)


def test_first_block_realizes_prefactor():
    K = ClosedSetSpec(points=(-1.0, 2.0))
    pair = fraction_pair(K, k=2, Lambda0_order=4, r_max=10.0)
    for which, prefactor in ((1, pair.prefactor1), (2, pair.prefactor2)):
        block = pair.first_block(which)
        for beta in (-3.0, -0.5, 0.0, 1.0, 2.5):
            got = integrate_potential(block, beta)
            assert abs(got - float(prefactor(beta))) < 1e-12 * abs(float(prefactor(beta)))


def test_q_bounded_off_delta():
    K = ClosedSetSpec(intervals=((1.0, 2.0),))
    pair = fraction_pair(K, k=2, Lambda0_order=4, r_max=10.0)
    betas = np.linspace(-10.0, 10.0, 4001)
    outside = np.abs(betas) >= pair.delta
    q1 = np.abs(np.asarray(pair.q1(betas))[outside])
    q2 = np.abs(np.asarray(pair.q2(betas))[outside])
    assert max(float(np.max(q1)), float(np.max(q2))) <= 0.5 + 1e-12
