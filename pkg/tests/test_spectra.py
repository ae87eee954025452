import itertools
import math

import numpy as np
import pytest

from kmspec.blocks import FiniteConformalBlock, ProbVector
from kmspec.errors import DomainError, WindowError
from kmspec.realize import fraction_pair
from kmspec.sets import ClosedSetSpec
from kmspec.spectra import (FreeProductSystem, WreathSystem,
                            assemble_free_product, dummy_extension_check,
                            shift_rn_derivative, solve_free_product_spectrum,
                            solve_spectrum, target_phi_from_set,
                            theta_rn_derivative)

RNG = np.random.default_rng(7)


def rand_block(order, base=2.0):
    w = RNG.uniform(0.2, 1.0, order)
    h = RNG.uniform(1.0 / base, base, order)
    return FiniteConformalBlock(base_measure=ProbVector(w / w.sum()),
                                potential=h, base=base)


def grid_trace(K, betas, report):
    member = report.member_grid(betas)
    oracle = np.asarray(K.distance(betas)) == 0.0
    return bool(np.array_equal(member, oracle))


def test_target_phi_requires_zero_in_K():
    with pytest.raises(DomainError):
        target_phi_from_set(ClosedSetSpec(intervals=((1.0, 2.0),)), 2.0)


def test_solve_spectrum_trivial_targets():
    betas = np.linspace(-10.0, 10.0, 10001)
    # phi identically 1: the whole range is flat
    report = solve_spectrum(lambda b: np.ones_like(np.asarray(b, dtype=float)),
                            r_max=10.0, tol=1e-6, grid_n=10001)
    assert report.flat_intervals == ((-10.0, 10.0),)
    assert report.clipped == (True,)
    # phi = 1 + beta: a single transversal root at 0
    report = solve_spectrum(lambda b: 1.0 + np.asarray(b, dtype=float),
                            r_max=10.0, tol=1e-6, grid_n=10001)
    assert report.isolated_roots == (0.0,)
    assert report.flat_intervals == ()


@pytest.mark.parametrize("K", [
    ClosedSetSpec(points=(0.0,)),
    ClosedSetSpec(intervals=((1.0, 2.0),), points=(0.0,)),
    ClosedSetSpec(intervals=((5.0, 6.0),), points=(0.0, -3.0)),
])
@pytest.mark.parametrize("grid_n", [10000, 10001])
def test_wreath_spectrum_recovery(K, grid_n):
    phi = target_phi_from_set(K, 2.0)
    report = solve_spectrum(phi, r_max=10.0, tol=1e-6, grid_n=grid_n)
    betas = np.linspace(-10.0, 10.0, 10000)
    assert grid_trace(K, betas, report)


@pytest.mark.parametrize("K", [
    ClosedSetSpec(intervals=((1.0, 2.0),)),
    ClosedSetSpec(points=(-1.0, 2.0)),
    ClosedSetSpec(intervals=((3.0, math.inf),)),
])
def test_free_product_spectrum_recovery(K):
    pair = fraction_pair(K, k=2, Lambda0_order=4, r_max=10.0)
    report = solve_free_product_spectrum(pair, r_max=10.0, tol=1e-6,
                                         grid_n=10001)
    betas = np.linspace(-10.0, 10.0, 10000)
    assert grid_trace(K, betas, report)


def test_free_product_isolated_points_located():
    K = ClosedSetSpec(points=(-1.0, 2.0))
    pair = fraction_pair(K, k=2, Lambda0_order=4, r_max=10.0)
    # an even grid puts both roots strictly between grid points
    report = solve_free_product_spectrum(pair, r_max=10.0, tol=1e-6,
                                         grid_n=10000)
    assert np.allclose(report.isolated_roots, (-1.0, 2.0),
                       rtol=0.0, atol=1e-12)


def test_unbounded_interval_is_clipped():
    K = ClosedSetSpec(intervals=((3.0, math.inf),))
    pair = fraction_pair(K, k=2, Lambda0_order=4, r_max=10.0)
    report = solve_free_product_spectrum(pair, r_max=10.0, tol=1e-6,
                                         grid_n=10001)
    assert report.flat_intervals == ((3.0, 10.0),)
    assert report.clipped == (True,)


def test_report_round_trip_dict():
    report = solve_spectrum(lambda b: 1.0 + np.asarray(b, dtype=float),
                            r_max=5.0, tol=1e-6, grid_n=2001)
    d = report.to_dict()
    assert d["isolated_roots"] == ["0.0"]
    assert d["grid_n"] == 2001


# ---------------------------------------------------------------------------
# Radon-Nikodym oracles

def test_wreath_rn_matches_cylinder_oracle():
    system = WreathSystem(blocks=(rand_block(3), rand_block(2)))
    worst = 0.0
    for beta in (-2.0, 0.0, 1.0):
        for c0 in range(system.n_configs):
            lhs = shift_rn_derivative(system, beta, c0)
            rhs = system.cylinder_shift_ratio(beta, {0: c0})
            worst = max(worst, abs(lhs - rhs) / abs(rhs))
    assert worst <= 1e-10


def test_wreath_rn_window_three_cylinders():
    system = WreathSystem(blocks=(rand_block(2), rand_block(2)))
    n = system.n_configs
    worst = 0.0
    for beta in (-2.0, 0.0, 1.0):
        for cm1, c0, c1 in itertools.product(range(n), repeat=3):
            lhs = shift_rn_derivative(system, beta, c0)
            rhs = system.cylinder_shift_ratio(beta, {-1: cm1, 0: c0, 1: c1})
            worst = max(worst, abs(lhs - rhs) / abs(rhs))
    assert worst <= 1e-10


def build_free_system():
    K = ClosedSetSpec(intervals=((1.0, 2.0),))
    pair = fraction_pair(K, k=2, Lambda0_order=4, r_max=10.0)
    return assemble_free_product(pair, window=3,
                                 extra_blocks1=(rand_block(2, pair.a),), q=4)


def test_theta_rn_matches_cylinder_oracle():
    system = build_free_system()
    o1 = int(np.prod([b.order for b in system.blocks1]))
    o2 = int(np.prod([b.order for b in system.blocks2]))
    worst = 0.0
    for beta in (-2.0, 0.0, 1.0):
        for x0, x1 in itertools.product(range(4), repeat=2):
            for y0 in range(o1):
                for z0 in range(o2):
                    xc = {0: x0, 1: x1}
                    yc = {0: y0, -1: (y0 + 1) % o1}
                    zc = {0: z0, 1: (z0 + 1) % o2}
                    lhs = theta_rn_derivative(system, beta, xc, yc, zc)
                    rhs = system.theta_cylinder_ratio(beta, xc, yc, zc)
                    worst = max(worst, abs(lhs - rhs) / abs(rhs))
    assert worst <= 1e-10


def test_theta_case_zero_is_identity():
    system = build_free_system()
    assert theta_rn_derivative(system, 1.3, {0: 0, 1: 0}, {0: 0}, {0: 0}) == 1.0


def test_theta_window_errors():
    system = build_free_system()
    with pytest.raises(WindowError):
        system.classify({1: 0})
    with pytest.raises(WindowError):
        theta_rn_derivative(system, 1.0, {0: 1}, {}, {0: 0})


def test_partition_masses_sum_to_one():
    system = build_free_system()
    assert abs(sum(system.partition_masses()) - 1.0) < 1e-15


def test_dummy_extension_check():
    system = build_free_system()
    report = dummy_extension_check(3, 1, system)
    assert report.passed
    assert report.order == report.expected_order == 24
