import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from kmspec.errors import FitFailureError, InvalidInputError
from kmspec.expratio import (ExpSumRatio, TranslatedKernelBasis,
                             WeightedMultiset, approximate_unit, eval_ratio,
                             fit_c0, realize_block)

BETAS = np.linspace(-10.0, 10.0, 2001)


def test_approximate_unit_normalization_constant():
    # D_1 = integral of sech-type kernel: pi / (2 ln 2)
    _, d1 = approximate_unit(1)
    assert abs(d1 - math.pi / (2.0 * math.log(2.0))) < 1e-9


@pytest.mark.parametrize("n", [1, 2, 3, 4, 5])
def test_approximate_unit_integrates_to_one(n):
    phi, _ = approximate_unit(n)
    val, err = quad(phi, -60.0, 60.0, limit=300)
    assert abs(val - 1.0) < 1e-8 + err


def test_expsumratio_dominance_enforced():
    with pytest.raises(InvalidInputError):
        ExpSumRatio(numer=[(1.0, 4.0)], denom=[(1.0, 2.0), (1.0, 0.5)])


def test_expsumratio_text_round_trip():
    r = ExpSumRatio(numer=[(0.3, 2.0), (0.1, 0.5)],
                    denom=[(1.1, 3.0), (2.0, 1.0), (0.9, 0.25)])
    s = ExpSumRatio.from_text(r.to_text())
    assert np.max(np.abs(r(BETAS) - s(BETAS))) == 0.0


def test_expsumratio_reflection():
    r = ExpSumRatio(numer=[(0.3, 2.0), (0.3, 0.5)],
                    denom=[(1.1, 3.0), (0.9, 0.25)])
    assert np.max(np.abs(r.reflected()(BETAS) - r(-BETAS))) < 1e-15


def test_expsumratio_tail_bound_dominates():
    r = ExpSumRatio(numer=[(1.0, 2.0), (1.0, 0.5)],
                    denom=[(1.0, 3.0), (1.0, 0.25)])
    bound = r.tail_sup_bound(8.0)
    outside = np.linspace(8.0, 40.0, 500)
    vals = np.concatenate([r(outside), r(-outside)])
    assert np.max(vals) <= bound + 1e-15


def test_multiset_power_sum_matches_bruteforce():
    m = WeightedMultiset({2.0: 3, 0.5: 2, 1.25: 7})
    for beta in (-4.0, 0.0, 2.5):
        brute = 3 * 2.0 ** beta + 2 * 0.5 ** beta + 7 * 1.25 ** beta
        assert abs(math.exp(m.log_power_sum(beta)[0]) - brute) < 1e-12 * brute


@given(st.integers(1, 50), st.integers(1, 50), st.floats(-5, 5))
@settings(max_examples=50, deadline=None)
def test_multiset_union_additive(c1, c2, beta):
    a = WeightedMultiset({2.0: c1, 0.5: 3})
    b = WeightedMultiset({2.0: c2})
    u = WeightedMultiset.union(a, b)
    lhs = math.exp(u.log_power_sum(beta)[0])
    rhs = (math.exp(a.log_power_sum(beta)[0])
           + math.exp(b.log_power_sum(beta)[0]))
    assert abs(lhs - rhs) < 1e-12 * rhs


def test_multiset_product_is_pointwise_product():
    a = WeightedMultiset({2.0: 2, 0.5: 1})
    b = WeightedMultiset({4.0: 3, 1.0: 5})
    p = WeightedMultiset.product(a, b)
    for beta in (-2.0, 1.3):
        lhs = math.exp(p.log_power_sum(beta)[0])
        rhs = (math.exp(a.log_power_sum(beta)[0])
               * math.exp(b.log_power_sum(beta)[0]))
        assert abs(lhs - rhs) < 1e-12 * rhs


def test_basis_guard_against_underflow():
    with pytest.raises(InvalidInputError):
        TranslatedKernelBasis(y_max=200.0, spacing=0.1)


def test_basis_columns_peak_at_nodes():
    basis = TranslatedKernelBasis(y_max=6.0, spacing=1.0, window=2)
    grid = np.linspace(-8.0, 8.0, 1601)
    design = basis.design(grid)
    for j, y in enumerate(basis.nodes):
        peak = grid[np.argmax(design[:, j])]
        assert abs(peak - y) < 0.6


def test_fit_c0_logistic_plateau():
    def target(beta):
        return 0.25 / (1.0 + 2.0 ** np.asarray(beta, dtype=float))

    ratio = fit_c0(target, epsilon=1e-2, r_max=10.0)
    grid = np.linspace(-10.0, 10.0, 4001)
    err = float(np.max(np.abs(ratio(grid) - target(grid))))
    # the gate is the refined-grid error; the Lipschitz slack between grid
    # points is declared in the certificate rather than folded into the gate
    assert err <= 1e-2
    assert ratio.certificate.grid_error <= 1e-2
    assert ratio.certificate.certified_error >= err


def test_fit_c0_zero_target():
    ratio = fit_c0(lambda b: np.zeros_like(np.asarray(b, dtype=float)),
                   epsilon=1e-3, r_max=10.0)
    grid = np.linspace(-10.0, 10.0, 801)
    assert float(np.max(np.abs(ratio(grid)))) < 1e-3


def test_fit_c0_reports_best_error_on_failure():
    def spike(beta):
        b = np.asarray(beta, dtype=float)
        return 0.4 / (1.0 + (20.0 * b) ** 2)

    with pytest.raises(FitFailureError) as exc:
        fit_c0(spike, epsilon=1e-9, r_max=10.0, budget=2)
    assert exc.value.best_error > 1e-9


def test_realize_block_bump_target():
    half_log = math.log(3.0) / 2.0

    def f(beta):
        b = np.asarray(beta, dtype=float)
        d = np.maximum(np.abs(b) - 1.0, 0.0)
        return np.tanh(b * half_log) * d / (2.0 * (1.0 + b * b))

    system = realize_block(f, t=3.0, epsilon=2e-2, r_max=20.0, grid_n=4001)
    grid = np.linspace(-20.0, 20.0, 4001)
    assert float(np.max(np.abs(system.zeta(grid) - f(grid)))) <= 2e-2
    assert system.identity_residual(grid) <= 1e-10
    # the factor 1 + P_1 zeta equals 1 exactly at beta = 0
    assert abs(float(system.factor(0.0)) - 1.0) < 1e-14


def test_realize_block_zero_target():
    system = realize_block(lambda b: np.zeros_like(np.asarray(b, dtype=float)),
                           t=2.0, epsilon=1e-2, r_max=20.0, grid_n=2001)
    grid = np.linspace(-20.0, 20.0, 801)
    assert float(np.max(np.abs(system.zeta(grid)))) <= 1e-2
    assert system.identity_residual(grid) <= 1e-10


def test_eval_ratio_scalar():
    r = ExpSumRatio(numer=[(1.0, 1.0)], denom=[(2.0, 2.0), (2.0, 0.5)])
    assert abs(eval_ratio(r, 0.0) - 0.25) < 1e-15
