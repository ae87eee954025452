import math

import numpy as np
import pytest

from kmspec.blocks import (FiniteConformalBlock, FiniteGroupTable, ProbVector,
                           TruncatedProductSystem, blocks_from_text,
                           blocks_to_text, check_conformality,
                           cohomologous_transform, conformal_weights,
                           integrate_potential)
from kmspec.errors import InvalidInputError, UnsupportedGeneratorError

RNG = np.random.default_rng(11)


def random_block(order, base=3.0, with_group=True, rng=RNG):
    w = rng.uniform(0.2, 1.0, order)
    h = rng.uniform(1.0 / base, base, order)
    group = FiniteGroupTable.cyclic(order) if with_group else None
    return FiniteConformalBlock(base_measure=ProbVector(w / w.sum()),
                                potential=h, base=base, group=group)


def test_cyclic_table_valid():
    g = FiniteGroupTable.cyclic(5)
    assert g.mul[2][4] == 1
    assert g.inv[3] == 2


def test_bad_tables_rejected():
    g = FiniteGroupTable.cyclic(3)
    with pytest.raises(InvalidInputError):
        FiniteGroupTable(order=3, mul=g.mul, inv=(0, 1, 2), identity=0)
    # non-associative magma on 2 elements
    with pytest.raises(InvalidInputError):
        FiniteGroupTable(order=2, mul=((0, 1), (1, 1)), inv=(0, 1), identity=0)


def test_probvector_guards():
    with pytest.raises(InvalidInputError):
        ProbVector(np.array([0.5, 0.0, 0.5]))
    with pytest.raises(InvalidInputError):
        ProbVector(np.array([0.7, 0.7]))
    v = ProbVector(np.array([0.5, 0.5 + 1e-11]))
    assert abs(v.weights.sum() - 1.0) <= 1e-12


def test_conformal_weights_oracle():
    # direct normalized beta-th power, no log tricks
    b = random_block(4)
    for beta in (-3.0, -1.0, 0.0, 1.0, 3.0):
        w = b.base_measure.weights ** beta
        expect = w / w.sum()
        got = conformal_weights(b, beta).weights
        assert np.max(np.abs(got - expect)) < 1e-14


def test_conformal_weights_extreme_beta():
    b = FiniteConformalBlock(base_measure=ProbVector(np.array([0.9, 0.1])),
                             potential=np.array([1.0, 1.0]), base=2.0)
    w = conformal_weights(b, 300.0).weights
    assert w[0] >= 1.0 - 1e-12 and np.all(w > 0.0)


def test_integrate_potential_oracle():
    b = random_block(5)
    for beta in (-2.0, 0.5, 2.0):
        mu = conformal_weights(b, beta).weights
        expect = float(np.sum(b.potential ** beta * mu))
        assert abs(integrate_potential(b, beta) - expect) < 1e-13


def test_cohomologous_transform_inverts():
    mu = ProbVector(np.array([0.1, 0.2, 0.3, 0.4]))
    H = [0.3, -1.2, 0.5, 0.0]
    out = cohomologous_transform(cohomologous_transform(mu, H, 1.7),
                                 [-h for h in H], 1.7)
    assert np.max(np.abs(out.weights - mu.weights)) < 1e-14


def test_conformality_pass_and_perturbation_fail():
    blocks = [random_block(3), random_block(4)]
    system = TruncatedProductSystem(blocks=blocks)
    gens = [(0, 1), (0, 2), (1, 1), (1, 3)]
    for beta in (-3.0, -1.0, 0.0, 1.0, 3.0):
        measure = system.measure_on_truncation(beta)
        report = check_conformality(system, measure, beta, gens, tol=1e-12)
        assert report.passed, report.max_defect
        bad = dict(measure)
        key = next(iter(bad))
        bad[key] *= 1.0 + 1e-3
        report = check_conformality(system, bad, beta, gens, tol=1e-6)
        assert not report.passed


def test_conformality_requires_group_table():
    system = TruncatedProductSystem(blocks=[random_block(3, with_group=False)])
    with pytest.raises(UnsupportedGeneratorError):
        check_conformality(system, system.measure_on_truncation(1.0), 1.0,
                           [(0, 1)], tol=1e-12)


def test_tail_bound_from_schedule():
    got = TruncatedProductSystem.tail_bound_from_schedule([2.0, 1.5], 3.0)
    assert abs(got - 3.0 * (math.log(2.0) + math.log(1.5))) < 1e-15


def test_serialization_round_trip():
    blocks = [random_block(3), random_block(2, with_group=False)]
    out = blocks_from_text(blocks_to_text(blocks))
    for a, b in zip(blocks, out):
        assert np.array_equal(a.base_measure.weights, b.base_measure.weights)
        assert np.array_equal(a.potential, b.potential)
        assert a.base == b.base
        assert (a.group is None) == (b.group is None)
        if a.group is not None:
            assert a.group.mul == b.group.mul
