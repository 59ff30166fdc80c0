import math
from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gladiator.chains import (MA1, ConstantBias, Gladiator, JumpHop, ParticleSystem, Simple)
from gladiator.combinatorics import Arrangement, enumerate_states
from gladiator.errors import DomainError
from gladiator.exact import SparseKernel, assemble_kernel, stationary_vector
from gladiator.measures import (Distribution, count_box_partitions, detailed_balance_violation,
                                normalizing_constant, partition_sum_identity_check, qbinom,
                                qbinom_bound_check, qbinom_eval, stationary_distribution,
                                stationary_weight)

from conftest import random_instances


def test_weight_particle_system_abc():
    spec = ParticleSystem((1, 1, 1), (1, 2, 4))
    assert stationary_weight(spec, Arrangement.from_string("ABC")).exact == 256


def test_equal_strengths_equal_weights():
    spec = Gladiator((3, 3, 3, 3))
    weights = {stationary_weight(spec, s).exact for s in enumerate_states(spec)}
    assert len(weights) == 1


def test_constant_bias_weight_ratio():
    spec = ConstantBias(2, "0.6")
    ratio = stationary_weight(spec, (2, 1)).exact / stationary_weight(spec, (1, 2)).exact
    assert ratio == F(3, 2)


def test_log_and_rational_weights_agree():
    for spec in random_instances("gladiator", 5, seed=4) + random_instances("jump_hop", 5, seed=4):
        for s in enumerate_states(spec)[:50]:
            w = stationary_weight(spec, s)
            assert math.isclose(math.exp(w.log), float(w.exact), rel_tol=1e-10)
            assert stationary_weight(spec, s, "float").exact is None


def test_float_weights_do_not_overflow():
    spec = Gladiator(tuple(range(1, 41)))
    w = stationary_weight(spec, tuple(range(40, 0, -1)), "float")
    assert math.isfinite(w.log) and w.log > 700


def test_stationary_gladiator_n2():
    d = stationary_distribution(Gladiator((1, 2)))
    assert d.states == ((1, 2), (2, 1))
    assert d.probs == (F(2, 3), F(1, 3))
    assert normalizing_constant(Gladiator((1, 2))) == 6


def test_stationary_simple_uniform():
    d = stationary_distribution(Simple(3))
    assert set(d.probs) == {F(1, 6)}
    assert d.total() == 1


def test_stationary_particle_system_ac():
    d = stationary_distribution(ParticleSystem((1, 0, 1), (1, 2, 4)))
    assert {str(s): p for s, p in d.as_dict().items()} == {"AC": F(4, 5), "CA": F(1, 5)}


def test_float_distribution_sums_to_one():
    d = stationary_distribution(Gladiator((1, 2, 3, 4, 5, 6)), "float")
    assert abs(d.total() - 1) < 1e-12
    assert d.mode == "float"


def test_distribution_csv():
    text = stationary_distribution(Gladiator((1, 2))).to_csv()
    assert text == "state,probability\n\"1,2\",2/3\n\"2,1\",1/3\n"


def test_detailed_balance_gladiator_small():
    for n in range(2, 6):
        spec = Gladiator(tuple(F(k * k + 1, k + 1) for k in range(n)))
        kernel = assemble_kernel(spec)
        assert detailed_balance_violation(kernel, stationary_distribution(spec)) == 0


def test_detailed_balance_three_cycle():
    k = SparseKernel.from_dense([[0, 1, 0], [0, 0, 1], [1, 0, 0]])
    d = Distribution((F(1, 3),) * 3, "abstract")
    value, edge = detailed_balance_violation(k, d, return_edge=True)
    assert value == F(1, 3)
    assert edge is not None


def test_detailed_balance_jumphop_111():
    spec = JumpHop((1, 1, 1), (1, 2, 8))
    assert detailed_balance_violation(assemble_kernel(spec), stationary_distribution(spec)) == 0


def test_detailed_balance_space_mismatch():
    k = assemble_kernel(Simple(3))
    d = stationary_distribution(ParticleSystem((1, 1, 1), (1, 2, 3)))
    with pytest.raises(DomainError):
        detailed_balance_violation(k, d)


def test_ma1_matches_gladiator():
    for spec in random_instances("ma1", 6, seed=5):
        a = stationary_distribution(spec)
        b = stationary_distribution(Gladiator(spec.strengths))
        assert a.probs == b.probs


def test_stationary_matches_eigenvector():
    for spec in random_instances("jump_hop", 3, seed=6, max_states=300) + [MA1((1, 2, 5))]:
        pi = stationary_distribution(spec, "float").as_array()
        vec = stationary_vector(assemble_kernel(spec, "float"))
        assert np.max(np.abs(pi - vec)) < 1e-10


def test_qbinom_examples():
    assert qbinom(7, 3)[9] == 3
    for m in range(8):
        assert qbinom(m, 0).coeffs == (1,)
    assert qbinom(4, 2).coeffs == (1, 1, 2, 1, 1)
    assert str(qbinom(4, 2)) == "1 + q + 2q^2 + q^3 + q^4"


def test_qbinom_at_one_is_binomial():
    for m in range(21):
        for r in range(m + 1):
            assert qbinom(m, r)(1) == math.comb(m, r)
            assert qbinom_eval(m, r, 1) == math.comb(m, r)


@pytest.mark.parametrize("m", range(0, 17))
def test_qbinom_shape(m):
    for r in range(m + 1):
        p = qbinom(m, r)
        assert p.degree == r * (m - r)
        assert p.is_palindromic()
        assert all(c >= 0 for c in p.coeffs)


def test_qbinom_coefficients_count_box_partitions():
    for m in range(1, 10):
        for r in range(m + 1):
            p = qbinom(m, r)
            assert list(p.coeffs) == [count_box_partitions(t, r, m - r) for t in range(p.degree + 1)]


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 12), st.data(), st.fractions(min_value=F(1, 20), max_value=F(19, 20)))
def test_qbinom_eval_matches_polynomial(m, data, q):
    r = data.draw(st.integers(0, m))
    assert qbinom_eval(m, r, q) == qbinom(m, r)(q)


def test_qbinom_bound_examples():
    assert qbinom_bound_check(20, 10, F(3, 10))
    assert qbinom_bound_check(5, 0, F(1, 4))
    assert qbinom_bound_check(12, 6, F(49, 100))
    with pytest.raises(DomainError):
        qbinom_bound_check(5, 2, F(1, 2))
    with pytest.raises(DomainError):
        qbinom(3, 4)


def test_partition_sum_examples():
    lhs, rhs, ok = partition_sum_identity_check(3, 4, F(1, 3))
    assert ok and rhs == qbinom(7, 3)(F(1, 3))
    for c in range(5):
        assert partition_sum_identity_check(0, c, F(1, 2))[:2] == (1, 1)
    assert partition_sum_identity_check(2, 2, F(1, 2))[2]


def test_partition_sum_domain():
    with pytest.raises(DomainError):
        partition_sum_identity_check(2, 2, F(3, 2))
