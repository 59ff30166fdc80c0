import math
from fractions import Fraction as F

import numpy as np
import pytest

from gladiator.chains import (ConstantBias, Gladiator, JumpHop, MA1, ParticleSystem, Simple)
from gladiator.combinatorics import Arrangement, StateIndex
from gladiator.errors import ChainStructureError, DomainError, SizeLimitError
from gladiator.exact import (SparseKernel, assemble_kernel, block_masses, check_ergodic,
                             compose_bound, distribution_at_time, mixing_time_exact, period,
                             project_chain, restrict_chain, spectral_gap, stationary_vector,
                             tv_distance, worst_tv_at)
from gladiator.measures import Distribution, detailed_balance_violation, stationary_distribution

from conftest import random_instances


def test_kernel_gladiator_n2():
    k = assemble_kernel(Gladiator((1, 2)))
    assert k.to_dense() == [[F(2, 3), F(1, 3)], [F(2, 3), F(1, 3)]]


def test_kernel_simple_n3_doubly_stochastic():
    k = assemble_kernel(Simple(3))
    m = np.array(k.to_dense(), dtype=object)
    assert k.size == 6
    assert all(sum(m[i, :]) == 1 for i in range(6))
    assert all(sum(m[:, j]) == 1 for j in range(6))


def test_kernel_jumphop_rows_exact():
    k = assemble_kernel(JumpHop((1, 1, 1), (1, 2, 8)))
    assert k.size == 6
    assert all(s == 1 for s in k.row_sums())
    assert all(0 <= j < k.size for j in k.indices)


def test_kernel_cap():
    with pytest.raises(SizeLimitError):
        assemble_kernel(Simple(8), cap_states=1000)


def test_distribution_at_time_examples():
    k = assemble_kernel(Gladiator((1, 2)))
    d0 = distribution_at_time(k, 1, 0)
    assert d0.probs == (0, 1)
    for start in (0, 1, (1, 2), StateIndex(1, k.space_id)):
        assert distribution_at_time(k, start, 1).probs == (F(2, 3), F(1, 3))
    kf = assemble_kernel(Gladiator((1, 2, 3, 4)), "float")
    assert abs(distribution_at_time(kf, 0, 1000).total() - 1) < 1e-9


def test_tv_examples():
    assert tv_distance((F(1, 2), F(1, 2)), (F(1, 2), F(1, 2))) == 0
    assert tv_distance((1, 0), (0, 1)) == 1
    assert tv_distance((F(1, 2), F(1, 2)), (1, 0)) == F(1, 2)


def test_mixing_gladiator_n2():
    spec = Gladiator((1, 2))
    rep = mixing_time_exact(assemble_kernel(spec), stationary_distribution(spec), F(1, 4))
    assert rep.t_mix == 1
    assert "t,worst_tv" in rep.to_csv()


def test_mixing_identity_kernel_is_reducible():
    k = SparseKernel.from_dense([[1, 0], [0, 1]])
    with pytest.raises(ChainStructureError):
        mixing_time_exact(k, (F(1, 2), F(1, 2)))


def test_periodic_kernel_rejected():
    k = SparseKernel.from_dense([[0, 1], [1, 0]])
    assert period(k) == 2
    with pytest.raises(ChainStructureError):
        check_ergodic(k)


def dense_oracle_tmix(spec, eps):
    """Independent check: plain repeated dense multiplication from every start."""
    k = assemble_kernel(spec, "float")
    p = np.array(k.to_scipy().toarray())
    pi = stationary_distribution(spec, "float").as_array()
    cur = np.eye(len(pi))
    t = 0
    while 0.5 * np.abs(cur - pi).sum(axis=1).max() > eps + 1e-12:
        cur = cur @ p
        t += 1
    return t


def test_simple_n3_regression():
    spec = Simple(3)
    rep = mixing_time_exact(assemble_kernel(spec, "float"), stationary_distribution(spec, "float"))
    assert rep.t_mix == dense_oracle_tmix(spec, 0.25) == 4


@pytest.mark.parametrize("spec", [Gladiator((1, 2, 3, 5)), JumpHop((1, 1, 1), (1, 2, 8)),
                                  MA1((1, 2, 3, 4)), ParticleSystem((2, 2, 1), (1, 2, 3)),
                                  ConstantBias(4, "3/4"), Simple(5)])
def test_methods_agree_with_oracle(spec):
    k = assemble_kernel(spec, "float")
    pi = stationary_distribution(spec, "float")
    dense = mixing_time_exact(k, pi, method="dense")
    scan = mixing_time_exact(k, pi, method="scan")
    assert dense.t_mix == scan.t_mix == dense_oracle_tmix(spec, 0.25)
    # the definition's threshold conditions at t_mix
    assert worst_tv_at(k, pi, dense.t_mix)[0] <= 0.25 + 1e-12
    assert worst_tv_at(k, pi, dense.t_mix - 1)[0] > 0.25


def test_tv_curve_non_increasing():
    for spec in [Gladiator((1, 3, 4, 9)), Simple(4), JumpHop((2, 1, 2), (1, 3, 9))]:
        k = assemble_kernel(spec, "float")
        pi = stationary_distribution(spec, "float").as_array()
        p = k.to_scipy().toarray()
        cur, prev = np.eye(len(pi)), 2.0
        for _ in range(40):
            tv = 0.5 * np.abs(cur - pi).sum(axis=1).max()
            assert tv <= prev + 1e-12
            prev, cur = tv, cur @ p


def test_mixing_monotone_in_epsilon():
    for spec in random_instances("gladiator", 4, seed=7, max_states=200):
        k = assemble_kernel(spec, "float")
        pi = stationary_distribution(spec, "float")
        ts = [mixing_time_exact(k, pi, eps).t_mix for eps in (F(1, 2), F(1, 4), F(1, 8))]
        assert ts == sorted(ts)


def test_spectral_gap_examples():
    spec = Gladiator((1, 2))
    assert spectral_gap(assemble_kernel(spec), stationary_distribution(spec)) == pytest.approx(1, abs=1e-9)
    a = b = F(1, 4)
    k = SparseKernel.from_dense([[1 - a, a], [b, 1 - b]])
    pi = Distribution((b / (a + b), a / (a + b)), "abstract")
    assert spectral_gap(k, pi) == pytest.approx(0.5, abs=1e-9)


def test_spectral_gap_rejects_irreversible():
    k = SparseKernel.from_dense([[0, 1, 0], [0, 0, 1], [1, 0, 0]])
    with pytest.raises(DomainError):
        spectral_gap(k, Distribution((F(1, 3),) * 3, "abstract"))


def test_spectral_bound_dominates_tmix():
    specs = (random_instances("gladiator", 4, seed=8, max_states=500)
             + random_instances("jump_hop", 3, seed=8, max_states=500))
    for spec in specs:
        if spec.space.size < 2:
            continue
        k = assemble_kernel(spec, "float")
        pi = stationary_distribution(spec, "float")
        gap = spectral_gap(k, pi)
        assert 0 <= gap <= 1 + 1e-12
        eigs = np.linalg.eigvals(k.to_scipy().toarray())
        second = sorted(np.real(eigs))[-2]
        assert gap == pytest.approx(1 - second, abs=1e-7)
        t = mixing_time_exact(k, pi).t_mix
        assert t <= (1 / gap) * math.log(1 / (0.25 * pi.pi_min))


def test_gth_matches_product_form():
    for spec in random_instances("particle_system", 4, seed=9, max_states=500):
        pi = stationary_distribution(spec, "float").as_array()
        assert np.max(np.abs(stationary_vector(assemble_kernel(spec, "float")) - pi)) < 1e-10


def test_restrict_full_and_singleton():
    k = assemble_kernel(Gladiator((1, 2, 3)))
    full = restrict_chain(k, range(k.size))
    assert full.to_dense() == k.to_dense()
    single = restrict_chain(k, [(2, 1, 3)])
    assert single.to_dense() == [[1]]


def collapse(glad, state):
    return Arrangement(glad.team_of(g) for g in state)


def check_restriction_isomorphic(glad):
    k = assemble_kernel(glad)
    order_ok = lambda s: all(s.index(t[a]) < s.index(t[a + 1])
                             for t in glad.teams for a in range(len(t) - 1))
    block = [s for s in k.states if order_ok(s)]
    r = restrict_chain(k, block)
    ps = glad.particle_system()
    kp = assemble_kernel(ps)
    image = [collapse(glad, s) for s in r.states]
    assert sorted(image) == list(kp.states)
    for i, s in enumerate(r.states):
        for j, p in r.row(i):
            assert kp.entry(kp.index_of(image[i]), kp.index_of(image[j])) == p


def test_restriction_is_particle_system_n3():
    check_restriction_isomorphic(Gladiator.from_teams([(1, 2), (3,)], [1, 3]))


def set_partitions(items):
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for part in set_partitions(rest):
        yield [[first]] + part
        for k in range(len(part)):
            yield part[:k] + [[first] + part[k]] + part[k + 1:]


@pytest.mark.parametrize("n", [3, 4, 5])
def test_restriction_all_team_structures(n):
    for teams in set_partitions(list(range(1, n + 1))):
        if len(teams) == 1:
            continue
        strengths = [F(k + 1, 2) ** 2 for k in range(len(teams))]
        check_restriction_isomorphic(Gladiator.from_teams([tuple(sorted(t)) for t in teams], strengths))


def test_restriction_n6_sample():
    check_restriction_isomorphic(Gladiator.from_teams([(1, 4), (2, 5, 6), (3,)], [1, 2, 5]))


def test_project_trivial_and_singletons():
    spec = Gladiator((1, 2, 3))
    k = assemble_kernel(spec)
    pi = stationary_distribution(spec)
    one = project_chain(k, [list(range(k.size))], pi)
    assert one.to_dense() == [[1]]
    singles = project_chain(k, [[i] for i in range(k.size)], pi)
    assert singles.to_dense() == k.to_dense()


def test_project_by_team_order():
    spec = Gladiator.from_teams([(1, 2), (3,)], [1, 3])
    k = assemble_kernel(spec)
    pi = stationary_distribution(spec)
    label = lambda s: s.index(1) < s.index(2)
    proj = project_chain(k, label, pi)
    assert proj.size == 2
    masses = block_masses(proj, k, label, pi)
    assert sum(masses) == 1
    d = Distribution(tuple(masses), proj.space_id, tuple(proj.states))
    assert detailed_balance_violation(proj, d) == 0
    # block masses are stationary for the projection
    for j in range(2):
        assert sum(masses[i] * proj.entry(i, j) for i in range(2)) == masses[j]


def test_project_preserves_mass_generic():
    spec = JumpHop((1, 2, 1), (1, 3, 9))
    k = assemble_kernel(spec)
    pi = stationary_distribution(spec)
    label = lambda s: s.index(2)  # position of the C particle
    proj = project_chain(k, label, pi)
    masses = block_masses(proj, k, label, pi)
    for j in range(proj.size):
        assert sum(masses[i] * proj.entry(i, j) for i in range(proj.size)) == masses[j]


def test_project_rejects_bad_partition():
    spec = Gladiator((1, 2, 3))
    k = assemble_kernel(spec)
    with pytest.raises(DomainError):
        project_chain(k, [[0, 1], [1, 2]], stationary_distribution(spec))
    with pytest.raises(DomainError):
        project_chain(k, [[0, 1]], stationary_distribution(spec))


def test_compose_bound_examples():
    assert compose_bound("decomposition", t_bar=10, t_max=5) == 100
    assert compose_bound("reduction", t_x=1, n=2) == 1024
    value = compose_bound("canonical", phi=2, pi_min=F(1, 5), epsilon=F(1, 4))
    assert value == pytest.approx(8 * 4 * (math.log(5) + math.log(4)))
    assert round(value, 2) == 95.86
    assert compose_bound("comparison3", t=3, n=2) == 96
    assert compose_bound("league", t=3, n=2) == 48
    assert compose_bound("product", times=[4, 6], probs=["1/2", "1/2"]) == 24


def test_compose_bound_errors():
    with pytest.raises(DomainError):
        compose_bound("nope")
    with pytest.raises(DomainError):
        compose_bound("decomposition", t_bar=1)
    with pytest.raises(DomainError):
        compose_bound("product", times=[1, 2], probs=["3/4", "1/2"])
    with pytest.raises(DomainError):
        compose_bound("canonical", phi=1, pi_min=F(1, 2), epsilon=2)


def test_mixing_report_json():
    spec = Gladiator((1, 2, 4))
    rep = mixing_time_exact(assemble_kernel(spec), stationary_distribution(spec))
    assert '"t_mix"' in rep.to_json()
    assert rep.worst_start_state in assemble_kernel(spec).states
