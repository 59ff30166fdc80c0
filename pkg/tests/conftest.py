import random
from fractions import Fraction

import pytest

from gladiator.chains import MA1, Gladiator, JumpHop, LeagueHierarchy, MTree, ParticleSystem
from gladiator.trees import TernaryTree

TREE_SHAPES = [
    (1, 2),
    (1, 2, 3),
    ((1, 2), 3),
    ((1, 2), (3, 4)),
    ((1, 2, 3), 4),
    (1, (2, 3), 4),
    ((1, 2, 3), (4, 5)),
    ((1, 2), 3, (4, 5)),
    ((1, 2), (3, 4), (5, 6)),
    ((1, 2, 3), (4, 5, 6)),
]


def rand_strength(rng, lo=1, hi=9):
    return Fraction(rng.randint(lo, hi), rng.randint(1, 4))


def increasing_strengths(rng, k, min_ratio=1):
    """k strictly increasing positive rationals with consecutive ratios above ``min_ratio``."""
    out = [rand_strength(rng)]
    while len(out) < k:
        nxt = out[-1] * (min_ratio + Fraction(rng.randint(1, 6), rng.randint(1, 3)))
        out.append(nxt)
    return out


def random_tree(rng, shape):
    def count(sub):
        return 0 if isinstance(sub, int) else 1 + sum(count(c) for c in sub)

    def arities(sub):
        if isinstance(sub, int):
            return []
        return [len(sub)] + [a for c in sub for a in arities(c)]

    per_node = [tuple(increasing_strengths(rng, a)) for a in arities(shape)]
    assert len(per_node) == count(shape)
    return TernaryTree.from_nested(shape, per_node)


def random_instances(variant, count, seed=0, max_states=5000):
    """Deterministic random instances of a reversible variant."""
    rng = random.Random(f"{variant}-{seed}")
    out = []
    while len(out) < count:
        if variant == "gladiator":
            n = rng.randint(2, 6)
            spec = Gladiator(tuple(rand_strength(rng) for _ in range(n)))
        elif variant == "gladiator_teams":
            n = rng.randint(3, 6)
            labels = list(range(1, n + 1))
            rng.shuffle(labels)
            cut = sorted(rng.sample(range(1, n), rng.randint(1, n - 1)))
            teams = [tuple(sorted(labels[a:b])) for a, b in zip([0] + cut, cut + [n])]
            spec = Gladiator.from_teams(teams, [rand_strength(rng) for _ in teams])
        elif variant == "particle_system":
            k = rng.randint(2, 4)
            counts = tuple(rng.randint(0, 3) for _ in range(k))
            if sum(counts) < 2:
                continue
            spec = ParticleSystem(counts, tuple(rand_strength(rng) for _ in range(k)))
        elif variant == "jump_hop":
            counts = tuple(rng.randint(0, 3) for _ in range(3))
            if sum(counts) < 2:
                continue
            spec = JumpHop(counts, tuple(increasing_strengths(rng, 3)))
        elif variant in ("league", "mtree"):
            shape = rng.choice(TREE_SHAPES)
            tree = random_tree(rng, shape)
            spec = LeagueHierarchy(tree) if variant == "league" else MTree(tree)
        elif variant == "ma1":
            n = rng.randint(2, 6)
            spec = MA1(tuple(rand_strength(rng) for _ in range(n)))
        else:
            raise ValueError(variant)
        if spec.space.size <= max_states:
            out.append(spec)
    return out


@pytest.fixture
def rng():
    return random.Random(12345)
