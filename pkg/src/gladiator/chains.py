"""Chain variants as transition kernels.

Orientation convention used throughout: position 1 is the head of the list and
a gladiator that "comes out ahead" takes the HIGHER position index. With this
reading the product weight prod_g s(g)**position(g) is stationary for every
variant below, which module ``measures`` verifies by exact detailed balance.

Every kernel is available in two numeric modes: ``"rational"`` (Fraction
probabilities, rows sum to exactly 1) and ``"float"``.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import ClassVar

import numpy as np

from .combinatorics import Arrangement, Permutation, StateSpace
from .errors import DomainError
from .trees import TernaryTree, to_fraction

MODES = ("rational", "float")
HALF = Fraction(1, 2)


def parse_strengths(values) -> tuple[Fraction, ...]:
    """Coerce strengths to a tuple of positive Fractions (``"p/q"`` strings allowed)."""
    if isinstance(values, str):
        values = values.split(",")
    out = tuple(to_fraction(v) for v in values)
    if not out:
        raise DomainError("empty strength table")
    if any(s <= 0 for s in out):
        raise DomainError(f"strengths must be strictly positive: {[str(s) for s in out]}")
    return out


def _check_mode(mode):
    if mode not in MODES:
        raise DomainError(f"mode must be one of {MODES}, got {mode!r}")


def _num(x, mode):
    return float(x) if mode == "float" else x


def order_probability(s_low, s_high, gap: int):
    """Probability that the pair ends with the ``s_high`` particle at the higher index.

    Returns ``(p, 1 - p)`` with ``p = r**gap / (1 + r**gap)`` and ``r = s_high/s_low``.
    Exact when both strengths are rational.
    """
    if gap < 1:
        raise DomainError("gap must be a positive integer")
    if s_low <= 0 or s_high <= 0:
        raise DomainError("strengths must be strictly positive")
    if isinstance(s_low, float) or isinstance(s_high, float):
        r = float(s_high) / float(s_low)
        # written against overflow for large gaps
        p = 1.0 / (1.0 + r ** (-gap)) if r >= 1 else r**gap / (1.0 + r**gap)
        return p, 1.0 - p
    s_low, s_high = to_fraction(s_low), to_fraction(s_high)
    r = (s_high / s_low) ** gap
    p = r / (1 + r)
    return p, 1 - p


def jump_probability(sA, sC, gap: int):
    """Jump law: (increasing-order probability, decreasing-order probability)."""
    return order_probability(sA, sC, gap)


def hop_probability(s_weak, s_strong, gap: int):
    """Hop law: (increasing-order probability, decreasing-order probability)."""
    return order_probability(s_weak, s_strong, gap)


def check_ratio_condition(strengths, threshold=HALF) -> bool:
    """True when consecutive weak/strong ratios are all below ``threshold``."""
    s = parse_strengths(strengths)
    t = to_fraction(threshold)
    return all(s[k] / s[k + 1] < t for k in range(len(s) - 1))


class ChainSpec:
    """Base class of the chain variants; subclasses are frozen dataclasses."""

    variant: ClassVar[str] = ""

    @property
    def space(self) -> StateSpace:
        raise NotImplementedError

    @property
    def n(self) -> int:
        return self.space.n

    def _row(self, state, mode) -> dict:
        raise NotImplementedError

    def pair_win(self, x, y, mode):
        """Probability that ``x`` ends at the higher index when x, y are swapped by heat bath."""
        raise NotImplementedError

    def extremal_states(self):
        """(max-weight state, min-weight state) used as worst-start proxies."""
        raise NotImplementedError

    def __str__(self):
        return f"{self.variant}(n={self.n})"


def _adjacent_heat_bath(spec, state, mode, uniform_i=True):
    """Row of an adjacent-transposition chain with heat-bath pair updates."""
    n = len(state)
    row = defaultdict(lambda: _num(0, mode))
    w = _num(Fraction(1, n - 1), mode) if n > 1 else None
    if n == 1:
        row[state] = _num(1, mode)
        return row
    for i in range(n - 1):
        x, y = state[i], state[i + 1]
        p_x_high = spec.pair_win(x, y, mode)
        if p_x_high is None:  # indistinguishable pair, nothing moves
            row[state] += w
            continue
        swapped = list(state)
        swapped[i], swapped[i + 1] = y, x
        swapped = tuple.__new__(type(state), swapped)
        row[swapped] += w * p_x_high
        row[state] += w * (1 - p_x_high)
    return row


@dataclass(frozen=True)
class Simple(ChainSpec):
    """Uniform adjacent transpositions: swap a random adjacent pair with probability 1/2."""

    size: int
    variant: ClassVar[str] = "simple"

    def __post_init__(self):
        if self.size < 1:
            raise DomainError("n must be at least 1")

    @property
    def space(self):
        return StateSpace.permutations(self.size)

    def pair_win(self, x, y, mode):
        return _num(HALF, mode)

    def _row(self, state, mode):
        return _adjacent_heat_bath(self, state, mode)

    def extremal_states(self):
        ident = Permutation.identity(self.size)
        return ident, tuple.__new__(Permutation, reversed(ident))


@dataclass(frozen=True)
class ConstantBias(ChainSpec):
    """Every adjacent pair ends with the larger label at the lower index w.p. ``p``.

    The stationary law is proportional to (p/(1-p))**inv(sigma), so the identity
    is the lightest state and the reversal the heaviest.
    """

    size: int
    p: Fraction
    variant: ClassVar[str] = "constant_bias"

    def __post_init__(self):
        object.__setattr__(self, "p", to_fraction(self.p))
        if not HALF <= self.p < 1:
            raise DomainError(f"constant bias needs 1/2 <= p < 1, got {self.p}")
        if self.size < 1:
            raise DomainError("n must be at least 1")

    @property
    def space(self):
        return StateSpace.permutations(self.size)

    def pair_win(self, x, y, mode):
        return _num(1 - self.p if x > y else self.p, mode)

    def _row(self, state, mode):
        return _adjacent_heat_bath(self, state, mode)

    def extremal_states(self):
        ident = Permutation.identity(self.size)
        return tuple.__new__(Permutation, reversed(ident)), ident


@dataclass(frozen=True)
class Gladiator(ChainSpec):
    """Gladiator chain: g beats g' and takes the higher position w.p. s(g)/(s(g)+s(g')).

    ``strengths[g-1]`` is the strength of gladiator g. ``teams`` is the team
    partition; when omitted it is derived by grouping equal strengths.
    """

    strengths: tuple
    teams: tuple = None
    variant: ClassVar[str] = "gladiator"

    def __post_init__(self):
        s = parse_strengths(self.strengths)
        object.__setattr__(self, "strengths", s)
        n = len(s)
        if self.teams is None:
            groups = {}
            for g, sg in enumerate(s, start=1):
                groups.setdefault(sg, []).append(g)
            teams = tuple(tuple(v) for v in sorted(groups.values(), key=lambda t: t[0]))
        else:
            teams = tuple(tuple(sorted(int(g) for g in t)) for t in self.teams)
            flat = sorted(g for t in teams for g in t)
            if flat != list(range(1, n + 1)) or any(not t for t in teams):
                raise DomainError(f"teams {teams} do not partition 1..{n}")
            for t in teams:
                if len({s[g - 1] for g in t}) != 1:
                    raise DomainError(f"team {t} mixes strengths")
        object.__setattr__(self, "teams", teams)

    @classmethod
    def from_teams(cls, teams, team_strengths) -> "Gladiator":
        team_strengths = parse_strengths(team_strengths)
        if len(teams) != len(team_strengths):
            raise DomainError("one strength per team is required")
        n = sum(len(t) for t in teams)
        s = [None] * n
        for t, st in zip(teams, team_strengths):
            for g in t:
                if not 1 <= g <= n:
                    raise DomainError(f"gladiator {g} outside 1..{n}")
                s[g - 1] = st
        if any(x is None for x in s):
            raise DomainError(f"teams {teams} do not partition 1..{n}")
        return cls(tuple(s), tuple(tuple(t) for t in teams))

    @property
    def space(self):
        return StateSpace.permutations(len(self.strengths))

    def pair_win(self, x, y, mode):
        sx, sy = self.strengths[x - 1], self.strengths[y - 1]
        return _num(sx / (sx + sy), mode)

    def _row(self, state, mode):
        return _adjacent_heat_bath(self, state, mode)

    def team_of(self, g: int) -> int:
        for k, t in enumerate(self.teams):
            if g in t:
                return k
        raise DomainError(f"no gladiator {g}")

    def particle_system(self) -> "ParticleSystem":
        """The linear particle system obtained by merging each team into one type."""
        return ParticleSystem(tuple(len(t) for t in self.teams),
                              tuple(self.strengths[t[0] - 1] for t in self.teams))

    def extremal_states(self):
        order = sorted(range(1, len(self.strengths) + 1), key=lambda g: (self.strengths[g - 1], g))
        return (tuple.__new__(Permutation, order),
                tuple.__new__(Permutation, reversed(order)))


@dataclass(frozen=True)
class ParticleSystem(ChainSpec):
    """Linear particle system over k types with ``counts[t]`` copies of type t."""

    counts: tuple
    strengths: tuple
    variant: ClassVar[str] = "particle_system"

    def __post_init__(self):
        object.__setattr__(self, "counts", tuple(int(c) for c in self.counts))
        object.__setattr__(self, "strengths", parse_strengths(self.strengths))
        if len(self.counts) != len(self.strengths):
            raise DomainError("one strength per particle type is required")
        StateSpace.arrangements(self.counts)

    @property
    def space(self):
        return StateSpace.arrangements(self.counts)

    def pair_win(self, x, y, mode):
        if x == y:
            return None
        sx, sy = self.strengths[x], self.strengths[y]
        return _num(sx / (sx + sy), mode)

    def _row(self, state, mode):
        return _adjacent_heat_bath(self, state, mode)

    def extremal_states(self):
        order = sorted(range(len(self.counts)), key=lambda t: (self.strengths[t], t))
        word = [t for t in order for _ in range(self.counts[t])]
        return (tuple.__new__(Arrangement, word),
                tuple.__new__(Arrangement, reversed(word)))


A, B, C = 0, 1, 2


@dataclass(frozen=True)
class JumpHop(ChainSpec):
    """The auxiliary three-type chain with Jump and Hop moves.

    A uniformly random position pair i < j is proposed. A Jump exchanges an A
    and a C whose interior is all B; a Hop exchanges an A or C with the far end
    of a run of B's. The pair is put with the stronger type at the higher index
    with probability r**(j-i) / (1 + r**(j-i)), r the strength ratio.
    Any other proposal leaves the state unchanged.
    """

    counts: tuple
    strengths: tuple
    variant: ClassVar[str] = "jump_hop"

    def __post_init__(self):
        object.__setattr__(self, "counts", tuple(int(c) for c in self.counts))
        object.__setattr__(self, "strengths", parse_strengths(self.strengths))
        if len(self.counts) != 3 or len(self.strengths) != 3:
            raise DomainError("the Jump/Hop chain needs exactly three particle types")
        StateSpace.arrangements(self.counts)

    @property
    def space(self):
        return StateSpace.arrangements(self.counts)

    def ratio_condition(self, threshold=HALF) -> bool:
        return check_ratio_condition(self.strengths, threshold)

    def move(self, state, i: int, j: int):
        """Classify the proposal (i, j), 0-based: ``("jump"|"hop", low, high, gap)`` or None.

        ``low`` and ``high`` are the types of the pair in their increasing
        (weak-at-lower-index) order.
        """
        x, y = state[i], state[j]
        if x == y:
            return None
        interior_b = all(state[k] == B for k in range(i + 1, j))
        if {x, y} == {A, C} and interior_b:
            return ("jump", A, C, j - i)
        if interior_b and B in (x, y):
            other = x if y == B else y
            low, high = (A, B) if other == A else (B, C)
            return ("hop", low, high, j - i)
        return None

    def _row(self, state, mode):
        n = len(state)
        row = defaultdict(lambda: _num(0, mode))
        if n == 1:
            row[state] = _num(1, mode)
            return row
        w = _num(Fraction(2, n * (n - 1)), mode)
        s = self.strengths
        for i in range(n - 1):
            for j in range(i + 1, n):
                mv = self.move(state, i, j)
                if mv is None:
                    row[state] += w
                    continue
                _, low, high, gap = mv
                p_inc, p_dec = order_probability(_num(s[low], mode), _num(s[high], mode), gap)
                inc = list(state)
                inc[i], inc[j] = low, high
                dec = list(state)
                dec[i], dec[j] = high, low
                row[tuple.__new__(Arrangement, inc)] += w * p_inc
                row[tuple.__new__(Arrangement, dec)] += w * p_dec
        return row

    def extremal_states(self):
        return ParticleSystem(self.counts, self.strengths).extremal_states()


@dataclass(frozen=True)
class LeagueHierarchy(ChainSpec):
    """Adjacent heat-bath swaps whose odds come from the lowest common ancestor."""

    tree: TernaryTree
    variant: ClassVar[str] = "league"

    @property
    def space(self):
        return StateSpace.permutations(self.tree.n)

    def pair_win(self, x, y, mode):
        sx, sy = self.tree.pair_strengths(x, y)
        return _num(sx / (sx + sy), mode)

    def _row(self, state, mode):
        return _adjacent_heat_bath(self, state, mode)

    def extremal_states(self):
        ident = Permutation.identity(self.tree.n)
        return ident, tuple.__new__(Permutation, reversed(ident))


@dataclass(frozen=True)
class MTree(ChainSpec):
    """Swap sigma(i), sigma(j) when no label strictly between them lies under lca(sigma(i), sigma(j))."""

    tree: TernaryTree
    variant: ClassVar[str] = "mtree"

    @property
    def space(self):
        return StateSpace.permutations(self.tree.n)

    def pair_win(self, x, y, mode):
        sx, sy = self.tree.pair_strengths(x, y)
        return _num(sx / (sx + sy), mode)

    def allowed(self, state, i: int, j: int) -> bool:
        lo, hi = self.tree.lca_interval(state[i], state[j])
        return not any(lo <= state[k] <= hi for k in range(i + 1, j))

    def _row(self, state, mode):
        n = len(state)
        row = defaultdict(lambda: _num(0, mode))
        if n == 1:
            row[state] = _num(1, mode)
            return row
        w = _num(Fraction(2, n * (n - 1)), mode)
        for i in range(n - 1):
            for j in range(i + 1, n):
                if not self.allowed(state, i, j):
                    row[state] += w
                    continue
                x, y = state[i], state[j]
                p = self.pair_win(x, y, mode)
                swapped = list(state)
                swapped[i], swapped[j] = y, x
                row[tuple.__new__(Permutation, swapped)] += w * p
                row[state] += w * (1 - p)
        return row

    def extremal_states(self):
        return LeagueHierarchy(self.tree).extremal_states()


@dataclass(frozen=True)
class MA1(ChainSpec):
    """Move-ahead-one list: record g is requested w.p. s(g)/sum(s) and advances one place.

    "Ahead" is toward the higher index, matching the gladiator orientation;
    a request for the record already at position n changes nothing.
    """

    strengths: tuple
    variant: ClassVar[str] = "ma1"

    def __post_init__(self):
        object.__setattr__(self, "strengths", parse_strengths(self.strengths))

    @property
    def space(self):
        return StateSpace.permutations(len(self.strengths))

    def _row(self, state, mode):
        n = len(state)
        total = sum(self.strengths)
        row = defaultdict(lambda: _num(0, mode))
        for k, g in enumerate(state):
            p = _num(self.strengths[g - 1] / total, mode)
            if k == n - 1:
                row[state] += p
                continue
            nxt = list(state)
            nxt[k], nxt[k + 1] = nxt[k + 1], nxt[k]
            row[tuple.__new__(Permutation, nxt)] += p
        return row

    def extremal_states(self):
        return Gladiator(self.strengths).extremal_states()


VARIANTS = {cls.variant: cls for cls in
            (Simple, ConstantBias, Gladiator, ParticleSystem, JumpHop, LeagueHierarchy, MTree, MA1)}


def transition_row(spec: ChainSpec, state, mode: str = "rational") -> list[tuple]:
    """Full outgoing distribution of ``state`` as ``[(next_state, probability), ...]``.

    Includes self-loop mass; sorted by state in lexicographic order.
    """
    _check_mode(mode)
    if not spec.space.contains(tuple(state)):
        raise DomainError(f"{state!r} is not a state of {spec.space.space_id}")
    if spec.space.kind == "perm" and not isinstance(state, Permutation):
        state = tuple.__new__(Permutation, state)
    elif spec.space.kind == "arr" and not isinstance(state, Arrangement):
        state = tuple.__new__(Arrangement, state)
    row = spec._row(state, mode)
    return sorted(((s, p) for s, p in row.items() if p != 0), key=lambda sp: sp[0])


@lru_cache(maxsize=1 << 16)
def _cumulative_row(spec: ChainSpec, state):
    row = transition_row(spec, state, "float")
    return [s for s, _ in row], np.cumsum([p for _, p in row])


def step(spec: ChainSpec, state, rng):
    """One random transition drawn from ``transition_row`` using ``rng.random()``."""
    states, cum = _cumulative_row(spec, tuple(state))
    k = int(np.searchsorted(cum, rng.random(), side="right"))
    return states[min(k, len(states) - 1)]


def trajectory(spec: ChainSpec, state, steps: int, rng) -> list:
    out = [state]
    for _ in range(steps):
        state = step(spec, state, rng)
        out.append(state)
    return out


def spec_to_config(spec: ChainSpec) -> dict:
    """Flat, string-valued description of a chain (strengths as ``"p/q"`` text)."""
    cfg = {"variant": spec.variant}
    if isinstance(spec, (Simple, ConstantBias)):
        cfg["n"] = spec.size
        if isinstance(spec, ConstantBias):
            cfg["p"] = str(spec.p)
    elif isinstance(spec, (Gladiator, MA1)):
        cfg["strengths"] = [str(s) for s in spec.strengths]
        if isinstance(spec, Gladiator):
            cfg["teams"] = [list(t) for t in spec.teams]
    elif isinstance(spec, (ParticleSystem, JumpHop)):
        cfg["counts"] = list(spec.counts)
        cfg["strengths"] = [str(s) for s in spec.strengths]
    elif isinstance(spec, (LeagueHierarchy, MTree)):
        cfg["tree"] = repr(spec.tree.to_nested())
        cfg["node_strengths"] = [",".join(map(str, s)) for s in spec.tree.strengths_preorder()]
    return cfg


def spec_from_config(cfg: dict) -> ChainSpec:
    cfg = dict(cfg)
    variant = cfg.pop("variant", None)
    if variant not in VARIANTS:
        raise DomainError(f"unknown chain variant {variant!r}; expected one of {sorted(VARIANTS)}")
    allowed = {
        "simple": {"n"}, "constant_bias": {"n", "p"}, "gladiator": {"strengths", "teams"},
        "ma1": {"strengths"}, "particle_system": {"counts", "strengths"},
        "jump_hop": {"counts", "strengths"}, "league": {"tree", "node_strengths"},
        "mtree": {"tree", "node_strengths"},
    }[variant]
    unknown = set(cfg) - allowed
    if unknown:
        raise DomainError(f"unknown keys for {variant}: {sorted(unknown)}")
    try:
        if variant == "simple":
            return Simple(int(cfg["n"]))
        if variant == "constant_bias":
            return ConstantBias(int(cfg["n"]), cfg["p"])
        if variant == "gladiator":
            teams = cfg.get("teams")
            return Gladiator(parse_strengths(cfg["strengths"]),
                             None if teams is None else tuple(tuple(t) for t in teams))
        if variant == "ma1":
            return MA1(parse_strengths(cfg["strengths"]))
        if variant == "particle_system":
            return ParticleSystem(tuple(cfg["counts"]), parse_strengths(cfg["strengths"]))
        if variant == "jump_hop":
            return JumpHop(tuple(cfg["counts"]), parse_strengths(cfg["strengths"]))
        tree = TernaryTree.from_nested(cfg["tree"], cfg["node_strengths"])
        return LeagueHierarchy(tree) if variant == "league" else MTree(tree)
    except KeyError as exc:
        raise DomainError(f"missing chain key {exc} for variant {variant}") from exc


def num_pairs(n: int) -> int:
    return math.comb(n, 2)
