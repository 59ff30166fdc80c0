"""Stationary weights, normalized distributions, detailed balance and q-binomials.

All product-form weights use exponent = 1-based position, so the gladiator
weight is prod_g s(g)**position(g). Float mode works with log-weights to
avoid overflow for long lists.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .chains import (MA1, ChainSpec, ConstantBias, Gladiator, JumpHop, LeagueHierarchy,
                     MTree, ParticleSystem, Simple, _check_mode)
from .combinatorics import Arrangement, enumerate_states, inversions
from .errors import DomainError
from .trees import to_fraction


@dataclass(frozen=True)
class StationaryWeight:
    """Unnormalized stationary weight; ``exact`` is None in float mode."""

    log: float
    exact: Fraction | None = None

    @property
    def value(self):
        return self.exact if self.exact is not None else math.exp(self.log)

    def __float__(self):
        return float(self.value)


def _log(x: Fraction) -> float:
    # math.log on huge Fractions would overflow through float conversion
    return math.log(x.numerator) - math.log(x.denominator)


def _factors(spec: ChainSpec, state):
    """Yield (base, exponent) pairs whose product is the weight of ``state``."""
    if isinstance(spec, Simple):
        return
    if isinstance(spec, ConstantBias):
        yield spec.p / (1 - spec.p), inversions(state)
    elif isinstance(spec, (Gladiator, MA1)):
        for pos, g in enumerate(state, start=1):
            yield spec.strengths[g - 1], pos
    elif isinstance(spec, (ParticleSystem, JumpHop)):
        for pos, t in enumerate(state, start=1):
            yield spec.strengths[t], pos
    elif isinstance(spec, (LeagueHierarchy, MTree)):
        # one factor per position pair: the strength, at their common ancestor,
        # of whichever label sits at the higher index
        tree = spec.tree
        n = len(state)
        for p in range(n):
            for q in range(p + 1, n):
                yield tree.pair_strengths(state[q], state[p])[0], 1
    else:
        raise DomainError(f"no product-form weight for {type(spec).__name__}")


def stationary_weight(spec: ChainSpec, state, mode: str = "rational") -> StationaryWeight:
    """Unnormalized stationary weight of ``state`` under ``spec``."""
    _check_mode(mode)
    if not spec.space.contains(tuple(state)):
        raise DomainError(f"{state!r} is not a state of {spec.space.space_id}")
    factors = list(_factors(spec, state))
    log = sum(e * _log(b) for b, e in factors)
    if mode == "float":
        return StationaryWeight(log)
    exact = Fraction(1)
    for b, e in factors:
        exact *= b**e
    return StationaryWeight(log, exact)


@dataclass(frozen=True)
class Distribution:
    """A probability vector over an enumerated space, in enumeration order.

    ``probs`` holds Fractions in rational mode and is a float numpy array in
    float mode. ``states`` may be None for abstract kernels.
    """

    probs: object
    space_id: str
    states: tuple | None = None

    @property
    def mode(self) -> str:
        return "float" if isinstance(self.probs, np.ndarray) else "rational"

    def __len__(self):
        return len(self.probs)

    def __getitem__(self, key):
        if isinstance(key, (int, np.integer)):
            return self.probs[key]
        if self.states is None:
            raise DomainError("distribution has no state labels")
        return self.probs[self.states.index(key)]

    def as_array(self) -> np.ndarray:
        return np.asarray([float(p) for p in self.probs], dtype=float)

    def total(self):
        return sum(self.probs) if self.mode == "rational" else float(self.probs.sum())

    @property
    def pi_min(self):
        return min(self.probs)

    def as_dict(self) -> dict:
        if self.states is None:
            return dict(enumerate(self.probs))
        return dict(zip(self.states, self.probs))

    def to_csv(self, fh=None) -> str:
        """CSV with columns ``state,probability`` in enumeration order."""
        out = io.StringIO()
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(["state", "probability"])
        labels = self.states if self.states is not None else range(len(self.probs))
        for s, p in zip(labels, self.probs):
            writer.writerow([str(s), str(p) if self.mode == "rational" else repr(float(p))])
        text = out.getvalue()
        if fh is not None:
            fh.write(text)
        return text


def stationary_distribution(spec: ChainSpec, mode: str = "rational", cap=None) -> Distribution:
    """Normalized product-form stationary law over the enumerated space."""
    _check_mode(mode)
    states = enumerate_states(spec, cap)
    if mode == "rational":
        weights = [stationary_weight(spec, s).exact for s in states]
        z = sum(weights)
        return Distribution(tuple(w / z for w in weights), spec.space.space_id, states)
    logs = np.array([stationary_weight(spec, s, "float").log for s in states])
    logs -= logs.max()
    w = np.exp(logs)
    return Distribution(w / w.sum(), spec.space.space_id, states)


def normalizing_constant(spec: ChainSpec, cap=None) -> Fraction:
    return sum(stationary_weight(spec, s).exact for s in enumerate_states(spec, cap))


def detailed_balance_violation(kernel, dist: Distribution, return_edge: bool = False):
    """max_{x,y} |pi(x)P(x,y) - pi(y)P(y,x)| over the kernel's support.

    With ``return_edge`` the worst ordered pair of indices (or None) is also returned.
    """
    if len(dist) != kernel.size:
        raise DomainError("kernel and distribution have different sizes")
    if dist.space_id != kernel.space_id:
        raise DomainError(f"space mismatch: {dist.space_id} vs {kernel.space_id}")
    lookup = [dict(kernel.row(i)) for i in range(kernel.size)]
    zero = Fraction(0) if kernel.mode == "rational" else 0.0
    worst, edge = zero, None
    probs = dist.probs
    for x in range(kernel.size):
        for y, pxy in lookup[x].items():
            if y == x:
                continue
            gap = abs(probs[x] * pxy - probs[y] * lookup[y].get(x, zero))
            if gap > worst:
                worst, edge = gap, (x, y)
    return (worst, edge) if return_edge else worst


# q-binomials

@dataclass(frozen=True)
class QPolynomial:
    """Integer polynomial sum_t coeffs[t] * q**t."""

    coeffs: tuple[int, ...]

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def __getitem__(self, t: int) -> int:
        return self.coeffs[t] if 0 <= t < len(self.coeffs) else 0

    def __call__(self, q):
        acc = 0
        for c in reversed(self.coeffs):
            acc = acc * q + c
        return acc

    def is_palindromic(self) -> bool:
        return self.coeffs == self.coeffs[::-1]

    def __str__(self):
        terms = []
        for t, c in enumerate(self.coeffs):
            if c == 0:
                continue
            mono = "" if t == 0 else ("q" if t == 1 else f"q^{t}")
            coef = str(c) if (c != 1 or t == 0) else ""
            terms.append(coef + mono)
        return " + ".join(terms) if terms else "0"


def _check_mr(m: int, r: int):
    if m < 0 or r < 0 or r > m:
        raise DomainError(f"need 0 <= r <= m, got m={m}, r={r}")


def qbinom(m: int, r: int) -> QPolynomial:
    """Gaussian binomial via the q-Pascal rule [m,r] = [m-1,r-1] + q**r [m-1,r]."""
    _check_mr(m, r)
    # rows[k] holds [j, k] for the current j
    row = [(1,)] + [None] * r
    for j in range(1, m + 1):
        new = [(1,)] + [None] * r
        for k in range(1, min(j, r) + 1):
            a = row[k - 1]
            b = row[k] if k <= j - 1 else None
            size = max(len(a), (len(b) + k) if b else 0)
            c = [0] * size
            for t, v in enumerate(a):
                c[t] += v
            if b:
                for t, v in enumerate(b):
                    c[t + k] += v
            new[k] = tuple(c)
        row = new
    return QPolynomial(row[r])


def qbinom_eval(m: int, r: int, q) -> Fraction:
    """Exact value of the Gaussian binomial at rational q via the product formula."""
    _check_mr(m, r)
    q = to_fraction(q)
    if q == 1:
        return Fraction(math.comb(m, r))
    out = Fraction(1)
    for i in range(1, r + 1):
        out *= (1 - q ** (m - i + 1)) / (1 - q**i)
    return out


def qbinom_bound_check(m: int, r: int, q) -> bool:
    """Check [m, r]_q < (1-q)**-r < 2**r < (1/q)**r exactly.

    For r = 0 every member equals 1; that degenerate chain is reported as holding.
    """
    _check_mr(m, r)
    q = to_fraction(q)
    if not 0 < q < Fraction(1, 2):
        raise DomainError(f"the bound needs 0 < q < 1/2, got {q}")
    if r == 0:
        return True
    lhs = qbinom_eval(m, r, q)
    middle = (1 / (1 - q)) ** r
    return lhs < middle < 2**r < (1 / q) ** r


def partition_sum_identity_check(b: int, c: int, q):
    """Compare sum over Omega_{0,b,c} of pi(s)/pi(B^b C^c) with [b+c, b]_q.

    Strengths are s_B = q, s_C = 1. Returns ``(lhs, rhs, lhs == rhs)``.
    """
    q = to_fraction(q)
    if not 0 < q < 1:
        raise DomainError(f"q must lie in (0, 1), got {q}")
    if b < 0 or c < 0 or b > 8 or c > 8:
        raise DomainError("b and c must lie in 0..8")
    if b + c == 0:
        return Fraction(1), Fraction(1), True
    spec = ParticleSystem((0, b, c), (Fraction(1), q, Fraction(1)))
    base = stationary_weight(spec, Arrangement([1] * b + [2] * c)).exact
    lhs = sum(stationary_weight(spec, s).exact for s in enumerate_states(spec)) / base
    rhs = qbinom_eval(b + c, b, q)
    return lhs, rhs, lhs == rhs


def count_box_partitions(t: int, rows: int, cols: int) -> int:
    """Number of partitions of t with at most ``rows`` parts, each at most ``cols``."""
    # independent of the q-Pascal recurrence; used as an oracle
    def count(total, parts, largest):
        if total == 0:
            return 1
        if parts == 0:
            return 0
        return sum(count(total - k, parts - 1, k) for k in range(1, min(largest, total) + 1))

    return count(t, rows, cols)
