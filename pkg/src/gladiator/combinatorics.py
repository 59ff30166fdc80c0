"""State-space objects: permutations, multiset arrangements, ranking, lattice paths.

Positions are 1-based in the public API: position 1 is the head of the list,
position n the tail. States are stored as tuples so that they hash and sort
cheaply; lexicographic tuple order is the canonical enumeration order.
"""

from __future__ import annotations

import itertools
import math
import string
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterator, Sequence

from .errors import DomainError, SizeLimitError, UnsupportedDimensionError

PERMUTATION_CAP = 10
ARRANGEMENT_CAP = 16

_LETTERS = string.ascii_uppercase


class Permutation(tuple):
    """A bijection of {1..n} listed by position: ``p[k-1]`` sits at position k."""

    def __new__(cls, items: Sequence[int] = ()):
        items = tuple(int(x) for x in items)
        if sorted(items) != list(range(1, len(items) + 1)):
            raise DomainError(f"not a permutation of 1..{len(items)}: {items}")
        return tuple.__new__(cls, items)

    @classmethod
    def identity(cls, n: int) -> "Permutation":
        return tuple.__new__(cls, range(1, n + 1))

    @property
    def n(self) -> int:
        return len(self)

    def position(self, label: int) -> int:
        """1-based position of ``label``."""
        return self.index(label) + 1

    def inverse(self) -> "Permutation":
        inv = [0] * len(self)
        for pos, label in enumerate(self, start=1):
            inv[label - 1] = pos
        return tuple.__new__(Permutation, inv)

    def compose(self, other: "Permutation") -> "Permutation":
        """Return ``self ∘ other`` as maps on {1..n}."""
        if len(other) != len(self):
            raise DomainError("cannot compose permutations of different sizes")
        return tuple.__new__(Permutation, (self[x - 1] for x in other))

    def __str__(self) -> str:
        return ",".join(map(str, self))

    def __repr__(self) -> str:
        return f"Permutation({tuple(self)!r})"


class Arrangement(tuple):
    """A word over particle types 0..k-1 (rendered as letters A, B, C, ...)."""

    def __new__(cls, word: Sequence[int] | str = ()):
        if isinstance(word, str):
            return cls.from_string(word)
        word = tuple(int(x) for x in word)
        if any(x < 0 for x in word):
            raise DomainError(f"negative particle type in {word}")
        return tuple.__new__(cls, word)

    @classmethod
    def from_string(cls, text: str) -> "Arrangement":
        """Parse ``"ABCA"`` (letters) or ``"0120"`` (digits)."""
        text = text.strip()
        if text.isdigit():
            return tuple.__new__(cls, (int(ch) for ch in text))
        if text and all(ch in _LETTERS for ch in text):
            return tuple.__new__(cls, (_LETTERS.index(ch) for ch in text))
        if not text:
            return tuple.__new__(cls, ())
        raise DomainError(f"cannot parse arrangement {text!r}")

    def counts(self, ntypes: int | None = None) -> tuple[int, ...]:
        k = (max(self) + 1 if self else 0) if ntypes is None else ntypes
        if self and max(self) >= k:
            raise DomainError(f"arrangement uses more than {k} types")
        out = [0] * k
        for x in self:
            out[x] += 1
        return tuple(out)

    def __str__(self) -> str:
        return "".join(_LETTERS[x] for x in self)

    def __repr__(self) -> str:
        return f"Arrangement({str(self)!r})"


def state_str(state) -> str:
    return str(state)


@dataclass(frozen=True)
class StateIndex:
    idx: int
    space_id: str


@dataclass(frozen=True)
class StateSpace:
    """Descriptor of an enumerable space: all permutations of n, or Ω(counts)."""

    kind: str  # "perm" or "arr"
    n: int
    counts: tuple[int, ...] = ()

    @classmethod
    def permutations(cls, n: int) -> "StateSpace":
        if n < 1:
            raise DomainError("permutation size must be at least 1")
        return cls("perm", n)

    @classmethod
    def arrangements(cls, counts: Sequence[int]) -> "StateSpace":
        counts = tuple(int(c) for c in counts)
        if not counts or any(c < 0 for c in counts) or sum(counts) < 1:
            raise DomainError(f"bad particle counts {counts}")
        return cls("arr", sum(counts), counts)

    @property
    def space_id(self) -> str:
        if self.kind == "perm":
            return f"perm:{self.n}"
        return "arr:" + ",".join(map(str, self.counts))

    @property
    def size(self) -> int:
        if self.kind == "perm":
            return math.factorial(self.n)
        return multinomial(self.counts)

    def contains(self, state) -> bool:
        if self.kind == "perm":
            return isinstance(state, tuple) and sorted(state) == list(range(1, self.n + 1))
        if not isinstance(state, tuple) or len(state) != self.n:
            return False
        try:
            return Arrangement(state).counts(len(self.counts)) == self.counts
        except DomainError:
            return False

    def parse_state(self, text: str):
        """Parse a state string in this space's rendering."""
        if self.kind == "perm":
            parts = text.replace(" ", "").split(",") if "," in text else list(text.strip())
            state = Permutation(int(x) for x in parts)
        else:
            state = Arrangement.from_string(text)
        if not self.contains(state):
            raise DomainError(f"state {text!r} is not in {self.space_id}")
        return state


def multinomial(counts: Sequence[int]) -> int:
    out = math.factorial(sum(counts))
    for c in counts:
        out //= math.factorial(c)
    return out


def _space_of(obj) -> StateSpace:
    if isinstance(obj, StateSpace):
        return obj
    space = getattr(obj, "space", None)
    if isinstance(space, StateSpace):
        return space
    raise DomainError(f"cannot derive a state space from {obj!r}")


def _arrangements(counts: list[int], prefix: list[int], n: int) -> Iterator[Arrangement]:
    if len(prefix) == n:
        yield tuple.__new__(Arrangement, prefix)
        return
    for t, c in enumerate(counts):
        if c:
            counts[t] -= 1
            prefix.append(t)
            yield from _arrangements(counts, prefix, n)
            prefix.pop()
            counts[t] += 1


@lru_cache(maxsize=64)
def _enumerate(space: StateSpace) -> tuple:
    if space.kind == "perm":
        return tuple(tuple.__new__(Permutation, p)
                     for p in itertools.permutations(range(1, space.n + 1)))
    return tuple(_arrangements(list(space.counts), [], space.n))


def enumerate_states(spec, cap: int | None = None) -> tuple:
    """Every state of the space of ``spec`` (a ChainSpec or StateSpace), in lex order."""
    space = _space_of(spec)
    if space.kind == "perm":
        limit = PERMUTATION_CAP if cap is None else cap
        if space.n > limit:
            raise SizeLimitError("permutation length", space.n, limit)
    else:
        limit = ARRANGEMENT_CAP if cap is None else cap
        if space.n > limit:
            raise SizeLimitError("arrangement length", space.n, limit)
    return _enumerate(space)


@lru_cache(maxsize=64)
def state_index_map(space: StateSpace) -> dict:
    return {s: i for i, s in enumerate(_enumerate(space))}


def rank(state, space=None) -> StateIndex:
    """Lexicographic position of ``state`` within its space."""
    if space is None:
        if isinstance(state, Permutation):
            space = StateSpace.permutations(len(state))
        elif isinstance(state, Arrangement):
            space = StateSpace.arrangements(state.counts())
        else:
            raise DomainError(f"cannot infer the space of {state!r}")
    space = _space_of(space)
    if not space.contains(tuple(state)):
        raise DomainError(f"{state!r} is not a state of {space.space_id}")
    if space.kind == "perm":
        idx = 0
        remaining = sorted(state)
        for pos, label in enumerate(state):
            k = remaining.index(label)
            idx += k * math.factorial(len(state) - pos - 1)
            remaining.pop(k)
        return StateIndex(idx, space.space_id)
    counts = list(space.counts)
    idx = 0
    for x in state:
        for t in range(x):
            if counts[t]:
                counts[t] -= 1
                idx += multinomial(counts)
                counts[t] += 1
        counts[x] -= 1
    return StateIndex(idx, space.space_id)


def unrank(idx, spec):
    """Inverse of :func:`rank`."""
    space = _space_of(spec)
    if isinstance(idx, StateIndex):
        if idx.space_id != space.space_id:
            raise DomainError(f"index belongs to {idx.space_id}, not {space.space_id}")
        idx = idx.idx
    if not 0 <= idx < space.size:
        raise DomainError(f"index {idx} out of range for {space.space_id}")
    if space.kind == "perm":
        remaining = list(range(1, space.n + 1))
        out = []
        for pos in range(space.n):
            block = math.factorial(space.n - pos - 1)
            k, idx = divmod(idx, block)
            out.append(remaining.pop(k))
        return tuple.__new__(Permutation, out)
    counts = list(space.counts)
    out = []
    for _ in range(space.n):
        for t in range(len(counts)):
            if not counts[t]:
                continue
            counts[t] -= 1
            block = multinomial(counts)
            if idx < block:
                out.append(t)
                break
            idx -= block
            counts[t] += 1
    return tuple.__new__(Arrangement, out)


def inversions(p: Sequence[int]) -> int:
    """Number of position pairs i < j with p(i) > p(j)."""
    # merge-sort count keeps this O(n log n) for the long words used in sampling
    def sort_count(xs):
        if len(xs) <= 1:
            return list(xs), 0
        mid = len(xs) // 2
        left, a = sort_count(xs[:mid])
        right, b = sort_count(xs[mid:])
        merged, c, i, j = [], 0, 0, 0
        while i < len(left) and j < len(right):
            if left[i] <= right[j]:
                merged.append(left[i])
                i += 1
            else:
                merged.append(right[j])
                c += len(left) - i
                j += 1
        merged.extend(left[i:])
        merged.extend(right[j:])
        return merged, a + b + c

    return sort_count(list(p))[1]


def to_lattice_path(arr: Sequence[int], ntypes: int | None = None) -> list[int]:
    """Map a word to unit lattice steps: a particle of type j is a step along axis j.

    Accepts an :class:`Arrangement` or a digit/letter string.
    """
    if isinstance(arr, str):
        arr = Arrangement.from_string(arr)
    k = ntypes if ntypes is not None else (max(arr) + 1 if arr else 0)
    if k > 3:
        raise UnsupportedDimensionError(f"lattice paths need at most 3 particle types, got {k}")
    if arr and max(arr) >= k:
        raise DomainError(f"word uses more than {k} types")
    return list(arr)


def lattice_points(steps: Sequence[int], ntypes: int) -> list[tuple[int, ...]]:
    """Vertices visited by a lattice path starting at the origin."""
    point = [0] * ntypes
    out = [tuple(point)]
    for axis in steps:
        point[axis] += 1
        out.append(tuple(point))
    return out
