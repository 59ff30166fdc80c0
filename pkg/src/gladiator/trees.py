"""Strength-labelled ternary (or binary) trees for league-hierarchy chains."""

from __future__ import annotations

import ast
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping

from .errors import DomainError

TAGS_BY_ARITY = {2: ("L", "R"), 3: ("L", "C", "R")}


def to_fraction(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, float):
        return Fraction(repr(value))
    try:
        return Fraction(str(value).strip())
    except (ValueError, ZeroDivisionError) as exc:
        raise DomainError(f"cannot parse {value!r} as a rational") from exc


@dataclass(frozen=True)
class Node:
    tags: tuple[str, ...]
    children: tuple  # Node or int leaf label, aligned with tags
    strengths: tuple[Fraction, ...]  # aligned with tags, strictly increasing
    lo: int  # smallest leaf label below this node
    hi: int  # largest leaf label below this node


@dataclass(frozen=True)
class TernaryTree:
    """Rooted tree whose leaves read 1..n left to right.

    Every internal node has two children (tags L, R) or three (L, C, R) and a
    strength per child with S_L < S_C < S_R. For a pair of leaves the chains
    only need the two strengths attached at their lowest common ancestor and
    the leaf interval of that ancestor, which are precomputed here.
    """

    root: Node
    n: int
    _pair: dict = field(default=None, repr=False, compare=False, hash=False)

    @classmethod
    def from_nested(cls, nested, strengths) -> "TernaryTree":
        """Build from nested tuples of leaf labels, e.g. ``((1, 2, 3), 4, (5, 6))``.

        ``strengths`` is either one mapping ``{"L": .., "C": .., "R": ..}`` used at
        every node, or a sequence with one entry per internal node in pre-order;
        each entry is a mapping or a tuple aligned with the node's tags.
        """
        if isinstance(nested, str):
            nested = ast.literal_eval(nested)
        per_node = None if isinstance(strengths, Mapping) else list(strengths)
        counter = iter(range(10**9))

        def build(sub):
            if isinstance(sub, int):
                return sub
            sub = tuple(sub)
            if len(sub) not in TAGS_BY_ARITY:
                raise DomainError(f"internal nodes need 2 or 3 children, got {len(sub)}")
            tags = TAGS_BY_ARITY[len(sub)]
            k = next(counter)
            if per_node is None:
                spec = strengths
            else:
                if k >= len(per_node):
                    raise DomainError("fewer strength entries than internal nodes")
                spec = per_node[k]
            if isinstance(spec, str):
                spec = spec.split(",")
            if isinstance(spec, Mapping):
                try:
                    values = tuple(to_fraction(spec[t]) for t in tags)
                except KeyError as exc:
                    raise DomainError(f"missing strength for child tag {exc}") from exc
            else:
                values = tuple(to_fraction(v) for v in spec)
                if len(values) != len(tags):
                    raise DomainError(f"node with tags {tags} needs {len(tags)} strengths")
            children = tuple(build(c) for c in sub)
            lo = children[0] if isinstance(children[0], int) else children[0].lo
            hi = children[-1] if isinstance(children[-1], int) else children[-1].hi
            return Node(tags, children, values, lo, hi)

        root = build(nested)
        if isinstance(root, int):
            raise DomainError("a tree needs at least one internal node")
        if per_node is not None and next(counter) != len(per_node):
            raise DomainError("more strength entries than internal nodes")
        tree = cls(root, root.hi)
        tree._validate()
        return tree

    def _validate(self):
        labels = []

        def walk(node):
            for child in node.children:
                if isinstance(child, int):
                    labels.append(child)
                else:
                    walk(child)
            if any(s <= 0 for s in node.strengths):
                raise DomainError("tree strengths must be positive")
            if any(a >= b for a, b in zip(node.strengths, node.strengths[1:])):
                raise DomainError(f"node strengths must increase L < C < R: {node.strengths}")

        walk(self.root)
        if labels != list(range(1, len(labels) + 1)):
            raise DomainError(f"leaves must read 1..n left to right, got {labels}")
        object.__setattr__(self, "n", len(labels))
        object.__setattr__(self, "_pair", self._pair_table())

    def internal_nodes(self) -> list[Node]:
        out = []

        def walk(node):
            out.append(node)
            for child in node.children:
                if not isinstance(child, int):
                    walk(child)

        walk(self.root)
        return out

    def _pair_table(self):
        table = {}
        for node in self.internal_nodes():
            groups = []
            for child, s in zip(node.children, node.strengths):
                if isinstance(child, int):
                    groups.append((range(child, child + 1), s))
                else:
                    groups.append((range(child.lo, child.hi + 1), s))
            for gi, (ra, sa) in enumerate(groups):
                for gj, (rb, sb) in enumerate(groups):
                    if gi == gj:
                        continue
                    for a in ra:
                        for b in rb:
                            table[a, b] = (sa, sb, node.lo, node.hi, node, node.tags[gi])
        return table

    def pair_strengths(self, a: int, b: int) -> tuple[Fraction, Fraction]:
        """Strengths of the children of lca(a, b) containing ``a`` and ``b``."""
        sa, sb = self._pair[a, b][:2]
        return sa, sb

    def lca_interval(self, a: int, b: int) -> tuple[int, int]:
        """Leaf-label interval of the subtree rooted at lca(a, b)."""
        return self._pair[a, b][2:4]

    def lca(self, a: int, b: int) -> Node:
        return self._pair[a, b][4]

    def side(self, a: int, b: int) -> str:
        """Tag of the child of lca(a, b) that contains ``a``."""
        return self._pair[a, b][5]

    def ratios(self) -> list[Fraction]:
        """All consecutive weak/strong ratios S_L/S_C, S_C/S_R (or S_L/S_R)."""
        out = []
        for node in self.internal_nodes():
            s = node.strengths
            out.extend(s[k] / s[k + 1] for k in range(len(s) - 1))
        return out

    def max_ratio(self) -> Fraction:
        return max(self.ratios())

    def ratio_condition(self, threshold=Fraction(1, 2), direction: str = "weak/strong") -> bool:
        """Check the per-node ratio constraint.

        ``weak/strong`` requires every weak/strong ratio below ``threshold``;
        ``strong/weak`` requires every strong/weak ratio above it.
        """
        threshold = to_fraction(threshold)
        if direction == "weak/strong":
            return all(r < threshold for r in self.ratios())
        if direction == "strong/weak":
            return all(1 / r > threshold for r in self.ratios())
        raise DomainError(f"unknown ratio direction {direction!r}")

    def to_nested(self):
        def walk(node):
            return tuple(c if isinstance(c, int) else walk(c) for c in node.children)

        return walk(self.root)

    def strengths_preorder(self) -> list[tuple[Fraction, ...]]:
        return [node.strengths for node in self.internal_nodes()]


def balanced_ternary(n_leaves: int, strengths) -> TernaryTree:
    """A left-packed tree with fan-out three (two where only two leaves remain)."""
    def build(labels):
        if len(labels) == 1:
            return labels[0]
        if len(labels) == 2:
            return tuple(labels)
        k = len(labels)
        cuts = [k // 3 + (1 if k % 3 > 0 else 0), k // 3 + (1 if k % 3 > 1 else 0)]
        a, b = cuts[0], cuts[0] + cuts[1]
        return (build(labels[:a]), build(labels[a:b]), build(labels[b:]))

    return TernaryTree.from_nested(build(list(range(1, n_leaves + 1))), strengths)
