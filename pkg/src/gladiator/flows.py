"""Canonical paths, comparison paths and their exact congestion.

Paths are tuples of states (the first is the source, the last the target);
a path with a single state has no edges. A path family maps each ordered
pair of states to a list of ``(flow weight, path)`` with weights summing to 1.
All congestion values are exact Fractions.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
from dataclasses import dataclass, field
from fractions import Fraction

from .chains import A, B, C, JumpHop
from .combinatorics import Arrangement, Permutation, enumerate_states
from .errors import DomainError
from .trees import TernaryTree

# X_t canonical paths


def _jump_down(cur, path, lo, hi):
    """Exchange the A/C pair at positions lo < hi (interior all B)."""
    cur[lo], cur[hi] = cur[hi], cur[lo]
    path.append(tuple(cur))


def _skeleton(cur, start):
    """Positions of the non-B particles at or after ``start``."""
    return [p for p in range(start, len(cur)) if cur[p] != B]


def _fix_skeleton(cur, path, start, target):
    """Jumps, leftmost first, until the first len(target) A/C letters from ``start`` read ``target``."""
    for slot, want in enumerate(target):
        skel = _skeleton(cur, start)
        q = next(k for k in range(slot, len(skel)) if cur[skel[k]] == want)
        # everything in skel[slot:q] is the other type, so each step is a Jump
        for k in range(q, slot, -1):
            _jump_down(cur, path, skel[k - 1], skel[k])


def _carry_out(cur, path, b, limit):
    """Move the B-run starting at ``b`` up until no skeleton letter at or below ``limit`` sits above it.

    ``limit`` is the position of the last letter that must end below the run;
    returns the updated position of that letter.
    """
    n = len(cur)
    while True:
        r = b
        while r < n and cur[r] == B:
            r += 1
        if r >= n or r > limit:
            return limit
        # the letter at r hops down over the whole run
        cur[b], cur[r] = cur[r], cur[b]
        path.append(tuple(cur))
        if r == limit:
            limit = b
        b += 1


def _hop_block(cur, start, k, m):
    """All Hop continuations for one block; returns [(weight, path_suffix)]."""
    p = next(q for q in range(start, len(cur)) if cur[q] == B)
    if p >= k:
        path = []
        while p > k:
            cur[p - 1], cur[p] = cur[p], cur[p - 1]
            path.append(tuple(cur))
            p -= 1
        return [(Fraction(1), cur, path)]
    skel = _skeleton(cur, start)
    x_m = skel[m - 1]
    inside = [q for q in range(start, x_m) if cur[q] == B]
    t = len(inside)
    out = {}
    weight = Fraction(1, 2**t)
    for size in range(t + 1):
        for subset in itertools.combinations(range(t), size):
            work = list(cur)
            path = []
            limit = x_m
            # members of S leave in decreasing index order, each carrying the run above it
            for idx in sorted(subset, reverse=True):
                b = _locate_b(work, start, idx)
                limit = _carry_out(work, path, b, limit)
            # the rest leave from the lowest up, the lowest carrying the others
            while True:
                below = [q for q in range(start, limit) if work[q] == B]
                if not below:
                    break
                limit = _carry_out(work, path, below[0], limit)
            key = tuple(path)
            if key in out:
                out[key] = (out[key][0] + weight, out[key][1])
            else:
                out[key] = (weight, work)
    return [(w, work, list(key)) for key, (w, work) in out.items()]


def _locate_b(work, start, idx):
    """Position of the idx-th B (0-based) at or after ``start``."""
    seen = -1
    for q in range(start, len(work)):
        if work[q] == B:
            seen += 1
            if seen == idx:
                return q
    raise AssertionError("B copy not found")


def build_xt_path(sigma, tau, spec: JumpHop | None = None) -> list[tuple[Fraction, tuple]]:
    """Weighted canonical paths from ``sigma`` to ``tau`` in the Jump/Hop chain.

    The blocks end at the B positions of ``tau``. For each block, Jumps order the
    A/C letters (lowest index first) and Hops then bring the block's B into
    place; when several B's must leave a block the flow splits evenly over the
    subsets S of those B's, moved out in decreasing index order.
    """
    sigma = Arrangement(sigma) if not isinstance(sigma, str) else Arrangement.from_string(sigma)
    tau = Arrangement(tau) if not isinstance(tau, str) else Arrangement.from_string(tau)
    if len(sigma) != len(tau) or sigma.counts(3) != tau.counts(3):
        raise DomainError(f"{sigma} and {tau} have different particle counts")
    if spec is not None and sigma.counts(3) != spec.counts:
        raise DomainError(f"{sigma} is not a state of {spec.space.space_id}")
    n = len(sigma)
    ends = [q for q in range(n) if tau[q] == B]
    # partial paths: (weight, current word, states so far)
    partial = [(Fraction(1), list(sigma), [tuple(sigma)])]
    start = 0
    for k in ends + [None]:
        stop = n if k is None else k
        target = [x for x in tau[start:stop]]
        nxt = []
        for w, cur, states in partial:
            cur = list(cur)
            steps = []
            _fix_skeleton(cur, steps, start, target)
            if k is None:
                nxt.append((w, cur, states + steps))
                continue
            for w2, done, hops in _hop_block(cur, start, k, len(target)):
                nxt.append((w * w2, done, states + steps + hops))
        partial = nxt
        if k is not None:
            start = k + 1
    out: dict = {}
    for w, cur, states in partial:
        if tuple(cur) != tuple(tau):
            raise AssertionError(f"path construction ended at {cur}, expected {tau}")
        key = tuple(tuple.__new__(Arrangement, s) for s in states)
        out[key] = out.get(key, 0) + w
    return [(w, p) for p, w in out.items()]


def xt_path_family(spec: JumpHop, cap=None) -> dict:
    states = enumerate_states(spec, cap)
    return {(s, t): build_xt_path(s, t, spec) for s in states for t in states}


# edge expansions into adjacent swaps

def _diff_positions(sigma, tau):
    diff = [q for q in range(len(sigma)) if sigma[q] != tau[q]]
    if len(diff) != 2 or sigma[diff[0]] != tau[diff[1]] or sigma[diff[1]] != tau[diff[0]]:
        raise DomainError(f"{sigma} -> {tau} is not a single transposition")
    return diff


def _swap(cur, q, out):
    cur[q], cur[q + 1] = cur[q + 1], cur[q]
    out.append(tuple.__new__(type(out[0]), cur))


def xt_edge_to_x3_path(edge, spec: JumpHop | None = None) -> tuple:
    """Expand a Jump or Hop edge into adjacent swaps of the three-type particle chain.

    A Jump over gap g becomes 2g - 1 swaps: the lower particle climbs past the
    B's, crosses its partner, and the partner descends. A Hop over gap g is the
    non-B particle walking across the B-run, g swaps.
    """
    sigma, tau = edge
    sigma = Arrangement(sigma)
    tau = Arrangement(tau)
    i, j = _diff_positions(sigma, tau)
    if any(sigma[q] != B for q in range(i + 1, j)):
        raise DomainError(f"{sigma} -> {tau}: interior of the exchange is not all B")
    x, y = sigma[i], sigma[j]
    cur = list(sigma)
    out = [sigma]
    if {x, y} == {A, C}:
        for q in range(i, j - 1):
            _swap(cur, q, out)
        _swap(cur, j - 1, out)
        for q in range(j - 2, i - 1, -1):
            _swap(cur, q, out)
    elif B in (x, y) and x != y:
        if x != B:
            for q in range(i, j):
                _swap(cur, q, out)
        else:
            for q in range(j - 1, i - 1, -1):
                _swap(cur, q, out)
    else:
        raise DomainError(f"{sigma} -> {tau} is neither a Jump nor a Hop")
    if tuple(cur) != tuple(tau):
        raise AssertionError("expansion did not reach the edge target")
    return tuple(out)


def _label(tree: TernaryTree, z: int, mover: int):
    """Position of ``z`` relative to a mover: (its lca with the mover, child tag)."""
    node = tree.lca(z, mover)
    return id(node), tree.side(z, mover)


def _stronger(tree: TernaryTree, a: int, b: int) -> bool:
    sa, sb = tree.pair_strengths(a, b)
    return sa > sb


def mtree_stage_one(sigma, i: int, j: int, tree: TernaryTree) -> list[int]:
    """Adjacent transpositions (left position of each swap, 0-based) bringing the movers together."""
    cur = list(sigma)
    swaps = []

    def swap(q):
        cur[q], cur[q + 1] = cur[q + 1], cur[q]
        swaps.append(q)

    while j - i > 1:
        x, y = cur[i], cur[j]
        if j - i >= 3 and _label(tree, cur[i + 1], x) == _label(tree, cur[j - 1], x):
            swap(i)
            i += 1
            swap(j - 1)
            j -= 1
            continue
        if _stronger(tree, x, cur[i + 1]):
            swap(i)
            i += 1
        elif not _stronger(tree, y, cur[j - 1]):
            swap(j - 1)
            j -= 1
        else:
            # cur[i+1] outranks the movers and cur[j-1] is outranked: pull the
            # nearest outranked element leftward to i+1
            k = next(q for q in range(i + 2, j) if _stronger(tree, x, cur[q]))
            for q in range(k - 1, i, -1):
                swap(q)
    return swaps


def mtree_edge_to_l3_path(edge, tree: TernaryTree) -> tuple:
    """Comparison path in the league chain for one M_tree transposition.

    Stage one brings the two movers together by adjacent swaps; they then swap,
    and stage two replays the stage-one transpositions in reverse.
    """
    sigma, tau = edge
    sigma, tau = Permutation(sigma), Permutation(tau)
    i, j = _diff_positions(sigma, tau)
    lo, hi = tree.lca_interval(sigma[i], sigma[j])
    if any(lo <= sigma[q] <= hi for q in range(i + 1, j)):
        raise DomainError(f"{sigma} -> {tau} is not an M_tree move")
    swaps = mtree_stage_one(sigma, i, j, tree)
    cur = list(sigma)
    out = [sigma]
    for q in swaps:
        _swap(cur, q, out)
    meet = next(q for q in range(len(cur) - 1) if {cur[q], cur[q + 1]} == {sigma[i], sigma[j]})
    _swap(cur, meet, out)
    for q in reversed(swaps):
        _swap(cur, q, out)
    if tuple(cur) != tuple(tau):
        raise AssertionError("league path did not reach the edge target")
    return tuple(out)


# congestion

@dataclass
class CongestionReport:
    """Per-edge congestion; edges are (source index, target index) pairs."""

    values: dict
    tag: str  # "canonical" or "comparison"
    states: tuple | None = None
    bound: object = None
    bound_label: str = ""
    extra: dict = field(default_factory=dict)

    @property
    def max_edge(self):
        if not self.values:
            return None
        return max(sorted(self.values), key=lambda e: self.values[e])

    @property
    def max_value(self) -> Fraction:
        return max(self.values.values(), default=Fraction(0))

    def value(self, u, v) -> Fraction:
        """Congestion of edge u -> v (state indices); 0 if unused."""
        if self.tag == "canonical":
            u, v = min(u, v), max(u, v)
        return self.values.get((u, v), Fraction(0))

    def verdict(self) -> str | None:
        if self.bound is None:
            return None
        ok = self.max_value <= self.bound
        return f"{self.bound_label}: {'PASS' if ok else 'FAIL'}"

    def to_csv(self) -> str:
        out = io.StringIO()
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["source", "target", "value"])
        for (u, v) in sorted(self.values):
            su = self.states[u] if self.states else u
            sv = self.states[v] if self.states else v
            w.writerow([str(su), str(sv), str(self.values[(u, v)])])
        return out.getvalue()

    def summary(self) -> dict:
        e = self.max_edge
        out = {
            "tag": self.tag,
            "edges": len(self.values),
            "max_value": str(self.max_value),
            "max_value_float": float(self.max_value),
            "max_edge": None if e is None else [str(self.states[e[0]]) if self.states else e[0],
                                                 str(self.states[e[1]]) if self.states else e[1]],
        }
        if self.bound is not None:
            out["bound"] = str(self.bound)
            out["verdict"] = self.verdict()
        out.update(self.extra)
        return out

    def to_json(self) -> str:
        return json.dumps(self.summary(), indent=2, sort_keys=True)


def _probs(pi):
    return pi.probs if hasattr(pi, "probs") else tuple(pi)


def _check_edge(kernel, u, v, pair, offset):
    if u == v or kernel.entry(u, v) <= 0:
        src, dst = pair
        raise DomainError(f"path for {src} -> {dst} uses a non-edge at offset {offset}")


def canonical_congestion(kernel, pi, paths: dict) -> CongestionReport:
    """Phi_e = (1 / C(e)) * sum over pairs routed through e of flow * pi(x) pi(y).

    Edges are undirected and C(e) = pi(u) P(u, v). A path passing an edge more
    than once charges it once.
    """
    if kernel.mode != "rational":
        raise DomainError("congestion is computed in rational mode only")
    probs = _probs(pi)
    load: dict = {}
    for (x, y) in sorted(paths, key=lambda p: (kernel.index_of(p[0]), kernel.index_of(p[1]))):
        ix, iy = kernel.index_of(x), kernel.index_of(y)
        base = probs[ix] * probs[iy]
        for w, path in paths[(x, y)]:
            idx = [kernel.index_of(s) for s in path]
            if idx[0] != ix or idx[-1] != iy:
                raise DomainError(f"path for {x} -> {y} has wrong endpoints")
            seen = set()
            for off, (u, v) in enumerate(zip(idx, idx[1:])):
                _check_edge(kernel, u, v, (x, y), off)
                seen.add((min(u, v), max(u, v)))
            for e in seen:
                load[e] = load.get(e, 0) + w * base
    values = {e: val / (probs[e[0]] * kernel.entry(e[0], e[1])) for e, val in load.items()}
    return CongestionReport(values, "canonical", kernel.states)


def comparison_congestion(coarse_kernel, fine_kernel, pi, edge_mapper) -> CongestionReport:
    """A_e = sum over coarse edges (s, t) whose path uses e of |path| pi(s) P(s, t), over pi(e) P_fine(e).

    Fine edges are directed; ``edge_mapper((s, t))`` returns the fine path as states.
    """
    if coarse_kernel.mode != "rational" or fine_kernel.mode != "rational":
        raise DomainError("congestion is computed in rational mode only")
    if coarse_kernel.size != fine_kernel.size:
        raise DomainError("coarse and fine kernels live on different spaces")
    probs = _probs(pi)
    load: dict = {}
    for s in range(coarse_kernel.size):
        for t, p in coarse_kernel.row(s):
            if t == s:
                continue
            src, dst = coarse_kernel.states[s], coarse_kernel.states[t]
            path = edge_mapper((src, dst))
            idx = [fine_kernel.index_of(z) for z in path]
            if idx[0] != s or idx[-1] != t:
                raise DomainError(f"mapped path for {src} -> {dst} has wrong endpoints")
            length = len(idx) - 1
            seen = set()
            for off, (u, v) in enumerate(zip(idx, idx[1:])):
                _check_edge(fine_kernel, u, v, (src, dst), off)
                seen.add((u, v))
            q = length * probs[s] * p
            for e in seen:
                load[e] = load.get(e, 0) + q
    values = {e: val / (probs[e[0]] * fine_kernel.entry(e[0], e[1])) for e, val in load.items()}
    return CongestionReport(values, "comparison", fine_kernel.states)
