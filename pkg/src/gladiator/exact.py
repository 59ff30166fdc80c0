"""Exact finite-state analysis: kernels, t-step laws, mixing times, spectral gaps,
restriction and projection chains, and the bound calculators.

Mixing times are computed in float64 over every start state. Kernels,
restrictions, projections and congestion stay exact in rational mode.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from math import gcd

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .chains import ChainSpec, _check_mode
from .combinatorics import StateIndex, enumerate_states
from .errors import ChainStructureError, DomainError, SizeLimitError
from .measures import Distribution
from .trees import to_fraction

FLOAT_STATE_CAP = 200_000
RATIONAL_STATE_CAP = 20_000
DENSE_LIMIT = 1500  # above this the mixing search scans t linearly with sparse products
TV_SLACK = 1e-12  # float round-off allowance when comparing TV against epsilon


class SparseKernel:
    """Row-stochastic matrix in CSR layout over an enumerated state space.

    ``data`` is a list of Fractions in rational mode and a float array in float mode.
    """

    def __init__(self, states, space_id, indptr, indices, data, mode):
        self.states = tuple(states) if states is not None else None
        self.space_id = space_id
        self.indptr = np.asarray(indptr, dtype=np.int64)
        self.indices = np.asarray(indices, dtype=np.int64)
        self.data = list(data) if mode == "rational" else np.asarray(data, dtype=float)
        self.mode = mode
        self._index = None

    @classmethod
    def from_rows(cls, rows, states=None, space_id="abstract", mode="rational"):
        """Build from ``rows[i] = [(j, p), ...]``; duplicate columns are summed."""
        _check_mode(mode)
        indptr, indices, data = [0], [], []
        for row in rows:
            acc = {}
            for j, p in row:
                acc[j] = acc.get(j, 0) + p
            for j in sorted(acc):
                if acc[j] != 0:
                    indices.append(j)
                    data.append(acc[j] if mode == "rational" else float(acc[j]))
            indptr.append(len(indices))
        k = cls(states, space_id, indptr, indices, data, mode)
        k._check_shape()
        return k

    @classmethod
    def from_dense(cls, matrix, states=None, space_id="abstract", mode="rational"):
        rows = [[(j, to_fraction(p) if mode == "rational" else float(p))
                 for j, p in enumerate(r) if p != 0] for r in matrix]
        return cls.from_rows(rows, states, space_id, mode)

    def _check_shape(self):
        if self.states is not None and len(self.states) != self.size:
            raise DomainError("state list and kernel size disagree")
        if len(self.indices) and (self.indices.min() < 0 or self.indices.max() >= self.size):
            raise DomainError("kernel column index out of range")

    @property
    def size(self) -> int:
        return len(self.indptr) - 1

    @property
    def nnz(self) -> int:
        return len(self.indices)

    def row(self, i: int) -> list[tuple[int, object]]:
        a, b = self.indptr[i], self.indptr[i + 1]
        return list(zip(self.indices[a:b].tolist(), self.data[a:b]))

    def index_of(self, state) -> int:
        if self._index is None:
            if self.states is None:
                raise DomainError("kernel has no state labels")
            self._index = {s: i for i, s in enumerate(self.states)}
        try:
            return self._index[state]
        except KeyError:
            raise DomainError(f"{state!r} is not a state of {self.space_id}") from None

    def _resolve(self, start) -> int:
        if isinstance(start, StateIndex):
            if start.space_id != self.space_id:
                raise DomainError(f"index from {start.space_id} used on {self.space_id}")
            start = start.idx
        if isinstance(start, (int, np.integer)):
            if not 0 <= start < self.size:
                raise DomainError(f"start index {start} out of range")
            return int(start)
        return self.index_of(tuple(start) if not isinstance(start, tuple) else start)

    def entry(self, i: int, j: int):
        a, b = self.indptr[i], self.indptr[i + 1]
        cols = self.indices[a:b]
        k = np.searchsorted(cols, j)
        if k < len(cols) and cols[k] == j:
            return self.data[a + k]
        return Fraction(0) if self.mode == "rational" else 0.0

    def row_sums(self):
        return [sum(p for _, p in self.row(i)) for i in range(self.size)]

    def to_scipy(self) -> sp.csr_matrix:
        data = np.asarray([float(x) for x in self.data]) if self.mode == "rational" else self.data
        return sp.csr_matrix((data, self.indices, self.indptr), shape=(self.size, self.size))

    def to_dense(self):
        if self.mode == "float":
            return self.to_scipy().toarray()
        out = [[Fraction(0)] * self.size for _ in range(self.size)]
        for i in range(self.size):
            for j, p in self.row(i):
                out[i][j] = p
        return out

    def as_float(self) -> "SparseKernel":
        if self.mode == "float":
            return self
        return SparseKernel(self.states, self.space_id, self.indptr, self.indices,
                            [float(x) for x in self.data], "float")

    def __eq__(self, other):
        return (isinstance(other, SparseKernel) and self.mode == other.mode
                and self.size == other.size
                and all(self.row(i) == other.row(i) for i in range(self.size)))

    def __repr__(self):
        return f"SparseKernel({self.space_id}, size={self.size}, nnz={self.nnz}, mode={self.mode})"


def assemble_kernel(spec: ChainSpec, mode: str = "rational", cap_states: int | None = None,
                    length_cap: int | None = None) -> SparseKernel:
    """Materialize ``transition_row`` for every enumerated state."""
    _check_mode(mode)
    if cap_states is None:
        cap_states = RATIONAL_STATE_CAP if mode == "rational" else FLOAT_STATE_CAP
    size = spec.space.size
    if size > cap_states:
        raise SizeLimitError(f"{spec.space.space_id} state count", size, cap_states)
    states = enumerate_states(spec, length_cap)
    index = {s: i for i, s in enumerate(states)}
    rows = []
    for s in states:
        row = spec._row(s, mode)
        rows.append([(index[t], p) for t, p in row.items() if p != 0])
    return SparseKernel.from_rows(rows, states, spec.space.space_id, mode)


def _point_mass(kernel, i, mode):
    if mode == "rational":
        v = [Fraction(0)] * kernel.size
        v[i] = Fraction(1)
        return v
    v = np.zeros(kernel.size)
    v[i] = 1.0
    return v


def _advance_rational(kernel, v):
    out = [Fraction(0)] * kernel.size
    for i, mass in enumerate(v):
        if mass:
            for j, p in kernel.row(i):
                out[j] += mass * p
    return out


def distribution_at_time(kernel: SparseKernel, start, t: int) -> Distribution:
    """Law after ``t`` steps from the point mass at ``start`` (index, StateIndex or state)."""
    if t < 0:
        raise DomainError("t must be nonnegative")
    i = kernel._resolve(start)
    v = _point_mass(kernel, i, kernel.mode)
    if kernel.mode == "rational":
        for _ in range(t):
            v = _advance_rational(kernel, v)
        return Distribution(tuple(v), kernel.space_id, kernel.states)
    pt = kernel.to_scipy().T.tocsr()
    for _ in range(t):
        v = pt @ v
    return Distribution(v, kernel.space_id, kernel.states)


def tv_distance(d1, d2):
    """Half the L1 distance; exact for two rational distributions."""
    if isinstance(d1, Distribution) and isinstance(d2, Distribution):
        if d1.space_id != d2.space_id:
            raise DomainError(f"space mismatch: {d1.space_id} vs {d2.space_id}")
        d1, d2 = d1.probs, d2.probs
    if len(d1) != len(d2):
        raise DomainError("distributions have different lengths")
    if isinstance(d1, np.ndarray) or isinstance(d2, np.ndarray):
        return 0.5 * float(np.abs(np.asarray(d1, float) - np.asarray(d2, float)).sum())
    return sum(abs(a - b) for a, b in zip(d1, d2)) / 2


# structure checks

def _float_pattern(kernel):
    m = kernel.to_scipy()
    m.eliminate_zeros()
    return m


def check_irreducible(kernel: SparseKernel):
    m = _float_pattern(kernel)
    ncomp, labels = connected_components(m, directed=True, connection="strong")
    if ncomp > 1:
        lab = kernel.states[int(np.argmax(labels != labels[0]))] if kernel.states else None
        raise ChainStructureError(
            f"kernel is reducible: {ncomp} strongly connected classes"
            + (f"; e.g. {lab} is not mutually reachable with {kernel.states[0]}" if lab else ""))


def period(kernel: SparseKernel) -> int:
    """Period of an irreducible kernel (gcd of level differences along BFS edges)."""
    if any(j == i for i in range(kernel.size) for j, _ in kernel.row(i)):
        return 1
    level = [-1] * kernel.size
    level[0] = 0
    queue = [0]
    g = 0
    for u in queue:
        for v, _ in kernel.row(u):
            if level[v] < 0:
                level[v] = level[u] + 1
                queue.append(v)
            else:
                g = gcd(g, level[u] + 1 - level[v])
    return abs(g) if g else 0


def check_ergodic(kernel: SparseKernel):
    check_irreducible(kernel)
    d = period(kernel)
    if d != 1:
        raise ChainStructureError(f"kernel is periodic with period {d}")


# mixing

@dataclass
class MixingReport:
    epsilon: Fraction
    t_mix: int
    worst_start: StateIndex
    tv_curve: list = field(default_factory=list)  # (t, worst TV) sorted by t
    method: str = ""
    worst_start_state: object = None

    def to_csv(self) -> str:
        out = io.StringIO()
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["t", "worst_tv"])
        for t, v in self.tv_curve:
            w.writerow([t, repr(float(v))])
        return out.getvalue()

    def summary(self) -> dict:
        return {
            "epsilon": str(self.epsilon),
            "t_mix": self.t_mix,
            "worst_start": self.worst_start.idx,
            "worst_start_state": None if self.worst_start_state is None else str(self.worst_start_state),
            "space_id": self.worst_start.space_id,
            "method": self.method,
        }

    def to_json(self) -> str:
        return json.dumps(self.summary(), indent=2, sort_keys=True)


def _tv_rows(mat: np.ndarray, pi: np.ndarray) -> np.ndarray:
    """Per-row TV distance of a (starts x states) matrix to pi."""
    return 0.5 * np.abs(mat - pi[None, :]).sum(axis=1)


def _pi_array(pi, size):
    arr = pi.as_array() if isinstance(pi, Distribution) else np.asarray([float(x) for x in pi])
    if len(arr) != size:
        raise DomainError("pi and kernel have different sizes")
    return arr


def _mixing_dense(p, pi, eps):
    curve = {}
    n = p.shape[0]
    cur = np.eye(n)
    tv0 = _tv_rows(cur, pi)
    curve[0] = tv0.max()
    if curve[0] <= eps:
        return 0, int(np.argmax(tv0)), curve
    powers = [p]  # powers[k] = P^(2^k)
    t = 1
    while True:
        tvs = _tv_rows(powers[-1], pi)
        curve[t] = tvs.max()
        if curve[t] <= eps:
            break
        if t > 2**40:
            raise ChainStructureError("TV did not fall below epsilon; kernel may not converge")
        powers.append(powers[-1] @ powers[-1])
        t *= 2
    # binary lifting: largest t with TV > eps lies in [t/2, t)
    k = len(powers) - 1
    if k == 0:
        t_lo, cur = 0, np.eye(n)
    else:
        t_lo, cur = t // 2, powers[k - 1]
    for j in range(k - 2, -1, -1):
        cand = cur @ powers[j]
        tv = _tv_rows(cand, pi).max()
        curve[t_lo + 2**j] = tv
        if tv > eps:
            cur, t_lo = cand, t_lo + 2**j
    final = cur @ p
    tvs = _tv_rows(final, pi)
    curve[t_lo + 1] = tvs.max()
    return t_lo + 1, int(np.argmax(tvs)), curve


def _mixing_scan(kernel, pi, eps, t_max, block=128, stride=8):
    """Scan over t with sparse propagation of a block of starts at a time.

    TV from a fixed start is non-increasing in t, so TV is only checked every
    ``stride`` steps; once a block has crossed epsilon its last stride is
    replayed step by step to find the exact crossing. Crossed starts are
    dropped at check points. The returned curve keeps the exact worst-case
    values: multiples of ``stride`` before t_mix, and t_mix - 1. The entry at
    t_mix is the max over the starts that crossed last.
    """
    pt = kernel.to_scipy().T.tocsr()
    n = kernel.size
    best_t, best_start = 0, 0
    curve: dict = {}

    def tv(cur):
        return 0.5 * np.abs(cur - pi[:, None]).sum(axis=0)

    def note(t, tvs):
        curve[t] = max(curve.get(t, 0.0), float(tvs.max()))

    for lo in range(0, n, block):
        ids = np.arange(lo, min(n, lo + block))
        cur = np.zeros((n, len(ids)))  # columns are start distributions
        cur[ids, np.arange(len(ids))] = 1.0
        t, tvs = 0, tv(cur)
        note(0, tvs)
        worst = int(ids[np.argmax(tvs)])
        while (tvs > eps).any():
            active = tvs > eps
            if not active.all():
                cur, ids, tvs = cur[:, active], ids[active], tvs[active]
            snap, t0 = cur, t
            steps = min(stride, t_max - t)
            if steps <= 0:
                raise ChainStructureError(f"TV still above epsilon after {t_max} steps")
            for _ in range(steps):
                cur = pt @ cur
            t += steps
            new = tv(cur)
            if (new > eps).any() or steps == 1:
                if not (new > eps).any():
                    worst = int(ids[np.argmax(tvs)])
                tvs = new
                note(t, tvs)
                continue
            # crossed inside this stride: replay one step at a time
            cur, t = snap, t0
            while (tvs > eps).any():
                worst = int(ids[np.argmax(tvs)])
                cur = pt @ cur
                t += 1
                tvs = tv(cur)
                note(t, tvs)
        if t > best_t:
            best_t, best_start = t, worst
    keep = {k: v for k, v in curve.items() if k % stride == 0 or k >= best_t - 1}
    return best_t, best_start, {k: v for k, v in keep.items() if k <= best_t}


def mixing_time_exact(kernel: SparseKernel, pi, epsilon=Fraction(1, 4), t_max: int = 10**6,
                      method: str = "auto") -> MixingReport:
    """Smallest t with max over starts of TV(P^t(x, .), pi) <= epsilon."""
    eps = to_fraction(epsilon)
    if not 0 < eps < 1:
        raise DomainError("epsilon must lie in (0, 1)")
    check_ergodic(kernel)
    pi_arr = _pi_array(pi, kernel.size)
    fe = float(eps) + TV_SLACK
    if method == "auto":
        method = "dense" if kernel.size <= DENSE_LIMIT else "scan"
    if method == "dense":
        t, start, curve = _mixing_dense(kernel.to_scipy().toarray(), pi_arr, fe)
    elif method == "scan":
        t, start, curve = _mixing_scan(kernel, pi_arr, fe, t_max)
    else:
        raise DomainError(f"unknown mixing method {method!r}")
    points = sorted(curve.items())
    values = [v for _, v in points]
    if method == "dense" and any(b > a + 1e-12 for a, b in zip(values, values[1:])):
        t, start, curve = _mixing_scan(kernel, pi_arr, fe, t_max)
        points, method = sorted(curve.items()), "scan"
    state = kernel.states[start] if kernel.states else None
    return MixingReport(eps, t, StateIndex(start, kernel.space_id), points, method, state)


def worst_tv_at(kernel: SparseKernel, pi, t: int) -> tuple[float, np.ndarray]:
    """Max over starts of TV at time t, and the per-start TV vector."""
    pi_arr = _pi_array(pi, kernel.size)
    p = kernel.to_scipy()
    cur = np.eye(kernel.size)
    for _ in range(t):
        cur = np.asarray((p.T @ cur.T).T)
    tvs = _tv_rows(cur, pi_arr)
    return float(tvs.max()), tvs


def spectral_gap(kernel: SparseKernel, pi, tol: float = 1e-10, max_iter: int = 200_000,
                 seed: int = 0) -> float:
    """1 - lambda_2 of the pi-symmetrized kernel by deflated power iteration."""
    from .measures import detailed_balance_violation

    pi_dist = pi if isinstance(pi, Distribution) else Distribution(tuple(pi), kernel.space_id)
    viol = detailed_balance_violation(kernel, pi_dist)
    if float(viol) > 1e-12:
        raise DomainError(f"kernel is not reversible (detailed balance violation {float(viol):.3g})")
    n = kernel.size
    if n == 1:
        return 1.0
    pi_arr = _pi_array(pi, n)
    d = np.sqrt(pi_arr)
    p = kernel.to_scipy()
    s = sp.diags(d) @ p @ sp.diags(1.0 / d)
    s = ((s + s.T) * 0.5).tocsr()  # remove round-off asymmetry
    top = d / np.linalg.norm(d)
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(n)
    v -= top * (top @ v)
    v /= np.linalg.norm(v)
    rho_prev = None
    for _ in range(max_iter):
        w = s @ v + v  # shift by I so the spectrum is nonnegative
        w -= top * (top @ w)
        rho = float(v @ w)
        resid = np.linalg.norm(w - rho * v)
        nw = np.linalg.norm(w)
        if nw == 0:
            return 1.0 - (rho - 1.0)
        v = w / nw
        if resid < tol or (rho_prev is not None and abs(rho - rho_prev) < tol * 1e-3 and resid < math.sqrt(tol)):
            return 1.0 - (rho - 1.0)
        rho_prev = rho
    # slow separation between lambda_2 and lambda_3: fall back to a dense solve
    if n <= 4000:
        vals = np.linalg.eigvalsh(s.toarray())
        return float(1.0 - vals[-2])
    from scipy.sparse.linalg import eigsh
    vals = eigsh(s, k=2, which="LA", return_eigenvectors=False)
    return float(1.0 - min(vals))


def stationary_vector(kernel: SparseKernel) -> np.ndarray:
    """Stationary vector of an irreducible kernel by GTH elimination (float)."""
    a = kernel.to_scipy().toarray()
    n = a.shape[0]
    for k in range(n - 1, 0, -1):
        s = a[k, :k].sum()
        if s <= 0:
            raise ChainStructureError("GTH elimination hit a zero pivot; kernel is reducible")
        a[:k, k] /= s
        a[:k, :k] += np.outer(a[:k, k], a[k, :k])
    x = np.zeros(n)
    x[0] = 1.0
    for k in range(1, n):
        x[k] = x[:k] @ a[:k, k]
    return x / x.sum()


def restrict_chain(kernel: SparseKernel, block) -> SparseKernel:
    """Restriction to ``block`` (states or indices): moves leaving it become self-loops."""
    idx = sorted({kernel._resolve(b) for b in block})
    if not idx:
        raise DomainError("cannot restrict to an empty block")
    local = {g: k for k, g in enumerate(idx)}
    rows = []
    for g in idx:
        row, stay = [], 0
        for j, p in kernel.row(g):
            if j in local:
                row.append((local[j], p))
            else:
                stay += p
        if stay:
            row.append((local[g], stay))
        rows.append(row)
    states = [kernel.states[g] for g in idx] if kernel.states else None
    return SparseKernel.from_rows(rows, states, f"{kernel.space_id}|restricted", kernel.mode)


def project_chain(kernel: SparseKernel, partition, pi) -> SparseKernel:
    """Block chain P(i, j) = sum_{x in block i, y in block j} pi_i(x) P(x, y).

    ``partition`` is a list of blocks (states or indices) or a callable mapping a
    state to its block label; block labels become the states of the result.
    """
    probs = pi.probs if isinstance(pi, Distribution) else tuple(pi)
    if callable(partition):
        if kernel.states is None:
            raise DomainError("a labelling function needs a state-labelled kernel")
        groups: dict = {}
        for i, s in enumerate(kernel.states):
            groups.setdefault(partition(s), []).append(i)
        labels = sorted(groups, key=lambda k: min(groups[k]))
        blocks = [groups[k] for k in labels]
    else:
        blocks = [[kernel._resolve(x) for x in b] for b in partition]
        labels = list(range(len(blocks)))
    owner = {}
    for k, b in enumerate(blocks):
        for i in b:
            if i in owner:
                raise DomainError(f"state index {i} appears in two blocks")
            owner[i] = k
    if len(owner) != kernel.size:
        raise DomainError("partition does not cover the state space")
    rows = []
    for b in blocks:
        mass = sum(probs[i] for i in b)
        if mass == 0:
            raise DomainError("a block has zero stationary mass")
        acc = {}
        for i in b:
            for j, p in kernel.row(i):
                acc[owner[j]] = acc.get(owner[j], 0) + probs[i] * p
        rows.append([(k, v / mass) for k, v in acc.items()])
    return SparseKernel.from_rows(rows, labels, f"{kernel.space_id}|projected", kernel.mode)


def block_masses(partition_kernel: SparseKernel, kernel: SparseKernel, partition, pi):
    """Stationary mass of each block, ordered like ``project_chain`` output."""
    probs = pi.probs if isinstance(pi, Distribution) else tuple(pi)
    if callable(partition):
        groups: dict = {}
        for i, s in enumerate(kernel.states):
            groups.setdefault(partition(s), []).append(i)
        return [sum(probs[i] for i in groups[k]) for k in partition_kernel.states]
    return [sum(probs[kernel._resolve(x)] for x in b) for b in partition]


# bound calculators

def _need(args, *names):
    missing = [k for k in names if k not in args]
    if missing:
        raise DomainError(f"missing bound arguments: {missing}")
    return [args[k] for k in names]


def _positive(x, name):
    if x is None or x <= 0:
        raise DomainError(f"{name} must be positive")
    return x


def compose_bound(kind: str, **args) -> float:
    """Evaluate one of the composition/comparison bounds.

    kinds and arguments:
      decomposition: t_bar, t_max           -> 2 * t_bar * t_max
      product: times, probs                 -> max_i 2 / p_i * t_i
      reduction: t_x, n                     -> 4 * n**8 * t_x
      comparison3: t, n                     -> 2 * n**4 * t
      canonical: phi, pi_min, epsilon       -> 8 phi**2 (ln(1/pi_min) + ln(1/epsilon))
      league: t, n                          -> n**4 * t
    """
    if kind == "decomposition":
        t_bar, t_max = _need(args, "t_bar", "t_max")
        return 2 * _positive(t_bar, "t_bar") * _positive(t_max, "t_max")
    if kind == "product":
        times, probs = _need(args, "times", "probs")
        if not times or len(times) != len(probs):
            raise DomainError("product bound needs one probability per component time")
        probs = [to_fraction(p) for p in probs]
        if any(not 0 < p <= 1 for p in probs):
            raise DomainError("component probabilities must lie in (0, 1]")
        if sum(probs) > 1:
            raise DomainError("component probabilities sum above 1")
        return max(2 / p * t for p, t in zip(probs, times))
    if kind == "reduction":
        t_x, n = _need(args, "t_x", "n")
        return 4 * int(n) ** 8 * _positive(t_x, "t_x")
    if kind == "comparison3":
        t, n = _need(args, "t", "n")
        return 2 * int(n) ** 4 * _positive(t, "t")
    if kind == "league":
        t, n = _need(args, "t", "n")
        return int(n) ** 4 * _positive(t, "t")
    if kind == "canonical":
        phi, pi_min, eps = _need(args, "phi", "pi_min", "epsilon")
        pi_min, eps = float(_positive(pi_min, "pi_min")), float(_positive(eps, "epsilon"))
        if pi_min > 1 or eps >= 1:
            raise DomainError("pi_min must be at most 1 and epsilon below 1")
        return 8 * float(phi) ** 2 * (math.log(1 / pi_min) + math.log(1 / eps))
    raise DomainError(f"unknown bound kind {kind!r}")


BOUND_KINDS = ("decomposition", "product", "reduction", "comparison3", "canonical", "league")
