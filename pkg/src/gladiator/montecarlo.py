"""Trajectory sampling and Monte Carlo mixing estimates.

Every trajectory draws its uniforms from its own Philox stream: the key is
derived from the seed and the trial index selects a disjoint counter block,
so results do not depend on chunking or scheduling.
Trajectories are advanced in vectorized chunks over a float kernel.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .chains import ChainSpec
from .errors import DomainError
from .exact import FLOAT_STATE_CAP, SparseKernel, assemble_kernel
from .measures import Distribution, stationary_distribution
from .trees import to_fraction

CHUNK = 4096
BOOTSTRAP_REPS = 200
BOOTSTRAP_KEY = 2**32  # spawn-key offset keeping bootstrap streams apart from trial streams


@dataclass(frozen=True)
class SampleConfig:
    trials: int = 10_000
    horizon: int = 1024
    seed: int = 0
    start_policy: str = "extremal"  # "extremal", "extremal-ascending", "extremal-descending" or a state string

    def __post_init__(self):
        if self.trials < 1 or self.horizon < 1:
            raise DomainError("trials and horizon must be at least 1")
        if not 0 <= self.seed < 2**64:
            raise DomainError("seed must be a 64-bit unsigned integer")


@lru_cache(maxsize=32)
def _philox_key(seed: int) -> np.ndarray:
    return np.random.SeedSequence(seed).generate_state(2, np.uint64)


def trial_stream(seed: int, trial: int) -> np.random.Generator:
    """Independent generator for one trajectory (counter block ``trial`` of the seed's key)."""
    return np.random.Generator(np.random.Philox(key=_philox_key(seed), counter=[0, 0, 0, trial]))


class Sampler:
    """Vectorized stepping over a float kernel using per-row cumulative sums."""

    def __init__(self, kernel: SparseKernel):
        k = kernel.as_float()
        self.kernel = k
        cum = np.empty(k.nnz)
        for i in range(k.size):
            a, b = k.indptr[i], k.indptr[i + 1]
            c = np.cumsum(k.data[a:b])
            c[-1] = 1.0
            cum[a:b] = c
        rows = np.repeat(np.arange(k.size), np.diff(k.indptr))
        # row i owns the interval (i, i + 1]; a draw u in [0, 1) is looked up at i + u
        self.keys = rows + cum
        self.cols = k.indices

    def advance(self, idx: np.ndarray, u: np.ndarray) -> np.ndarray:
        pos = np.searchsorted(self.keys, idx + u, side="right")
        return self.cols[pos]

    def run(self, start: int, horizon: int, trials: int, seed: int, record: set[int]):
        """Histograms of the state index at each time in ``record``."""
        ens = Ensemble(self, start, trials, seed)
        return {t: ens.advance_to(t).histogram() for t in sorted(record)}


class Ensemble:
    """Trajectories from one start, advanced in place.

    Each trial keeps its own stream, and drawing a stream in pieces yields the
    same uniforms as drawing it at once, so probing t = 1, 2, 4, ... matches
    independent runs to each t exactly.
    """

    def __init__(self, sampler: Sampler, start: int, trials: int, seed: int):
        self.sampler = sampler
        self.idx = np.full(trials, start, dtype=np.int64)
        self.streams = [trial_stream(seed, r) for r in range(trials)]
        self.t = 0

    def advance_to(self, t: int) -> "Ensemble":
        k = t - self.t
        if k < 0:
            raise DomainError(f"cannot rewind trajectories from t={self.t} to t={t}")
        for lo in range(0, len(self.idx), CHUNK) if k else ():
            hi = min(len(self.idx), lo + CHUNK)
            u = np.stack([g.random(k) for g in self.streams[lo:hi]])
            idx = self.idx[lo:hi]
            for step in range(k):
                idx = self.sampler.advance(idx, u[:, step])
            self.idx[lo:hi] = idx
        self.t = t
        return self

    def histogram(self) -> np.ndarray:
        return np.bincount(self.idx, minlength=self.sampler.kernel.size)


def _kernel(spec: ChainSpec, cap_states=None) -> SparseKernel:
    return assemble_kernel(spec, "float", cap_states or FLOAT_STATE_CAP)


def _start_index(kernel: SparseKernel, spec: ChainSpec, start) -> int:
    if isinstance(start, str):
        start = spec.space.parse_state(start)
    return kernel._resolve(start)


def trajectory_endpoints(spec: ChainSpec, start, t: int, trials: int, seed: int,
                         cap_states=None, kernel=None) -> np.ndarray:
    """Histogram (counts) of X_t over ``trials`` independent runs from ``start``."""
    if trials < 1 or t < 0:
        raise DomainError("trials must be positive and t nonnegative")
    kernel = kernel or _kernel(spec, cap_states)
    sampler = Sampler(kernel)
    i = _start_index(kernel, spec, start)
    return sampler.run(i, t, trials, seed, {t})[t]


def empirical_distribution(spec: ChainSpec, start, t: int, trials: int, seed: int,
                           cap_states=None) -> Distribution:
    """Normalized histogram of trajectory endpoints after ``t`` steps."""
    kernel = _kernel(spec, cap_states)
    counts = trajectory_endpoints(spec, start, t, trials, seed, kernel=kernel)
    return Distribution(counts / trials, kernel.space_id, kernel.states)


def _tv(p_hat: np.ndarray, pi: np.ndarray) -> float:
    return 0.5 * float(np.abs(p_hat - pi).sum())


def bootstrap_stderr(counts: np.ndarray, pi: np.ndarray, seed: int, key: int,
                     reps: int = BOOTSTRAP_REPS) -> float:
    """Standard error of the plug-in TV by resampling the trajectory endpoints."""
    n = int(counts.sum())
    rng = trial_stream(seed, BOOTSTRAP_KEY + key)
    p_hat = counts / n
    draws = rng.multinomial(n, p_hat, size=reps) / n
    tvs = 0.5 * np.abs(draws - pi[None, :]).sum(axis=1)
    return float(tvs.std(ddof=1)) if reps > 1 else 0.0


@dataclass
class TVPoint:
    t: int
    tv: float
    stderr: float


def estimate_tv_curve(spec: ChainSpec, start, ts, trials: int, seed: int, cap_states=None,
                      pi=None, kernel=None) -> list[TVPoint]:
    """Plug-in TV between the empirical t-step law and the exact stationary law."""
    ts = sorted({int(t) for t in ts})
    if not ts or ts[0] < 0:
        raise DomainError("times must be nonnegative")
    kernel = kernel or _kernel(spec, cap_states)
    if pi is None:
        pi = stationary_distribution(spec, "float", cap_states)
    pi_arr = pi.as_array()
    ens = Ensemble(Sampler(kernel), _start_index(kernel, spec, start), trials, seed)
    return [_tv_point(ens.advance_to(t).histogram(), pi_arr, seed, t) for t in ts]


def _tv_point(counts: np.ndarray, pi_arr: np.ndarray, seed: int, t: int) -> TVPoint:
    n = int(counts.sum())
    return TVPoint(t, _tv(counts / n, pi_arr), bootstrap_stderr(counts, pi_arr, seed, t))


def curve_to_csv(points: list[TVPoint]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "estimate", "stderr"])
    for p in points:
        w.writerow([p.t, repr(p.tv), repr(p.stderr)])
    return buf.getvalue()


@dataclass
class MixingEstimate:
    t_estimate: int | None
    inconclusive: bool
    epsilon: Fraction
    starts: list = field(default_factory=list)
    curves: dict = field(default_factory=dict)  # start string -> list[TVPoint]
    notes: list = field(default_factory=list)

    def summary(self) -> dict:
        return {
            "t_estimate": self.t_estimate,
            "inconclusive": self.inconclusive,
            "epsilon": str(self.epsilon),
            "starts": [str(s) for s in self.starts],
            "notes": list(self.notes),
        }


def start_states(spec: ChainSpec, policy: str):
    high, low = spec.extremal_states()
    if policy == "extremal":
        return [high, low]
    if policy == "extremal-ascending":
        return [high]
    if policy == "extremal-descending":
        return [low]
    return [spec.space.parse_state(policy)]


def estimate_mixing_time(spec: ChainSpec, epsilon=Fraction(1, 4),
                         config: SampleConfig = SampleConfig(), cap_states=None) -> MixingEstimate:
    """Smallest probed t in 1, 2, 4, ... with TV + 3 stderr <= epsilon from every start.

    Running out of horizon yields an inconclusive estimate rather than an error.
    """
    eps = to_fraction(epsilon)
    if not 0 < eps < 1:
        raise DomainError("epsilon must lie in (0, 1)")
    kernel = _kernel(spec, cap_states)
    pi_arr = stationary_distribution(spec, "float", cap_states).as_array()
    starts = start_states(spec, config.start_policy)
    sampler = Sampler(kernel)
    ensembles = {str(s): Ensemble(sampler, _start_index(kernel, spec, s), config.trials, config.seed)
                 for s in starts}
    curves = {str(s): [] for s in starts}
    t = 1
    while t <= config.horizon:
        for key, ens in ensembles.items():
            curves[key].append(_tv_point(ens.advance_to(t).histogram(), pi_arr, config.seed, t))
        if all(c[-1].tv + 3 * c[-1].stderr <= float(eps) for c in curves.values()):
            probes = [p.t for p in next(iter(curves.values()))]
            notes = [f"probed t = {probes}", f"{config.trials} trials per start"]
            return MixingEstimate(t, False, eps, starts, curves, notes)
        t *= 2
    notes = [f"no probed t up to horizon {config.horizon} met the criterion"]
    return MixingEstimate(None, True, eps, starts, curves, notes)
