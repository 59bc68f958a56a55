"""Adaptive multilevel Monte Carlo with coupled level differences.

A problem passed to ``run_mlmc`` needs:

* ``grid``: (start, end, n) of the output grid shared by all levels,
* ``max_L``: the deepest level it can build,
* ``sample_field(stream)``: one random input drawn from a stream,
* ``solve(level, field, integrator)``: (values on the grid, OpCounts),
* ``model_cost(level, integrator)``: modelled work of one difference sample.
"""

from __future__ import annotations

import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .fem import QoIVector, trapezoid_weights
from .integrators import OpCounts
from .rng import derive_stream

log = logging.getLogger(__name__)


class InsufficientSamplesError(ValueError):
    pass


class SampleFailure(RuntimeError):
    def __init__(self, level, index, cause):
        self.level, self.index, self.cause = level, index, cause
        super().__init__(f"sample {index} on level {level} failed: {cause}")


@dataclass(frozen=True)
class MlmcConfig:
    eps: float
    alpha: float = 2.0
    initial_N: int = 16
    initial_L: int = 2
    max_L: int = 8
    master_seed: int = 0
    integrator: str = "lts"
    bias_window: int = 1
    workers: int = 1
    min_N: int = 2

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError("eps must be positive")
        if self.alpha < 1:
            raise ValueError("alpha must be at least 1")
        if self.initial_N < 2:
            raise ValueError("initial_N must be at least 2")
        if self.bias_window not in (1, 2):
            raise ValueError("bias_window must be 1 or 2")
        if self.integrator not in ("lf", "lts"):
            raise ValueError(f"unknown integrator {self.integrator!r}")


@dataclass
class LevelAccumulator:
    """Running sums of one level; the weights define the norm on the output grid."""

    level: int
    weights: np.ndarray
    n_done: int = 0
    sum_dq_sq: float = 0.0
    sum_dq: np.ndarray = None
    sum_q: np.ndarray = None
    sum_q_sq: float = 0.0
    counts: OpCounts = field(default_factory=OpCounts)
    wall: float = 0.0

    def __post_init__(self):
        n = len(self.weights)
        if self.sum_dq is None:
            self.sum_dq = np.zeros(n)
        if self.sum_q is None:
            self.sum_q = np.zeros(n)

    def norm_sq(self, v) -> float:
        return float(self.weights @ (v * v))

    def add(self, dq, q, counts=None, wall=0.0):
        self.n_done += 1
        self.sum_dq_sq += self.norm_sq(dq)
        self.sum_dq += dq
        self.sum_q_sq += self.norm_sq(q)
        self.sum_q += q
        if counts is not None:
            self.counts += counts
        self.wall += wall

    @classmethod
    def from_samples(cls, dqs, qs=None, weights=None, level=0):
        dqs = [np.atleast_1d(np.asarray(d, dtype=float)) for d in dqs]
        qs = dqs if qs is None else [np.atleast_1d(np.asarray(q, dtype=float)) for q in qs]
        w = np.ones(len(dqs[0])) if weights is None else np.asarray(weights, dtype=float)
        acc = cls(level, w)
        for d, q in zip(dqs, qs):
            acc.add(d, q)
        return acc

    @property
    def mean_dq(self) -> np.ndarray:
        return self.sum_dq / max(self.n_done, 1)


def _clamp(v, what, level):
    if v < 0:
        log.warning("negative %s estimate %.3e on level %d clamped to 0", what, v, level)
        return 0.0
    return v


def estimate_variance(acc: LevelAccumulator) -> float:
    """Unbiased sample variance of the level differences in the output norm."""
    n = acc.n_done
    if n < 2:
        raise InsufficientSamplesError(f"level {acc.level} has {n} samples; need 2")
    v = (acc.sum_dq_sq - acc.norm_sq(acc.sum_dq) / n) / (n - 1)
    return _clamp(v, "variance", acc.level)


def estimate_mc_variance(acc: LevelAccumulator) -> float:
    """Variance of the level quantity itself, with 1/N normalization."""
    n = acc.n_done
    if n < 2:
        raise InsufficientSamplesError(f"level {acc.level} has {n} samples; need 2")
    v = (acc.sum_q_sq - acc.norm_sq(acc.sum_q) / n) / n
    return _clamp(v, "MC variance", acc.level)


def optimal_samples(Vs, Cs, eps, min_N=2) -> list[int]:
    """N_l = ceil(2/eps^2 sqrt(V_l/C_l) sum sqrt(V C)), at least ``min_N``."""
    Vs, Cs = np.asarray(Vs, dtype=float), np.asarray(Cs, dtype=float)
    if np.any(Cs <= 0):
        raise ValueError("costs must be positive")
    if np.any(Vs < 0):
        raise ValueError("variances must be non-negative")
    total = np.sum(np.sqrt(Vs * Cs))
    raw = 2.0 / eps**2 * np.sqrt(Vs / Cs) * total
    # tolerate roundoff just above an integer
    return [max(min_N, math.ceil(x * (1 - 1e-12))) for x in raw]


def estimate_bias(mean_dq, alpha=2.0, weights=None) -> float:
    """Squared-norm bias proxy ||mean dQ_L||^2 / (2^alpha - 1)^2."""
    v = mean_dq.values if isinstance(mean_dq, QoIVector) else np.atleast_1d(np.asarray(mean_dq, dtype=float))
    if weights is None:
        weights = mean_dq.weights if isinstance(mean_dq, QoIVector) else np.ones(len(v))
    return float(weights @ (v * v)) / (2.0**alpha - 1.0) ** 2


@dataclass
class SampleResult:
    dq: np.ndarray
    q: np.ndarray
    counts: OpCounts
    wall: float


def sample_delta_q(problem, level, stream, integrator="lts") -> SampleResult:
    """One coupled difference: the same random input drives both solves."""
    t0 = time.perf_counter()
    fs = problem.sample_field(stream)
    q, counts = problem.solve(level, fs, integrator)
    if level == 0:
        dq = q.copy()
    else:
        qc, cc = problem.solve(level - 1, fs, integrator)
        counts += cc
        dq = q - qc
    return SampleResult(dq, q, counts, time.perf_counter() - t0)


_WORKER_PROBLEM = None


def _init_worker(problem):
    global _WORKER_PROBLEM
    _WORKER_PROBLEM = problem


def _evaluate(task):
    seed, level, index, integrator = task
    problem = _WORKER_PROBLEM
    try:
        return sample_delta_q(problem, level, derive_stream(seed, level, index), integrator)
    except Exception as exc:  # noqa: BLE001 - context is attached and re-raised by the driver
        return SampleFailure(level, index, exc)


class SampleRunner:
    """Evaluates batches of (level, index) samples, in-process or on a process pool."""

    def __init__(self, problem, workers=1):
        self.problem = problem
        self.workers = max(1, int(workers))
        self._pool = None

    def __enter__(self):
        if self.workers > 1:
            self._pool = ProcessPoolExecutor(self.workers, initializer=_init_worker, initargs=(self.problem,))
        else:
            _init_worker(self.problem)
        return self

    def __exit__(self, *exc):
        if self._pool is not None:
            self._pool.shutdown()
            self._pool = None

    def map(self, tasks):
        if self._pool is None:
            return [_evaluate(t) for t in tasks]
        chunk = max(1, len(tasks) // (4 * self.workers))
        return list(self._pool.map(_evaluate, tasks, chunksize=chunk))


@dataclass
class LevelStats:
    level: int
    N: int
    V: float
    V_mc: float
    model_cost: float
    bias: float
    mean_norm: float
    matvecs: int
    entries: int
    wall: float


@dataclass
class MlmcResult:
    estimate: QoIVector
    levels: list
    converged: bool
    L: int
    eps: float
    integrator: str
    total_variance: float
    bias_proxy: float

    @property
    def total_model_cost(self) -> float:
        return float(sum(s.N * s.model_cost for s in self.levels))

    @property
    def total_entries(self) -> int:
        return int(sum(s.entries for s in self.levels))

    @property
    def total_wall(self) -> float:
        return float(sum(s.wall for s in self.levels))


def level_study(problem, L, N, integrator="lts", master_seed=0, runner=None) -> list[LevelStats]:
    """Fixed-N statistics on levels 0..L, for measuring variance decay outside an adaptive run."""
    weights = trapezoid_weights(problem.grid)
    accs = [LevelAccumulator(ell, weights) for ell in range(L + 1)]
    tasks = [(master_seed, ell, i, integrator) for ell in range(L + 1) for i in range(N)]
    own = runner is None
    runner = runner or SampleRunner(problem)
    if own:
        runner.__enter__()
    try:
        results = runner.map(tasks)
    finally:
        if own:
            runner.__exit__(None, None, None)
    for task, res in zip(tasks, results):
        if isinstance(res, SampleFailure):
            raise res
        accs[task[1]].add(res.dq, res.q, res.counts, res.wall)
    return [
        LevelStats(
            a.level, a.n_done, estimate_variance(a), estimate_mc_variance(a), problem.model_cost(a.level, integrator),
            float("nan"), math.sqrt(a.norm_sq(a.mean_dq)), a.counts.full + a.counts.coarse + a.counts.fine,
            a.counts.entries, a.wall,
        )
        for a in accs
    ]


def _bias(accs, alpha, window):
    b = accs[-1].norm_sq(accs[-1].mean_dq)
    if window == 2 and len(accs) > 2:
        b = max(b, accs[-2].norm_sq(accs[-2].mean_dq) / 2.0 ** (2 * alpha))
    return b / (2.0**alpha - 1.0) ** 2


def run_mlmc(problem, config: MlmcConfig, runner: SampleRunner | None = None) -> MlmcResult:
    """Adaptive MLMC: warm up on levels 0..initial_L, then refine N and L until both error parts are below eps^2/2."""
    eps2 = config.eps**2
    weights = trapezoid_weights(problem.grid)
    max_L = min(config.max_L, problem.max_L)
    L = min(config.initial_L, max_L)
    accs = [LevelAccumulator(ell, weights) for ell in range(L + 1)]
    targets = [config.initial_N] * (L + 1)
    costs = [problem.model_cost(ell, config.integrator) for ell in range(L + 1)]
    own = runner is None
    runner = runner or SampleRunner(problem, config.workers)
    if own:
        runner.__enter__()
    try:
        converged = False
        while True:
            tasks = [
                (config.master_seed, ell, i, config.integrator)
                for ell in range(L + 1)
                for i in range(accs[ell].n_done, targets[ell])
            ]
            if tasks:
                for task, res in zip(tasks, runner.map(tasks)):
                    if isinstance(res, SampleFailure):
                        raise res
                    accs[task[1]].add(res.dq, res.q, res.counts, res.wall)
                Vs = [estimate_variance(a) for a in accs]
                new = optimal_samples(Vs, costs, config.eps, config.min_N)
                targets = [max(t, n) for t, n in zip(targets, new)]
                if any(a.n_done < t for a, t in zip(accs, targets)):
                    continue
            if _bias(accs, config.alpha, config.bias_window) < eps2 / 2:
                converged = True
                break
            if L >= max_L:
                break
            L += 1
            accs.append(LevelAccumulator(L, weights))
            targets.append(config.initial_N)
            costs.append(problem.model_cost(L, config.integrator))
    finally:
        if own:
            runner.__exit__(None, None, None)

    Vs = [estimate_variance(a) for a in accs]
    stats = []
    for ell, a in enumerate(accs):
        bias = a.norm_sq(a.mean_dq) / (2.0**config.alpha - 1.0) ** 2 if ell > 0 else float("nan")
        stats.append(
            LevelStats(
                ell, a.n_done, Vs[ell], estimate_mc_variance(a), costs[ell], bias,
                math.sqrt(a.norm_sq(a.mean_dq)), a.counts.full + a.counts.coarse + a.counts.fine,
                a.counts.entries, a.wall,
            )
        )
    estimate = QoIVector(sum(a.mean_dq for a in accs), tuple(problem.grid))
    return MlmcResult(
        estimate,
        stats,
        converged,
        L,
        config.eps,
        config.integrator,
        float(sum(v / a.n_done for v, a in zip(Vs, accs))),
        _bias(accs, config.alpha, config.bias_window),
    )
