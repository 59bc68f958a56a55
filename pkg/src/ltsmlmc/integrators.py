"""Leapfrog and stabilized leapfrog local time-stepping for z'' + A z = F.

The step functions (``leapfrog_step``, ``lts_step``) work with any operator
supporting ``@`` and are meant for checking the algebra. ``run`` drives the
compiled loops in ``_kernels`` and is what the experiments use.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import _kernels

BLOWUP_FACTOR = 1e6


class InstabilityError(RuntimeError):
    def __init__(self, step, msg=None):
        self.step = step
        super().__init__(msg or f"solution blew up at step {step}")


@dataclass(frozen=True)
class ChebyshevConstants:
    p: int
    nu: float
    delta: float
    omega: float
    beta_int: np.ndarray
    beta_half: np.ndarray

    @property
    def first_factor(self) -> float:
        """2p^2 / (omega delta), the scaling of the first substep."""
        return 2 * self.p**2 / (self.omega * self.delta)


def _chebyshev_values(p, x):
    """T_0..T_p(x) and U_0..U_{p-1}(x) by the three-term recurrence."""
    T = np.empty(p + 1)
    U = np.empty(max(p, 1))
    T[0] = 1.0
    if p >= 1:
        T[1] = x
    for k in range(1, p):
        T[k + 1] = 2 * x * T[k] - T[k - 1]
    U[0] = 1.0
    if p >= 2:
        U[1] = 2 * x
    for k in range(1, p - 1):
        U[k + 1] = 2 * x * U[k] - U[k - 1]
    return T, U


def chebyshev_constants(p: int, nu: float = 0.01, delta: float | None = None) -> ChebyshevConstants:
    """Stabilization constants; ``delta`` overrides 1 + nu/p^2 when given."""
    if p < 1 or int(p) != p:
        raise ValueError("p must be a positive integer")
    if not 0 <= nu <= 1:
        raise ValueError("nu must lie in [0, 1]")
    p = int(p)
    if delta is None:
        delta = 1.0 + nu / p**2
    T, U = _chebyshev_values(p, delta)
    dT = p * U[p - 1]
    omega = 2.0 * dT / T[p]
    k = np.arange(1, p)
    return ChebyshevConstants(p, float(nu), float(delta), float(omega), T[k - 1] / T[k + 1], T[k] / T[k + 1])


@dataclass
class OpCounts:
    """Matrix-vector products by operator part, and the matrix entries they touched."""

    full: int = 0
    coarse: int = 0
    fine: int = 0
    entries: int = 0

    def __iadd__(self, other: OpCounts):
        self.full += other.full
        self.coarse += other.coarse
        self.fine += other.fine
        self.entries += other.entries
        return self

    def scaled(self, k: int) -> OpCounts:
        return OpCounts(k * self.full, k * self.coarse, k * self.fine, k * self.entries)


@dataclass
class WaveState:
    z_prev: np.ndarray
    z_curr: np.ndarray
    t: float
    dt: float
    step: int = 1
    counts: OpCounts = field(default_factory=OpCounts)


def _nnz(A) -> int:
    return A.nnz if sp.issparse(A) else int(np.count_nonzero(A))


def leapfrog_init(A, z0, mhalf_v0, F0=None, dt=None) -> WaveState:
    """Second-order start: z1 = z0 + dt M^1/2 v0 + dt^2/2 (F0 - A z0)."""
    z0 = np.asarray(z0, dtype=float)
    rhs = -(A @ z0)
    if F0 is not None:
        rhs = rhs + F0
    z1 = z0 + dt * np.asarray(mhalf_v0, dtype=float) + 0.5 * dt**2 * rhs
    return WaveState(z0.copy(), z1, dt, dt, 1, OpCounts(full=1, entries=_nnz(A)))


def leapfrog_step(A, state: WaveState, F=None) -> WaveState:
    rhs = -(A @ state.z_curr)
    if F is not None:
        rhs = rhs + F
    z_next = 2 * state.z_curr - state.z_prev + state.dt**2 * rhs
    if not np.all(np.isfinite(z_next)):
        raise InstabilityError(state.step + 1)
    state.counts += OpCounts(full=1, entries=_nnz(A))
    return WaveState(state.z_curr, z_next, state.t + state.dt, state.dt, state.step + 1, state.counts)


def _selector(P, n):
    if P is None:
        return np.zeros(n)
    P = np.asarray(P.diagonal() if sp.issparse(P) else P, dtype=float)
    return np.diag(P).copy() if P.ndim == 2 else P


def _split(A, sel):
    if sp.issparse(A):
        return A @ sp.diags(1.0 - sel), A @ sp.diags(sel)
    A = np.asarray(A, dtype=float)
    return A * (1.0 - sel), A * sel


def _lts_q1(Ac, Af, z, dt, consts: ChebyshevConstants, counts: OpCounts):
    """q_1 of the substep recurrence started from q_0 = z."""
    p = consts.p
    w = Ac @ z
    counts += OpCounts(coarse=1, fine=p, entries=_nnz(Ac) + p * _nnz(Af))
    q_old = z
    q = z - 0.5 * (dt / p) ** 2 * consts.first_factor * (w + Af @ q_old)
    c = (dt / p) ** 2 * 2 * p**2 / consts.omega
    for m in range(1, p):
        b, bh = consts.beta_int[m - 1], consts.beta_half[m - 1]
        q_old, q = q, (1 + b) * q - b * q_old - c * bh * (w + Af @ q)
    return q


def lts_init(A, P, z0, mhalf_v0, dt, consts: ChebyshevConstants) -> WaveState:
    """Start-up z1 = q_1(z0) + dt M^1/2 v0, the LTS analogue of the leapfrog Taylor step."""
    z0 = np.asarray(z0, dtype=float)
    Ac, Af = _split(A, _selector(P, len(z0)))
    counts = OpCounts()
    z1 = _lts_q1(Ac, Af, z0, dt, consts, counts) + dt * np.asarray(mhalf_v0, dtype=float)
    return WaveState(z0.copy(), z1, dt, dt, 1, counts)


def lts_step(A, P, state: WaveState, consts: ChebyshevConstants) -> WaveState:
    """One global step of the stabilized local time-stepping scheme (zero forcing)."""
    Ac, Af = _split(A, _selector(P, len(state.z_curr)))
    q1 = _lts_q1(Ac, Af, state.z_curr, state.dt, consts, state.counts)
    z_next = -state.z_prev + 2 * q1
    if not np.all(np.isfinite(z_next)):
        raise InstabilityError(state.step + 1)
    return WaveState(state.z_curr, z_next, state.t + state.dt, state.dt, state.step + 1, state.counts)


def discrete_energy(A, z_prev, z_curr, dt) -> float:
    """Leapfrog invariant 1/2 |(z_curr - z_prev)/dt|^2 + 1/2 <A z_curr, z_prev>."""
    v = (z_curr - z_prev) / dt
    return float(0.5 * v @ v + 0.5 * (A @ z_curr) @ z_prev)


def coarse_gamma(dt, consts: ChebyshevConstants) -> float:
    """Coefficient g with q_1 = z + g A(I-P) z on rows not coupled to fine unknowns."""
    p = consts.p
    g_old, g = 0.0, -0.5 * (dt / p) ** 2 * consts.first_factor
    c = (dt / p) ** 2 * 2 * p**2 / consts.omega
    for m in range(1, p):
        b, bh = consts.beta_int[m - 1], consts.beta_half[m - 1]
        g_old, g = g, (1 + b) * g - b * g_old - c * bh
    return g


@dataclass(frozen=True)
class LtsOperator:
    """A split into A(I-P) on all rows and A P on the rows coupled to fine unknowns."""

    coarse: sp.csr_matrix
    fine_local: sp.csr_matrix
    support: np.ndarray
    fine_nnz: int

    @classmethod
    def from_matrix(cls, A, selector) -> LtsOperator:
        A = sp.csr_matrix(A)
        n = A.shape[0]
        sel = _selector(selector, n) != 0
        rows = np.repeat(np.arange(n), np.diff(A.indptr))
        fine_col = sel[A.indices] & (A.data != 0)
        coarse_col = ~sel[A.indices] & (A.data != 0)
        Ac = sp.csr_matrix((A.data[coarse_col], (rows[coarse_col], A.indices[coarse_col])), shape=A.shape)
        support = np.union1d(rows[fine_col], np.nonzero(sel)[0]).astype(np.int64)
        local_index = np.full(n, -1, dtype=np.int64)
        local_index[support] = np.arange(len(support))
        # fine columns always lie in the support, and so do their rows
        r, c = local_index[rows[fine_col]], local_index[A.indices[fine_col]]
        local = sp.csr_matrix((A.data[fine_col], (r, c)), shape=(len(support), len(support)))
        local.sort_indices()
        return cls(Ac, local, support, int(fine_col.sum()))


def _threshold(z0, z1):
    ref = max(np.max(np.abs(z0), initial=0.0), np.max(np.abs(z1), initial=0.0))
    return BLOWUP_FACTOR * ref


def n_steps_for(T, dt):
    """Number of steps and the adjusted step with n * dt = T exactly."""
    if T < 0 or dt <= 0:
        raise ValueError("need T >= 0 and dt > 0")
    if T == 0:
        return 0, dt
    n = max(1, math.ceil(T / dt - 1e-12))
    return n, T / n


def run(kind, A, z0, mhalf_v0, T, dt, selector=None, consts=None, snapshot=None, every=0, lts_op=None) -> WaveState:
    """Integrate from t=0 to t=T with ``kind`` in {"lf", "lts"}.

    ``dt`` is reduced so that an integer number of steps lands on T. When
    ``snapshot`` is given it is called as snapshot(t, z) every ``every`` steps.
    """
    z0 = np.asarray(z0, dtype=float)
    n, dt = n_steps_for(T, dt)
    if n == 0:
        return WaveState(z0.copy(), z0.copy(), 0.0, dt, 0)
    A = sp.csr_matrix(A)
    if kind == "lf":
        state = leapfrog_init(A, z0, mhalf_v0, dt=dt)
    elif kind == "lts":
        if consts is None:
            raise ValueError("LTS needs Chebyshev constants")
        lts_op = lts_op or LtsOperator.from_matrix(A, selector)
        # off the fine support the substeps reduce to one leapfrog step (coarse_gamma == -dt^2/2)
        gamma = -0.5 * dt**2
        c_first = 0.5 * (dt / consts.p) ** 2 * consts.first_factor
        c_inner = (dt / consts.p) ** 2 * 2 * consts.p**2 / consts.omega
        Ac, Af = lts_op.coarse, lts_op.fine_local
        per_step = OpCounts(coarse=1, fine=consts.p, entries=Ac.nnz + consts.p * lts_op.fine_nnz)

        def lts_advance(z_prev, z_curr, todo, thr):
            return _kernels.lts_loop(
                Ac.indptr, Ac.indices, Ac.data,
                Af.indptr, Af.indices, Af.data,
                lts_op.support, z_prev, z_curr, todo,
                c_first, c_inner, consts.beta_int, consts.beta_half, gamma, thr,
            )

        # start-up q_1(z0) + dt v0 as the mean of z0 and one step from z_{-1} = z0 - 2 dt v0
        zp = z0 - 2 * dt * np.asarray(mhalf_v0, dtype=float)
        zc = z0.copy()
        lts_advance(zp, zc, 1, 0.0)
        state = WaveState(z0.copy(), 0.5 * (zc + z0), dt, dt, 1, OpCounts())
        state.counts += per_step
    else:
        raise ValueError(f"unknown integrator {kind!r}")
    z_prev, z_curr = state.z_prev.copy(), state.z_curr.copy()
    thr = _threshold(z_prev, z_curr)
    counts = state.counts
    done = 1
    chunk = every if snapshot is not None and every > 0 else n
    if snapshot is not None:
        snapshot(dt, z_curr.copy())
    while done < n:
        todo = min(chunk, n - done)
        if kind == "lf":
            fail = _kernels.leapfrog_loop(A.indptr, A.indices, A.data, z_prev, z_curr, todo, dt, thr)
            counts += OpCounts(full=todo, entries=todo * A.nnz)
        else:
            fail = lts_advance(z_prev, z_curr, todo, thr)
            counts += per_step.scaled(todo)
        if fail >= 0:
            raise InstabilityError(done + fail + 1)
        done += todo
        if snapshot is not None:
            snapshot(done * dt, z_curr.copy())
    return WaveState(z_prev, z_curr, n * dt, dt, n, counts)
