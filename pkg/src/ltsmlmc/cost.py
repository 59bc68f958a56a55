"""Closed-form work models for MLMC with leapfrog and local time-stepping.

All proportionality constants are set to one, so absolute values are only
meaningful relative to each other; ratios and exponents are constant-free.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class RefinementParams:
    d: int = 1
    r: float = 0.01
    p0: int = 16
    H0: float = 1.0
    k: int = 1
    T: float = 1.0
    L: int | None = None

    def __post_init__(self):
        if not 0 <= self.r <= 1:
            raise ValueError("r must lie in [0, 1]")
        if self.p0 < 1:
            raise ValueError("p0 must be at least 1")

    @property
    def levels(self) -> int:
        """L, defaulting to ceil(log2 p0) so that the finest level is uniform."""
        return self.L if self.L is not None else max(0, math.ceil(math.log2(self.p0)))

    @property
    def scale(self) -> float:
        return self.T * self.k ** (2 * (self.d + 1)) / self.H0 ** (self.d + 1)


@dataclass(frozen=True)
class VarianceModel:
    V0: float = 1.0
    beta: float = 2.0

    def variances(self, L: int) -> np.ndarray:
        return self.V0 / 2.0 ** (self.beta * np.arange(L + 1))


def single_solve_cost_lf(T, H, p, r, d=1, k=1) -> float:
    """One leapfrog solve: T k^(2(d+1)) p / H^(d+1) ((1-r) + r p^d)."""
    return T * k ** (2 * (d + 1)) * p / H ** (d + 1) * ((1 - r) + r * p**d)


def single_solve_cost_lts(T, H, p, r, d=1, k=1) -> float:
    """One LTS solve: T k^(2(d+1)) / H^(d+1) ((1-r) + r p^(d+1))."""
    return T * k ** (2 * (d + 1)) / H ** (d + 1) * ((1 - r) + r * p ** (d + 1))


def cost_lf_level(params: RefinementParams, ell: int) -> float:
    d, r, p0 = params.d, params.r, params.p0
    if ell == 0:
        return params.scale * ((1 - r) * p0 + r * p0 ** (d + 1))
    return params.scale * ((1 - r) * (2**d + 1) / 2**d * 2 ** (d * ell) * p0 + 2 * r * p0 ** (d + 1))


def cost_lts_level(params: RefinementParams, ell: int) -> float:
    d, r, p0 = params.d, params.r, params.p0
    if ell == 0:
        return params.scale * ((1 - r) + r * p0 ** (d + 1))
    return params.scale * (
        (1 - r) * (2 ** (d + 1) + 1) / 2 ** (d + 1) * 2 ** ((d + 1) * ell) + 2 * r * p0 ** (d + 1)
    )


def level_costs(params: RefinementParams, integrator: str) -> np.ndarray:
    f = {"lf": cost_lf_level, "lts": cost_lts_level}[integrator]
    return np.array([f(params, ell) for ell in range(params.levels + 1)])


def total_cost(Vs, Cs, eps) -> float:
    """(2/eps^2) (sum sqrt(V C))^2, the cost at the optimal sample allocation."""
    Vs, Cs = np.asarray(Vs, dtype=float), np.asarray(Cs, dtype=float)
    if Vs.shape != Cs.shape:
        raise ValueError("variance and cost lists differ in length")
    return 2.0 / eps**2 * float(np.sum(np.sqrt(Vs * Cs))) ** 2


def speedup(d, r, p0, L=None, variances: VarianceModel | None = None) -> float:
    """Ratio of total MLMC work with leapfrog over work with local time-stepping."""
    params = RefinementParams(d=d, r=r, p0=p0, L=L)
    Vs = (variances or VarianceModel()).variances(params.levels)
    num = np.sum(np.sqrt(Vs * level_costs(params, "lf")))
    den = np.sum(np.sqrt(Vs * level_costs(params, "lts")))
    return float((num / den) ** 2)


def single_solve_speedup(d, r, p) -> float:
    return p * ((1 - r) + r * p**d) / ((1 - r) + r * p ** (d + 1))


# parameter sets of the reference speed-up study, keyed by dimension: (r, p0, beta)
REFERENCE_POINTS = {1: (1e-2, 13, 4.0), 2: (1e-4, 19, 6.0), 3: (1e-6, 27, 8.0)}


def sweep(axis: str, values, d=1, r=None, p0=None, beta=None) -> list[dict]:
    """Speed-up as one of r, p0 or beta varies, the others fixed at the reference point of ``d``."""
    r0, p00, b0 = REFERENCE_POINTS.get(d, REFERENCE_POINTS[1])
    base = {"r": r0 if r is None else r, "p0": p00 if p0 is None else p0, "beta": b0 if beta is None else beta}
    if axis not in base:
        raise ValueError(f"unknown sweep axis {axis!r}")
    rows = []
    for v in values:
        args = dict(base, **{axis: v})
        p = int(args["p0"])
        S = speedup(d, args["r"], p, None, VarianceModel(1.0, args["beta"]))
        rows.append({"d": d, "r": args["r"], "p0": p, "beta": args["beta"], "L": RefinementParams(p0=p).levels, "speedup": S})
    return rows


def graded_cost_lf(m, s, d) -> float:
    return float(m) ** (s + d)


def graded_cost_lts(m, s, d, q) -> float:
    if not 1 <= q <= m:
        raise ValueError("q must lie in [1, m]")
    m, q = float(m), float(q)
    g = (q + 1) ** s - q**s
    return (m ** (s + d) + m**s * q**d * (g - 1)) / g


def optimal_q(m, s, d) -> int:
    """Number of fine layers minimizing the LTS cost, by exhaustive scan (ties go to the smallest q)."""
    q = np.arange(1, int(m) + 1, dtype=float)
    g = (q + 1) ** s - q**s
    # common positive factors dropped; only the argmin matters
    cost = (float(m) ** d + q**d * (g - 1)) / g
    return int(q[np.argmin(cost)])


def graded_speedup(m, s, d, q=None) -> float:
    q = optimal_q(m, s, d) if q is None else q
    return graded_cost_lf(m, s, d) / graded_cost_lts(m, s, d, q)


def fit_slope(x, y) -> float:
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


@dataclass(frozen=True)
class AsymptoticRates:
    alpha: float
    beta: float
    gamma: float

    def __post_init__(self):
        if min(self.alpha, self.beta, self.gamma) <= 0:
            raise ValueError("rates must be positive")
        if self.alpha < 0.5 * min(self.beta, self.gamma):
            raise ValueError("need alpha >= min(beta, gamma) / 2")

    def cost_exponent(self):
        return asymptotic_exponents(self.alpha, self.beta, self.gamma)


def asymptotic_exponents(alpha, beta, gamma, rtol=1e-12):
    """(regime, exponent e, log power) with total cost ~ eps^e |log eps|^power."""
    if math.isclose(beta, gamma, rel_tol=rtol):
        return "beta=gamma", -2.0, 2
    if beta > gamma:
        return "beta>gamma", -2.0, 0
    return "beta<gamma", -2.0 - (gamma - beta) / alpha, 0


def graded_gammas(s, d):
    """Cost growth exponents (leapfrog, LTS) in the number of layers on graded meshes."""
    return s + d, s + d**2 / (d + s - 1)


def graded_cost_exponents(beta, s, d, k=1):
    """Total-cost exponents for both integrators on graded meshes, with alpha = k + 1."""
    g_lf, g_lts = graded_gammas(s, d)
    return {"lf": asymptotic_exponents(k + 1, beta, g_lf), "lts": asymptotic_exponents(k + 1, beta, g_lts)}


def graded_speedup_exponent(beta, s, d, k=1, rtol=1e-12):
    """(regime, e, log power) with speed-up S ~ eps^-e |log eps|^power as eps -> 0."""
    g_lf, g_lts = graded_gammas(s, d)
    if math.isclose(beta, g_lf, rel_tol=rtol):
        return "beta=s+d", 0.0, 2
    if beta > g_lf:
        return "beta>s+d", 0.0, 0
    if math.isclose(beta, g_lts, rel_tol=rtol):
        return "beta=gamma_lts", (s + d - beta) / (k + 1), -2
    if beta > g_lts:
        return "between", (s + d - beta) / (k + 1), 0
    return "beta<gamma_lts", d * (s - 1) / ((k + 1) * (s + d - 1)), 0

