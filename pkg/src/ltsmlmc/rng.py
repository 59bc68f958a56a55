"""Reproducible random inputs: per-sample streams and the three wave-speed models.

Every MLMC sample owns one stream keyed by ``(master_seed, level, sample_index)``.
The stream is a Philox counter-based generator whose key comes from a
``SeedSequence`` with that triple as spawn key, so a sample can be replayed in
any process and in any order.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

KL_TERMS = 100
KL_DOMAIN = (0.0, 6.0)
JUMP_RIGHT_END = 4.0
WIDTH_RANGE = (0.001, 0.007)

# max |c^2 - 1| for the KL field: sum_k 2/(4 pi^2 k^2)
KL_BOUND = float(np.sum(1.0 / np.arange(1, KL_TERMS + 1) ** 2) / (2.0 * np.pi**2))


class DomainError(ValueError):
    """Raised when a field is evaluated outside its domain."""


@dataclass(frozen=True)
class RngStream:
    master_seed: int
    level: int
    sample_index: int
    generator: np.random.Generator = field(compare=False, repr=False)

    def uniform(self, low=0.0, high=1.0, size=None):
        return self.generator.uniform(low, high, size)


def derive_stream(master_seed: int, level: int, sample_index: int) -> RngStream:
    if master_seed < 0 or level < 0 or sample_index < 0:
        raise ValueError("seed, level and sample index must be non-negative")
    seq = np.random.SeedSequence(entropy=int(master_seed), spawn_key=(int(level), int(sample_index)))
    gen = np.random.Generator(np.random.Philox(seq))
    return RngStream(int(master_seed), int(level), int(sample_index), gen)


class FieldKind(enum.Enum):
    KL = "kl"
    JUMP = "jump"
    CHANNEL_WIDTH = "channel_width"


@dataclass(frozen=True)
class FieldSample:
    """One realization of the random input.

    Only the attributes belonging to ``kind`` are meaningful.
    """

    kind: FieldKind
    kl_xi1: np.ndarray | None = None
    kl_xi2: np.ndarray | None = None
    jump_xi: float | None = None
    width_b: float | None = None
    domain: tuple[float, float] = KL_DOMAIN

    def __post_init__(self):
        if self.kind is FieldKind.KL:
            if self.kl_xi1 is None or self.kl_xi2 is None:
                raise ValueError("KL sample needs both coefficient arrays")
            if len(self.kl_xi1) != KL_TERMS or len(self.kl_xi2) != KL_TERMS:
                raise ValueError(f"KL sample needs {KL_TERMS} coefficients per family")
        elif self.kind is FieldKind.JUMP and self.jump_xi is None:
            raise ValueError("jump sample needs jump_xi")
        elif self.kind is FieldKind.CHANNEL_WIDTH and self.width_b is None:
            raise ValueError("channel sample needs width_b")


def kl_sample(xi1, xi2) -> FieldSample:
    return FieldSample(FieldKind.KL, kl_xi1=np.asarray(xi1, dtype=float), kl_xi2=np.asarray(xi2, dtype=float))


def sample_kl(stream: RngStream) -> FieldSample:
    xi = stream.uniform(-1.0, 1.0, 2 * KL_TERMS)
    return kl_sample(xi[:KL_TERMS], xi[KL_TERMS:])


def sample_jump(stream: RngStream, H0: float) -> FieldSample:
    if H0 < 0:
        raise ValueError("H0 must be non-negative")
    xi = JUMP_RIGHT_END if H0 == 0 else float(stream.uniform(JUMP_RIGHT_END - H0, JUMP_RIGHT_END))
    return FieldSample(FieldKind.JUMP, jump_xi=xi)


def sample_width(stream: RngStream) -> FieldSample:
    return FieldSample(FieldKind.CHANNEL_WIDTH, width_b=float(stream.uniform(*WIDTH_RANGE)))


def _kl_series(xi1, xi2, x):
    k = np.arange(1, KL_TERMS + 1, dtype=float)
    arg = np.multiply.outer(x, k) * (np.pi / 6.0)
    weights = 1.0 / (4.0 * np.pi**2 * k**2)
    return 1.0 + (np.cos(arg) * (weights * xi1)).sum(axis=-1) + (np.sin(arg) * (weights * xi2)).sum(axis=-1)


def eval_speed_squared(sample: FieldSample, x):
    """Squared wave speed c^2(x) of a sample; scalar in, scalar out."""
    xa = np.asarray(x, dtype=float)
    lo, hi = sample.domain
    if sample.kind is not FieldKind.CHANNEL_WIDTH:
        tol = 1e-12 * max(1.0, abs(hi))
        if np.any(xa < lo - tol) or np.any(xa > hi + tol):
            raise DomainError(f"x outside [{lo}, {hi}]")
    if sample.kind is FieldKind.KL:
        out = _kl_series(sample.kl_xi1, sample.kl_xi2, xa)
    elif sample.kind is FieldKind.JUMP:
        out = np.where(xa < sample.jump_xi, 1.0, 4.0)
    else:
        out = np.ones_like(xa)
    return float(out) if out.ndim == 0 else out


def speed_squared_bound(kind: FieldKind) -> float:
    """Upper bound of c^2 over all realizations of ``kind``."""
    if kind is FieldKind.KL:
        return 1.0 + KL_BOUND
    if kind is FieldKind.JUMP:
        return 4.0
    return 1.0
