"""Lifetime laws used by the election schemes, and their comparison probabilities.

Every sampler draws from an explicit :class:`RngStream`; nothing here touches
global random state.
"""
from __future__ import annotations

import math
import threading
from dataclasses import dataclass
from functools import lru_cache
from typing import Union

import numpy as np

from .errors import ParameterError, UndefinedComparisonError

_BLOCK = 64
# numpy's PCG64.jumped() stride, (phi - 1) * 2**128
_JUMP = 210306068529402873165736369884012333109
_MASK128 = (1 << 128) - 1
_scratch = threading.local()


@lru_cache(maxsize=256)
def _base_state(seed: int, key: tuple[int, ...]) -> dict:
    return np.random.PCG64(np.random.SeedSequence(seed, spawn_key=key)).state


def _scratch_generator() -> np.random.Generator:
    gen = getattr(_scratch, "gen", None)
    if gen is None:
        gen = _scratch.gen = np.random.Generator(np.random.PCG64(0))
    return gen


class RngStream:
    """Reproducible random stream identified by ``(seed, stream_id)``.

    Stream ``i`` is ``PCG64(SeedSequence(seed)).jumped(i)``: the seed's
    sequence advanced by ``i`` golden-ratio jumps, so identical ids replay
    the same draws and distinct ids land far apart in the period. Streams
    keep only their generator state; draws are made in blocks on a
    per-thread scratch generator, which keeps one stream per trial cheap.
    """

    __slots__ = ("seed", "stream_id", "_key", "_state", "_ubuf", "_upos", "_nbuf", "_npos")

    def __init__(self, seed: int, stream_id: int = 0, *, _key: tuple[int, ...] = ()):
        if seed < 0 or stream_id < 0:
            raise ParameterError("seed and stream_id must be non-negative")
        if stream_id >= 1 << 64:
            raise ParameterError("stream_id must fit in 64 bits")
        self.seed = int(seed)
        self.stream_id = int(stream_id)
        self._key = tuple(_key)
        self._state = None
        self._ubuf: list[float] = []
        self._upos = 0
        self._nbuf: list[float] = []
        self._npos = 0

    def __repr__(self):
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id}, key={self._key})"

    def _enter(self) -> np.random.Generator:
        gen = _scratch_generator()
        bg = gen.bit_generator
        if self._state is None:
            bg.state = _base_state(self.seed, self._key)
            if self.stream_id:
                bg.advance((self.stream_id * _JUMP) & _MASK128)
        else:
            bg.state = self._state
        return gen

    def _leave(self, gen: np.random.Generator) -> None:
        self._state = gen.bit_generator.state

    @property
    def generator(self) -> np.random.Generator:
        """A fresh numpy generator continuing this stream, for vectorised draws.

        The stream itself does not advance; use :meth:`draw_array` to consume.
        """
        gen = self._enter()
        own = np.random.Generator(np.random.PCG64(0))
        own.bit_generator.state = gen.bit_generator.state
        return own

    def draw_array(self, fn):
        """Call ``fn(generator)`` on this stream and advance past its draws."""
        gen = self._enter()
        try:
            return fn(gen)
        finally:
            self._leave(gen)

    def spawn(self, child_id: int) -> RngStream:
        """Independent child stream: its own base sequence, keyed by this stream's id."""
        return RngStream(self.seed, int(child_id), _key=self._key + (self.stream_id,))

    def uniform(self) -> float:
        """Uniform draw on [0, 1)."""
        if self._upos >= len(self._ubuf):
            gen = self._enter()
            self._ubuf = gen.random(_BLOCK).tolist()
            self._leave(gen)
            self._upos = 0
        u = self._ubuf[self._upos]
        self._upos += 1
        return u

    def exponential(self, rate: float = 1.0) -> float:
        # inverse CDF; 1 - U lies in (0, 1] so the log is finite
        return -math.log1p(-self.uniform()) / rate

    def normal(self) -> float:
        if self._npos >= len(self._nbuf):
            gen = self._enter()
            self._nbuf = gen.standard_normal(_BLOCK).tolist()
            self._leave(gen)
            self._npos = 0
        z = self._nbuf[self._npos]
        self._npos += 1
        return z

    def poisson(self, mean: float) -> int:
        gen = self._enter()
        k = int(gen.poisson(mean))
        self._leave(gen)
        return k

    def randbelow(self, k: int) -> int:
        """Uniform integer in ``range(k)``."""
        return min(int(self.uniform() * k), k - 1)


# --- lifetime laws -------------------------------------------------------


@dataclass(frozen=True)
class ExpoRate:
    """Exponential law with the given rate."""

    rate: float

    def __post_init__(self):
        if not (math.isfinite(self.rate) and self.rate > 0):
            raise ParameterError(f"exponential rate must be positive, got {self.rate!r}")


def _check_count(name, value):
    if isinstance(value, bool) or int(value) != value or value < 0:
        raise ParameterError(f"{name} must be a non-negative integer, got {value!r}")


@dataclass(frozen=True)
class MaxExp:
    """Maximum of ``n`` iid Expo(1) variables; ``n = 0`` is the point mass at 0."""

    n: int

    def __post_init__(self):
        _check_count("n", self.n)


@dataclass(frozen=True)
class SumExpSeq:
    """Sum of independent exponentials with rates n+1, ..., n+k."""

    n: int
    k: int

    def __post_init__(self):
        _check_count("n", self.n)
        _check_count("k", self.k)


@dataclass(frozen=True)
class StableHalf:
    """Positive stable law of index 1/2 (Levy), density exp(-1/2t)/sqrt(2 pi t^3)."""


@dataclass(frozen=True)
class PoissonCount:
    mean: float

    def __post_init__(self):
        if not (math.isfinite(self.mean) and self.mean >= 0):
            raise ParameterError(f"Poisson mean must be non-negative, got {self.mean!r}")


@dataclass(frozen=True)
class Zero:
    """Point mass at 0."""


LifetimeDistribution = Union[ExpoRate, MaxExp, SumExpSeq, StableHalf, PoissonCount, Zero]


def sample(dist: LifetimeDistribution, rng: RngStream, size: int | None = None):
    """Draw from ``dist``. With ``size`` set, returns a float64 array of draws."""
    if size is not None:
        return rng.draw_array(lambda gen: _sample_array(dist, gen, size))
    if isinstance(dist, ExpoRate):
        return rng.exponential(dist.rate)
    if isinstance(dist, SumExpSeq):
        return sum_exp_seq(dist.n, dist.k, rng)
    if isinstance(dist, MaxExp):
        best = 0.0
        for _ in range(dist.n):
            best = max(best, rng.exponential())
        return best
    if isinstance(dist, StableHalf):
        z = rng.normal()
        while z == 0.0:
            z = rng.normal()
        return 1.0 / (z * z)
    if isinstance(dist, PoissonCount):
        return float(rng.poisson(dist.mean))
    if isinstance(dist, Zero):
        return 0.0
    raise ParameterError(f"unknown distribution {dist!r}")


def sample_levy(rng: RngStream) -> float:
    """One stable-1/2 draw: 1 / Z**2 for a standard normal Z."""
    return sample(StableHalf(), rng)


def sum_exp_seq(n: int, k: int, rng: RngStream) -> float:
    """One draw of Y[n, k]: k inverse-CDF exponentials with rates n+1..n+k."""
    total = 0.0
    uniform = rng.uniform
    for rate in range(n + 1, n + k + 1):
        total -= math.log1p(-uniform()) / rate
    return total


def _sample_array(dist, gen: np.random.Generator, size: int) -> np.ndarray:
    if isinstance(dist, ExpoRate):
        return -np.log1p(-gen.random(size)) / dist.rate
    if isinstance(dist, SumExpSeq):
        out = np.zeros(size)
        for rate in range(dist.n + 1, dist.n + dist.k + 1):
            out += -np.log1p(-gen.random(size)) / rate
        return out
    if isinstance(dist, MaxExp):
        if dist.n == 0:
            return np.zeros(size)
        return (-np.log1p(-gen.random((size, dist.n)))).max(axis=1)
    if isinstance(dist, StableHalf):
        z = gen.standard_normal(size)
        return 1.0 / (z * z)
    if isinstance(dist, PoissonCount):
        return gen.poisson(dist.mean, size).astype(float)
    if isinstance(dist, Zero):
        return np.zeros(size)
    raise ParameterError(f"unknown distribution {dist!r}")


def cdf(dist: LifetimeDistribution, x):
    """Closed-form CDF where one exists (ExpoRate, MaxExp, StableHalf, Zero)."""
    x = np.asarray(x, dtype=float)
    pos = np.clip(x, 0.0, None)
    if isinstance(dist, ExpoRate):
        return np.where(x < 0, 0.0, -np.expm1(-dist.rate * pos))
    if isinstance(dist, MaxExp):
        return np.where(x < 0, 0.0, (-np.expm1(-pos)) ** dist.n)
    if isinstance(dist, StableHalf):
        return np.vectorize(lambda t: math.erfc(1.0 / math.sqrt(2.0 * t)) if t > 0 else 0.0)(x)
    if isinstance(dist, Zero):
        return np.where(x < 0, 0.0, 1.0)
    raise NotImplementedError(f"no closed-form CDF for {dist!r}")


def sample_poisson(mean: float, rng: RngStream) -> int:
    if not (math.isfinite(mean) and mean >= 0):
        raise ParameterError(f"Poisson mean must be non-negative, got {mean!r}")
    if mean == 0:
        return 0
    return rng.poisson(mean)


# --- comparison probabilities -------------------------------------------


def prob_max_exp_first(a: int, b: int) -> float:
    """P(M_a < M_b) for independent maxima of a and b iid Expo(1) variables.

    Equals b / (a + b): the integral of u**a against the density b*u**(b-1)
    on [0, 1] after the substitution u = 1 - exp(-x).
    """
    _check_count("a", a)
    _check_count("b", b)
    if a + b == 0:
        raise UndefinedComparisonError("M_0 < M_0 compares two point masses at 0")
    return b / (a + b)


def prob_stable_sum_first(m: int, n: int) -> float:
    """P(S_m < S'_n) for independent sums of m and n stable-1/2 copies.

    S_k has the law of k**2 * X, which gives (2/pi) * arctan(n/m).
    """
    if isinstance(m, bool) or isinstance(n, bool) or m < 1 or n < 1:
        raise ParameterError(f"sizes must be positive, got m={m!r}, n={n!r}")
    return 2.0 / math.pi * math.atan2(n, m)


__all__ = [
    "RngStream",
    "ExpoRate",
    "MaxExp",
    "SumExpSeq",
    "StableHalf",
    "PoissonCount",
    "Zero",
    "LifetimeDistribution",
    "sample",
    "cdf",
    "sample_poisson",
    "sample_levy",
    "sum_exp_seq",
    "prob_max_exp_first",
    "prob_stable_sum_first",
]
