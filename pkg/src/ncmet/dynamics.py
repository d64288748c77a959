"""Measure-preserving base systems and operator-valued cocycles over them."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Iterator, Sequence

import numpy as np

from .algebra import Abelian, AlgebraElement, TracialAlgebra, require_invertible
from .errors import ConfigurationError, DomainError

GOLDEN_ROTATION = (np.sqrt(5.0) - 1.0) / 2.0


# -- base points ----------------------------------------------------------

@dataclass(frozen=True)
class OdometerPoint:
    """A 2-adic integer truncated to ``width`` bits, stored as an int."""

    value: int
    width: int

    @property
    def bits(self) -> tuple:
        return tuple((self.value >> i) & 1 for i in range(self.width))

    def bit(self, i: int) -> int:
        return (self.value >> i) & 1

    @classmethod
    def from_bits(cls, bits: Sequence[int]) -> "OdometerPoint":
        if any(b not in (0, 1) for b in bits):
            raise DomainError("odometer bits must be 0 or 1")
        return cls(sum(int(b) << i for i, b in enumerate(bits)), len(bits))


@dataclass(frozen=True)
class BernoulliPoint:
    """A bi-infinite i.i.d. symbol sequence, identified by its stream and shift position."""

    stream: int
    position: int


@dataclass(frozen=True)
class RotationPoint:
    angle: float

    def __post_init__(self):
        if not 0.0 <= self.angle < 1.0:
            raise DomainError(f"rotation angle must lie in [0, 1), got {self.angle}")


# -- base systems ---------------------------------------------------------

@dataclass(frozen=True)
class Odometer:
    """``x -> x + 1`` on ``Z / 2^bits`` (binary carry, wrapping at the top)."""

    bits: int

    def __post_init__(self):
        if self.bits < 1:
            raise ConfigurationError("odometer needs at least one bit")

    @property
    def period(self) -> int:
        return 1 << self.bits

    def step(self, x: OdometerPoint) -> OdometerPoint:
        return OdometerPoint((x.value + 1) % self.period, self.bits)

    def unstep(self, x: OdometerPoint) -> OdometerPoint:
        return OdometerPoint((x.value - 1) % self.period, self.bits)

    def advance(self, x: OdometerPoint, n: int) -> OdometerPoint:
        return OdometerPoint((x.value + n) % self.period, self.bits)

    def sample_point(self, rng: np.random.Generator) -> OdometerPoint:
        return OdometerPoint.from_bits(rng.integers(0, 2, size=self.bits).tolist())

    def phase(self, x: OdometerPoint) -> float:
        return x.value / self.period

    def validate(self, x) -> None:
        if not isinstance(x, OdometerPoint) or x.width != self.bits or not 0 <= x.value < self.period:
            raise DomainError(f"{x!r} is not a point of a {self.bits}-bit odometer")


_CHUNK = 4096


@lru_cache(maxsize=256)
def _bernoulli_chunk(stream: int, chunk: int, probabilities: tuple) -> np.ndarray:
    key = 2 * chunk if chunk >= 0 else -2 * chunk - 1
    rng = np.random.default_rng([stream, key])
    out = rng.choice(len(probabilities), size=_CHUNK, p=np.asarray(probabilities))
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class Bernoulli:
    """Two-sided shift on i.i.d. symbols drawn from ``probabilities``.

    Symbols are generated lazily from a counter-keyed generator, so the
    shift and its inverse are exact and every path is reproducible.
    """

    probabilities: tuple

    def __post_init__(self):
        p = tuple(float(v) for v in self.probabilities)
        if not p or any(v < 0 for v in p) or abs(sum(p) - 1.0) > 1e-12:
            raise ConfigurationError("symbol probabilities must be non-negative and sum to 1")
        object.__setattr__(self, "probabilities", p)

    def symbol(self, x: BernoulliPoint, offset: int = 0) -> int:
        j = x.position + offset
        chunk, r = divmod(j, _CHUNK)
        return int(_bernoulli_chunk(x.stream, chunk, self.probabilities)[r])

    def symbols(self, x: BernoulliPoint, n: int) -> np.ndarray:
        """Symbols at positions ``0..n-1`` relative to ``x``."""
        out = np.empty(n, dtype=np.int64)
        j, filled = x.position, 0
        while filled < n:
            chunk, r = divmod(j, _CHUNK)
            take = min(_CHUNK - r, n - filled)
            out[filled:filled + take] = _bernoulli_chunk(x.stream, chunk, self.probabilities)[r:r + take]
            filled += take
            j += take
        return out

    def step(self, x: BernoulliPoint) -> BernoulliPoint:
        return BernoulliPoint(x.stream, x.position + 1)

    def unstep(self, x: BernoulliPoint) -> BernoulliPoint:
        return BernoulliPoint(x.stream, x.position - 1)

    def advance(self, x: BernoulliPoint, n: int) -> BernoulliPoint:
        return BernoulliPoint(x.stream, x.position + n)

    def sample_point(self, rng: np.random.Generator) -> BernoulliPoint:
        return BernoulliPoint(int(rng.integers(0, 2 ** 63 - 1)), 0)

    def phase(self, x: BernoulliPoint) -> float:
        return self.symbol(x) / len(self.probabilities)

    def validate(self, x) -> None:
        if not isinstance(x, BernoulliPoint):
            raise DomainError(f"{x!r} is not a Bernoulli point")


@dataclass(frozen=True)
class Rotation:
    """Circle rotation ``x -> x + alpha mod 1``."""

    alpha: float = GOLDEN_ROTATION

    def step(self, x: RotationPoint) -> RotationPoint:
        return RotationPoint((x.angle + self.alpha) % 1.0)

    def unstep(self, x: RotationPoint) -> RotationPoint:
        return RotationPoint((x.angle - self.alpha) % 1.0)

    def advance(self, x: RotationPoint, n: int) -> RotationPoint:
        return RotationPoint((x.angle + n * self.alpha) % 1.0)

    def sample_point(self, rng: np.random.Generator) -> RotationPoint:
        return RotationPoint(float(rng.random()))

    def phase(self, x: RotationPoint) -> float:
        return x.angle

    def validate(self, x) -> None:
        if not isinstance(x, RotationPoint):
            raise DomainError(f"{x!r} is not a rotation point")


def step(system, x):
    """Apply the base map once."""
    return system.step(x)


def birkhoff_average(system, x, fn: Callable, n: int) -> float:
    """Time average ``(1/n) sum_{k<n} fn(f^k x)``; a diagnostic, not a gate."""
    total = 0.0
    for _ in range(n):
        total += float(fn(x))
        x = system.step(x)
    return total / n


# -- cocycles -------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class CocycleSystem:
    """A base system with a generator ``x -> c(1, x)`` in an algebra.

    ``known_limit`` optionally carries a closed-form limit operator (for
    systems where the theory pins it down exactly, e.g. the odometer
    counterexample); estimators never use it unless asked to.
    """

    base: object
    algebra: TracialAlgebra
    generator: Callable
    moment_bound: float | None = None
    known_limit: AlgebraElement | None = None
    name: str = ""
    metadata: dict = field(default_factory=dict)

    def c1(self, x) -> AlgebraElement:
        return self.generator(x)


def evaluate_cocycle(sys: CocycleSystem, n: int, x) -> AlgebraElement:
    """``c(n, x)`` from the cocycle law; negative ``n`` uses inverses along the backward orbit."""
    if n == 0:
        return sys.algebra.identity()
    if n < 0:
        if not hasattr(sys.base, "unstep"):
            raise DomainError("negative times need an invertible base map")
        y = x
        for _ in range(-n):
            y = sys.base.unstep(y)
        return evaluate_cocycle(sys, -n, y).inv()
    out = None
    for _ in range(n):
        g = sys.generator(x)
        require_invertible(g)
        out = g if out is None else g @ out
        x = sys.base.step(x)
    return out


def sample_path(sys: CocycleSystem, seed: int, horizon: int) -> Iterator:
    """Yield ``(x_k, c(1, x_k))`` for ``k < horizon`` from a seeded initial point."""
    if horizon < 1:
        raise DomainError("horizon must be at least 1")
    x = initial_point(sys, seed)
    for _ in range(horizon):
        yield x, sys.generator(x)
        x = sys.base.step(x)


def initial_point(sys: CocycleSystem, seed: int):
    return sys.base.sample_point(np.random.default_rng(seed))


def constant_cocycle(base, T: AlgebraElement, name: str = "constant") -> CocycleSystem:
    """``c(n, x) = T^n`` regardless of the base dynamics."""
    require_invertible(T)
    return CocycleSystem(base, T.parent, lambda x: T, name=name)


def iid_cocycle(matrices: Sequence[AlgebraElement], probabilities: Sequence[float],
                name: str = "iid_random") -> CocycleSystem:
    """``c(1, x)`` picks ``matrices[s]`` where ``s`` is the symbol at position 0 of ``x``."""
    base = Bernoulli(tuple(probabilities))
    mats = tuple(matrices)
    if len(mats) != len(base.probabilities):
        raise ConfigurationError("need one matrix per symbol")
    for m in mats:
        require_invertible(m)
    algebra = mats[0].parent
    sys = CocycleSystem(base, algebra, lambda x: mats[base.symbol(x)], name=name,
                        metadata={"matrices": mats})
    return sys


def diagonal_function_cocycle(base, algebra: TracialAlgebra, amplitude: float,
                              offsets: Sequence[float] | None = None,
                              name: str = "diagonal_function") -> CocycleSystem:
    """Abelian cocycle ``c(1,x)(y_j) = exp(offset_j + amplitude cos 2pi(phase(x) + j/m))``."""
    if len(algebra.blocks) != 1 or not isinstance(algebra.blocks[0], Abelian):
        raise ConfigurationError("diagonal_function needs a single abelian block")
    m = len(algebra.blocks[0].weights)
    off = np.zeros(m) if offsets is None else np.asarray(offsets, dtype=float)
    shifts = np.arange(m) / m

    def gen(x):
        return AlgebraElement(algebra, [np.exp(off + amplitude * np.cos(2 * np.pi * (base.phase(x) + shifts)))])

    return CocycleSystem(base, algebra, gen, name=name)


# -- the odometer counterexample -------------------------------------------

def counterexample_weights(cells: int, exponent: float = 2.0) -> np.ndarray:
    """Cell masses ``nu(Y_m) ~ m^-exponent`` for ``m = 1..cells``, normalized."""
    w = np.arange(1, cells + 1, dtype=float) ** (-exponent)
    return w / w.sum()


def build_counterexample_cocycle(bits: int, cells: int, weight_exponent: float = 2.0) -> CocycleSystem:
    """Abelian cocycle over the odometer whose limit operator is the constant sqrt(2).

    Cell ``Y_m`` (``m = 1..cells``) gets the value 1 when bit ``m`` of the
    base point is 0 and the value 2 otherwise.
    """
    if cells < 1:
        raise ConfigurationError("need at least one partition cell")
    if bits < cells + 12:
        raise ConfigurationError(
            f"odometer needs bits >= cells + 12 (= {cells + 12}) to hold the witness events; got bits={bits}")
    base = Odometer(bits)
    algebra = TracialAlgebra((Abelian(tuple(counterexample_weights(cells, weight_exponent))),))
    index = np.arange(1, cells + 1)

    def gen(x: OdometerPoint) -> AlgebraElement:
        mask = (x.value >> index) & 1
        return AlgebraElement(algebra, [1.0 + mask.astype(float)])

    # python ints beyond 63 bits do not broadcast through numpy shifts
    if bits > 62:
        def gen(x: OdometerPoint) -> AlgebraElement:  # noqa: F811
            v = x.value
            return AlgebraElement(algebra, [np.array([1.0 + ((v >> int(m)) & 1) for m in index])])

    limit = algebra.scalar(np.sqrt(2.0))
    return CocycleSystem(base, algebra, gen, moment_bound=0.5 * np.log(2.0), known_limit=limit,
                         name="odometer_counterexample",
                         metadata={"bits": bits, "cells": cells, "weight_exponent": weight_exponent})


def in_witness_event(x: OdometerPoint, n: int) -> bool:
    """Whether bit ``n`` of ``x`` is 0 and bit ``n + 10`` is 1 (the witness event at scale ``n``)."""
    return x.bit(n) == 0 and x.bit(n + 10) == 1


def sample_in_witness_event(sys: CocycleSystem, n: int, seed: int, max_tries: int = 10_000) -> OdometerPoint:
    """Rejection-sample a uniform base point conditioned on the witness event at scale ``n``."""
    rng = np.random.default_rng(seed)
    for _ in range(max_tries):
        x = sys.base.sample_point(rng)
        if in_witness_event(x, n):
            return x
    raise RuntimeError("witness event not hit; is the odometer wide enough?")
