"""Normalized entry laws, seeded sampling and Levy concentration estimates.

Every law built here has mean 0 and variance exactly 1.  Heavy-tailed
members (symmetric Pareto with shape <= 4, Student-t with dof <= 4) have
an infinite fourth moment.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

KINDS = ("gaussian", "rademacher", "pareto_symmetric", "student_t", "uniform")

_ALIASES = {
    "gaussian": "gaussian",
    "normal": "gaussian",
    "rademacher": "rademacher",
    "pareto": "pareto_symmetric",
    "pareto_symmetric": "pareto_symmetric",
    "student": "student_t",
    "student_t": "student_t",
    "t": "student_t",
    "uniform": "uniform",
}


class InvalidParameter(ValueError):
    """Raised when a law would not have a finite variance."""


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based generator keyed by a 64-bit seed."""
    return np.random.Generator(np.random.Philox(int(seed) & 0xFFFFFFFFFFFFFFFF))


def derive_seed(master_seed: int, *stream: int) -> int:
    """64-bit seed for the stream ``stream`` under ``master_seed``.

    The mapping is a pure function of its arguments, so per-trial seeds do
    not depend on the order in which workers pick trials up.
    """
    ss = np.random.SeedSequence(int(master_seed) & 0xFFFFFFFFFFFFFFFF, spawn_key=tuple(int(s) for s in stream))
    return int(ss.generate_state(1, np.uint64)[0])


@dataclass(frozen=True)
class EntryDistribution:
    kind: str
    parameter: float | None = None
    scale: float = 1.0
    location: float = 0.0

    @property
    def spec(self) -> str:
        short = {"pareto_symmetric": "pareto", "student_t": "student"}.get(self.kind, self.kind)
        if self.parameter is None:
            return short
        return f"{short}:{self.parameter:g}"

    @property
    def mean(self) -> float:
        return 0.0

    @property
    def variance(self) -> float:
        if self.kind == "pareto_symmetric":
            b = self.parameter
            return b * self.scale**2 / (b - 2)
        if self.kind == "student_t":
            nu = self.parameter
            return self.scale**2 * nu / (nu - 2)
        if self.kind == "uniform":
            return self.scale**2 / 3.0
        return self.scale**2

    @property
    def finite_fourth_moment(self) -> bool:
        if self.kind in ("pareto_symmetric", "student_t"):
            return self.parameter > 4
        return True

    def sample(self, count: int, seed: int) -> np.ndarray:
        return sample(self, count, seed)

    def draw(self, rng: np.random.Generator, size) -> np.ndarray:
        """Draw an array of shape ``size`` from an existing generator."""
        if self.kind == "gaussian":
            return rng.standard_normal(size)
        if self.kind == "rademacher":
            return rng.integers(0, 2, size=size).astype(np.float64) * 2.0 - 1.0
        if self.kind == "uniform":
            return rng.uniform(-self.scale, self.scale, size=size)
        if self.kind == "student_t":
            return self.scale * rng.standard_t(self.parameter, size=size)
        if self.kind == "pareto_symmetric":
            # 1 - U lies in (0, 1], so the power is finite
            u = 1.0 - rng.random(size)
            sign = rng.integers(0, 2, size=size) * 2.0 - 1.0
            return sign * self.scale * u ** (-1.0 / self.parameter)
        raise InvalidParameter(f"unknown kind {self.kind!r}")


def make_distribution(kind: str, parameter: float | None = None) -> EntryDistribution:
    """Build a mean-zero unit-variance law.

    For ``pareto_symmetric`` the returned ``scale`` is the threshold
    x_m = sqrt((beta - 2) / beta); for ``student_t`` it is
    sqrt((nu - 2) / nu); for ``uniform`` it is the half-width sqrt(3).
    """
    kind = _ALIASES.get(kind, kind)
    if kind not in KINDS:
        raise InvalidParameter(f"unknown distribution kind {kind!r}")
    if kind == "pareto_symmetric":
        if parameter is None or not parameter > 2:
            raise InvalidParameter(f"pareto shape must exceed 2, got {parameter}")
        return EntryDistribution(kind, float(parameter), math.sqrt((parameter - 2.0) / parameter))
    if kind == "student_t":
        if parameter is None or not parameter > 2:
            raise InvalidParameter(f"student-t dof must exceed 2, got {parameter}")
        return EntryDistribution(kind, float(parameter), math.sqrt((parameter - 2.0) / parameter))
    if kind == "uniform":
        return EntryDistribution(kind, None, math.sqrt(3.0))
    return EntryDistribution(kind, None, 1.0)


def parse_distribution(text: str) -> EntryDistribution:
    """Parse ``kind`` or ``kind:parameter`` (``pareto:2.5``, ``student:3``)."""
    text = text.strip()
    if ":" in text:
        kind, _, param = text.partition(":")
        try:
            value = float(param)
        except ValueError:
            raise InvalidParameter(f"bad parameter in {text!r}") from None
        return make_distribution(kind.strip().lower(), value)
    return make_distribution(text.lower())


def sample(dist: EntryDistribution, count: int, seed: int) -> np.ndarray:
    if count < 1:
        raise ValueError("count must be positive")
    return dist.draw(make_rng(seed), count)


@dataclass(frozen=True)
class ConcentrationEstimate:
    epsilon: float
    value: float
    sample_count: int


def concentration_estimate(samples, epsilon: float) -> ConcentrationEstimate:
    """Empirical Levy concentration sup_lambda P(|X - lambda| <= epsilon).

    The supremum over centers is attained by a closed window of width
    2*epsilon whose left end sits on a sample, so a sweep over the sorted
    samples gives it exactly.
    """
    xs = np.sort(np.asarray(samples, dtype=np.float64).ravel())
    if xs.size == 0:
        raise ValueError("concentration estimate needs at least one sample")
    if epsilon < 0:
        raise ValueError("epsilon must be non-negative")
    right = np.searchsorted(xs, xs + 2.0 * epsilon, side="right")
    best = int(np.max(right - np.arange(xs.size)))
    return ConcentrationEstimate(float(epsilon), best / xs.size, int(xs.size))


def concentration_profile(dist: EntryDistribution, epsilons, count: int = 100_000, seed: int = 0):
    """Measured (v, u) pairs: u = L(xi, v) for each v in ``epsilons``."""
    xs = np.sort(sample(dist, count, seed))
    return [(float(v), concentration_estimate(xs, v).value) for v in epsilons]
