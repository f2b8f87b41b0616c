"""Small-ball probability bound for random sums and its empirical comparison."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .distributions import EntryDistribution, concentration_estimate, make_rng, sample
from .lcd import LcdQuery, lcd_vector

_ROW_CHUNK = 50_000


@dataclass(frozen=True)
class SmallBallBoundInput:
    epsilon: float
    lcd_value: float  # math.inf for a censored search
    r: float
    u: float
    alpha: float
    C: float = 1.0


def theorem_bound(inp: SmallBallBoundInput) -> float:
    """C/(r sqrt(1-u)) (eps + 1/LCD) + C exp(-2 alpha^2 (1-u)), unclamped.

    With u >= 1 the hypothesis L(xi, 1) <= u < 1 fails and the bound is +inf.
    """
    if inp.u >= 1.0:
        return math.inf
    inv_lcd = 0.0 if math.isinf(inp.lcd_value) else 1.0 / inp.lcd_value
    lead = inp.C / (inp.r * math.sqrt(1.0 - inp.u)) * (inp.epsilon + inv_lcd)
    return lead + inp.C * math.exp(-2.0 * inp.alpha**2 * (1.0 - inp.u))


def clamp_probability(p: float) -> float:
    return min(1.0, max(0.0, p))


def random_sums(x, dist: EntryDistribution, sample_count: int, seed: int) -> np.ndarray:
    """sample_count i.i.d. draws of <x, xi> with xi having i.i.d. entries from ``dist``.

    ``x`` may be an (n, k) array of k vectors; they then share the same xi
    draws and the result has shape (sample_count, k).
    """
    x = np.asarray(x, dtype=np.float64)
    rng = make_rng(seed)
    out = np.empty((sample_count,) + x.shape[1:])
    for start in range(0, sample_count, _ROW_CHUNK):
        stop = min(sample_count, start + _ROW_CHUNK)
        out[start:stop] = dist.draw(rng, (stop - start, x.shape[0])) @ x
    return out


def measured_u(dist: EntryDistribution, count: int = 200_000, seed: int = 0) -> float:
    """u = L(xi, 1) estimated from samples of the entry law."""
    return concentration_estimate(sample(dist, count, seed), 1.0).value


@dataclass(frozen=True)
class ComparisonRow:
    epsilon: float
    empirical: float
    lcd: float
    bound_raw: float
    bound_clamped: float
    passed: bool


def smallball_compare(x, dist: EntryDistribution, epsilons, q: LcdQuery, sample_count: int, seed: int, C: float = 1.0):
    """Empirical L(<x, xi>, eps) next to the small-ball bound for each eps.

    A censored LCD search enters the bound as LCD = t_max, the largest value
    actually certified by the search.
    """
    x = np.asarray(x, dtype=np.float64)
    if abs(np.linalg.norm(x) - 1.0) > 1e-8:
        raise ValueError("x must be a unit vector")
    if sample_count < 10_000:
        raise ValueError("sample_count must be at least 1e4")
    lcd = lcd_vector(x, q)
    alpha = q.resolve_alpha(x.size)
    u = measured_u(dist, seed=seed ^ 0x5A5A)
    sums = np.sort(random_sums(x, dist, sample_count, seed))
    rows = []
    for eps in epsilons:
        emp = concentration_estimate(sums, eps).value
        raw = theorem_bound(SmallBallBoundInput(eps, lcd.value, q.r, u, alpha, C))
        clamped = clamp_probability(raw)
        rows.append(ComparisonRow(float(eps), emp, lcd.value, raw, clamped, emp <= clamped))
    return rows


def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["epsilon", "empirical", "lcd", "bound_raw", "bound_clamped", "pass"])
    for r in rows:
        w.writerow([repr(r.epsilon), repr(r.empirical), repr(r.lcd), repr(r.bound_raw), repr(r.bound_clamped), str(r.passed).lower()])
    return buf.getvalue()
