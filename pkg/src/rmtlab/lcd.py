"""Essential least common denominator of vectors and of 2-dimensional subspaces.

    LCD_{alpha,r}(x) = inf{ t > 0 : dist(t x, Z^n) < min(r |t x|, alpha) }

Both search modes walk the same grid t_j = j * step and refine the first
qualifying grid point by bisection.  ``oracle`` evaluates every grid point;
``fast`` skips stretches of the grid on which g(t) = dist(t x, Z^n), being
|x|-Lipschitz, cannot reach the threshold.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .linalg import OrthonormalBasis

AUTO_ALPHA_FACTOR = 0.1
REFINE_TOL = 1e-8
CERT_SLACK = 1e-6
_CHUNK_ELEMENTS = 1 << 21


def auto_alpha(n: int) -> float:
    return AUTO_ALPHA_FACTOR * math.sqrt(n)


@dataclass(frozen=True)
class LcdQuery:
    alpha: float | str = "auto"
    r: float = 0.1
    t_max: float = 10.0
    step: float | None = None

    def __post_init__(self):
        if not 0 < self.r < 1:
            raise ValueError("r must lie in (0, 1)")
        if self.t_max <= 0:
            raise ValueError("t_max must be positive")
        if self.alpha != "auto" and not float(self.alpha) > 0:
            raise ValueError("alpha must be positive or 'auto'")
        if self.step is not None and not 0 < self.step <= self.t_max:
            raise ValueError("step must lie in (0, t_max]")

    def resolve_alpha(self, n: int) -> float:
        return auto_alpha(n) if self.alpha == "auto" else float(self.alpha)

    def resolve_step(self, norm: float) -> float:
        if self.step is not None:
            return float(self.step)
        return 1e-4 * max(1.0, self.t_max) / norm


@dataclass(frozen=True)
class LcdResult:
    value: float
    censored: bool
    witness_t: float | None
    achieved_dist: float
    certified: bool
    t_max: float

    def csv_line(self) -> str:
        wt = "" if self.witness_t is None else repr(self.witness_t)
        return f"{self.value!r},{wt},{self.achieved_dist!r},{str(self.certified).lower()}"

    def to_json(self) -> str:
        return json.dumps(
            {
                "schema_version": 1,
                "value": self.value,
                "censored": self.censored,
                "witness_t": self.witness_t,
                "achieved_dist": self.achieved_dist,
                "certified": self.certified,
                "t_max": self.t_max,
            },
            sort_keys=True,
        )


def torus_distance(x, t: float) -> float:
    """dist(t x, Z^n), rounding half to even."""
    tx = t * np.asarray(x, dtype=np.float64)
    return float(np.linalg.norm(tx - np.rint(tx)))


def _gap(x: np.ndarray, norm: float, t: float, r: float, alpha: float) -> float:
    """g(t) - min(r t |x|, alpha); the defining inequality holds iff this is negative."""
    return torus_distance(x, t) - min(r * t * norm, alpha)


def _bisect(x, norm, lo, hi, r, alpha, tol=REFINE_TOL):
    # invariant: inequality fails at lo and holds at hi
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if _gap(x, norm, mid, r, alpha) < 0:
            hi = mid
        else:
            lo = mid
    return hi


def _first_hit_oracle(x, norm, step, count, r, alpha):
    chunk = max(1, _CHUNK_ELEMENTS // x.size)
    for start in range(1, count + 1, chunk):
        j = np.arange(start, min(count, start + chunk - 1) + 1, dtype=np.float64)
        tx = (j * step)[:, None] * x[None, :]
        g = np.linalg.norm(tx - np.rint(tx), axis=1)
        h = np.minimum(r * j * step * norm, alpha)
        hit = np.flatnonzero(g < h)
        if hit.size:
            return int(j[hit[0]])
    return None


def _excluded(x, norm, a, b, ga, gb, r, alpha, tol=REFINE_TOL) -> bool:
    """True when the gap provably stays non-negative on [a, b].

    Uses the two-sided Lipschitz bound gap(t) >= (ga + gb - slope (b - a)) / 2
    and bisects intervals it cannot settle, down to ``tol``.
    """
    slope = (1.0 + r) * norm
    stack = [(a, b, ga, gb)]
    while stack:
        a, b, ga, gb = stack.pop()
        if ga + gb - slope * (b - a) > 0:
            continue
        if b - a < tol:
            return False
        mid = 0.5 * (a + b)
        gm = _gap(x, norm, mid, r, alpha)
        if gm < 0:
            return False
        stack.append((mid, b, gm, gb))
        stack.append((a, mid, ga, gm))
    return True


def _first_hit_fast(x, norm, step, count, r, alpha):
    # below 1/(2 |x|_inf) every coordinate rounds to 0 and g = t|x| > r t|x|
    safe = 0.5 / float(np.max(np.abs(x)))
    j = max(1, int(math.floor(safe / step)))
    certified = safe >= j * step
    slope = (1.0 + r) * norm
    gap = _gap(x, norm, j * step, r, alpha)
    while True:
        if gap < 0:
            return j, certified
        if j >= count:
            return None, certified
        # whole intervals [t_j, t_j + k step] on which the gap stays positive
        k = int(math.floor(gap * (1.0 - 1e-9) / (slope * step)))
        if k >= 1:
            j = min(j + k, count)
            gap = _gap(x, norm, j * step, r, alpha)
            continue
        nxt = _gap(x, norm, (j + 1) * step, r, alpha)
        if nxt >= 0 and certified:
            certified = _excluded(x, norm, j * step, (j + 1) * step, gap, nxt, r, alpha)
        j, gap = j + 1, nxt


def lcd_vector(x, q: LcdQuery, mode: str = "fast") -> LcdResult:
    """LCD_{alpha,r}(x) searched on (0, t_max]; censored at t_max when nothing qualifies.

    ``certified`` (fast mode only) means every grid interval before the hit
    was excluded by the Lipschitz bound, so no crossing earlier than
    ``value - CERT_SLACK`` exists between grid points either.
    """
    x = np.asarray(x, dtype=np.float64).ravel()
    norm = float(np.linalg.norm(x))
    if norm == 0.0:
        raise ValueError("LCD of the zero vector is undefined")
    alpha = q.resolve_alpha(x.size)
    step = q.resolve_step(norm)
    count = int(math.floor(q.t_max / step * (1 + 1e-12)))
    if mode == "oracle":
        j, certified = _first_hit_oracle(x, norm, step, count, q.r, alpha), False
    elif mode == "fast":
        j, certified = _first_hit_fast(x, norm, step, count, q.r, alpha)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    if j is None:
        return LcdResult(float(q.t_max), True, None, torus_distance(x, q.t_max), certified, float(q.t_max))
    lo = (j - 1) * step
    t = _bisect(x, norm, lo, j * step, q.r, alpha)
    if certified and lo > 0:
        # no earlier crossing inside the bracketing interval either, up to CERT_SLACK
        end = t - CERT_SLACK
        if end > lo:
            certified = _excluded(x, norm, lo, end, _gap(x, norm, lo, q.r, alpha), _gap(x, norm, end, q.r, alpha), q.r, alpha, tol=1e-12)
    return LcdResult(t, False, t, torus_distance(x, t), certified, float(q.t_max))


def _direction(basis: np.ndarray, theta: float) -> np.ndarray:
    return math.cos(theta) * basis[:, 0] + math.sin(theta) * basis[:, 1]


def lcd_subspace2(h: OrthonormalBasis, q: LcdQuery, angular_points: int = 720, mode: str = "fast") -> LcdResult:
    """Upper estimate of LCD_{alpha,r}(H) for a 2-dimensional subspace H.

    Unit vectors cos(theta) h1 + sin(theta) h2 are probed on a grid over
    [0, pi) (x and -x share their LCD), then golden-section search refines
    around the best grid angle.  Never certified.
    """
    if h.rank != 2:
        raise ValueError(f"subspace LCD needs a 2-dimensional basis, got {h.rank}")
    if angular_points < 1:
        raise ValueError("angular_points must be positive")
    basis = h.vectors
    if q.alpha == "auto":
        q = LcdQuery(auto_alpha(h.ambient_dim), q.r, q.t_max, q.step)

    def probe(theta):
        return lcd_vector(_direction(basis, theta), q, mode)

    width = math.pi / angular_points
    results = [probe(i * width) for i in range(angular_points)]
    best_i = min(range(angular_points), key=lambda i: (results[i].value, i))
    best = results[best_i]
    if angular_points > 1:
        invphi = (math.sqrt(5) - 1) / 2
        a, b = (best_i - 1) * width, (best_i + 1) * width
        c, d = b - invphi * (b - a), a + invphi * (b - a)
        rc, rd = probe(c), probe(d)
        for _ in range(40):
            if rc.value <= rd.value:
                b, d, rd = d, c, rc
                c = b - invphi * (b - a)
                rc = probe(c)
            else:
                a, c, rc = c, d, rd
                d = a + invphi * (b - a)
                rd = probe(d)
            for cand in (rc, rd):
                if cand.value < best.value:
                    best = cand
            if b - a < 1e-9:
                break
    return LcdResult(best.value, best.censored, best.witness_t, best.achieved_dist, False, best.t_max)
