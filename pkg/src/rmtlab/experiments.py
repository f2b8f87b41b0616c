"""Monte Carlo harness: tail probabilities of the smallest singular value and
the probabilistic steps behind the witness construction."""
from __future__ import annotations

import csv
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.stats import binomtest
from threadpoolctl import threadpool_limits

from .distributions import EntryDistribution, derive_seed, make_rng, parse_distribution
from .geometry import CompressParams, classify, Compressibility
from .lcd import LcdQuery, lcd_subspace2
from .linalg import generate_matrix, orthonormal_basis, singular_values
from .witness import witness_certificate

SCHEMA_VERSION = 1
DEFAULT_SEED = 20180917
N_CAP = 800


@dataclass
class ExperimentConfig:
    distributions: list = field(default_factory=lambda: ["gaussian"])
    sizes: list = field(default_factory=lambda: [50])
    trials: int = 30
    eps_grid: list = field(default_factory=lambda: [0.1, 0.2, 0.3])
    master_seed: int = DEFAULT_SEED
    compress: CompressParams = field(default_factory=lambda: CompressParams(0.1, 0.1))
    lcd: LcdQuery = field(default_factory=LcdQuery)
    workers: int = 1
    random_column: bool = False
    n_cap: int = N_CAP

    def validate(self) -> None:
        if self.trials < 1:
            raise ValueError("trials must be positive")
        if not self.distributions or not self.sizes:
            raise ValueError("need at least one distribution and one size")
        for eps in self.eps_grid:
            if not 0 < eps < 1:
                raise ValueError(f"epsilon {eps} outside (0, 1)")
        for n in self.sizes:
            if not 1 <= n <= self.n_cap:
                raise ValueError(f"n={n} outside [1, {self.n_cap}]")
        if self.workers < 1:
            raise ValueError("workers must be positive")
        for spec in self.distributions:
            parse_distribution(spec)

    def echo(self) -> dict:
        # worker count is deliberately left out: reports must not depend on it
        return {
            "distributions": [parse_distribution(d).spec for d in self.distributions],
            "sizes": list(self.sizes),
            "trials": self.trials,
            "eps_grid": list(self.eps_grid),
            "master_seed": self.master_seed,
            "random_column": self.random_column,
        }


@dataclass
class TrialRecord:
    dist: str
    n: int
    trial_index: int
    seed: int
    s_n: float
    witness_upper: float
    norm_x: float
    b2: float
    degenerate: bool
    runtime_ms: float


RECORD_COLUMNS = [f for f in TrialRecord.__dataclass_fields__]


def _run_one(task) -> TrialRecord:
    dist_index, spec, n, trial, master_seed, random_column = task
    seed = derive_seed(master_seed, dist_index, n, trial)
    dist = parse_distribution(spec)
    start = time.perf_counter()
    with threadpool_limits(1):
        a = generate_matrix(dist, n, n, seed)
        s = singular_values(a)
        column = int(make_rng(seed ^ 0xC0FFEE).integers(n)) if random_column else 0
        cert = witness_certificate(a, column=column)
    elapsed = (time.perf_counter() - start) * 1e3
    return TrialRecord(dist.spec, n, trial, seed, float(s[-1]), cert.upper_bound, cert.norm_x, cert.b2, cert.degenerate, elapsed)


def run_trials(cfg: ExperimentConfig) -> list[TrialRecord]:
    """All trials of ``cfg``, ordered by (distribution index, n, trial) for any worker count."""
    cfg.validate()
    tasks = [
        (di, spec, n, t, cfg.master_seed, cfg.random_column)
        for di, spec in enumerate(cfg.distributions)
        for n in cfg.sizes
        for t in range(cfg.trials)
    ]
    if cfg.workers == 1:
        records = [_run_one(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            records = list(pool.map(_run_one, tasks, chunksize=max(1, len(tasks) // (8 * cfg.workers))))
    order = {spec: i for i, spec in enumerate(parse_distribution(d).spec for d in cfg.distributions)}
    records.sort(key=lambda r: (order[r.dist], r.n, r.trial_index))
    return records


def wilson_interval(k: int, m: int, confidence: float = 0.95) -> tuple[float, float]:
    ci = binomtest(k, m).proportion_ci(confidence_level=confidence, method="wilson")
    return float(ci.low), float(ci.high)


@dataclass
class TailCell:
    dist: str
    n: int
    epsilon: float
    threshold: float
    trials: int
    exceedances: int
    p_hat: float
    wilson_low: float
    wilson_high: float
    ratio: float


@dataclass
class ExperimentReport:
    config: dict
    cells: list
    c_hat: float
    degenerate: dict
    median_scaled_sn: dict
    wall_time_s: float | None = None
    timestamp: str | None = None

    def to_dict(self, timestamp: bool = True) -> dict:
        d = {
            "schema_version": SCHEMA_VERSION,
            "config": self.config,
            "cells": [asdict(c) for c in self.cells],
            "c_hat": self.c_hat,
            "degenerate": self.degenerate,
            "median_scaled_sn": self.median_scaled_sn,
        }
        if timestamp:
            d["wall_time_s"] = self.wall_time_s
            d["timestamp"] = self.timestamp
        return d

    def to_json(self, timestamp: bool = True) -> str:
        return json.dumps(self.to_dict(timestamp), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentReport":
        return cls(
            config=d["config"],
            cells=[TailCell(**c) for c in d["cells"]],
            c_hat=d["c_hat"],
            degenerate=d["degenerate"],
            median_scaled_sn=d["median_scaled_sn"],
            wall_time_s=d.get("wall_time_s"),
            timestamp=d.get("timestamp"),
        )


def _key(dist: str, n: int) -> str:
    return f"{dist}@{n}"


def tail_table_and_fit(records, eps_grid, config: dict | None = None) -> ExperimentReport:
    """Exceedance frequencies of s_n > eps^-2 n^-1/2 per (dist, n, eps) and the fitted constant.

    C_hat is the smallest C with p_hat <= C (eps + 1/sqrt(n)) in every cell.
    Degenerate trials are excluded from the frequencies and counted separately.
    """
    if not list(eps_grid):
        raise ValueError("empty epsilon grid")
    groups: dict[tuple, list] = {}
    for r in records:
        groups.setdefault((r.dist, r.n), []).append(r)
    if not groups:
        raise ValueError("no trial records")
    cells, degenerate, medians = [], {}, {}
    for (dist, n), recs in groups.items():
        good = np.array([r.s_n for r in recs if not r.degenerate])
        degenerate[_key(dist, n)] = sum(r.degenerate for r in recs)
        if good.size == 0:
            raise ValueError(f"cell {dist}, n={n} has no usable trials")
        medians[_key(dist, n)] = float(np.median(good) * math.sqrt(n))
        for eps in eps_grid:
            thr = eps**-2 / math.sqrt(n)
            k = int(np.sum(good > thr))
            lo, hi = wilson_interval(k, good.size)
            p = k / good.size
            cells.append(TailCell(dist, n, float(eps), thr, int(good.size), k, p, lo, hi, p / (eps + 1 / math.sqrt(n))))
    c_hat = max(c.ratio for c in cells)
    return ExperimentReport(config or {}, cells, c_hat, degenerate, medians)


def tail_monotone_violations(report: ExperimentReport) -> list:
    """Pairs eps_i < eps_j in one (dist, n) where p_hat rises and the Wilson intervals do not overlap."""
    bad = []
    by = {}
    for c in report.cells:
        by.setdefault((c.dist, c.n), []).append(c)
    for cells in by.values():
        cells = sorted(cells, key=lambda c: c.epsilon)
        for i, a in enumerate(cells):
            for b in cells[i + 1:]:
                if b.p_hat > a.p_hat and b.wilson_low > a.wilson_high:
                    bad.append((a, b))
    return bad


def write_records_csv(records, path, timestamp: bool = True) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RECORD_COLUMNS)
        for r in records:
            row = asdict(r)
            if not timestamp:
                row["runtime_ms"] = 0.0
            w.writerow([repr(v) if isinstance(v, float) else str(v).lower() if isinstance(v, bool) else v for v in row.values()])


def report_to_csv(report: ExperimentReport) -> str:
    cols = list(TailCell.__dataclass_fields__)
    lines = [",".join(cols)]
    for c in report.cells:
        lines.append(",".join(repr(v) if isinstance(v, float) else str(v) for v in asdict(c).values()))
    return "\n".join(lines) + "\n"


# --- probabilistic steps of the witness argument -------------------------------------------


@dataclass
class ProbeResult:
    minimum: float
    quantiles: dict
    probes: int


def sample_compressible(n: int, p: CompressParams, count: int, rng: np.random.Generator) -> np.ndarray:
    """Rows are random compressible unit vectors.

    Each is a uniform unit vector on a uniform random support of size
    ceil(delta n), plus a perturbation drawn uniformly from the rho-ball,
    renormalized.
    """
    m = p.budget(n)
    out = np.zeros((count, n))
    for i in range(count):
        supp = rng.choice(n, size=m, replace=False)
        v = rng.standard_normal(m)
        out[i, supp] = v / np.linalg.norm(v)
    pert = rng.standard_normal((count, n))
    pert /= np.linalg.norm(pert, axis=1, keepdims=True)
    pert *= (p.rho * rng.random(count) ** (1.0 / n))[:, None]
    out += pert
    out /= np.linalg.norm(out, axis=1, keepdims=True)
    return out


def compressible_kernel_probe(dist: EntryDistribution, n: int, probes: int, p: CompressParams, seed: int, matrix=None) -> ProbeResult:
    """min |B x| / sqrt(n) over sampled compressible x, B an (n-2) x n matrix of i.i.d. entries.

    A sampled minimum only bounds the infimum over Comp from above.
    ``matrix`` replaces the random B (for injecting degenerate cases).
    """
    if n < 8:
        raise ValueError("probe needs n >= 8")
    rng = make_rng(seed)
    b = generate_matrix(dist, n - 2, n, derive_seed(seed, 1)) if matrix is None else np.asarray(matrix, dtype=np.float64)
    xs = sample_compressible(n, p, probes, rng)
    vals = np.linalg.norm(xs @ b.T, axis=1) / math.sqrt(n)
    qs = {f"{q:g}": float(np.quantile(vals, q)) for q in (0.0, 0.01, 0.05, 0.25, 0.5, 0.75, 0.95, 1.0)}
    return ProbeResult(float(vals.min()), qs, probes)


def kernel_complement(a: np.ndarray):
    """Orthonormal basis of H_{1,2}^perp, the complement of span(X_3..X_n)."""
    n = a.shape[0]
    full = orthonormal_basis(np.hstack([a[:, 2:], np.eye(n)]))
    h12 = n - 2
    if full.rank != n or np.abs(full.vectors[:, h12:].T @ a[:, 2:]).max() > 1e-8 * np.abs(a).max():
        raise ValueError("columns X_3..X_n are numerically dependent")
    comp = full.vectors[:, h12:h12 + 2]
    return type(full)(n, comp, requested=2)


@dataclass
class KernelCheck:
    incompressible_fraction: float
    lcd_value: float
    lcd_censored: bool


def kernel_incompressibility(dist: EntryDistribution, n: int, seed: int, p: CompressParams, q: LcdQuery, directions: int = 100, angular_points: int = 720) -> KernelCheck:
    a = generate_matrix(dist, n, n, seed)
    h = kernel_complement(a)
    thetas = np.arange(directions) * math.pi / directions
    incompressible = sum(
        classify(math.cos(t) * h.vectors[:, 0] + math.sin(t) * h.vectors[:, 1], p) is Compressibility.INCOMPRESSIBLE
        for t in thetas
    )
    res = lcd_subspace2(h, q, angular_points)
    return KernelCheck(incompressible / directions, res.value, res.censored)


def distinguished_distances(a: np.ndarray) -> tuple[float, float]:
    """(|x|, b_2) = (dist(X_1, H_1), dist(X_2, H_{1,2})).

    Householder QR of [X_3 .. X_n, X_2, X_1]: the last two diagonal entries
    of R are the distances of X_2 and X_1 to the span of the columns before them.
    """
    r = np.linalg.qr(np.hstack([a[:, 2:], a[:, 1:2], a[:, 0:1]]), mode="r")
    return abs(float(r[-1, -1])), abs(float(r[-2, -2]))


def markov_tails(dist: EntryDistribution, n: int, trials: int, levels, seed: int) -> dict:
    """Empirical P(|x| > tau) and P(b_2 > t) over ``trials`` matrices."""
    vals = np.array([distinguished_distances(generate_matrix(dist, n, n, derive_seed(seed, i))) for i in range(trials)])
    return {
        float(lv): (float(np.mean(vals[:, 0] > lv)), float(np.mean(vals[:, 1] > lv)))
        for lv in levels
    }


def scaled_top_singular_values(dist: EntryDistribution, n: int, seeds) -> np.ndarray:
    return np.array([singular_values(generate_matrix(dist, n, n, s))[0] / math.sqrt(n) for s in seeds])
