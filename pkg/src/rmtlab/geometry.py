"""Compressible vectors, nets on sparse spheres and pseudometric coverage checks."""
from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass

import numpy as np

from .distributions import make_rng

NET_CAP = 10**7


class Compressibility(str, enum.Enum):
    COMPRESSIBLE = "compressible"
    INCOMPRESSIBLE = "incompressible"


class NetTooLarge(ValueError):
    pass


@dataclass(frozen=True)
class CompressParams:
    delta: float
    rho: float

    def __post_init__(self):
        if not (0 < self.delta <= 1 and 0 < self.rho <= 1):
            raise ValueError(f"delta and rho must lie in (0, 1], got {self.delta}, {self.rho}")

    def budget(self, n: int) -> int:
        """Sparsity budget m = ceil(delta * n).

        The strict |supp x| < delta*n of the definition is folded into this
        budget; comparisons against rho are then closed (<=).
        """
        return max(1, math.ceil(self.delta * n - 1e-9))


def sparse_distance(x, m: int) -> float:
    """Distance from ``x`` to the m-sparse vectors: norm of x without its m largest entries."""
    x = np.asarray(x, dtype=np.float64)
    if not 1 <= m <= x.size:
        raise ValueError(f"sparsity {m} out of range for dimension {x.size}")
    order = np.argsort(-np.abs(x), kind="stable")
    return float(np.linalg.norm(x[order[m:]]))


def classify(x, p: CompressParams) -> Compressibility:
    x = np.asarray(x, dtype=np.float64)
    if abs(np.linalg.norm(x) - 1.0) > 1e-8:
        raise ValueError("classification is defined on the unit sphere")
    if sparse_distance(x, p.budget(x.size)) <= p.rho:
        return Compressibility.COMPRESSIBLE
    return Compressibility.INCOMPRESSIBLE


def volumetric_bound(n: int, delta: float, rho: float) -> float:
    """Volumetric cardinality bound (e/delta)^(delta n) (5/rho)^(delta n)."""
    return (math.e / delta) ** (delta * n) * (5.0 / rho) ** (delta * n)


@dataclass
class SphereNet:
    """Net on the unit vectors supported on some coordinate subsets.

    Point i*P + j is the local sphere point ``local[j]`` placed on the
    coordinates ``supports[i]``.  A net given by explicit points is stored
    as a single support covering every coordinate.
    """

    ambient_dim: int
    supports: np.ndarray  # (K, m) coordinate indices
    local: np.ndarray  # (P, m) unit vectors
    radius: float
    delta: float = math.nan
    rho: float = math.nan
    seed: int = 0

    def __len__(self) -> int:
        return len(self.supports) * len(self.local)

    @classmethod
    def from_points(cls, points, radius: float = 0.0) -> "SphereNet":
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        n = pts.shape[1]
        return cls(n, np.arange(n)[None, :], pts, radius)

    def dense(self) -> np.ndarray:
        out = np.zeros((len(self), self.ambient_dim))
        p = len(self.local)
        for i, supp in enumerate(self.supports):
            out[i * p:(i + 1) * p][:, supp] = self.local
        return out

    def iter_rows(self):
        row = np.zeros(self.ambient_dim)
        for supp in self.supports:
            for v in self.local:
                row[:] = 0.0
                row[supp] = v
                yield row


def _greedy_sphere_net(m: int, sep: float, rng: np.random.Generator, patience: int = 20000) -> np.ndarray:
    """Greedy sep-separated set on S^{m-1}; stops after ``patience`` straight rejections."""
    if m == 1:
        return np.array([[1.0], [-1.0]])
    pts = np.empty((0, m))
    misses = 0
    while misses < patience:
        batch = rng.standard_normal((512, m))
        batch /= np.linalg.norm(batch, axis=1, keepdims=True)
        for c in batch:
            if len(pts) and np.min(np.sum((pts - c) ** 2, axis=1)) <= sep * sep:
                misses += 1
                if misses >= patience:
                    break
                continue
            pts = np.vstack([pts, c])
            misses = 0
    return pts


def build_sparse_net(n: int, p: CompressParams, seed: int, cap: float = NET_CAP) -> SphereNet:
    """rho-net of the ceil(delta n)-sparse unit vectors (a 2rho-net of the compressible ones).

    Points inside each coordinate subspace are greedily rho-separated.  A
    maximal rho-separated set is a rho-net, and disjoint rho/2 caps bound
    its size by (1 + 2/rho)^m <= (3/rho)^m.
    """
    bound = volumetric_bound(n, p.delta, p.rho)
    if bound > cap:
        raise NetTooLarge(f"net bound {bound:.3g} exceeds cap {cap:.3g}")
    m = p.budget(n)
    local = _greedy_sphere_net(m, p.rho, make_rng(seed))
    supports = np.array(list(itertools.combinations(range(n), m)), dtype=np.intp)
    return SphereNet(n, supports, local, p.rho, p.delta, p.rho, seed)


def random_sparse_unit(n: int, m: int, rng: np.random.Generator):
    """Random support of size m and a uniform unit vector on it."""
    supp = np.sort(rng.choice(n, size=m, replace=False))
    v = rng.standard_normal(m)
    v /= np.linalg.norm(v)
    return supp, v


def check_pseudometric_net(net: SphereNet, m_mat, probes: int, target_radius: float, seed: int, points=None) -> float:
    """Fraction of probe points x with min_y |M(x - y)| <= target_radius over net points y.

    Probes are random unit vectors on random supports of the net's sparsity,
    or the rows of ``points`` when given.  The same-support part of the net
    is tried first; the full net is scanned only when that fails.
    """
    mm = np.asarray(m_mat, dtype=np.float64)
    if mm.ndim != 2 or mm.shape[1] != net.ambient_dim:
        raise ValueError("matrix columns must match the net dimension")
    if len(net) == 0:
        raise ValueError("empty net")
    n = net.ambient_dim
    k = net.supports.shape[1]
    rng = make_rng(seed)
    if points is not None:
        probe_list = [np.asarray(p, dtype=np.float64) for p in np.atleast_2d(points)]
    else:
        probe_list = []
        for _ in range(probes):
            supp, v = random_sparse_unit(n, k, rng)
            x = np.zeros(n)
            x[supp] = v
            probe_list.append(x)

    index = {tuple(s): i for i, s in enumerate(net.supports)}
    full_images = None
    hits = 0
    r2 = target_radius * target_radius
    for x in probe_list:
        mx = mm @ x
        # round-off slack so a probe lying on the net counts at radius 0
        r2x = r2 + 1e-20 * float(mx @ mx)
        i = index.get(tuple(np.flatnonzero(x)))
        if i is not None:
            imgs = mm[:, net.supports[i]] @ net.local.T
            if np.min(np.sum((mx[:, None] - imgs) ** 2, axis=0)) <= r2x:
                hits += 1
                continue
        if full_images is None:
            full_images = np.concatenate([mm[:, s] @ net.local.T for s in net.supports], axis=1)
        if np.min(np.sum((mx[:, None] - full_images) ** 2, axis=0)) <= r2x:
            hits += 1
    return hits / len(probe_list)


def net_coverage(net: SphereNet, probes: int, seed: int) -> float:
    """Fraction of random sparse unit probes within Euclidean ``net.radius`` of the net."""
    return check_pseudometric_net(net, np.eye(net.ambient_dim), probes, net.radius, seed)


def write_net_csv(net: SphereNet, path) -> None:
    with open(path, "w") as fh:
        fh.write(f"# n={net.ambient_dim},delta={net.delta:g},rho={net.rho:g},radius={net.radius:g},seed={net.seed}\n")
        for row in net.iter_rows():
            fh.write(",".join(repr(float(v)) for v in row) + "\n")
