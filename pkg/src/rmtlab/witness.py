"""Witness-vector certificates for an upper bound on the smallest singular value.

Given a square matrix A with columns X_1..X_n, the witness is the component
of X_1 orthogonal to H_1 = span(X_2..X_n):

    x = X_1 - P_1 X_1,      s_n(A) <= |x| / |A^{-1} x|.

The rows of A^{-1}, projected onto H_1 (Y_k = P_1 X~_k), form a biorthogonal
system with X_2..X_n, and |A^{-1} x|^2 = 1 + sum_k (a_k / b_k)^2 with
a_k = |<Y_k/|Y_k|, X_1>| and b_k = 1/|Y_k| = dist(X_k, H_{1,k}).
``inv_norm`` is computed by a direct solve so that identity is a check,
not a definition.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .linalg import (
    SingularMatrixError,
    inverse_rows,
    lu_factor,
    orthonormal_basis,
    singular_values,
)

CHECK_TOL = 1e-6


def _fingerprint(a: np.ndarray) -> str:
    return hashlib.sha1(np.ascontiguousarray(a, dtype=np.float64).tobytes()).hexdigest()


@dataclass
class WitnessCertificate:
    n: int
    norm_x: float = math.nan
    a: np.ndarray = field(default_factory=lambda: np.empty(0))
    b: np.ndarray = field(default_factory=lambda: np.empty(0))
    inv_norm: float = math.nan
    proof_lower: float = math.nan
    upper_bound: float = math.nan
    degenerate: bool = False
    column: int = 0
    x: np.ndarray | None = field(default=None, repr=False)
    y: np.ndarray | None = field(default=None, repr=False)
    fingerprint: str = ""

    @property
    def b2(self) -> float:
        return float(self.b[0]) if self.b.size else math.nan


def _distinguish(a: np.ndarray, column: int) -> np.ndarray:
    if column == 0:
        return a
    order = [column] + [j for j in range(a.shape[1]) if j != column]
    return a[:, order]


def witness_certificate(a, column: int = 0) -> WitnessCertificate:
    """Run the witness construction with ``column`` (0-based) as the distinguished column.

    Numerically singular input yields a certificate with ``degenerate=True``
    and NaN fields; callers count these instead of resampling.
    """
    a = np.asarray(a, dtype=np.float64)
    n = a.shape[0]
    if a.ndim != 2 or a.shape[1] != n:
        raise ValueError("witness construction needs a square matrix")
    fp = _fingerprint(a)
    a = _distinguish(a, column)
    try:
        lu = lu_factor(a)
    except SingularMatrixError:
        return WitnessCertificate(n=n, degenerate=True, column=column, fingerprint=fp)

    x1 = a[:, 0]
    if n == 1:
        h1 = orthonormal_basis(np.empty((1, 0)))
    else:
        h1 = orthonormal_basis(a[:, 1:])
        if h1.rank_deficient:
            return WitnessCertificate(n=n, degenerate=True, column=column, fingerprint=fp)
    q = h1.vectors
    x = x1 - q @ (q.T @ x1)
    x -= q @ (q.T @ x)
    norm_x = float(np.linalg.norm(x))

    rows = inverse_rows(a, factor=lu)  # column k is X~_k
    y = q @ (q.T @ rows[:, 1:])
    ynorm = np.linalg.norm(y, axis=0)
    coef = np.abs(y.T @ x1) / np.where(ynorm > 0, ynorm, 1.0)
    b = 1.0 / ynorm

    w = scipy.linalg.lu_solve(lu, x)
    inv_norm = float(np.linalg.norm(w))
    proof_lower = math.sqrt(1.0 + float(np.sum((coef / b) ** 2)))
    return WitnessCertificate(
        n=n,
        norm_x=norm_x,
        a=coef,
        b=b,
        inv_norm=inv_norm,
        proof_lower=proof_lower,
        upper_bound=norm_x / inv_norm,
        column=column,
        x=x,
        y=y,
        fingerprint=fp,
    )


@dataclass
class CertificateReport:
    biorthogonality: float
    biorthogonality_scaled: float
    distance_identity: float
    equality_chain: float
    orthogonality: float
    s_n: float
    s_1: float
    upper_bound: float
    bound_holds: bool
    passed: bool

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def householder_distances(a: np.ndarray) -> np.ndarray:
    """dist(X_k, H_{1,k}) for k = 2..n via Householder QR, one factorization per k.

    Independent of the inverse-based route used by the certificate.
    """
    n = a.shape[1]
    out = np.empty(n - 1)
    for k in range(1, n):
        order = [j for j in range(1, n) if j != k] + [k]
        r = np.linalg.qr(a[:, order], mode="r")
        out[k - 1] = abs(r[-1, -1])
    return out


def verify_certificate(a, cert: WitnessCertificate, tol: float = CHECK_TOL) -> CertificateReport:
    """Cross-check a certificate against the matrix it was built from."""
    a = np.asarray(a, dtype=np.float64)
    if cert.degenerate:
        raise ValueError("cannot verify a degenerate certificate")
    if cert.n != a.shape[0] or cert.fingerprint != _fingerprint(a):
        raise ValueError("certificate was not produced from this matrix")
    a = _distinguish(a, cert.column)
    s = singular_values(a)
    s1, sn = float(s[0]), float(s[-1])
    n = cert.n

    if n > 1:
        gram = a[:, 1:].T @ cert.y
        biorth = float(np.max(np.abs(gram - np.eye(n - 1))))
        dist = householder_distances(a)
        ynorm = np.linalg.norm(cert.y, axis=0)
        dist_identity = float(np.max(np.abs(dist * ynorm - 1.0)))
        # A^{-1} P_1 X_1 = e_1 - A^{-1} x has no e_1 component
        w = np.linalg.solve(a, a[:, 0] - cert.x)
        ortho = abs(float(w[0])) / max(1.0, float(np.linalg.norm(w)))
    else:
        biorth = dist_identity = ortho = 0.0
    chain = abs(cert.inv_norm - cert.proof_lower) / cert.inv_norm
    bound_holds = sn <= cert.upper_bound + 1e-8 * s1
    scaled = biorth / s1 if s1 > 0 else biorth
    passed = bound_holds and scaled <= tol and dist_identity <= tol and chain <= tol and ortho <= tol
    return CertificateReport(biorth, scaled, dist_identity, chain, ortho, sn, s1, cert.upper_bound, bool(bound_holds), bool(passed))


def certificate_json(cert: WitnessCertificate, report: CertificateReport | None = None) -> str:
    def num(v):
        return None if v is None or (isinstance(v, float) and math.isnan(v)) else v

    payload = {
        "schema_version": 1,
        "n": cert.n,
        "norm_x": num(cert.norm_x),
        "inv_norm": num(cert.inv_norm),
        "proof_lower": num(cert.proof_lower),
        "upper_bound": num(cert.upper_bound),
        "residuals": {} if report is None else {
            "biorthogonality": report.biorthogonality,
            "biorthogonality_scaled": report.biorthogonality_scaled,
            "distance_identity": report.distance_identity,
            "equality_chain": report.equality_chain,
            "orthogonality": report.orthogonality,
            "s_n": report.s_n,
            "s_1": report.s_1,
            "bound_holds": report.bound_holds,
            "passed": report.passed,
        },
        "degenerate": cert.degenerate,
    }
    return json.dumps(payload, indent=2, sort_keys=True)
