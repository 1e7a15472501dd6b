"""Eros similarity between multivariate time series.

Two samples are compared through the right eigenvector matrices of their
column covariance: Eros(A, B, w) = sum_i w_i * |<a_i, b_i>| with the weight
vector w on the simplex. Variable episode lengths drop out because only the
n x n covariance enters.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels


@dataclass
class ErosDecomposition:
    """Eigenvalues (descending, clamped at 0) and orthonormal eigenvectors
    of one sample's covariance matrix. Column i of eigenvectors pairs with
    eigenvalue i."""

    sample_id: str
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def n(self):
        return self.eigenvalues.shape[0]


def decompose(sample):
    """Covariance eigendecomposition with a deterministic sign/order rule.

    Columns are centered; C = Xc'Xc / max(m - 1, 1). Eigenpairs are sorted
    by eigenvalue descending (stable for ties) and each eigenvector's
    largest-magnitude entry is made positive, so positional pairing in the
    Eros sum is reproducible.
    """
    if sample.missing.any():
        raise ValueError(f"sample {sample.sample_id} not interpolated")
    x = np.asarray(sample.values, dtype=np.float64)
    if not np.isfinite(x).all():
        raise ValueError(f"sample {sample.sample_id} has non-finite values")
    m = x.shape[0]
    xc = x - x.mean(axis=0)
    cov = np.einsum("ij,ik->jk", xc, xc) / max(m - 1, 1)
    cov = 0.5 * (cov + cov.T)
    w, v = kernels.jacobi_eigh(cov)
    w = np.maximum(w, 0.0)
    order = np.argsort(-w, kind="stable")
    w = w[order]
    v = v[:, order]
    for i in range(v.shape[1]):
        col = v[:, i]
        peak = int(np.argmax(np.abs(col)))
        if col[peak] < 0:
            v[:, i] = -col
    return ErosDecomposition(sample_id=sample.sample_id, eigenvalues=w, eigenvectors=v)


def eros_weights(decomps):
    """Simplex weight vector: mean of per-sample normalized eigenvalue
    vectors, renormalized. An all-zero eigenvalue vector contributes the
    uniform distribution."""
    if not decomps:
        raise ValueError("no decompositions")
    n = decomps[0].n
    acc = np.zeros(n)
    for d in decomps:
        if d.n != n:
            raise ValueError(f"dimension mismatch: {d.n} != {n}")
        s = float(d.eigenvalues.sum())
        acc += d.eigenvalues / s if s > 0 else np.full(n, 1.0 / n)
    w = acc / len(decomps)
    return w / w.sum()


def eros(a, b, w):
    """Weighted sum of absolute inner products of paired eigenvectors,
    clamped to [0, 1] against float drift."""
    if a.n != b.n or w.shape[0] != a.n:
        raise ValueError(f"dimension mismatch: {a.n}, {b.n}, {w.shape[0]}")
    dots = np.abs(np.einsum("ki,ki->i", a.eigenvectors, b.eigenvectors))
    return float(min(1.0, max(0.0, float(np.dot(w, dots)))))


def eros_many(a, others, w):
    """eros(a, b, w) for each b in others, as one vectorized pass."""
    if not others:
        return np.zeros(0)
    stack = np.stack([b.eigenvectors for b in others])
    dots = np.abs(np.einsum("ki,bki->bi", a.eigenvectors, stack))
    return np.clip(dots @ w, 0.0, 1.0)
