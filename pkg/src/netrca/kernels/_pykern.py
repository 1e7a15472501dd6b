"""Pure-numpy implementations of the numerical kernels.

Semantics must match ``_cykern`` exactly; keep the two files in sync.
"""

import numpy as np

JACOBI_TOL = 1e-12
JACOBI_MAX_SWEEPS = 60


def jacobi_eigh(a):
    """Symmetric eigendecomposition by cyclic Jacobi rotations.

    Sweeps row pairs (p, q), p < q, zeroing A[p, q] with a Givens rotation
    until the off-diagonal Frobenius norm drops below JACOBI_TOL (with a
    relative floor for large-scale matrices) or stops improving.

    Returns (eigenvalues, eigenvectors); column k of the eigenvector matrix
    pairs with eigenvalue k. No ordering or sign convention is applied here.
    """
    A = np.array(a, dtype=np.float64, copy=True)
    n = A.shape[0]
    if A.shape != (n, n):
        raise ValueError("matrix must be square")
    V = np.eye(n)
    if n == 1:
        return np.diagonal(A).copy(), V

    fro = float(np.sqrt(np.sum(A * A)))
    floor = max(JACOBI_TOL, 1e-15 * fro)
    prev_off = np.inf
    od = np.empty_like(A)
    for _ in range(JACOBI_MAX_SWEEPS):
        # sum the off-diagonal squares directly: subtracting the diagonal
        # mass from the total cancels catastrophically once the residual
        # is small, stalling convergence around sqrt(eps) * fro
        np.copyto(od, A)
        np.fill_diagonal(od, 0.0)
        off = float(np.sqrt(np.sum(od * od)))
        if off < floor or off >= prev_off:
            break
        prev_off = off
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if apq == 0.0:
                    continue
                app = A[p, p]
                aqq = A[q, q]
                theta = 0.5 * (aqq - app) / apq
                sgn = 1.0 if theta >= 0.0 else -1.0
                t = sgn / (abs(theta) + np.sqrt(theta * theta + 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                A[p, p] = app - t * apq
                A[q, q] = aqq + t * apq
                A[p, q] = 0.0
                A[q, p] = 0.0
                mask = np.ones(n, dtype=bool)
                mask[p] = False
                mask[q] = False
                akp = A[mask, p].copy()
                akq = A[mask, q].copy()
                newp = c * akp - s * akq
                newq = s * akp + c * akq
                A[mask, p] = newp
                A[p, mask] = newp
                A[mask, q] = newq
                A[q, mask] = newq
                vkp = V[:, p].copy()
                vkq = V[:, q].copy()
                V[:, p] = c * vkp - s * vkq
                V[:, q] = s * vkp + c * vkq
    return np.diagonal(A).copy(), V


def best_split(x, order, in_node, grad, hess, reg_lambda, min_child_weight):
    """Exact greedy split search over all features of one tree node.

    x:        (n_rows, n_feats) float64 feature matrix
    order:    (n_rows, n_feats) int64, order[:, j] sorts column j ascending
    in_node:  (n_rows,) uint8 row-membership mask for the node
    grad, hess: (n_rows,) float64 per-row gradient / hessian

    Candidates are the midpoints between consecutive distinct values of a
    feature within the node. A candidate is valid when both children carry at
    least min_child_weight hessian mass. Gain ties keep the earliest feature
    column and, within a feature, the lowest threshold.

    Returns (feat_idx, threshold, gain); feat_idx is -1 when no candidate has
    strictly positive gain.
    """
    n_feats = x.shape[1]
    best_feat = -1
    best_thr = 0.0
    best_gain = 0.0
    member = in_node != 0
    for j in range(n_feats):
        ordj = order[:, j]
        rows = ordj[member[ordj]]
        k = rows.size
        if k < 2:
            continue
        vals = x[rows, j]
        cg = np.cumsum(grad[rows])
        ch = np.cumsum(hess[rows])
        g_total = cg[-1]
        h_total = ch[-1]
        boundary = vals[1:] > vals[:-1]
        if not boundary.any():
            continue
        gl = cg[:-1][boundary]
        hl = ch[:-1][boundary]
        gr = g_total - gl
        hr = h_total - hl
        gain = 0.5 * (
            gl * gl / (hl + reg_lambda)
            + gr * gr / (hr + reg_lambda)
            - g_total * g_total / (h_total + reg_lambda)
        )
        gain[(hl < min_child_weight) | (hr < min_child_weight)] = -np.inf
        i = int(np.argmax(gain))
        if gain[i] > best_gain:
            lo = vals[:-1][boundary][i]
            hi = vals[1:][boundary][i]
            thr = 0.5 * (lo + hi)
            if thr >= hi:
                thr = lo
            best_feat = j
            best_thr = float(thr)
            best_gain = float(gain[i])
    return best_feat, best_thr, best_gain
