"""Deterministic principal-component extraction via power iteration.

Leading eigenpairs of a symmetric covariance matrix are found one at a
time with deflation; every iterate is re-orthogonalized against the
components already found, so the returned basis is orthonormal to machine
precision. Start vectors come from a fixed internal seed, making results a
pure function of the input matrix.
"""

import numpy as np

_START_SEED = 0x9E3779B9
_MAX_ITER = 1000
_TOL = 1e-10


def top_components(cov: np.ndarray, k: int):
    """Leading k (eigenvalue, unit eigenvector) pairs of a symmetric matrix.

    Eigenvalues come back in descending order. Each vector's
    largest-magnitude coordinate is made positive (first such coordinate on
    ties) so signs are reproducible.
    """
    cov = np.asarray(cov, dtype=np.float64)
    d = cov.shape[0]
    if cov.shape != (d, d):
        raise ValueError(f"covariance must be square, got {cov.shape}")
    k = min(k, d)

    rng = np.random.default_rng(_START_SEED)
    work = cov.copy()
    values = []
    vectors = []
    for _ in range(k):
        v = rng.standard_normal(d)
        for u in vectors:
            v -= (v @ u) * u
        norm = np.linalg.norm(v)
        if norm == 0.0:
            v = np.zeros(d)
            v[len(vectors) % d] = 1.0
        else:
            v /= norm

        for _ in range(_MAX_ITER):
            w = work @ v
            for u in vectors:
                w -= (w @ u) * u
            norm = np.linalg.norm(w)
            if norm <= _TOL:
                # remaining spectrum is (numerically) zero
                w = v
                break
            w /= norm
            if np.linalg.norm(w - v) < _TOL or np.linalg.norm(w + v) < _TOL:
                v = w
                break
            v = w

        lam = float(v @ (cov @ v))
        peak = np.argmax(np.abs(v))
        if v[peak] < 0:
            v = -v
        values.append(lam)
        vectors.append(v)
        work = work - lam * np.outer(v, v)

    return np.array(values), np.column_stack(vectors)
