"""Independent reference implementations used as test oracles.

Everything in this module is written directly from first principles (3GPP
TS 38.211 sequence recursions, textbook DFT, naive per-sample metric
counting, central finite differences) and deliberately shares no code with
the package under test.
"""

import numpy as np


def pss_reference(n_id_2):
    """PSS per TS 38.211 7.4.2.2, transcribed index by index."""
    x = [0, 1, 1, 0, 1, 1, 1]
    for i in range(127 - 7):
        x.append((x[i + 4] + x[i]) % 2)
    d = []
    for n in range(127):
        m = (n + 43 * n_id_2) % 127
        d.append(1 - 2 * x[m])
    return d


def sss_reference(n_id_1, n_id_2):
    """SSS per TS 38.211 7.4.2.3, transcribed index by index."""
    x0 = [1, 0, 0, 0, 0, 0, 0]
    x1 = [1, 0, 0, 0, 0, 0, 0]
    for i in range(127 - 7):
        x0.append((x0[i + 4] + x0[i]) % 2)
        x1.append((x1[i + 1] + x1[i]) % 2)
    m0 = 15 * (n_id_1 // 112) + 5 * n_id_2
    m1 = n_id_1 % 112
    d = []
    for n in range(127):
        d.append((1 - 2 * x0[(n + m0) % 127]) * (1 - 2 * x1[(n + m1) % 127]))
    return d


def dft_direct(x):
    """O(N^2) forward DFT: X[k] = sum_m x[m] exp(-j 2 pi k m / N)."""
    x = np.asarray(x, dtype=complex)
    n = len(x)
    k = np.arange(n)
    out = np.empty(n, dtype=complex)
    for kk in range(n):
        out[kk] = np.sum(x * np.exp(-2j * np.pi * kk * k / n))
    return out


def idft_direct(row):
    """O(N^2) inverse DFT with 1/N normalization."""
    row = np.asarray(row, dtype=complex)
    n = len(row)
    k = np.arange(n)
    out = np.empty(n, dtype=complex)
    for m in range(n):
        out[m] = np.sum(row * np.exp(2j * np.pi * k * m / n)) / n
    return out


def confusion_counts(probs, labels, threshold):
    """Per-sample confusion loop, no vectorization."""
    tp = fp = fn = tn = 0
    for p, y in zip(probs, labels):
        pred = 1 if p >= threshold else 0
        if pred == 1 and y == 1:
            tp += 1
        elif pred == 1 and y == 0:
            fp += 1
        elif pred == 0 and y == 1:
            fn += 1
        else:
            tn += 1
    return tp, fp, fn, tn


def central_diff_grad(loss_fn, params, h=1e-4):
    """Central finite differences of a scalar loss over a flat vector."""
    params = np.asarray(params, dtype=np.float64)
    grad = np.zeros_like(params)
    for i in range(len(params)):
        bumped = params.copy()
        bumped[i] += h
        f_plus = loss_fn(bumped)
        bumped[i] -= 2 * h
        f_minus = loss_fn(bumped)
        grad[i] = (f_plus - f_minus) / (2 * h)
    return grad


def covariance_eig_reference(data):
    """Eigendecomposition of the sample covariance via np.linalg.eigh.

    Returns eigenvalues descending with matching eigenvector columns.
    """
    data = np.asarray(data, dtype=np.float64)
    centered = data - data.mean(axis=0)
    cov = centered.T @ centered / max(1, len(data) - 1)
    vals, vecs = np.linalg.eigh(cov)
    order = np.argsort(vals)[::-1]
    return vals[order], vecs[:, order]


if __name__ == "__main__":
    np.set_printoptions(linewidth=100)
    print("pss n2=0 first 8:", pss_reference(0)[:8])
    print("sss (1,0):", np.array(sss_reference(1, 0)))
