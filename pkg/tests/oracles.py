"""Independent reference implementations used to pin expected values.

These deliberately use different algorithms than the library (Gram-Schmidt
instead of Householder, textbook elimination instead of Cholesky, cyclic
Jacobi instead of power iteration, mpmath instead of float64 summation) so
each check has two genuinely distinct routes.
"""

import mpmath
import numpy as np


def gram_schmidt_qr(w):
    """Modified Gram-Schmidt thin QR with positive diagonal."""
    w = np.asarray(w, dtype=np.float64)
    t, tc = w.shape
    q = np.zeros((t, tc))
    r = np.zeros((tc, tc))
    v = w.copy()
    for j in range(tc):
        r[j, j] = np.linalg.norm(v[:, j])
        q[:, j] = v[:, j] / r[j, j]
        for k in range(j + 1, tc):
            r[j, k] = q[:, j] @ v[:, k]
            v[:, k] -= r[j, k] * q[:, j]
    return q, r


def gauss_solve(a, b):
    """Textbook Gaussian elimination with partial pivoting (row loops)."""
    a = np.asarray(a, dtype=np.float64).copy()
    b = np.asarray(b, dtype=np.float64).copy()
    squeeze = b.ndim == 1
    if squeeze:
        b = b[:, None]
    n = a.shape[0]
    for k in range(n):
        piv = max(range(k, n), key=lambda i: abs(a[i, k]))
        if piv != k:
            a[[k, piv]] = a[[piv, k]]
            b[[k, piv]] = b[[piv, k]]
        for i in range(k + 1, n):
            factor = a[i, k] / a[k, k]
            a[i, k:] -= factor * a[k, k:]
            b[i] -= factor * b[k]
    x = np.zeros_like(b)
    for i in range(n - 1, -1, -1):
        x[i] = (b[i] - a[i, i + 1 :] @ x[i + 1 :]) / a[i, i]
    return x[:, 0] if squeeze else x


def jacobi_eigenvalues(a, sweeps=30):
    """Cyclic Jacobi rotations for a symmetric matrix; returns eigenvalues."""
    m = np.asarray(a, dtype=np.float64).copy()
    n = m.shape[0]
    for _ in range(sweeps):
        off = np.sqrt(np.sum(np.tril(m, -1) ** 2))
        if off < 1e-14:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                if abs(m[p, q]) < 1e-300:
                    continue
                theta = 0.5 * np.arctan2(2.0 * m[p, q], m[q, q] - m[p, p])
                c, s = np.cos(theta), np.sin(theta)
                rot = np.eye(n)
                rot[p, p] = c
                rot[q, q] = c
                rot[p, q] = s
                rot[q, p] = -s
                m = rot.T @ m @ rot
    return np.sort(np.diag(m))


def adam_reference(grad_fn, x0, lr, steps, beta1=0.9, beta2=0.999, eps=1e-8):
    """Scalar Adam trajectory written independently of the library."""
    x = float(x0)
    m = 0.0
    v = 0.0
    traj = []
    for t in range(1, steps + 1):
        g = grad_fn(x)
        m = beta1 * m + (1 - beta1) * g
        v = beta2 * v + (1 - beta2) * g * g
        mhat = m / (1 - beta1**t)
        vhat = v / (1 - beta2**t)
        x = x - lr * mhat / (np.sqrt(vhat) + eps)
        traj.append(x)
    return traj


def cross_entropy_mpmath(logits, labels, dps=50):
    """High-precision mean negative log-softmax via mpmath."""
    with mpmath.workdps(dps):
        total = mpmath.mpf(0)
        for row, lab in zip(logits, labels):
            z0, z1 = mpmath.mpf(float(row[0])), mpmath.mpf(float(row[1]))
            lse = mpmath.log(mpmath.e**z0 + mpmath.e**z1)
            picked = (z0, z1)[int(lab)]
            total += lse - picked
        return float(total / len(labels))


def mean_mpmath(values, dps=50):
    with mpmath.workdps(dps):
        total = mpmath.mpf(0)
        for v in values:
            total += mpmath.mpf(float(v))
        return float(total / len(values))


def normal_cdf_mpmath(x, dps=50):
    with mpmath.workdps(dps):
        return float(mpmath.ncdf(mpmath.mpf(float(x))))


def orthonormal_projector(q):
    """Projector onto range(q) built from an orthonormalized basis."""
    qq, _ = gram_schmidt_qr(q)
    return qq @ qq.T
