"""Dense float64 linear algebra kernels: thin QR, regularized Gram solves,
triangular back-substitution, and a power-iteration spectral norm estimate.

Everything here is deterministic and sized for small (desk-scale) matrices.
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigError, NonFinite, RankDeficient, ShapeError, SingularSystem

RANK_TOL = 1e-12
PIVOT_TOL = 1e-14


def qr_thin(w: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Thin QR of ``w`` (T x Tc, T >= Tc >= 1) via Householder reflections.

    Returns ``(q, r)`` with orthonormal ``q`` (T x Tc) and upper-triangular
    ``r`` (Tc x Tc) normalized to a positive diagonal, which makes the
    factorization the unique smooth branch.  Raises ``RankDeficient`` when a
    diagonal entry of ``r`` falls below ``RANK_TOL``.
    """
    a = np.array(w, dtype=np.float64)
    if a.ndim != 2:
        raise ShapeError(f"qr_thin expects a matrix, got ndim={a.ndim}")
    t, tc = a.shape
    if not 1 <= tc <= t:
        raise ShapeError(f"qr_thin needs T >= Tc >= 1, got shape {a.shape}")
    if not np.isfinite(a).all():
        raise NonFinite("qr_thin input contains non-finite entries")

    reflectors = []
    for k in range(tc):
        x = a[k:, k].copy()
        norm_x = float(np.linalg.norm(x))
        v = x
        if norm_x > 0.0:
            v[0] += np.copysign(norm_x, x[0]) if x[0] != 0.0 else norm_x
            v /= np.linalg.norm(v)
            a[k:, k:] -= 2.0 * np.outer(v, v @ a[k:, k:])
        else:
            v = np.zeros_like(v)
        reflectors.append(v)

    r = np.triu(a[:tc, :])
    q = np.eye(t, tc)
    for k in reversed(range(tc)):
        v = reflectors[k]
        q[k:, :] -= 2.0 * np.outer(v, v @ q[k:, :])

    signs = np.where(np.diag(r) < 0.0, -1.0, 1.0)
    r *= signs[:, None]
    q *= signs[None, :]
    for i in range(tc):
        if abs(r[i, i]) < RANK_TOL:
            raise RankDeficient(i, abs(r[i, i]))
    return q, r


def _cholesky(a: np.ndarray) -> np.ndarray | None:
    """Lower Cholesky factor of ``a``, or None when a pivot degenerates."""
    n = a.shape[0]
    lo = np.zeros_like(a)
    thresh = PIVOT_TOL * max(abs(float(np.trace(a))), 1.0)
    for j in range(n):
        d = a[j, j] - lo[j, :j] @ lo[j, :j]
        if d <= thresh:
            return None
        lo[j, j] = np.sqrt(d)
        if j + 1 < n:
            lo[j + 1 :, j] = (a[j + 1 :, j] - lo[j + 1 :, :j] @ lo[j, :j]) / lo[j, j]
    return lo


def _forward_sub(lo: np.ndarray, b: np.ndarray) -> np.ndarray:
    y = np.empty_like(b)
    for i in range(lo.shape[0]):
        y[i] = (b[i] - lo[i, :i] @ y[:i]) / lo[i, i]
    return y


def _back_sub(up: np.ndarray, b: np.ndarray) -> np.ndarray:
    n = up.shape[0]
    x = np.empty_like(b)
    for i in range(n - 1, -1, -1):
        x[i] = (b[i] - up[i, i + 1 :] @ x[i + 1 :]) / up[i, i]
    return x


def _lu_solve(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Partial-pivot Gaussian elimination solve; raises on tiny pivots."""
    n = a.shape[0]
    m = np.hstack([a.copy(), b.copy()])
    thresh = PIVOT_TOL * max(1.0, float(np.abs(a).max()))
    for k in range(n):
        p = k + int(np.argmax(np.abs(m[k:, k])))
        if abs(m[p, k]) < thresh:
            raise SingularSystem(f"pivot {abs(m[p, k]):.3e} below tolerance at column {k}")
        if p != k:
            m[[k, p]] = m[[p, k]]
        m[k + 1 :, k:] -= np.outer(m[k + 1 :, k] / m[k, k], m[k, k:])
    return _back_sub(np.triu(m[:, :n]), m[:, n:])


def solve_gram(qstar_q: np.ndarray, eps: float, z: np.ndarray) -> np.ndarray:
    """Solve ``(qstar_q + eps I) u = z`` column-wise.

    Attempts Cholesky when the regularized matrix is symmetric (the tied or
    orthogonal prototype; an untied restriction-prolongation Gram matrix is
    generally nonsymmetric) and falls back to partial-pivot elimination
    otherwise or when a Cholesky pivot degenerates.
    """
    a = np.asarray(qstar_q, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ShapeError(f"solve_gram needs a square matrix, got shape {a.shape}")
    if eps < 0.0:
        raise ConfigError(f"regularization eps must be nonnegative, got {eps}")
    zz = np.asarray(z, dtype=np.float64)
    squeeze = zz.ndim == 1
    if squeeze:
        zz = zz[:, None]
    if zz.shape[0] != a.shape[0]:
        raise ShapeError(f"rhs rows {zz.shape[0]} != system size {a.shape[0]}")
    if not (np.isfinite(a).all() and np.isfinite(zz).all()):
        raise NonFinite("solve_gram input contains non-finite entries")

    if eps > 0.0:
        a = a + eps * np.eye(a.shape[0])
    scale = max(1.0, float(np.abs(a).max()))
    if np.abs(a - a.T).max() <= 1e-12 * scale:
        lo = _cholesky(a)
        if lo is not None:
            u = _back_sub(lo.T, _forward_sub(lo, zz))
            return u[:, 0] if squeeze else u
    u = _lu_solve(a, zz)
    return u[:, 0] if squeeze else u


def solve_upper(r: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve ``r x = b`` for upper-triangular ``r``."""
    if abs(np.diag(r)).min() < PIVOT_TOL:
        raise SingularSystem("triangular solve with near-zero diagonal")
    bb = np.asarray(b, dtype=np.float64)
    squeeze = bb.ndim == 1
    if squeeze:
        bb = bb[:, None]
    x = _back_sub(np.asarray(r, dtype=np.float64), bb)
    return x[:, 0] if squeeze else x


def spectral_norm(m: np.ndarray, iters: int = 200, seed: int = 0) -> float:
    """Largest singular value of ``m`` estimated by power iteration on m^T m.

    The estimate approaches the true value from below; a zero matrix maps
    to 0 exactly.
    """
    a = np.asarray(m, dtype=np.float64)
    if a.ndim != 2:
        raise ShapeError(f"spectral_norm expects a matrix, got ndim={a.ndim}")
    if iters < 1:
        raise ConfigError(f"iters must be >= 1, got {iters}")
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(a.shape[1])
    nv = np.linalg.norm(v)
    if nv == 0.0:
        return 0.0
    v /= nv
    for _ in range(iters):
        w = a.T @ (a @ v)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        v = w / nw
    return float(np.linalg.norm(a @ v))
