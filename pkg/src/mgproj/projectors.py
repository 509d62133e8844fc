"""Smoothing projector operators.

The feature-axis projector is oblique: independent trainable restriction and
prolongation maps with a diagonal regularizer stabilizing the coarse Gram
solve.  The sequence-axis projector is orthogonal by construction through a
thin QR of a trainable temporal basis.  A multi-scale variant combines
feature projectors at several coarse widths under softmax simplex weights.

All ``apply`` methods run on a Tape and are differentiable end to end.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Parameter, Tape, Var
from .errors import ConfigError, ShapeError
from .linalg import qr_thin, solve_gram
from .seeding import STREAM_PROJECTOR_INIT, child_rng


class FeatureProjector:
    """Trainable restriction/prolongation pair acting on the feature axis.

    ``w_q`` (dim x coarse_dim) prolongs coarse coefficients back to the fine
    space; the restriction is either an independent map ``w_qstar``
    (coarse_dim x dim) or, in tied mode, exactly ``w_q.T``.  Applying the
    operator solves the small regularized coarse system instead of forming
    the dim x dim matrix.
    """

    def __init__(
        self,
        dim: int,
        coarse_dim: int,
        eps: float = 1e-4,
        tied: bool = False,
        seed: int = 0,
    ):
        if not 1 <= coarse_dim < dim:
            raise ConfigError(f"need 1 <= coarse_dim < dim, got {coarse_dim} vs {dim}")
        if eps < 0.0:
            raise ConfigError(f"eps must be nonnegative, got {eps}")
        rng = child_rng(seed, STREAM_PROJECTOR_INIT)
        wq = rng.normal(0.0, dim**-0.5, size=(dim, coarse_dim))
        self.dim = dim
        self.coarse_dim = coarse_dim
        self.eps = float(eps)
        self.tied = bool(tied)
        self.w_q = Parameter(wq, name="w_q")
        self.w_qstar = (
            None
            if tied
            else Parameter(wq.T + rng.normal(0.0, 0.01, size=(coarse_dim, dim)), name="w_qstar")
        )

    def parameters(self) -> list[Parameter]:
        return [self.w_q] if self.tied else [self.w_q, self.w_qstar]

    def restriction(self) -> np.ndarray:
        return self.w_q.value.T if self.tied else self.w_qstar.value

    def matrix(self) -> np.ndarray:
        """Explicit projector Q (Q* Q + eps I)^-1 Q* as a dim x dim array."""
        qs = self.restriction()
        a = qs @ self.w_q.value
        return self.w_q.value @ solve_gram(a, self.eps, qs)

    def apply(self, tape: Tape, x) -> Var:
        """Project ``x`` (..., dim) along its last axis."""
        xv = x if isinstance(x, Var) else tape.constant(x)
        if xv.value.ndim < 2 or xv.value.shape[-1] != self.dim:
            raise ShapeError(
                f"feature projector of width {self.dim} got input shape {xv.value.shape}"
            )
        q = tape.watch(self.w_q)
        qs = ad.transpose_last(q) if self.tied else tape.watch(self.w_qstar)
        z = ad.matmul(xv, ad.transpose_last(qs))
        a = ad.matmul(qs, q)
        if self.eps > 0.0:
            a = a + self.eps * np.eye(self.coarse_dim)
        flat = z.value.ndim > 2
        zf = ad.reshape(z, (-1, self.coarse_dim)) if flat else z
        u = ad.transpose_last(ad.gram_solve(a, ad.transpose_last(zf)))
        if flat:
            u = ad.reshape(u, z.value.shape)
        return ad.matmul(u, ad.transpose_last(q))


class SequenceProjector:
    """Orthogonal projector onto a trainable coarse temporal subspace.

    A basis ``w`` (length x coarse_len) is orthonormalized by thin QR on each
    forward pass; the induced operator q q^T is symmetric and idempotent with
    trace equal to coarse_len.
    """

    def __init__(self, length: int, coarse_len: int, seed: int = 0):
        if not 1 <= coarse_len < length:
            raise ConfigError(f"need 1 <= coarse_len < length, got {coarse_len} vs {length}")
        rng = child_rng(seed, STREAM_PROJECTOR_INIT, 1)
        self.length = length
        self.coarse_len = coarse_len
        self.w = Parameter(rng.normal(0.0, length**-0.5, size=(length, coarse_len)), name="w_t")

    def parameters(self) -> list[Parameter]:
        return [self.w]

    def basis(self) -> np.ndarray:
        q, _ = qr_thin(self.w.value)
        return q

    def matrix(self) -> np.ndarray:
        q = self.basis()
        return q @ q.T

    def apply(self, tape: Tape, x) -> Var:
        """Project ``x`` (batch, length, d) along its sequence axis."""
        xv = x if isinstance(x, Var) else tape.constant(x)
        if xv.value.ndim != 3 or xv.value.shape[1] != self.length:
            raise ShapeError(
                f"sequence projector of length {self.length} got input shape {xv.value.shape}"
            )
        q, _ = ad.qr(tape.watch(self.w))
        coarse = ad.matmul(ad.transpose_last(q), xv)
        return ad.matmul(q, coarse)


@dataclass
class MixedOperator:
    """Interpolation ``p + alpha (I - p)`` between projection and identity."""

    p: np.ndarray
    alpha: float

    def __post_init__(self):
        self.p = np.asarray(self.p, dtype=np.float64)
        if self.p.ndim != 2 or self.p.shape[0] != self.p.shape[1]:
            raise ShapeError(f"projector matrix must be square, got shape {self.p.shape}")
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigError(f"alpha must lie in [0, 1], got {self.alpha}")

    def matrix(self) -> np.ndarray:
        eye = np.eye(self.p.shape[0])
        return self.p + self.alpha * (eye - self.p)

    def apply(self, h: np.ndarray) -> np.ndarray:
        """Apply to a vector (f,) or a stack of row vectors (n, f)."""
        hh = np.asarray(h, dtype=np.float64)
        if hh.shape[-1] != self.p.shape[0]:
            raise ShapeError(f"operator of size {self.p.shape[0]} got input shape {hh.shape}")
        ph = hh @ self.p.T
        return ph + self.alpha * (hh - ph)

    def apply_var(self, tape: Tape, h: Var) -> Var:
        ph = ad.matmul(h, tape.constant(self.p.T))
        return ph + self.alpha * (h - ph)


class DualProjector:
    """Iterated convex smoothing steps composing sequence and feature actions.

    One step maps h to ``a h + (1 - a) P(h)`` with a learned blend
    ``a = sigmoid(alpha_h_logit)`` and ``P = feature after sequence``.
    """

    def __init__(
        self,
        feat: FeatureProjector | None = None,
        seq: SequenceProjector | None = None,
        alpha_logit: float = 0.0,
        n_steps: int = 1,
    ):
        if feat is None and seq is None:
            raise ConfigError("dual projector needs a feature or a sequence component")
        if n_steps < 1:
            raise ConfigError(f"n_steps must be >= 1, got {n_steps}")
        self.feat = feat
        self.seq = seq
        self.n_steps = int(n_steps)
        self.alpha_h_logit = Parameter(float(alpha_logit), name="alpha_h_logit")

    def parameters(self) -> list[Parameter]:
        out = [self.alpha_h_logit]
        if self.feat is not None:
            out.extend(self.feat.parameters())
        if self.seq is not None:
            out.extend(self.seq.parameters())
        return out

    def alpha(self) -> float:
        return float(1.0 / (1.0 + np.exp(-self.alpha_h_logit.value)))

    def project(self, tape: Tape, h: Var) -> Var:
        y = h
        if self.seq is not None:
            y = self.seq.apply(tape, y)
        if self.feat is not None:
            y = self.feat.apply(tape, y)
        return y

    def apply(self, tape: Tape, h) -> Var:
        hv = h if isinstance(h, Var) else tape.constant(h)
        a = ad.sigmoid(tape.watch(self.alpha_h_logit))
        for _ in range(self.n_steps):
            hv = a * hv + (1.0 - a) * self.project(tape, hv)
        return hv


class MultiScaleProjector:
    """Convex combination of feature projectors at several coarse widths.

    Simplex weights come from a softmax over trainable logits (initialized to
    zero, i.e. uniform).  ``apply`` uses the residual form
    ``h + eta (P_ms h - h)`` where ``eta`` may be a float or a Var.
    """

    def __init__(
        self,
        dim: int,
        coarse_dims: tuple[int, ...] | list[int],
        eps: float = 1e-4,
        tied: bool = False,
        seed: int = 0,
    ):
        coarse_dims = tuple(int(c) for c in coarse_dims)
        if len(coarse_dims) < 1:
            raise ConfigError("multi-scale projector needs at least one scale")
        self.dim = dim
        self.coarse_dims = coarse_dims
        self.scales = [
            FeatureProjector(dim, dc, eps=eps, tied=tied, seed=_scale_seed(seed, i))
            for i, dc in enumerate(coarse_dims)
        ]
        self.beta_logits = Parameter(np.zeros(len(coarse_dims)), name="beta_logits")

    def parameters(self) -> list[Parameter]:
        out: list[Parameter] = []
        for s in self.scales:
            out.extend(s.parameters())
        out.append(self.beta_logits)
        return out

    def weights(self) -> np.ndarray:
        b = self.beta_logits.value
        e = np.exp(b - b.max())
        return e / e.sum()

    def weights_var(self, tape: Tape) -> Var:
        b = tape.watch(self.beta_logits)
        e = ad.exp(b - float(b.value.max()))
        return e / ad.vsum(e)

    def mix(self, tape: Tape, h) -> Var:
        """The combined projector applied to ``h`` (no residual blending)."""
        hv = h if isinstance(h, Var) else tape.constant(h)
        w = self.weights_var(tape)
        out = None
        for i, scale in enumerate(self.scales):
            term = _pick(w, i) * scale.apply(tape, hv)
            out = term if out is None else out + term
        return out

    def apply(self, tape: Tape, h, eta) -> Var:
        hv = h if isinstance(h, Var) else tape.constant(h)
        if isinstance(eta, Var):
            return hv + eta * (self.mix(tape, hv) - hv)
        eta = float(eta)
        if not 0.0 <= eta <= 1.0:
            raise ConfigError(f"eta must lie in [0, 1], got {eta}")
        if eta == 0.0:
            return hv
        return hv + eta * (self.mix(tape, hv) - hv)


def _scale_seed(seed: int, index: int) -> int:
    # distinct, deterministic per-scale seeds
    return (int(seed) << 8) + 17 * (index + 1)


def _pick(v: Var, i: int) -> Var:
    """Scalar node v[i] from a 1-D node."""

    def vjp(g: np.ndarray) -> np.ndarray:
        out = np.zeros_like(v.value)
        out[i] = g
        return out

    return v.tape._node(np.asarray(v.value[i]), (v,), (vjp,))
