"""Trainable models: a small tanh MLP with per-layer residual smoothing
(ToyNet) and a weight-tied single-block attention encoder with an optional
post-refinement multi-scale correction.

Both models expose ``forward(tape, inputs, ...) -> logits Var``, an ordered
``named_parameters`` map, and a ``smoothing_report`` used by the trainer to
log blend coefficients.
"""

from __future__ import annotations

import base64
import json
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Parameter, Tape, Var
from .errors import ConfigError, ShapeError, VocabError
from .projectors import FeatureProjector, MultiScaleProjector, SequenceProjector
from .seeding import STREAM_MODEL_INIT, child_rng


class ToyNet:
    """MLP 2 -> hidden x n_layers -> 2 logits with tanh activations.

    When a (layer-shared) feature projector is attached, every hidden
    representation h is smoothed by ``n_proj_steps`` convex steps
    ``h <- a h + (1 - a) P(h)`` with a single net-level trainable blend
    ``a = sigmoid(alpha_logit)``.  Base weights are drawn from a stream that
    does not depend on the projector, so the plain and projector variants
    share bit-identical initial weights for the same seed.
    """

    def __init__(
        self,
        hidden_dim: int = 32,
        n_layers: int = 3,
        seed: int = 0,
        projector: FeatureProjector | None = None,
        alpha_logit: float = 0.0,
        n_proj_steps: int = 1,
    ):
        if hidden_dim < 1 or n_layers < 1:
            raise ConfigError("hidden_dim and n_layers must be >= 1")
        if n_proj_steps < 1:
            raise ConfigError(f"n_proj_steps must be >= 1, got {n_proj_steps}")
        if projector is not None and projector.dim != hidden_dim:
            raise ConfigError(
                f"projector width {projector.dim} does not match hidden_dim {hidden_dim}"
            )
        self.hidden_dim = hidden_dim
        self.n_layers = n_layers
        self.seed = seed
        self.projector = projector
        self.n_proj_steps = n_proj_steps

        rng = child_rng(seed, STREAM_MODEL_INIT)
        self.weights: list[Parameter] = []
        self.biases: list[Parameter] = []
        fan_in = 2
        for i in range(n_layers):
            self.weights.append(
                Parameter(rng.normal(0.0, fan_in**-0.5, (fan_in, hidden_dim)), name=f"w{i}")
            )
            self.biases.append(Parameter(np.zeros(hidden_dim), name=f"b{i}"))
            fan_in = hidden_dim
        self.w_out = Parameter(rng.normal(0.0, fan_in**-0.5, (fan_in, 2)), name="w_out")
        self.b_out = Parameter(np.zeros(2), name="b_out")
        self.alpha_logit = (
            Parameter(float(alpha_logit), name="alpha_logit") if projector is not None else None
        )

    def named_parameters(self) -> dict[str, Parameter]:
        out: dict[str, Parameter] = {}
        for w, b in zip(self.weights, self.biases):
            out[w.name] = w
            out[b.name] = b
        out["w_out"] = self.w_out
        out["b_out"] = self.b_out
        if self.projector is not None:
            out["proj.w_q"] = self.projector.w_q
            if self.projector.w_qstar is not None:
                out["proj.w_qstar"] = self.projector.w_qstar
            out["alpha_logit"] = self.alpha_logit
        return out

    def parameters(self) -> list[Parameter]:
        return list(self.named_parameters().values())

    def forward(self, tape: Tape, x) -> Var:
        hv = x if isinstance(x, Var) else tape.constant(np.asarray(x, dtype=np.float64))
        if hv.value.ndim != 2 or hv.value.shape[1] != 2:
            raise ShapeError(f"ToyNet expects (n, 2) inputs, got {hv.value.shape}")
        for w, b in zip(self.weights, self.biases):
            hv = ad.tanh(ad.matmul(hv, tape.watch(w)) + tape.watch(b))
            if self.projector is not None:
                a = ad.sigmoid(tape.watch(self.alpha_logit))
                for _ in range(self.n_proj_steps):
                    hv = a * hv + (1.0 - a) * self.projector.apply(tape, hv)
        return ad.matmul(hv, tape.watch(self.w_out)) + tape.watch(self.b_out)

    def predict(self, x: np.ndarray) -> np.ndarray:
        """Class labels in {+1, -1}; ties resolve to -1."""
        logits = self.forward(Tape(), x).value
        return np.where(logits[:, 1] > logits[:, 0], 1, -1)

    def smoothing_report(self) -> dict:
        alpha = (
            float(1.0 / (1.0 + np.exp(-self.alpha_logit.value)))
            if self.alpha_logit is not None
            else None
        )
        return {"alpha": alpha, "ms_weights": None}

    def describe(self) -> dict:
        return {
            "kind": "toynet",
            "hidden_dim": self.hidden_dim,
            "n_layers": self.n_layers,
            "seed": self.seed,
            "n_proj_steps": self.n_proj_steps,
            "projector": None
            if self.projector is None
            else {
                "coarse_dim": self.projector.coarse_dim,
                "eps": self.projector.eps,
                "tied": self.projector.tied,
            },
        }


class TiedEncoder:
    """Single attention+MLP block applied ``refinement_steps`` times with
    shared weights, then an optional smoothing correction
    ``h <- h + eta (P(h) - h)`` with ``P`` = multi-scale feature projector,
    optionally composed after a sequence projector.  Mean pooling over the
    sequence feeds a linear 2-class head.
    """

    def __init__(
        self,
        vocab_size: int,
        dim: int = 16,
        mlp_hidden: int | None = None,
        refinement_steps: int = 2,
        seed: int = 0,
        ms: MultiScaleProjector | None = None,
        seq: SequenceProjector | None = None,
        learnable_eta: bool = False,
    ):
        if vocab_size < 2 or dim < 2:
            raise ConfigError("vocab_size and dim must be >= 2")
        if refinement_steps < 1:
            raise ConfigError(f"refinement_steps must be >= 1, got {refinement_steps}")
        if ms is not None and ms.dim != dim:
            raise ConfigError(f"multi-scale width {ms.dim} does not match dim {dim}")
        self.vocab_size = vocab_size
        self.dim = dim
        self.mlp_hidden = mlp_hidden or 2 * dim
        self.refinement_steps = refinement_steps
        self.seed = seed
        self.ms = ms
        self.seq = seq

        rng = child_rng(seed, STREAM_MODEL_INIT)
        d = dim
        sd = d**-0.5
        self.embed = Parameter(rng.normal(0.0, sd, (vocab_size, d)), name="embed")
        self.w_q = Parameter(rng.normal(0.0, sd, (d, d)), name="attn.w_q")
        self.w_k = Parameter(rng.normal(0.0, sd, (d, d)), name="attn.w_k")
        self.w_v = Parameter(rng.normal(0.0, sd, (d, d)), name="attn.w_v")
        self.w_o = Parameter(rng.normal(0.0, sd, (d, d)), name="attn.w_o")
        self.ln1_g = Parameter(np.ones(d), name="ln1.g")
        self.ln1_b = Parameter(np.zeros(d), name="ln1.b")
        self.ln2_g = Parameter(np.ones(d), name="ln2.g")
        self.ln2_b = Parameter(np.zeros(d), name="ln2.b")
        self.w_m1 = Parameter(rng.normal(0.0, sd, (d, self.mlp_hidden)), name="mlp.w1")
        self.b_m1 = Parameter(np.zeros(self.mlp_hidden), name="mlp.b1")
        self.w_m2 = Parameter(rng.normal(0.0, self.mlp_hidden**-0.5, (self.mlp_hidden, d)), name="mlp.w2")
        self.b_m2 = Parameter(np.zeros(d), name="mlp.b2")
        self.w_head = Parameter(rng.normal(0.0, sd, (d, 2)), name="head.w")
        self.b_head = Parameter(np.zeros(2), name="head.b")
        self.eta_logit = Parameter(0.0, name="eta_logit") if learnable_eta else None

    def named_parameters(self) -> dict[str, Parameter]:
        params = [
            self.embed,
            self.w_q,
            self.w_k,
            self.w_v,
            self.w_o,
            self.ln1_g,
            self.ln1_b,
            self.ln2_g,
            self.ln2_b,
            self.w_m1,
            self.b_m1,
            self.w_m2,
            self.b_m2,
            self.w_head,
            self.b_head,
        ]
        out = {p.name: p for p in params}
        if self.ms is not None:
            for i, scale in enumerate(self.ms.scales):
                out[f"ms.{i}.w_q"] = scale.w_q
                if scale.w_qstar is not None:
                    out[f"ms.{i}.w_qstar"] = scale.w_qstar
            out["ms.beta_logits"] = self.ms.beta_logits
        if self.seq is not None:
            out["seq.w"] = self.seq.w
        if self.eta_logit is not None:
            out["eta_logit"] = self.eta_logit
        return out

    def parameters(self) -> list[Parameter]:
        return list(self.named_parameters().values())

    def _layer_norm(self, tape: Tape, x: Var, g: Parameter, b: Parameter) -> Var:
        mu = ad.vmean(x, axis=-1, keepdims=True)
        xc = x - mu
        var = ad.vmean(xc * xc, axis=-1, keepdims=True)
        inv = 1.0 / ad.sqrt(var + 1e-5)
        return xc * inv * tape.watch(g) + tape.watch(b)

    def _softmax_last(self, x: Var) -> Var:
        shifted = x - x.value.max(axis=-1, keepdims=True)
        e = ad.exp(shifted)
        return e / ad.vsum(e, axis=-1, keepdims=True)

    def _block(self, tape: Tape, h: Var) -> Var:
        a = self._layer_norm(tape, h, self.ln1_g, self.ln1_b)
        q = ad.matmul(a, tape.watch(self.w_q))
        k = ad.matmul(a, tape.watch(self.w_k))
        v = ad.matmul(a, tape.watch(self.w_v))
        scores = ad.matmul(q, ad.transpose_last(k)) * (self.dim**-0.5)
        att = self._softmax_last(scores)
        h = h + ad.matmul(ad.matmul(att, v), tape.watch(self.w_o))
        m = self._layer_norm(tape, h, self.ln2_g, self.ln2_b)
        m = ad.tanh(ad.matmul(m, tape.watch(self.w_m1)) + tape.watch(self.b_m1))
        return h + ad.matmul(m, tape.watch(self.w_m2)) + tape.watch(self.b_m2)

    def _post_correct(self, tape: Tape, h: Var, eta) -> Var:
        if self.ms is None and self.seq is None:
            return h
        if eta is None:
            if self.eta_logit is None:
                raise ConfigError("learnable eta requested but the model has no eta parameter")
            eta = ad.sigmoid(tape.watch(self.eta_logit))
        y = h
        if self.seq is not None:
            y = self.seq.apply(tape, y)
        if self.ms is not None:
            y = self.ms.mix(tape, y)
        return h + eta * (y - h)

    def forward(self, tape: Tape, tokens: np.ndarray, eta=0.0) -> Var:
        ids = np.asarray(tokens)
        if ids.ndim != 2:
            raise ShapeError(f"encoder expects (batch, t) token ids, got {ids.shape}")
        if ids.min() < 0 or ids.max() >= self.vocab_size:
            raise VocabError(
                f"token ids must lie in [0, {self.vocab_size}), got range "
                f"[{ids.min()}, {ids.max()}]"
            )
        h = ad.take_rows(tape.watch(self.embed), ids)
        for _ in range(self.refinement_steps):
            h = self._block(tape, h)
        h = self._post_correct(tape, h, eta)
        pooled = ad.vmean(h, axis=1)
        return ad.matmul(pooled, tape.watch(self.w_head)) + tape.watch(self.b_head)

    def predict(self, tokens: np.ndarray, eta=0.0, chunk: int = 256) -> np.ndarray:
        ids = np.asarray(tokens)
        preds = []
        for start in range(0, ids.shape[0], chunk):
            logits = self.forward(Tape(), ids[start : start + chunk], eta=eta).value
            preds.append(np.where(logits[:, 1] > logits[:, 0], 1, -1))
        return np.concatenate(preds)

    def smoothing_report(self) -> dict:
        weights = None if self.ms is None else tuple(float(w) for w in self.ms.weights())
        return {"alpha": None, "ms_weights": weights}

    def describe(self) -> dict:
        return {
            "kind": "tied_encoder",
            "vocab_size": self.vocab_size,
            "dim": self.dim,
            "mlp_hidden": self.mlp_hidden,
            "refinement_steps": self.refinement_steps,
            "seed": self.seed,
            "scales": None if self.ms is None else list(self.ms.coarse_dims),
            "seq_coarse": None if self.seq is None else self.seq.coarse_len,
            "learnable_eta": self.eta_logit is not None,
        }


# ---------------------------------------------------------------------------
# decision-boundary evaluation


@dataclass(frozen=True)
class BoundaryGrid:
    """Predicted classes on a rectangular grid; classes[i, j] is the class at
    (x1 = x1s[j], x2 = x2s[i]) with both axes ascending."""

    x1_range: tuple[float, float]
    x2_range: tuple[float, float]
    resolution: int
    classes: np.ndarray  # (resolution, resolution) int8 in {+1, -1}


def decision_boundary_grid(
    net: ToyNet,
    x1_range: tuple[float, float],
    x2_range: tuple[float, float],
    resolution: int,
) -> BoundaryGrid:
    if resolution < 2:
        raise ConfigError(f"resolution must be >= 2, got {resolution}")
    x1s = np.linspace(x1_range[0], x1_range[1], resolution)
    x2s = np.linspace(x2_range[0], x2_range[1], resolution)
    g1, g2 = np.meshgrid(x1s, x2s)
    pts = np.column_stack([g1.ravel(), g2.ravel()])
    preds = net.predict(pts).reshape(resolution, resolution).astype(np.int8)
    return BoundaryGrid(tuple(x1_range), tuple(x2_range), resolution, preds)


def save_grid_json(path, grid: BoundaryGrid) -> None:
    doc = {
        "x1_range": list(grid.x1_range),
        "x2_range": list(grid.x2_range),
        "resolution": grid.resolution,
        "classes": grid.classes.tolist(),
    }
    with open(path, "w") as fh:
        json.dump(doc, fh)
        fh.write("\n")


def load_grid_json(path) -> BoundaryGrid:
    with open(path) as fh:
        doc = json.load(fh)
    return BoundaryGrid(
        tuple(doc["x1_range"]),
        tuple(doc["x2_range"]),
        int(doc["resolution"]),
        np.asarray(doc["classes"], dtype=np.int8),
    )


# ---------------------------------------------------------------------------
# checkpoints: JSON with base64 little-endian float64 payloads


def save_checkpoint(path, config: dict, params: dict[str, Parameter]) -> None:
    doc = {
        "config": config,
        "params": {
            name: {
                "shape": list(p.value.shape),
                "data": base64.b64encode(p.value.astype("<f8").tobytes()).decode("ascii"),
            }
            for name, p in params.items()
        },
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def load_checkpoint(path) -> tuple[dict, dict[str, np.ndarray]]:
    with open(path) as fh:
        doc = json.load(fh)
    params = {}
    for name, entry in doc["params"].items():
        raw = base64.b64decode(entry["data"])
        params[name] = np.frombuffer(raw, dtype="<f8").reshape(entry["shape"]).astype(np.float64)
    return doc["config"], params


def restore_parameters(model, state: dict[str, np.ndarray]) -> None:
    """Copy checkpoint arrays into a model's named parameters (shape-checked)."""
    named = model.named_parameters()
    for name, arr in state.items():
        if name not in named:
            raise ConfigError(f"checkpoint has unknown parameter {name!r}")
        if named[name].value.shape != arr.shape:
            raise ShapeError(
                f"checkpoint parameter {name!r} has shape {arr.shape}, "
                f"model expects {named[name].value.shape}"
            )
        named[name].value[...] = arr
