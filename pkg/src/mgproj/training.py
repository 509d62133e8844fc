"""Training harness: cross-entropy, Adam, schedules, metrics, run histories,
Monte Carlo validation of the smoothing heuristics, and run comparison."""

from __future__ import annotations

import json
import math
import time
from dataclasses import asdict, dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import Parameter, Tape, Var, backward
from .data import SubspaceMixtureConfig, WigglyConfig, generate_subspace_mixture, wiggly_boundary
from .errors import ConfigError, NonFinite
from .models import BoundaryGrid, TiedEncoder
from .seeding import STREAM_SHUFFLE, child_rng


def labels_to_binary(y: np.ndarray) -> np.ndarray:
    """Map labels {-1, +1} to class indices {0, 1}."""
    return ((np.asarray(y) + 1) // 2).astype(np.int64)


def cross_entropy(logits, labels) -> Var | float:
    """Mean negative log-likelihood of 2-class logits, stabilized by
    max-subtraction.  Accepts a Var (returns a Var on the same tape) or a
    plain array (returns a float)."""
    if isinstance(logits, Var):
        return _cross_entropy_var(logits, labels)
    tape = Tape()
    return float(_cross_entropy_var(tape.constant(np.asarray(logits, dtype=np.float64)), labels).value)


def _cross_entropy_var(logits: Var, labels) -> Var:
    idx = np.asarray(labels, dtype=np.int64)
    if logits.value.ndim != 2 or logits.value.shape[1] != 2:
        raise ConfigError(f"cross_entropy expects (n, 2) logits, got {logits.value.shape}")
    if idx.shape != (logits.value.shape[0],) or not np.isin(idx, (0, 1)).all():
        raise ConfigError("labels must be 0/1 class indices, one per row")
    shifted = logits - logits.value.max(axis=1, keepdims=True)
    lse = ad.log(ad.vsum(ad.exp(shifted), axis=1, keepdims=True))
    picked = ad.take_along_last(shifted, idx)
    return ad.vmean(lse - picked)


# ---------------------------------------------------------------------------
# optimizer and schedules


@dataclass
class AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    t: int = 0

    @classmethod
    def init(cls, params: Sequence[Parameter]) -> "AdamState":
        return cls(
            m=[np.zeros_like(p.value) for p in params],
            v=[np.zeros_like(p.value) for p in params],
        )


def adam_step(
    params: Sequence[Parameter],
    grads: Sequence[np.ndarray],
    state: AdamState,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps_adam: float = 1e-8,
) -> AdamState:
    """Standard bias-corrected Adam update, in place."""
    state.t += 1
    bc1 = 1.0 - beta1**state.t
    bc2 = 1.0 - beta2**state.t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m[...] = beta1 * m + (1.0 - beta1) * g
        v[...] = beta2 * v + (1.0 - beta2) * g * g
        p.value[...] -= lr * (m / bc1) / (np.sqrt(v / bc2) + eps_adam)
    return state


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 15
    batch_size: int = 32
    lr_start: float = 0.01
    lr_end: float = 0.0001
    seed: int = 0
    eta_mode: str = "scheduled"  # scheduled | learnable | fixed
    eta_value: float = 0.5  # used by fixed mode
    eta_decay: float = 0.8  # schedule drops linearly to 1 - eta_decay
    shuffle: bool = True
    beta1: float = 0.9
    beta2: float = 0.999
    eps_adam: float = 1e-8

    def __post_init__(self):
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if not self.lr_start >= self.lr_end > 0.0:
            raise ConfigError(
                f"need lr_start >= lr_end > 0, got ({self.lr_start}, {self.lr_end})"
            )
        if self.eta_mode not in ("scheduled", "learnable", "fixed"):
            raise ConfigError(f"unknown eta_mode {self.eta_mode!r}")
        if not 0.0 <= self.eta_value <= 1.0:
            raise ConfigError("eta_value must lie in [0, 1]")
        if not 0.0 <= self.eta_decay <= 1.0:
            raise ConfigError("eta_decay must lie in [0, 1]")


def lr_schedule(cfg: TrainConfig, epoch: int) -> float:
    """Linear interpolation from lr_start at epoch 0 to lr_end at the final epoch."""
    if not 0 <= epoch < cfg.epochs:
        raise ConfigError(f"epoch {epoch} outside [0, {cfg.epochs})")
    if cfg.epochs == 1:
        return cfg.lr_start
    frac = epoch / (cfg.epochs - 1)
    return cfg.lr_start + (cfg.lr_end - cfg.lr_start) * frac


def eta_schedule(epoch: int, max_epochs: int, decay: float = 0.8) -> float:
    """Correction strength 1 - decay * epoch / max_epochs."""
    if not 0 <= epoch <= max_epochs:
        raise ConfigError(f"epoch {epoch} outside [0, {max_epochs}]")
    return 1.0 - decay * epoch / max_epochs


# ---------------------------------------------------------------------------
# metrics


class Metrics(NamedTuple):
    accuracy: float
    precision: float
    recall: float
    f1: float


def confusion_metrics(preds: np.ndarray, labels: np.ndarray) -> Metrics:
    """Binary metrics with positive class +1; ratios with a zero denominator
    are reported as 0."""
    p = np.asarray(preds)
    y = np.asarray(labels)
    if p.shape != y.shape or p.size == 0:
        raise ConfigError("preds and labels must be equal-length and nonempty")
    tp = int(np.sum((p == 1) & (y == 1)))
    fp = int(np.sum((p == 1) & (y == -1)))
    fn = int(np.sum((p == -1) & (y == 1)))
    tn = int(np.sum((p == -1) & (y == -1)))
    acc = (tp + tn) / p.size
    prec = tp / (tp + fp) if tp + fp > 0 else 0.0
    rec = tp / (tp + fn) if tp + fn > 0 else 0.0
    f1 = 2.0 * prec * rec / (prec + rec) if prec + rec > 0 else 0.0
    return Metrics(acc, prec, rec, f1)


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_loss: float
    accuracy: float
    precision: float
    recall: float
    f1: float
    grad_norm: float
    eta: float | None = None
    alpha: float | None = None
    ms_weights: tuple[float, ...] | None = None


HISTORY_METRICS = ("train_loss", "val_loss", "accuracy", "precision", "recall", "f1")


@dataclass
class RunHistory:
    config: dict
    records: list[EpochRecord] = field(default_factory=list)
    wall_clock: list[float] = field(default_factory=list)

    def csv_header(self) -> list[str]:
        cols = [
            "epoch",
            "train_loss",
            "val_loss",
            "accuracy",
            "precision",
            "recall",
            "f1",
            "grad_norm",
            "eta",
            "alpha",
        ]
        n_ms = 0
        for rec in self.records:
            if rec.ms_weights is not None:
                n_ms = max(n_ms, len(rec.ms_weights))
        cols.extend(f"ms_w{i}" for i in range(n_ms))
        return cols

    def to_csv(self, path) -> None:
        cols = self.csv_header()
        lines = [",".join(cols)]
        for rec in self.records:
            row = [
                str(rec.epoch),
                repr(rec.train_loss),
                repr(rec.val_loss),
                repr(rec.accuracy),
                repr(rec.precision),
                repr(rec.recall),
                repr(rec.f1),
                repr(rec.grad_norm),
                "" if rec.eta is None else repr(rec.eta),
                "" if rec.alpha is None else repr(rec.alpha),
            ]
            weights = rec.ms_weights or ()
            row.extend(repr(w) for w in weights)
            row.extend("" for _ in range(len(cols) - len(row)))
            lines.append(",".join(row))
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")

    def to_json(self, path) -> None:
        doc = {
            "config": self.config,
            "wall_clock": self.wall_clock,
            "records": [asdict(rec) for rec in self.records],
        }
        with open(path, "w") as fh:
            json.dump(doc, fh, indent=1)
            fh.write("\n")

    @classmethod
    def from_json(cls, path) -> "RunHistory":
        with open(path) as fh:
            doc = json.load(fh)
        records = []
        for rec in doc["records"]:
            if rec.get("ms_weights") is not None:
                rec["ms_weights"] = tuple(rec["ms_weights"])
            records.append(EpochRecord(**rec))
        return cls(config=doc["config"], records=records, wall_clock=doc["wall_clock"])


def averaged_metrics(history: RunHistory) -> dict[str, float]:
    """Arithmetic mean of each recorded metric across all epochs."""
    if not history.records:
        raise ConfigError("cannot average an empty history")
    out = {}
    for name in HISTORY_METRICS:
        out[name] = math.fsum(getattr(rec, name) for rec in history.records) / len(history.records)
    return out


# ---------------------------------------------------------------------------
# training loop


@dataclass(frozen=True)
class Dataset:
    """Supervised pairs: float features for the MLP or int token ids for the
    encoder; labels in {+1, -1}."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        if self.x.shape[0] != self.y.shape[0]:
            raise ConfigError("x and y must have matching first dimensions")


def _resolve_eta(model, cfg: TrainConfig, epoch: int):
    takes_eta = isinstance(model, TiedEncoder)
    if not takes_eta:
        return None, None
    if cfg.eta_mode == "scheduled":
        eta = eta_schedule(epoch, cfg.epochs, cfg.eta_decay)
        return eta, eta
    if cfg.eta_mode == "fixed":
        return cfg.eta_value, cfg.eta_value
    # learnable: forward reads the model's eta parameter
    current = float(1.0 / (1.0 + np.exp(-model.eta_logit.value)))
    return None, current


def _forward(model, tape: Tape, xb, eta):
    if isinstance(model, TiedEncoder):
        return model.forward(tape, xb, eta=eta)
    return model.forward(tape, xb)


def _eval_split(model, data: Dataset, eta, chunk: int = 512) -> tuple[float, np.ndarray]:
    losses = []
    preds = []
    labels01 = labels_to_binary(data.y)
    for start in range(0, data.x.shape[0], chunk):
        xb = data.x[start : start + chunk]
        yb = labels01[start : start + chunk]
        logits = _forward(model, Tape(), xb, eta)
        losses.append(float(_cross_entropy_var(logits, yb).value) * xb.shape[0])
        preds.append(np.where(logits.value[:, 1] > logits.value[:, 0], 1, -1))
    return math.fsum(losses) / data.x.shape[0], np.concatenate(preds)


def train(model, train_data: Dataset, test_data: Dataset, cfg: TrainConfig) -> RunHistory:
    """Deterministic minibatch Adam training.

    Per epoch: seeded shuffle, Adam updates, the global L2 gradient norm
    averaged over batches, then full-test-set evaluation.  Aborts with
    NonFinite naming the epoch and batch if the loss degenerates.
    """
    params = [p for p in model.parameters() if p.trainable]
    state = AdamState.init(params)
    rng = child_rng(cfg.seed, STREAM_SHUFFLE)
    n = train_data.x.shape[0]
    labels01 = labels_to_binary(train_data.y)
    history = RunHistory(config={"train": asdict(cfg), "model": model.describe(), "n_train": n})

    for epoch in range(cfg.epochs):
        t0 = time.perf_counter()
        lr = lr_schedule(cfg, epoch)
        eta_arg, eta_used = _resolve_eta(model, cfg, epoch)
        order = rng.permutation(n) if cfg.shuffle else np.arange(n)
        loss_sum = 0.0
        norm_sum = 0.0
        n_batches = 0
        for start in range(0, n, cfg.batch_size):
            sel = order[start : start + cfg.batch_size]
            tape = Tape()
            logits = _forward(model, tape, train_data.x[sel], eta_arg)
            loss = _cross_entropy_var(logits, labels01[sel])
            if not np.isfinite(loss.value):
                raise NonFinite(f"non-finite loss at epoch {epoch}, batch {n_batches}")
            for p in params:
                p.zero_grad()
            backward(tape, loss)
            sq = math.fsum(float(np.sum(p.grad * p.grad)) for p in params)
            norm_sum += math.sqrt(sq)
            adam_step(params, [p.grad for p in params], state, lr, cfg.beta1, cfg.beta2, cfg.eps_adam)
            loss_sum += float(loss.value) * sel.size
            n_batches += 1

        val_loss, preds = _eval_split(model, test_data, eta_arg)
        metrics = confusion_metrics(preds, test_data.y)
        report = model.smoothing_report()
        # learnable eta moved during the epoch; log its value after updates
        if isinstance(model, TiedEncoder) and cfg.eta_mode == "learnable":
            eta_used = float(1.0 / (1.0 + np.exp(-model.eta_logit.value)))
        history.records.append(
            EpochRecord(
                epoch=epoch,
                train_loss=loss_sum / n,
                val_loss=val_loss,
                accuracy=metrics.accuracy,
                precision=metrics.precision,
                recall=metrics.recall,
                f1=metrics.f1,
                grad_norm=norm_sum / n_batches,
                eta=eta_used,
                alpha=report["alpha"],
                ms_weights=report["ms_weights"],
            )
        )
        history.wall_clock.append(time.perf_counter() - t0)
    return history


# ---------------------------------------------------------------------------
# Monte Carlo validation of the smoothing heuristics


def phi(x: float) -> float:
    """Standard normal CDF."""
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


@dataclass(frozen=True)
class VarianceShrinkResult:
    alpha: float
    measured_var: float  # within-class variance of the smoothed logit, pooled
    predicted_var: float  # alpha^2 sigma^2 |w_f|^2
    measured_margin: dict[int, float]  # class -> mean of w^T M h
    predicted_margin: dict[int, float]  # class -> w_c^T s_y
    margin_se: dict[int, float]  # class -> standard error of the mean


def variance_shrink_check(
    h: np.ndarray,
    y: np.ndarray,
    basis: np.ndarray,
    w: np.ndarray,
    alpha: float,
    sigma: float,
) -> VarianceShrinkResult:
    """Empirical vs predicted statistics of the smoothed logit w^T M h.

    The class-conditional mean must match w_c^T s_y (smoothing preserves the
    mean margin) while the variance shrinks to alpha^2 sigma^2 |w_f|^2.
    """
    w = np.asarray(w, dtype=np.float64)
    proj_w = basis @ (basis.T @ w)
    w_f = w - proj_w
    coarse = (h @ basis) @ basis.T
    z = coarse @ w + alpha * ((h - coarse) @ w)
    measured_var = []
    measured_margin = {}
    margin_se = {}
    predicted_margin = {}
    for cls in (1, -1):
        sel = z[y == cls]
        measured_var.append(float(sel.var(ddof=1)) if sel.size > 1 else 0.0)
        measured_margin[cls] = float(sel.mean())
        margin_se[cls] = float(sel.std(ddof=1) / np.sqrt(sel.size)) if sel.size > 1 else 0.0
        cls_mean = coarse[y == cls].mean(axis=0)
        predicted_margin[cls] = float(proj_w @ cls_mean)
    wf_norm2 = float(w_f @ w_f)
    return VarianceShrinkResult(
        alpha=alpha,
        measured_var=float(np.mean(measured_var)),
        predicted_var=alpha * alpha * sigma * sigma * wf_norm2,
        measured_margin=measured_margin,
        predicted_margin=predicted_margin,
        margin_se=margin_se,
    )


def mixture_config_for_ratio(
    base: SubspaceMixtureConfig, w: np.ndarray, alpha: float, ratio: float
) -> SubspaceMixtureConfig:
    """Adjust the class means of ``base`` (symmetric classes) so that
    margin / (alpha sigma |w_f|) equals ``ratio`` for classifier ``w``."""
    from dataclasses import replace

    basis = _basis_for(base)
    w = np.asarray(w, dtype=np.float64)
    bw = basis.T @ w
    bw_norm2 = float(bw @ bw)
    if bw_norm2 == 0.0:
        raise ConfigError("classifier has no component in the coarse subspace")
    w_f = w - basis @ bw
    target_margin = ratio * alpha * base.sigma * float(np.linalg.norm(w_f))
    s = (target_margin / bw_norm2) * bw
    return replace(base, s_plus=tuple(s), s_minus=tuple(-s))


def _basis_for(cfg: SubspaceMixtureConfig) -> np.ndarray:
    from .data import mixture_basis

    return mixture_basis(cfg)


@dataclass(frozen=True)
class ErrorRateRow:
    alpha: float
    margin: float
    ratio: float  # margin / (alpha sigma |w_f|); inf when the denominator is 0
    predicted_error: float
    empirical_error: float


def error_rate_vs_gaussian(
    cfg: SubspaceMixtureConfig, w: np.ndarray, alphas: Sequence[float]
) -> list[ErrorRateRow]:
    """Misclassification rate of sign(w^T M h) against the normal-CDF
    prediction, one row per alpha.  Requires symmetric class means."""
    if tuple(-v for v in cfg.s_minus) != tuple(cfg.s_plus):
        raise ConfigError("error-rate check requires symmetric class means")
    h, y, basis = generate_subspace_mixture(cfg)
    w = np.asarray(w, dtype=np.float64)
    proj_w = basis @ (basis.T @ w)
    w_f = w - proj_w
    wf_norm = float(np.linalg.norm(w_f))
    margin = float((basis.T @ proj_w) @ np.asarray(cfg.s_plus))
    coarse_z = ((h @ basis) @ basis.T) @ w
    fine_z = h @ w - coarse_z
    rows = []
    for alpha in alphas:
        z = coarse_z + alpha * fine_z
        empirical = float(np.mean(y * z <= 0.0))
        denom = alpha * cfg.sigma * wf_norm
        if denom == 0.0:
            ratio = math.inf if margin > 0 else 0.0
            predicted = 0.0 if margin > 0 else 0.5
        else:
            ratio = margin / denom
            predicted = phi(-ratio)
        rows.append(ErrorRateRow(alpha, margin, ratio, predicted, empirical))
    return rows


# ---------------------------------------------------------------------------
# run comparison


@dataclass(frozen=True)
class ComparisonReport:
    """Pairwise comparison of two equal-length histories (a vs b).

    ``diffs`` holds per-epoch b - a; ``best_epoch`` maps metric ->
    {"a": (epoch, value), "b": (epoch, value)} where best means max for
    metrics and min for losses; ``wins`` counts epochs won per metric.
    """

    averaged: dict[str, dict[str, float]]
    diffs: dict[str, list[float]]
    best_epoch: dict[str, dict[str, tuple[int, float]]]
    wins: dict[str, dict[str, int]]

    def to_dict(self) -> dict:
        return {
            "averaged": self.averaged,
            "diffs": self.diffs,
            "best_epoch": {
                m: {k: [int(e), float(v)] for k, (e, v) in sides.items()}
                for m, sides in self.best_epoch.items()
            },
            "wins": self.wins,
        }


def compare_runs(history_a: RunHistory, history_b: RunHistory) -> ComparisonReport:
    if len(history_a.records) != len(history_b.records):
        raise ConfigError("histories must have equal epoch counts")
    averaged = {"a": averaged_metrics(history_a), "b": averaged_metrics(history_b)}
    diffs = {}
    best_epoch = {}
    wins = {}
    for name in HISTORY_METRICS:
        va = [getattr(r, name) for r in history_a.records]
        vb = [getattr(r, name) for r in history_b.records]
        diffs[name] = [b - a for a, b in zip(va, vb)]
        pick = min if name.endswith("loss") else max
        best_epoch[name] = {
            "a": (int(np.argmin(va) if pick is min else np.argmax(va)), pick(va)),
            "b": (int(np.argmin(vb) if pick is min else np.argmax(vb)), pick(vb)),
        }
        better = (lambda x, y: x < y) if name.endswith("loss") else (lambda x, y: x > y)
        wins[name] = {
            "a": sum(1 for x, y in zip(va, vb) if better(x, y)),
            "b": sum(1 for x, y in zip(va, vb) if better(y, x)),
        }
    return ComparisonReport(averaged, diffs, best_epoch, wins)


def boundary_disagreement(grid: BoundaryGrid, cfg: WigglyConfig) -> float:
    """Fraction of grid nodes whose predicted class differs from the true
    side of the boundary curve."""
    x1s = np.linspace(grid.x1_range[0], grid.x1_range[1], grid.resolution)
    x2s = np.linspace(grid.x2_range[0], grid.x2_range[1], grid.resolution)
    curve = wiggly_boundary(cfg, x1s)
    truth = np.where(x2s[:, None] > curve[None, :], 1, -1)
    return float(np.mean(truth != grid.classes))
