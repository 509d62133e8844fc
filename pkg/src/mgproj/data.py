"""Synthetic datasets: the wiggly-boundary 2-D task, a signal-plus-complement
noise mixture, and a token-sequence task with label-irrelevant noise tokens.

All generators are pure functions of their config (seed included); train and
test splits come from independent child streams.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .linalg import qr_thin
from .seeding import STREAM_MIXTURE_BASIS, STREAM_TEST_DATA, STREAM_TRAIN_DATA, child_rng

PAD_TOKEN = 0


# ---------------------------------------------------------------------------
# wiggly-boundary 2-D classification


@dataclass(frozen=True)
class WigglyConfig:
    """Quadratic trend plus sinusoidal components; labels by side of the curve.

    ``components`` is a tuple of (amplitude, frequency, phase) triples.  The
    x2 sampling interval is derived from the boundary extrema over
    ``x1_range`` extended by 25% of the span on each side.
    """

    n_train: int = 800
    n_test: int = 200
    a: float = 0.8
    b: float = 0.0
    c: float = 0.0
    components: tuple[tuple[float, float, float], ...] = ((0.6, 3.0, 0.0), (0.25, 9.0, 1.0))
    x1_range: tuple[float, float] = (-2.0, 2.0)
    noise_std: float = 0.08
    seed: int = 0

    def __post_init__(self):
        if self.n_train < 1 or self.n_test < 1:
            raise ConfigError("n_train and n_test must be >= 1")
        if self.x1_range[0] >= self.x1_range[1]:
            raise ConfigError(f"empty x1_range {self.x1_range}")
        if self.noise_std < 0.0:
            raise ConfigError("noise_std must be nonnegative")
        for amp, freq, phase in self.components:
            if freq <= 0.0:
                raise ConfigError(f"oscillation frequency must be positive, got {freq}")


@dataclass(frozen=True)
class LabeledPoint2D:
    x1: float
    x2: float
    label: int  # +1 above the boundary, -1 otherwise (from clean coordinates)


def wiggly_boundary(cfg: WigglyConfig, x1):
    """Boundary curve x2(x1) = a x1^2 + b x1 + c + sum of sinusoids."""
    x1 = np.asarray(x1, dtype=np.float64)
    x2 = cfg.a * x1 * x1 + cfg.b * x1 + cfg.c
    for amp, freq, phase in cfg.components:
        x2 = x2 + amp * np.sin(freq * x1 + phase)
    return float(x2) if x2.ndim == 0 else x2


def wiggly_x2_range(cfg: WigglyConfig) -> tuple[float, float]:
    """Derived x2 sampling interval: boundary extrema padded by 25% of span."""
    grid = np.linspace(cfg.x1_range[0], cfg.x1_range[1], 512)
    vals = wiggly_boundary(cfg, grid)
    lo, hi = float(vals.min()), float(vals.max())
    pad = 0.25 * (hi - lo) if hi > lo else 1.0
    return lo - pad, hi + pad


def _wiggly_split(cfg: WigglyConfig, n: int, rng: np.random.Generator) -> list[LabeledPoint2D]:
    x2_lo, x2_hi = wiggly_x2_range(cfg)
    x1 = rng.uniform(cfg.x1_range[0], cfg.x1_range[1], n)
    x2 = rng.uniform(x2_lo, x2_hi, n)
    labels = np.where(x2 > wiggly_boundary(cfg, x1), 1, -1)
    # labels are fixed before noise perturbs the coordinates
    noise = rng.standard_normal((n, 2)) * cfg.noise_std
    x1n = x1 + noise[:, 0]
    x2n = x2 + noise[:, 1]
    return [LabeledPoint2D(float(a), float(b), int(l)) for a, b, l in zip(x1n, x2n, labels)]


def generate_wiggly(cfg: WigglyConfig) -> tuple[list[LabeledPoint2D], list[LabeledPoint2D]]:
    train = _wiggly_split(cfg, cfg.n_train, child_rng(cfg.seed, STREAM_TRAIN_DATA))
    test = _wiggly_split(cfg, cfg.n_test, child_rng(cfg.seed, STREAM_TEST_DATA))
    return train, test


def points_to_arrays(points: list[LabeledPoint2D]) -> tuple[np.ndarray, np.ndarray]:
    x = np.array([[p.x1, p.x2] for p in points], dtype=np.float64)
    y = np.array([p.label for p in points], dtype=np.int64)
    return x, y


def save_points_csv(path, points: list[LabeledPoint2D]) -> None:
    lines = ["x1,x2,label"]
    lines += [f"{p.x1!r},{p.x2!r},{p.label}" for p in points]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_points_csv(path) -> list[LabeledPoint2D]:
    with open(path) as fh:
        header = fh.readline().strip()
        if header != "x1,x2,label":
            raise ConfigError(f"unexpected 2-D dataset header: {header!r}")
        out = []
        for line in fh:
            if not line.strip():
                continue
            a, b, l = line.strip().split(",")
            out.append(LabeledPoint2D(float(a), float(b), int(l)))
    return out


# ---------------------------------------------------------------------------
# coarse-subspace signal + complement noise mixture


@dataclass(frozen=True)
class SubspaceMixtureConfig:
    """Samples h = s_y + n with the class signal inside a random orthonormal
    coarse subspace and isotropic Gaussian noise in its orthogonal complement.

    ``s_plus`` and ``s_minus`` are coarse-coordinate vectors (length c).
    """

    f: int = 16
    c: int = 4
    basis_seed: int = 0
    s_plus: tuple[float, ...] = (1.0, 0.0, 0.0, 0.0)
    s_minus: tuple[float, ...] = (-1.0, 0.0, 0.0, 0.0)
    sigma: float = 1.0
    n: int = 1000
    seed: int = 0

    def __post_init__(self):
        if not 1 <= self.c < self.f:
            raise ConfigError(f"need 1 <= c < f, got c={self.c}, f={self.f}")
        if self.sigma < 0.0:
            raise ConfigError("sigma must be nonnegative")
        if len(self.s_plus) != self.c or len(self.s_minus) != self.c:
            raise ConfigError("class means must have length c")
        if self.n < 1:
            raise ConfigError("n must be >= 1")


def mixture_basis(cfg: SubspaceMixtureConfig) -> np.ndarray:
    """The exact orthonormal coarse basis (f x c) used by the generator."""
    rng = child_rng(cfg.basis_seed, STREAM_MIXTURE_BASIS)
    q, _ = qr_thin(rng.standard_normal((cfg.f, cfg.c)))
    return q


def generate_subspace_mixture(
    cfg: SubspaceMixtureConfig,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Returns (h, y, basis) with h (n, f), y (n,) in {+1, -1}, basis (f, c)."""
    basis = mixture_basis(cfg)
    rng = child_rng(cfg.seed, STREAM_TRAIN_DATA)
    y = np.where(rng.random(cfg.n) < 0.5, 1, -1)
    means = np.where(
        (y == 1)[:, None], basis @ np.asarray(cfg.s_plus), basis @ np.asarray(cfg.s_minus)
    )
    g = rng.standard_normal((cfg.n, cfg.f)) * cfg.sigma
    complement = g - (g @ basis) @ basis.T
    return means + complement, y, basis


# ---------------------------------------------------------------------------
# token-sequence task with injected noise tokens


@dataclass(frozen=True)
class TokenTaskConfig:
    """Class-determined signal pattern plus probabilistic noise-token blocks.

    With probability ``noise_prob`` a sample receives k ~ Uniform{1..max_noise}
    distinct tokens from the noise pool (ids not used by any pattern, pad
    excluded); the signal block and the noise tokens are then shuffled as
    blocks before padding to length ``t``.
    """

    vocab_size: int = 32
    t: int = 24
    pattern_pos: tuple[int, ...] = (3, 5, 7)
    pattern_neg: tuple[int, ...] = (4, 6, 8)
    noise_prob: float = 0.7
    max_noise: int = 6
    positive_ratio: float = 0.5
    n_train: int = 2000
    n_test: int = 500
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.noise_prob <= 1.0:
            raise ConfigError(f"noise_prob must lie in [0, 1], got {self.noise_prob}")
        if self.max_noise < 0:
            raise ConfigError("max_noise must be >= 0")
        if not 0.0 < self.positive_ratio < 1.0:
            raise ConfigError("positive_ratio must lie strictly inside (0, 1)")
        longest = max(len(self.pattern_pos), len(self.pattern_neg))
        if longest + self.max_noise > self.t:
            raise ConfigError(
                f"pattern ({longest}) plus max_noise ({self.max_noise}) exceeds t={self.t}"
            )
        used = set(self.pattern_pos) | set(self.pattern_neg)
        if any(tok <= 0 or tok >= self.vocab_size for tok in used):
            raise ConfigError("pattern tokens must lie in [1, vocab_size)")
        if self.max_noise > 0 and len(self.noise_pool()) < self.max_noise:
            raise ConfigError("noise pool smaller than max_noise")
        if self.n_train < 1 or self.n_test < 1:
            raise ConfigError("n_train and n_test must be >= 1")

    def noise_pool(self) -> tuple[int, ...]:
        used = set(self.pattern_pos) | set(self.pattern_neg) | {PAD_TOKEN}
        return tuple(tok for tok in range(1, self.vocab_size) if tok not in used)


@dataclass(frozen=True)
class TokenData:
    tokens: np.ndarray  # (n, t) int64, padded with PAD_TOKEN
    labels: np.ndarray  # (n,) int64 in {+1, -1}


def _token_split(cfg: TokenTaskConfig, n: int, rng: np.random.Generator) -> TokenData:
    n_pos = int(round(cfg.positive_ratio * n))
    labels = np.concatenate([np.ones(n_pos, dtype=np.int64), -np.ones(n - n_pos, dtype=np.int64)])
    rng.shuffle(labels)
    pool = np.array(cfg.noise_pool(), dtype=np.int64)
    tokens = np.full((n, cfg.t), PAD_TOKEN, dtype=np.int64)
    for i, lab in enumerate(labels):
        pattern = cfg.pattern_pos if lab == 1 else cfg.pattern_neg
        blocks = [list(pattern)]
        if cfg.max_noise > 0 and rng.random() < cfg.noise_prob:
            k = int(rng.integers(1, cfg.max_noise + 1))
            picked = rng.choice(pool, size=k, replace=False)
            blocks.extend([int(tok)] for tok in picked)
        order = rng.permutation(len(blocks))
        flat = [tok for j in order for tok in blocks[j]]
        tokens[i, : len(flat)] = flat
    return TokenData(tokens=tokens, labels=labels)


def generate_token_task(cfg: TokenTaskConfig) -> tuple[TokenData, TokenData]:
    train = _token_split(cfg, cfg.n_train, child_rng(cfg.seed, STREAM_TRAIN_DATA))
    test = _token_split(cfg, cfg.n_test, child_rng(cfg.seed, STREAM_TEST_DATA))
    return train, test


def save_tokens_jsonl(path, data: TokenData) -> None:
    with open(path, "w") as fh:
        for row, lab in zip(data.tokens, data.labels):
            fh.write(json.dumps({"tokens": [int(t) for t in row], "label": int(lab)}) + "\n")


def load_tokens_jsonl(path) -> TokenData:
    tokens, labels = [], []
    with open(path) as fh:
        for line in fh:
            if not line.strip():
                continue
            obj = json.loads(line)
            tokens.append(obj["tokens"])
            labels.append(obj["label"])
    return TokenData(tokens=np.asarray(tokens, dtype=np.int64), labels=np.asarray(labels, dtype=np.int64))
