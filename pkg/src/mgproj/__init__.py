"""Multigrid-inspired smoothing projectors for small neural networks."""

from .autodiff import Parameter, Tape, Var, backward, grad_check
from .errors import (
    ConfigError,
    NonFinite,
    RankDeficient,
    ShapeError,
    SingularSystem,
    VocabError,
)
from .linalg import qr_thin, solve_gram, spectral_norm
from .projectors import (
    DualProjector,
    FeatureProjector,
    MixedOperator,
    MultiScaleProjector,
    SequenceProjector,
)

__version__ = "0.1.0"

__all__ = [
    "Parameter",
    "Tape",
    "Var",
    "backward",
    "grad_check",
    "qr_thin",
    "solve_gram",
    "spectral_norm",
    "FeatureProjector",
    "SequenceProjector",
    "DualProjector",
    "MultiScaleProjector",
    "MixedOperator",
    "ConfigError",
    "NonFinite",
    "RankDeficient",
    "ShapeError",
    "SingularSystem",
    "VocabError",
    "__version__",
]
