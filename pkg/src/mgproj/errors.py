"""Exception types shared across the package."""


class ShapeError(ValueError):
    """Operands have incompatible or non-conforming shapes."""


class RankDeficient(ValueError):
    """A basis matrix lost full column rank during factorization."""

    def __init__(self, column: int, pivot: float):
        super().__init__(
            f"rank-deficient basis: |r[{column},{column}]| = {pivot:.3e} below tolerance"
        )
        self.column = column
        self.pivot = pivot


class SingularSystem(ValueError):
    """A (regularized) linear system is numerically singular."""


class NonFinite(ArithmeticError):
    """A computation produced NaN or infinity."""


class ConfigError(ValueError):
    """Invalid configuration value or configuration file."""


class VocabError(ValueError):
    """Token id outside the embedding table."""
