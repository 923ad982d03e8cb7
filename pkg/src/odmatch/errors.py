"""Exception types shared across the package."""


class FormatError(ValueError):
    """A model/dataset/LM file failed to parse or violated an invariant."""


class DivergenceError(RuntimeError):
    """Training produced a non-finite objective value."""
