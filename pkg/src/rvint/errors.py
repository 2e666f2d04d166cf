"""Exception types raised across the package."""


class InvalidParameterError(ValueError):
    pass


class GridMismatchError(ValueError):
    pass


class DimensionError(ValueError):
    pass


class LadderTooFineError(ValueError):
    pass


class TruncationInadmissibleError(ValueError):
    pass


class ModeDivergenceError(RuntimeError):
    """A mode's forward integral failed the regularization-ladder test."""

    def __init__(self, mode, detail=""):
        self.mode = mode
        msg = f"forward integral for mode j={mode} did not converge"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


class BlowUpError(RuntimeError):
    pass


class OutOfRangeError(RuntimeError):
    pass
