"""Exception types shared across the package."""


class ShapeMismatchError(ValueError):
    """Operands have incompatible dimensions."""


class ParameterError(ValueError):
    """A parameter is outside its admissible range."""


class SingularSystemError(RuntimeError):
    """A masked least-squares system is singular (or under-determined) with ridge = 0.

    ``axis`` is "column" or "row", ``index`` the offending column/row.
    """

    def __init__(self, axis, index, detail=""):
        self.axis = axis
        self.index = index
        msg = f"singular system at {axis} {index}"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)


class MergeConflictError(ValueError):
    """Attempted to merge columns with overlapping observed rows."""


class InitializationError(RuntimeError):
    """Subspace approximation failed (rank-deficient block)."""


class CombinationError(RuntimeError):
    """Subspace combination failed (insufficient or rank-deficient overlap)."""


class DegenerateConfigurationError(RuntimeError):
    """Scene geometry does not support a metric reconstruction."""
