"""Exception types shared across the package."""


class ParameterError(ValueError):
    """An argument is outside its admissible range."""


class StateError(RuntimeError):
    """An operation was invoked on an object in the wrong state."""


class ConstructionError(RuntimeError):
    """A randomized construction failed its required high-probability event.

    Callers typically retry with a fresh seed or a larger instance.
    """


class DataError(ValueError):
    """Input data violates an assumption (non-positive values, NaN, ...)."""
