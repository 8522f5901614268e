"""Exception types shared across the package."""


class InvalidParameterError(ValueError):
    """A physical parameter lies outside the range where the model is defined."""


class InvalidInputError(ValueError):
    """An input object (density, state, config) violates its contract."""


class GridMismatchError(ValueError):
    """A state was combined with a grid it was not sampled on."""
