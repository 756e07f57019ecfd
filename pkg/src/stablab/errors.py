"""Exception types raised across the package."""


class StabLabError(Exception):
    """Base class for every error raised by stablab."""


class ParameterError(StabLabError, ValueError):
    pass


class DomainError(StabLabError, ValueError):
    pass


class DuplicateError(StabLabError, ValueError):
    pass


class ConfigurationError(StabLabError, ValueError):
    pass


class ConstraintError(StabLabError, ValueError):
    pass


class ContractError(StabLabError, TypeError):
    pass


class SampleSizeError(StabLabError, ValueError):
    pass


class DecompositionError(StabLabError, ValueError):
    pass
