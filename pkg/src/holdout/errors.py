"""Exception hierarchy. Everything derives from ValueError so callers can catch broadly."""


class HoldoutError(ValueError):
    pass


class DataError(HoldoutError):
    """Malformed or unusable input data."""


class ModelError(HoldoutError):
    """A predictor cannot be fitted or applied to the given inputs."""


class RankDeficientError(ModelError):
    pass


class AnchorError(HoldoutError):
    """Loss anchors that cannot support a monotone power-law curve."""


class DomainError(HoldoutError):
    """A hold-out size, fold count or noise level outside the valid range."""
