"""Exception hierarchy. Each class carries the CLI exit code it maps to."""


class EditMagError(Exception):
    exit_code = 1


class UsageError(EditMagError):
    exit_code = 2


class InvalidInput(EditMagError, ValueError):
    exit_code = 3


class ConfigError(InvalidInput):
    pass


class InsufficientPrompts(InvalidInput):
    pass


class WrongHead(InvalidInput):
    pass


class ProviderError(EditMagError):
    exit_code = 4


class ProviderUnavailable(ProviderError):
    pass


class ProviderContractViolation(ProviderError):
    pass


class CacheCorrupt(ProviderError):
    pass


class CacheConflict(ProviderError):
    pass


class DegenerateError(EditMagError):
    exit_code = 5


class DegenerateLabels(DegenerateError):
    pass


class DegenerateInput(DegenerateError):
    pass


class DegenerateData(DegenerateError):
    pass


class InsufficientData(DegenerateError):
    pass


class UnstableStatistic(DegenerateError):
    pass


class TrainingDiverged(DegenerateError):
    pass
