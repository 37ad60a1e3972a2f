"""
Exception hierarchy. Library code raises these; only dephasewalk.main turns
them into process exit codes.
"""


class DephaseWalkError(Exception):
    exit_code = 1

    def __init__(self, detail: str):
        super().__init__(detail)
        self.detail = detail


class ConfigError(DephaseWalkError):
    exit_code = 2


class NumericalError(DephaseWalkError):
    exit_code = 3


class InvariantError(NumericalError):
    """A value object failed one of its numerical invariants."""


class DefectiveSpectrumError(NumericalError):
    """Spectral expansion requested on a decomposition flagged near an exceptional point."""


class DimensionError(DephaseWalkError):
    exit_code = 3
