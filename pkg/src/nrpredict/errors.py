"""Exception hierarchy. The CLI prints ``<ClassName>: <message>`` on failure."""


class NRPredictError(Exception):
    """Base class for all package errors."""


class MalformedHeader(NRPredictError):
    pass


class RowParseError(NRPredictError):
    def __init__(self, row: int, reason: str):
        super().__init__(f"row {row}: {reason}")
        self.row = row
        self.reason = reason


class EmptyTrace(NRPredictError):
    pass


class SuffixError(NRPredictError):
    pass


class ConfigError(NRPredictError):
    pass


class SchemaMismatch(NRPredictError):
    pass


class TooFewSamples(NRPredictError):
    pass


class DegenerateTarget(NRPredictError):
    pass


class LengthMismatch(NRPredictError):
    pass


class UnknownFormatVersion(NRPredictError):
    pass


class IoError(NRPredictError):
    pass
