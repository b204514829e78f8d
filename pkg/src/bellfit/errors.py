"""Exception hierarchy shared by the whole package."""


class BellfitError(Exception):
    """Base class for every error raised by bellfit."""


class ParameterDomainError(BellfitError, ValueError):
    """A physical or model parameter lies outside its allowed domain."""

    def __init__(self, field, value, requirement):
        self.field = field
        self.value = value
        self.requirement = requirement
        super().__init__(f"{field}={value!r} violates {requirement}")


class SolverError(BellfitError, RuntimeError):
    pass


class NoSolutionError(BellfitError, ValueError):
    pass


class ConvergenceError(BellfitError, RuntimeError):
    def __init__(self, message, trace=()):
        self.trace = list(trace)
        super().__init__(f"{message}; trace={self.trace}")


class CapacityError(BellfitError, OverflowError):
    pass


class DegenerateDataError(BellfitError, ValueError):
    pass


class MissingDataError(BellfitError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else ""


class RankError(BellfitError, ValueError):
    pass


class DatasetFormatError(BellfitError, ValueError):
    """Malformed dataset or config file; ``line`` is 1-based when known."""

    def __init__(self, message, line=None, path=None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}"
        if line is not None:
            where += f":{line}"
        super().__init__(f"{where}: {message}" if where else message)


class UnsupportedVersionError(DatasetFormatError):
    pass
