class BeaconfoldError(ValueError):
    """Base class for domain errors raised by this package."""


class TraceFormatError(BeaconfoldError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class SymbolRangeError(BeaconfoldError):
    pass


class NoSignalError(BeaconfoldError):
    pass


class CapacityError(BeaconfoldError):
    def __init__(self, requested, available):
        self.requested = requested
        self.available = available
        super().__init__(
            f"requested {requested} intervals but only {available} primes available"
        )


class InsufficientContactError(BeaconfoldError):
    pass
