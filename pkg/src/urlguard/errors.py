"""Exception types shared across modules."""


class UrlGuardError(Exception):
    pass


class UrlError(UrlGuardError, ValueError):
    """Base class for URL validation failures."""


class NoScheme(UrlError):
    pass


class IpLiteralHost(UrlError):
    pass


class UnknownTld(UrlError):
    pass


class MalformedHost(UrlError):
    pass


class MalformedRow(UrlGuardError, ValueError):
    def __init__(self, line, reason):
        super().__init__(f"line {line}: {reason}")
        self.line = line
        self.reason = reason


class EmptyCorpus(UrlGuardError, ValueError):
    pass


class EmptyCalibration(UrlGuardError, ValueError):
    pass
