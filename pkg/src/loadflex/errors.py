"""Exception hierarchy.

Class names double as the error names printed by the command line tool, so
they are kept short and descriptive rather than suffixed with ``Error``.
"""


class LoadFlexError(Exception):
    """Base class for all data errors raised by the package."""


# ingest
class MalformedLine(LoadFlexError):
    def __init__(self, line_no: int, line: str, reason: str):
        self.line_no = line_no
        self.line = line
        self.reason = reason
        super().__init__(f"line {line_no}: {reason}: {line!r}")


class NegativePower(MalformedLine):
    pass


# features
class EmptySlice(LoadFlexError):
    pass


class InsufficientDays(LoadFlexError):
    pass


class UnknownAttribute(LoadFlexError):
    pass


class BadCount(LoadFlexError):
    pass


# kmeans
class TooManyClusters(LoadFlexError):
    pass


class InstanceTooLarge(LoadFlexError):
    pass


# validity
class LengthMismatch(LoadFlexError):
    pass


class EmptySet(LoadFlexError):
    pass


class EmptyCluster(LoadFlexError):
    pass


class SingleCluster(LoadFlexError):
    pass


class CoincidentCentres(LoadFlexError):
    pass


class FewerThanTwoEligibleClusters(LoadFlexError):
    pass
