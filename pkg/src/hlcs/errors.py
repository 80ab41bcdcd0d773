"""Exception hierarchy. Each class carries a stable machine-readable code."""


class HlcsError(Exception):
    code = "HLCS_ERROR"
    exit_status = 1


class ParseError(HlcsError, ValueError):
    code = "PARSE_ERROR"
    exit_status = 2


class ConstraintError(HlcsError, ValueError):
    code = "CONSTRAINT_ERROR"
    exit_status = 3


class UnsupportedCase(HlcsError):
    code = "UNSUPPORTED_CASE"
    exit_status = 4


class LarcViolated(HlcsError):
    code = "LARC_VIOLATED"
    exit_status = 5


class NotInControlSet(HlcsError):
    code = "NOT_IN_CONTROL_SET"
    exit_status = 6


class PreconditionViolated(HlcsError):
    code = "PRECONDITION_VIOLATED"
    exit_status = 7


class WindowTooCoarse(HlcsError):
    code = "WINDOW_TOO_COARSE"
    exit_status = 8


class NotInvariant(HlcsError):
    code = "NOT_INVARIANT"
    exit_status = 9


class DomainError(HlcsError, ValueError):
    code = "DOMAIN_ERROR"
    exit_status = 10


class NoValidSigma(HlcsError):
    code = "NO_VALID_SIGMA"
    exit_status = 11


class UsageError(HlcsError):
    code = "USAGE_ERROR"
    exit_status = 1
