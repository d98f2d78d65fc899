"""Exception hierarchy. Each class carries the CLI exit code it maps to."""


class QLError(Exception):
    code = "error"
    exit_code = 1


class ParameterError(QLError, ValueError):
    code = "invalid-params"
    exit_code = 3


class SpecMismatchError(ParameterError):
    code = "spec-mismatch"
    exit_code = 4


class CapExceededError(QLError):
    code = "cap-exceeded"
    exit_code = 5


class QueryBudgetError(QLError):
    code = "budget-violation"
    exit_code = 6


class ProtocolError(QLError):
    code = "protocol-violation"
    exit_code = 7


class PermutationError(QLError):
    code = "permutation-invalid"
    exit_code = 8


class DegenerateCollapseError(QLError):
    code = "degenerate-collapse"
    exit_code = 9


class UnsupportedCapabilityError(QLError):
    code = "unsupported"
    exit_code = 10


class FindhDomainError(QLError):
    code = "findh-domain"
    exit_code = 11


class PreconditionError(QLError):
    code = "precondition"
    exit_code = 12


class InvariantViolation(QLError):
    code = "invariant-violation"
    exit_code = 13


class RestrictedActionError(ParameterError):
    code = "restricted-action"
    exit_code = 14
