"""Exception hierarchy shared by every module.

All errors carry the module and operation that raised them and, where it
makes sense, the offending point, so the CLI can emit a machine-readable
error object without guessing.
"""

from __future__ import annotations

from typing import Any


class OdeReduceError(Exception):
    module = "odereduce"

    def __init__(self, message: str, *, operation: str | None = None,
                 point: Any = None, module: str | None = None, **details: Any):
        super().__init__(message)
        self.message = message
        self.operation = operation
        self.point = point
        if module is not None:
            self.module = module
        self.details = details

    def to_dict(self) -> dict:
        out = {
            "type": type(self).__name__,
            "module": self.module,
            "operation": self.operation,
            "message": self.message,
        }
        if self.point is not None:
            out["point"] = _jsonable(self.point)
        for key, value in self.details.items():
            out[key] = _jsonable(value)
        return out


def _jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, (str, int, float, bool)) or value is None:
        return value
    try:
        return float(value)
    except (TypeError, ValueError):
        return str(value)


# expr-core
class ExprError(OdeReduceError):
    module = "expr-core"


class ExprSyntaxError(ExprError):
    def __init__(self, message: str, position: int, text: str = ""):
        super().__init__(f"{message} at position {position}", operation="parse",
                         position=position, text=text)
        self.position = position


class UnknownIdentifier(ExprError):
    def __init__(self, name: str, position: int):
        super().__init__(f"unknown identifier {name!r} at position {position}",
                         operation="parse", identifier=name, position=position)
        self.name = name
        self.position = position


class DomainError(ExprError, ArithmeticError):
    pass


class DivisionByZero(DomainError, ZeroDivisionError):
    pass


# quadrature (shared by reduction, exactness, verify)
class DivergentIntegral(OdeReduceError):
    module = "reduction"


# reduction
class ReductionError(OdeReduceError):
    module = "reduction"


class NonPositiveWeight(ReductionError):
    pass


class OutOfRange(ReductionError):
    pass


class StructureMismatch(OdeReduceError):
    module = "reduction"


class NegativeRadicand(ReductionError):
    pass


# closed-form
class ClosedFormError(OdeReduceError):
    module = "closed-form"


class InternalVerificationFailed(ClosedFormError):
    pass


class SingularWronskian(ClosedFormError):
    pass


class OutOfDomain(ClosedFormError):
    pass


# f-subst
class FSubstError(OdeReduceError):
    module = "f-subst"


class BranchRequired(FSubstError):
    pass


class RangeViolation(FSubstError):
    pass


# exactness
class ExactnessError(OdeReduceError):
    module = "exactness"


class InsufficientSamples(ExactnessError):
    pass


class ZeroMu(ExactnessError):
    pass


class NoRootInBracket(ExactnessError):
    pass


class NonMonotone(ExactnessError):
    pass


# verify
class VerifyError(OdeReduceError):
    module = "verify"


class StepSizeUnderflow(VerifyError):
    def __init__(self, message: str, *, trajectory=None, **kwargs):
        super().__init__(message, **kwargs)
        self.trajectory = trajectory


class LeadingCoefficientVanished(VerifyError):
    pass


class EmptyGridAfterTrim(VerifyError):
    pass


class PreconditionFailed(VerifyError):
    pass


# cli
class ProblemFileError(OdeReduceError):
    module = "cli"
