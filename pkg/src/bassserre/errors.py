"""Exception types raised across the toolkit.

Every error carries a short machine-readable ``code`` so the CLI can map
it to an exit status and the JSON report can name it.
"""

from __future__ import annotations


class ToolkitError(Exception):
    code = "ToolkitError"
    exit_code = 3

    def __init__(self, message: str = "", **details):
        super().__init__(message or self.code)
        self.details = details

    def to_dict(self) -> dict:
        out = {"error": self.code, "message": str(self)}
        for k, v in sorted(self.details.items()):
            out[k] = v if isinstance(v, (str, int, float, bool, type(None))) else repr(v)
        return out


# base_groups
class UnknownGenerator(ToolkitError):
    code = "UnknownGenerator"


class UnsupportedBackend(ToolkitError):
    code = "UnsupportedBackend"


class InfiniteIndexUnbounded(ToolkitError):
    code = "InfiniteIndexUnbounded"


class InvalidGroup(ToolkitError):
    code = "InvalidGroup"


class InvalidHomomorphism(ToolkitError):
    code = "InvalidHomomorphism"


# graph_of_groups
class Disconnected(ToolkitError):
    code = "Disconnected"


class NonInjectiveEdgeMap(ToolkitError):
    code = "NonInjectiveEdgeMap"


class OracleTruncation(ToolkitError):
    code = "OracleTruncation"
    exit_code = 2


class AttachmentUnwitnessed(ToolkitError):
    code = "AttachmentUnwitnessed"


class BudgetExceeded(ToolkitError):
    code = "BudgetExceeded"
    exit_code = 2


# tree_action
class FixedVertexSearchExhausted(ToolkitError):
    code = "FixedVertexSearchExhausted"
    exit_code = 2


class AxisNotInvariant(ToolkitError):
    code = "AxisNotInvariant"


class BudgetExhausted(ToolkitError):
    code = "BudgetExhausted"
    exit_code = 2

    def __init__(self, message: str = "", partial=None, **details):
        super().__init__(message, **details)
        self.partial = partial


# core_complex
class NotHyperbolicPair(ToolkitError):
    code = "NotHyperbolicPair"


class CocycleViolation(ToolkitError):
    code = "CocycleViolation"


class NonSeparating(ToolkitError):
    code = "NonSeparating"


class NotAForest(ToolkitError):
    code = "NotAForest"


class FiberMismatch(ToolkitError):
    code = "FiberMismatch"


class ClassificationInconclusive(ToolkitError):
    code = "ClassificationInconclusive"
    exit_code = 2


# jsj_engine
class CapExceeded(ToolkitError):
    code = "CapExceeded"
    exit_code = 2

    def __init__(self, message: str = "", audit=None, **details):
        super().__init__(message, **details)
        self.audit = audit or []


# cli
class ProjectError(ToolkitError):
    code = "ProjectError"

    def __init__(self, message: str = "", line: int | None = None, column: int | None = None, **details):
        if line is not None:
            message = f"{line}:{column or 1}: {message}"
        super().__init__(message, line=line, column=column, **details)
        self.line = line
        self.column = column


class EmptyProject(ProjectError):
    code = "EmptyProject"


class ProjectSyntaxError(ProjectError):
    code = "SyntaxError"


class ResolveError(ProjectError):
    code = "ResolveError"
