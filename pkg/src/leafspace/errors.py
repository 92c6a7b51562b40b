"""Exception hierarchy shared by all leafspace modules."""

from __future__ import annotations


class LeafspaceError(Exception):
    """Base class; carries a short machine-readable ``code``."""

    code = "error"

    def to_dict(self) -> dict:
        return {"error": self.code, "message": str(self)}


class PointOutsideDomain(LeafspaceError):
    code = "point-outside-domain"


class NonfiniteField(LeafspaceError):
    code = "nonfinite-field"


class StencilExitsDomain(LeafspaceError):
    code = "stencil-exits-domain"


# bracket_defect names this condition "step-too-large"
StepTooLarge = StencilExitsDomain


class JunctionParameter(LeafspaceError):
    code = "junction-parameter"


class NotLiftable(LeafspaceError):
    code = "not-liftable"

    def __init__(self, message: str, *, probe: int | None = None, escape: float | None = None):
        super().__init__(message)
        self.probe = probe
        self.escape = escape

    def to_dict(self) -> dict:
        d = super().to_dict()
        d.update(probe=self.probe, escape=self.escape)
        return d


class BallExitsDomain(LeafspaceError):
    code = "ball-exits-domain"


class UncertifiedFamily(LeafspaceError):
    code = "uncertified-family"


class OrbitEscapesDomain(LeafspaceError):
    code = "orbit-escapes-domain"


class OracleMissing(LeafspaceError):
    code = "oracle-missing"


class UnknownScenario(LeafspaceError):
    code = "unknown-name"


class InvalidParameter(LeafspaceError):
    code = "invalid-n"


class InvalidConfig(LeafspaceError):
    code = "invalid-config"


class ZeroOrbitDirection(LeafspaceError):
    code = "zero-orbit-direction"
