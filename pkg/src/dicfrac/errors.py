"""Exception hierarchy for the engine.

Every error carries a stable ``kind`` string so the CLI and HTTP layers can
emit machine-readable payloads without string-matching messages.
"""


class DicfracError(Exception):
    """Base class for all engine errors."""

    kind = "EngineError"

    def __init__(self, message: str, **context):
        super().__init__(message)
        self.context = context

    def payload(self) -> dict:
        return {"kind": self.kind, "message": str(self), **self.context}


class ConfigError(DicfracError):
    kind = "ConfigError"


class IoError(DicfracError):
    kind = "IoError"


# --- field ingestion -------------------------------------------------------

class EmptyFile(DicfracError):
    kind = "EmptyFile"


class MalformedRow(DicfracError):
    kind = "MalformedRow"


class MixedColumnCounts(DicfracError):
    kind = "MixedColumnCounts"


class IrregularGrid(DicfracError):
    kind = "IrregularGrid"


class DegenerateGrid(DicfracError):
    kind = "DegenerateGrid"


class DuplicatePoints(DicfracError):
    kind = "DuplicatePoints"


class CropTooSmall(DicfracError):
    kind = "CropTooSmall"


class CropOutOfBounds(DicfracError):
    kind = "CropOutOfBounds"


class MaskCoversAllNodes(DicfracError):
    kind = "MaskCoversAllNodes"


# --- material --------------------------------------------------------------

class NotPositiveDefinite(DicfracError):
    kind = "NotPositiveDefinite"


class SingularStiffness(DicfracError):
    kind = "SingularStiffness"


# --- mesh ------------------------------------------------------------------

class TipOutsideGrid(DicfracError):
    kind = "TipOutsideGrid"


class PolylineNotSnappable(DicfracError):
    kind = "PolylineNotSnappable"


class CrackTouchesBoundaryTip(DicfracError):
    kind = "CrackTouchesBoundaryTip"


# --- solver ----------------------------------------------------------------

class SingularSystem(DicfracError):
    kind = "SingularSystem"


class NonFiniteInput(DicfracError):
    kind = "NonFiniteInput"


class NoConvergence(DicfracError):
    kind = "NoConvergence"


# --- fracture --------------------------------------------------------------

class ContourHitsMaskOnly(DicfracError):
    kind = "ContourHitsMaskOnly"


class ElastoplasticSolution(DicfracError):
    kind = "ElastoplasticSolution"


class NoOutOfPlaneData(DicfracError):
    kind = "NoOutOfPlaneData"


class LengthMismatch(DicfracError):
    kind = "LengthMismatch"
