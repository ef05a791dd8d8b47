"""Exception hierarchy shared across the toolkit.

Exit-code mapping used by the CLI: SchemaError family -> 2,
DimensionMismatch -> 3, infeasible-where-required -> 4, I/O -> 5.
"""


class QuadcalError(Exception):
    """Base class for all toolkit errors."""


class SchemaError(QuadcalError):
    """Model or dataset file violates the documented schema."""


class NonFiniteWeight(SchemaError):
    """Model file contains NaN or infinite entries."""


class DimensionMismatch(QuadcalError):
    """Array shapes inconsistent with the model's input mode."""


class KindMismatch(QuadcalError):
    """Binary operation applied to a multiclass model or vice versa."""


class EmptyInput(QuadcalError):
    """Operation requires at least one point / sample."""


class NonFinitePoint(QuadcalError):
    """Planar geometry input contains NaN or infinite coordinates."""


class ZeroDirection(QuadcalError):
    """Directional margin requested along the zero vector."""


class EmptyClass(QuadcalError):
    """A per-class point set is empty."""


class InfeasibleCertificate(QuadcalError):
    """Quantization check requires a feasible separation certificate."""


class NoOffsetControl(QuadcalError):
    """Output-weight sum B is zero, so the constant offset cannot shift scores."""


class InvalidCap(QuadcalError):
    """Reduced-hull cap outside [1/n, 1]."""


class DegenerateContact(QuadcalError):
    """Primal recovery requested at zero hull distance."""


class InvalidPenalty(QuadcalError):
    """Soft-margin penalty must be positive."""


class SingleClassCalibration(QuadcalError):
    """Calibration set contains fewer than two target classes."""


class NotHardRegime(QuadcalError):
    """Quantization certification applies to hard-regime binary fits only."""


class DegenerateInterval(QuadcalError):
    """Polynomial fit interval has zero length."""


class LengthMismatch(QuadcalError):
    """Decision vectors being compared have different lengths."""


class ShapeError(QuadcalError):
    """CKKS task shape invalid (e.g. hidden width exceeds slot count)."""
