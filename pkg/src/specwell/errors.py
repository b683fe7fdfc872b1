"""Exception and warning types shared across the package.

Every failure mode that callers are expected to branch on gets its own
class; all inherit from SpecwellError so blanket handling stays possible.
"""


class SpecwellError(Exception):
    """Base class for all package-specific errors."""


# -- potential geometry -------------------------------------------------

class DegenerateCritical(SpecwellError):
    """Critical point flatter than the supported order (> 4)."""


class DuplicateCriticalValue(SpecwellError):
    """Two critical points share a value within tolerance."""


class OutOfBand(SpecwellError):
    """Requested energy lies outside the valid band."""


class NotSingleWell(SpecwellError):
    """Sublevel set is not a single interval where one was required."""


class BranchViolation(SpecwellError):
    """Turning-point branch data violate monotonicity (|F'| >= G')."""


class UnknownName(SpecwellError):
    """Library model name not recognized."""


# -- forward solver ------------------------------------------------------

class BoxTooSmall(SpecwellError):
    """Eigenfunction mass detected at the computational box boundary."""


class NotConverged(SpecwellError):
    """Grid refinement still moves retained eigenvalues too much."""


class NonPositiveCoefficient(SpecwellError):
    """Divergence-form coefficient must be strictly positive."""


class AboveCutoff(SpecwellError):
    """Energy argument at or above the spectrum cutoff."""


class InsufficientData(SpecwellError):
    """Not enough eigenvalues (or table rows) for the requested fit."""


class HbarMismatch(SpecwellError):
    """Operation mixing spectra whose hbar values must differ (or agree)."""


class IndexMismatch(SpecwellError):
    """Eigenvalue counts differ beyond the configured slack."""


# -- action extraction / band analysis -----------------------------------

class TooCloseToCritical(SpecwellError):
    """Evaluation point too close to a critical value for the stencil."""


class NonMonotoneAction(SpecwellError):
    """Total action fails to increase across the window."""


class ResolutionTooCoarse(SpecwellError):
    """Grid or smoothing width cannot resolve the requested feature."""


class SupportViolation(SpecwellError):
    """Test-function support extends outside the covered energy range."""


class InsufficientLadder(SpecwellError):
    """Fewer hbar rungs than the fit needs."""


class IndexingAmbiguity(SpecwellError):
    """Counting functions inconsistent with a single well on the window."""


class WindowTooWide(SpecwellError):
    """Period variation across the window exceeds the broadening budget."""


class UnresolvedPeriods(SpecwellError):
    """Oscillation peaks of distinct wells cannot be separated."""


class AssignmentConflict(SpecwellError):
    """Two wells claim the same eigenvalue with near-equal scores."""


# -- inversion ------------------------------------------------------------

class NotInRange(SpecwellError):
    """Argument outside the table range."""


class NonpositiveE0(SpecwellError):
    """Divergence-form inversion requires E0 > 0."""


class NegativeCurvature(SpecwellError):
    """Curvature estimate at a minimum came out non-positive."""


class NegativeFp2(SpecwellError):
    """F'^2 fell below the clamp tolerance (inconsistent action data)."""


class DivisionFloor(SpecwellError):
    """Division by a profile smaller than the configured floor."""


class OrderUndetermined(SpecwellError):
    """Vanishing-order fit at a zero of F'^2 is unusable."""


class DegreeTooHigh(SpecwellError):
    """Taylor fit degree beyond the supported maximum."""


class KinkClassificationAmbiguous(SpecwellError):
    """Area-slope feature matches no critical-point signature cleanly."""


class BandTooThin(SpecwellError):
    """Band narrower than twice the working margin."""


class MultipleSolutions(UserWarning):
    """Reconstruction ambiguous; a representative was returned."""
