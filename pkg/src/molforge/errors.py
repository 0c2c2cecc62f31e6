"""Exception types shared across the package."""


class MolforgeError(Exception):
    """Base class for all package-specific errors."""


class IndexOutOfRange(MolforgeError):
    """Equation index outside the 1..52 catalog."""


class SlotMismatch(MolforgeError):
    """Numeric slot count disagrees with the payload arity."""


class StiffnessFailure(MolforgeError):
    """Adaptive ODE step size underflowed."""


class NonFinite(MolforgeError):
    """A solver or model produced NaN/Inf values."""


class CFLViolation(MolforgeError):
    """Finite-volume time step underflowed."""


class TemplateExhausted(MolforgeError):
    """Fewer than the required number of distinct descriptions could be formed."""


class EmptyCorpus(MolforgeError):
    """Vocabulary construction received an empty corpus."""


class UnknownToken(MolforgeError):
    """A token outside the closed-world vocabulary was encountered."""


class InvalidId(MolforgeError):
    """A token id outside the vocabulary range."""


class SequenceTooLong(MolforgeError):
    """Token sequence exceeds the configured maximum length."""


class ShapeMismatch(MolforgeError):
    """Tensor shapes are inconsistent for the requested operation."""


class DisconnectedGraph(MolforgeError):
    """Backward was called on a value with no recorded computation graph."""


class DegenerateTarget(MolforgeError):
    """Numeric loss target has (near-)zero norm."""


class ZeroNormTarget(MolforgeError):
    """Relative error is undefined for a zero-norm ground truth."""


class EmptySentence(MolforgeError):
    """Text similarity scoring needs non-empty token lists."""


class UnsupportedFamily(MolforgeError):
    """Family index not allowed for the requested protocol."""


class CorruptRecord(MolforgeError):
    """Stored record failed its checksum or framing check."""


class RejectionRateExceeded(MolforgeError):
    """Too many solver rejections while building a family."""
