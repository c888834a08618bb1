"""Exception types shared across the toolkit."""


class TsexError(Exception):
    """Base class for all toolkit errors."""


class UnsupportedFormatError(TsexError):
    """WAV file is not mono 16-bit integer PCM."""


class CorruptHeaderError(TsexError):
    """File is not a parseable RIFF/WAVE container."""


class SignalTooShortError(TsexError):
    """Signal shorter than one analysis window."""


class ShapeMismatchError(TsexError):
    """Operands have incompatible time-frequency shapes."""


class EmptyInputError(TsexError):
    """Operation received an empty matrix or sequence."""


class SilentSignalError(TsexError):
    """Signal RMS is too small to scale against."""


class EmptyCorpusError(TsexError):
    """No usable speakers found under the corpus root."""


class MissingGenderError(TsexError):
    """Speaker present in the corpus but absent from the gender map."""


class InsufficientSpeakersError(TsexError):
    """Fewer than two speakers available for mixing."""


class ConditioningMismatchError(TsexError):
    """Conditioning vector does not match the network mode."""


class LengthMismatchError(TsexError):
    """Waveforms being compared have different lengths."""


class SilentReferenceError(TsexError):
    """Reference signal has no energy after mean removal."""


class MissingExtractionError(TsexError):
    """No extracted WAV found for a manifest record."""


class NonFiniteGradientError(TsexError):
    """A gradient tensor contains NaN or Inf; the update step is aborted."""


class DataError(TsexError):
    """A manifest references a file that cannot be read."""


class DivergedError(TsexError):
    """Training loss became non-finite."""
