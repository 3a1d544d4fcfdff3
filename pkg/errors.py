"""
Exception hierarchy for the Loud-loss engine
Input problems derive from InputError so the CLI can map them to exit code 2
"""


class LoudLossError(Exception):
    """Root of every error raised by this package"""


class InputError(LoudLossError, ValueError):
    """Bad input data, arguments or configuration"""


class ConfigError(InputError):
    """Invalid environment setting"""


class InvalidConfig(InputError):
    """Inconsistent STFT, partition or loss configuration"""


# audio_io
class MalformedWav(InputError):
    pass


class UnsupportedFormat(InputError):
    pass


class SampleRateMismatch(InputError):
    pass


class IoFailure(LoudLossError, OSError):
    """Filesystem read/write failed"""


# spectrum
class ClipTooShort(InputError):
    pass


class ShapeMismatch(InputError):
    pass


# melbands
class NegativeFrequency(InputError):
    pass


class NegativeMel(InputError):
    pass


class DegenerateBand(InputError):
    """Two partition boundaries mapped to the same bin"""


class BinOutOfRange(InputError):
    pass


# loss_engine
class EmptyBand(InputError):
    pass


class WeightCountMismatch(InputError):
    pass


class InvalidAlpha(InputError):
    pass


class LengthMismatch(InputError):
    pass


# metrics
class SilentReference(InputError):
    pass


class OrthogonalEstimate(InputError):
    """Estimate has no component along the reference"""


# trainer_demo
class DivergenceDetected(LoudLossError, RuntimeError):
    pass
