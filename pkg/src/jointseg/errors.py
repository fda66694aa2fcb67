"""Exception types raised across the package.

Every domain error derives from :class:`JointSegError` so the command line
can map them to exit status 1 with a one-line diagnostic.
"""


class JointSegError(Exception):
    pass


class FormatError(JointSegError):
    """Malformed or incomplete MetaImage header."""

    def __init__(self, key, detail=""):
        self.key = key
        msg = f"header key {key!r}"
        super().__init__(f"{msg}: {detail}" if detail else f"{msg} missing or malformed")


class TruncationError(JointSegError):
    pass


class UnsupportedTypeError(JointSegError):
    pass


class ShapeError(JointSegError, ValueError):
    pass


class InvalidModeError(JointSegError, ValueError):
    pass


class EmptyForegroundError(JointSegError, ValueError):
    pass


class DegenerateIntensityError(JointSegError, ValueError):
    pass


class ConfigError(JointSegError, ValueError):
    pass


class ManifestError(JointSegError):
    pass


class SamplingError(JointSegError):
    pass


class TrainingError(JointSegError, RuntimeError):
    pass
