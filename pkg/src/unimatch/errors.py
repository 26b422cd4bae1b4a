"""Exception taxonomy shared by all unimatch modules."""


class UnimatchError(Exception):
    """Base class for all errors raised by this package."""


class InputError(UnimatchError):
    """Invalid input values: non-finite entries, duplicate ids, missing labels."""


class ParameterError(UnimatchError):
    """Out-of-range or inconsistent parameters."""


class SizeError(UnimatchError):
    """Dimension mismatches and size-guard violations."""


class FormatError(UnimatchError):
    """Malformed file content; message names the offending offset or line."""


class IntegrityError(UnimatchError):
    """Structurally valid data that violates a cross-field consistency rule."""


class ProtocolError(UnimatchError):
    """Evaluation protocol cannot be applied to the given outcome."""


class ConfigError(UnimatchError):
    """Pipeline configuration incompatible with the provided dataset."""


class InfeasibleOneShotError(ConfigError):
    """One-shot matching requested with more probes than gallery images."""
