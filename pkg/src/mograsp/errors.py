"""Exception types raised across the package."""


class MograspError(Exception):
    """Base class for all package errors."""


class DegenerateInput(MograspError, ValueError):
    """Geometric input is collinear, coincident, too small, or not convex."""


class NoStableGrasp(MograspError):
    """No sampled contact pair satisfies the friction-cone equilibrium test."""


class PlacementFailure(MograspError):
    """Scene generation could not place an object without overlap."""


class EncodingError(MograspError, ValueError):
    """An object group cannot be packed into the fixed-size feature vector."""


class DegenerateDataset(MograspError):
    """Too few positive examples to train a binary classifier."""


class SchemaError(MograspError, ValueError):
    """A persisted file has an unknown or mismatched schema tag."""


class ConfigError(MograspError, ValueError):
    """Configuration value failed validation."""
