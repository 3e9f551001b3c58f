"""Exceptions and warnings shared across the package."""


class ReadoutTimingError(RuntimeError):
    """A red-round observable was read while a cycle was in progress."""


class ChannelClassificationError(RuntimeError):
    """The logical subgroup after one cycle matches none of the known channels."""


class FitError(RuntimeError):
    """Data does not support the requested fit."""


class DecayWindowWarning(Warning):
    """The decay fit window had to be shortened."""


class CollapseWarning(Warning):
    """The collapse optimizer or its bootstrap had trouble."""
