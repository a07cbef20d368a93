"""Detection-event records shared by the simulation engine and the estimators."""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum


class Channel(IntEnum):
    """Detector channel. Integer-valued so event tables can be stored as arrays."""

    IDLER = 0
    SIGNAL = 1


@dataclass(frozen=True, order=True)
class DetectionEvent:
    """A single detector click.

    Timestamps are simulated laboratory time in seconds.  Within one trial the
    engine emits events with non-decreasing timestamps.
    """

    channel: Channel
    timestamp: float
    trial_index: int


class ParameterError(ValueError):
    """Raised when a physical parameter is outside its allowed range."""


class ConfigError(ValueError):
    """Raised when an experiment configuration is inconsistent."""
