"""Timestamped event log emitted by the engine.

The log is reproducible byte for byte from (config, seed): timestamps are
integer nanoseconds and the writer uses fixed formatting.  Trial annotations
are implicit in the layout: source trials occupy indices [0, n_source_trials),
noise-only readout trials follow, and a trial is heralded exactly when it
contains an idler event.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .events import Channel

LOG_HEADER = "# entlink-eventlog v1"


class EventLogFormatError(ValueError):
    """Raised when an event-log file cannot be parsed."""


@dataclass
class EventLog:
    """Columnar detection events plus the gate metadata needed for analysis.

    Attributes:
        window: native coincidence window in seconds; per-trial gates are
            centered at trial_start + window/2 (idler) and additionally
            shifted by signal_gate_offset (signal).
        noise_margin: half-span, in units of the window, over which flat
            background and readout noise were generated around each gate.
        counters: provenance tallies (pairs emitted, detected signals by
            origin) used for energy accounting.
    """

    config_digest: str
    seed: int
    experiment: str
    n_source_trials: int
    n_noise_trials: int
    trial_spacing_ns: int
    window_ns: int
    signal_gate_offset_ns: int
    noise_margin: float
    channels: np.ndarray
    timestamps_ns: np.ndarray
    trial_indices: np.ndarray
    counters: dict[str, int] = field(default_factory=dict)
    config_json: str = ""

    # -- derived views -----------------------------------------------------

    @property
    def window(self) -> float:
        return self.window_ns * 1e-9

    @property
    def signal_gate_offset(self) -> float:
        return self.signal_gate_offset_ns * 1e-9

    @property
    def n_events(self) -> int:
        return int(self.timestamps_ns.size)

    def _mask(self, channel: Channel) -> np.ndarray:
        return self.channels == int(channel)

    def _gate_center_ns(self, trials: np.ndarray, signal: bool) -> np.ndarray:
        # Trial k starts at (k + 1) * spacing; the shift keeps early signal
        # tails of the first trial at positive timestamps.
        center = (trials.astype(np.int64) + 1) * self.trial_spacing_ns + self.window_ns // 2
        if signal:
            center = center + self.signal_gate_offset_ns
        return center

    @property
    def idler_times(self) -> np.ndarray:
        return self.timestamps_ns[self._mask(Channel.IDLER)] * 1e-9

    @property
    def idler_trial_indices(self) -> np.ndarray:
        return self.trial_indices[self._mask(Channel.IDLER)]

    @property
    def idler_gate_centers(self) -> np.ndarray:
        return self._gate_center_ns(self.idler_trial_indices, signal=False) * 1e-9

    @property
    def signal_times(self) -> np.ndarray:
        return self.timestamps_ns[self._mask(Channel.SIGNAL)] * 1e-9

    @property
    def signal_trial_indices(self) -> np.ndarray:
        return self.trial_indices[self._mask(Channel.SIGNAL)]

    @property
    def signal_gate_centers(self) -> np.ndarray:
        return self._gate_center_ns(self.signal_trial_indices, signal=True) * 1e-9

    @property
    def heralded_trials(self) -> np.ndarray:
        return np.unique(self.idler_trial_indices)

    def digest_line(self) -> str:
        return f"# config_digest={self.config_digest} seed={self.seed}"


_CHANNEL_CODE = {int(Channel.IDLER): "I", int(Channel.SIGNAL): "S"}
_CODE_CHANNEL = {"I": int(Channel.IDLER), "S": int(Channel.SIGNAL)}


def write_event_log(log: EventLog, path: str | Path) -> None:
    """Write a log as plain text: manifest lines, then one event per line."""
    lines = [LOG_HEADER, log.digest_line()]
    lines.append(f"# experiment={log.experiment}")
    lines.append(f"# n_source_trials={log.n_source_trials}")
    lines.append(f"# n_noise_trials={log.n_noise_trials}")
    lines.append(f"# trial_spacing_ns={log.trial_spacing_ns}")
    lines.append(f"# window_ns={log.window_ns}")
    lines.append(f"# signal_gate_offset_ns={log.signal_gate_offset_ns}")
    lines.append(f"# noise_margin={log.noise_margin!r}")
    for key in sorted(log.counters):
        lines.append(f"# counter_{key}={log.counters[key]}")
    if log.config_json:
        lines.append(f"# config={log.config_json}")
    lines.append("# columns=channel timestamp_ns trial_index")
    out = []
    for ch, ts, tr in zip(log.channels, log.timestamps_ns, log.trial_indices):
        out.append(f"{_CHANNEL_CODE[int(ch)]} {int(ts)} {int(tr)}")
    Path(path).write_text("\n".join(lines + out) + "\n")


def read_event_log(path: str | Path) -> EventLog:
    """Parse an event-log file; malformed records report their index."""
    text = Path(path).read_text()
    meta: dict[str, str] = {}
    channels: list[int] = []
    timestamps: list[int] = []
    trials: list[int] = []
    lines = text.splitlines()
    if not lines or lines[0] != LOG_HEADER:
        raise EventLogFormatError("missing event-log header")
    record = 0
    for line in lines[1:]:
        if not line:
            continue
        if line.startswith("# "):
            body = line[2:]
            if "=" in body:
                key, _, value = body.partition("=")
                meta[key] = value
            continue
        parts = line.split()
        if len(parts) != 3 or parts[0] not in _CODE_CHANNEL:
            raise EventLogFormatError(f"corrupt record at index {record}")
        try:
            channels.append(_CODE_CHANNEL[parts[0]])
            timestamps.append(int(parts[1]))
            trials.append(int(parts[2]))
        except ValueError as exc:
            raise EventLogFormatError(f"corrupt record at index {record}") from exc
        record += 1
    required = (
        "config_digest",
        "n_source_trials",
        "n_noise_trials",
        "trial_spacing_ns",
        "window_ns",
        "signal_gate_offset_ns",
    )
    for key in required:
        if key not in meta:
            raise EventLogFormatError(f"manifest missing {key}")
    digest, _, seed_part = meta["config_digest"].partition(" seed=")
    counters = {
        key[len("counter_"):]: int(value)
        for key, value in meta.items()
        if key.startswith("counter_")
    }
    return EventLog(
        config_digest=digest,
        seed=int(seed_part or 0),
        experiment=meta.get("experiment", ""),
        n_source_trials=int(meta["n_source_trials"]),
        n_noise_trials=int(meta["n_noise_trials"]),
        trial_spacing_ns=int(meta["trial_spacing_ns"]),
        window_ns=int(meta["window_ns"]),
        signal_gate_offset_ns=int(meta["signal_gate_offset_ns"]),
        noise_margin=float(meta.get("noise_margin", "1.5")),
        channels=np.asarray(channels, dtype=np.uint8),
        timestamps_ns=np.asarray(timestamps, dtype=np.int64),
        trial_indices=np.asarray(trials, dtype=np.int64),
        counters=counters,
        config_json=meta.get("config", ""),
    )
