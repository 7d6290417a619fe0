"""Packet detection and timing from the matched-filtered baseband stream."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import dsp
from .tx import ModemConfig, packet_layout, pilot_waveform

DETECTION_THRESHOLD = 0.3


@dataclass(frozen=True)
class SyncResult:
    data_start_index: int
    peak_metric: float
    detected: bool
    pilot_index: int = 0


def _pilot_to_data(config: ModemConfig) -> int:
    """Samples from pilot start to the centre of the first data symbol."""
    return packet_layout(config, 1).first_symbol_center


def normalized_correlation(received, template) -> np.ndarray:
    """``|corr| / (||window|| * ||template||)`` for every alignment."""
    x = received.samples if isinstance(received, dsp.BasebandSignal) else np.asarray(received)
    t = np.asarray(template)
    corr = np.abs(dsp.cross_correlate(x, t))
    e = np.concatenate([[0.0], np.cumsum(np.abs(x) ** 2)])
    win = e[len(t):] - e[: len(e) - len(t)]
    floor = 1e-12 * max(float(win.max(initial=0.0)), 1e-300)
    norm = np.sqrt(np.where(win > floor, win, np.inf)) * np.linalg.norm(t)
    return corr / norm


def detect_pilot(received: dsp.BasebandSignal, pilot_template=None,
                 config: ModemConfig | None = None,
                 threshold: float = DETECTION_THRESHOLD) -> SyncResult:
    """Locate the pilot by normalized cross-correlation.

    ``received`` is the matched-filtered baseband from :func:`dsp.downconvert`;
    the template defaults to the RRC-shaped Frank pilot.
    """
    config = config or ModemConfig()
    if pilot_template is None:
        pilot_template = pilot_waveform(config).baseband.samples
    if len(received) < len(pilot_template):
        raise ValueError("received stream shorter than pilot template")
    metric = normalized_correlation(received, pilot_template)
    peak = int(np.argmax(metric))
    value = float(metric[peak])
    start = peak + _pilot_to_data(config)
    detected = value >= threshold and start < len(received)
    return SyncResult(min(start, len(received) - 1), value, bool(detected), peak)


def refine_timing(received: dsp.BasebandSignal, coarse: SyncResult,
                  config: ModemConfig | None = None, pilot_template=None) -> SyncResult:
    """Search +-L/2 samples around a coarse estimate at full resolution."""
    config = config or ModemConfig()
    if not coarse.detected:
        raise ValueError("refine_timing needs a detected coarse estimate")
    if pilot_template is None:
        pilot_template = pilot_waveform(config).baseband.samples
    t = np.asarray(pilot_template)
    x = received.samples
    half = config.L // 2
    lo = max(coarse.pilot_index - half, 0)
    hi = min(coarse.pilot_index + half, len(x) - len(t))
    tn = np.linalg.norm(t)
    best, best_val = coarse.pilot_index, -1.0
    for k in range(lo, hi + 1):
        w = x[k: k + len(t)]
        wn = np.linalg.norm(w)
        if wn == 0:
            continue
        val = abs(np.vdot(t, w)) / (wn * tn)
        if val > best_val:
            best, best_val = k, val
    return replace(
        coarse,
        pilot_index=best,
        data_start_index=best + _pilot_to_data(config),
        peak_metric=float(best_val),
    )
