"""Signal-processing primitives shared by the transmitter and receiver.

Root-raised-cosine design, pulse shaping by polyphase upsampling, carrier
mixing, matched filtering and complex cross-correlation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import signal as sps


@dataclass(frozen=True)
class FilterTaps:
    """Symmetric unit-energy FIR taps spanning ``span_symbols`` symbols."""

    taps: np.ndarray
    span_symbols: int
    samples_per_symbol: int
    beta: float

    def __len__(self):
        return len(self.taps)

    @property
    def delay(self) -> int:
        """Group delay in samples (index of the center tap)."""
        return (len(self.taps) - 1) // 2


@dataclass(frozen=True)
class BasebandSignal:
    samples: np.ndarray
    sample_rate: float

    def __post_init__(self):
        x = np.asarray(self.samples, dtype=complex)
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")
        if not np.all(np.isfinite(x)):
            raise ValueError("baseband samples must be finite")
        object.__setattr__(self, "samples", x)

    def __len__(self):
        return len(self.samples)


@dataclass(frozen=True)
class PassbandWaveform:
    samples: np.ndarray
    sample_rate: float

    def __post_init__(self):
        x = np.asarray(self.samples)
        if np.iscomplexobj(x):
            raise ValueError("passband waveform must be real")
        x = x.astype(float, copy=False)
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")
        if not np.all(np.isfinite(x)):
            raise ValueError("passband samples must be finite")
        object.__setattr__(self, "samples", x)

    def __len__(self):
        return len(self.samples)

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate


def _rrc_impulse(t: np.ndarray, beta: float) -> np.ndarray:
    """Unnormalized RRC impulse response at times ``t`` in symbol periods."""
    h = np.empty_like(t)
    at_zero = t == 0.0
    at_edge = np.isclose(np.abs(4.0 * beta * t), 1.0, rtol=0.0, atol=1e-12)
    rest = ~(at_zero | at_edge)

    h[at_zero] = 1.0 - beta + 4.0 * beta / np.pi
    a = np.pi / (4.0 * beta)
    h[at_edge] = beta / np.sqrt(2.0) * (
        (1.0 + 2.0 / np.pi) * np.sin(a) + (1.0 - 2.0 / np.pi) * np.cos(a)
    )
    tr = t[rest]
    num = np.sin(np.pi * tr * (1.0 - beta)) + 4.0 * beta * tr * np.cos(np.pi * tr * (1.0 + beta))
    den = np.pi * tr * (1.0 - (4.0 * beta * tr) ** 2)
    h[rest] = num / den
    return h


def design_rrc(beta: float, L: int, span_symbols: int = 12) -> FilterTaps:
    """Design a unit-energy root-raised-cosine filter.

    Parameters
    ----------
    beta : float
        Roll-off factor in (0, 1].
    L : int
        Samples per symbol, at least 2.
    span_symbols : int
        Filter length in symbols; even and at least 4.

    Returns
    -------
    FilterTaps
        ``span_symbols * L + 1`` symmetric taps with unit energy.
    """
    if not 0.0 < beta <= 1.0:
        raise ValueError(f"roll-off beta={beta} outside (0, 1]")
    if L < 2:
        raise ValueError(f"samples per symbol L={L} must be >= 2")
    if span_symbols < 4 or span_symbols % 2:
        raise ValueError(f"span_symbols={span_symbols} must be even and >= 4")
    n = np.arange(span_symbols * L + 1) - span_symbols * L // 2
    h = _rrc_impulse(n / L, beta)
    h = 0.5 * (h + h[::-1])
    h /= np.sqrt(np.sum(h * h))
    return FilterTaps(h, span_symbols, L, float(beta))


def shape_symbols(symbols, taps: FilterTaps, L: int | None = None,
                  sample_rate: float = 1.0) -> BasebandSignal:
    """Upsample ``symbols`` by ``L`` and filter with ``taps``.

    Output length is ``(len(symbols) - 1) * L + len(taps)``; symbol ``k`` is
    centred at sample ``k * L + taps.delay``.
    """
    symbols = np.asarray(symbols, dtype=complex)
    if symbols.size == 0:
        raise ValueError("need at least one symbol")
    L = taps.samples_per_symbol if L is None else L
    out = sps.upfirdn(taps.taps, symbols, up=L)
    return BasebandSignal(out[: (symbols.size - 1) * L + len(taps)], sample_rate)


def occupied_halfband(f_b: float, beta: float) -> float:
    return f_b * (1.0 + beta) / 2.0


def _check_alias(f_c: float, halfband: float, sample_rate: float) -> None:
    hi = f_c + halfband
    lo = f_c - halfband
    if hi > sample_rate / 2.0 or lo < 0.0:
        raise ValueError(
            f"occupied band [{lo:.1f}, {hi:.1f}] Hz does not fit in "
            f"[0, {sample_rate / 2.0:.1f}] Hz at f_s={sample_rate:g}"
        )


def _carrier(n: int, f_c: float, sample_rate: float, sign: float = 1.0) -> np.ndarray:
    # reduce the phase modulo one cycle before exponentiating for long streams
    cycles = np.mod(np.arange(n) * (f_c / sample_rate), 1.0)
    return np.exp(sign * 2j * np.pi * cycles)


def upconvert(baseband: BasebandSignal, f_c: float, halfband: float = 0.0) -> PassbandWaveform:
    """Mix a complex baseband stream up to a real passband at ``f_c``.

    ``halfband`` is the one-sided occupied bandwidth used for the alias check.
    """
    fs = baseband.sample_rate
    _check_alias(f_c, halfband, fs)
    x = np.real(baseband.samples * _carrier(len(baseband), f_c, fs))
    return PassbandWaveform(x, fs)


def matched_filter(x: np.ndarray, taps: FilterTaps) -> np.ndarray:
    """Filter with ``taps`` and compensate the group delay (same-length output)."""
    y = sps.oaconvolve(x, taps.taps) if len(x) > 4 * len(taps) else np.convolve(x, taps.taps)
    return y[taps.delay: taps.delay + len(x)]


def downconvert(waveform: PassbandWaveform, f_c: float, taps: FilterTaps,
                L: int | None = None) -> BasebandSignal:
    """Mix a passband waveform to baseband and apply the matched RRC filter.

    The output keeps the input sample rate and alignment: a symbol centred at
    sample ``n`` of the transmitted baseband is centred at sample ``n`` of the
    output, with the raised-cosine (RRC x RRC) response.
    """
    fs = waveform.sample_rate
    L = taps.samples_per_symbol if L is None else L
    _check_alias(f_c, occupied_halfband(fs / L, taps.beta), fs)
    mixed = 2.0 * waveform.samples * _carrier(len(waveform), f_c, fs, sign=-1.0)
    return BasebandSignal(matched_filter(mixed, taps), fs)


def cross_correlate(signal_, template) -> np.ndarray:
    """Sliding correlation ``out[k] = sum_m signal[k+m] * conj(template[m])``.

    Returns ``len(signal) - len(template) + 1`` values, unnormalized.
    """
    x = signal_.samples if isinstance(signal_, BasebandSignal) else np.asarray(signal_)
    t = np.asarray(template)
    if len(t) > len(x):
        raise ValueError("template longer than signal")
    return sps.correlate(x.astype(complex), t.astype(complex), mode="valid")


def band_energy(x: np.ndarray, sample_rate: float, lo: float, hi: float) -> float:
    """Energy of a real signal within ``[lo, hi]`` Hz (both spectral sides)."""
    x = np.asarray(x, dtype=float)
    spec = np.fft.rfft(x)
    f = np.fft.rfftfreq(len(x), 1.0 / sample_rate)
    w = np.full(len(f), 2.0)
    w[0] = 1.0
    if len(x) % 2 == 0:
        w[-1] = 1.0
    sel = (f >= lo) & (f <= hi)
    return float(np.sum(w[sel] * np.abs(spec[sel]) ** 2) / len(x))
