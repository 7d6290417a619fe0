"""Transmitter: modem configuration, constellation mapping, Frank pilot and
packet waveform assembly."""

from __future__ import annotations

from dataclasses import dataclass, fields, replace
from functools import lru_cache

import numpy as np

from . import dsp
from .frames import Packet, bits_per_symbol, DEFAULT_MAX_DATA_BITS

SUPPORTED_ORDERS = (2, 4, 16, 64, 256, 1024)


class ConfigError(ValueError):
    """A configuration violates one of its invariants."""


@dataclass(frozen=True)
class ModemConfig:
    """Signal-chain parameters. Defaults are the 19 kHz / 2 kBd QPSK setup."""

    f_c: float = 19000.0
    f_b: float = 2000.0
    f_s: float = 48000.0
    beta: float = 0.3
    M: int = 4
    ff_noncausal: int = 8
    ff_causal: int = 20
    fb_taps: int = 80
    training_fraction: float = 0.3
    guard_seconds: float = 0.3
    frank_order: int = 16
    tx_amplitude: float = 0.9
    span_symbols: int = 12
    max_data_bits: int = DEFAULT_MAX_DATA_BITS

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.f_b <= 0 or self.f_s <= 0 or self.f_c <= 0:
            raise ConfigError("f_c, f_b and f_s must be positive")
        if not 0.0 < self.beta <= 1.0:
            raise ConfigError(f"beta in (0, 1] violated: beta={self.beta}")
        need = 2.0 * self.f_b * (1.0 + self.beta)
        if self.f_s < need:
            raise ConfigError(
                f"f_s >= 2*f_b*(1+beta) violated: f_s={self.f_s:g} < {need:g}"
            )
        ratio = self.f_s / self.f_b
        if abs(ratio - round(ratio)) > 1e-9:
            raise ConfigError(f"f_s mod f_b = 0 violated: f_s/f_b = {ratio:g}")
        if self.M not in SUPPORTED_ORDERS:
            raise ConfigError(f"M in {SUPPORTED_ORDERS} violated: M={self.M}")
        if self.frank_order < 1:
            raise ConfigError(f"frank_order >= 1 violated: {self.frank_order}")
        if not 0.0 < self.training_fraction < 1.0:
            raise ConfigError(f"training_fraction in (0, 1) violated: {self.training_fraction}")
        if not 0.0 < self.tx_amplitude <= 1.0:
            raise ConfigError(f"tx_amplitude in (0, 1] violated: {self.tx_amplitude}")
        if self.guard_seconds < 0:
            raise ConfigError("guard_seconds >= 0 violated")
        if min(self.ff_noncausal, self.ff_causal, self.fb_taps) < 0:
            raise ConfigError("tap counts must be non-negative")
        if self.span_symbols < 4 or self.span_symbols % 2:
            raise ConfigError(f"span_symbols even and >= 4 violated: {self.span_symbols}")
        half = self.halfband
        if self.f_c - half < 0 or self.f_c + half > self.f_s / 2:
            raise ConfigError(
                f"occupied band [{self.f_c - half:g}, {self.f_c + half:g}] Hz "
                f"exceeds Nyquist band [0, {self.f_s / 2:g}] Hz"
            )

    @property
    def L(self) -> int:
        return int(round(self.f_s / self.f_b))

    @property
    def bits_per_symbol(self) -> int:
        return bits_per_symbol(self.M)

    @property
    def halfband(self) -> float:
        return dsp.occupied_halfband(self.f_b, self.beta)

    @property
    def band(self) -> tuple[float, float]:
        return (self.f_c - self.halfband, self.f_c + self.halfband)

    @property
    def guard_samples(self) -> int:
        return int(round(self.guard_seconds * self.f_s))

    @property
    def rate(self) -> float:
        return data_rate(self)

    def replace(self, **changes) -> "ModemConfig":
        return replace(self, **changes)

    @classmethod
    def field_types(cls) -> dict[str, type]:
        hints = {"float": float, "int": int}
        return {f.name: hints[f.type] if isinstance(f.type, str) else f.type for f in fields(cls)}


def data_rate(config: ModemConfig) -> float:
    """Bit rate ``f_b * log2(M)``."""
    return config.f_b * np.log2(config.M)


@lru_cache(maxsize=16)
def _rrc_cached(beta: float, L: int, span: int) -> dsp.FilterTaps:
    return dsp.design_rrc(beta, L, span)


def rrc_for(config: ModemConfig) -> dsp.FilterTaps:
    return _rrc_cached(config.beta, config.L, config.span_symbols)


def frank_code(order: int) -> np.ndarray:
    """Frank polyphase sequence of length ``order**2``.

    Chip ``n*order + m`` is ``exp(2j*pi*n*m/order)``.
    """
    if order < 1:
        raise ValueError("Frank code order must be >= 1")
    n, m = np.divmod(np.arange(order * order), order)
    # exact integer phase reduction keeps chips on the unit circle
    return np.exp(2j * np.pi * ((n * m) % order) / order)


@dataclass(frozen=True)
class PilotWaveform:
    chips: np.ndarray
    order: int
    baseband: dsp.BasebandSignal
    passband: dsp.PassbandWaveform


def pilot_waveform(config: ModemConfig) -> PilotWaveform:
    """Frank pilot shaped at the symbol rate with the data RRC."""
    chips = frank_code(config.frank_order)
    bb = dsp.shape_symbols(chips, rrc_for(config), config.L, config.f_s)
    pb = dsp.upconvert(bb, config.f_c, config.halfband)
    return PilotWaveform(chips, config.frank_order, bb, pb)


def _pam_levels(m: int) -> np.ndarray:
    """Amplitude for each Gray-coded ``m``-level PAM label."""
    pos = np.arange(m)
    gray = pos ^ (pos >> 1)
    levels = np.empty(m)
    levels[gray] = (m - 1) - 2.0 * pos
    return levels


@lru_cache(maxsize=None)
def constellation(M: int) -> np.ndarray:
    """Unit-average-energy Gray-coded points indexed by symbol label.

    ``M=2`` is BPSK on the real axis. Square QAM splits each label into
    high bits (in-phase) and low bits (quadrature).
    """
    if M not in SUPPORTED_ORDERS:
        raise ValueError(f"unsupported modulation order M={M}")
    if M == 2:
        pts = np.array([1.0 + 0j, -1.0 + 0j])
    else:
        k = bits_per_symbol(M) // 2
        side = 1 << k
        lv = _pam_levels(side)
        idx = np.arange(M)
        pts = lv[idx >> k] + 1j * lv[idx & (side - 1)]
        pts = pts / np.sqrt(2.0 * (M - 1) / 3.0)
    pts.setflags(write=False)
    return pts


def map_symbols(indices, M: int) -> np.ndarray:
    idx = np.asarray(indices, dtype=np.int64)
    pts = constellation(M)
    if idx.size and (idx.min() < 0 or idx.max() >= M):
        raise ValueError(f"symbol index outside [0, {M})")
    return pts[idx]


@lru_cache(maxsize=None)
def _pam_slicer(side: int):
    lv = _pam_levels(side)
    # label of each amplitude position, ordered from the lowest amplitude
    order = np.argsort(lv)
    return lv[order], order


def slice_indices(soft, M: int) -> np.ndarray:
    """Nearest-point decisions, returned as symbol labels."""
    y = np.asarray(soft, dtype=complex)
    if M == 2:
        return (y.real < 0).astype(np.int64)
    k = bits_per_symbol(M) // 2
    side = 1 << k
    scale = np.sqrt(2.0 * (M - 1) / 3.0)
    sorted_lv, labels = _pam_slicer(side)

    def axis(v):
        pos = np.clip(np.round((v * scale + (side - 1)) / 2.0), 0, side - 1).astype(np.int64)
        return labels[pos]

    return (axis(y.real) << k) | axis(y.imag)


def slice_symbols(soft, M: int) -> np.ndarray:
    return constellation(M)[slice_indices(soft, M)]


@dataclass(frozen=True)
class PacketLayout:
    """Sample positions inside a transmitted packet waveform."""

    pilot_samples: int
    guard_samples: int
    n_symbols: int
    L: int
    filter_delay: int

    @property
    def data_offset(self) -> int:
        return self.pilot_samples + self.guard_samples

    @property
    def first_symbol_center(self) -> int:
        return self.data_offset + self.filter_delay

    @property
    def data_samples(self) -> int:
        return (self.n_symbols - 1) * self.L + 2 * self.filter_delay + 1

    @property
    def total_samples(self) -> int:
        return self.data_offset + self.data_samples


def packet_layout(config: ModemConfig, n_symbols: int) -> PacketLayout:
    taps = rrc_for(config)
    n_chips = config.frank_order ** 2
    pilot = (n_chips - 1) * config.L + len(taps)
    return PacketLayout(pilot, config.guard_samples, n_symbols, config.L, taps.delay)


def packet_baseband(packet: Packet, config: ModemConfig) -> np.ndarray:
    """Unscaled complex baseband: shaped pilot, silent guard, shaped data."""
    if packet.bits_per_symbol != config.bits_per_symbol:
        raise ValueError("packet was framed for a different modulation order")
    taps = rrc_for(config)
    data = map_symbols(packet.symbol_indices(), config.M)
    pilot = pilot_waveform(config).baseband.samples
    shaped = dsp.shape_symbols(data, taps, config.L).samples
    return np.concatenate([pilot, np.zeros(config.guard_samples, complex), shaped])


def build_packet_waveform(packet: Packet, config: ModemConfig) -> dsp.PassbandWaveform:
    """Assemble the passband packet, peak-normalized to ``tx_amplitude``.

    The carrier runs continuously across pilot, guard and data.
    """
    bb = dsp.BasebandSignal(packet_baseband(packet, config), config.f_s)
    x = dsp.upconvert(bb, config.f_c, config.halfband).samples
    x *= config.tx_amplitude / np.max(np.abs(x))
    return dsp.PassbandWaveform(x, config.f_s)
