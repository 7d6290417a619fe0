"""Simulated indoor acoustic channel.

Room impulse response convolution, optional carrier phase drift and
additive white Gaussian noise calibrated to an in-band SNR.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import signal as sps

from . import dsp
from .tx import ModemConfig

SPEED_OF_SOUND = 343.0
MAX_IMAGE_ORDER = 30
MAX_CFO_HZ = 5.0


@dataclass(frozen=True)
class RoomImpulseResponse:
    taps: np.ndarray
    sample_rate: float
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        h = np.asarray(self.taps, dtype=float)
        if h.ndim != 1 or h.size == 0:
            raise ValueError("impulse response must be a non-empty 1-D sequence")
        if not np.all(np.isfinite(h)):
            raise ValueError("impulse response taps must be finite")
        if not np.any(h != 0.0):
            raise ValueError("nonzero energy required")
        object.__setattr__(self, "taps", h)

    def __len__(self):
        return len(self.taps)


@dataclass(frozen=True)
class ChannelSpec:
    """``rir=None`` is the identity channel; ``snr_db=inf`` disables noise."""

    rir: RoomImpulseResponse | None = None
    snr_db: float = math.inf
    cfo_hz: float = 0.0
    seed: int | np.random.SeedSequence = 0

    def __post_init__(self):
        if math.isnan(self.snr_db) or self.snr_db == -math.inf:
            raise ValueError("snr_db must be finite (or +inf to disable noise)")
        if abs(self.cfo_hz) > MAX_CFO_HZ:
            raise ValueError(f"|cfo_hz| <= {MAX_CFO_HZ} violated: {self.cfo_hz}")


def multipath_rir(delays_s, gains, sample_rate: float = 48000.0) -> RoomImpulseResponse:
    """Sparse response with linear ``gains`` at integer-sample ``delays_s``."""
    d = np.round(np.asarray(delays_s, dtype=float) * sample_rate).astype(np.int64)
    h = np.zeros(int(d.max()) + 1)
    np.add.at(h, d, np.asarray(gains, dtype=float))
    return RoomImpulseResponse(h, sample_rate, {"kind": "multipath", "delays_s": list(map(float, delays_s)),
                                                "gains": list(map(float, gains))})


def two_path_rir(delay_s: float, gain: float, sample_rate: float = 48000.0) -> RoomImpulseResponse:
    """Direct path plus one echo."""
    return multipath_rir([0.0, delay_s], [1.0, gain], sample_rate)


def noise_variance(signal_power_inband: float, snr_db: float, band: tuple[float, float],
                   sample_rate: float) -> float:
    """Variance of white real noise whose in-band power is ``snr_db`` below the signal's."""
    width = band[1] - band[0]
    return signal_power_inband * sample_rate / (2.0 * width * 10 ** (snr_db / 10.0))


def apply_channel(tx: dsp.PassbandWaveform, spec: ChannelSpec,
                  band: tuple[float, float] | None = None, *, return_info: bool = False):
    """Pass a waveform through the simulated channel.

    Signal power is the in-band energy of the channel output divided by the
    number of non-silent transmit samples, so guard intervals do not dilute
    the SNR. ``band`` defaults to the occupied band of the default modem.
    """
    fs = tx.sample_rate
    band = band or ModemConfig().band
    x = tx.samples
    if spec.rir is None:
        y = x.copy()
    else:
        if abs(spec.rir.sample_rate - fs) > 1e-9:
            raise ValueError(
                f"RIR sample rate {spec.rir.sample_rate:g} Hz does not match waveform {fs:g} Hz"
            )
        y = sps.oaconvolve(x, spec.rir.taps) if len(spec.rir) > 1 else x * spec.rir.taps[0]

    if spec.cfo_hz:
        analytic = sps.hilbert(y)
        cycles = np.mod(np.arange(len(y)) * (spec.cfo_hz / fs), 1.0)
        y = np.real(analytic * np.exp(2j * np.pi * cycles))

    active = max(int(np.count_nonzero(x)), 1)
    p_in = dsp.band_energy(y, fs, *band) / active
    p_all = float(np.sum(y * y)) / active
    info = {"signal_power_inband": p_in, "signal_power": p_all, "noise_var": 0.0,
            "snr_inband_db": math.inf, "snr_broadband_db": math.inf}
    if math.isfinite(spec.snr_db):
        var = noise_variance(p_in, spec.snr_db, band, fs)
        rng = np.random.default_rng(spec.seed)
        y = y + rng.normal(0.0, math.sqrt(var), len(y))
        info.update(noise_var=var, snr_inband_db=spec.snr_db,
                    snr_broadband_db=10 * math.log10(p_all / var))
    out = dsp.PassbandWaveform(y, fs)
    return (out, info) if return_info else out


def _axis_images(src: float, length: float, order: int):
    n = np.arange(-order, order + 1)
    n = np.concatenate([n, n])
    q = np.repeat([0, 1], 2 * order + 1)
    coord = (1 - 2 * q) * src + 2 * n * length
    return coord, np.abs(n - q), np.abs(n)


def image_source_rir(room, src, mic, absorption=0.3, max_order: int = 10,
                     f_s: float = 48000.0, c: float = SPEED_OF_SOUND) -> RoomImpulseResponse:
    """Shoebox room impulse response by the image-source method.

    ``absorption`` is the energy absorption coefficient of each wall, so a
    reflection scales pressure by ``sqrt(1 - a)``. Each image contributes
    ``prod(sqrt(1 - a_w) ** hits_w) / r`` at delay ``r / c``, spread over the
    two neighbouring samples by linear interpolation.

    Parameters
    ----------
    room : (3,) array_like
        Room dimensions in metres.
    src, mic : (3,) array_like
        Positions inside the room.
    absorption : float or (6,) array_like
        Per-wall coefficients in (0, 1], ordered x=0, x=Lx, y=0, y=Ly, z=0, z=Lz.
    max_order : int
        Maximum total number of reflections, at most 30.
    """
    room = np.asarray(room, dtype=float)
    src = np.asarray(src, dtype=float)
    mic = np.asarray(mic, dtype=float)
    if room.shape != (3,) or np.any(room <= 0):
        raise ValueError("room must be three positive dimensions")
    for name, p in (("source", src), ("microphone", mic)):
        if p.shape != (3,) or np.any(p < 0) or np.any(p > room):
            raise ValueError(f"{name} position {p.tolist()} outside room {room.tolist()}")
    if np.allclose(src, mic):
        raise ValueError("source and microphone coincide")
    if not 0 <= max_order <= MAX_IMAGE_ORDER:
        raise ValueError(f"max_order must be in [0, {MAX_IMAGE_ORDER}]")
    a = np.broadcast_to(np.asarray(absorption, dtype=float), (6,))
    if np.any(a <= 0) or np.any(a > 1):
        raise ValueError("absorption coefficients must lie in (0, 1]")
    refl = np.sqrt(1.0 - a)

    ax = [_axis_images(src[d], room[d], max_order) for d in range(3)]
    cx, lx, hx = ax[0]
    cy, ly, hy = ax[1]
    cz, lz, hz = ax[2]
    order = (lx + hx)[:, None, None] + (ly + hy)[None, :, None] + (lz + hz)[None, None, :]
    keep = order <= max_order
    ix, iy, iz = np.nonzero(keep)
    dist = np.sqrt((cx[ix] - mic[0]) ** 2 + (cy[iy] - mic[1]) ** 2 + (cz[iz] - mic[2]) ** 2)
    with np.errstate(divide="ignore"):
        gain = (
            refl[0] ** lx[ix] * refl[1] ** hx[ix]
            * refl[2] ** ly[iy] * refl[3] ** hy[iy]
            * refl[4] ** lz[iz] * refl[5] ** hz[iz]
        )
    amp = gain / dist
    live = amp > 0
    amp, dist = amp[live], dist[live]
    delay = dist / c * f_s
    i0 = np.floor(delay).astype(np.int64)
    frac = delay - i0
    h = np.zeros(int(i0.max()) + 2)
    np.add.at(h, i0, amp * (1.0 - frac))
    np.add.at(h, i0 + 1, amp * frac)
    if h[-1] == 0.0:
        h = h[:-1]
    meta = {"kind": "image-source", "room": room.tolist(), "src": src.tolist(),
            "mic": mic.tolist(), "absorption": a.tolist(), "max_order": max_order}
    return RoomImpulseResponse(h, float(f_s), meta)


def schroeder_rt60(rir: RoomImpulseResponse, start_db: float = -5.0,
                   stop_db: float = -25.0) -> float:
    """RT60 from a linear fit to the Schroeder energy decay curve.

    The fit spans ``start_db`` to ``stop_db`` and is extrapolated to 60 dB.
    A response that drops through the whole range within one sample
    returns 0.
    """
    e = rir.taps ** 2
    edc = np.cumsum(e[::-1])[::-1]
    with np.errstate(divide="ignore"):
        edc_db = 10 * np.log10(edc / edc[0])
    sel = np.nonzero((edc_db <= start_db) & (edc_db >= stop_db))[0]
    if sel.size < 2:
        return 0.0
    t = sel / rir.sample_rate
    slope, _ = np.polyfit(t, edc_db[sel], 1)
    if slope >= 0:
        return math.inf
    return -60.0 / slope


def load_rir(path, f_s: float = 48000.0) -> RoomImpulseResponse:
    """Read a mono PCM impulse response, resample by an integer ratio, peak-normalize."""
    from .wavio import read_wav

    w = read_wav(path)
    h = w.samples
    if not np.any(h != 0):
        raise ValueError("nonzero energy required")
    rate = w.sample_rate
    if abs(rate - f_s) > 1e-9:
        up, down = (f_s / rate, 1.0) if f_s > rate else (1.0, rate / f_s)
        ratio = max(up, down)
        if abs(ratio - round(ratio)) > 1e-9:
            raise ValueError(f"non-integer resampling ratio {rate:g} Hz -> {f_s:g} Hz")
        h = sps.resample_poly(h, int(round(up)), int(round(down)))
    h = h / np.max(np.abs(h))
    return RoomImpulseResponse(h, float(f_s), {"kind": "file", "path": str(path),
                                               "file_rate": rate})


def save_rir(rir: RoomImpulseResponse, path, bits: int = 16) -> None:
    """Write a peak-normalized impulse response as a mono waveform file."""
    from .wavio import write_wav

    h = rir.taps / np.max(np.abs(rir.taps))
    write_wav(path, dsp.PassbandWaveform(h, rir.sample_rate), bits=bits)


CONFERENCE_ROOM = (5.0, 4.0, 3.0)
CONFERENCE_ABSORPTION = 0.3
CONFERENCE_ORDER = 25

# name -> (src, mic) inside CONFERENCE_ROOM
_ROOM_GEOMETRIES = {
    "conference": ((1.0, 1.0, 1.5), (4.0, 3.0, 1.2)),
    "center": ((2.25, 2.0, 1.2), (2.75, 2.0, 1.2)),
    "corners": ((0.5, 0.5, 1.2), (4.5, 3.5, 1.2)),
}

# direct path plus sparse echoes, all at least 10 dB down
_MILD_DELAYS = (0.0, 1.1e-3, 3.4e-3, 7.9e-3, 16e-3, 31e-3)
_MILD_GAINS_DB = (0.0, -10.0, -13.0, -16.0, -20.0, -25.0)


def preset_rir(name: str, f_s: float = 48000.0) -> RoomImpulseResponse:
    """Named channels used by the harness and the acceptance suite.

    ``conference``, ``center`` and ``corners`` are image-source responses of
    a 5 x 4 x 3 m room (absorption 0.3); ``mild`` is a direct-dominant sparse
    response; ``two-path`` is an echo at 10 ms, 6 dB down.
    """
    if name in _ROOM_GEOMETRIES:
        src, mic = _ROOM_GEOMETRIES[name]
        rir = image_source_rir(CONFERENCE_ROOM, src, mic, CONFERENCE_ABSORPTION,
                               CONFERENCE_ORDER, f_s)
        rir.meta["preset"] = name
        return rir
    if name == "mild":
        gains = 10 ** (np.asarray(_MILD_GAINS_DB) / 20)
        return multipath_rir(_MILD_DELAYS, gains, f_s)
    if name == "two-path":
        return two_path_rir(0.010, 10 ** (-6 / 20), f_s)
    raise KeyError(f"unknown RIR preset {name!r}; choose from {sorted(PRESET_NAMES)}")


PRESET_NAMES = (*_ROOM_GEOMETRIES, "mild", "two-path")
