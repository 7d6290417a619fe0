"""Mono linear-PCM waveform file I/O (16-bit written, 16/32-bit int and float read)."""

from __future__ import annotations

import numpy as np
from scipy.io import wavfile

from .dsp import PassbandWaveform


class WaveFormatError(ValueError):
    pass


def write_wav(path, waveform: PassbandWaveform, bits: int = 16) -> None:
    x = np.asarray(waveform.samples, dtype=float)
    if np.max(np.abs(x), initial=0.0) > 1.0:
        raise WaveFormatError("samples exceed full scale; normalize to |x| <= 1 first")
    rate = int(round(waveform.sample_rate))
    if bits == 16:
        data = np.clip(np.round(x * 32768.0), -32768, 32767).astype(np.int16)
    elif bits == 32:
        data = x.astype(np.float32)
    else:
        raise WaveFormatError(f"unsupported sample width {bits}")
    wavfile.write(path, rate, data)


def read_wav(path) -> PassbandWaveform:
    try:
        rate, data = wavfile.read(path)
    except ValueError as exc:
        raise WaveFormatError(f"unsupported waveform file: {exc}") from exc
    if data.ndim == 2:
        if data.shape[1] != 1:
            raise WaveFormatError(f"expected mono file, got {data.shape[1]} channels")
        data = data[:, 0]
    if data.dtype == np.int16:
        x = data / 32768.0
    elif data.dtype == np.int32:
        x = data / 2147483648.0
    elif data.dtype == np.uint8:
        x = (data.astype(float) - 128.0) / 128.0
    elif np.issubdtype(data.dtype, np.floating):
        x = data.astype(float)
    else:
        raise WaveFormatError(f"unsupported sample type {data.dtype}")
    return PassbandWaveform(x, float(rate))
