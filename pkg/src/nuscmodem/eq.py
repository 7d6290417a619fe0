"""Phase-coherent decision feedback equalizer.

A fractionally spaced feedforward filter and a symbol-spaced feedback filter
are adapted jointly (recursive least squares by default) while a
second-order phase-locked loop rotates the feedforward output onto the
constellation. The first part of each packet is equalized against known
symbols (training), the rest against the equalizer's own decisions.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numba
import numpy as np

from . import dsp
from .frames import bits_per_symbol, ungroup_bits
from .sync import SyncResult
from .tx import ModemConfig, _pam_slicer, constellation, slice_indices

TRAINING = "training"
DECISION_DIRECTED = "decision-directed"

DIVERGENCE_LIMIT = 1e6
SNR_CAP_DB = 60.0
MIN_SNR_SYMBOLS = 100


@dataclass(frozen=True)
class EqualizerConfig:
    """Equalizer structure and adaptation constants.

    ``sps`` is the equalizer input rate in samples per symbol and
    ``ff_spacing`` the feedforward tap spacing in those samples, so the
    defaults give a T/2-spaced feedforward filter.
    """

    ff_noncausal: int = 8
    ff_causal: int = 20
    fb_taps: int = 80
    sps: int = 2
    ff_spacing: int = 1
    adaptation: str = "rls"
    forgetting_factor: float = 0.999
    step_size: float = 0.05
    rls_delta: float = 1e-2
    pll_kp: float = 1e-2
    pll_ki: float = 1e-4
    training_fraction: float = 0.3

    def __post_init__(self):
        if self.adaptation not in ("rls", "nlms"):
            raise ValueError(f"adaptation must be 'rls' or 'nlms', got {self.adaptation!r}")
        if not 0.9 < self.forgetting_factor <= 1.0:
            raise ValueError(f"forgetting factor {self.forgetting_factor} outside (0.9, 1]")
        if self.step_size <= 0 or self.rls_delta <= 0:
            raise ValueError("step_size and rls_delta must be positive")
        if self.pll_kp < 0 or self.pll_ki < 0:
            raise ValueError("PLL gains must be non-negative")
        if min(self.ff_noncausal, self.ff_causal, self.fb_taps) < 0:
            raise ValueError("tap counts must be non-negative")
        if self.sps < 1 or self.ff_spacing < 1:
            raise ValueError("sps and ff_spacing must be >= 1")
        if not 0.0 <= self.training_fraction < 1.0:
            raise ValueError("training_fraction must lie in [0, 1)")

    @property
    def ff_len(self) -> int:
        return self.ff_noncausal + self.ff_causal + 1

    @property
    def center_tap(self) -> int:
        return self.ff_causal

    @classmethod
    def from_modem(cls, config: ModemConfig, **overrides) -> "EqualizerConfig":
        base = dict(
            ff_noncausal=config.ff_noncausal,
            ff_causal=config.ff_causal,
            fb_taps=config.fb_taps,
            training_fraction=config.training_fraction,
        )
        base.update(overrides)
        return cls(**base)


@dataclass
class EqualizerState:
    """Mutable per-packet equalizer state (single owner)."""

    weights: np.ndarray  # feedforward taps then feedback taps
    n_ff: int
    theta: float
    phi_integral: float
    decision_history: np.ndarray
    inverse_correlation: np.ndarray | None
    M: int = 4
    mode: str = TRAINING
    converged: bool = True

    @property
    def ff_weights(self) -> np.ndarray:
        return self.weights[: self.n_ff]

    @property
    def fb_weights(self) -> np.ndarray:
        return self.weights[self.n_ff:]

    @classmethod
    def initial(cls, config: EqualizerConfig, M: int = 4) -> "EqualizerState":
        n = config.ff_len + config.fb_taps
        w = np.zeros(n, dtype=complex)
        w[config.center_tap] = 1.0
        P = np.eye(n, dtype=complex) / config.rls_delta if config.adaptation == "rls" else None
        return cls(
            weights=w,
            n_ff=config.ff_len,
            theta=0.0,
            phi_integral=0.0,
            decision_history=np.zeros(config.fb_taps, dtype=complex),
            inverse_correlation=P,
            M=M,
        )


def eq_step(state: EqualizerState, rx_window, reference=None,
            config: EqualizerConfig | None = None):
    """Equalize one symbol and adapt.

    Parameters
    ----------
    state : EqualizerState
        Updated in place.
    rx_window : array_like
        ``config.ff_len`` feedforward input samples, oldest first.
    reference : complex or None
        Known symbol in training mode; ``None`` selects decision-directed
        adaptation.

    Returns
    -------
    state, soft, decision
        ``soft`` is the phase-corrected equalizer output and ``decision``
        the symbol used for adaptation and feedback.
    """
    config = config or EqualizerConfig()
    v = np.asarray(rx_window, dtype=complex)
    rot = np.exp(-1j * state.theta)
    z = np.concatenate([v * rot, -state.decision_history])
    soft = np.vdot(state.weights, z)

    if reference is None:
        state.mode = DECISION_DIRECTED
        decision = constellation(state.M)[slice_indices(soft, state.M)]
    else:
        state.mode = TRAINING
        decision = complex(reference)
    err = decision - soft

    if config.adaptation == "rls":
        lam = config.forgetting_factor
        P = state.inverse_correlation
        pz = P @ z
        gain = pz / (lam + np.real(np.vdot(z, pz)))
        state.weights += gain * np.conj(err)
        P -= np.outer(gain, pz.conj())
        P /= lam
    else:
        state.weights += config.step_size * z * np.conj(err) / (1e-9 + np.real(np.vdot(z, z)))

    phi = float(np.imag(soft * np.conj(decision)))
    state.phi_integral += phi
    state.theta += config.pll_kp * phi + config.pll_ki * state.phi_integral

    if config.fb_taps:
        state.decision_history[1:] = state.decision_history[:-1]
        state.decision_history[0] = decision

    w = state.weights
    if not (np.all(np.isfinite(w)) and np.isfinite(state.theta)) or np.max(np.abs(w)) > DIVERGENCE_LIMIT:
        state.converged = False
    return state, soft, decision


def estimate_output_snr(soft, hard) -> float:
    """Decision SNR ``10 log10(sum|hard|^2 / sum|hard - soft|^2)``, capped at 60 dB."""
    soft = np.asarray(soft, dtype=complex)
    hard = np.asarray(hard, dtype=complex)
    if soft.shape != hard.shape:
        raise ValueError("soft and hard sequences differ in length")
    if soft.size < MIN_SNR_SYMBOLS:
        raise ValueError(f"need at least {MIN_SNR_SYMBOLS} symbols for a stable SNR estimate")
    sig = float(np.sum(np.abs(hard) ** 2))
    err = float(np.sum(np.abs(hard - soft) ** 2))
    if err <= sig * 10 ** (-SNR_CAP_DB / 10):
        return SNR_CAP_DB
    return 10.0 * np.log10(sig / err)


@dataclass
class EqualizedPacket:
    soft_symbols: np.ndarray
    hard_symbols: np.ndarray
    bits: np.ndarray
    output_snr_db: float
    converged: bool
    n_training: int
    theta: np.ndarray = field(repr=False)
    state: EqualizerState | None = field(default=None, repr=False)

    @property
    def n_symbols(self) -> int:
        return len(self.soft_symbols)


def n_training_symbols(n_symbols: int, fraction: float) -> int:
    return int(np.floor(fraction * n_symbols + 1e-9))


def feedforward_windows(received: dsp.BasebandSignal, sync: SyncResult, n_symbols: int,
                        L: int, config: EqualizerConfig) -> np.ndarray:
    """Feedforward input vectors, one row per symbol, oldest sample first.

    The full-rate matched-filter output is decimated to ``config.sps``
    samples per symbol on the grid through ``sync.data_start_index``.
    """
    if L % config.sps:
        raise ValueError(f"L={L} not divisible by equalizer rate sps={config.sps}")
    step = L // config.sps
    x = received.samples
    phase = sync.data_start_index % step
    xd = x[phase::step]
    first = (sync.data_start_index - phase) // step
    offsets = np.arange(-config.ff_causal, config.ff_noncausal + 1) * config.ff_spacing
    centers = first + config.sps * np.arange(n_symbols)
    idx = centers[:, None] + offsets[None, :]
    pad_lo = max(0, -int(idx.min()))
    pad_hi = max(0, int(idx.max()) - len(xd) + 1)
    xp = np.concatenate([np.zeros(pad_lo, complex), xd, np.zeros(pad_hi, complex)])
    return xp[idx + pad_lo]


@numba.njit(cache=True)
def _slice_point(y, M, side, k, scale, labels, points):
    if M == 2:
        return points[1] if y.real < 0 else points[0]
    re = int(min(max(np.round((y.real * scale + (side - 1)) / 2.0), 0), side - 1))
    im = int(min(max(np.round((y.imag * scale + (side - 1)) / 2.0), 0), side - 1))
    return points[(labels[re] << k) | labels[im]]


@numba.njit(cache=True)
def _run_packet(windows, training, n_train, n_ff, n_fb, rls, lam, mu, delta,
                kp, ki, M, side, k, scale, labels, points, center):
    n_sym, _ = windows.shape
    n = n_ff + n_fb
    w = np.zeros(n, dtype=np.complex128)
    w[center] = 1.0
    P = np.zeros((n, n), dtype=np.complex128)
    for i in range(n):
        P[i, i] = 1.0 / delta
    hist = np.zeros(n_fb, dtype=np.complex128)
    z = np.zeros(n, dtype=np.complex128)
    pz = np.zeros(n, dtype=np.complex128)
    soft = np.zeros(n_sym, dtype=np.complex128)
    decided = np.zeros(n_sym, dtype=np.complex128)
    thetas = np.zeros(n_sym)
    theta = 0.0
    integ = 0.0
    done = n_sym
    ok = True
    for s in range(n_sym):
        thetas[s] = theta
        rot = np.exp(-1j * theta)
        for i in range(n_ff):
            z[i] = windows[s, i] * rot
        for i in range(n_fb):
            z[n_ff + i] = -hist[i]
        y = 0j
        for i in range(n):
            y += np.conj(w[i]) * z[i]
        if s < n_train:
            d = training[s]
        else:
            d = _slice_point(y, M, side, k, scale, labels, points)
        e = d - y
        if rls:
            den = lam
            for i in range(n):
                acc = 0j
                for j in range(n):
                    acc += P[i, j] * z[j]
                pz[i] = acc
            for i in range(n):
                den += (np.conj(z[i]) * pz[i]).real
            ec = np.conj(e)
            for i in range(n):
                w[i] += pz[i] / den * ec
            inv_lam = 1.0 / lam
            for i in range(n):
                gi = pz[i] / den
                for j in range(n):
                    P[i, j] = (P[i, j] - gi * np.conj(pz[j])) * inv_lam
        else:
            nrm = 1e-9
            for i in range(n):
                nrm += (z[i].real ** 2 + z[i].imag ** 2)
            ec = np.conj(e)
            for i in range(n):
                w[i] += mu * z[i] * ec / nrm
        phi = (y * np.conj(d)).imag
        integ += phi
        theta += kp * phi + ki * integ
        for i in range(n_fb - 1, 0, -1):
            hist[i] = hist[i - 1]
        if n_fb:
            hist[0] = d
        soft[s] = y
        decided[s] = d
        big = 0.0
        for i in range(n):
            a = abs(w[i])
            if not np.isfinite(a):
                big = np.inf
                break
            if a > big:
                big = a
        if big > DIVERGENCE_LIMIT or not np.isfinite(theta):
            ok = False
            done = s + 1
            break
    return soft[:done], decided[:done], thetas[:done], w, theta, integ, hist, P, ok


def _slicer_tables(M: int):
    points = np.ascontiguousarray(constellation(M), dtype=np.complex128)
    if M == 2:
        return 0, 0, 1.0, np.zeros(1, np.int64), points
    k = bits_per_symbol(M) // 2
    side = 1 << k
    _, labels = _pam_slicer(side)
    return side, k, float(np.sqrt(2.0 * (M - 1) / 3.0)), labels.astype(np.int64), points


def equalize_packet(received: dsp.BasebandSignal, sync: SyncResult, known_training,
                    config: ModemConfig | None = None,
                    eq_config: EqualizerConfig | None = None, *,
                    n_symbols: int) -> EqualizedPacket:
    """Equalize a packet of ``n_symbols`` symbols.

    The first ``len(known_training)`` symbols adapt against the known
    symbols, the rest against the equalizer's decisions. ``hard_symbols``
    are the symbols fed back (the references during training), and the
    output SNR is measured over the decision-directed span only.
    """
    config = config or ModemConfig()
    eq_config = eq_config or EqualizerConfig.from_modem(config)
    if not sync.detected:
        raise ValueError("cannot equalize without a detected packet")
    training = np.ascontiguousarray(known_training, dtype=np.complex128)
    n_train = len(training)
    if n_train > n_symbols:
        raise ValueError("more training symbols than packet symbols")

    windows = feedforward_windows(received, sync, n_symbols, config.L, eq_config)
    rms = np.sqrt(np.mean(np.abs(windows[:, eq_config.center_tap]) ** 2))
    if rms > 0:
        windows = windows / rms

    side, k, scale, labels, points = _slicer_tables(config.M)
    soft, hard, theta, w, th, integ, hist, P, ok = _run_packet(
        np.ascontiguousarray(windows), training if n_train else np.zeros(1, np.complex128),
        n_train, eq_config.ff_len, eq_config.fb_taps, eq_config.adaptation == "rls",
        eq_config.forgetting_factor, eq_config.step_size, eq_config.rls_delta,
        eq_config.pll_kp, eq_config.pll_ki, config.M, side, k, scale, labels, points,
        eq_config.center_tap,
    )
    state = EqualizerState(
        weights=w, n_ff=eq_config.ff_len, theta=th, phi_integral=integ,
        decision_history=hist,
        inverse_correlation=P if eq_config.adaptation == "rls" else None,
        M=config.M, mode=DECISION_DIRECTED if len(soft) > n_train else TRAINING,
        converged=bool(ok),
    )
    bits = ungroup_bits(slice_indices(hard, config.M), config.M)
    dd_soft, dd_hard = soft[n_train:], hard[n_train:]
    if len(dd_soft) >= MIN_SNR_SYMBOLS:
        snr = estimate_output_snr(dd_soft, dd_hard)
    else:
        snr = float("nan")
    return EqualizedPacket(soft, hard, bits, snr, bool(ok), n_train, theta, state)


def equalize_packet_reference(received: dsp.BasebandSignal, sync: SyncResult, known_training,
                              config: ModemConfig | None = None,
                              eq_config: EqualizerConfig | None = None, *,
                              n_symbols: int) -> EqualizedPacket:
    """Same contract as :func:`equalize_packet`, stepping :func:`eq_step` in Python.

    Slow; kept as the readable reference the compiled loop is checked against.
    """
    config = config or ModemConfig()
    eq_config = eq_config or EqualizerConfig.from_modem(config)
    training = np.asarray(known_training, dtype=complex)
    n_train = len(training)
    windows = feedforward_windows(received, sync, n_symbols, config.L, eq_config)
    rms = np.sqrt(np.mean(np.abs(windows[:, eq_config.center_tap]) ** 2))
    if rms > 0:
        windows = windows / rms
    state = EqualizerState.initial(eq_config, config.M)
    soft, hard, theta = [], [], []
    for k in range(n_symbols):
        theta.append(state.theta)
        _, y, d = eq_step(state, windows[k], training[k] if k < n_train else None, eq_config)
        soft.append(y)
        hard.append(d)
        if not state.converged:
            break
    soft, hard = np.array(soft), np.array(hard)
    bits = ungroup_bits(slice_indices(hard, config.M), config.M)
    dd = slice(n_train, None)
    snr = estimate_output_snr(soft[dd], hard[dd]) if len(soft) - n_train >= MIN_SNR_SYMBOLS else float("nan")
    return EqualizedPacket(soft, hard, bits, snr, state.converged, n_train, np.array(theta), state)
