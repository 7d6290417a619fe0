"""End-to-end simulation, configuration files and BER reporting.

Configuration files are flat ``key = value`` text with ``#`` comments. Keys
are the fields of :class:`ModemConfig`, the equalizer fields in
``EQUALIZER_KEYS`` and the experiment keys in ``EXPERIMENT_KEYS``.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
from scipy.special import erfc

from . import channel, dsp, eq, frames, sync, tx
from .tx import ConfigError, ModemConfig

CSV_VERSION = 1
CSV_COLUMNS = (
    "snr_db", "trials", "total_bits", "bit_errors", "ber", "dd_bits", "dd_errors", "dd_ber",
    "ber_ref", "mean_output_snr_db", "sync_failures", "crc_failures", "divergences",
)
LEAD_SECONDS = 0.05

EQUALIZER_KEYS = {
    "adaptation": str, "forgetting_factor": float, "step_size": float, "rls_delta": float,
    "pll_kp": float, "pll_ki": float, "sps": int, "ff_spacing": int,
}
EXPERIMENT_KEYS = {
    "snr_db": "floats", "trials": int, "master_seed": int, "payload_bits": int,
    "rir": str, "cfo_hz": float, "detection_threshold": float,
}

EXIT_OK, EXIT_CONFIG, EXIT_NO_DETECT, EXIT_CRC, EXIT_DIVERGED = 0, 2, 3, 4, 5


# ---------------------------------------------------------------- config files

def _convert(key: str, kind, text: str):
    try:
        if kind == "floats":
            return tuple(float(v) for v in text.replace(",", " ").split())
        if kind is int:
            return int(float(text)) if float(text).is_integer() else int(text)
        return kind(text)
    except ValueError as exc:
        raise ConfigError(f"bad value for {key!r}: {text!r}") from exc


def parse_config_text(text: str) -> dict:
    """Parse flat ``key = value`` text into typed values."""
    modem_types = ModemConfig.field_types()
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        kind = modem_types.get(key) or EQUALIZER_KEYS.get(key) or EXPERIMENT_KEYS.get(key)
        if kind is None:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        out[key] = _convert(key, kind, value)
    return out


def split_config(values: dict) -> tuple[ModemConfig, eq.EqualizerConfig, dict]:
    modem_keys = set(ModemConfig.field_types())
    modem = ModemConfig(**{k: v for k, v in values.items() if k in modem_keys})
    try:
        equalizer = eq.EqualizerConfig.from_modem(
            modem, **{k: v for k, v in values.items() if k in EQUALIZER_KEYS}
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    rest = {k: v for k, v in values.items() if k in EXPERIMENT_KEYS}
    return modem, equalizer, rest


def load_config(path) -> tuple[ModemConfig, eq.EqualizerConfig, dict]:
    return split_config(parse_config_text(Path(path).read_text()))


def format_config(modem: ModemConfig, equalizer: eq.EqualizerConfig | None = None,
                  extra: dict | None = None) -> str:
    lines = [f"{f.name} = {getattr(modem, f.name)}" for f in fields(modem)]
    if equalizer is not None:
        lines += [f"{k} = {getattr(equalizer, k)}" for k in EQUALIZER_KEYS]
    for k, v in (extra or {}).items():
        if isinstance(v, (tuple, list)):
            v = ", ".join(f"{x:g}" for x in v)
        lines.append(f"{k} = {v}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------- references

def qfunc(x):
    return 0.5 * erfc(np.asarray(x) / np.sqrt(2.0))


def awgn_ber_reference(snr_db, M: int = 4, beta: float = 0.3):
    """Analytic Gray-coded BER on AWGN at an in-band SNR.

    In-band noise spans ``f_b (1 + beta)``, so ``Es/N0 = SNR (1 + beta)``.
    Exact for BPSK and QPSK, the usual nearest-neighbour form for square QAM.
    """
    esn0 = 10 ** (np.asarray(snr_db, dtype=float) / 10) * (1.0 + beta)
    if M == 2:
        return qfunc(np.sqrt(2 * esn0))
    if M == 4:
        return qfunc(np.sqrt(esn0))
    k = np.log2(M)
    return 4 / k * (1 - 1 / np.sqrt(M)) * qfunc(np.sqrt(3 * esn0 / (M - 1)))


def binomial_sigma(p: float, n: int) -> float:
    return math.sqrt(p * (1 - p) / n)


# ---------------------------------------------------------------- pipeline

@dataclass
class RxResult:
    status: str
    sync: sync.SyncResult
    equalized: eq.EqualizedPacket | None
    packet: frames.Packet | None
    crc_ok: bool

    @property
    def exit_code(self) -> int:
        return {"ok": EXIT_OK, "no-detect": EXIT_NO_DETECT, "crc-fail": EXIT_CRC,
                "diverged": EXIT_DIVERGED}[self.status]


def transmit(payload_bits, config: ModemConfig):
    packet = frames.build_payload(payload_bits, config)
    return packet, tx.build_packet_waveform(packet, config)


def training_symbols(packet: frames.Packet, config: ModemConfig,
                     eq_config: eq.EqualizerConfig | None = None) -> np.ndarray:
    fraction = eq_config.training_fraction if eq_config else config.training_fraction
    n = eq.n_training_symbols(packet.n_symbols, fraction)
    return tx.map_symbols(packet.symbol_indices()[:n], config.M)


def receive(waveform: dsp.PassbandWaveform, config: ModemConfig, training,
            n_payload_bits: int, eq_config: eq.EqualizerConfig | None = None,
            threshold: float = sync.DETECTION_THRESHOLD) -> RxResult:
    """Downconvert, detect, equalize, demap and check the CRC."""
    if abs(waveform.sample_rate - config.f_s) > 1e-9:
        raise ConfigError(f"waveform rate {waveform.sample_rate:g} Hz != f_s {config.f_s:g} Hz")
    eq_config = eq_config or eq.EqualizerConfig.from_modem(config)
    n_bits = n_payload_bits + frames.CRC_BITS
    n_symbols = -(-n_bits // config.bits_per_symbol)
    template = tx.pilot_waveform(config).baseband.samples
    bb = dsp.downconvert(waveform, config.f_c, tx.rrc_for(config))
    if len(bb) < len(template):
        return RxResult("no-detect", sync.SyncResult(0, 0.0, False), None, None, False)
    found = sync.detect_pilot(bb, template, config, threshold)
    if not found.detected:
        return RxResult("no-detect", found, None, None, False)
    found = sync.refine_timing(bb, found, config, template)
    res = eq.equalize_packet(bb, found, training, config, eq_config, n_symbols=n_symbols)
    bits = res.bits
    if len(bits) < n_bits:
        bits = np.concatenate([bits, np.zeros(n_bits - len(bits), np.uint8)])
    packet = frames.Packet.from_bits(bits, n_payload_bits, config.bits_per_symbol)
    ok = frames.verify_payload(packet)
    if not res.converged:
        status = "diverged"
    else:
        status = "ok" if ok else "crc-fail"
    return RxResult(status, found, res, packet, ok)


def export_equalizer_csv(equalized: eq.EqualizedPacket, path) -> None:
    """Per-symbol soft/hard symbols and PLL phase, then the final taps.

    Two CSV tables in one file separated by a blank line, for constellation
    and tap plots outside the package.
    """
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["k", "mode", "soft_re", "soft_im", "hard_re", "hard_im", "theta"])
    for k, (y, d) in enumerate(zip(equalized.soft_symbols, equalized.hard_symbols)):
        mode = eq.TRAINING if k < equalized.n_training else eq.DECISION_DIRECTED
        th = equalized.theta[k] if k < len(equalized.theta) else math.nan
        w.writerow([k, mode, *(repr(float(v)) for v in (y.real, y.imag, d.real, d.imag, th))])
    if equalized.state is not None:
        buf.write("\n")
        w.writerow(["filter", "tap", "re", "im"])
        for name, taps in (("ff", equalized.state.ff_weights), ("fb", equalized.state.fb_weights)):
            for i, c in enumerate(taps):
                w.writerow([name, i, repr(float(c.real)), repr(float(c.imag))])
    Path(path).write_text(buf.getvalue())


@dataclass
class TrialResult:
    snr_db: float
    trial: int
    total_bits: int
    bit_errors: int
    dd_bits: int
    dd_errors: int
    output_snr_db: float
    sync_failure: bool
    crc_failure: bool
    diverged: bool
    snr_broadband_db: float = math.nan


def count_bit_errors(sent, received) -> int:
    sent = frames.as_bits(sent)
    received = frames.as_bits(received)
    if len(sent) != len(received):
        raise ValueError("bit vectors differ in length")
    return int(np.count_nonzero(sent != received))


@dataclass(frozen=True)
class ExperimentSpec:
    modem: ModemConfig = field(default_factory=ModemConfig)
    equalizer: eq.EqualizerConfig | None = None
    snr_db: tuple = (10.0,)
    trials: int = 100
    master_seed: int = 0
    payload_bits: int = 5120
    rir: channel.RoomImpulseResponse | None = None
    rir_source: str = "identity"
    cfo_hz: float = 0.0
    detection_threshold: float = sync.DETECTION_THRESHOLD

    def __post_init__(self):
        if self.trials < 1:
            raise ConfigError("trials >= 1 violated")
        if not 0 < self.payload_bits <= self.modem.max_data_bits:
            raise ConfigError(
                f"payload_bits in (0, {self.modem.max_data_bits}] violated: {self.payload_bits}"
            )
        if self.equalizer is None:
            object.__setattr__(self, "equalizer", eq.EqualizerConfig.from_modem(self.modem))

    @classmethod
    def from_values(cls, values: dict) -> "ExperimentSpec":
        modem, equalizer, rest = split_config(values)
        rir_name = rest.pop("rir", "identity")
        rest.setdefault("snr_db", (10.0,))
        return cls(modem=modem, equalizer=equalizer, rir=resolve_rir(rir_name, modem.f_s),
                   rir_source=rir_name, **rest)

    @classmethod
    def from_file(cls, path) -> "ExperimentSpec":
        return cls.from_values(parse_config_text(Path(path).read_text()))

    def echo(self) -> str:
        extra = {"snr_db": self.snr_db, "trials": self.trials, "master_seed": self.master_seed,
                 "payload_bits": self.payload_bits, "rir": self.rir_source,
                 "cfo_hz": self.cfo_hz, "detection_threshold": self.detection_threshold}
        return format_config(self.modem, self.equalizer, extra)


def resolve_rir(name: str | None, f_s: float) -> channel.RoomImpulseResponse | None:
    """``identity``, a preset name or a path to a mono PCM file."""
    if name in (None, "", "identity", "none"):
        return None
    if name in channel.PRESET_NAMES:
        return channel.preset_rir(name, f_s)
    return channel.load_rir(name, f_s)


def trial_seed(master_seed: int, point: int, trial: int) -> np.random.SeedSequence:
    """Seed for one trial: ``SeedSequence(master_seed, spawn_key=(point, trial))``."""
    return np.random.SeedSequence(master_seed, spawn_key=(point, trial))


def run_trial(spec: ExperimentSpec, snr_db: float, seed: np.random.SeedSequence,
              trial: int = 0) -> TrialResult:
    payload_seed, noise_seed = seed.spawn(2)
    config = spec.modem
    rng = np.random.default_rng(payload_seed)
    payload = rng.integers(0, 2, spec.payload_bits, dtype=np.uint8)
    packet, wave = transmit(payload, config)
    lead = int(LEAD_SECONDS * config.f_s)
    tail = lead + (len(spec.rir) if spec.rir is not None else 0)
    padded = dsp.PassbandWaveform(np.concatenate([np.zeros(lead), wave.samples, np.zeros(tail)]),
                                  config.f_s)
    chan = channel.ChannelSpec(rir=spec.rir, snr_db=snr_db, cfo_hz=spec.cfo_hz, seed=noise_seed)
    received, info = channel.apply_channel(padded, chan, config.band, return_info=True)
    training = training_symbols(packet, config, spec.equalizer)
    rx = receive(received, config, training, spec.payload_bits, spec.equalizer,
                 spec.detection_threshold)

    sent = packet.bits[: packet.total_bits]
    n_train_bits = len(training) * config.bits_per_symbol
    if rx.packet is None:
        got = np.zeros_like(sent)
    else:
        got = rx.packet.bits[: packet.total_bits]
    err = sent != got
    out_snr = rx.equalized.output_snr_db if rx.equalized is not None else math.nan
    return TrialResult(
        snr_db=snr_db, trial=trial, total_bits=len(sent), bit_errors=int(err.sum()),
        dd_bits=max(len(sent) - n_train_bits, 0), dd_errors=int(err[n_train_bits:].sum()),
        output_snr_db=out_snr, sync_failure=rx.status == "no-detect",
        crc_failure=rx.status != "no-detect" and not rx.crc_ok,
        diverged=rx.status == "diverged", snr_broadband_db=info["snr_broadband_db"],
    )


@dataclass
class BerPoint:
    snr_db: float
    trials: int
    total_bits: int
    bit_errors: int
    dd_bits: int
    dd_errors: int
    ber_ref: float
    mean_output_snr_db: float
    sync_failures: int
    crc_failures: int
    divergences: int

    @property
    def ber(self) -> float:
        return self.bit_errors / self.total_bits

    @property
    def dd_ber(self) -> float:
        return self.dd_errors / self.dd_bits if self.dd_bits else math.nan

    def row(self) -> dict:
        d = asdict(self)
        d["ber"] = self.ber
        d["dd_ber"] = self.dd_ber
        return {k: d[k] for k in CSV_COLUMNS}

    @classmethod
    def from_trials(cls, snr_db: float, results: list[TrialResult], M: int, beta: float):
        snrs = [r.output_snr_db for r in results if math.isfinite(r.output_snr_db)]
        return cls(
            snr_db=snr_db, trials=len(results),
            total_bits=sum(r.total_bits for r in results),
            bit_errors=sum(r.bit_errors for r in results),
            dd_bits=sum(r.dd_bits for r in results),
            dd_errors=sum(r.dd_errors for r in results),
            ber_ref=float(awgn_ber_reference(snr_db, M, beta)) if math.isfinite(snr_db) else 0.0,
            mean_output_snr_db=float(np.mean(snrs)) if snrs else math.nan,
            sync_failures=sum(r.sync_failure for r in results),
            crc_failures=sum(r.crc_failure for r in results),
            divergences=sum(r.diverged for r in results),
        )


@dataclass
class BerReport:
    spec: ExperimentSpec
    points: list[BerPoint] = field(default_factory=list)

    def header(self) -> str:
        lines = [f"# nuscmodem ber-report v{CSV_VERSION}"]
        lines += [f"# {line}" for line in self.spec.echo().splitlines()]
        return "\n".join(lines) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(self.header())
        writer = csv.DictWriter(buf, CSV_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for p in sorted(self.points, key=lambda p: p.snr_db):
            writer.writerow({k: _fmt(v) for k, v in p.row().items()})
        return buf.getvalue()


def _fmt(v):
    if isinstance(v, float):
        return repr(v) if math.isfinite(v) else str(v)
    return v


def _run_point_trials(args):
    spec, i, snr, trials = args
    return [run_trial(spec, snr, trial_seed(spec.master_seed, i, t), t) for t in trials]


def run_sweep(spec: ExperimentSpec, out=None, workers: int = 1, progress=None) -> BerReport:
    """Run ``spec.trials`` packets at each SNR point.

    When ``out`` is given the CSV is rewritten after every completed point,
    so an interrupted sweep leaves the finished points on disk.
    """
    report = BerReport(spec)
    pool = ProcessPoolExecutor(workers) if workers > 1 else None
    try:
        for i, snr in enumerate(spec.snr_db):
            if pool is None:
                results = _run_point_trials((spec, i, snr, range(spec.trials)))
            else:
                chunks = [range(t, spec.trials, workers) for t in range(workers)]
                results = [r for part in pool.map(_run_point_trials,
                                                  [(spec, i, snr, c) for c in chunks])
                           for r in part]
                results.sort(key=lambda r: r.trial)
            report.points.append(
                BerPoint.from_trials(snr, results, spec.modem.M, spec.modem.beta)
            )
            if out is not None:
                Path(out).write_text(report.to_csv())
            if progress is not None:
                progress(report.points[-1])
    finally:
        if pool is not None:
            pool.shutdown(cancel_futures=True)
    return report


def snr_for_ber(snr_db, ber, target: float) -> float:
    """SNR where a measured curve crosses ``target``, interpolating log10(BER) linearly.

    Returns ``inf`` if the curve never gets down to ``target``.
    """
    snr = np.asarray(snr_db, dtype=float)
    b = np.asarray(ber, dtype=float)
    order = np.argsort(snr)
    snr, b = snr[order], b[order]
    for k in range(len(snr)):
        if b[k] <= target:
            if k == 0:
                return float(snr[0])
            lo, hi = np.log10(max(b[k - 1], 1e-300)), np.log10(max(b[k], 1e-300))
            if b[k] == 0:
                return float(snr[k])
            frac = (lo - np.log10(target)) / (lo - hi)
            return float(snr[k - 1] + frac * (snr[k] - snr[k - 1]))
    return math.inf


def reference_snr_for_ber(target: float, M: int = 4, beta: float = 0.3) -> float:
    from scipy.optimize import brentq

    return brentq(lambda s: float(awgn_ber_reference(s, M, beta)) - target, -10.0, 40.0, xtol=1e-9)
