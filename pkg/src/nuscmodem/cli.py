"""Command-line interface: ``nuscmodem {tx,rx,sweep,rir-gen}``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import channel, frames, harness, tx, wavio
from .tx import ConfigError


def _config(path):
    if path is None:
        from .eq import EqualizerConfig

        modem = tx.ModemConfig()
        return modem, EqualizerConfig.from_modem(modem), {}
    return harness.load_config(path)


def _seeded_payload(seed: int, n_bits: int) -> np.ndarray:
    return np.random.default_rng(seed).integers(0, 2, n_bits, dtype=np.uint8)


def _payload_from_args(args, default_bits: int):
    if args.payload_hex is not None:
        try:
            data = bytes.fromhex(args.payload_hex)
        except ValueError as exc:
            raise ConfigError(f"--payload-hex is not valid hex: {exc}") from exc
        return frames.bytes_to_bits(data)
    if args.payload is not None:
        return frames.bytes_to_bits(Path(args.payload).read_bytes())
    if args.seed is not None:
        return _seeded_payload(args.seed, args.payload_bits or default_bits)
    return None


def _vec(text: str):
    return tuple(float(v) for v in text.split(","))


def write_training_file(path, packet: frames.Packet, training_indices) -> None:
    body = " ".join(str(int(i)) for i in training_indices)
    Path(path).write_text(f"# payload_bits = {len(packet.payload)}\n{body}\n")


def read_training_file(path) -> tuple[int, np.ndarray]:
    lines = Path(path).read_text().splitlines()
    n_bits = None
    values = []
    for line in lines:
        if line.startswith("#"):
            key, _, val = line[1:].partition("=")
            if key.strip() == "payload_bits":
                n_bits = int(val)
        else:
            values += line.split()
    if n_bits is None:
        raise ConfigError(f"{path}: missing '# payload_bits = N' header")
    return n_bits, np.array([int(v) for v in values], dtype=np.int64)


def cmd_tx(args) -> int:
    modem, equalizer, rest = _config(args.config)
    bits = _payload_from_args(args, rest.get("payload_bits", 5120))
    if bits is None or len(bits) == 0:
        print("error: a non-empty payload is required (--payload, --payload-hex or --seed)",
              file=sys.stderr)
        return harness.EXIT_CONFIG
    packet, wave = harness.transmit(bits, modem)
    wavio.write_wav(args.out, wave)
    n_train = len(harness.training_symbols(packet, modem, equalizer))
    train_path = args.training_out or f"{args.out}.train"
    write_training_file(train_path, packet, packet.symbol_indices()[:n_train])
    print(f"wrote {args.out}: {packet.total_bits} bits ({len(packet.payload)} data + 32 CRC), "
          f"{packet.n_symbols} symbols, {wave.duration:.3f} s at {modem.f_s:g} Hz")
    print(f"rate {tx.data_rate(modem):g} bps; training reference {train_path}")
    return harness.EXIT_OK


def cmd_rx(args) -> int:
    modem, equalizer, rest = _config(args.config)
    wave = wavio.read_wav(args.input)
    if abs(wave.sample_rate - modem.f_s) > 1e-9:
        raise ConfigError(f"file sample rate {wave.sample_rate:g} Hz != f_s {modem.f_s:g} Hz")
    known = _payload_from_args(args, rest.get("payload_bits", 5120))
    n_frac = equalizer.training_fraction
    if args.training is not None:
        n_bits, idx = read_training_file(args.training)
        training = tx.map_symbols(idx, modem.M)
    elif known is not None:
        n_bits = len(known)
        packet = frames.build_payload(known, modem)
        n_train = int(np.floor(n_frac * packet.n_symbols + 1e-9))
        training = tx.map_symbols(packet.symbol_indices()[:n_train], modem.M)
    else:
        raise ConfigError("rx needs a training reference: --training, --seed or a payload")

    threshold = rest.get("detection_threshold", harness.sync.DETECTION_THRESHOLD)
    res = harness.receive(wave, modem, training, n_bits, equalizer, threshold)
    if res.status == "no-detect":
        print(f"no packet detected (peak metric {res.sync.peak_metric:.3f})", file=sys.stderr)
        return res.exit_code
    print(f"packet detected: metric {res.sync.peak_metric:.3f}, "
          f"data starts at sample {res.sync.data_start_index}")
    snr = res.equalized.output_snr_db
    if np.isnan(snr):
        print("equalizer output SNR not estimated (too few decision-directed symbols)")
    else:
        print(f"equalizer output SNR {snr:.1f} dB")
    if args.export:
        harness.export_equalizer_csv(res.equalized, args.export)
    if known is not None:
        errors = harness.count_bit_errors(known, res.packet.payload)
        print(f"bit errors {errors} / {len(known)} (BER {errors / len(known):.3g})")
    if len(res.packet.payload) % 8 == 0:
        print("payload", frames.bits_to_bytes(res.packet.payload).hex())
    if res.status == "diverged":
        print("equalizer diverged", file=sys.stderr)
    elif res.status == "crc-fail":
        print("CRC failed", file=sys.stderr)
    else:
        print("CRC pass")
    return res.exit_code


def cmd_sweep(args) -> int:
    values = harness.parse_config_text(Path(args.config).read_text()) if args.config else {}
    if args.snr is not None:
        values["snr_db"] = _vec(args.snr)
    if args.trials is not None:
        values["trials"] = args.trials
    if args.seed is not None:
        values["master_seed"] = args.seed
    if args.rir is not None:
        values["rir"] = args.rir
    spec = harness.ExperimentSpec.from_values(values)

    def show(p):
        print(f"snr {p.snr_db:6.2f} dB  ber {p.ber:.3e}  dd_ber {p.dd_ber:.3e}  "
              f"ref {p.ber_ref:.3e}  out-snr {p.mean_output_snr_db:5.1f} dB  "
              f"sync-fail {p.sync_failures}  crc-fail {p.crc_failures}", flush=True)

    report = harness.run_sweep(spec, out=args.out, workers=args.workers, progress=show)
    if args.out is None:
        sys.stdout.write(report.to_csv())
    return harness.EXIT_OK


def cmd_rir_gen(args) -> int:
    if args.preset:
        rir = channel.preset_rir(args.preset, args.fs)
    else:
        if not (args.room and args.src and args.mic):
            raise ConfigError("rir-gen needs --preset or all of --room, --src, --mic")
        rir = channel.image_source_rir(_vec(args.room), _vec(args.src), _vec(args.mic),
                                       args.absorption, args.max_order, args.fs)
    channel.save_rir(rir, args.out)
    peak = int(np.argmax(np.abs(rir.taps)))
    print(f"wrote {args.out}: {len(rir)} taps, strongest tap at {peak / rir.sample_rate * 1e3:.2f} ms, "
          f"RT60 {channel.schroeder_rt60(rir):.3f} s")
    return harness.EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nuscmodem", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def payload_opts(p):
        g = p.add_mutually_exclusive_group()
        g.add_argument("--payload", help="file whose bytes are the payload")
        g.add_argument("--payload-hex", help="payload as a hex string")
        g.add_argument("--seed", type=int, help="pseudorandom payload from this seed")
        p.add_argument("--payload-bits", type=int, help="payload length for --seed")

    p = sub.add_parser("tx", help="write a packet waveform file")
    p.add_argument("--config")
    payload_opts(p)
    p.add_argument("--out", required=True)
    p.add_argument("--training-out", help="training reference path (default OUT.train)")
    p.set_defaults(func=cmd_tx)

    p = sub.add_parser("rx", help="decode a packet waveform file")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--config")
    payload_opts(p)
    p.add_argument("--training", help="training reference written by tx")
    p.add_argument("--export", help="write soft symbols and final taps to this CSV")
    p.set_defaults(func=cmd_rx)

    p = sub.add_parser("sweep", help="Monte-Carlo BER sweep to CSV")
    p.add_argument("--config", help="experiment file")
    p.add_argument("--out")
    p.add_argument("--snr", help="comma-separated in-band SNRs in dB")
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--rir", help="identity, a preset name or a waveform file")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("rir-gen", help="generate an image-source room impulse response")
    p.add_argument("--preset", choices=channel.PRESET_NAMES)
    p.add_argument("--room", help="Lx,Ly,Lz in metres")
    p.add_argument("--src", help="x,y,z in metres")
    p.add_argument("--mic", help="x,y,z in metres")
    p.add_argument("--absorption", type=float, default=channel.CONFERENCE_ABSORPTION)
    p.add_argument("--max-order", type=int, default=channel.CONFERENCE_ORDER)
    p.add_argument("--fs", type=float, default=48000.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_rir_gen)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        # ConfigError, FramingError and WaveFormatError are ValueErrors
        print(f"error: {exc}", file=sys.stderr)
        return harness.EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
