import math

import numpy as np
import pytest
from scipy import stats

from nuscmodem import channel, dsp, frames, harness, tx
from nuscmodem.harness import BerPoint, ExperimentSpec, TrialResult
from nuscmodem.tx import ConfigError


def test_parse_config_types_and_comments():
    text = """
    # modem
    f_c = 18500       # carrier
    M = 16
    adaptation = nlms
    snr_db = 0, 5 10
    trials = 3
    """
    v = harness.parse_config_text(text)
    assert v == {"f_c": 18500.0, "M": 16, "adaptation": "nlms", "snr_db": (0.0, 5.0, 10.0),
                 "trials": 3}
    modem, eqc, rest = harness.split_config(v)
    assert modem.f_c == 18500.0 and modem.M == 16 and eqc.adaptation == "nlms"
    assert rest == {"snr_db": (0.0, 5.0, 10.0), "trials": 3}


@pytest.mark.parametrize("text,needle", [
    ("bogus = 1", "unknown key"),
    ("f_c 19000", "expected 'key = value'"),
    ("M = four", "bad value"),
])
def test_parse_config_errors(text, needle):
    with pytest.raises(ConfigError, match=needle):
        harness.parse_config_text(text)


def test_config_violation_named():
    with pytest.raises(ConfigError, match=r"f_s >= 2\*f_b\*\(1\+beta\) violated"):
        harness.split_config(harness.parse_config_text("f_s = 4000\nf_c = 1000"))
    with pytest.raises(ConfigError, match="forgetting"):
        harness.split_config({"forgetting_factor": 0.5})


def test_format_config_roundtrip():
    modem = tx.ModemConfig(M=16, guard_seconds=0.2)
    eqc = harness.eq.EqualizerConfig.from_modem(modem, pll_kp=0.02)
    text = harness.format_config(modem, eqc, {"snr_db": (1.5, 2.0), "trials": 7})
    m2, e2, rest = harness.split_config(harness.parse_config_text(text))
    assert m2 == modem and e2 == eqc and rest == {"snr_db": (1.5, 2.0), "trials": 7}


def test_reference_curve_closed_form():
    snr = np.linspace(-2, 14, 17)
    esn0 = 10 ** (snr / 10) * 1.3
    np.testing.assert_allclose(harness.awgn_ber_reference(snr, 4, 0.3),
                               stats.norm.sf(np.sqrt(esn0)), rtol=1e-12)
    np.testing.assert_allclose(harness.awgn_ber_reference(snr, 2, 0.3),
                               stats.norm.sf(np.sqrt(2 * esn0)), rtol=1e-12)
    assert harness.reference_snr_for_ber(1e-3) == pytest.approx(
        10 * np.log10(stats.norm.isf(1e-3) ** 2 / 1.3), abs=1e-6)


def test_reference_matches_ideal_matched_filter_receiver():
    # known-timing matched filter, no equalizer: validates the in-band SNR scale
    cfg = tx.ModemConfig()
    taps = tx.rrc_for(cfg)
    snr = 4.0
    errors = bits = 0
    for seed in range(12):
        r = np.random.default_rng(seed)
        pkt = frames.build_payload(r.integers(0, 2, 5120, dtype=np.uint8), cfg)
        w = tx.build_packet_waveform(pkt, cfg)
        y = channel.apply_channel(w, channel.ChannelSpec(snr_db=snr, seed=seed + 50), cfg.band)
        bb = dsp.downconvert(y, cfg.f_c, taps).samples
        lay = tx.packet_layout(cfg, pkt.n_symbols)
        centres = lay.first_symbol_center + cfg.L * np.arange(pkt.n_symbols)
        clean = dsp.downconvert(w, cfg.f_c, taps).samples[centres]
        g = np.vdot(tx.map_symbols(pkt.symbol_indices(), 4), clean) / pkt.n_symbols
        got = frames.ungroup_bits(tx.slice_indices(bb[centres] / g, 4), 4)
        errors += int(np.count_nonzero(got != pkt.bits))
        bits += len(got)
    p = float(harness.awgn_ber_reference(snr))
    assert abs(errors / bits - p) <= 3 * harness.binomial_sigma(p, bits)


def test_bit_error_accounting_exact(rng):
    sent = rng.integers(0, 2, 5152, dtype=np.uint8)
    for k in (0, 1, 7, 300):
        got = sent.copy()
        got[rng.choice(5152, k, replace=False)] ^= 1
        assert harness.count_bit_errors(sent, got) == k
    with pytest.raises(ValueError):
        harness.count_bit_errors(sent, sent[:-1])


def test_ber_point_aggregation():
    trials = [TrialResult(10.0, t, 5152, e, 3608, e, 12.0, False, e > 0, False)
              for t, e in enumerate([0, 3, 5])]
    p = BerPoint.from_trials(10.0, trials, 4, 0.3)
    assert p.total_bits == 3 * 5152 and p.bit_errors == 8
    assert p.ber == 8 / (3 * 5152)
    assert p.crc_failures == 2 and p.sync_failures == 0
    assert p.ber_ref == pytest.approx(float(harness.awgn_ber_reference(10.0)))


def test_seed_splitting_independent():
    seeds = [harness.trial_seed(7, p, t) for p in range(3) for t in range(20)]
    streams = [np.random.default_rng(s.spawn(2)[1]).normal(size=8) for s in seeds]
    for i in range(len(streams)):
        for j in range(i):
            assert not np.array_equal(streams[i], streams[j])
    a = np.random.default_rng(harness.trial_seed(7, 1, 2).spawn(2)[1]).normal(size=8)
    np.testing.assert_array_equal(a, streams[22])


def small_spec(**kw):
    base = dict(snr_db=(8.0,), trials=2, master_seed=3, payload_bits=512)
    base.update(kw)
    return ExperimentSpec(**base)


def test_experiment_spec_validation():
    with pytest.raises(ConfigError, match="trials"):
        small_spec(trials=0)
    with pytest.raises(ConfigError, match="payload_bits"):
        small_spec(payload_bits=0)
    with pytest.raises(ConfigError, match="payload_bits"):
        small_spec(payload_bits=70000)


def test_experiment_spec_from_file(tmp_path):
    path = tmp_path / "exp.cfg"
    path.write_text("snr_db = 5, 10\ntrials = 4\nrir = mild\nmaster_seed = 11\n")
    spec = ExperimentSpec.from_file(path)
    assert spec.snr_db == (5.0, 10.0) and spec.trials == 4 and spec.master_seed == 11
    assert spec.rir is not None and spec.rir_source == "mild"


def test_run_trial_noiseless_identity():
    r = harness.run_trial(small_spec(), math.inf, harness.trial_seed(0, 0, 0))
    assert r.bit_errors == 0 and not r.crc_failure and not r.sync_failure
    assert r.total_bits == 544 and r.dd_bits == 544 - 2 * 81


def test_sweep_single_row_and_echo():
    report = harness.run_sweep(small_spec(trials=1))
    csv_text = report.to_csv()
    lines = csv_text.splitlines()
    header = [l for l in lines if l.startswith("#")]
    body = [l for l in lines if not l.startswith("#")]
    assert header[0] == "# nuscmodem ber-report v1"
    assert "# trials = 1" in header and "# master_seed = 3" in header
    assert "# snr_db = 8" in header
    assert body[0] == ",".join(harness.CSV_COLUMNS)
    assert len(body) == 2
    row = dict(zip(harness.CSV_COLUMNS, body[1].split(",")))
    assert int(row["trials"]) == 1
    assert float(row["ber"]) == int(row["bit_errors"]) / int(row["total_bits"])


def test_sweep_deterministic_and_worker_independent(tmp_path):
    spec = small_spec(snr_db=(6.0, 3.0))
    a = harness.run_sweep(spec, out=tmp_path / "a.csv")
    harness.run_sweep(spec, out=tmp_path / "b.csv", workers=2)
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    snrs = [p.snr_db for p in a.points]
    assert snrs == [6.0, 3.0]
    body = [l for l in a.to_csv().splitlines() if l[0].isdigit()]
    assert body[0].startswith("3.0,") and body[1].startswith("6.0,")


def test_sweep_flushes_partial_results(tmp_path):
    out = tmp_path / "partial.csv"

    def stop(point):
        raise KeyboardInterrupt

    with pytest.raises(KeyboardInterrupt):
        harness.run_sweep(small_spec(snr_db=(10.0, 20.0), trials=1), out=out, progress=stop)
    rows = [l for l in out.read_text().splitlines() if l and l[0].isdigit()]
    assert len(rows) == 1 and rows[0].startswith("10.0,")


def test_snr_for_ber_interpolation():
    snr = [0, 5, 10]
    ber = [1e-1, 1e-2, 1e-4]
    assert harness.snr_for_ber(snr, ber, 1e-2) == pytest.approx(5.0)
    assert harness.snr_for_ber(snr, ber, 1e-3) == pytest.approx(7.5)
    assert harness.snr_for_ber(snr, ber, 1e-6) == math.inf
    assert harness.snr_for_ber(snr, [1e-1, 1e-2, 0.0], 1e-3) == 10.0


def test_receive_rejects_rate_mismatch():
    cfg = tx.ModemConfig()
    with pytest.raises(ConfigError):
        harness.receive(dsp.PassbandWaveform(np.zeros(10), 44100.0), cfg, [], 64)


def test_receive_statuses():
    cfg = tx.ModemConfig()
    noise = dsp.PassbandWaveform(np.random.default_rng(0).normal(size=60000) * 0.1, cfg.f_s)
    assert harness.receive(noise, cfg, [], 5120).status == "no-detect"
    assert harness.receive(dsp.PassbandWaveform(np.zeros(100), cfg.f_s), cfg, [], 64).exit_code == 3


def test_export_equalizer_csv(tmp_path):
    cfg = tx.ModemConfig()
    bits = np.random.default_rng(1).integers(0, 2, 1000, dtype=np.uint8)
    pkt, w = harness.transmit(bits, cfg)
    res = harness.receive(w, cfg, harness.training_symbols(pkt, cfg), 1000)
    harness.export_equalizer_csv(res.equalized, tmp_path / "c.csv")
    text = (tmp_path / "c.csv").read_text().split("\n\n")
    sym = text[0].splitlines()
    taps = text[1].splitlines()
    assert len(sym) == 1 + pkt.n_symbols
    assert sym[1].split(",")[1] == "training" and sym[-1].split(",")[1] == "decision-directed"
    assert len(taps) == 1 + 29 + 80
