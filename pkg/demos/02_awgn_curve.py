"""BER against in-band SNR on a white-noise channel.

The reference curve is the matched-filter bound: with the SNR measured over
the occupied band f_b(1+beta), Es/N0 = SNR (1+beta) and QPSK gives
Q(sqrt(Es/N0)). The adaptive receiver pays for learning its taps from the
data, which shows up as a small horizontal offset.
"""

import sys

import numpy as np

from nuscmodem import harness

trials = int(sys.argv[1]) if len(sys.argv) > 1 else 10
spec = harness.ExperimentSpec(snr_db=(2.0, 4.0, 6.0, 8.0, 10.0), trials=trials, master_seed=1)
print(f"{trials} packets per point\n")
print(" SNR dB    DD BER     reference  ratio  output SNR")
report = harness.run_sweep(
    spec,
    progress=lambda p: print(f"{p.snr_db:7.1f}  {p.dd_ber:9.2e}  {p.ber_ref:9.2e}  "
                             f"{p.dd_ber / p.ber_ref:5.2f}  {p.mean_output_snr_db:6.1f} dB"),
)

snr = [p.snr_db for p in report.points]
ber = [p.dd_ber for p in report.points]
print()
for target in (1e-2, 1e-3):
    got = harness.snr_for_ber(snr, ber, target)
    ref = harness.reference_snr_for_ber(target)
    print(f"BER {target:g}: needs {got:.2f} dB, reference {ref:.2f} dB ({got - ref:+.2f} dB)")

# the output SNR of a converged equalizer should track the input SNR plus
# the matched-filter gain 10 log10(1 + beta)
print(f"\nexpected output SNR at 10 dB input: about {10 + 10 * np.log10(1.3):.1f} dB")
