"""Carrier frequency offset and the embedded phase-locked loop.

A 1 Hz offset rotates the constellation by 360 degrees every second, about
a full turn over the data part of a packet. The loop inside the equalizer
turns its phase estimate to follow.
"""

import numpy as np

from nuscmodem import channel, harness

spec = harness.ExperimentSpec(snr_db=(20.0,), trials=1, master_seed=5, cfo_hz=1.0)
cfg = spec.modem
rng = np.random.default_rng(5)
bits = rng.integers(0, 2, 5120, dtype=np.uint8)
packet, wave = harness.transmit(bits, cfg)

for cfo in (0.0, 0.5, 1.0, 2.0):
    rx_wave = channel.apply_channel(
        wave, channel.ChannelSpec(snr_db=20.0, cfo_hz=cfo, seed=1), cfg.band)
    res = harness.receive(rx_wave, cfg, harness.training_symbols(packet, cfg), 5120)
    theta = np.degrees(res.equalized.theta)
    errors = harness.count_bit_errors(packet.payload, res.packet.payload)
    expected = 360 * cfo * (len(theta) - 1) / cfg.f_b
    print(f"offset {cfo:3.1f} Hz: theta turned {theta[-1] - theta[0]:7.1f} deg "
          f"(carrier drift over the packet {expected:6.1f} deg), "
          f"{errors} bit errors, CRC {'pass' if res.crc_ok else 'FAIL'}")
print("\nThe taps absorb part of the rotation while training, so theta lags the")
print("drift by a constant; the decisions only need the two to add up.")
