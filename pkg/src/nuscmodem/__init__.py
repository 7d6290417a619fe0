"""Near-ultrasonic acoustic modem with a phase-coherent adaptive DFE receiver."""

from .channel import ChannelSpec, RoomImpulseResponse, apply_channel, image_source_rir, load_rir
from .dsp import BasebandSignal, FilterTaps, PassbandWaveform, design_rrc
from .eq import EqualizerConfig, equalize_packet
from .frames import Packet, build_payload, crc32_compute, verify_payload
from .harness import ExperimentSpec, receive, run_sweep, transmit
from .sync import SyncResult, detect_pilot
from .tx import ConfigError, ModemConfig, build_packet_waveform, data_rate, frank_code

__version__ = "0.1.0"

__all__ = [
    "BasebandSignal", "ChannelSpec", "ConfigError", "EqualizerConfig", "ExperimentSpec",
    "FilterTaps", "ModemConfig", "Packet", "PassbandWaveform", "RoomImpulseResponse",
    "SyncResult", "apply_channel", "build_packet_waveform", "build_payload", "crc32_compute",
    "data_rate", "design_rrc", "detect_pilot", "equalize_packet", "frank_code",
    "image_source_rir", "load_rir", "receive", "run_sweep", "transmit", "verify_payload",
]
