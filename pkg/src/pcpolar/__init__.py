"""Parity-check Polar coding library and simulation toolkit."""

__version__ = "0.1.0"

from .core import CodeSpec, InfeasibleConstructionError, bit_reverse, row_weight
from .construction import (
    Allocation,
    GaConfig,
    RateMatchPattern,
    ReliabilitySequence,
    brs_pattern,
    ca_allocation,
    ga_reliability,
    pw_sequence,
    pw_weights,
    qup_pattern,
    select_allocation,
)
from .codec import (
    CRC8,
    CRC16,
    CrcSpec,
    DecodeResult,
    DecoderConfig,
    crc_attach,
    crc_check,
    path_metric_update,
    pc_precode,
    polar_transform,
    sc_decode,
    scl_decode,
)
from .channel import apply_rate_matching, bpsk_awgn_llr, derate_match

__all__ = [
    "CodeSpec",
    "InfeasibleConstructionError",
    "bit_reverse",
    "row_weight",
    "Allocation",
    "GaConfig",
    "RateMatchPattern",
    "ReliabilitySequence",
    "brs_pattern",
    "ca_allocation",
    "ga_reliability",
    "pw_sequence",
    "pw_weights",
    "qup_pattern",
    "select_allocation",
    "CRC8",
    "CRC16",
    "CrcSpec",
    "DecodeResult",
    "DecoderConfig",
    "crc_attach",
    "crc_check",
    "path_metric_update",
    "pc_precode",
    "polar_transform",
    "sc_decode",
    "scl_decode",
    "apply_rate_matching",
    "bpsk_awgn_llr",
    "derate_match",
]
