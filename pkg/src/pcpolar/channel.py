"""BPSK over AWGN, LLR computation, and rate-matching application/reversal.

SNR convention is Es/N0 with unit-energy BPSK; sigma = sqrt(1/(2*10^(snr/10)))
per real dimension, and llr = 2*y/sigma^2 (positive favors bit 0). Helpers
convert to/from Eb/N0 for reporting.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .construction import LLR_SAT, RateMatchPattern


def snr_db_to_sigma(snr_db: float) -> float:
    return float(np.sqrt(1.0 / (2.0 * 10.0 ** (snr_db / 10.0))))


def esn0_to_ebn0(esn0_db: float, K: int, M: int) -> float:
    return esn0_db - 10.0 * np.log10(K / M)


def ebn0_to_esn0(ebn0_db: float, K: int, M: int) -> float:
    return ebn0_db + 10.0 * np.log10(K / M)


@dataclass(frozen=True)
class ChannelConfig:
    snr_db: float
    seed: int = 0
    sigma: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "sigma", snr_db_to_sigma(self.snr_db))


def apply_rate_matching(c: np.ndarray, pattern: RateMatchPattern) -> np.ndarray:
    """Drop the rate-matched positions, preserving index order."""
    c = np.asarray(c)
    if c.shape[-1] != pattern.N:
        raise ValueError(f"codeword length {c.shape[-1]} != N {pattern.N}")
    return c[..., pattern.kept]

def derate_match(
    llr_m: np.ndarray, pattern: RateMatchPattern, saturation: float = LLR_SAT
) -> np.ndarray:
    """Expand M received LLRs to N decoder inputs: punctured positions get 0
    (unknown bits), shortened positions get +saturation (known zero bits)."""
    llr_m = np.asarray(llr_m, dtype=np.float64)
    if llr_m.shape[-1] != pattern.M:
        raise ValueError(f"LLR length {llr_m.shape[-1]} != M {pattern.M}")
    out = np.zeros(llr_m.shape[:-1] + (pattern.N,), dtype=np.float64)
    out[..., pattern.kept] = llr_m
    if pattern.mode == "shorten" and pattern.pattern.size:
        out[..., pattern.pattern] = saturation
    return out


def bpsk_awgn_llr(
    c_hat: np.ndarray, sigma: float, rng: np.random.Generator
) -> np.ndarray:
    """Modulate (0 -> +1, 1 -> -1), add Normal(0, sigma^2) noise, return LLRs."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    x = 1.0 - 2.0 * np.asarray(c_hat, dtype=np.float64)
    y = x + sigma * rng.standard_normal(x.shape)
    return 2.0 * y / (sigma * sigma)


def llr_from_noise(c_hat: np.ndarray, noise: np.ndarray, sigma: float) -> np.ndarray:
    """LLRs from pre-drawn standard-normal noise; lets sweeps reuse one noise
    realization across SNR points (common random numbers)."""
    x = 1.0 - 2.0 * np.asarray(c_hat, dtype=np.float64)
    y = x + sigma * noise
    return 2.0 * y / (sigma * sigma)
