"""Reliability orderings, rate-matching patterns, and bit-set allocation.

Provides the channel-independent polarization-weight (PW) ordering, the
bit-reversed shortening (BRS) and quasi-uniform puncturing (QUP) patterns,
a Gaussian-approximation reliability baseline, and the information/frozen/
parity-check allocation used by the encoder and decoders.

All operations are pure functions of their inputs; results may be cached
and shared read-only across workers.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .core import CodeSpec, InfeasibleConstructionError, row_weights

PW_BETA = 2.0 ** 0.25

# Mean-LLR assigned to shortened (known-zero) positions before GA propagation,
# and the matching decoder-side LLR saturation. True infinities poison metric
# arithmetic downstream.
LLR_SAT = 1000.0

ROLE_FROZEN = 0
ROLE_INFO = 1
ROLE_PC = 2


@dataclass(frozen=True)
class ReliabilitySequence:
    """Per-index reliability weights and the ascending-reliability permutation."""

    weights: np.ndarray
    order: np.ndarray
    beta: float = PW_BETA

    def to_dict(self) -> dict:
        return {"N": int(self.order.size), "Q": [int(q) for q in self.order]}


@dataclass(frozen=True)
class RateMatchPattern:
    """Rate-matching pattern: indices in `pattern` are not transmitted."""

    mode: str  # "shorten" or "puncture"
    N: int
    M: int
    pattern: np.ndarray  # sorted indices, |pattern| = N - M
    reversed_seq: np.ndarray | None = None  # full bit-reversed sequence T (shorten)

    @cached_property
    def kept(self) -> np.ndarray:
        """Transmitted codeword positions, in original index order."""
        keep = np.ones(self.N, dtype=bool)
        keep[self.pattern] = False
        return np.flatnonzero(keep)


@dataclass(frozen=True)
class GaConfig:
    """Design point for the Gaussian-approximation reliability calculation."""

    design_snr_db: float = 2.0

    def __post_init__(self):
        if not np.isfinite(self.design_snr_db):
            raise ValueError("design SNR must be finite")


@dataclass(frozen=True)
class Allocation:
    """Partition of sub-channels into information, frozen, and PC sets."""

    N: int
    info: np.ndarray
    frozen: np.ndarray
    pc: np.ndarray
    w_min: int = 0
    f: int = 0
    f1: int = 0
    f2: int = 0
    alpha: float = 1.0
    pre_pc: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))

    def __post_init__(self):
        total = self.info.size + self.frozen.size + self.pc.size
        if total != self.N:
            raise InfeasibleConstructionError("I, F, P do not partition [0, N)")

    @cached_property
    def roles(self) -> np.ndarray:
        r = np.full(self.N, ROLE_FROZEN, dtype=np.uint8)
        r[self.info] = ROLE_INFO
        r[self.pc] = ROLE_PC
        return r

    def to_dict(self) -> dict:
        return {
            "N": self.N,
            "I": [int(i) for i in self.info],
            "P": [int(i) for i in self.pc],
            "F": [int(i) for i in self.frozen],
            "w_min": int(self.w_min),
            "f": int(self.f),
            "f1": int(self.f1),
            "f2": int(self.f2),
            "alpha": float(self.alpha),
            "pre_pc": [int(i) for i in self.pre_pc],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Allocation":
        return cls(
            N=int(d["N"]),
            info=np.asarray(sorted(d["I"]), dtype=np.int64),
            frozen=np.asarray(sorted(d["F"]), dtype=np.int64),
            pc=np.asarray(sorted(d["P"]), dtype=np.int64),
            w_min=int(d.get("w_min", 0)),
            f=int(d.get("f", 0)),
            f1=int(d.get("f1", 0)),
            f2=int(d.get("f2", 0)),
            alpha=float(d.get("alpha", 1.0)),
            pre_pc=np.asarray(sorted(d.get("pre_pc", [])), dtype=np.int64),
        )


def _check_mother_length(N: int) -> int:
    n = int(N).bit_length() - 1
    if N < 2 or N != 1 << n:
        raise ValueError(f"N={N} is not a power of two >= 2")
    return n


def pw_weights(N: int) -> np.ndarray:
    """Polarization weight W_i = sum_j b_j * beta^j over i's binary expansion."""
    n = _check_mother_length(N)
    idx = np.arange(N)
    w = np.zeros(N, dtype=np.float64)
    for j in range(n):
        w += ((idx >> j) & 1) * PW_BETA**j
    return w


def pw_sequence(N: int) -> ReliabilitySequence:
    """Ascending-reliability ordering under PW; ties break by ascending index."""
    w = pw_weights(N)
    order = np.argsort(w, kind="stable")
    return ReliabilitySequence(weights=w, order=order.astype(np.int64))


def bit_reverse_vec(idx: np.ndarray, n: int) -> np.ndarray:
    out = np.zeros_like(idx)
    v = idx.copy()
    for _ in range(n):
        out = (out << 1) | (v & 1)
        v >>= 1
    return out


def brs_pattern(spec: CodeSpec) -> RateMatchPattern:
    """Bit-reversed shortening: T_j = BR(N-1-j); shorten the first N-M entries.

    The shortened sub-channels must also be frozen (the allocation routines
    enforce pattern ⊆ F), which guarantees the shortened codeword bits are
    known zeros at the receiver.
    """
    T = bit_reverse_vec(np.arange(spec.N - 1, -1, -1, dtype=np.int64), spec.n)
    R = np.sort(T[: spec.N - spec.M])
    return RateMatchPattern(
        mode="shorten", N=spec.N, M=spec.M, pattern=R, reversed_seq=T
    )


def qup_pattern(spec: CodeSpec) -> RateMatchPattern:
    """Quasi-uniform puncturing: drop the first N-M coded bits."""
    R = np.arange(spec.N - spec.M, dtype=np.int64)
    return RateMatchPattern(mode="puncture", N=spec.N, M=spec.M, pattern=R)


def no_rate_matching(N: int) -> RateMatchPattern:
    return RateMatchPattern(
        mode="shorten", N=N, M=N, pattern=np.empty(0, dtype=np.int64)
    )


# ---------------------------------------------------------------------------
# Gaussian approximation of density evolution
# ---------------------------------------------------------------------------
# Two-segment approximation of phi(x) = 1 - E[tanh(w/2)], w ~ Normal(x, 2x).
# Validated against a Monte Carlo density-evolution oracle in the test suite.

_PHI_A = 0.4527
_PHI_B = 0.86
_PHI_C = 0.0218
_PHI_SEG_BOUNDARY = float(np.exp(_PHI_C - _PHI_A * 10.0**_PHI_B))  # phi(10)


def ga_phi(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore", under="ignore"):
        small = np.exp(_PHI_C - _PHI_A * np.power(np.maximum(x, 1e-300), _PHI_B))
        large = np.sqrt(np.pi / np.maximum(x, 1e-300)) * np.exp(-x / 4.0) * (
            1.0 - 10.0 / (7.0 * np.maximum(x, 1e-300))
        )
    out = np.where(x < 10.0, small, large)
    return np.minimum(np.where(x <= 0.0, 1.0, out), 1.0)


def _phi_inv_tail(y: np.ndarray) -> np.ndarray:
    # Bisection on the x >= 10 segment, which is strictly decreasing.
    lo = np.full_like(y, 10.0)
    hi = 4.0 * (-np.log(np.maximum(y, 1e-320))) + 100.0
    for _ in range(70):
        mid = 0.5 * (lo + hi)
        too_big = ga_phi(mid) > y  # phi decreasing: phi(mid) > y means x > mid
        lo = np.where(too_big, mid, lo)
        hi = np.where(too_big, hi, mid)
    return 0.5 * (lo + hi)


def ga_phi_inv(y: np.ndarray) -> np.ndarray:
    y = np.asarray(y, dtype=np.float64)
    y = np.clip(y, 0.0, 1.0)
    out = np.zeros_like(y)
    seg1 = (y < 1.0) & (y >= _PHI_SEG_BOUNDARY)
    if np.any(seg1):
        out[seg1] = np.power((_PHI_C - np.log(y[seg1])) / _PHI_A, 1.0 / _PHI_B)
    tail = y < _PHI_SEG_BOUNDARY
    if np.any(tail):
        out[tail] = _phi_inv_tail(y[tail])
    return out


def ga_check_update(ma: np.ndarray, mb: np.ndarray) -> np.ndarray:
    """Mean-LLR update of the check (minus) branch for unequal input means."""
    y = 1.0 - (1.0 - ga_phi(ma)) * (1.0 - ga_phi(mb))
    return ga_phi_inv(y)


def ga_reliability(
    spec: CodeSpec, cfg: GaConfig, pattern: RateMatchPattern
) -> np.ndarray:
    """GA-propagated mean LLR of each sub-channel; larger mean = more reliable.

    Punctured codeword positions enter with mean 0 (unknown bits), shortened
    positions with a saturated mean (known bits). The recursion mirrors the
    decoder's f/g pairing: at block size 2h, position j pairs with j+h; the
    check result feeds the lower half (earlier sub-channels) and the sum the
    upper half.
    """
    m_ch = 4.0 * 10.0 ** (cfg.design_snr_db / 10.0)
    m = np.full(spec.N, m_ch, dtype=np.float64)
    if pattern.pattern.size:
        m[pattern.pattern] = 0.0 if pattern.mode == "puncture" else LLR_SAT
    half = spec.N // 2
    while half >= 1:
        blocks = m.reshape(-1, 2, half)
        a = blocks[:, 0, :].copy()
        b = blocks[:, 1, :].copy()
        blocks[:, 0, :] = ga_check_update(a, b)
        blocks[:, 1, :] = a + b
        half //= 2
    return m


# ---------------------------------------------------------------------------
# Bit-set allocation
# ---------------------------------------------------------------------------


def select_allocation(
    spec: CodeSpec,
    rel: ReliabilitySequence,
    pattern: RateMatchPattern,
    alpha: float = 1.0,
) -> Allocation:
    """Information/frozen/PC bit-set selection for parity-check Polar codes.

    Steps:
      1. f = floor(log2(N) * (alpha - |alpha*(K/M - 1/2)|^2)), clamped to
         [0, floor((M-K)/2)].
      2. w_min = smallest row weight within the K+f most reliable sub-channels
         (excluding rate-matched indices); n_wmin = how many of those K+f
         sub-channels have that weight.
      3. Pre-select f1 PC bits at weight w_min and f2 at weight 2*w_min, by
         descending reliability, skipping rate-matched indices, where
         (f1, f2) = (f, 0) if f <= n_wmin else (n_wmin, floor(3/4*(f-n_wmin))).
      4. I = the K most reliable indices, skipping rate-matched indices and
         the pre-selected PC bits.
      5. P = everything else outside the rate-matching pattern; F = pattern.
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    N, M, K = spec.N, spec.M, spec.K
    if rel.order.size != N:
        raise ValueError("reliability sequence length mismatch")

    f_raw = np.log2(N) * (alpha - abs(alpha * (K / M - 0.5)) ** 2)
    f = int(np.floor(f_raw))
    f = max(0, min(f, (M - K) // 2))

    in_R = np.zeros(N, dtype=bool)
    in_R[pattern.pattern] = True
    desc = rel.order[::-1]
    desc = desc[~in_R[desc]]  # descending reliability, rate-matched skipped

    weights = row_weights(N)
    window = desc[: K + f]
    w_min = int(weights[window].min())
    n_wmin = int(np.count_nonzero(weights[window] == w_min))

    if f <= n_wmin:
        f1, f2 = f, 0
    else:
        f1, f2 = n_wmin, int(np.floor(0.75 * (f - n_wmin)))

    cand1 = desc[weights[desc] == w_min][:f1]
    cand2 = desc[weights[desc] == 2 * w_min][:f2]
    pre_pc = np.concatenate([cand1, cand2])
    f1, f2 = int(cand1.size), int(cand2.size)

    if K + f1 + f2 > N - pattern.pattern.size:
        raise InfeasibleConstructionError(
            f"cannot place K={K} info and {f1 + f2} PC bits in {N - pattern.pattern.size} slots"
        )

    in_pre = np.zeros(N, dtype=bool)
    in_pre[pre_pc] = True
    info = desc[~in_pre[desc]][:K]
    if info.size != K:
        raise InfeasibleConstructionError("not enough sub-channels for K info bits")

    taken = np.zeros(N, dtype=bool)
    taken[info] = True
    pc = np.flatnonzero(~taken & ~in_R)

    return Allocation(
        N=N,
        info=np.sort(info),
        frozen=pattern.pattern.copy(),
        pc=np.sort(pc),
        w_min=w_min,
        f=f,
        f1=f1,
        f2=f2,
        alpha=alpha,
        pre_pc=np.sort(pre_pc),
    )


def ca_allocation(
    spec: CodeSpec,
    reliability: np.ndarray,
    pattern: RateMatchPattern,
    crc_len: int = 0,
) -> Allocation:
    """Baseline CRC-aided allocation: K + crc_len most reliable sub-channels
    (skipping rate-matched indices) form the joint info+CRC set; no PC bits.
    """
    N = spec.N
    reliability = np.asarray(reliability, dtype=np.float64)
    if reliability.size != N:
        raise ValueError("reliability vector length mismatch")
    n_avail = N - pattern.pattern.size
    if spec.K + crc_len > n_avail:
        raise InfeasibleConstructionError(
            f"K+crc={spec.K + crc_len} exceeds {n_avail} available sub-channels"
        )
    in_R = np.zeros(N, dtype=bool)
    in_R[pattern.pattern] = True
    desc = np.argsort(reliability, kind="stable")[::-1]
    desc = desc[~in_R[desc]]
    info = np.sort(desc[: spec.K + crc_len])
    taken = np.zeros(N, dtype=bool)
    taken[info] = True
    frozen = np.flatnonzero(~taken)
    weights = row_weights(N)
    return Allocation(
        N=N,
        info=info,
        frozen=frozen,
        pc=np.empty(0, dtype=np.int64),
        w_min=int(weights[info].min()),
        alpha=0.0,
    )
