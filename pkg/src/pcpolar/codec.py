"""Polar transform, CSR parity-check pre-coding, CRC, and SC/SCL decoding.

Decoders are single-threaded per call; distinct calls run concurrently on
distinct frames. The batch entry points decode many frames at once with the
same allocation, which is how the simulation engine drives them.

LLR sign convention: llr = log(P(y|bit=0)/P(y|bit=1)); positive favors 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .construction import ROLE_FROZEN, ROLE_INFO, ROLE_PC, Allocation

_LLR_DTYPE = np.float32

DEFAULT_PC_REGISTER_LEN = 5


def polar_transform(bits: np.ndarray) -> np.ndarray:
    """Multiply by the n-fold Kronecker power of [[1,0],[1,1]] over GF(2).

    Operates on the last axis, which must be a power of two. The transform
    is an involution: applying it twice returns the input.
    """
    x = np.array(bits, dtype=np.uint8, copy=True)
    N = x.shape[-1]
    if N == 0 or N & (N - 1):
        raise ValueError(f"length {N} is not a power of two")
    h = 1
    while h < N:
        v = x.reshape(-1, N // (2 * h), 2, h)
        v[:, :, 0, :] ^= v[:, :, 1, :]
        h *= 2
    return x


class PcRegister:
    """Cyclic shift register of length p implementing all PC functions.

    A left rotation moves y[1] into y[0]; information bits are XORed into
    y[0]; PC bits read y[0]. Rotation is tracked as an offset, so reads and
    writes cost O(1).
    """

    def __init__(self, p: int = DEFAULT_PC_REGISTER_LEN):
        if p < 1:
            raise ValueError("register length must be >= 1")
        self.p = p
        self.cells = [0] * p
        self._offset = 0

    def rotate(self):
        self._offset = (self._offset + 1) % self.p

    @property
    def head(self) -> int:
        return self.cells[self._offset]

    def feed(self, bit: int):
        self.cells[self._offset] ^= bit


def pc_precode(u: np.ndarray, alloc: Allocation, p: int = DEFAULT_PC_REGISTER_LEN) -> np.ndarray:
    """Expand K information bits to the N-length pre-coded vector.

    Walks sub-channels in order, rotating the register once per position:
    information bits are copied out and fed into the register head, PC bits
    take the register head value, frozen bits are zero. Net effect: every PC
    bit equals the XOR of the preceding same-residue (mod p) information bits.
    """
    u = np.asarray(u, dtype=np.uint8)
    if u.size != alloc.info.size:
        raise ValueError(f"expected {alloc.info.size} info bits, got {u.size}")
    roles = alloc.roles
    reg = PcRegister(p)
    u_hat = np.zeros(alloc.N, dtype=np.uint8)
    k = 0
    for i in range(alloc.N):
        reg.rotate()
        role = roles[i]
        if role == ROLE_INFO:
            u_hat[i] = u[k]
            reg.feed(int(u[k]))
            k += 1
        elif role == ROLE_PC:
            u_hat[i] = reg.head
    return u_hat


# ---------------------------------------------------------------------------
# CRC
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CrcSpec:
    """CRC polynomial as an integer including the x^degree term, MSB first."""

    poly: int
    degree: int

    def __post_init__(self):
        if self.poly >> self.degree != 1:
            raise ValueError("polynomial must have degree exactly `degree`")
        if self.poly & 1 != 1:
            raise ValueError("polynomial must have a unit constant term")

    @property
    def bits(self) -> np.ndarray:
        return np.array(
            [(self.poly >> (self.degree - i)) & 1 for i in range(self.degree + 1)],
            dtype=np.uint8,
        )


CRC8 = CrcSpec(poly=0x1CF, degree=8)  # D^8+D^7+D^6+D^3+D^2+D+1
CRC16 = CrcSpec(poly=0x11B2B, degree=16)  # D^16+D^12+D^11+D^9+D^8+D^5+D^3+D+1


def crc_remainder(bits: np.ndarray, spec: CrcSpec) -> np.ndarray:
    """Remainder of bits(x) * x^degree modulo the CRC polynomial."""
    bits = np.asarray(bits, dtype=np.uint8)
    buf = np.concatenate([bits, np.zeros(spec.degree, dtype=np.uint8)])
    pb = spec.bits
    d = spec.degree
    for i in range(bits.size):
        if buf[i]:
            buf[i : i + d + 1] ^= pb
    return buf[bits.size :]


def crc_attach(bits: np.ndarray, spec: CrcSpec) -> np.ndarray:
    bits = np.asarray(bits, dtype=np.uint8)
    return np.concatenate([bits, crc_remainder(bits, spec)])


def crc_check(bits_with_crc: np.ndarray, spec: CrcSpec) -> bool:
    """Pass iff the whole word is divisible by the CRC polynomial."""
    v = np.asarray(bits_with_crc, dtype=np.uint8)
    if v.size <= spec.degree:
        raise ValueError("input shorter than CRC degree")
    buf = v.copy()
    pb = spec.bits
    d = spec.degree
    for i in range(v.size - d):
        if buf[i]:
            buf[i : i + d + 1] ^= pb
    return not buf[v.size - d :].any()


def crc_check_matrix(length: int, spec: CrcSpec) -> np.ndarray:
    """Matrix S with (v @ S) % 2 == 0 iff crc_check(v) passes, for |v|=length."""
    S = np.empty((length, spec.degree), dtype=np.uint8)
    e = np.zeros(length, dtype=np.uint8)
    for j in range(length):
        e[j] = 1
        buf = e.copy()
        for i in range(length - spec.degree):
            if buf[i]:
                buf[i : i + spec.degree + 1] ^= spec.bits
        S[j] = buf[length - spec.degree :]
        e[j] = 0
    return S


# ---------------------------------------------------------------------------
# Path metric
# ---------------------------------------------------------------------------


def path_metric_update(pm: float, llr: float, bit: int, exact: bool = False) -> float:
    """Penalty-style path metric: lower is better, never decreases.

    Default is the hard-decision approximation (add |llr| when the bit
    disagrees with the sign decision); `exact` switches to the smooth
    log(1+exp) variant.
    """
    if pm < 0:
        raise ValueError("path metric must be non-negative")
    if exact:
        return pm + float(np.logaddexp(0.0, -(1.0 - 2.0 * bit) * llr))
    hard = 0 if llr >= 0 else 1
    return pm + (abs(llr) if bit != hard else 0.0)


@dataclass
class DecoderConfig:
    """Knobs for the list decoder family."""

    list_size: int = 8
    mode: str = "pc-scl"  # sc | scl | ca-scl | pc-scl
    crc: CrcSpec | None = None
    pc_register_len: int = DEFAULT_PC_REGISTER_LEN
    exact_metric: bool = False

    def __post_init__(self):
        if self.list_size < 1:
            raise ValueError("list size must be >= 1")
        if self.mode not in ("sc", "scl", "ca-scl", "pc-scl"):
            raise ValueError(f"unknown decoder mode {self.mode!r}")
        if self.mode == "ca-scl" and self.crc is None:
            raise ValueError("ca-scl requires a CRC spec")


@dataclass
class DecodeResult:
    message: np.ndarray
    selected_path_metric: float
    passed: bool
    list_dump: list | None = None


# ---------------------------------------------------------------------------
# Successive cancellation (plain, no list)
# ---------------------------------------------------------------------------


def _info_prefix_counts(roles: np.ndarray) -> np.ndarray:
    counts = np.zeros(roles.size + 1, dtype=np.int64)
    np.cumsum(roles == ROLE_INFO, out=counts[1:])
    return counts


def _forced_block(llr: np.ndarray, roles_slice: np.ndarray, reg: np.ndarray, pos: int):
    """Decode a subtree containing no information bits in one shot.

    Inside such a block the register never changes (only information bits
    feed it), so every forced bit is a periodic register readout: position i
    reads cell (i+1) mod p. With the min-sum f/g pair and the hard-decision
    penalty, the total penalty across the subtree equals the disagreement
    mass against the block codeword at the subtree root, so no per-leaf LLRs
    are needed.
    """
    w = llr.shape[-1]
    p = reg.shape[-1]
    cells = (pos + 1 + np.arange(w)) % p
    u = reg[..., cells]
    if (roles_slice == ROLE_FROZEN).any():
        u = np.where(roles_slice == ROLE_FROZEN, 0, u).astype(np.uint8)
    c = polar_transform(u)
    pen = np.where((llr < 0) != c.astype(bool), np.abs(llr), 0.0)
    return u, c, pen.sum(axis=-1, dtype=np.float64)


class _ScState:
    __slots__ = ("roles", "p", "pos", "reg", "pm", "u_hat", "exact", "info_prefix")

    def __init__(self, F, alloc, p, exact):
        self.roles = alloc.roles
        self.p = p
        self.pos = 0
        self.reg = np.zeros((F, p), dtype=np.uint8)
        self.pm = np.zeros(F, dtype=np.float64)
        self.u_hat = np.zeros((F, alloc.N), dtype=np.uint8)
        self.exact = exact
        self.info_prefix = _info_prefix_counts(alloc.roles)


def _f_llr(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.copysign(np.minimum(np.abs(a), np.abs(b)), a * b)


def _g_llr(a: np.ndarray, b: np.ndarray, u: np.ndarray) -> np.ndarray:
    return b + (1.0 - 2.0 * u.astype(_LLR_DTYPE)) * a


def _penalty(llr: np.ndarray, bit: np.ndarray, exact: bool) -> np.ndarray:
    if exact:
        return np.logaddexp(0.0, -(1.0 - 2.0 * bit.astype(np.float64)) * llr)
    hard = (llr < 0).astype(np.uint8)
    return np.where(bit != hard, np.abs(llr), 0.0).astype(np.float64)


def _sc_rec(state: _ScState, llr: np.ndarray) -> np.ndarray:
    w = llr.shape[-1]
    if w == 1:
        i = state.pos
        state.pos += 1
        lv = llr[:, 0]
        role = state.roles[i]
        cell = (i + 1) % state.p
        if role == ROLE_INFO:
            bit = (lv < 0).astype(np.uint8)
            state.reg[:, cell] ^= bit
        elif role == ROLE_PC:
            bit = state.reg[:, cell].copy()
        else:
            bit = np.zeros(lv.shape[0], dtype=np.uint8)
        state.pm += _penalty(lv, bit, state.exact)
        state.u_hat[:, i] = bit
        return bit[:, None]
    if (
        not state.exact
        and state.info_prefix[state.pos + w] == state.info_prefix[state.pos]
    ):
        i = state.pos
        u, bits, pen = _forced_block(llr, state.roles[i : i + w], state.reg, i)
        state.u_hat[:, i : i + w] = u
        state.pm += pen
        state.pos += w
        return bits
    h = w // 2
    a, b = llr[:, :h], llr[:, h:]
    left = _sc_rec(state, _f_llr(a, b))
    right = _sc_rec(state, _g_llr(a, b, left))
    return np.concatenate([left ^ right, right], axis=-1)


def sc_decode_batch(
    llrs: np.ndarray,
    alloc: Allocation,
    p: int = DEFAULT_PC_REGISTER_LEN,
    exact_metric: bool = False,
):
    """Decode a (frames, N) LLR array with plain SC; frozen bits force 0 and
    PC bits force the register-predicted value. Returns (u_hat, metrics)."""
    llrs = np.ascontiguousarray(llrs, dtype=_LLR_DTYPE)
    F, N = llrs.shape
    if N != alloc.N:
        raise ValueError(f"LLR length {N} != allocation N {alloc.N}")
    state = _ScState(F, alloc, p, exact_metric)
    _sc_rec(state, llrs)
    return state.u_hat, state.pm


def sc_decode(
    llr: np.ndarray, alloc: Allocation, p: int = DEFAULT_PC_REGISTER_LEN
) -> DecodeResult:
    """Single-frame successive cancellation decode."""
    u_hat, pm = sc_decode_batch(np.asarray(llr, dtype=np.float64)[None, :], alloc, p)
    return DecodeResult(
        message=u_hat[0, alloc.info],
        selected_path_metric=float(pm[0]),
        passed=True,
    )


# ---------------------------------------------------------------------------
# Successive cancellation list decoding
# ---------------------------------------------------------------------------


class _SclState:
    """Mutable list-decoder state for a batch of frames.

    Per-path arrays carry a (frames, L) leading shape. At each information
    bit the 2L candidate extensions are ranked by metric with a stable sort
    (parent index, then appended bit 0 before 1, break ties). Decisions are
    stored as fork genealogy (parent pointer + bit); messages are rebuilt by
    backtracking at the end. Live LLR blocks and pending left-subtree
    summaries are reordered lazily: each stack entry remembers the fork
    epoch it was pushed at, and the composed parent permutation is applied
    only when the entry is actually read again. The reordering is exact, so
    results are identical to an eager formulation.
    """

    __slots__ = (
        "F",
        "L",
        "roles",
        "p",
        "pos",
        "reg",
        "pm",
        "exact",
        "llr_stack",
        "bits_stack",
        "fork_parents",
        "fork_bits",
        "fork_identity",
        "_fidx",
        "_identity",
        "info_prefix",
    )

    def __init__(self, F, L, alloc, p, exact):
        self.F = F
        self.L = L
        self.roles = alloc.roles
        self.p = p
        self.pos = 0
        self.reg = np.zeros((F, L, p), dtype=np.uint8)
        self.pm = np.full((F, L), np.inf, dtype=np.float64)
        self.pm[:, 0] = 0.0
        self.exact = exact
        self.info_prefix = _info_prefix_counts(alloc.roles)
        self.llr_stack: list[list] = []
        self.bits_stack: list[list] = []
        self.fork_parents: list[np.ndarray] = []
        self.fork_bits: list[np.ndarray] = []
        self.fork_identity: list[bool] = []
        self._fidx = np.arange(F)[:, None]
        self._identity = np.arange(L, dtype=np.int16)[None, :]

    def _materialize(self, arr: np.ndarray, epoch: int) -> np.ndarray:
        """Apply the parent permutations accumulated since `epoch`."""
        here = len(self.fork_parents)
        m = None
        for t in range(here - 1, epoch - 1, -1):
            if self.fork_identity[t]:
                continue
            pt = self.fork_parents[t]
            m = pt if m is None else pt[self._fidx, m]
        if m is None:
            return arr
        return arr[self._fidx, m]

    def leaf(self, llr: np.ndarray) -> np.ndarray:
        i = self.pos
        self.pos += 1
        role = self.roles[i]
        cell = (i + 1) % self.p
        if role == ROLE_INFO:
            if self.exact:
                pen0 = np.logaddexp(0.0, -llr.astype(np.float64))
                pen1 = np.logaddexp(0.0, llr.astype(np.float64))
            else:
                pen0 = np.maximum(-llr, 0.0)
                pen1 = np.maximum(llr, 0.0)
            cand = np.empty((self.F, 2 * self.L), dtype=np.float64)
            cand[:, 0::2] = self.pm + pen0
            cand[:, 1::2] = self.pm + pen1
            sel = np.argsort(cand, axis=1, kind="stable")[:, : self.L]
            self.pm = np.take_along_axis(cand, sel, axis=1)
            parent = (sel >> 1).astype(np.int16)
            bit = (sel & 1).astype(np.uint8)
            identity = bool((parent == self._identity).all())
            if not identity:
                self.reg = self.reg[self._fidx, parent]
            self.reg[:, :, cell] ^= bit
            self.fork_parents.append(parent)
            self.fork_bits.append(bit)
            self.fork_identity.append(identity)
            return bit
        if role == ROLE_PC:
            bit = self.reg[:, :, cell].copy()
        else:
            bit = np.zeros((self.F, self.L), dtype=np.uint8)
        self.pm = self.pm + _penalty(llr, bit, self.exact)
        return bit

    def rec(self, llr: np.ndarray) -> np.ndarray:
        # Arrays held across child calls go through the epoch-tagged stacks:
        # a fork inside the subtree reorders paths, and the stale local is
        # refreshed by _materialize on the way out.
        w = llr.shape[-1]
        if w == 1:
            return self.leaf(llr[..., 0])[..., None]
        if (
            not self.exact
            and self.info_prefix[self.pos + w] == self.info_prefix[self.pos]
        ):
            _, bits, pen = _forced_block(
                llr, self.roles[self.pos : self.pos + w], self.reg, self.pos
            )
            self.pm = self.pm + pen
            self.pos += w
            return bits
        h = w // 2
        self.llr_stack.append([llr, len(self.fork_parents)])
        left = self.rec(_f_llr(llr[..., :h], llr[..., h:]))
        arr, epoch = self.llr_stack.pop()
        llr = self._materialize(arr, epoch)
        g_in = _g_llr(llr[..., :h], llr[..., h:], left)
        self.bits_stack.append([left, len(self.fork_parents)])
        right = self.rec(g_in)
        arr, epoch = self.bits_stack.pop()
        left = self._materialize(arr, epoch)
        return np.concatenate([left ^ right, right], axis=-1)

    def backtrack(self, sel: np.ndarray) -> np.ndarray:
        """Reconstruct info-bit sequences for the selected path(s) per frame."""
        T = len(self.fork_bits)
        out = np.empty((self.F, sel.shape[1], T), dtype=np.uint8)
        cur = sel.astype(np.int64).copy()
        for t in range(T - 1, -1, -1):
            out[:, :, t] = self.fork_bits[t][self._fidx, cur]
            cur = self.fork_parents[t][self._fidx, cur].astype(np.int64)
        return out


def scl_decode_batch(
    llrs: np.ndarray,
    alloc: Allocation,
    cfg: DecoderConfig,
    return_all: bool = False,
):
    """List-decode a (frames, N) LLR array.

    Frozen bits force 0 and PC bits force the register-predicted value on
    every path (metric-penalized, never forked); information bits fork and
    the L best candidates by path metric survive. With a CRC configured the
    final answer is the best-metric path that passes, falling back to the
    best-metric path (passed=False) when none does.

    Returns (messages, metrics, passed); with return_all also the full list
    of per-path messages, metrics and CRC flags.
    """
    llrs = np.ascontiguousarray(llrs, dtype=_LLR_DTYPE)
    F, N = llrs.shape
    if N != alloc.N:
        raise ValueError(f"LLR length {N} != allocation N {alloc.N}")
    L = cfg.list_size
    state = _SclState(F, L, alloc, cfg.pc_register_len, cfg.exact_metric)
    state.rec(np.repeat(llrs[:, None, :], L, axis=1))

    use_crc = cfg.mode == "ca-scl"
    if use_crc:
        all_bits = state.backtrack(np.tile(np.arange(L), (F, 1)))  # (F, L, KI)
        KI = all_bits.shape[2]
        S = crc_check_matrix(KI, cfg.crc)
        syn = all_bits.reshape(F * L, KI).astype(np.float32) @ S.astype(np.float32)
        ok = ~(syn.astype(np.int64) % 2).any(axis=1).reshape(F, L)
        masked = np.where(ok, state.pm, np.inf)
        best_ok = np.argmin(masked, axis=1)
        best_any = np.argmin(state.pm, axis=1)
        passed = ok.any(axis=1)
        sel = np.where(passed, best_ok, best_any)
        chosen = all_bits[np.arange(F), sel]
        messages = chosen[:, : KI - cfg.crc.degree]
        metrics = state.pm[np.arange(F), sel]
        if return_all:
            return messages, metrics, passed, (all_bits, state.pm, ok)
        return messages, metrics, passed
    sel = np.argmin(state.pm, axis=1)
    messages = state.backtrack(sel[:, None])[:, 0, :]
    metrics = state.pm[np.arange(F), sel]
    passed = np.ones(F, dtype=bool)
    if return_all:
        all_bits = state.backtrack(np.tile(np.arange(L), (F, 1)))
        ok = np.ones((F, L), dtype=bool)
        return messages, metrics, passed, (all_bits, state.pm, ok)
    return messages, metrics, passed


def scl_decode(
    llr: np.ndarray,
    alloc: Allocation,
    cfg: DecoderConfig,
    want_list: bool = False,
) -> DecodeResult:
    """Single-frame list decode; see scl_decode_batch."""
    out = scl_decode_batch(
        np.asarray(llr, dtype=np.float64)[None, :], alloc, cfg, return_all=want_list
    )
    if want_list:
        messages, metrics, passed, (all_bits, pm, ok) = out
        dump = [
            (all_bits[0, l], float(pm[0, l]), bool(ok[0, l]))
            for l in range(cfg.list_size)
        ]
    else:
        messages, metrics, passed = out
        dump = None
    return DecodeResult(
        message=messages[0],
        selected_path_metric=float(metrics[0]),
        passed=bool(passed[0]),
        list_dump=dump,
    )


# ---------------------------------------------------------------------------
# Batch encoding
# ---------------------------------------------------------------------------


def pc_generator(alloc: Allocation, p: int = DEFAULT_PC_REGISTER_LEN) -> np.ndarray:
    """Generator matrix (K, N) of the PC-precoded Polar code; rows are the
    codewords of unit messages (the whole encode chain is linear)."""
    K = alloc.info.size
    G = np.empty((K, alloc.N), dtype=np.uint8)
    e = np.zeros(K, dtype=np.uint8)
    for k in range(K):
        e[k] = 1
        G[k] = polar_transform(pc_precode(e, alloc, p))
        e[k] = 0
    return G


def ca_generator(alloc: Allocation, crc: CrcSpec | None) -> np.ndarray:
    """Generator matrix (K_msg, N) of the CRC-aided code: message + CRC bits
    occupy the joint info set in natural sub-channel order, CRC last."""
    KI = alloc.info.size
    K = KI - (crc.degree if crc else 0)
    if K <= 0:
        raise ValueError("info set smaller than CRC length")
    G = np.empty((K, alloc.N), dtype=np.uint8)
    e = np.zeros(K, dtype=np.uint8)
    for k in range(K):
        e[k] = 1
        joint = crc_attach(e, crc) if crc else e
        u = np.zeros(alloc.N, dtype=np.uint8)
        u[alloc.info] = joint
        G[k] = polar_transform(u)
        e[k] = 0
    return G


def encode_batch(msgs: np.ndarray, G: np.ndarray) -> np.ndarray:
    """GF(2) encode of (B, K) messages with a (K, N) generator matrix."""
    prod = msgs.astype(np.float32) @ G.astype(np.float32)
    return (prod.astype(np.int64) & 1).astype(np.uint8)
