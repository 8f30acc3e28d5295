"""Reproducible Monte Carlo BLER engine: point estimates, SNR sweeps, and
required-SNR bisection.

Determinism contract: every result is a pure function of the experiment
config (seed included) and is independent of the worker count. Frames are
drawn in fixed-size batches; batch b takes its messages and noise from the
substream keyed by (seed, b), and batches are consumed in index order no
matter how they were computed. Two runs with the same seed and code
dimensions therefore see identical noise realizations even across schemes
and SNR points (common random numbers), which is what makes scheme-vs-scheme
SNR gaps measurable at desk scale.
"""

from __future__ import annotations

import csv
import io
import json
import multiprocessing
import os
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np

from .channel import apply_rate_matching, derate_match, llr_from_noise, snr_db_to_sigma
from .codec import (
    CRC8,
    CRC16,
    CrcSpec,
    DecoderConfig,
    ca_generator,
    encode_batch,
    pc_generator,
    scl_decode_batch,
)
from .construction import (
    GaConfig,
    brs_pattern,
    ca_allocation,
    ga_reliability,
    pw_sequence,
    pw_weights,
    qup_pattern,
    select_allocation,
)
from .core import CodeSpec

SCHEMES = ("pc-polar", "ca-polar-ga-qup", "ca-polar-pw-brs", "polar-no-assist")

BLER_COLUMNS = [
    "scheme", "N", "M", "K", "L", "crc_len", "alpha", "seed",
    "snr_db", "frames", "frame_errors", "bler",
]
SWEEP_COLUMNS = [
    "scheme", "N", "M", "K", "L", "crc_len", "alpha", "seed",
    "target_bler", "required_snr_db",
]


class BracketNotFoundError(RuntimeError):
    """BLER never crossed the target within the scanned SNR range."""


@dataclass(frozen=True)
class StopRule:
    min_frame_errors: int = 100
    max_frames: int = 1_000_000

    def __post_init__(self):
        if self.min_frame_errors < 1:
            raise ValueError("min_frame_errors must be >= 1")
        if self.max_frames < self.min_frame_errors:
            raise ValueError("max_frames must be >= min_frame_errors")


@dataclass(frozen=True)
class ExperimentConfig:
    spec: CodeSpec
    scheme: str = "pc-polar"
    list_size: int = 8
    crc_len: int = 0
    alpha: float = 1.0
    seed: int = 0
    stop: StopRule = field(default_factory=StopRule)
    pc_register_len: int = 5
    exact_metric: bool = False
    ga_design_snr_db: float | None = None  # None: use the evaluation SNR
    batch_size: int = 256

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}; pick from {SCHEMES}")
        if self.scheme.startswith("ca-") and self.crc_len not in (8, 16):
            raise ValueError("CRC-aided schemes need crc_len 8 or 16")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


@dataclass(frozen=True)
class BlerPoint:
    snr_db: float
    frames: int
    frame_errors: int
    bler: float

    @property
    def ci95_half_width(self) -> float:
        if self.frames == 0:
            return 1.0
        return 1.96 * float(
            np.sqrt(max(self.bler * (1.0 - self.bler), 1e-12) / self.frames)
        )


def _crc_spec(crc_len: int) -> CrcSpec | None:
    if crc_len == 0:
        return None
    if crc_len == 8:
        return CRC8
    if crc_len == 16:
        return CRC16
    raise ValueError(f"unsupported CRC length {crc_len}")


@dataclass(frozen=True)
class _Context:
    """Construction products for one (config, SNR) operating point."""

    pattern: object
    alloc: object
    generator: np.ndarray
    decoder: DecoderConfig
    sigma: float


@lru_cache(maxsize=16)
def build_context(cfg: ExperimentConfig, snr_db: float) -> _Context:
    spec = cfg.spec
    crc = _crc_spec(cfg.crc_len)
    if cfg.scheme == "pc-polar":
        pattern = brs_pattern(spec)
        alloc = select_allocation(spec, pw_sequence(spec.N), pattern, cfg.alpha)
        gen = pc_generator(alloc, cfg.pc_register_len)
        dec = DecoderConfig(
            list_size=cfg.list_size,
            mode="pc-scl",
            pc_register_len=cfg.pc_register_len,
            exact_metric=cfg.exact_metric,
        )
    elif cfg.scheme == "ca-polar-ga-qup":
        pattern = qup_pattern(spec)
        design = cfg.ga_design_snr_db if cfg.ga_design_snr_db is not None else snr_db
        means = ga_reliability(spec, GaConfig(design_snr_db=design), pattern)
        alloc = ca_allocation(spec, means, pattern, cfg.crc_len)
        gen = ca_generator(alloc, crc)
        dec = DecoderConfig(
            list_size=cfg.list_size, mode="ca-scl", crc=crc,
            exact_metric=cfg.exact_metric,
        )
    elif cfg.scheme == "ca-polar-pw-brs":
        pattern = brs_pattern(spec)
        alloc = ca_allocation(spec, pw_weights(spec.N), pattern, cfg.crc_len)
        gen = ca_generator(alloc, crc)
        dec = DecoderConfig(
            list_size=cfg.list_size, mode="ca-scl", crc=crc,
            exact_metric=cfg.exact_metric,
        )
    else:  # polar-no-assist
        pattern = brs_pattern(spec)
        alloc = ca_allocation(spec, pw_weights(spec.N), pattern, 0)
        gen = ca_generator(alloc, None)
        dec = DecoderConfig(
            list_size=cfg.list_size, mode="scl", exact_metric=cfg.exact_metric,
        )
    return _Context(
        pattern=pattern, alloc=alloc, generator=gen, decoder=dec,
        sigma=snr_db_to_sigma(snr_db),
    )


def _batch_schedule(stop: StopRule, batch_size: int) -> list[int]:
    sizes = []
    left = stop.max_frames
    while left > 0:
        sizes.append(min(batch_size, left))
        left -= batch_size
    return sizes


def run_batch(cfg: ExperimentConfig, snr_db: float, batch_idx: int, size: int) -> int:
    """Simulate one batch of frames; returns the frame-error count."""
    ctx = build_context(cfg, snr_db)
    rng = np.random.default_rng([cfg.seed, batch_idx])
    msgs = rng.integers(0, 2, size=(size, cfg.spec.K), dtype=np.uint8)
    noise = rng.standard_normal((size, cfg.spec.M))
    cw = encode_batch(msgs, ctx.generator)
    c_hat = apply_rate_matching(cw, ctx.pattern)
    llr_m = llr_from_noise(c_hat, noise, ctx.sigma)
    llr_n = derate_match(llr_m, ctx.pattern)
    decoded, _, _ = scl_decode_batch(llr_n, ctx.alloc, ctx.decoder)
    return int(np.any(decoded != msgs, axis=1).sum())


def _run_batch_star(args):
    return run_batch(*args)


def simulate_bler(
    cfg: ExperimentConfig, snr_db: float, workers: int = 1
) -> BlerPoint:
    """Monte Carlo BLER at one SNR point; stops at min_frame_errors or
    max_frames, consuming whole batches in index order."""
    sizes = _batch_schedule(cfg.stop, cfg.batch_size)
    frames = 0
    errors = 0

    def should_stop():
        return errors >= cfg.stop.min_frame_errors or frames >= cfg.stop.max_frames

    if workers <= 1:
        for b, size in enumerate(sizes):
            errors += run_batch(cfg, snr_db, b, size)
            frames += size
            if should_stop():
                break
    else:
        tasks = ((cfg, snr_db, b, size) for b, size in enumerate(sizes))
        with multiprocessing.Pool(processes=workers) as pool:
            for b, nerr in enumerate(pool.imap(_run_batch_star, tasks)):
                errors += nerr
                frames += sizes[b]
                if should_stop():
                    pool.terminate()
                    break
    return BlerPoint(
        snr_db=snr_db, frames=frames, frame_errors=errors,
        bler=errors / frames if frames else 0.0,
    )


def required_snr(
    cfg: ExperimentConfig,
    target_bler: float,
    resolution_db: float = 0.1,
    scan_lo: float = -2.0,
    scan_hi: float = 10.0,
    scan_step: float = 1.0,
    workers: int = 1,
) -> float:
    """SNR at which BLER crosses the target, by coarse scan then bisection.

    Raises BracketNotFoundError when the scan range never crosses the target.
    """
    if not 0.0 < target_bler < 1.0:
        raise ValueError("target BLER must be in (0, 1)")
    if resolution_db <= 0:
        raise ValueError("resolution must be positive")
    lo = None
    hi = None
    snr = scan_lo
    prev = None
    while snr <= scan_hi + 1e-9:
        point = simulate_bler(cfg, snr, workers=workers)
        if point.bler < target_bler:
            if prev is None:
                raise BracketNotFoundError(
                    f"BLER {point.bler:.4g} already below target at {snr} dB"
                )
            lo, hi = prev, snr
            break
        prev = snr
        snr += scan_step
    if lo is None:
        raise BracketNotFoundError(
            f"BLER stayed above {target_bler} up to {scan_hi} dB"
        )
    while hi - lo > resolution_db:
        mid = 0.5 * (lo + hi)
        if simulate_bler(cfg, mid, workers=workers).bler >= target_bler:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# Sweeps with resumable CSV/JSON output
# ---------------------------------------------------------------------------


def format_float(x: float) -> str:
    return f"{x:.6g}"


def _row_key(row: dict, key_fields: list[str]) -> tuple:
    return tuple(str(row[k]) for k in key_fields)


def _bler_row(cfg: ExperimentConfig, point: BlerPoint) -> dict:
    return {
        "scheme": cfg.scheme,
        "N": cfg.spec.N,
        "M": cfg.spec.M,
        "K": cfg.spec.K,
        "L": cfg.list_size,
        "crc_len": cfg.crc_len,
        "alpha": format_float(cfg.alpha),
        "seed": cfg.seed,
        "snr_db": format_float(point.snr_db),
        "frames": point.frames,
        "frame_errors": point.frame_errors,
        "bler": format_float(point.bler),
    }


def _sweep_row(cfg: ExperimentConfig, target_bler: float, snr: float) -> dict:
    return {
        "scheme": cfg.scheme,
        "N": cfg.spec.N,
        "M": cfg.spec.M,
        "K": cfg.spec.K,
        "L": cfg.list_size,
        "crc_len": cfg.crc_len,
        "alpha": format_float(cfg.alpha),
        "seed": cfg.seed,
        "target_bler": format_float(target_bler),
        "required_snr_db": format_float(snr),
    }


class SweepWriter:
    """Appends result rows to a CSV file (plus a JSON mirror), skipping rows
    whose key columns already exist so interrupted sweeps can resume."""

    def __init__(self, path: str, columns: list[str], key_fields: list[str]):
        self.path = path
        self.columns = columns
        self.key_fields = key_fields
        self.existing: set[tuple] = set()
        self.rows: list[dict] = []
        if path and os.path.exists(path):
            with open(path, newline="") as fh:
                for row in csv.DictReader(fh):
                    self.existing.add(_row_key(row, key_fields))
                    self.rows.append(row)
        elif path:
            with open(path, "w", newline="") as fh:
                csv.DictWriter(fh, fieldnames=columns).writeheader()

    def seen(self, row: dict) -> bool:
        return _row_key(row, self.key_fields) in self.existing

    def append(self, row: dict):
        row = {k: str(v) for k, v in row.items()}
        self.rows.append(row)
        self.existing.add(_row_key(row, self.key_fields))
        if self.path:
            with open(self.path, "a", newline="") as fh:
                csv.DictWriter(fh, fieldnames=self.columns).writerow(row)
            with open(self._json_path(), "w") as fh:
                json.dump(self.rows, fh, indent=1)
                fh.write("\n")

    def _json_path(self) -> str:
        base, _ = os.path.splitext(self.path)
        return base + ".json"


def sweep_bler(
    cfg: ExperimentConfig,
    snr_list: list[float],
    out_path: str | None = None,
    workers: int = 1,
    progress=None,
) -> list[dict]:
    """One BLER row per SNR point; resumable when out_path already has rows."""
    writer = SweepWriter(out_path, BLER_COLUMNS, BLER_COLUMNS[:9])
    for snr in snr_list:
        probe = _bler_row(cfg, BlerPoint(snr, 0, 0, 0.0))
        if writer.seen(probe):
            continue
        point = simulate_bler(cfg, snr, workers=workers)
        row = _bler_row(cfg, point)
        writer.append(row)
        if progress:
            progress(row)
    return writer.rows


def sweep_required_snr(
    base_cfg: ExperimentConfig,
    cases: list[tuple[int, int]],
    target_bler: float,
    resolution_db: float = 0.1,
    out_path: str | None = None,
    workers: int = 1,
    progress=None,
) -> list[dict]:
    """One required-SNR row per (K, M) case; resumable like sweep_bler."""
    writer = SweepWriter(out_path, SWEEP_COLUMNS, SWEEP_COLUMNS[:9])
    for K, M in cases:
        cfg = replace(base_cfg, spec=CodeSpec.from_KM(K, M))
        probe = _sweep_row(cfg, target_bler, 0.0)
        if writer.seen(probe):
            continue
        snr = required_snr(
            cfg, target_bler, resolution_db=resolution_db, workers=workers
        )
        row = _sweep_row(cfg, target_bler, snr)
        writer.append(row)
        if progress:
            progress(row)
    return writer.rows


def rows_to_csv_text(rows: list[dict], columns: list[str]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=columns)
    w.writeheader()
    for r in rows:
        w.writerow({k: str(r[k]) for k in columns})
    return buf.getvalue()
