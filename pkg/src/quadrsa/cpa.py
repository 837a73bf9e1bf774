"""Correlation power analysis against the right-to-left exponentiation.

Target: the first Montgomery product of each exponent bit.  With the bits
below ``i`` already known, the attacker can replay the exponentiation up to
bit ``i`` for every known plaintext.  If bit ``i`` is set the next product
is the multiply ``R <- Mont(R, P)``, otherwise it is the square
``P <- Mont(P, P)``; each guess therefore predicts the Hamming distance of a
different accumulator write.  The guess whose prediction correlates best
with the samples of that product's window wins.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

from quadrsa.bigint import as_int, hamming_distance
from quadrsa.errors import DomainError, UndefinedCorrelationError
from quadrsa.montgomery import DEFAULT_CONFIG, MontContext, ParallelConfig, mont_parallel

FIRST_LOOP_OP = 2  # MONT1 and MONT2 precede the exponent loop


@dataclass
class TraceSet:
    traces: np.ndarray
    plaintexts: list
    alignment: dict
    protected: bool = False

    def __post_init__(self):
        self.traces = np.asarray(self.traces, dtype=float)
        if self.traces.ndim != 2:
            raise DomainError("traces must be an N x T matrix")
        n, t = self.traces.shape
        if len(self.plaintexts) != n:
            raise DomainError(f"{len(self.plaintexts)} plaintexts for {n} traces")
        for idx, (a, b) in self.alignment.items():
            if not 0 <= a < b <= t:
                raise DomainError(f"window {idx} = [{a}, {b}) outside [0, {t})")

    @property
    def shape(self) -> tuple[int, int]:
        return self.traces.shape


@dataclass
class CpaResult:
    peaks: dict  # guess -> max |r| over the window (nan if undefined)
    best: int
    curves: dict = field(repr=False, default_factory=dict)
    failed: bool = False

    @property
    def best_r(self) -> float:
        return self.peaks[self.best]


@dataclass
class AttackResult:
    bits: list
    per_bit: list
    degenerate_traces: int = 0

    @property
    def recovered(self) -> int:
        return sum(b << i for i, b in enumerate(self.bits))

    @property
    def best_correlation(self) -> float:
        """Mean over bits of the winning hypothesis' peak |r|."""
        vals = [r.best_r for r in self.per_bit if not r.failed]
        return float(np.mean(vals)) if vals else float("nan")

    @property
    def max_correlation(self) -> float:
        vals = [r.best_r for r in self.per_bit if not r.failed]
        return float(np.max(vals)) if vals else float("nan")

    @property
    def failed_bits(self) -> list:
        return [i for i, r in enumerate(self.per_bit) if r.failed]

    def accuracy(self, truth: int) -> float:
        if not self.bits:
            return float("nan")
        return sum(b == ((truth >> i) & 1) for i, b in enumerate(self.bits)) / len(self.bits)


def pearson(x: Sequence[float], y: Sequence[float]) -> float:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise DomainError("pearson needs two 1-D sequences of equal length")
    if x.size < 2:
        raise DomainError("pearson needs at least two points")
    xc, yc = x - x.mean(), y - y.mean()
    sx, sy = np.sqrt(xc @ xc), np.sqrt(yc @ yc)
    if sx == 0 or sy == 0:
        raise UndefinedCorrelationError("correlation undefined for a constant sequence")
    return float(np.clip((xc @ yc) / (sx * sy), -1.0, 1.0))


def correlate_columns(h: np.ndarray, window: np.ndarray) -> np.ndarray:
    """Pearson r of ``h`` with every column of ``window``; nan for constant columns."""
    h = np.asarray(h, dtype=float)
    hc = h - h.mean()
    hn = np.sqrt(hc @ hc)
    if hn == 0:
        raise UndefinedCorrelationError("hypothesis is constant across traces")
    wc = window - window.mean(axis=0)
    wn = np.sqrt(np.einsum("ij,ij->j", wc, wc))
    with np.errstate(invalid="ignore", divide="ignore"):
        r = (hc @ wc) / (hn * wn)
    r[wn == 0] = np.nan
    return np.clip(r, -1.0, 1.0)


class _Replay:
    """Montgomery-domain (P, R) of the exponentiation for one plaintext."""

    __slots__ = ("p", "r")

    def __init__(self, plaintext: int, ctx: MontContext, cfg: ParallelConfig):
        c = ctx.r2_mod_m
        self.p = mont_parallel(c, plaintext, ctx, cfg)
        self.r = mont_parallel(c, 1, ctx, cfg)

    def predict(self, guess: int, ctx: MontContext, cfg: ParallelConfig) -> int:
        if guess:
            return hamming_distance(self.r, mont_parallel(self.r, self.p, ctx, cfg))
        return hamming_distance(self.p, mont_parallel(self.p, self.p, ctx, cfg))

    def advance(self, bit: int, ctx: MontContext, cfg: ParallelConfig) -> None:
        if bit:
            self.r = mont_parallel(self.r, self.p, ctx, cfg)
        self.p = mont_parallel(self.p, self.p, ctx, cfg)


def hypothesize(plaintext: int, known_prefix_bits: Sequence[int], guess: int,
                ctx: MontContext, cfg: ParallelConfig = DEFAULT_CONFIG) -> int:
    """Predicted leakage of the first product of the next exponent bit.

    Replays the exponentiation through ``known_prefix_bits`` (LSB first) and
    returns the Hamming distance of the accumulator write the next product
    would make if that bit equals ``guess``.
    """
    plaintext = as_int(plaintext)
    if not 0 <= plaintext < ctx.m:
        raise DomainError("plaintext must be below the modulus")
    state = _Replay(plaintext, ctx, cfg)
    for b in known_prefix_bits:
        state.advance(b, ctx, cfg)
    return state.predict(guess, ctx, cfg)


def _op_index(prefix: Sequence[int]) -> int:
    return FIRST_LOOP_OP + sum(1 + b for b in prefix)


def _score(h: np.ndarray, window: np.ndarray) -> tuple[float, np.ndarray]:
    try:
        curve = correlate_columns(h, window)
    except UndefinedCorrelationError:
        return float("nan"), np.full(window.shape[1], np.nan)
    if np.all(np.isnan(curve)):
        return float("nan"), curve
    return float(np.nanmax(np.abs(curve))), curve


def attack_exponent(ts: TraceSet, modulus: int, bits_to_recover: int, n_bits: int,
                    cfg: ParallelConfig = DEFAULT_CONFIG) -> AttackResult:
    """Recover ``bits_to_recover`` exponent bits, LSB first.

    ``n_bits`` is the machine's Montgomery block width, a public design
    parameter.  Ties go to guess 0; a bit whose correlations are both
    undefined is flagged as failed and recorded as 0.
    """
    n, _ = ts.traces.shape
    if n < 2:
        raise DomainError("CPA needs at least two traces")
    ctx = MontContext.for_config(modulus, cfg, n_bits)
    replays = [_Replay(pt, ctx, cfg) for pt in ts.plaintexts]
    degenerate = sum(1 for pt in ts.plaintexts if pt == 0)
    bits: list[int] = []
    per_bit: list[CpaResult] = []
    for _ in range(bits_to_recover):
        win = ts.alignment.get(_op_index(bits))
        if win is None:
            per_bit.append(CpaResult({0: float("nan"), 1: float("nan")}, 0, {}, True))
            bits.append(0)
            continue
        window = ts.traces[:, win[0]:win[1]]
        peaks, curves = {}, {}
        for g in (0, 1):
            h = np.array([s.predict(g, ctx, cfg) for s in replays], dtype=float)
            peaks[g], curves[g] = _score(h, window)
        p0, p1 = peaks[0], peaks[1]
        failed = np.isnan(p0) and np.isnan(p1)
        best = 1 if (not np.isnan(p1) and (np.isnan(p0) or p1 > p0)) else 0
        per_bit.append(CpaResult(peaks, best, curves, bool(failed)))
        bits.append(best)
        for s in replays:
            s.advance(best, ctx, cfg)
    return AttackResult(bits, per_bit, degenerate)


class ProtectionReport(NamedTuple):
    clean_correlation: float
    protected_correlation: float
    clean_accuracy: float
    protected_accuracy: float
    ratio: float
    clean: AttackResult
    protected: AttackResult


def compare_protection(clean: TraceSet, protected: TraceSet, truth: int, modulus: int,
                       bits_to_recover: int, n_bits: int,
                       cfg: ParallelConfig = DEFAULT_CONFIG) -> ProtectionReport:
    if clean.traces.shape != protected.traces.shape:
        raise DomainError("clean and protected sets must share geometry")
    a = attack_exponent(clean, modulus, bits_to_recover, n_bits, cfg)
    b = attack_exponent(protected, modulus, bits_to_recover, n_bits, cfg)
    ca, pa = a.best_correlation, b.best_correlation
    return ProtectionReport(ca, pa, a.accuracy(truth), b.accuracy(truth), pa / ca, a, b)


def write_report_csv(result: AttackResult, path: str | Path, truth: int | None = None) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["bit_index", "guess0_r", "guess1_r", "chosen", "correct"])
        for i, r in enumerate(result.per_bit):
            correct = "" if truth is None else int(r.best == ((truth >> i) & 1))
            w.writerow([i, f"{r.peaks[0]:.6f}", f"{r.peaks[1]:.6f}", r.best, correct])
        acc = "" if truth is None else f"{result.accuracy(truth):.4f}"
        fh.write(f"# recovered=0x{result.recovered:x},bits={len(result.bits)},"
                 f"best_correlation={result.best_correlation:.6f},accuracy={acc},"
                 f"failed_bits={len(result.failed_bits)},degenerate_traces={result.degenerate_traces}\n")
