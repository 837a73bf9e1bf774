"""Power model, random-noise countermeasure and randomness checks.

The countermeasure stands in for a TRNG whose delay cells also burn random
power: a seeded bit stream is turned into additive per-cycle noise.
"""

from __future__ import annotations

import csv
import math
import random
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path
from typing import NamedTuple, Optional, Sequence

import numpy as np

from quadrsa import hwsim
from quadrsa.cpa import TraceSet
from quadrsa.errors import DomainError, ParseError
from quadrsa.montgomery import DEFAULT_CONFIG, ParallelConfig

DEFAULT_NOISE_RATIO = 2.0
SIGNIFICANCE = 0.01


@dataclass
class PowerTrace:
    samples: np.ndarray
    plaintext: Optional[int] = None
    seed: object = None
    protected: bool = False

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=float)
        if self.samples.ndim != 1:
            raise DomainError("power trace must be one-dimensional")
        if not np.all(np.isfinite(self.samples)):
            raise DomainError("power trace contains non-finite samples")

    def __len__(self) -> int:
        return len(self.samples)


class NoiseDistribution(str, Enum):
    UNIFORM = "uniform"
    BITSTREAM = "bit-stream-scaled"


@dataclass(frozen=True)
class NoiseConfig:
    """``amplitude`` is the peak per-cycle noise; both distributions have mean amplitude/2."""

    seed: object = 0
    amplitude: float = 0.0
    distribution: NoiseDistribution = NoiseDistribution.UNIFORM

    def __post_init__(self):
        if not self.amplitude >= 0:
            raise DomainError(f"noise amplitude must be >= 0, got {self.amplitude}")
        object.__setattr__(self, "distribution", NoiseDistribution(self.distribution))

    @property
    def mean(self) -> float:
        return self.amplitude / 2

    @property
    def std(self) -> float:
        return self.amplitude * noise_std_per_amplitude(self.distribution)


def noise_std_per_amplitude(distribution: NoiseDistribution) -> float:
    if NoiseDistribution(distribution) is NoiseDistribution.UNIFORM:
        # discrete uniform on {0..255} / 255
        return math.sqrt((256 ** 2 - 1) / 12) / 255
    return 0.5


def power_model(trace: hwsim.SimTrace, unit: float = 1.0, baseline: float = 0.0,
                plaintext: Optional[int] = None) -> PowerTrace:
    """Hamming-distance power: ``baseline + unit * toggled bits`` per cycle."""
    return PowerTrace(baseline + unit * trace.toggles_total().astype(float), plaintext)


def random_bitstream(seed, length: int) -> np.ndarray:
    """Deterministic pseudo-random bits (uint8 0/1) standing in for the TRNG."""
    if length <= 0:
        raise DomainError("bit stream length must be positive")
    rng = np.random.default_rng(seed)
    return rng.integers(0, 2, size=length, dtype=np.uint8)


def noise_samples(cfg: NoiseConfig, length: int) -> np.ndarray:
    if cfg.distribution is NoiseDistribution.UNIFORM:
        bits = random_bitstream(cfg.seed, 8 * length)
        chunks = np.packbits(bits.reshape(length, 8), axis=1)[:, 0]
        return cfg.amplitude * chunks.astype(float) / 255.0
    return cfg.amplitude * random_bitstream(cfg.seed, length).astype(float)


def apply_countermeasure(clean: PowerTrace, cfg: NoiseConfig) -> PowerTrace:
    noisy = clean.samples + noise_samples(cfg, len(clean)) if cfg.amplitude else clean.samples.copy()
    return PowerTrace(noisy, clean.plaintext, cfg.seed, True)


def data_dependent_std(traces: np.ndarray) -> float:
    """RMS over cycles of the across-trace standard deviation."""
    traces = np.asarray(traces, dtype=float)
    if traces.ndim != 2 or traces.shape[0] < 2:
        raise DomainError("need a 2-D array with at least two traces")
    return float(np.sqrt(np.mean(np.var(traces, axis=0))))


def calibrate_noise(clean: TraceSet, seed=0, ratio: float = DEFAULT_NOISE_RATIO,
                    distribution: NoiseDistribution = NoiseDistribution.UNIFORM) -> NoiseConfig:
    """Noise whose standard deviation is ``ratio`` times the clean data-dependent power."""
    target = ratio * data_dependent_std(clean.traces)
    return NoiseConfig(seed, target / noise_std_per_amplitude(distribution), distribution)


# -- randomness tests ------------------------------------------------------------

class RandomnessResult(NamedTuple):
    passed: bool
    statistic: float
    p_value: float


def _as_bits(bits) -> np.ndarray:
    arr = np.asarray(bits, dtype=np.int64).ravel()
    if arr.size < 100:
        raise DomainError(f"randomness tests need at least 100 bits, got {arr.size}")
    if np.any((arr != 0) & (arr != 1)):
        raise DomainError("bit sequence must contain only 0 and 1")
    return arr


def monobit_test(bits, alpha: float = SIGNIFICANCE) -> RandomnessResult:
    """Frequency test: statistic |#ones - #zeros| / sqrt(n)."""
    arr = _as_bits(bits)
    s_obs = abs(int(2 * arr.sum() - arr.size)) / math.sqrt(arr.size)
    p = math.erfc(s_obs / math.sqrt(2))
    return RandomnessResult(p >= alpha, s_obs, p)


def runs_test(bits, alpha: float = SIGNIFICANCE) -> RandomnessResult:
    """Runs test; statistic is the total number of runs V_n."""
    arr = _as_bits(bits)
    n = arr.size
    pi = arr.sum() / n
    runs = int(np.count_nonzero(np.diff(arr))) + 1
    if abs(pi - 0.5) >= 2 / math.sqrt(n):
        return RandomnessResult(False, float(runs), 0.0)
    p = math.erfc(abs(runs - 2 * n * pi * (1 - pi)) / (2 * math.sqrt(2 * n) * pi * (1 - pi)))
    return RandomnessResult(p >= alpha, float(runs), p)


def randomness_tests(bits, alpha: float = SIGNIFICANCE) -> dict[str, RandomnessResult]:
    return {"monobit": monobit_test(bits, alpha), "runs": runs_test(bits, alpha)}


# -- trace sets ----------------------------------------------------------------

def collect_traces(exponent: int, modulus: int, n_traces: int, seed: int = 0,
                   n_bits: int | None = None, cfg: ParallelConfig = DEFAULT_CONFIG,
                   unit: float = 1.0, baseline: float = 0.0,
                   plaintexts: Sequence[int] | None = None) -> TraceSet:
    """Simulate one exponentiation per random plaintext and model its power."""
    if n_traces < 1:
        raise DomainError("need at least one trace")
    if n_bits is None:
        n_bits = hwsim.block_bits_for(modulus, exponent, cfg=cfg)
    if plaintexts is None:
        rng = random.Random(seed)
        plaintexts = [rng.randrange(1, modulus) for _ in range(n_traces)]
    rows, alignment = [], None
    for pt in plaintexts:
        run = hwsim.simulate_rsa(exponent, modulus, pt, n_bits, cfg)
        rows.append(power_model(run.trace, unit, baseline, pt).samples)
        windows = hwsim.op_windows(run.op_log)
        if alignment is None:
            alignment = windows
        elif windows != alignment:
            raise DomainError("runs disagree on Montgomery op timing")
    return TraceSet(np.vstack(rows), list(plaintexts), alignment, protected=False)


def protect_traceset(clean: TraceSet, noise: NoiseConfig) -> TraceSet:
    """Apply the countermeasure to every trace; trace i uses seed (seed, i)."""
    rows = []
    for i, row in enumerate(clean.traces):
        cfg = replace(noise, seed=(_seed_int(noise.seed), i))
        rows.append(apply_countermeasure(PowerTrace(row), cfg).samples)
    return TraceSet(np.vstack(rows), list(clean.plaintexts), dict(clean.alignment), protected=True)


def _seed_int(seed) -> int:
    if isinstance(seed, (tuple, list)):
        raise DomainError("trace-set noise seed must be a single integer")
    return int(seed)


def write_traceset_csv(ts: TraceSet, path: str | Path) -> None:
    n, t = ts.traces.shape
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["plaintext"] + [f"s{i}" for i in range(t)] + ["protected"])
        for pt, row in zip(ts.plaintexts, ts.traces):
            w.writerow([format(pt, "x")] + [repr(float(v)) for v in row] + [int(ts.protected)])


def read_traceset_csv(path: str | Path, n_bits: int, cfg: ParallelConfig = DEFAULT_CONFIG) -> TraceSet:
    """Parse a trace-set CSV; alignment is rebuilt from the machine geometry."""
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise ParseError(f"cannot read trace set: {exc}") from None
    if len(rows) < 2:
        raise ParseError("trace set has no data rows")
    header = rows[0]
    if len(header) < 3 or header[0] != "plaintext" or header[-1] != "protected":
        raise ParseError("trace set header must be plaintext,s0..,protected")
    width = len(header)
    plaintexts, data, flags = [], [], set()
    for lineno, row in enumerate(rows[1:], 2):
        if len(row) != width:
            raise ParseError(f"line {lineno}: expected {width} columns, got {len(row)}")
        try:
            plaintexts.append(int(row[0], 16))
            data.append([float(v) for v in row[1:-1]])
            flags.add(int(row[-1]))
        except ValueError as exc:
            raise ParseError(f"line {lineno}: {exc}") from None
    if len(flags) != 1 or not flags <= {0, 1}:
        raise ParseError("protected column must be a single 0/1 value across rows")
    traces = np.array(data, dtype=float)
    if not np.all(np.isfinite(traces)):
        raise ParseError("trace set contains non-finite samples")
    alignment = geometry_windows(traces.shape[1], n_bits, cfg)
    return TraceSet(traces, plaintexts, alignment, protected=bool(flags.pop()))


def geometry_windows(n_samples: int, n_bits: int, cfg: ParallelConfig = DEFAULT_CONFIG,
                     bus_bits: int = hwsim.BUS_BITS) -> dict[int, tuple[int, int]]:
    """Montgomery op windows implied by the machine geometry and trace length."""
    words = n_bits // bus_bits
    op_len = cfg.iterations(n_bits) + hwsim.HANDSHAKE_CYCLES
    body = n_samples - 5 * words - hwsim.START_OVERHEAD_CYCLES
    if body <= 0 or body % op_len:
        raise ParseError(f"{n_samples} samples do not match a {n_bits}-bit machine geometry")
    start = 4 * words + hwsim.START_OVERHEAD_CYCLES
    return {i: (start + i * op_len, start + (i + 1) * op_len) for i in range(body // op_len)}
