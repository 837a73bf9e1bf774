"""Montgomery multiplication: radix-2 reference, word radix, and k-partition.

All variants compute ``x * y * 2^-n mod m`` for ``0 <= x, y < m``.  The
k-partition multiplier splits the multiplier ``x`` into interleaved digit
slots: with ``k`` partitions of ``d``-bit digits the combined word radix is
``w = k*d`` bits, and partition ``j`` owns bits ``[w*i + d*j, w*i + d*j + d)``
of ``x`` for every iteration ``i``.  Each partition is an ordinary word-radix
Montgomery loop whose addends come from the limited digit set
``{0, Y, 2Y, 3Y} << d*j``; the partial products are summed and reduced at
the end.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

from quadrsa.bigint import BigUint, IntLike, as_int, mod_reduce, neg_inv_mod_pow2
from quadrsa.errors import DomainError, InvariantError

SUPPORTED_DIGIT_BITS = (1, 2, 4, 8)
MAX_WORD_RADIX_BITS = 32


@dataclass(frozen=True)
class ParallelConfig:
    partitions_k: int = 4
    digit_bits: int = 2
    constant_time: bool = False

    def __post_init__(self):
        if self.partitions_k < 1:
            raise DomainError(f"partitions_k must be >= 1, got {self.partitions_k}")
        if self.digit_bits not in SUPPORTED_DIGIT_BITS:
            raise DomainError(f"digit_bits must be one of {SUPPORTED_DIGIT_BITS}, got {self.digit_bits}")
        if self.word_radix_bits > MAX_WORD_RADIX_BITS:
            raise DomainError(
                f"partitions_k * digit_bits = {self.word_radix_bits} exceeds the "
                f"{MAX_WORD_RADIX_BITS}-bit word"
            )

    @property
    def word_radix_bits(self) -> int:
        return self.partitions_k * self.digit_bits

    def iterations(self, n: int) -> int:
        """Per-partition loop count t = n / word_radix_bits."""
        if n <= 0 or n % self.word_radix_bits:
            raise DomainError(f"word radix {self.word_radix_bits} bits does not divide n={n}")
        return n // self.word_radix_bits


DEFAULT_CONFIG = ParallelConfig()


@dataclass(frozen=True)
class MontContext:
    m: int
    n: int
    r2_mod_m: int
    m_prime_w: int
    word_radix_bits: int

    def __post_init__(self):
        w = self.word_radix_bits
        if not self.m & 1 or self.m <= 0:
            raise DomainError("Montgomery modulus must be odd and positive")
        if self.m >> self.n:
            raise DomainError(f"modulus needs more than n={self.n} bits")
        if self.n % w:
            raise DomainError(f"word radix {w} does not divide n={self.n}")
        if (self.m * self.m_prime_w) & ((1 << w) - 1) != (1 << w) - 1:
            raise InvariantError("m_prime_w is not -m^-1 mod 2^w")
        if not 0 <= self.r2_mod_m < self.m:
            raise InvariantError("r2_mod_m out of range")

    @classmethod
    def create(cls, m: IntLike, word_radix_bits: int = 8, n: int | None = None) -> MontContext:
        mv = as_int(m)
        if mv <= 0 or not mv & 1:
            raise DomainError(f"Montgomery modulus must be odd and positive, got {mv}")
        if n is None:
            n = max(word_radix_bits, -(-mv.bit_length() // word_radix_bits) * word_radix_bits)
        r2 = mod_reduce(BigUint.from_int(1 << (2 * n)), BigUint.from_int(mv)).value
        mp = neg_inv_mod_pow2(mv, word_radix_bits, max(32, word_radix_bits))
        return cls(mv, n, r2, mp, word_radix_bits)

    @classmethod
    def for_config(cls, m: IntLike, cfg: ParallelConfig = DEFAULT_CONFIG, n: int | None = None) -> MontContext:
        return cached_context(as_int(m), cfg.word_radix_bits, n)

    @property
    def r_mod_m(self) -> int:
        """Montgomery form of 1, i.e. 2^n mod m."""
        return (1 << self.n) % self.m


@lru_cache(maxsize=256)
def cached_context(m: int, word_radix_bits: int, n: Optional[int]) -> MontContext:
    return MontContext.create(m, word_radix_bits, n)


@dataclass(frozen=True)
class PartitionState:
    """Accumulator snapshot after one iteration of a partition loop."""

    j: int
    iteration: int
    digit: int
    q: int
    s: int
    multiples: tuple[int, ...]


def _operands(x: IntLike, y: IntLike, ctx: MontContext) -> tuple[int, int]:
    x, y = as_int(x), as_int(y)
    if not (0 <= x < ctx.m and 0 <= y < ctx.m):
        raise DomainError("Montgomery operands must satisfy 0 <= x, y < m")
    return x, y


def conditional_subtract(s: int, m: int, constant_time: bool = False, width: int = 0) -> int:
    """Return ``s - m`` if ``s >= m`` else ``s``.

    The constant-time form selects with a sign mask instead of a branch;
    ``width`` must bound the bit length of ``s``.
    """
    if not constant_time:
        return s - m if s >= m else s
    d = s - m
    sign = d >> (max(width, s.bit_length(), m.bit_length()) + 1)
    return d + (m & sign)


def mont_radix2(x: IntLike, y: IntLike, ctx: MontContext, constant_time: bool = False) -> int:
    """Bit-serial Montgomery product; one bit of ``x`` per iteration."""
    x, y = _operands(x, y, ctx)
    m = ctx.m
    s = 0
    for i in range(ctx.n):
        a = s + y if (x >> i) & 1 else s
        s = (a + m) >> 1 if a & 1 else a >> 1
    return conditional_subtract(s, m, constant_time, ctx.n + 1)


def mont_word(
    x: IntLike,
    y: IntLike,
    ctx: MontContext,
    trace: list | None = None,
    constant_time: bool = False,
) -> int:
    """Word-radix Montgomery product consuming ``ctx.word_radix_bits`` of x per step.

    If ``trace`` is a list, one :class:`PartitionState` is appended per loop
    iteration.
    """
    x, y = _operands(x, y, ctx)
    m, w, mp = ctx.m, ctx.word_radix_bits, ctx.m_prime_w
    mask = (1 << w) - 1
    s = 0
    for i in range(ctx.n // w):
        digit = (x >> (w * i)) & mask
        a = s + digit * y
        q = ((a & mask) * mp) & mask
        u = a + q * m
        if u & mask:
            raise InvariantError("low word of a + q*m is not zero")
        s = u >> w
        if trace is not None:
            trace.append(PartitionState(0, i, digit, q, s, ()))
    return conditional_subtract(s, m, constant_time, ctx.n + w + 2)


def precompute_digit_multiples(y: IntLike, j: int, cfg: ParallelConfig = DEFAULT_CONFIG) -> tuple[int, ...]:
    """Addends ``{0, y, 2y, 3y, ...} << digit_bits*j`` for partition ``j``.

    Built from shifts and single additions only, as a datapath would.
    """
    y = as_int(y)
    if y < 0:
        raise DomainError("multiplicand must be non-negative")
    if not 0 <= j < cfg.partitions_k:
        raise DomainError(f"partition index {j} outside [0, {cfg.partitions_k})")
    base = y << (cfg.digit_bits * j)
    mults = [0] * (1 << cfg.digit_bits)
    for v in range(1, len(mults)):
        mults[v] = mults[v >> 1] << 1 if v % 2 == 0 else mults[v - 1] + base
    return tuple(mults)


def partition_operand(x: IntLike, j: int, cfg: ParallelConfig, n: int) -> int:
    """The sub-multiplier of partition ``j``: x restricted to j's digit slots."""
    x = as_int(x)
    w, d = cfg.word_radix_bits, cfg.digit_bits
    slot = ((1 << d) - 1) << (d * j)
    mask = 0
    for i in range(cfg.iterations(n)):
        mask |= slot << (w * i)
    return x & mask


def _check_config(ctx: MontContext, cfg: ParallelConfig) -> int:
    if cfg.word_radix_bits != ctx.word_radix_bits:
        raise DomainError(
            f"config word radix {cfg.word_radix_bits} does not match context radix {ctx.word_radix_bits}"
        )
    return cfg.iterations(ctx.n)


def mmp_partition(
    j: int,
    x: IntLike,
    y: IntLike,
    ctx: MontContext,
    cfg: ParallelConfig = DEFAULT_CONFIG,
    trace: list | None = None,
) -> int:
    """Montgomery product of partition j's sub-multiplier with ``y``.

    Returns ``z < m`` with ``z == X_Pj * y * 2^-n (mod m)``.
    """
    x, y = _operands(x, y, ctx)
    t = _check_config(ctx, cfg)
    m, w, d, mp = ctx.m, cfg.word_radix_bits, cfg.digit_bits, ctx.m_prime_w
    wmask, dmask = (1 << w) - 1, (1 << cfg.digit_bits) - 1
    offset = d * j
    mults = precompute_digit_multiples(y, j, cfg)
    limit = 1 << (ctx.n + w + 2)
    s = 0
    for i in range(t):
        digit = (x >> (w * i + offset)) & dmask
        a = s + mults[digit]
        q = ((a & wmask) * mp) & wmask
        u = a + q * m
        if u & wmask:
            raise InvariantError(f"partition {j}, iteration {i}: low bits nonzero before shift")
        s = u >> w
        if s >= limit:
            raise InvariantError(f"partition {j}, iteration {i}: accumulator exceeds headroom")
        if trace is not None:
            trace.append(PartitionState(j, i, digit, q, s, mults))
    return conditional_subtract(s, m, cfg.constant_time, ctx.n + w + 2)


def mont_parallel(
    x: IntLike,
    y: IntLike,
    ctx: MontContext,
    cfg: ParallelConfig = DEFAULT_CONFIG,
    executor=None,
) -> int:
    """Run all k partitions and recombine their partial products.

    ``executor`` (any ``concurrent.futures.Executor``) may run the partitions
    concurrently; the sum is always taken in ascending partition order.
    """
    x, y = _operands(x, y, ctx)
    _check_config(ctx, cfg)
    k, m = cfg.partitions_k, ctx.m
    if executor is None:
        partials = [mmp_partition(j, x, y, ctx, cfg) for j in range(k)]
    else:
        futures = [executor.submit(mmp_partition, j, x, y, ctx, cfg) for j in range(k)]
        partials = [f.result() for f in futures]
    total = 0
    for z in partials:
        total += z
    if cfg.constant_time:
        for _ in range(k - 1):
            total = conditional_subtract(total, m, True, ctx.n + k.bit_length())
        if total >= m:
            raise InvariantError("partial-product sum not reduced after k-1 subtractions")
        return total
    subtractions = 0
    while total >= m:
        total -= m
        subtractions += 1
    if subtractions > k - 1:
        raise InvariantError(f"{subtractions} final subtractions for k={k}")
    return total
