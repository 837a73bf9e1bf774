import random
from concurrent.futures import ThreadPoolExecutor

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import montgomery_reference
from quadrsa.errors import DomainError
from quadrsa.montgomery import (
    MontContext,
    ParallelConfig,
    mmp_partition,
    mont_parallel,
    mont_radix2,
    mont_word,
    partition_operand,
    precompute_digit_multiples,
)

CFG = ParallelConfig(4, 2)


def random_modulus(rng, n):
    return rng.getrandbits(n) | (1 << (n - 1)) | 1


def test_zero_annihilates():
    ctx = MontContext.create(101, 8)
    assert mont_radix2(0, 55, ctx) == 0
    assert mont_word(0, 55, ctx) == 0
    assert mont_parallel(0, 55, ctx, CFG) == 0
    for j in range(4):
        assert mmp_partition(j, 0, 55, ctx, CFG) == 0


def test_one_times_r2_is_r():
    rng = random.Random(3)
    for n in (8, 64, 256):
        m = random_modulus(rng, n)
        ctx = MontContext.create(m, 8, n)
        r = pow(2, n, m)
        assert mont_radix2(1, ctx.r2_mod_m, ctx) == r
        assert mont_parallel(1, ctx.r2_mod_m, ctx, CFG) == r
        assert ctx.r_mod_m == r


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 2**127).map(lambda v: 2 * v + 1), st.data())
def test_variants_match_reference(m, data):
    ctx = MontContext.for_config(m, CFG)
    x = data.draw(st.integers(0, m - 1))
    y = data.draw(st.integers(0, m - 1))
    ref = montgomery_reference(x, y, m, ctx.n)
    assert mont_radix2(x, y, ctx) == ref
    assert mont_word(x, y, ctx) == ref
    assert mont_parallel(x, y, ctx, CFG) == ref


def test_partition_products_recombine():
    rng = random.Random(4)
    m = random_modulus(rng, 128)
    ctx = MontContext.create(m, 8, 128)
    x, y = rng.randrange(m), rng.randrange(m)
    parts = [partition_operand(x, j, CFG, 128) for j in range(4)]
    assert sum(parts) == x
    for j in range(4):
        assert mmp_partition(j, x, y, ctx, CFG) == montgomery_reference(parts[j], y, m, 128)


def test_partition_iteration_counts():
    m = random_modulus(random.Random(5), 1024)
    for d, expected in ((2, 128), (4, 64)):
        cfg = ParallelConfig(4, d)
        ctx = MontContext.create(m, cfg.word_radix_bits, 1024)
        trace = []
        mmp_partition(1, m - 2, m - 3, ctx, cfg, trace)
        assert len(trace) == expected
        word_trace = []
        mont_word(m - 2, m - 3, ctx, word_trace)
        assert len(word_trace) == expected


def test_digit_multiples():
    assert precompute_digit_multiples(1, 0, CFG) == (0, 1, 2, 3)
    assert precompute_digit_multiples(1, 3, CFG) == (0, 64, 128, 192)
    assert precompute_digit_multiples(5, 1, ParallelConfig(4, 4)) == tuple(5 * v << 4 for v in range(16))


def test_other_shapes_and_constant_time():
    rng = random.Random(6)
    for cfg in (ParallelConfig(2, 4), ParallelConfig(8, 1), ParallelConfig(4, 4), ParallelConfig(4, 2, True)):
        m = random_modulus(rng, 192)
        ctx = MontContext.create(m, cfg.word_radix_bits, 192)
        for _ in range(20):
            x, y = rng.randrange(m), rng.randrange(m)
            assert mont_parallel(x, y, ctx, cfg) == montgomery_reference(x, y, m, 192)


def test_executor_gives_same_result():
    rng = random.Random(7)
    m = random_modulus(rng, 256)
    ctx = MontContext.create(m, 8, 256)
    x, y = rng.randrange(m), rng.randrange(m)
    with ThreadPoolExecutor(4) as pool:
        assert mont_parallel(x, y, ctx, CFG, pool) == mont_parallel(x, y, ctx, CFG)


def test_domain_errors():
    ctx = MontContext.create(101, 8)
    with pytest.raises(DomainError):
        mont_radix2(101, 1, ctx)
    with pytest.raises(DomainError):
        mont_parallel(1, 200, ctx, CFG)
    with pytest.raises(DomainError):
        MontContext.create(100, 8)
    with pytest.raises(DomainError):
        ParallelConfig(4, 3)
    with pytest.raises(DomainError):
        ParallelConfig(8, 8)
    with pytest.raises(DomainError):
        CFG.iterations(1020)
    with pytest.raises(DomainError):
        mont_parallel(1, 1, ctx, ParallelConfig(4, 4))
