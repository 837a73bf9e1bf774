import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import neg_inverse_scan, schoolbook_add, schoolbook_mul, schoolbook_sub
from quadrsa.bigint import (
    BigUint,
    add,
    bits_of,
    cmp,
    from_bits,
    hamming_distance,
    mod_reduce,
    mul,
    neg_inv_mod_pow2,
    shift_left,
    shift_right,
    sub,
)
from quadrsa.errors import DomainError, InvariantError, ParseError

W = 1024


def big(v, width=W):
    return BigUint.from_int(v, width)


def test_add_identity_and_wrap():
    y = big(12345)
    assert add(big(0), y) == (y, 0)
    s, carry = add(big(2**W - 1), big(1))
    assert s.value == 0 and carry == 1


def test_add_sub_match_schoolbook():
    rng = random.Random(1)
    for _ in range(1000):
        a, b = rng.getrandbits(W), rng.getrandbits(W)
        s, c = add(big(a), big(b))
        assert (s.value, c) == schoolbook_add(a, b, W)
        d, br = sub(big(a), big(b))
        assert (d.value, br) == schoolbook_sub(a, b, W)


def test_sub_cancel_and_wrap():
    y = big(987654321)
    assert sub(y, y) == (big(0), 0)
    d, borrow = sub(big(0), big(1))
    assert d.value == 2**W - 1 and borrow == 1


def test_cmp():
    assert cmp(big(7), big(7)) == 0
    assert cmp(big(0), big(1)) == -1
    assert cmp(big(2), big(1)) == 1


def test_shifts():
    assert shift_left(big(1, 32), 10).value == 1024
    x = big(0xDEADBEEF)
    assert shift_right(shift_left(x, 8), 8).value == x.value
    with pytest.raises(InvariantError):
        shift_right(big(0b101), 1, exact=True)
    assert shift_right(big(0b100), 2, exact=True).value == 1


def test_mul_trivial_and_schoolbook():
    x = big(0xABCDEF0123456789)
    assert mul(x, big(0)).value == 0
    assert mul(x, big(1)).value == x.value
    rng = random.Random(2)
    for _ in range(200):
        a, b = rng.getrandbits(256), rng.getrandbits(256)
        assert mul(big(a, 256), big(b, 256)).value == schoolbook_mul(a, b, 8, 8)


def test_mod_reduce():
    assert mod_reduce(big(97), big(97)).value == 0
    assert mod_reduce(big(2**5), big(13)).value == 6
    with pytest.raises(DomainError):
        mod_reduce(big(5), big(0))


@given(st.integers(0, 2**300), st.integers(1, 2**200))
def test_mod_reduce_property(a, m):
    assert mod_reduce(BigUint.from_int(a), BigUint.from_int(m)).value == a % m


def test_neg_inv_trivial():
    assert neg_inv_mod_pow2(1, 8) == 255


def test_neg_inv_exhaustive_scan():
    for m in range(1, 512, 2):
        assert neg_inv_mod_pow2(m, 8) == neg_inverse_scan(m, 8)
    for m in range(1, 64, 2):
        assert neg_inv_mod_pow2(m, 12) == neg_inverse_scan(m, 12)


def test_neg_inv_even_rejected():
    with pytest.raises(DomainError):
        neg_inv_mod_pow2(10, 8)


def test_hex_round_trip_and_limits():
    v = BigUint.from_hex("0xdeadbeef", 64)
    assert v.value == 0xDEADBEEF and v.to_hex() == "deadbeef" and v.to_hex(prefix=True) == "0xdeadbeef"
    assert BigUint.from_words(v.words, 32, 64) == v
    with pytest.raises(ParseError):
        BigUint.from_hex("1" + "0" * 16, 64)
    with pytest.raises(ParseError):
        BigUint.from_hex("xyz")


def test_bits_and_hamming():
    assert from_bits(bits_of(0b1011)) == 0b1011
    assert hamming_distance(0b1100, 0b1010) == 2
