import random

import pytest

from oracles import egcd_inverse, repeated_multiplication, square_multiply
from quadrsa import rsa
from quadrsa.errors import DomainError, ParseError
from quadrsa.montgomery import MontContext, ParallelConfig

CFG = ParallelConfig()


def test_naive_small_cases():
    assert rsa.mod_exp_naive(57, 1, 101) == 57
    assert rsa.mod_exp_naive(57, 0, 101) == 1
    for x in range(20):
        for d in range(12):
            assert rsa.mod_exp_naive(x, d, 23) == repeated_multiplication(x, d, 23)
    with pytest.raises(DomainError):
        rsa.mod_exp_naive(0, 3, 1)
    with pytest.raises(DomainError):
        rsa.mod_exp_naive(5, 3, 5)


def test_mapping_round_trip():
    rng = random.Random(8)
    m = rng.getrandbits(128) | (1 << 127) | 1
    ctx = MontContext.for_config(m, CFG)
    for _ in range(50):
        a = rng.randrange(m)
        assert rsa.from_mont(rsa.to_mont(a, ctx, CFG), ctx, CFG) == a
    assert rsa.to_mont(1, ctx, CFG) == pow(2, ctx.n, m)
    assert rsa.from_mont(1, ctx, CFG) == egcd_inverse(pow(2, ctx.n, m), m)
    with pytest.raises(DomainError):
        rsa.to_mont(m, ctx, CFG)


def test_mod_exp_mont_matches_oracle():
    rng = random.Random(9)
    for _ in range(100):
        m = rng.getrandbits(96) | 1 | (1 << 95)
        ctx = MontContext.for_config(m, CFG)
        x, e = rng.randrange(m), rng.getrandbits(rng.randint(1, 96))
        res = rsa.mod_exp_mont(x, e, ctx, CFG)
        assert res.value == square_multiply(x, e, m)
        assert res.mont_ops == rsa.mont_op_count(e)


def test_op_count_formula():
    assert rsa.mont_op_count(2**1024 - 1) == 2051
    assert rsa.mont_op_count(0b1011) == 2 + 4 + 3 + 1


def test_exponent_one_uses_formula_count():
    # one multiply and one square for the single bit, as the loop always squares
    ctx = MontContext.for_config(101, CFG)
    res = rsa.mod_exp_mont(42, 1, ctx, CFG)
    assert res.value == 42
    assert res.mont_ops == rsa.mont_op_count(1) == 5


def test_step_callback_order():
    ctx = MontContext.for_config(101, CFG)
    ops = []
    rsa.mod_exp_mont(5, 0b101, ctx, CFG, on_step=lambda op, st: ops.append(op))
    assert ops == ["MONT1", "MONT2", "MONT3", "MONT4", "MONT4", "MONT3", "MONT4", "MONT5"]


def test_known_vector():
    assert square_multiply(65, 17, 3233) == 2790
    pub = rsa.RsaPublicKey(3233, 17)
    priv = rsa.RsaPrivateKey(3233, 2753, 61, 53, 17)
    assert rsa.encrypt(65, pub) == 2790
    assert rsa.decrypt(2790, priv) == 65
    assert rsa.encrypt(0, pub) == 0
    assert rsa.encrypt(1, pub) == 1
    with pytest.raises(DomainError):
        rsa.encrypt(3233, pub)


def test_keygen_round_trip_and_determinism():
    a = rsa.keygen_toy(64, 11)
    b = rsa.keygen_toy(64, 11)
    assert a == b
    assert a.public.modulus.bit_length() == 64
    rng = random.Random(0)
    for _ in range(20):
        m = rng.randrange(a.public.modulus)
        assert rsa.decrypt(rsa.encrypt(m, a.public), a.private) == m


def test_keygen_short_private_exponent():
    pair = rsa.keygen_toy(64, 4, d_bits=16)
    assert pair.private.d.bit_length() == 16
    assert rsa.decrypt(rsa.encrypt(1234, pair.public), pair.private) == 1234


def test_keygen_rejects_bad_size():
    with pytest.raises(DomainError):
        rsa.keygen_toy(63, 0)


def test_primality_against_trial_division():
    def trial(n):
        return n >= 2 and all(n % p for p in range(2, int(n**0.5) + 1))
    for n in range(2000):
        assert rsa.is_probable_prime(n) == trial(n)
    assert not rsa.is_probable_prime(561)  # Carmichael


def test_key_files(tmp_path):
    pair = rsa.keygen_toy(64, 2)
    pub_path, key_path = rsa.write_keypair(pair, tmp_path / "k")
    assert rsa.read_public_key(pub_path) == pair.public
    assert rsa.read_private_key(key_path) == pair.private
    with pytest.raises(ParseError):
        rsa.parse_public_key("n=zz\ne=3\n")
    with pytest.raises(ParseError):
        rsa.parse_public_key("n=ca1\n")
    with pytest.raises(ParseError):
        rsa.parse_public_key("n=ca1\ne=11\ne=11\n")
    with pytest.raises(ParseError):
        rsa.parse_public_key("n=ca1\ne=11\nx=1\n")


def test_bytes_helpers():
    v = rsa.message_to_int(b"hi", 3233 * 1000)
    assert rsa.int_to_message(v) == b"hi"
    with pytest.raises(DomainError):
        rsa.message_to_int(b"\xff\xff\xff", 3233)
