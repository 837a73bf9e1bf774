"""Raw RSA on top of the parallel Montgomery multiplier.

Exponentiation is the right-to-left binary method: the exponent is scanned
LSB first, every iteration squares the running power and set bits multiply
it into the result.  The last square is computed even though it is unused, so
the number of Montgomery products is always
``2 + bits(e) + weight(e) + 1`` (two mappings, the loop, one remapping).
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, NamedTuple, Optional

from quadrsa.bigint import IntLike, as_int
from quadrsa.errors import DomainError, InvariantError, KeyGenerationError, ParseError
from quadrsa.montgomery import DEFAULT_CONFIG, MontContext, ParallelConfig, mont_parallel

MILLER_RABIN_ROUNDS = 20
_SMALL_PRIMES = (3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89, 97)


class ExpResult(NamedTuple):
    value: int
    mont_ops: int


@dataclass(frozen=True)
class ExpState:
    p_acc: int
    r_acc: int
    bit_index: int

    def check(self, m: int) -> None:
        if not (0 <= self.p_acc < m and 0 <= self.r_acc < m):
            raise InvariantError(f"residue escaped [0, m) at bit {self.bit_index}")


def mont_op_count(e: int) -> int:
    """Montgomery products performed by :func:`mod_exp_mont` for exponent e."""
    e = as_int(e)
    return 2 + e.bit_length() + e.bit_count() + 1


def mod_exp_naive(x: IntLike, d: IntLike, n: IntLike) -> int:
    """Left-to-right square and multiply with plain modular reduction."""
    x, d, n = as_int(x), as_int(d), as_int(n)
    if n <= 1:
        raise DomainError("modulus must exceed 1")
    if not 0 <= x < n:
        raise DomainError("base must satisfy 0 <= x < n")
    if d < 0:
        raise DomainError("negative exponent")
    if d == 0:
        return 1
    s = x
    for i in range(d.bit_length() - 2, -1, -1):
        s = s * s % n
        if (d >> i) & 1:
            s = s * x % n
    return s


def _mont_fn(ctx: MontContext, cfg: ParallelConfig) -> Callable[[int, int], int]:
    if ctx.word_radix_bits != cfg.word_radix_bits:
        raise DomainError("context and config disagree on word radix")
    return lambda x, y: mont_parallel(x, y, ctx, cfg)


def to_mont(a: IntLike, ctx: MontContext, cfg: ParallelConfig = DEFAULT_CONFIG) -> int:
    a = as_int(a)
    if not 0 <= a < ctx.m:
        raise DomainError("value must be below the modulus")
    return _mont_fn(ctx, cfg)(a, ctx.r2_mod_m)


def from_mont(a_bar: IntLike, ctx: MontContext, cfg: ParallelConfig = DEFAULT_CONFIG) -> int:
    a_bar = as_int(a_bar)
    if not 0 <= a_bar < ctx.m:
        raise DomainError("value must be below the modulus")
    if ctx.m == 1:
        return 0
    return _mont_fn(ctx, cfg)(a_bar, 1)


def mod_exp_mont(
    p: IntLike,
    e: IntLike,
    ctx: MontContext,
    cfg: ParallelConfig = DEFAULT_CONFIG,
    on_step: Optional[Callable[[str, ExpState], None]] = None,
) -> ExpResult:
    """``p^e mod m`` and the number of Montgomery products used.

    ``on_step(op, state)`` is called after every product with op one of
    ``MONT1`` .. ``MONT5``.
    """
    p, e = as_int(p), as_int(e)
    m = ctx.m
    if m <= 1:
        raise DomainError("modulus must exceed 1")
    if not 0 <= p < m:
        raise DomainError("base must satisfy 0 <= p < m")
    if e < 0:
        raise DomainError("negative exponent")
    mont = _mont_fn(ctx, cfg)

    def emit(op, bit):
        if on_step is not None:
            state = ExpState(pp, r, bit)
            state.check(m)
            on_step(op, state)

    c = ctx.r2_mod_m
    pp, r = 0, 0
    pp = mont(c, p)
    emit("MONT1", 0)
    r = mont(c, 1)
    emit("MONT2", 0)
    ops = 2
    for i in range(e.bit_length()):
        if (e >> i) & 1:
            r = mont(r, pp)
            ops += 1
            emit("MONT3", i)
        pp = mont(pp, pp)
        ops += 1
        emit("MONT4", i)
        if r >= m or pp >= m:
            raise InvariantError(f"residue escaped [0, m) at bit {i}")
    r = mont(1, r)
    ops += 1
    emit("MONT5", e.bit_length())
    return ExpResult(r, ops)


@dataclass(frozen=True)
class RsaPublicKey:
    modulus: int
    exponent: int

    def __post_init__(self):
        if self.modulus < 3 or not self.modulus & 1:
            raise DomainError("RSA modulus must be odd and at least 3")
        if not 3 <= self.exponent < self.modulus:
            raise DomainError("public exponent must satisfy 3 <= e < n")


@dataclass(frozen=True)
class RsaPrivateKey:
    modulus: int
    d: int
    p: Optional[int] = None
    q: Optional[int] = None
    e: Optional[int] = None

    def __post_init__(self):
        if self.modulus < 3 or not self.modulus & 1:
            raise DomainError("RSA modulus must be odd and at least 3")
        if not 0 < self.d < self.modulus:
            raise DomainError("private exponent must satisfy 0 < d < n")
        if (self.p is None) != (self.q is None):
            raise DomainError("p and q must be given together")
        if self.p is not None and self.p * self.q != self.modulus:
            raise DomainError("p * q does not equal the modulus")


class KeyPair(NamedTuple):
    public: RsaPublicKey
    private: RsaPrivateKey


def context_for(modulus: int, cfg: ParallelConfig = DEFAULT_CONFIG) -> MontContext:
    return MontContext.for_config(modulus, cfg)


def encrypt(msg: IntLike, key: RsaPublicKey, cfg: ParallelConfig = DEFAULT_CONFIG) -> int:
    msg = as_int(msg)
    if not 0 <= msg < key.modulus:
        raise DomainError("message must be smaller than the modulus")
    return mod_exp_mont(msg, key.exponent, context_for(key.modulus, cfg), cfg).value


def decrypt(ct: IntLike, key: RsaPrivateKey, cfg: ParallelConfig = DEFAULT_CONFIG) -> int:
    ct = as_int(ct)
    if not 0 <= ct < key.modulus:
        raise DomainError("ciphertext must be smaller than the modulus")
    return mod_exp_mont(ct, key.d, context_for(key.modulus, cfg), cfg).value


def message_to_int(data: bytes, modulus: int) -> int:
    """Big-endian bytes to integer; no padding scheme."""
    v = int.from_bytes(data, "big")
    if v >= modulus:
        raise DomainError("message is not smaller than the modulus")
    return v


def int_to_message(v: int, length: int | None = None) -> bytes:
    if length is None:
        length = max(1, (v.bit_length() + 7) // 8)
    return v.to_bytes(length, "big")


# -- key generation ---------------------------------------------------------

def is_probable_prime(n: int, rounds: int = MILLER_RABIN_ROUNDS, rng: random.Random | None = None) -> bool:
    if n < 2:
        return False
    if n in (2, 3):
        return True
    if n % 2 == 0:
        return False
    for sp in _SMALL_PRIMES:
        if n % sp == 0:
            return n == sp
    rng = rng or random.Random(n)
    r, s = 0, n - 1
    while s % 2 == 0:
        r += 1
        s //= 2
    for _ in range(rounds):
        a = rng.randrange(2, n - 1)
        x = pow(a, s, n)
        if x == 1 or x == n - 1:
            continue
        for _ in range(r - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


def random_prime(bits: int, rng: random.Random, max_candidates: int | None = None) -> int:
    """A probable prime with exactly ``bits`` bits and its top two bits set."""
    if bits < 4:
        raise DomainError("prime size too small")
    top = 0b11 << (bits - 2)
    for _ in range(max_candidates or 100 * bits):
        c = rng.getrandbits(bits) | top | 1
        if is_probable_prime(c, MILLER_RABIN_ROUNDS, rng):
            return c
    raise KeyGenerationError(f"no {bits}-bit prime found")


def keygen_toy(bits: int, seed: int, d_bits: int | None = None, max_attempts: int = 64) -> KeyPair:
    """Deterministic toy RSA key of ``bits`` bits.

    e is 65537 (17 below 32 bits) and d = e^-1 mod lcm(p-1, q-1).  With
    ``d_bits`` the roles flip: a random odd ``d_bits``-bit d is drawn and e
    derived from it, which gives the short secret exponents the power
    analysis demos attack.
    """
    if bits % 2 or not 16 <= bits <= 2048:
        raise DomainError(f"bits must be even and in [16, 2048], got {bits}")
    rng = random.Random(seed)
    half = bits // 2
    for _ in range(max_attempts):
        p = random_prime(half, rng)
        q = random_prime(half, rng)
        if p == q:
            continue
        lam = math.lcm(p - 1, q - 1)
        n = p * q
        if d_bits is None:
            e = 65537 if bits >= 32 else 17
            if math.gcd(e, lam) != 1:
                continue
            d = pow(e, -1, lam)
        else:
            if not 2 <= d_bits < lam.bit_length():
                raise DomainError(f"d_bits={d_bits} does not fit below lcm(p-1, q-1)")
            d = rng.getrandbits(d_bits) | (1 << (d_bits - 1)) | 1
            if math.gcd(d, lam) != 1:
                continue
            e = pow(d, -1, lam)
            if e < 3:
                continue
        return KeyPair(RsaPublicKey(n, e), RsaPrivateKey(n, d, p, q, e))
    raise KeyGenerationError(f"no usable {bits}-bit key after {max_attempts} prime pairs")


# -- key files ----------------------------------------------------------------

_KEY_FIELDS = ("n", "e", "d", "p", "q")


def format_public_key(key: RsaPublicKey) -> str:
    return f"n={key.modulus:x}\ne={key.exponent:x}\n"


def format_private_key(key: RsaPrivateKey) -> str:
    lines = [f"n={key.modulus:x}"]
    if key.e is not None:
        lines.append(f"e={key.e:x}")
    lines.append(f"d={key.d:x}")
    if key.p is not None:
        lines += [f"p={key.p:x}", f"q={key.q:x}"]
    return "\n".join(lines) + "\n"


def parse_key_fields(text: str) -> dict[str, int]:
    fields: dict[str, int] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        name, sep, value = line.partition("=")
        name, value = name.strip(), value.strip()
        if not sep or name not in _KEY_FIELDS:
            raise ParseError(f"line {lineno}: expected one of {'/'.join(_KEY_FIELDS)}=<hex>")
        if name in fields:
            raise ParseError(f"line {lineno}: duplicate field {name!r}")
        if value[:2].lower() == "0x":
            value = value[2:]
        try:
            fields[name] = int(value, 16)
        except ValueError:
            raise ParseError(f"line {lineno}: bad hex value {value!r}") from None
    return fields


def _require(fields: dict[str, int], *names: str) -> None:
    missing = [f for f in names if f not in fields]
    if missing:
        raise ParseError(f"key file is missing field(s): {', '.join(missing)}")


def parse_public_key(text: str) -> RsaPublicKey:
    fields = parse_key_fields(text)
    _require(fields, "n", "e")
    return RsaPublicKey(fields["n"], fields["e"])


def parse_private_key(text: str) -> RsaPrivateKey:
    fields = parse_key_fields(text)
    _require(fields, "n", "d")
    return RsaPrivateKey(fields["n"], fields["d"], fields.get("p"), fields.get("q"), fields.get("e"))


def write_keypair(pair: KeyPair, prefix: str | Path) -> tuple[Path, Path]:
    """Write ``<prefix>.pub`` and ``<prefix>.key``; returns both paths."""
    prefix = Path(prefix)
    pub = prefix.with_name(prefix.name + ".pub")
    priv = prefix.with_name(prefix.name + ".key")
    pub.write_text(format_public_key(pair.public))
    priv.write_text(format_private_key(pair.private))
    return pub, priv


def read_public_key(path: str | Path) -> RsaPublicKey:
    return parse_public_key(Path(path).read_text())


def read_private_key(path: str | Path) -> RsaPrivateKey:
    return parse_private_key(Path(path).read_text())
