"""Fixed-width multi-precision unsigned integers.

Values are stored as Python ints; the word view (little-endian, ``word_bits``
per word) is what the hardware simulator and the bus protocol consume. Every
operation is a pure function returning a new :class:`BigUint`.
"""

from __future__ import annotations

import operator
from dataclasses import dataclass
from typing import Iterable, Sequence, Union

from quadrsa.errors import DomainError, InvariantError, ParseError

WORD_BITS = 32

IntLike = Union[int, "BigUint"]


def _round_up(bits: int, multiple: int) -> int:
    return max(multiple, -(-bits // multiple) * multiple)


@dataclass(frozen=True)
class BigUint:
    value: int
    bit_width: int
    word_bits: int = WORD_BITS

    def __post_init__(self):
        if self.word_bits <= 0:
            raise DomainError(f"word size must be positive, got {self.word_bits}")
        if self.bit_width <= 0 or self.bit_width % self.word_bits:
            raise DomainError(
                f"bit_width {self.bit_width} is not a positive multiple of {self.word_bits}"
            )
        if self.value < 0:
            raise DomainError("BigUint is unsigned")
        if self.value >> self.bit_width:
            raise DomainError(f"value needs {self.value.bit_length()} bits, capacity is {self.bit_width}")

    @classmethod
    def from_int(cls, value: int, bit_width: int | None = None, word_bits: int = WORD_BITS) -> BigUint:
        if bit_width is None:
            bit_width = _round_up(value.bit_length(), word_bits)
        return cls(value, bit_width, word_bits)

    @classmethod
    def from_words(cls, words: Iterable[int], word_bits: int = WORD_BITS, bit_width: int | None = None) -> BigUint:
        words = list(words)
        value = 0
        for i, w in enumerate(words):
            if not 0 <= w < (1 << word_bits):
                raise DomainError(f"word {i} = {w:#x} does not fit in {word_bits} bits")
            value |= w << (i * word_bits)
        if bit_width is None:
            bit_width = max(1, len(words)) * word_bits
        return cls(value, bit_width, word_bits)

    @classmethod
    def from_hex(cls, text: str, bit_width: int | None = None, word_bits: int = WORD_BITS) -> BigUint:
        s = text.strip()
        if s[:2].lower() == "0x":
            s = s[2:]
        if not s or any(c not in "0123456789abcdefABCDEF" for c in s):
            raise ParseError(f"not a hex number: {text!r}")
        value = int(s, 16)
        if bit_width is not None and value >> bit_width:
            raise ParseError(f"hex value {text!r} exceeds {bit_width} bits")
        return cls.from_int(value, bit_width, word_bits)

    def to_hex(self, prefix: bool = False) -> str:
        digits = format(self.value, "x")
        return "0x" + digits if prefix else digits

    @property
    def words(self) -> tuple[int, ...]:
        mask = (1 << self.word_bits) - 1
        return tuple(
            (self.value >> (i * self.word_bits)) & mask
            for i in range(self.bit_width // self.word_bits)
        )

    def resized(self, bit_width: int) -> BigUint:
        return BigUint(self.value, bit_width, self.word_bits)

    def __int__(self) -> int:
        return self.value

    def __index__(self) -> int:
        return self.value

    def __repr__(self) -> str:
        return f"BigUint(0x{self.value:x}, bit_width={self.bit_width})"


def as_int(x: IntLike) -> int:
    return operator.index(x)


def hamming_distance(a: IntLike, b: IntLike) -> int:
    return (as_int(a) ^ as_int(b)).bit_count()


def _common(a: BigUint, b: BigUint) -> tuple[int, int]:
    if a.word_bits != b.word_bits:
        raise DomainError(f"word size mismatch: {a.word_bits} vs {b.word_bits}")
    return max(a.bit_width, b.bit_width), a.word_bits


def add(a: BigUint, b: BigUint) -> tuple[BigUint, int]:
    """Sum modulo 2^width plus the carry out, width being the wider operand's."""
    width, wb = _common(a, b)
    s = a.value + b.value
    return BigUint(s & ((1 << width) - 1), width, wb), s >> width


def sub(a: BigUint, b: BigUint) -> tuple[BigUint, int]:
    """``a - b`` modulo 2^width and the borrow flag (1 iff a < b)."""
    width, wb = _common(a, b)
    d = a.value - b.value
    return BigUint(d & ((1 << width) - 1), width, wb), int(d < 0)


def cmp(a: IntLike, b: IntLike) -> int:
    a, b = as_int(a), as_int(b)
    return (a > b) - (a < b)


def shift_left(a: BigUint, bits: int) -> BigUint:
    if bits < 0:
        raise DomainError("negative shift")
    width = _round_up(a.bit_width + bits, a.word_bits)
    return BigUint(a.value << bits, width, a.word_bits)


def shift_right(a: BigUint, bits: int, exact: bool = False) -> BigUint:
    """Divide by 2^bits. With ``exact`` the discarded bits must all be zero."""
    if bits < 0:
        raise DomainError("negative shift")
    if exact and a.value & ((1 << bits) - 1):
        raise InvariantError(f"exact shift by {bits} would discard nonzero bits")
    return BigUint(a.value >> bits, a.bit_width, a.word_bits)


def mul(a: BigUint, b: BigUint) -> BigUint:
    width, wb = _common(a, b)
    return BigUint(a.value * b.value, a.bit_width + b.bit_width, wb)


def mod_reduce(a: BigUint, m: BigUint) -> BigUint:
    """``a mod m`` by bit-serial shift-and-subtract (restoring division)."""
    mv = m.value
    if mv == 0:
        raise DomainError("modulus must be nonzero")
    r = 0
    av = a.value
    for i in range(av.bit_length() - 1, -1, -1):
        r = (r << 1) | ((av >> i) & 1)
        if r >= mv:
            r -= mv
    return BigUint(r, m.bit_width, m.word_bits)


def neg_inv_mod_pow2(m: IntLike, w: int, word_bits: int = WORD_BITS) -> int:
    """Return m' with m * m' == -1 (mod 2^w), by Newton/Hensel lifting.

    Starts from the inverse mod 2 (which is 1 for odd m) and doubles the
    number of correct bits per step.
    """
    mv = as_int(m)
    if isinstance(m, BigUint):
        word_bits = m.word_bits
    if not mv & 1:
        raise DomainError("modulus must be odd to be invertible mod 2^w")
    if not 1 <= w <= word_bits:
        raise DomainError(f"w must be in [1, {word_bits}], got {w}")
    inv, bits = 1, 1
    while bits < w:
        bits *= 2
        inv = (inv * (2 - mv * inv)) & ((1 << bits) - 1)
    return -inv & ((1 << w) - 1)


def bits_of(x: IntLike, count: int | None = None) -> list[int]:
    """Little-endian bit list; ``count`` pads or truncates."""
    x = as_int(x)
    n = x.bit_length() if count is None else count
    return [(x >> i) & 1 for i in range(n)]


def from_bits(bits: Sequence[int]) -> int:
    v = 0
    for i, b in enumerate(bits):
        v |= (b & 1) << i
    return v
