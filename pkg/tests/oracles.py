"""Reference computations that share no code with the package under test."""

import math

BASE_BITS = 32
BASE = 1 << BASE_BITS


def to_digits(v, count):
    out = []
    for _ in range(count):
        out.append(v % BASE)
        v //= BASE
    return out


def from_digits(digits):
    v = 0
    for d in reversed(digits):
        v = v * BASE + d
    return v


def schoolbook_add(a, b, width):
    n = width // BASE_BITS
    da, db = to_digits(a, n), to_digits(b, n)
    out, carry = [], 0
    for x, y in zip(da, db):
        t = x + y + carry
        out.append(t % BASE)
        carry = t // BASE
    return from_digits(out), carry


def schoolbook_sub(a, b, width):
    n = width // BASE_BITS
    da, db = to_digits(a, n), to_digits(b, n)
    out, borrow = [], 0
    for x, y in zip(da, db):
        t = x - y - borrow
        borrow = 1 if t < 0 else 0
        out.append(t + BASE if t < 0 else t)
    return from_digits(out), borrow


def schoolbook_mul(a, b, na, nb):
    da, db = to_digits(a, na), to_digits(b, nb)
    out = [0] * (na + nb)
    for i, x in enumerate(da):
        carry = 0
        for j, y in enumerate(db):
            t = out[i + j] + x * y + carry
            out[i + j] = t % BASE
            carry = t // BASE
        out[i + nb] += carry
    return from_digits(out)


def egcd_inverse(a, m):
    """Modular inverse by the extended Euclidean algorithm."""
    old_r, r = a % m, m
    old_s, s = 1, 0
    while r:
        qt = old_r // r
        old_r, r = r, old_r - qt * r
        old_s, s = s, old_s - qt * s
    if old_r != 1:
        raise ValueError("not invertible")
    return old_s % m


def montgomery_reference(x, y, m, n):
    """x*y*2^-n mod m through an explicit inverse."""
    return (x * y * egcd_inverse(pow(2, n, m), m)) % m


def neg_inverse_scan(m, w):
    """Exhaustive search for m' with m*m' == -1 mod 2^w."""
    mod = 1 << w
    for c in range(mod):
        if (m * c) % mod == mod - 1:
            return c
    raise ValueError("no inverse")


def repeated_multiplication(x, d, n):
    """x^d mod n by d literal multiplications; only for small d."""
    acc = 1 % n
    for _ in range(d):
        acc = acc * x % n
    return acc


def square_multiply(x, d, n):
    """Left-to-right square and multiply written from scratch."""
    acc = 1 % n
    for bit in bin(d)[2:]:
        acc = acc * acc % n
        if bit == "1":
            acc = acc * x % n
    return acc


def two_pass_pearson(xs, ys):
    n = len(xs)
    mx, my = sum(xs) / n, sum(ys) / n
    sxy = sum((a - mx) * (b - my) for a, b in zip(xs, ys))
    sxx = sum((a - mx) ** 2 for a in xs)
    syy = sum((b - my) ** 2 for b in ys)
    return sxy / math.sqrt(sxx * syy)


def popcount(v):
    return bin(v).count("1")


def normal_two_sided_p(z):
    return math.erfc(abs(z) / math.sqrt(2))
