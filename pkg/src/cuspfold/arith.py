"""Integer helpers: valuations, square classes, Legendre symbols, CRT and primality."""

from __future__ import annotations

from math import gcd

from sympy import factorint


class InvalidPlaceError(ValueError):
    """Raised when a place or modulus is not a valid prime."""


class InvalidInputError(ValueError):
    pass


_MR_BASES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41)
_MR_LIMIT = 3317044064679887385961981  # bases above are exact below this


def _miller_rabin(n: int, bases) -> bool:
    d, s = n - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    for b in bases:
        if b % n == 0:
            continue
        x = pow(b, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(s - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


def _lucas_certified(n: int) -> bool:
    # n is prime iff some witness has order exactly n-1
    factors = factorint(n - 1)
    if not all(is_prime(f) for f in factors):
        raise ArithmeticError(f"could not certify factors of {n}-1")
    for w in range(2, 10_000):
        if pow(w, n - 1, n) != 1:
            return False
        if all(pow(w, (n - 1) // f, n) != 1 for f in factors):
            return True
    raise ArithmeticError(f"no Lucas witness found for {n}")


def is_prime(n: int) -> bool:
    """Deterministic primality: Miller-Rabin below 3.3e24, Lucas certificate above."""
    n = int(n)
    if n < 2:
        return False
    for p in _MR_BASES:
        if n == p:
            return True
        if n % p == 0:
            return False
    if not _miller_rabin(n, _MR_BASES):
        return False
    if n < _MR_LIMIT:
        return True
    return _lucas_certified(n)


def require_odd_prime(p: int) -> int:
    p = int(p)
    if p == 2 or not is_prime(p):
        raise InvalidPlaceError(f"{p} is not an odd prime")
    return p


def valuation(n: int, p: int) -> tuple[int, int]:
    """Return (v, u) with n = p**v * u and p not dividing u."""
    if n == 0:
        raise InvalidInputError("valuation of zero")
    v = 0
    while n % p == 0:
        n //= p
        v += 1
    return v, n


def prime_factors(n: int) -> list[int]:
    """Sorted distinct primes dividing |n|."""
    n = abs(int(n))
    if n < 2:
        return []
    return sorted(factorint(n))


def squarefree_part(n: int) -> int:
    """Signed squarefree representative of n modulo nonzero rational squares."""
    if n == 0:
        raise InvalidInputError("square class of zero")
    out = -1 if n < 0 else 1
    for p, e in factorint(abs(n)).items():
        if e % 2:
            out *= p
    return out


def legendre_symbol(a: int, p: int) -> int:
    """Legendre symbol (a | p) for an odd prime p, via Euler's criterion."""
    p = require_odd_prime(p)
    r = pow(int(a) % p, (p - 1) // 2, p)
    if r == 0:
        return 0
    return 1 if r == 1 else -1


def crt_pair(r1: int, m1: int, r2: int, m2: int) -> int:
    """Unique n in [0, m1*m2) with n = r1 mod m1 and n = r2 mod m2."""
    if m1 < 1 or m2 < 1:
        raise InvalidInputError("moduli must be positive")
    if gcd(m1, m2) != 1:
        raise InvalidInputError(f"moduli {m1} and {m2} are not coprime")
    inv = pow(m1, -1, m2)
    k = ((r2 - r1) * inv) % m2
    return (r1 + m1 * k) % (m1 * m2)
