"""Exact arithmetic in a prime field F_q.

Elements are plain Python ints in [0, q); the field object carries the shared
modulus. All operations are exact modular arithmetic, never floating point.
"""

from __future__ import annotations

from .errors import InvalidParamsError

# Mersenne prime; large enough that any desk-scale n, p stay below it.
DEFAULT_MODULUS = 2**31 - 1

_MR_BASES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)


def is_prime(n: int) -> bool:
    """Deterministic Miller-Rabin, exact for n < 3.3e24."""
    if n < 2:
        return False
    for p in _MR_BASES:
        if n % p == 0:
            return n == p
    d = n - 1
    r = 0
    while d % 2 == 0:
        d //= 2
        r += 1
    for a in _MR_BASES:
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(r - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


class PrimeField:
    """The field F_q for prime q, operating on int residues."""

    __slots__ = ("q",)

    def __init__(self, q: int):
        if not is_prime(q):
            raise InvalidParamsError(f"modulus must be prime, got {q}")
        self.q = q

    def element(self, v: int) -> int:
        return v % self.q

    def add(self, a: int, b: int) -> int:
        return (a + b) % self.q

    def sub(self, a: int, b: int) -> int:
        return (a - b) % self.q

    def neg(self, a: int) -> int:
        return -a % self.q

    def mul(self, a: int, b: int) -> int:
        return a * b % self.q

    def inv(self, a: int) -> int:
        """Multiplicative inverse by Fermat's little theorem."""
        a %= self.q
        if a == 0:
            raise ZeroDivisionError("0 has no multiplicative inverse")
        return pow(a, self.q - 2, self.q)

    def div(self, a: int, b: int) -> int:
        return a * self.inv(b) % self.q

    def pow(self, a: int, e: int) -> int:
        if e < 0:
            return pow(self.inv(a), -e, self.q)
        return pow(a % self.q, e, self.q)

    def __eq__(self, other) -> bool:
        return isinstance(other, PrimeField) and self.q == other.q

    def __hash__(self) -> int:
        return hash(("PrimeField", self.q))

    def __repr__(self) -> str:
        return f"PrimeField({self.q})"
