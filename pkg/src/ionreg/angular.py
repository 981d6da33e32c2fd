"""Exact Wigner 3j and Clebsch-Gordan coefficients for small angular momenta.

Values are evaluated with the Racah single-sum formula using exact integer
factorials (via ``fractions.Fraction``), converting to float only at the end.
This is exact to double precision for the small j (<= 5/2) this package needs.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

__all__ = ["HalfInt", "wigner3j", "clebsch_gordan"]


@dataclass(frozen=True, order=True)
class HalfInt:
    """A half-integer stored as its doubled value, so 3/2 is exact."""

    twice: int

    @classmethod
    def of(cls, value) -> "HalfInt":
        """Coerce an int, exact multiple of 1/2, "3/2"-style string, or HalfInt."""
        if isinstance(value, HalfInt):
            return value
        if isinstance(value, int):
            return cls(2 * value)
        if isinstance(value, str):
            text = value.strip()
            if "/" in text:
                num, den = text.split("/")
                if int(den) != 2:
                    raise ValueError(f"not a half-integer: {value!r}")
                return cls(int(num))
            return cls(2 * int(text))
        if isinstance(value, float):
            twice = value * 2
            if twice != int(twice):
                raise ValueError(f"not a half-integer: {value!r}")
            return cls(int(twice))
        raise TypeError(f"cannot interpret {value!r} as a half-integer")

    @property
    def value(self) -> float:
        return self.twice / 2

    @property
    def is_integer(self) -> bool:
        return self.twice % 2 == 0

    def __add__(self, other: "HalfInt") -> "HalfInt":
        return HalfInt(self.twice + other.twice)

    def __sub__(self, other: "HalfInt") -> "HalfInt":
        return HalfInt(self.twice - other.twice)

    def __neg__(self) -> "HalfInt":
        return HalfInt(-self.twice)

    def __abs__(self) -> "HalfInt":
        return HalfInt(abs(self.twice))

    def __str__(self) -> str:
        if self.twice % 2 == 0:
            return str(self.twice // 2)
        return f"{self.twice}/2"


def _check_pair(j: HalfInt, m: HalfInt, name: str) -> None:
    if j.twice < 0:
        raise ValueError(f"{name}: negative angular momentum j={j}")
    if (j.twice - m.twice) % 2 != 0:
        raise ValueError(f"{name}: m={m} is not in the same parity class as j={j}")


def wigner3j(j1, j2, j3, m1, m2, m3) -> float:
    """Wigner 3j symbol.

    Returns exactly 0.0 when a selection rule fails (m1+m2+m3 != 0, the
    triangle inequality, or |m| > j). Raises ValueError when an (j, m) pair
    is not a valid half-integer combination.
    """
    j1, j2, j3 = HalfInt.of(j1), HalfInt.of(j2), HalfInt.of(j3)
    m1, m2, m3 = HalfInt.of(m1), HalfInt.of(m2), HalfInt.of(m3)
    for j, m, name in ((j1, m1, "(j1,m1)"), (j2, m2, "(j2,m2)"), (j3, m3, "(j3,m3)")):
        _check_pair(j, m, name)
    if (j1.twice + j2.twice + j3.twice) % 2 != 0:
        raise ValueError("j1+j2+j3 is not an integer")

    if m1.twice + m2.twice + m3.twice != 0:
        return 0.0
    if abs(m1.twice) > j1.twice or abs(m2.twice) > j2.twice or abs(m3.twice) > j3.twice:
        return 0.0
    if not (abs(j1.twice - j2.twice) <= j3.twice <= j1.twice + j2.twice):
        return 0.0

    # All the following combinations are integers once the checks above pass.
    def half(n: int) -> int:
        assert n % 2 == 0
        return n // 2

    a = half(j1.twice + j2.twice - j3.twice)
    b = half(j1.twice - j2.twice + j3.twice)
    c = half(-j1.twice + j2.twice + j3.twice)
    jm = [
        half(j1.twice - m1.twice),
        half(j1.twice + m1.twice),
        half(j2.twice - m2.twice),
        half(j2.twice + m2.twice),
        half(j3.twice - m3.twice),
        half(j3.twice + m3.twice),
    ]

    radicand = Fraction(
        math.factorial(a) * math.factorial(b) * math.factorial(c),
        math.factorial(half(j1.twice + j2.twice + j3.twice) + 1),
    )
    for f in jm:
        radicand *= math.factorial(f)

    t_min = max(0, half(j2.twice - j3.twice - m1.twice), half(j1.twice - j3.twice + m2.twice))
    t_max = min(a, half(j1.twice - m1.twice), half(j2.twice + m2.twice))
    total = Fraction(0)
    for t in range(t_min, t_max + 1):
        denom = (
            math.factorial(t)
            * math.factorial(a - t)
            * math.factorial(half(j1.twice - m1.twice) - t)
            * math.factorial(half(j2.twice + m2.twice) - t)
            * math.factorial(half(j3.twice - j2.twice + m1.twice) + t)
            * math.factorial(half(j3.twice - j1.twice - m2.twice) + t)
        )
        total += Fraction((-1) ** t, denom)
    if total == 0:
        return 0.0

    phase = (-1) ** half(j1.twice - j2.twice - m3.twice)
    return phase * float(total) * math.sqrt(radicand.numerator) / math.sqrt(radicand.denominator)


def clebsch_gordan(j1, m1, j2, m2, J, M) -> float:
    """Clebsch-Gordan coefficient <j1 m1; j2 m2 | J M>."""
    j1, m1 = HalfInt.of(j1), HalfInt.of(m1)
    j2, m2 = HalfInt.of(j2), HalfInt.of(m2)
    J, M = HalfInt.of(J), HalfInt.of(M)
    if m1.twice + m2.twice != M.twice:
        # Still validate arguments before applying the projection rule.
        for j, m, name in ((j1, m1, "(j1,m1)"), (j2, m2, "(j2,m2)"), (J, M, "(J,M)")):
            _check_pair(j, m, name)
        return 0.0
    three_j = wigner3j(j1, j2, J, m1, m2, -M)
    phase = (-1) ** ((j1.twice - j2.twice + M.twice) // 2)
    return phase * math.sqrt(J.twice + 1.0) * three_j
