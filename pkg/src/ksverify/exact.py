"""Exact arithmetic in Z[sqrt2] and 3-vectors over it.

Every orthogonality decision made about the ray configuration goes through
this module, so nothing here touches floating point except the explicit
``to_float`` conversions used for plotting and the quantum checks.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import total_ordering
from typing import Iterable, Literal, Union

import numpy as np

__all__ = [
    "ExactScalar",
    "ExactVector3",
    "Ray",
    "ZERO",
    "ONE",
    "SQRT2",
    "scalar_arith",
    "dot",
    "canonicalize",
    "rotate45",
    "vec",
]

# Coefficients are kept inside the signed 64-bit range; anything outside is a
# hard error rather than a silent promotion.
_INT64_MAX = 2**63 - 1
_SQRT2_F = math.sqrt(2.0)

ScalarLike = Union["ExactScalar", int, tuple]


def _check_range(a: int, b: int) -> None:
    if not (-_INT64_MAX <= a <= _INT64_MAX and -_INT64_MAX <= b <= _INT64_MAX):
        raise OverflowError(f"Z[sqrt2] coefficient out of int64 range: ({a}, {b})")


def _round_div(p: int, q: int) -> int:
    """Nearest integer to p/q, ties rounded up."""
    if q < 0:
        p, q = -p, -q
    return (2 * p + q) // (2 * q)


@total_ordering
class ExactScalar:
    """The number ``a + b*sqrt(2)`` with integer ``a`` and ``b``."""

    __slots__ = ("_a", "_b")

    def __init__(self, a: int = 0, b: int = 0) -> None:
        a, b = int(a), int(b)
        _check_range(a, b)
        self._a = a
        self._b = b

    @classmethod
    def of(cls, value: ScalarLike) -> ExactScalar:
        if isinstance(value, ExactScalar):
            return value
        if isinstance(value, (int, np.integer)):
            return cls(int(value), 0)
        if isinstance(value, (tuple, list)) and len(value) == 2:
            return cls(value[0], value[1])
        raise TypeError(f"cannot interpret {value!r} as an element of Z[sqrt2]")

    @property
    def a(self) -> int:
        return self._a

    @property
    def b(self) -> int:
        return self._b

    def __repr__(self) -> str:
        return f"ExactScalar({self._a}, {self._b})"

    def __str__(self) -> str:
        if self._b == 0:
            return str(self._a)
        if self._a == 0:
            return "√2" if self._b == 1 else "-√2" if self._b == -1 else f"{self._b}√2"
        return f"{self._a}{self._b:+d}√2"

    def __hash__(self) -> int:
        return hash((self._a, self._b))

    def __eq__(self, other: object) -> bool:
        if isinstance(other, int):
            return self._b == 0 and self._a == other
        if isinstance(other, ExactScalar):
            return self._a == other._a and self._b == other._b
        return NotImplemented

    def __lt__(self, other: ScalarLike) -> bool:
        return (self - ExactScalar.of(other)).sign() < 0

    def __add__(self, other: ScalarLike) -> ExactScalar:
        o = ExactScalar.of(other)
        return ExactScalar(self._a + o._a, self._b + o._b)

    __radd__ = __add__

    def __sub__(self, other: ScalarLike) -> ExactScalar:
        o = ExactScalar.of(other)
        return ExactScalar(self._a - o._a, self._b - o._b)

    def __rsub__(self, other: ScalarLike) -> ExactScalar:
        return ExactScalar.of(other) - self

    def __mul__(self, other: ScalarLike) -> ExactScalar:
        o = ExactScalar.of(other)
        return ExactScalar(self._a * o._a + 2 * self._b * o._b, self._a * o._b + self._b * o._a)

    __rmul__ = __mul__

    def __neg__(self) -> ExactScalar:
        return ExactScalar(-self._a, -self._b)

    def __abs__(self) -> ExactScalar:
        return -self if self.sign() < 0 else self

    def __bool__(self) -> bool:
        return self._a != 0 or self._b != 0

    def __float__(self) -> float:
        return self._a + self._b * _SQRT2_F

    def sign(self) -> int:
        """Exact sign of ``a + b*sqrt2`` from integer comparisons only."""
        a, b = self._a, self._b
        if a >= 0 and b >= 0:
            return 0 if a == 0 and b == 0 else 1
        if a <= 0 and b <= 0:
            return -1
        # mixed signs: compare a^2 with 2b^2
        if a > 0:
            return 1 if a * a > 2 * b * b else -1
        return 1 if 2 * b * b > a * a else -1

    def conjugate(self) -> ExactScalar:
        return ExactScalar(self._a, -self._b)

    def norm(self) -> int:
        """Field norm a^2 - 2b^2; units are exactly the elements of norm +-1."""
        return self._a * self._a - 2 * self._b * self._b

    def divmod(self, other: ExactScalar) -> tuple[ExactScalar, ExactScalar]:
        """Euclidean division; the remainder has strictly smaller |norm|."""
        if not other:
            raise ZeroDivisionError("division by zero in Z[sqrt2]")
        n = other.norm()
        num = self * other.conjugate()
        q = ExactScalar(_round_div(num.a, n), _round_div(num.b, n))
        return q, self - q * other

    def divides(self, other: ExactScalar) -> bool:
        return not other.divmod(self)[1]

    def exact_div(self, other: ExactScalar) -> ExactScalar:
        q, r = self.divmod(other)
        if r:
            raise ArithmeticError(f"{other} does not divide {self}")
        return q

    def to_json(self) -> list[int]:
        return [self._a, self._b]


ZERO = ExactScalar(0, 0)
ONE = ExactScalar(1, 0)
SQRT2 = ExactScalar(0, 1)
_UNIT = ExactScalar(1, 1)        # 1 + sqrt2, fundamental unit
_UNIT_INV = ExactScalar(-1, 1)   # sqrt2 - 1
_UNIT_SQ = ExactScalar(3, 2)


def gcd(x: ExactScalar, y: ExactScalar) -> ExactScalar:
    """A greatest common divisor in Z[sqrt2], defined up to a unit."""
    while y:
        x, y = y, x.divmod(y)[1]
    return x


def scalar_arith(lhs: ExactScalar, rhs: ExactScalar, op: Literal["add", "sub", "mul"]) -> ExactScalar:
    if op == "add":
        return lhs + rhs
    if op == "sub":
        return lhs - rhs
    if op == "mul":
        return lhs * rhs
    raise ValueError(f"unknown operation {op!r}")


@dataclass(frozen=True)
class ExactVector3:
    x: ExactScalar
    y: ExactScalar
    z: ExactScalar

    def __post_init__(self) -> None:
        for name in ("x", "y", "z"):
            object.__setattr__(self, name, ExactScalar.of(getattr(self, name)))

    def __iter__(self):
        return iter((self.x, self.y, self.z))

    def __getitem__(self, i: int) -> ExactScalar:
        return (self.x, self.y, self.z)[i]

    def __neg__(self) -> ExactVector3:
        return ExactVector3(-self.x, -self.y, -self.z)

    def __str__(self) -> str:
        return f"({self.x}, {self.y}, {self.z})"

    def scale(self, k: ScalarLike) -> ExactVector3:
        k = ExactScalar.of(k)
        return ExactVector3(k * self.x, k * self.y, k * self.z)

    def dot(self, other: ExactVector3) -> ExactScalar:
        return self.x * other.x + self.y * other.y + self.z * other.z

    def cross(self, other: ExactVector3) -> ExactVector3:
        return ExactVector3(
            self.y * other.z - self.z * other.y,
            self.z * other.x - self.x * other.z,
            self.x * other.y - self.y * other.x,
        )

    def is_zero(self) -> bool:
        return not (self.x or self.y or self.z)

    def to_float(self) -> np.ndarray:
        return np.array([float(self.x), float(self.y), float(self.z)])


def vec(x: ScalarLike, y: ScalarLike, z: ScalarLike) -> ExactVector3:
    """Shorthand: ``vec(1, 1, (0, 1))`` is (1, 1, sqrt2)."""
    return ExactVector3(ExactScalar.of(x), ExactScalar.of(y), ExactScalar.of(z))


def dot(u: ExactVector3, v: ExactVector3) -> ExactScalar:
    return u.dot(v)


@total_ordering
@dataclass(frozen=True)
class Ray:
    """A projective direction; build with :func:`canonicalize`, not directly."""

    rep: ExactVector3

    def __lt__(self, other: Ray) -> bool:
        return self.sort_key() < other.sort_key()

    def __str__(self) -> str:
        return f"Ray{self.rep}"

    def __iter__(self):
        return iter(self.rep)

    def type_class(self) -> tuple[ExactScalar, ...]:
        """Sorted absolute component values, e.g. (0, 1, sqrt2)."""
        return tuple(sorted(abs(c) for c in self.rep))

    def sort_key(self) -> tuple:
        return (self.type_class(), tuple(self.rep))

    def to_float(self) -> np.ndarray:
        """Unit float vector along the ray."""
        v = self.rep.to_float()
        return v / np.linalg.norm(v)

    def to_json(self) -> list[list[int]]:
        return [c.to_json() for c in self.rep]

    @classmethod
    def from_json(cls, data: Iterable) -> Ray:
        comps = [ExactScalar.of(tuple(c) if isinstance(c, list) else c) for c in data]
        if len(comps) != 3:
            raise ValueError(f"a ray needs 3 components, got {len(comps)}")
        return canonicalize(ExactVector3(*comps))


def canonicalize(v: ExactVector3) -> Ray:
    """Return the unique representative of the line through ``v``.

    The components are divided by their gcd in Z[sqrt2], then the whole
    vector is multiplied by the unit that puts the first nonzero component
    c in the window 1 <= |c / conj(c)| < (1+sqrt2)^2 with c > 0.
    """
    if v.is_zero():
        raise ValueError("cannot canonicalize the zero vector")
    comps = list(v)
    g = ZERO
    for c in comps:
        g = gcd(g, c) if g else c
    comps = [c.exact_div(g) for c in comps]

    lead = next(c for c in comps if c)
    # unit multiplication by (1+sqrt2) scales |c/conj(c)| by (1+sqrt2)^2
    while abs(lead) < abs(lead.conjugate()):
        comps = [c * _UNIT for c in comps]
        lead = lead * _UNIT
    while abs(lead) >= _UNIT_SQ * abs(lead.conjugate()):
        comps = [c * _UNIT_INV for c in comps]
        lead = lead * _UNIT_INV
    if lead.sign() < 0:
        comps = [-c for c in comps]
    return Ray(ExactVector3(*comps))


def rotate45(v: ExactVector3, axis: Literal["x", "y", "z"]) -> ExactVector3:
    """sqrt2 times the 45 degree rotation of ``v`` about a coordinate axis."""
    x, y, z = v
    if axis == "z":
        return ExactVector3(x - y, x + y, SQRT2 * z)
    if axis == "x":
        return ExactVector3(SQRT2 * x, y - z, y + z)
    if axis == "y":
        return ExactVector3(x + z, SQRT2 * y, z - x)
    raise ValueError(f"axis must be one of 'x', 'y', 'z', got {axis!r}")
