"""Exact real and complex numbers over a declared basis of irrational generators.

A number is a finite rational combination of monomials in the basis symbols.
Square-root symbols reduce their exponents mod 2 (``sqrt2 * sqrt2 == 2``);
Liouville and opaque symbols behave as independent transcendentals, so their
monomials may carry any integer exponent. Equality and rationality are decided
from coordinates alone. Floating enclosures are only used for ordering
questions, and every enclosure is a rational interval that provably contains
the value.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from math import factorial, floor, isqrt
from typing import Iterable, Sequence

import mpmath

from .errors import PreconditionError, RefinementExhausted
from .linalg import rational_nullspace

BADLY_APPROXIMABLE = "badly-approximable"
ALGEBRAIC = "algebraic-non-liouville"
LIOUVILLE = "liouville-constructed"
UNKNOWN = "unknown"
RATIONAL = "rational"
TAGS = (BADLY_APPROXIMABLE, ALGEBRAIC, LIOUVILLE, UNKNOWN)
NON_LIOUVILLE_TAGS = (BADLY_APPROXIMABLE, ALGEBRAIC)

REFINEMENT_BUDGET = 64
LIOUVILLE_TAIL_CONSTANT = 2
DEFAULT_MAX_BITS = 1 << 18


def max_bits() -> int:
    """Working-precision cap in bits, overridable with ``HYPOTOR_MAX_BITS``."""
    return int(os.environ.get("HYPOTOR_MAX_BITS", DEFAULT_MAX_BITS))


def working_bits(level: int) -> int:
    return min(64 << min(level, REFINEMENT_BUDGET), max_bits())


def rational_normalize(num: int, den: int) -> Fraction:
    """Reduced fraction ``num/den`` with positive denominator."""
    if den == 0:
        raise PreconditionError("zero denominator")
    return Fraction(num, den)


def _as_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x)
    raise TypeError(f"expected an exact rational, got {type(x).__name__}")


@dataclass(frozen=True)
class Interval:
    """Closed rational interval ``[lo, hi]``."""

    lo: Fraction
    hi: Fraction

    @classmethod
    def point(cls, x) -> Interval:
        x = _as_fraction(x)
        return cls(x, x)

    @property
    def width(self) -> Fraction:
        return self.hi - self.lo

    @property
    def mid(self) -> Fraction:
        return (self.lo + self.hi) / 2

    def __add__(self, other):
        if not isinstance(other, Interval):
            other = Interval.point(other)
        return Interval(self.lo + other.lo, self.hi + other.hi)

    __radd__ = __add__

    def __neg__(self):
        return Interval(-self.hi, -self.lo)

    def __sub__(self, other):
        return self + (-other if isinstance(other, Interval) else Interval.point(-_as_fraction(other)))

    def __rsub__(self, other):
        return Interval.point(other) - self

    def __mul__(self, other):
        if not isinstance(other, Interval):
            c = _as_fraction(other)
            return Interval(self.lo * c, self.hi * c) if c >= 0 else Interval(self.hi * c, self.lo * c)
        ps = (self.lo * other.lo, self.lo * other.hi, self.hi * other.lo, self.hi * other.hi)
        return Interval(min(ps), max(ps))

    __rmul__ = __mul__

    def square(self) -> Interval:
        if self.lo >= 0:
            return Interval(self.lo * self.lo, self.hi * self.hi)
        if self.hi <= 0:
            return Interval(self.hi * self.hi, self.lo * self.lo)
        return Interval(Fraction(0), max(self.lo * self.lo, self.hi * self.hi))

    def recip(self) -> Interval:
        if self.contains_zero():
            raise RefinementExhausted("reciprocal of an interval containing zero")
        return Interval(1 / self.hi, 1 / self.lo)

    def contains(self, x) -> bool:
        return self.lo <= x <= self.hi

    def contains_zero(self) -> bool:
        return self.lo <= 0 <= self.hi

    def __pow__(self, k: int) -> Interval:
        if k < 0:
            return self.recip() ** (-k)
        if k == 0:
            return Interval.point(1)
        if k % 2 == 0:
            return self.square() ** (k // 2) if k > 2 else self.square()
        out = self
        for _ in range(k - 1):
            out = out * self
        return out

    def __str__(self):
        return f"[{float(self.lo):.17g}, {float(self.hi):.17g}]"


# -- basis symbols -----------------------------------------------------------


def _factor(n: int) -> dict[int, int]:
    out: dict[int, int] = {}
    d = 2
    while d * d <= n:
        while n % d == 0:
            out[d] = out.get(d, 0) + 1
            n //= d
        d += 1
    if n > 1:
        out[n] = out.get(n, 0) + 1
    return out


@dataclass(frozen=True)
class SqrtSymbol:
    """Positive square root of a squarefree integer ``radicand > 1``."""

    name: str
    radicand: int
    kind = "sqrt"
    refinable = True

    def __post_init__(self):
        if self.radicand < 2 or any(e > 1 for e in _factor(self.radicand).values()):
            raise PreconditionError(f"sqrt radicand must be squarefree and > 1, got {self.radicand}")

    @property
    def tag(self) -> str:
        return BADLY_APPROXIMABLE

    def interval(self, level: int) -> Interval:
        bits = working_bits(level)
        scaled = self.radicand << (2 * bits)
        a = isqrt(scaled)
        den = 1 << bits
        return Interval(Fraction(a, den), Fraction(a + 1, den))

    def certifies(self, iv: Interval) -> bool:
        """Check ``iv`` against the defining polynomial ``x^2 - radicand``."""
        return iv.lo >= 0 and iv.lo * iv.lo <= self.radicand <= iv.hi * iv.hi


@dataclass(frozen=True)
class LiouvilleSymbol:
    """The Liouville-type constant ``sum_{k>=1} base**(-k!)``.

    ``depth`` fixes the stored enclosure ``[S_depth, S_depth + 2*base**(-(depth+1)!)]``;
    generic enclosures never refine past it. Deeper partial sums and the exact
    residuals at the truncation denominators are available through
    :meth:`partial_sum` and :meth:`probe`.
    """

    name: str
    base: int
    depth: int
    kind = "liouville"
    refinable = False

    def __post_init__(self):
        if self.base < 2 or self.depth < 1:
            raise PreconditionError("liouville needs base >= 2 and depth >= 1")

    @property
    def tag(self) -> str:
        return LIOUVILLE

    def partial_numerator(self, k: int) -> int:
        """Integer ``N`` with ``S_k == N / base**(k!)``."""
        top = factorial(k)
        return sum(self.base ** (top - factorial(i)) for i in range(1, k + 1))

    def partial_sum(self, k: int) -> Fraction:
        return Fraction(self.partial_numerator(k), self.base ** factorial(k))

    def tail_bound(self, k: int) -> Fraction:
        return Fraction(LIOUVILLE_TAIL_CONSTANT, self.base ** factorial(k + 1))

    @cached_property
    def _stored(self) -> Interval:
        s = self.partial_sum(self.depth)
        return Interval(s, s + self.tail_bound(self.depth))

    def interval(self, level: int) -> Interval:
        return self._stored

    def certifies(self, iv: Interval) -> bool:
        s = self.partial_sum(self.depth + 1)
        return iv.lo <= s and s + self.tail_bound(self.depth + 1) <= iv.hi

    def probe(self, k: int) -> LiouvilleProbe:
        """Truncation point ``q = base**(k!)``, ``p = q*S_k`` and a bound on ``q*x - p``.

        ``q*x - p = sum_{i>k} base**(k! - i!)`` lies in
        ``[base**(k!-(k+1)!), base**(k!-(k+1)!) + 2*base**(k!-(k+2)!)]``.
        The bound is returned as an mpmath interval so huge exponents stay cheap.
        """
        if k < 1:
            raise PreconditionError("probe depth must be >= 1")
        q = self.base ** factorial(k)
        p = self.partial_numerator(k)
        b = mpmath.iv.mpf(self.base)
        e1 = factorial(k) - factorial(k + 1)
        e2 = factorial(k) - factorial(k + 2)
        lo = b ** e1
        hi = lo + 2 * b ** e2
        return LiouvilleProbe(self, k, q, p, mpmath.iv.mpf([lo.a, hi.b]))


@dataclass(frozen=True)
class LiouvilleProbe:
    symbol: LiouvilleSymbol
    k: int
    q: int
    p: int
    residual: object  # mpmath iv interval enclosing q*x - p (> 0)


@dataclass(frozen=True)
class OpaqueSymbol:
    """A declared constant known only through a fixed rational enclosure."""

    name: str
    lo: Fraction
    hi: Fraction
    tag: str = UNKNOWN
    kind = "opaque"
    refinable = False

    def __post_init__(self):
        if not self.lo < self.hi:
            raise PreconditionError(f"enclosure of {self.name} must have lo < hi")
        if self.tag not in TAGS:
            raise PreconditionError(f"unknown diophantine tag {self.tag!r}")

    def interval(self, level: int) -> Interval:
        return Interval(self.lo, self.hi)

    def certifies(self, iv: Interval) -> bool:
        return iv.lo <= self.lo and self.hi <= iv.hi


Symbol = SqrtSymbol | LiouvilleSymbol | OpaqueSymbol


class Basis:
    """Ordered irrational generators; ``{1}`` plus their monomials are assumed ℚ-independent.

    Independence of square-root monomials is checked (the radicands must be
    multiplicatively independent modulo squares). For transcendental symbols
    it is a recorded user assertion.
    """

    def __init__(self, symbols: Iterable[Symbol] = (), independence_asserted: bool = True):
        self.symbols: tuple[Symbol, ...] = tuple(symbols)
        self.independence_asserted = independence_asserted
        self.index = {s.name: i for i, s in enumerate(self.symbols)}
        if len(self.index) != len(self.symbols):
            raise PreconditionError("duplicate symbol names in basis")
        self._check_sqrt_independence()

    def _check_sqrt_independence(self):
        rows = []
        for s in self.symbols:
            if isinstance(s, SqrtSymbol):
                rows.append(sum(1 << p for p, e in _factor(s.radicand).items() if e % 2))
        # GF(2) rank of parity vectors via xor basis
        basis: list[int] = []
        for r in rows:
            for b in basis:
                r = min(r, r ^ b)
            if r == 0:
                raise PreconditionError("square-root radicands are multiplicatively dependent")
            basis.append(r)

    def __len__(self):
        return len(self.symbols)

    def __eq__(self, other):
        return isinstance(other, Basis) and self.symbols == other.symbols

    def __hash__(self):
        return hash(self.symbols)

    def __repr__(self):
        return f"Basis({', '.join(s.name for s in self.symbols)})"

    def __getitem__(self, name: str) -> Symbol:
        return self.symbols[self.index[name]]

    def extend(self, *symbols: Symbol) -> Basis:
        return Basis(self.symbols + tuple(symbols), self.independence_asserted)

    def gen(self, name: str) -> ExactReal:
        self.index[name]
        return ExactReal({((name, 1),): Fraction(1)}, self)

    def rational(self, x) -> ExactReal:
        return ExactReal({(): _as_fraction(x)}, self)

    def number(self, coords: Sequence) -> ExactReal:
        """Number from a coordinate vector over ``{1} ∪ symbols``."""
        if len(coords) != 1 + len(self.symbols):
            raise PreconditionError(f"expected {1 + len(self.symbols)} coordinates, got {len(coords)}")
        terms = {(): _as_fraction(coords[0])}
        for s, c in zip(self.symbols, coords[1:]):
            terms[((s.name, 1),)] = _as_fraction(c)
        return ExactReal(terms, self)

    def complex(self, re, im=0) -> ExactComplex:
        return ExactComplex(self.coerce(re), self.coerce(im))

    def coerce(self, x) -> ExactReal:
        if isinstance(x, ExactReal):
            return x.rebase(merge_bases(self, x.basis))
        return self.rational(x)


def merge_bases(a: Basis, b: Basis) -> Basis:
    if a is b or a == b:
        return a
    names_a = {s.name: s for s in a.symbols}
    names_b = {s.name: s for s in b.symbols}
    for n in names_a.keys() & names_b.keys():
        if names_a[n] != names_b[n]:
            raise PreconditionError(f"conflicting definitions of symbol {n}")
    if names_a.keys() <= names_b.keys():
        return b
    if names_b.keys() <= names_a.keys():
        return a
    return a.extend(*(s for s in b.symbols if s.name not in names_a))


_PRESET_RADICANDS = {"sqrt2": (2,), "sqrt3": (3,), "sqrt5": (5,), "sqrt2,sqrt3": (2, 3)}


def preset_basis(name: str) -> Basis:
    """Shipped bases whose independence is classical: {√2}, {√3}, {√5}, {√2,√3}."""
    try:
        rads = _PRESET_RADICANDS[name]
    except KeyError:
        raise PreconditionError(f"unknown preset basis {name!r}") from None
    return Basis(SqrtSymbol(f"sqrt{r}", r) for r in rads)


# -- exact reals ---------------------------------------------------------------

Monomial = tuple  # tuple of (symbol name, exponent) in basis order


class ExactReal:
    """Rational combination of basis monomials; immutable."""

    __slots__ = ("basis", "terms")

    def __init__(self, terms: dict, basis: Basis):
        self.basis = basis
        self.terms = {m: Fraction(c) for m, c in terms.items() if c}

    # construction helpers
    def rebase(self, basis: Basis) -> ExactReal:
        if basis is self.basis:
            return self
        for m in self.terms:
            for name, _ in m:
                basis.index[name]
        out = ExactReal.__new__(ExactReal)
        out.basis = basis
        out.terms = {_sort_mono(m, basis): c for m, c in self.terms.items()}
        return out

    def _lift(self, other) -> tuple[ExactReal, ExactReal]:
        if isinstance(other, ExactReal):
            basis = merge_bases(self.basis, other.basis)
            return self.rebase(basis), other.rebase(basis)
        if isinstance(other, (int, Fraction)):
            return self, self.basis.rational(other)
        return NotImplemented, NotImplemented

    # structure
    def coeff(self, mono: Monomial = ()) -> Fraction:
        return self.terms.get(mono, Fraction(0))

    def irrational_monomials(self) -> list[Monomial]:
        return [m for m in self.terms if m]

    @property
    def coords(self) -> list[Fraction]:
        """Coordinate vector over ``{1} ∪ basis`` (linear numbers only)."""
        out = [self.coeff(())]
        for s in self.basis.symbols:
            out.append(self.coeff(((s.name, 1),)))
        if sum(1 for c in out if c) != len(self.terms):
            raise PreconditionError("number is not linear in the basis symbols")
        return out

    def is_zero(self) -> bool:
        return not self.terms

    def as_rational(self) -> Fraction | None:
        if any(m for m in self.terms):
            return None
        return self.terms.get((), Fraction(0))

    @property
    def is_rational(self) -> bool:
        return self.as_rational() is not None

    def symbol_names(self) -> set[str]:
        return {name for m in self.terms for name, _ in m}

    # arithmetic
    def __add__(self, other):
        a, b = self._lift(other)
        if a is NotImplemented:
            return NotImplemented
        terms = dict(a.terms)
        for m, c in b.terms.items():
            terms[m] = terms.get(m, 0) + c
        return ExactReal(terms, a.basis)

    __radd__ = __add__

    def __neg__(self):
        return ExactReal({m: -c for m, c in self.terms.items()}, self.basis)

    def __sub__(self, other):
        a, b = self._lift(other)
        if a is NotImplemented:
            return NotImplemented
        return a + (-b)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (int, Fraction)):
            return ExactReal({m: c * other for m, c in self.terms.items()}, self.basis)
        a, b = self._lift(other)
        if a is NotImplemented:
            return NotImplemented
        basis = a.basis
        terms: dict = {}
        for m1, c1 in a.terms.items():
            for m2, c2 in b.terms.items():
                f, m = _mono_mul(m1, m2, basis)
                terms[m] = terms.get(m, 0) + c1 * c2 * f
        return ExactReal(terms, basis)

    __rmul__ = __mul__

    def inverse(self) -> ExactReal:
        """Multiplicative inverse; supported inside the square-root subfield and for single terms."""
        if self.is_zero():
            raise ZeroDivisionError("inverse of exact zero")
        if len(self.terms) == 1:
            (m, c), = self.terms.items()
            inv_m = tuple((n, -e) for n, e in m)
            # sqrt exponents must stay in {0, 1}: 1/sqrt(d) = sqrt(d)/d
            f = Fraction(1)
            fixed = []
            for n, e in inv_m:
                sym = self.basis[n]
                if isinstance(sym, SqrtSymbol):
                    f /= sym.radicand
                    fixed.append((n, 1))
                else:
                    fixed.append((n, e))
            return ExactReal({tuple(fixed): f / c}, self.basis)
        sqrt_names = [n for n in self.symbol_names() if isinstance(self.basis[n], SqrtSymbol)]
        if len(sqrt_names) != len(self.symbol_names()):
            raise PreconditionError("cannot invert a sum involving transcendental symbols")
        if not sqrt_names:
            return self.basis.rational(1 / self.coeff(()))
        conj = self.conjugate_sqrt(sqrt_names[0])
        return conj * (self * conj).inverse()

    def conjugate_sqrt(self, name: str) -> ExactReal:
        """Image under the field automorphism ``sqrt -> -sqrt`` for one square-root symbol."""
        terms = {}
        for m, c in self.terms.items():
            sign = -1 if any(n == name and e % 2 for n, e in m) else 1
            terms[m] = sign * c
        return ExactReal(terms, self.basis)

    def __truediv__(self, other):
        if isinstance(other, (int, Fraction)):
            if other == 0:
                raise ZeroDivisionError
            return self * (1 / Fraction(other))
        if isinstance(other, ExactReal):
            return self * other.inverse()
        return NotImplemented

    def __rtruediv__(self, other):
        return self.inverse() * other

    def __eq__(self, other):
        if isinstance(other, (int, Fraction)):
            return self.as_rational() == other
        if not isinstance(other, ExactReal):
            return NotImplemented
        return (self - other).is_zero()

    def __hash__(self):
        q = self.as_rational()
        if q is not None:
            return hash(q)
        return hash(frozenset(self.terms.items()))

    # enclosures
    def interval(self, level: int = 0) -> Interval:
        total = Interval.point(0)
        for m, c in self.terms.items():
            iv = Interval.point(c)
            for name, e in m:
                iv = iv * (self.basis[name].interval(level) ** e)
            total = total + iv
        return total

    @property
    def refinable(self) -> bool:
        return all(self.basis[n].refinable for n in self.symbol_names())

    def __float__(self):
        mid = self.interval(0).mid
        try:
            return float(mid)
        except OverflowError:
            return float("inf") if mid > 0 else float("-inf")

    def approx_str(self, digits: int = 17) -> str:
        """Decimal approximation as a string; survives magnitudes beyond float range."""
        mid = self.interval(0).mid
        with mpmath.workprec(96):
            return mpmath.nstr(mpmath.mpf(mid.numerator) / mid.denominator, digits)

    def __repr__(self):
        return f"ExactReal({self})"

    def __str__(self):
        if not self.terms:
            return "0"
        parts = []
        for m, c in sorted(self.terms.items(), key=lambda mc: (len(mc[0]), mc[0])):
            mono = "*".join(n if e == 1 else f"{n}^{e}" for n, e in m)
            if not mono:
                parts.append(str(c))
            elif c == 1:
                parts.append(mono)
            else:
                parts.append(f"{c}*{mono}")
        return " + ".join(parts).replace("+ -", "- ")

    def to_json(self) -> dict:
        return {
            "terms": [
                {"monomial": [[n, e] for n, e in m], "coeff": str(c)}
                for m, c in sorted(self.terms.items(), key=lambda mc: (len(mc[0]), mc[0]))
            ],
            "approx": self.approx_str(),
        }


def _sort_mono(m: Monomial, basis: Basis) -> Monomial:
    return tuple(sorted(m, key=lambda ne: basis.index[ne[0]]))


def _mono_mul(m1: Monomial, m2: Monomial, basis: Basis) -> tuple[Fraction, Monomial]:
    if not m1:
        return Fraction(1), m2
    if not m2:
        return Fraction(1), m1
    exps = dict(m1)
    for n, e in m2:
        exps[n] = exps.get(n, 0) + e
    f = Fraction(1)
    out = []
    for n, e in exps.items():
        sym = basis[n]
        if isinstance(sym, SqrtSymbol):
            f *= sym.radicand ** (e // 2)
            e %= 2
        if e:
            out.append((n, e))
    return f, _sort_mono(tuple(out), basis)


class ExactComplex:
    """Pair of :class:`ExactReal` over one basis."""

    __slots__ = ("re", "im")

    def __init__(self, re: ExactReal, im: ExactReal | None = None):
        if im is None:
            im = re.basis.rational(0)
        basis = merge_bases(re.basis, im.basis)
        self.re = re.rebase(basis)
        self.im = im.rebase(basis)

    @property
    def basis(self) -> Basis:
        return self.re.basis

    def _wrap(self, other) -> ExactComplex:
        if isinstance(other, ExactComplex):
            return other
        if isinstance(other, ExactReal):
            return ExactComplex(other)
        if isinstance(other, (int, Fraction)):
            return ExactComplex(self.basis.rational(other))
        return NotImplemented

    def __add__(self, other):
        o = self._wrap(other)
        if o is NotImplemented:
            return NotImplemented
        return ExactComplex(self.re + o.re, self.im + o.im)

    __radd__ = __add__

    def __neg__(self):
        return ExactComplex(-self.re, -self.im)

    def __sub__(self, other):
        o = self._wrap(other)
        if o is NotImplemented:
            return NotImplemented
        return ExactComplex(self.re - o.re, self.im - o.im)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (int, Fraction, ExactReal)):
            return ExactComplex(self.re * other, self.im * other)
        o = self._wrap(other)
        if o is NotImplemented:
            return NotImplemented
        return ExactComplex(self.re * o.re - self.im * o.im, self.re * o.im + self.im * o.re)

    __rmul__ = __mul__

    def conj(self) -> ExactComplex:
        return ExactComplex(self.re, -self.im)

    def modulus_sq(self) -> ExactReal:
        return self.re * self.re + self.im * self.im

    def __truediv__(self, other):
        if isinstance(other, (int, Fraction, ExactReal)):
            return ExactComplex(self.re / other, self.im / other)
        o = self._wrap(other)
        return (self * o.conj()) / o.modulus_sq()

    def is_zero(self) -> bool:
        return self.re.is_zero() and self.im.is_zero()

    def is_real(self) -> bool:
        return self.im.is_zero()

    def __eq__(self, other):
        o = self._wrap(other)
        if o is NotImplemented:
            return NotImplemented
        return self.re == o.re and self.im == o.im

    def __hash__(self):
        return hash((self.re, self.im))

    def __complex__(self):
        return complex(float(self.re), float(self.im))

    def __repr__(self):
        return f"ExactComplex({self})"

    def __str__(self):
        if self.im.is_zero():
            return str(self.re)
        return f"({self.re}) + i*({self.im})"

    def to_json(self) -> dict:
        return {"re": self.re.to_json(), "im": self.im.to_json()}


# -- operations ----------------------------------------------------------------


def as_rational(x: ExactReal) -> Fraction | None:
    return x.as_rational()


def enclosure(x: ExactReal, precision) -> Interval:
    """Certified rational interval of width ``<= precision`` containing ``x``."""
    precision = _as_fraction(precision)
    if precision <= 0:
        raise PreconditionError("precision must be positive")
    prev = None
    for level in range(REFINEMENT_BUDGET + 1):
        iv = x.interval(level)
        if iv.width <= precision:
            return iv
        if iv == prev:
            break
        prev = iv
    raise RefinementExhausted(f"cannot reach width {float(precision):.3g} for {x}")


def certified_sign(x: ExactReal) -> int:
    """Sign of ``x``: exact for zero, otherwise by refined enclosures."""
    if x.is_zero():
        return 0
    prev = None
    for level in range(REFINEMENT_BUDGET + 1):
        iv = x.interval(level)
        if iv.lo > 0:
            return 1
        if iv.hi < 0:
            return -1
        if iv == prev:
            break
        prev = iv
    raise RefinementExhausted(f"sign of {x} not certified")


def certified_floor(x: ExactReal) -> int:
    q = x.as_rational()
    if q is not None:
        return floor(q)
    prev = None
    for level in range(REFINEMENT_BUDGET + 1):
        iv = x.interval(level)
        a = floor(iv.lo)
        # x is irrational, so touching an integer endpoint is undecided only at lo == a
        if floor(iv.hi) == a and iv.lo != a:
            return a
        if iv == prev:
            break
        prev = iv
    raise RefinementExhausted(f"floor of {x} not certified")


def liouville(base: int, depth: int, name: str | None = None, basis: Basis | None = None) -> ExactReal:
    """The constant ``sum_k base**(-k!)`` as a fresh liouville-tagged basis symbol."""
    sym = LiouvilleSymbol(name or f"L{base}_{depth}", base, depth)
    basis = (basis or Basis()).extend(sym)
    return basis.gen(sym.name)


class ConvergentList(list):
    """Certified prefix of continued-fraction convergents.

    ``truncated`` is true when enclosure refinement ran out before ``count``
    convergents were certified; ``notice`` explains why.
    """

    truncated = False
    notice: str | None = None


def _cf_rational(q: Fraction) -> list[int]:
    out = []
    num, den = q.numerator, q.denominator
    while den:
        a = num // den
        out.append(a)
        num, den = den, num - a * den
    return out


def _cf_interval(iv: Interval, count: int) -> list[int]:
    lo, hi = iv.lo, iv.hi
    out: list[int] = []
    while len(out) < count:
        a = floor(lo)
        if floor(hi) != a or lo == a:
            break
        out.append(a)
        lo, hi = 1 / (hi - a), 1 / (lo - a)
    return out


def _convergents_from(quotients: Sequence[int]) -> list[tuple[int, int]]:
    p0, q0, p1, q1 = 1, 0, 0, 1
    out = []
    for a in quotients:
        p0, p1 = a * p0 + p1, p0
        q0, q1 = a * q0 + q1, q0
        out.append((p0, q0))
    return out


def convergents(x: ExactReal, count: int) -> ConvergentList:
    """First ``count`` continued-fraction convergents ``(p, q)`` of ``x``.

    For rational ``x`` the list stops at ``x`` itself. Otherwise each partial
    quotient is certified from the enclosure of ``x`` (refined as needed);
    if refinement is exhausted the certified prefix is returned with
    ``truncated`` set.
    """
    q = x.as_rational()
    if q is not None:
        return ConvergentList(_convergents_from(_cf_rational(q)[:count]))
    quotients: list[int] = []
    prev = None
    for level in range(REFINEMENT_BUDGET + 1):
        iv = x.interval(level)
        quotients = _cf_interval(iv, count)
        if len(quotients) >= count or iv == prev:
            break
        prev = iv
    out = ConvergentList(_convergents_from(quotients))
    if len(out) < count:
        out.truncated = True
        out.notice = (
            f"only {len(out)} of {count} partial quotients certified from enclosure width {float(iv.width):.3g}"
        )
    return out


def rational_solution_space(matrix: Sequence[Sequence[ExactReal]]) -> list[list[Fraction]]:
    """Basis of ``{r in Q^C : every entry of M r is rational}``.

    Each row contributes one homogeneous rational equation per irrational
    monomial appearing in it; the system is solved exactly.
    """
    if not matrix:
        return []
    ncols = len(matrix[0])
    equations = []
    for row in matrix:
        monos = sorted({m for e in row for m in e.irrational_monomials()})
        for m in monos:
            equations.append([e.coeff(m) for e in row])
    return rational_nullspace(equations, ncols)


def diophantine_tag(x: ExactReal) -> str:
    """Best known Diophantine class of a real number from its exact form.

    Rational affine images ``a + c*s`` of a single symbol inherit its tag;
    irrational elements of a real quadratic field are badly approximable and
    other square-root combinations are algebraic. Anything else is unknown.
    """
    if x.is_rational:
        return RATIONAL
    names = x.symbol_names()
    syms = [x.basis[n] for n in names]
    if all(isinstance(s, SqrtSymbol) for s in syms):
        return BADLY_APPROXIMABLE if len(syms) == 1 else ALGEBRAIC
    irr = x.irrational_monomials()
    if len(irr) == 1 and len(irr[0]) == 1 and irr[0][0][1] in (1, -1):
        return syms[0].tag
    return UNKNOWN


def to_iv(x: ExactReal, level: int = 0):
    """mpmath interval enclosing ``x``."""
    iv = x.interval(level)
    lo = mpmath.iv.mpf(iv.lo.numerator) / iv.lo.denominator
    hi = mpmath.iv.mpf(iv.hi.numerator) / iv.hi.denominator
    return mpmath.iv.mpf([lo.a, hi.b])
