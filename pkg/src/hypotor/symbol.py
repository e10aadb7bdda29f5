"""The symbol ``tau + sum_j alpha_j xi_j - lambda`` and small-divisor search on the lattice.

Shell scans work on exact ℓ¹ shells ``|tau| + |xi|_1 = r``. On a shell with
fixed signs of ``tau`` and ``xi_1`` and fixed ``xi_2..xi_N`` the symbol is an
affine function ``A + B*u`` of ``u = |xi_1|``, so its squared modulus is a
convex quadratic in ``u`` and only the two integers around the real minimizer
(clipped to the shell) can win. Candidates are screened with scaled-integer
interval arithmetic and ties are settled exactly.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product
from math import lcm
from typing import Iterator, NamedTuple, Sequence

import numpy as np

from .errors import PreconditionError, RefinementExhausted, TooFewPoints
from .exactnum import (
    Basis,
    ExactComplex,
    ExactReal,
    Interval,
    LiouvilleSymbol,
    certified_sign,
    convergents,
    enclosure,
    merge_bases,
)
from .linalg import integer_row, solve_integer_system


def _to_complex(x, basis: Basis) -> ExactComplex:
    if isinstance(x, ExactComplex):
        return x
    if isinstance(x, ExactReal):
        return ExactComplex(x)
    if isinstance(x, tuple) and len(x) == 2:
        return ExactComplex(basis.coerce(x[0]), basis.coerce(x[1]))
    return ExactComplex(basis.coerce(x))


@dataclass(frozen=True)
class OperatorSpec:
    """``D_t + sum_j alpha_j D_{x_j} - lambda`` on the torus of dimension ``N+1``."""

    alphas: tuple[ExactComplex, ...]
    lam: ExactComplex

    def __post_init__(self):
        if len(self.alphas) < 1:
            raise PreconditionError("need at least one coefficient")
        basis = self.lam.basis
        for a in self.alphas:
            basis = merge_bases(basis, a.basis)
        object.__setattr__(self, "alphas", tuple(_rebase(a, basis) for a in self.alphas))
        object.__setattr__(self, "lam", _rebase(self.lam, basis))

    @classmethod
    def build(cls, alphas: Sequence, lam=0, basis: Basis | None = None) -> OperatorSpec:
        """Coerce ints, Fractions, ExactReals or ``(re, im)`` pairs into a spec."""
        basis = basis or Basis()
        for x in list(alphas) + [lam]:
            if isinstance(x, (ExactReal, ExactComplex)):
                basis = merge_bases(basis, x.basis)
        return cls(tuple(_to_complex(a, basis) for a in alphas), _to_complex(lam, basis))

    @property
    def N(self) -> int:
        return len(self.alphas)

    @property
    def basis(self) -> Basis:
        return self.lam.basis

    def with_lambda(self, lam) -> OperatorSpec:
        return OperatorSpec(self.alphas, _to_complex(lam, self.basis))

    def is_rational(self) -> bool:
        return all(
            x.re.is_rational and x.im.is_rational for x in self.alphas + (self.lam,)
        )


def _rebase(z: ExactComplex, basis: Basis) -> ExactComplex:
    return ExactComplex(z.re.rebase(basis), z.im.rebase(basis))


class LatticePoint(NamedTuple):
    tau: int
    xi: tuple[int, ...]

    @property
    def norm(self) -> int:
        return abs(self.tau) + sum(abs(x) for x in self.xi)

    def key(self) -> tuple[int, ...]:
        return (self.tau,) + tuple(self.xi)

    @classmethod
    def of(cls, tau: int, *xi: int) -> LatticePoint:
        return cls(int(tau), tuple(int(x) for x in xi))


def symbol_eval(spec: OperatorSpec, pt: LatticePoint) -> ExactComplex:
    """Exact value of the symbol at ``pt``."""
    if len(pt.xi) != spec.N:
        raise PreconditionError(f"point has {len(pt.xi)} frequencies, operator has {spec.N}")
    re = spec.basis.rational(pt.tau) - spec.lam.re
    im = -spec.lam.im
    for a, x in zip(spec.alphas, pt.xi):
        if x:
            re = re + a.re * x
            im = im + a.im * x
    return ExactComplex(re, im)


# -- rational zero sets --------------------------------------------------------


@dataclass(frozen=True)
class ZeroSet:
    """Integer zeros of the symbol: ``base + span_Z(lattice)``, or empty."""

    empty: bool
    base: LatticePoint | None = None
    lattice: tuple[tuple[int, ...], ...] = ()

    @property
    def infinite(self) -> bool:
        return not self.empty and bool(self.lattice)

    def contains(self, pt: LatticePoint) -> bool:
        if self.empty:
            return False
        diff = [a - b for a, b in zip(pt.key(), self.base.key())]
        if not self.lattice:
            return not any(diff)
        sol = solve_integer_system([list(col) for col in zip(*self.lattice)], diff)
        return sol is not None


def _rational_parts(spec: OperatorSpec) -> tuple[list[Fraction], list[Fraction], Fraction, Fraction]:
    re, im = [], []
    for a in spec.alphas:
        r, i = a.re.as_rational(), a.im.as_rational()
        if r is None or i is None:
            raise PreconditionError("zero_set_rational needs rational coefficients")
        re.append(r)
        im.append(i)
    lr, li = spec.lam.re.as_rational(), spec.lam.im.as_rational()
    if lr is None or li is None:
        raise PreconditionError("zero_set_rational needs a rational perturbation")
    return re, im, lr, li


def zero_set_rational(spec: OperatorSpec) -> ZeroSet:
    """Solve ``Re rho = 0`` and ``Im rho = 0`` over the integers."""
    re, im, lr, li = _rational_parts(spec)
    rows = [integer_row([Fraction(1)] + re + [lr]), integer_row([Fraction(0)] + im + [li])]
    a = [r[:-1] for r in rows]
    b = [r[-1] for r in rows]
    sol = solve_integer_system(a, b)
    if sol is None:
        return ZeroSet(True)
    base, kernel = sol
    return ZeroSet(False, LatticePoint(base[0], tuple(base[1:])), tuple(tuple(k) for k in kernel))


# -- shell scanning ------------------------------------------------------------


@dataclass(frozen=True)
class ShellRecord:
    r: int
    min_modulus_sq: Interval
    argmin: LatticePoint
    is_exact_zero: bool

    @property
    def exact(self) -> bool:
        return self.min_modulus_sq.lo == self.min_modulus_sq.hi

    def csv_row(self) -> list[str]:
        return (
            [str(self.r), _frac_str(self.min_modulus_sq.lo), _frac_str(self.min_modulus_sq.hi), str(self.argmin.tau)]
            + [str(x) for x in self.argmin.xi]
            + [str(int(self.is_exact_zero))]
        )


def _frac_str(q: Fraction) -> str:
    return str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"


def shell_csv_header(N: int) -> list[str]:
    return ["r", "min_modulus_sq_lo", "min_modulus_sq_hi", "tau"] + [f"xi{j + 1}" for j in range(N)] + ["is_zero"]


def _iv_int(x: ExactReal, scale: int, exact: bool) -> tuple[int, int]:
    """Integer interval enclosing ``x * scale``."""
    if exact:
        v = x.as_rational() * scale
        return v.numerator, v.numerator
    try:
        iv = enclosure(x, Fraction(1, 4 * scale))
    except RefinementExhausted:
        iv = x.interval(0)
    return math.floor(iv.lo * scale), math.ceil(iv.hi * scale)


def _imul(iv: tuple[int, int], k: int) -> tuple[int, int]:
    a, b = iv[0] * k, iv[1] * k
    return (a, b) if k >= 0 else (b, a)


def _iprod(x: tuple[int, int], y: tuple[int, int]) -> tuple[int, int]:
    ps = (x[0] * y[0], x[0] * y[1], x[1] * y[0], x[1] * y[1])
    return min(ps), max(ps)


def _isq(x: tuple[int, int]) -> tuple[int, int]:
    lo, hi = x
    if lo >= 0:
        return lo * lo, hi * hi
    if hi <= 0:
        return hi * hi, lo * lo
    return 0, max(lo * lo, hi * hi)


class _ScaledSpec:
    """Scaled-integer enclosures of all coefficients, shared by every shell."""

    def __init__(self, spec: OperatorSpec, bits: int = 160):
        self.spec = spec
        self.exact = spec.is_rational()
        if self.exact:
            d = 1
            for z in spec.alphas + (spec.lam,):
                d = lcm(d, z.re.as_rational().denominator, z.im.as_rational().denominator)
            self.scale = d
        else:
            self.scale = 1 << bits
        s = self.scale
        self.are = [_iv_int(a.re, s, self.exact) for a in spec.alphas]
        self.aim = [_iv_int(a.im, s, self.exact) for a in spec.alphas]
        self.lre = _iv_int(spec.lam.re, s, self.exact)
        self.lim = _iv_int(spec.lam.im, s, self.exact)
        # B = sigma1*alpha_1 - sigma_tau for the four sign patterns
        self.patterns = []
        for st, s1 in product((1, -1), (1, -1)):
            b_exact = spec.alphas[0] * s1 - st
            bre = (_imul(self.are[0], s1)[0] - st * s, _imul(self.are[0], s1)[1] - st * s)
            bim = _imul(self.aim[0], s1)
            zero = b_exact.is_zero()
            den = (_isq(bre)[0] + _isq(bim)[0], _isq(bre)[1] + _isq(bim)[1])
            if not zero and den[0] <= 0:
                raise RefinementExhausted("coefficient enclosure too coarse to separate alpha_1 from ±1")
            self.patterns.append((st, s1, bre, bim, den, zero))


def _free_vectors(dim: int, radius: int) -> Iterator[tuple[tuple[int, ...], int]]:
    """All integer vectors of length ``dim`` with ℓ¹ norm <= radius, with their norm."""
    if dim == 0:
        yield (), 0
        return
    for head in range(-radius, radius + 1):
        for tail, s in _free_vectors(dim - 1, radius - abs(head)):
            yield (head,) + tail, s + abs(head)


def _shell_candidates(sc: _ScaledSpec, r: int):
    """Yield ``(lo, hi, point)`` for every candidate minimizer on shell ``r``."""
    s_ = sc.scale
    N = sc.spec.N
    for rest, s in _free_vectors(N - 1, r):
        R = r - s
        base_re = (-sc.lre[1], -sc.lre[0])
        base_im = (-sc.lim[1], -sc.lim[0])
        for j, x in enumerate(rest, start=1):
            if x:
                t = _imul(sc.are[j], x)
                base_re = (base_re[0] + t[0], base_re[1] + t[1])
                t = _imul(sc.aim[j], x)
                base_im = (base_im[0] + t[0], base_im[1] + t[1])
        seen = set()
        for st, s1, bre, bim, den, zero in sc.patterns:
            a_re = (base_re[0] + st * R * s_, base_re[1] + st * R * s_)
            a_im = base_im
            if R == 0:
                us = [0]
            elif zero:
                us = [0, R]
            else:
                n1 = _iprod(a_re, bre)
                n2 = _iprod(a_im, bim)
                num = (n1[0] + n2[0], n1[1] + n2[1])
                # u* = -num/den with den > 0
                lo = min(Fraction(-num[1], den[0]), Fraction(-num[1], den[1]))
                hi = max(Fraction(-num[0], den[0]), Fraction(-num[0], den[1]))
                ulo, uhi = math.floor(lo), math.ceil(hi)
                ulo, uhi = max(0, min(ulo, R)), max(0, min(uhi, R))
                if uhi - ulo > 64:
                    raise RefinementExhausted("minimizer window too wide; raise working precision")
                us = range(ulo, uhi + 1)
            for u in us:
                tau = st * (R - u)
                xi1 = s1 * u
                key = (tau, xi1) + rest
                if key in seen:
                    continue
                seen.add(key)
                re = (a_re[0] + u * bre[0], a_re[1] + u * bre[1]) if u else a_re
                im = (a_im[0] + u * bim[0], a_im[1] + u * bim[1]) if u else a_im
                sq_re, sq_im = _isq(re), _isq(im)
                yield sq_re[0] + sq_im[0], sq_re[1] + sq_im[1], LatticePoint(tau, (xi1,) + rest)


def _resolve(spec: OperatorSpec, sc: _ScaledSpec, cands: list) -> tuple[Interval, LatticePoint, bool]:
    best_hi = min(c[1] for c in cands)
    live = [c for c in cands if c[0] <= best_hi]
    s2 = sc.scale * sc.scale
    if len(live) == 1 or all(c[0] == c[1] for c in live):
        lo = min(c[0] for c in live)
        pick = min((c for c in live if c[0] == lo), key=lambda c: c[2].key())
        iv = Interval(Fraction(pick[0], s2), Fraction(pick[1], s2))
        zero = pick[0] == 0 and symbol_eval(spec, pick[2]).is_zero()
        return iv, pick[2], zero
    # exact settlement among overlapping candidates
    vals = [(symbol_eval(spec, c[2]).modulus_sq(), c) for c in live]
    best_val, best = vals[0]
    ties = [best]
    for v, c in vals[1:]:
        sgn = certified_sign(v - best_val)
        if sgn < 0:
            best_val, best, ties = v, c, [c]
        elif sgn == 0:
            ties.append(c)
    pick = min(ties, key=lambda c: c[2].key())
    q = best_val.as_rational()
    iv = Interval(q, q) if q is not None else Interval(Fraction(pick[0], s2), Fraction(pick[1], s2))
    return iv, pick[2], best_val.is_zero()


def _scan_range(spec: OperatorSpec, radii: Sequence[int]) -> list[ShellRecord]:
    sc = _ScaledSpec(spec)
    out = []
    for r in radii:
        cands = []
        best_hi = None
        for lo, hi, pt in _shell_candidates(sc, r):
            if best_hi is not None and lo > best_hi:
                continue
            cands.append((lo, hi, pt))
            if best_hi is None or hi < best_hi:
                best_hi = hi
        iv, pt, zero = _resolve(spec, sc, cands)
        out.append(ShellRecord(r, iv, pt, zero))
    return out


def scan_shells(spec: OperatorSpec, r_max: int, r_min: int = 2, workers: int = 1) -> list[ShellRecord]:
    """Minimum of ``|rho|^2`` on every ℓ¹ shell ``r_min <= r <= r_max``.

    With ``workers > 1`` shells are split across processes; records are
    merged by radius so the output does not depend on scheduling.
    """
    if r_max < 2:
        raise PreconditionError("r_max must be >= 2")
    radii = list(range(max(r_min, 1), r_max + 1))
    if workers <= 1 or len(radii) < 2 * workers:
        return _scan_range(spec, radii)
    chunks = [radii[i::workers] for i in range(workers)]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(_scan_range, [spec] * workers, chunks))
    return sorted((rec for part in parts for rec in part), key=lambda rec: rec.r)


# -- witnesses -----------------------------------------------------------------


@dataclass(frozen=True)
class SearchBudget:
    """Finite search effort: exhaustive shells up to ``r_max`` plus guided probes."""

    r_max: int
    convergent_depth: int = 32

    def to_json(self) -> dict:
        return {"r_max": self.r_max, "convergent_depth": self.convergent_depth}


@dataclass(frozen=True)
class WitnessCertificate:
    """``|rho(point)|^2 <= lhs_sq < rhs_sq = |point|_1^(-2j)``."""

    j: int
    point: LatticePoint
    lhs_sq: Fraction
    rhs_sq: Fraction
    source: str

    def verify(self, spec: OperatorSpec) -> bool:
        """Re-check the certificate from the operator and the stored data alone."""
        if self.point.norm <= 1 or self.rhs_sq != Fraction(1, self.point.norm ** (2 * self.j)):
            return False
        if not self.lhs_sq < self.rhs_sq:
            return False
        z = symbol_eval(spec, self.point)
        q = z.modulus_sq().as_rational()
        if q is not None:
            return q <= self.lhs_sq
        prev = None
        for level in range(65):
            iv = modulus_sq_interval(z, level)
            if iv.hi <= self.lhs_sq:
                return True
            if iv.lo > self.lhs_sq or iv == prev:
                return False
            prev = iv
        return False

    def to_json(self) -> dict:
        return {
            "j": self.j,
            "tau": self.point.tau,
            "xi": list(self.point.xi),
            "lhs_sq_upper": _frac_str(self.lhs_sq),
            "rhs_sq": _frac_str(self.rhs_sq),
            "lhs_sq_approx": _frac_float(self.lhs_sq),
            "rhs_sq_approx": _frac_float(self.rhs_sq),
            "source": self.source,
        }


def _frac_float(q: Fraction) -> float:
    try:
        return float(q)
    except OverflowError:
        return math.inf


def modulus_sq_interval(z: ExactComplex, level: int = 0) -> Interval:
    """Enclosure of ``|z|^2`` from enclosures of the real and imaginary parts.

    Squaring the enclosures, rather than enclosing the expanded square,
    avoids cancellation between large cross terms.
    """
    return z.re.interval(level).square() + z.im.interval(level).square()


def certify_point(spec: OperatorSpec, j: int, pt: LatticePoint, source: str = "given") -> WitnessCertificate | None:
    """Certificate that ``lambda`` lies in ``M(j, tau, xi)`` at ``pt``, or None if it does not."""
    n = pt.norm
    if n <= 1:
        return None
    rhs = Fraction(1, n ** (2 * j))
    z = symbol_eval(spec, pt)
    q = z.modulus_sq().as_rational()
    if q is not None:
        return WitnessCertificate(j, pt, q, rhs, source) if q < rhs else None
    prev = None
    for level in range(0, 65):
        iv = modulus_sq_interval(z, level)
        if iv.hi < rhs:
            return WitnessCertificate(j, pt, iv.hi, rhs, source)
        if iv.lo >= rhs or iv == prev:
            return None
        prev = iv
    return None


def _nearest_taus(x: ExactReal) -> list[int]:
    iv = x.interval(0)
    lo, hi = math.floor(-iv.hi), math.ceil(-iv.lo)
    return list(range(lo, hi + 1)) if hi - lo <= 4 else [round(-float(iv.mid))]


def _affine_in_symbol(x: ExactReal):
    """``(a, c, symbol)`` with ``x == a + c*symbol`` for a single linear symbol, else None."""
    irr = x.irrational_monomials()
    if len(irr) != 1 or len(irr[0]) != 1 or irr[0][0][1] != 1:
        return None
    name = irr[0][0][0]
    return x.coeff(()), x.coeff(irr[0]), x.basis[name]


def _probe_points(spec: OperatorSpec, budget: SearchBudget) -> Iterator[tuple[LatticePoint, str]]:
    N = spec.N
    real_dirs = [j for j, a in enumerate(spec.alphas) if a.im.is_zero() and not a.re.is_rational]
    for j in real_dirs:
        aff = _affine_in_symbol(spec.alphas[j].re)
        if aff is None or not isinstance(aff[2], LiouvilleSymbol):
            continue
        a, c, sym = aff
        d = lcm(a.denominator, c.denominator)
        for k in range(1, sym.depth + 1):
            q = d * sym.base ** math.factorial(k)
            xi = [0] * N
            xi[j] = q
            x = spec.alphas[j].re * q - spec.lam.re
            for tau in _nearest_taus(x):
                yield LatticePoint(tau, tuple(xi)), f"liouville-truncation k={k}"
    for j in real_dirs:
        conv = convergents(spec.alphas[j].re, budget.convergent_depth)
        for p, q in conv:
            if q <= 0:
                continue
            xi = [0] * N
            xi[j] = q
            x = spec.alphas[j].re * q - spec.lam.re
            for tau in _nearest_taus(x):
                yield LatticePoint(tau, tuple(xi)), "convergent"


def find_witness(spec: OperatorSpec, j: int, budget: SearchBudget) -> WitnessCertificate | None:
    """First certified point of ``M(j, ., .)`` found within ``budget``.

    Guided probes (Liouville truncation denominators, then continued-fraction
    convergents of each real irrational coefficient) run first, followed by
    the exhaustive shell scan up to ``budget.r_max``. ``None`` means "none
    within budget", not "none exists".
    """
    if j < 1:
        raise PreconditionError("j must be positive")
    for pt, src in _probe_points(spec, budget):
        cert = certify_point(spec, j, pt, src)
        if cert is not None:
            return cert
    if budget.r_max < 2:
        return None
    sc = _ScaledSpec(spec)
    s2 = sc.scale * sc.scale
    for r in range(2, budget.r_max + 1):
        rhs_scaled = Fraction(s2, r ** (2 * j))
        hits = sorted(
            (c for c in _shell_candidates(sc, r) if c[0] < rhs_scaled), key=lambda c: (c[0], c[2].key())
        )
        for _, _, pt in hits:
            cert = certify_point(spec, j, pt, f"shell r={r}")
            if cert is not None:
                return cert
    return None


# -- exponent fit --------------------------------------------------------------


@dataclass(frozen=True)
class ExponentFit:
    C_hat: float
    M_hat: float
    R_used: int
    residual: float
    points: tuple[tuple[int, float], ...] = field(default=(), repr=False)

    def csv_row(self) -> list[str]:
        return [repr(self.C_hat), repr(self.M_hat), repr(self.residual), str(self.R_used)]


def _log_fraction(q: Fraction) -> float:
    return math.log(q.numerator) - math.log(q.denominator)


def record_minima(records: Sequence[ShellRecord]) -> list[tuple[int, Fraction]]:
    """Shells whose minimum reaches (or ties) the running minimum, zeros excluded."""
    out = []
    running = None
    for rec in sorted(records, key=lambda x: x.r):
        if rec.is_exact_zero:
            continue
        v = rec.min_modulus_sq.mid
        if v <= 0:
            continue
        if running is None or v <= running:
            running = v
            out.append((rec.r, v))
    return out


def fit_exponent(records: Sequence[ShellRecord]) -> ExponentFit:
    """Least-squares fit ``log min|rho| = log C - M log r`` over record minima."""
    pts = record_minima(records)
    if len(pts) < 5:
        raise TooFewPoints(f"need >= 5 nonzero record minima, got {len(pts)}")
    x = np.array([math.log(r) for r, _ in pts])
    y = np.array([0.5 * _log_fraction(v) for _, v in pts])
    slope, intercept = np.polyfit(x, y, 1)
    resid = float(np.sum((y - (slope * x + intercept)) ** 2))
    return ExponentFit(
        float(math.exp(intercept)), float(-slope), int(pts[0][0]), resid, tuple((r, float(v)) for r, v in pts)
    )
