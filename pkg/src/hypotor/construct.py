"""Constructive side: Kronecker approximation and singular solutions of tube-type operators.

Tube-type operators are ``D_t + sum_j c_j(t) D_{x_j} - lambda(t)`` with
trigonometric-polynomial coefficients. Along a frequency ``eta`` in x the
equation for the Fourier coefficient is the ODE ``-i w' + G(t) w = g`` with
``G = sum_j c_j eta_j - lambda``. Its homogeneous solutions are
``exp(-i int G)``, split here into a carrier ``exp(-i G_0 (t - t_ref))``
(``G_0`` the mean of ``G``, kept exact because it can be astronomically large)
and a periodic phase ``exp(-i (A(t) - A(t_ref)))`` built from the oscillating
part. Scalar prefactors are mpmath numbers so magnitudes far below the float
range survive.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product
from math import lcm
from typing import Sequence

import mpmath
import numpy as np
from scipy import integrate, optimize

from .errors import NoneWithinBudget, PreconditionError, RefinementExhausted, TooFewPoints
from .exactnum import (
    Basis,
    ExactComplex,
    ExactReal,
    LiouvilleSymbol,
    convergents,
    merge_bases,
    to_iv,
)
from .symbol import (
    OperatorSpec,
    SearchBudget,
    _affine_in_symbol,
    _to_complex,
    modulus_sq_interval,
    zero_set_rational,
)

TWO_PI = 2 * math.pi


def _frac(q: Fraction) -> str:
    return str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"


def _mp_str(x) -> str:
    return mpmath.nstr(x, 17, min_fixed=-4, max_fixed=6)


def int_json(n: int):
    """Integers as JSON numbers, strings beyond 2^53, a magnitude summary beyond 4000 bits."""
    if abs(n) < 1 << 53:
        return n
    if n.bit_length() <= 4000:
        return str(n)
    return {"sign": 1 if n > 0 else -1, "log10_approx": round(n.bit_length() * math.log10(2), 3),
            "bits": n.bit_length(), "low_bits_hex": hex(abs(n) & ((1 << 64) - 1))}


def int_csv(n: int) -> str:
    if n.bit_length() <= 4000:
        return str(n)
    return f"{'-' if n < 0 else ''}~1e{round(n.bit_length() * math.log10(2), 3)}"


def _carrier_json(z: ExactComplex):
    big = any(c.numerator.bit_length() > 4000 or c.denominator.bit_length() > 4000
              for part in (z.re, z.im) for c in part.terms.values())
    if not big:
        return z.to_json()
    return {"summary": "coefficients exceed 4000 bits",
            "re_terms": [[[list(x) for x in m], int_json(c.numerator), int_json(c.denominator)]
                         for m, c in sorted(z.re.terms.items())]}


def _mpc_pair(z) -> list[str]:
    z = mpmath.mpc(z)
    return [_mp_str(z.real), _mp_str(z.imag)]


# -- Kronecker approximation ---------------------------------------------------


@dataclass(frozen=True)
class KroneckerFrame:
    """Coordinates in the real basis ``{1, alpha_k}`` of the plane.

    ``alpha_j = T1_j + T2_j * alpha_k`` for every ``j != k``, so the point
    ``l + sum_{j != k} alpha_j m_j + n alpha_k`` has coordinates
    ``(l + T1(m), n + T2(m))``.
    """

    alphas: tuple[ExactComplex, ...]
    k: int
    columns: tuple[int, ...]
    T1: tuple[ExactReal, ...]
    T2: tuple[ExactReal, ...]

    def coordinates(self, ell: int, m: Sequence[int], n: int) -> tuple[ExactReal, ExactReal]:
        x = self.alphas[self.k].re.basis.rational(ell)
        y = self.alphas[self.k].re.basis.rational(n)
        for t1, t2, mj in zip(self.T1, self.T2, m):
            x = x + t1 * mj
            y = y + t2 * mj
        return x, y

    def point(self, ell: int, m: Sequence[int], n: int) -> ExactComplex:
        z = self.alphas[self.k] * n + ell
        for j, mj in zip(self.columns, m):
            z = z + self.alphas[j] * mj
        return z

    def from_coordinates(self, x: ExactReal, y: ExactReal) -> ExactComplex:
        return ExactComplex(x) + self.alphas[self.k] * ExactComplex(y)

    def target_coordinates(self, z: ExactComplex) -> tuple[ExactReal, ExactReal]:
        ak = self.alphas[self.k]
        y = z.im * ak.im.inverse()
        return z.re - y * ak.re, y


def kronecker_frame(alphas, k: int | None = None) -> KroneckerFrame:
    spec = alphas if isinstance(alphas, OperatorSpec) else OperatorSpec.build(list(alphas))
    al = spec.alphas
    if k is None:
        nonreal = [j for j, a in enumerate(al) if not a.im.is_zero()]
        if not nonreal:
            raise PreconditionError("a Kronecker frame needs a nonreal coefficient")
        k = nonreal[-1]
    ak = al[k]
    if ak.im.is_zero():
        raise PreconditionError(f"Im alpha_{k + 1} is zero")
    try:
        inv = ak.im.inverse()
    except PreconditionError as exc:
        raise PreconditionError(f"Im alpha_{k + 1} is not invertible in the number basis") from exc
    cols = tuple(j for j in range(len(al)) if j != k)
    T2 = tuple(al[j].im * inv for j in cols)
    T1 = tuple(al[j].re - ak.re * t2 for j, t2 in zip(cols, T2))
    return KroneckerFrame(al, k, cols, T1, T2)


@dataclass(frozen=True)
class KroneckerHit:
    ell: int
    m: tuple[int, ...]
    n: int
    k: int
    columns: tuple[int, ...]
    dist_sq_upper: Fraction

    def coefficients(self) -> tuple[int, ...]:
        """``(l, n_1..n_N)`` with the point equal to ``l + sum_j n_j alpha_j``."""
        out = [0] * (len(self.columns) + 1)
        out[self.k] = self.n
        for j, mj in zip(self.columns, self.m):
            out[j] = mj
        return (self.ell,) + tuple(out)

    def to_json(self) -> dict:
        return {
            "ell": self.ell,
            "m": list(self.m),
            "n": self.n,
            "k": self.k,
            "coefficients": list(self.coefficients()),
            "dist_sq_upper": _frac(self.dist_sq_upper),
            "dist_approx": math.sqrt(float(self.dist_sq_upper)),
        }


def _linf_shell(d: int, s: int) -> np.ndarray:
    if d == 0:
        return np.zeros((1, 0), dtype=np.int64)
    if s == 0:
        return np.zeros((1, d), dtype=np.int64)
    if d == 1:
        return np.array([[-s], [s]], dtype=np.int64)
    pts = [p for p in product(range(-s, s + 1), repeat=d) if max(abs(x) for x in p) == s]
    return np.array(pts, dtype=np.int64)


def _certify_below(w: ExactComplex, eps_sq: Fraction) -> Fraction | None:
    q = w.modulus_sq().as_rational()
    if q is not None:
        return q if q < eps_sq else None
    prev = None
    for level in range(0, 65):
        iv = modulus_sq_interval(w, level)
        if iv.hi < eps_sq:
            return iv.hi
        if iv.lo >= eps_sq or iv == prev:
            return None
        prev = iv
    return None


def kronecker_approximate(alphas, z, eps, bound: int, k: int | None = None) -> KroneckerHit | None:
    """An element of ``Z + alpha_1 Z + ... + alpha_N Z`` within ``eps`` of ``z``.

    The ``m``-vectors (coefficients of ``alpha_j``, ``j != k``) are visited by
    increasing sup-norm, lexicographically inside each shell, up to
    ``bound``. For each ``m`` the integers ``l`` and ``n`` are the nearest
    ones to the frame coordinates; floats only screen candidates and every
    returned distance is certified exactly.
    """
    eps = Fraction(eps)
    if eps <= 0:
        raise PreconditionError("eps must be positive")
    frame = kronecker_frame(alphas, k)
    basis = frame.alphas[0].basis
    z = _to_complex(z, basis)
    x_t, y_t = frame.target_coordinates(z)
    xf, yf = float(x_t), float(y_t)
    t1 = np.array([float(v) for v in frame.T1])
    t2 = np.array([float(v) for v in frame.T2])
    ak = complex(frame.alphas[frame.k])
    eps_sq = eps * eps
    d = len(frame.columns)
    for s in range(0, bound + 1):
        ms = _linf_shell(d, s)
        a = ms @ t1 if d else np.zeros(1)
        b = ms @ t2 if d else np.zeros(1)
        ell = np.rint(xf - a)
        nn = np.rint(yf - b)
        w = (ell + a - xf) + (nn + b - yf) * ak
        for i in np.nonzero(np.abs(w) < float(eps) * (1 + 1e-9))[0]:
            m = tuple(int(v) for v in ms[i])
            li, ni = int(ell[i]), int(nn[i])
            cert = _certify_below(frame.point(li, m, ni) - z, eps_sq)
            if cert is not None:
                return KroneckerHit(li, m, ni, frame.k, frame.columns, cert)
        if d == 0:
            break
    return None


# -- trigonometric polynomials and tube operators ------------------------------


@dataclass(frozen=True)
class TrigPoly:
    """``sum_k c_k e^{ikt}`` with exact complex coefficients."""

    coeffs: tuple[tuple[int, ExactComplex], ...]

    @classmethod
    def of(cls, mapping: dict, basis: Basis | None = None) -> TrigPoly:
        basis = basis or Basis()
        for v in mapping.values():
            if isinstance(v, (ExactReal, ExactComplex)):
                basis = merge_bases(basis, v.basis)
        items = []
        for mode in sorted(mapping):
            c = _to_complex(mapping[mode], basis)
            if not c.is_zero():
                items.append((int(mode), c))
        return cls(tuple(items))

    def mean(self, basis: Basis | None = None) -> ExactComplex:
        for mode, c in self.coeffs:
            if mode == 0:
                return c
        return ExactComplex((basis or self.basis).rational(0))

    @property
    def basis(self) -> Basis:
        return self.coeffs[0][1].basis if self.coeffs else Basis()

    def oscillating(self) -> TrigPoly:
        return TrigPoly(tuple((m, c) for m, c in self.coeffs if m != 0))

    def combine(self, other: TrigPoly, a: int = 1, b: int = 1) -> TrigPoly:
        acc: dict[int, ExactComplex] = {}
        for m, c in self.coeffs:
            acc[m] = c * a
        for m, c in other.coeffs:
            acc[m] = acc[m] + c * b if m in acc else c * b
        return TrigPoly(tuple((m, c) for m, c in sorted(acc.items()) if not c.is_zero()))

    def __call__(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        out = np.zeros(t.shape, dtype=complex)
        for m, c in self.coeffs:
            out += complex(c) * np.exp(1j * m * t)
        return out

    def periodic_antiderivative(self, t) -> np.ndarray:
        """``sum_{k != 0} c_k e^{ikt} / (ik)``; the mean is left out."""
        t = np.asarray(t, dtype=float)
        out = np.zeros(t.shape, dtype=complex)
        for m, c in self.coeffs:
            if m:
                out += complex(c) / (1j * m) * np.exp(1j * m * t)
        return out

    def to_json(self) -> dict:
        return {"modes": [{"k": m, "coeff": c.to_json()} for m, c in self.coeffs]}


@dataclass(frozen=True)
class TubeOperatorSpec:
    """``D_t + sum_j c_j(t) D_{x_j} - lambda(t)`` on the torus."""

    c: tuple[TrigPoly, ...]
    lam: TrigPoly

    @property
    def N(self) -> int:
        return len(self.c)

    @property
    def basis(self) -> Basis:
        b = self.lam.basis
        for p in self.c:
            b = merge_bases(b, p.basis)
        return b

    def oscillation(self, eta: Sequence[int]) -> TrigPoly:
        """Mean-free part of ``G(t) = sum_j eta_j c_j(t) - lambda(t)``."""
        acc = TrigPoly(()).combine(self.lam.oscillating(), 0, -1)
        for cj, e in zip(self.c, eta):
            if e:
                acc = acc.combine(cj.oscillating(), 1, e)
        return acc

    def to_json(self) -> dict:
        return {"N": self.N, "c": [p.to_json() for p in self.c], "lambda": self.lam.to_json()}


def averages(tube: TubeOperatorSpec) -> tuple[ExactComplex, ...]:
    """``(c_10, ..., c_N0, lambda_0)``: the mode-0 coefficients."""
    b = tube.basis
    return tuple(_rebase(p.mean(b), b) for p in tube.c) + (_rebase(tube.lam.mean(b), b),)


def _rebase(z: ExactComplex, basis: Basis) -> ExactComplex:
    return ExactComplex(z.re.rebase(basis), z.im.rebase(basis))


def resonant_tube() -> TubeOperatorSpec:
    """``c_1 = 1/2 + i sin t``, ``lambda = 1/2``: exact resonance on odd frequencies."""
    half = Fraction(1, 2)
    return TubeOperatorSpec((TrigPoly.of({0: half, 1: half, -1: -half}),), TrigPoly.of({0: half}))


def liouville_tube(base: int = 10, depth: int = 4) -> TubeOperatorSpec:
    """``c_1`` the Liouville constant, ``lambda = cos(t)/2 + i sin(t)/4`` (mean zero)."""
    from .exactnum import liouville

    L = liouville(base, depth)
    lam = TrigPoly.of({1: (Fraction(1, 4), Fraction(0)), -1: (Fraction(1, 4), Fraction(0))})
    lam = lam.combine(TrigPoly.of({1: Fraction(1, 8), -1: -Fraction(1, 8)}))
    return TubeOperatorSpec((TrigPoly.of({0: L}),), lam)


# -- resonant sequences --------------------------------------------------------


@dataclass(frozen=True)
class ResonantEntry:
    """``theta = sum_j c_j0 eta_j - lambda_0``; ``h = theta + tau`` is its distance to Z.

    ``bound`` is a certified upper bound for ``|E_n| = |1 - exp(-2 pi i theta)|``
    and ``threshold`` is ``|eta|_1^(-n)``.
    """

    n: int
    eta: tuple[int, ...]
    tau: int
    h_re: object  # mpmath iv interval, or None for exact resonance
    h_im: object
    bound: object  # mpf
    threshold: object  # mpf
    source: str

    @property
    def norm(self) -> int:
        return sum(abs(e) for e in self.eta)

    @property
    def exact(self) -> bool:
        return self.h_re is None

    def h_mid(self) -> mpmath.mpc:
        if self.exact:
            return mpmath.mpc(0)
        return mpmath.mpc(self.h_re.mid, self.h_im.mid)

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "eta": [int_json(e) for e in self.eta],
            "tau": int_json(self.tau),
            "bound": _mp_str(self.bound),
            "threshold": _mp_str(self.threshold),
            "exact_resonance": self.exact,
            "source": self.source,
        }


@dataclass(frozen=True)
class ResonantSequence:
    entries: tuple[ResonantEntry, ...]

    @property
    def strictly_increasing(self) -> bool:
        norms = [e.norm for e in self.entries]
        return all(a < b for a, b in zip(norms, norms[1:])) and all(e.norm > e.n for e in self.entries)

    @property
    def exact(self) -> bool:
        return bool(self.entries) and all(e.exact for e in self.entries)

    def to_json(self) -> dict:
        return {"entries": [e.to_json() for e in self.entries], "strictly_increasing": self.strictly_increasing}


def _theta(avgs: Sequence[ExactComplex], eta: Sequence[int]) -> ExactComplex:
    out = avgs[-1] * -1
    for c, e in zip(avgs[:-1], eta):
        if e:
            out = out + c * e
    return out


def _e_bound(h_re, h_im):
    """Upper bound of ``|1 - exp(-2 pi i h)| <= 2 pi |h| exp(2 pi |h|)``."""
    iv = mpmath.iv
    hm = iv.sqrt(h_re * h_re + h_im * h_im)
    return mpmath.make_mpf((2 * iv.pi * hm * iv.exp(2 * iv.pi * hm))._mpi_[1])


def _liouville_candidates(avgs, n: int, kmax: int):
    """Truncation denominators of Liouville averages, starting at level ``n + 1``."""
    lam0 = avgs[-1]
    lr, li = lam0.re.as_rational(), lam0.im.as_rational()
    if lr is None or li is None:
        return
    for j, c in enumerate(avgs[:-1]):
        if not c.im.is_zero():
            continue
        aff = _affine_in_symbol(c.re)
        if aff is None or not isinstance(aff[2], LiouvilleSymbol):
            continue
        a, coef, sym = aff
        d = lcm(a.denominator, coef.denominator)
        for k in range(n + 1, kmax + 1):
            pr = sym.probe(k)
            eta = [0] * (len(avgs) - 1)
            eta[j] = d * pr.q
            # theta = [d q a + d coef p - lambda_0] + d coef (q L - p)
            rest = d * pr.q * a + d * coef * pr.p - lr
            tau = -round(rest)
            h_re = mpmath.iv.mpf(Fraction(rest + tau).numerator) / Fraction(rest + tau).denominator
            h_re = h_re + mpmath.iv.mpf(d * coef.numerator) / coef.denominator * pr.residual
            h_im = mpmath.iv.mpf(-li.numerator) / li.denominator
            yield tuple(eta), tau, h_re, h_im, f"liouville-truncation k={k}"


def _convergent_candidates(avgs, budget: SearchBudget):
    for j, c in enumerate(avgs[:-1]):
        if not c.im.is_zero() or c.re.is_rational or not c.re.refinable:
            continue
        for _, q in convergents(c.re, budget.convergent_depth):
            if q <= 0:
                continue
            eta = [0] * (len(avgs) - 1)
            eta[j] = q
            th = _theta(avgs, eta)
            iv = th.re.interval(0)
            tau = -round(iv.mid)
            yield tuple(eta), tau, th, "convergent"


def _exact_candidate_h(th: ExactComplex, tau: int):
    hr = th.re + tau
    for level in range(0, 8):
        yield to_iv(hr, level), to_iv(th.im, level)


def _resonant_lattice(avgs, n_max: int) -> ResonantSequence | None:
    spec = OperatorSpec(tuple(avgs[:-1]), avgs[-1])
    zs = zero_set_rational(spec)
    if zs.empty:
        return None
    dirs = [v for v in zs.lattice if any(v[1:])]
    if not dirs:
        return None
    v = dirs[0]
    base = zs.base.key()
    entries = []
    prev = 0
    for n in range(1, n_max + 1):
        t = 0
        while True:
            found = None
            for s in ((t, -t) if t else (0,)):
                pt = [b + s * x for b, x in zip(base, v)]
                norm = sum(abs(x) for x in pt[1:])
                if norm > max(prev, n):
                    found = pt
                    break
            if found:
                break
            t += 1
        prev = sum(abs(x) for x in found[1:])
        zero = mpmath.mpf(0)
        entries.append(
            ResonantEntry(n, tuple(found[1:]), found[0], None, None, zero, mpmath.mpf(prev) ** (-n), "exact-resonance")
        )
    return ResonantSequence(tuple(entries))


def find_eta_sequence(tube: TubeOperatorSpec, n_max: int, budget: SearchBudget) -> ResonantSequence:
    """Frequencies ``eta(n)`` with ``|1 - exp(-2 pi i (F_n0 - lambda_0))| < |eta(n)|_1^(-n)``.

    Rational averages with a resonant lattice give exact zeros (bound 0).
    Otherwise candidates come from Liouville truncation denominators and
    continued-fraction convergents of the averages; each is certified with
    ``|1 - e^z| <= |z| e^|z|`` on an interval enclosure of the fractional
    part. ``|eta(n)|_1`` is forced to exceed ``n`` and all previous norms.
    """
    avgs = averages(tube)
    if all(a.re.is_rational and a.im.is_rational for a in avgs):
        seq = _resonant_lattice(avgs, n_max)
        if seq is None:
            raise NoneWithinBudget("rational averages without a resonant lattice", ResonantSequence(()))
        return seq
    entries: list[ResonantEntry] = []
    prev = 0
    for n in range(1, n_max + 1):
        found = None
        liou = (
            (sum(abs(e) for e in eta), i, eta, tau, [(h_re, h_im)], src)
            for i, (eta, tau, h_re, h_im, src) in enumerate(_liouville_candidates(avgs, n, n + 3))
        )
        conv = (
            (sum(abs(e) for e in eta), i, eta, tau, _exact_candidate_h(th, tau), src)
            for i, (eta, tau, th, src) in enumerate(_convergent_candidates(avgs, budget))
        )
        for norm, _, eta, tau, hs, src in heapq.merge(liou, conv, key=lambda c: (c[0], c[1])):
            if norm <= max(prev, n):
                continue
            thr = mpmath.mpf(norm) ** (-n)
            thr_lo = mpmath.make_mpf((mpmath.iv.mpf(norm) ** (-n))._mpi_[0])
            for h_re, h_im in hs:
                b = _e_bound(h_re, h_im)
                if b < thr_lo:
                    found = ResonantEntry(n, eta, tau, h_re, h_im, b, thr, src)
                    break
            if found:
                break
        if found is None:
            raise NoneWithinBudget(f"no eta({n}) within budget", ResonantSequence(tuple(entries)))
        entries.append(found)
        prev = found.norm
    return ResonantSequence(tuple(entries))


# -- Fourier solutions ---------------------------------------------------------


def make_grid(G: int) -> np.ndarray:
    if G < 64 or G & (G - 1):
        raise PreconditionError("grid size must be a power of two >= 64")
    return TWO_PI * np.arange(G) / G


def spectral_derivative(samples: np.ndarray) -> np.ndarray:
    G = len(samples)
    k = np.fft.fftfreq(G, 1.0 / G)
    if G % 2 == 0:
        k[G // 2] = 0
    return np.fft.ifft(1j * k * np.fft.fft(samples))


def _check_resolved(samples: np.ndarray, what: str):
    spec = np.abs(np.fft.fft(samples))
    G = len(samples)
    tail = np.concatenate([spec[3 * G // 8 : 5 * G // 8]])
    if tail.max() > 1e-13 * spec.max():
        raise PreconditionError(f"{what} is not resolved on a {G}-point grid")


@dataclass
class Term:
    coeff: object  # mpmath mpc
    w: np.ndarray
    dw: np.ndarray
    w_ref: complex  # value at t_ref


@dataclass
class FourierMode:
    """``scale * exp(-i G0 (t - t_ref)) * phase(t) * sum_k coeff_k w_k(t)``."""

    n: int
    eta: tuple[int, ...]
    scale: object
    carrier: ExactComplex
    carrier_im: float
    t_ref: float
    phase: np.ndarray
    oscillation: np.ndarray
    terms: list[Term]

    def _carrier_abs(self, t: np.ndarray) -> np.ndarray:
        return np.exp(self.carrier_im * (t - self.t_ref))

    def envelope_abs(self, t: np.ndarray) -> list:
        """``|sum_k coeff_k w_k(t)|`` at every grid point, in mpmath."""
        out = []
        for i in range(len(t)):
            s = mpmath.mpc(0)
            for term in self.terms:
                s += term.coeff * complex(term.w[i])
            out.append(abs(s))
        return out

    def sup_abs(self, t: np.ndarray):
        mod = np.abs(self.phase) * self._carrier_abs(t)
        env = self.envelope_abs(t)
        return abs(self.scale) * max(mpmath.mpf(float(m)) * e for m, e in zip(mod, env))

    def abs_at_ref(self):
        s = mpmath.mpc(0)
        for term in self.terms:
            s += term.coeff * term.w_ref
        return abs(self.scale) * abs(s)

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "eta": [int_json(e) for e in self.eta],
            "scale": _mpc_pair(self.scale),
            "carrier": _carrier_json(self.carrier),
            "t_ref": repr(self.t_ref),
            "phase": [[repr(float(v.real)), repr(float(v.imag))] for v in self.phase],
            "terms": [
                {"coeff": _mpc_pair(tm.coeff), "w": [[repr(float(v.real)), repr(float(v.imag))] for v in tm.w]}
                for tm in self.terms
            ],
        }


@dataclass
class FourierSolution:
    kind: str
    grid_size: int
    modes: list[FourierMode]
    t_n: list[float] = field(default_factory=list)
    target: FourierSolution | None = None

    @property
    def grid(self) -> np.ndarray:
        return make_grid(self.grid_size)

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "grid_size": self.grid_size,
            "t_n": [repr(t) for t in self.t_n],
            "modes": [m.to_json() for m in self.modes],
        }


def _maximize(f, t: np.ndarray) -> float:
    """Argmax of ``f`` on ``[0, 2 pi)``: grid search refined by bounded Brent steps."""
    vals = f(t)
    i = int(np.argmax(vals))
    h = t[1] - t[0]
    lo, hi = max(t[i] - h, 0.0), min(t[i] + h, TWO_PI)
    res = optimize.minimize_scalar(lambda s: -f(np.array([s]))[0], bounds=(lo, hi), method="bounded",
                                   options={"xatol": 1e-13})
    best = float(res.x) if -res.fun > vals[i] else float(t[i])
    # periodic objectives may peak at 2 pi; report the least representative
    if best >= TWO_PI - 1e-12:
        best = 0.0
    return best


def _mode_phase(tube: TubeOperatorSpec, eta, t: np.ndarray, t_ref: float):
    osc = tube.oscillation(eta)
    A = osc.periodic_antiderivative(t)
    A_ref = osc.periodic_antiderivative(np.array([t_ref]))[0]
    phase = np.exp(-1j * (A - A_ref))
    return osc, phase


def build_homogeneous_singular(tube: TubeOperatorSpec, seq: ResonantSequence, grid: int = 256) -> FourierSolution:
    """Coefficients ``e^{-M_n} exp(-i int_0^t (C_n - lambda))`` of a non-smooth solution of ``P mu = 0``."""
    t = make_grid(grid)
    avgs = averages(tube)
    modes, tns = [], []
    for e in seq.entries:
        if not e.exact:
            raise PreconditionError(f"eta({e.n}) is not an exact resonance; use build_pair")
        g0 = _theta(avgs, e.eta)
        if not (g0.im.is_zero() and g0.re.is_rational and g0.re.as_rational().denominator == 1):
            raise PreconditionError(f"F_n0 - lambda_0 is not an integer for eta({e.n})")
        osc = tube.oscillation(e.eta)
        a0 = osc.periodic_antiderivative(np.array([0.0]))[0]

        def im_int(s, osc=osc, a0=a0):
            return np.imag(osc.periodic_antiderivative(s) - a0)

        tn = _maximize(im_int, t)
        M = float(im_int(np.array([tn]))[0])
        _, phase = _mode_phase(tube, e.eta, t, 0.0)
        _check_resolved(phase, f"phase of mode {e.n}")
        ones = np.ones(grid, dtype=complex)
        # value at t_n relative to the phase origin
        ref = complex(np.exp(-1j * (osc.periodic_antiderivative(np.array([tn]))[0] - a0)))
        modes.append(
            FourierMode(e.n, e.eta, mpmath.exp(-M), g0, 0.0, 0.0, phase, osc(t), [Term(mpmath.mpc(1), ones, 0 * ones, ref)])
        )
        tns.append(tn)
    return FourierSolution("mu", grid, modes, tns)


@dataclass(frozen=True)
class BumpSpec:
    """Standard bump ``exp(1 - 1/(1 - s^2))`` on an interval ``J`` of the given length."""

    length: float = math.pi / 2
    center: float | None = None
    margin: float = math.pi / 16

    def place(self, t0: float) -> tuple[float, float]:
        hw = self.length / 2
        if self.center is not None:
            c = self.center
        else:
            c = (t0 + math.pi) % TWO_PI
            c = min(max(c, hw + self.margin), TWO_PI - hw - self.margin)
        if c - hw <= 0 or c + hw >= TWO_PI:
            raise PreconditionError("bump interval must lie inside (0, 2 pi)")
        return c, hw


def _bump(t, c, hw):
    s = (np.asarray(t, dtype=float) - c) / hw
    out = np.zeros_like(s)
    d = np.zeros_like(s)
    inside = np.abs(s) < 1
    si = s[inside]
    v = np.exp(1 - 1 / (1 - si * si))
    out[inside] = v
    d[inside] = v * (-2 * si / (1 - si * si) ** 2) / hw
    return out, d


def _bump_integral(t: np.ndarray, c: float, hw: float) -> tuple[np.ndarray, float]:
    """``Phi(t) = int_0^t phi`` at each ``t`` and the total mass."""
    f = lambda s: float(_bump(np.array([s]), c, hw)[0][0])  # noqa: E731
    a, b = c - hw, c + hw
    total = integrate.quad(f, a, b, epsabs=0, epsrel=2e-14, limit=200)[0]
    out = np.empty(len(t))
    for i, s in enumerate(t):
        if s <= a:
            out[i] = 0.0
        elif s >= b:
            out[i] = total
        else:
            out[i] = integrate.quad(f, a, s, epsabs=0, epsrel=2e-14, limit=200)[0]
    return out, total


def e_value(entry: ResonantEntry):
    """``E_n = 1 - exp(-2 pi i h) = 2i exp(-i pi h) sin(pi h)``, stable for tiny ``h``."""
    h = entry.h_mid()
    with mpmath.workdps(30):
        return 2j * mpmath.exp(-1j * mpmath.pi * h) * mpmath.sin(mpmath.pi * h)


def build_pair(
    tube: TubeOperatorSpec, seq: ResonantSequence, bump: BumpSpec | None = None, grid: int = 256
) -> tuple[FourierSolution, FourierSolution, list[float]]:
    """Smooth data ``f`` and a non-smooth solution ``u`` of ``P u = f``, mode by mode.

    ``f_n = E_n phi(t) exp(-i int_{t_n}^t G)`` with ``t_n`` maximizing
    ``Im int_0^t G`` so the exponential has modulus at most one. With
    ``Phi = int_0^t phi`` the periodic solution is
    ``u_n = i exp(-i int_{t_n}^t G) (E_n Phi(t) + (1 - E_n) Phi(2 pi))``.
    """
    bump = bump or BumpSpec()
    t = make_grid(grid)
    avgs = averages(tube)
    for e in seq.entries:
        if e.exact or e.bound == 0:
            raise PreconditionError(f"eta({e.n}) is an exact resonance; use build_homogeneous_singular")
    prepared = []
    for e in seq.entries:
        g0 = _theta(avgs, e.eta)
        g0_im = float(e.h_im.mid)
        osc = tube.oscillation(e.eta)
        a0 = osc.periodic_antiderivative(np.array([0.0]))[0]

        def im_int(s, osc=osc, a0=a0, g0_im=g0_im):
            return g0_im * s + np.imag(osc.periodic_antiderivative(s) - a0)

        prepared.append((e, g0, g0_im, osc, _maximize(im_int, t)))
    tns = [p[4] for p in prepared]
    c, hw = bump.place(tns[-1])
    phi, dphi = _bump(t, c, hw)
    Phi, total = _bump_integral(t, c, hw)
    f_modes, u_modes = [], []
    for e, g0, g0_im, osc, tn in prepared:
        E = e_value(e)
        if E == 0:
            raise PreconditionError(f"E_{e.n} vanishes")
        _, phase = _mode_phase(tube, e.eta, t, tn)
        _check_resolved(phase, f"phase of mode {e.n}")
        G = osc(t)
        phi_tn, _ = _bump(np.array([tn]), c, hw)
        Phi_tn, _ = _bump_integral(np.array([tn]), c, hw)
        ones = np.ones(grid, dtype=complex)
        f_modes.append(
            FourierMode(e.n, e.eta, E, g0, g0_im, tn, phase, G,
                        [Term(mpmath.mpc(1), phi.astype(complex), dphi.astype(complex), complex(phi_tn[0]))])
        )
        u_modes.append(
            FourierMode(e.n, e.eta, mpmath.mpc(0, 1), g0, g0_im, tn, phase, G, [
                Term((1 - E) * total, ones, 0 * ones, 1.0),
                Term(E, Phi.astype(complex), phi.astype(complex), complex(Phi_tn[0])),
            ])
        )
    f = FourierSolution("f", grid, f_modes, tns)
    u = FourierSolution("u", grid, u_modes, tns, target=f)
    return f, u, tns


def bump_mass(bump: BumpSpec, t0: float) -> float:
    c, hw = bump.place(t0)
    return _bump_integral(np.array([0.0]), c, hw)[1]


# -- verification --------------------------------------------------------------


@dataclass(frozen=True)
class ModeResidual:
    n: int
    relative: float
    absolute: object  # mpf


@dataclass(frozen=True)
class ResidualReport:
    per_mode: tuple[ModeResidual, ...]

    @property
    def max_relative(self) -> float:
        return max((m.relative for m in self.per_mode), default=0.0)

    @property
    def max_absolute(self):
        return max((m.absolute for m in self.per_mode), default=mpmath.mpf(0))

    def csv_rows(self) -> list[list[str]]:
        return [[str(m.n), repr(m.relative), _mp_str(m.absolute)] for m in self.per_mode]


def _clusters(items, gap: float = 6.0):
    """Group ``(coeff, arr, norm)`` triples whose coefficients agree to ``10**gap``."""
    live = [it for it in items if it[0] != 0]
    live.sort(key=lambda it: -float(mpmath.log10(abs(it[0]))))
    groups: list[list] = []
    for it in live:
        if groups and float(mpmath.log10(abs(groups[-1][0][0]) / abs(it[0]))) <= gap:
            groups[-1].append(it)
        else:
            groups.append([it])
    return groups


def apply_operator(tube: TubeOperatorSpec, sol: FourierSolution) -> ResidualReport:
    """Per-mode sup residual of ``-i w' + G w - target`` on the grid.

    The carrier cancels ``G_0`` exactly, so the check applies spectral
    differentiation to the periodic phase and the analytic derivative of each
    envelope term. Terms are grouped by the size of their scalar prefactor and
    each group is checked relative to its own magnitude.
    """
    t = sol.grid
    targets = {m.n: m for m in sol.target.modes} if sol.target else {}
    out = []
    for mode in sol.modes:
        if len(mode.phase) != len(t):
            raise PreconditionError("grid mismatch between solution and operator")
        expect = tube.oscillation(mode.eta)(t)
        if not np.allclose(expect, mode.oscillation, atol=1e-12 * (1 + np.abs(expect).max())):
            raise PreconditionError(f"mode {mode.n} was not built for this operator")
        p = mode.phase
        dp = spectral_derivative(p)
        cabs = mode._carrier_abs(t)
        G = mode.oscillation
        items = []
        for term in mode.terms:
            arr = (-1j * (dp * term.w + p * term.dw) + G * p * term.w) * cabs
            norm = (np.abs(dp * term.w) + np.abs(p * term.dw) + np.abs(G * p * term.w)) * cabs
            items.append((mode.scale * term.coeff, arr, norm))
        tm = targets.get(mode.n)
        if tm is not None:
            if abs(tm.t_ref - mode.t_ref) > 1e-15 or not np.allclose(tm.phase, p, rtol=1e-13, atol=0):
                raise PreconditionError(f"target mode {mode.n} has a different phase")
            for term in tm.terms:
                items.append((-tm.scale * term.coeff, p * term.w * cabs, np.abs(p * term.w) * cabs))
        rel, absval = 0.0, mpmath.mpf(0)
        for group in _clusters(items):
            ref = group[0][0]
            total = sum(complex(c / ref) * arr for c, arr, _ in group)
            norm = sum(abs(complex(c / ref)) * nm for c, _, nm in group)
            r = float(np.abs(total).max())
            scale = float(norm.max())
            rel = max(rel, r / scale if scale > 0 else r)
            absval = max(absval, abs(ref) * r)
        out.append(ModeResidual(mode.n, rel, absval))
    return ResidualReport(tuple(out))


@dataclass(frozen=True)
class SmoothnessReport:
    label: str
    rate: float | None
    fit_residual: float | None
    log_norms: tuple[float, ...]
    log_sups: tuple[float, ...]

    def to_json(self) -> dict:
        return {
            "label": self.label,
            "rate": self.rate,
            "fit_residual": self.fit_residual,
            "log_norms": list(self.log_norms),
            "log_sups": list(self.log_sups),
        }


def smoothness_diagnostic(sol: FourierSolution | Sequence[tuple[int, object]], max_power: int = 8,
                          fit_tol: float = 0.5) -> SmoothnessReport:
    """Classify coefficient decay against powers of ``|eta|_1``.

    ``rapid-decay``: for every ``k <= max_power`` the weighted sups
    ``sup|coeff_n| * |eta(n)|^k`` strictly decrease over the last two modes
    and end below one. Otherwise a log-log line is fitted; a good fit gives
    ``slow-growth`` with its slope as the rate, a poor one ``indeterminate``.
    """
    if isinstance(sol, FourierSolution):
        t = sol.grid
        data = [(sum(abs(e) for e in m.eta), m.sup_abs(t)) for m in sol.modes]
    else:
        data = [(int(n), mpmath.mpf(v)) for n, v in sol]
    if len(data) < 4:
        raise TooFewPoints("smoothness_diagnostic needs at least 4 modes")
    ln = [float(mpmath.log(mpmath.mpf(n))) for n, _ in data]
    ls = [float(mpmath.log(v)) if v > 0 else -math.inf for _, v in data]
    if all(v == -math.inf for v in ls):
        return SmoothnessReport("rapid-decay", None, None, tuple(ln), tuple(ls))
    rapid = True
    for k in range(1, max_power + 1):
        w = [s + k * x for s, x in zip(ls, ln)]
        if not (w[-2] > w[-1] and w[-1] < 0):
            rapid = False
            break
    if rapid:
        return SmoothnessReport("rapid-decay", None, None, tuple(ln), tuple(ls))
    x, y = np.array(ln), np.array(ls)
    if not np.all(np.isfinite(y)):
        return SmoothnessReport("indeterminate", None, None, tuple(ln), tuple(ls))
    slope, icpt = np.polyfit(x, y, 1)
    rms = float(np.sqrt(np.mean((y - (slope * x + icpt)) ** 2)))
    label = "slow-growth" if rms < fit_tol else "indeterminate"
    return SmoothnessReport(label, float(slope), rms, tuple(ln), tuple(ls))


def modes_csv_rows(f: FourierSolution | None, u: FourierSolution | None) -> list[list[str]]:
    """Rows ``n, eta..., sup_f, sup_u, u_at_tn`` for the plot-ready modes table."""
    base = u or f
    if base is None:
        return []
    t = base.grid
    rows = []
    for i, m in enumerate(base.modes):
        sf = _mp_str(f.modes[i].sup_abs(t)) if f else ""
        su = _mp_str(u.modes[i].sup_abs(t)) if u else ""
        ut = _mp_str(u.modes[i].abs_at_ref()) if u else ""
        rows.append([str(m.n)] + [int_csv(e) for e in m.eta] + [sf, su, ut])
    return rows


def modes_csv_header(N: int) -> list[str]:
    return ["n"] + [f"eta{j + 1}" for j in range(N)] + ["sup_f", "sup_u", "u_at_tn"]
