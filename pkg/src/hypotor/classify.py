"""Structure of the exceptional sets of ``D_t + sum_j alpha_j D_{x_j} - lambda``.

``M_N`` collects complex constants ``lambda`` for which the perturbed operator
fails to be globally hypoelliptic, ``N_N`` the real ones. Everything here is
decided from exact basis coordinates; when a verdict hinges on a Diophantine
fact the number representation cannot certify, the answer is ``Undetermined``
and names the missing fact.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product
from math import gcd, prod
from typing import NamedTuple, Sequence

from .errors import PreconditionError
from .exactnum import (
    LIOUVILLE,
    NON_LIOUVILLE_TAGS,
    RATIONAL,
    ExactComplex,
    ExactReal,
    SqrtSymbol,
    certified_sign,
    diophantine_tag,
)
from .linalg import egcd, integer_row, rational_nullspace, solve_integer_system
from .symbol import OperatorSpec, SearchBudget, _to_complex, find_witness

SCHEMA = "hypotor-report/1"


def _frac(q: Fraction) -> str:
    return str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"


def _rational_ratio(x: ExactReal, y: ExactReal) -> Fraction | None:
    """``x / y`` when it is rational (parallel coordinate vectors), else None."""
    if y.is_zero():
        raise PreconditionError("ratio with zero denominator")
    mono, c = next(iter(y.terms.items()))
    r = x.coeff(mono) / c
    return r if x == y * r else None


def _abs(x: ExactReal) -> ExactReal:
    return -x if certified_sign(x) < 0 else x


# -- profile -------------------------------------------------------------------


@dataclass(frozen=True)
class CoefficientProfile:
    re_rational: tuple[bool, ...]
    im_rational: tuple[bool, ...]
    is_real: tuple[bool, ...]
    nonreal_indices: tuple[int, ...]
    re_tags: tuple[str, ...]
    # (n, k, Im alpha_n / Im alpha_k) for the first two nonreal indices when rational
    im_ratio: tuple[int, int, Fraction] | None
    im_ratio_tag: str | None

    @property
    def all_real(self) -> bool:
        return all(self.is_real)

    def to_json(self) -> dict:
        return {
            "re_rational": list(self.re_rational),
            "im_rational": list(self.im_rational),
            "is_real": list(self.is_real),
            "nonreal_indices": list(self.nonreal_indices),
            "re_tags": list(self.re_tags),
            "im_ratio": None
            if self.im_ratio is None
            else {"n": self.im_ratio[0], "k": self.im_ratio[1], "value": _frac(self.im_ratio[2])},
            "im_ratio_tag": self.im_ratio_tag,
        }


def profile_coefficients(spec: OperatorSpec) -> CoefficientProfile:
    """Exact rationality and reality flags plus the imaginary-part ratio.

    For two or more nonreal coefficients the ratio compares the first nonreal
    index ``n`` against the second ``k``; with ``N = 2`` this is
    ``Im alpha_1 / Im alpha_2``.
    """
    alphas = spec.alphas
    nonreal = tuple(j for j, a in enumerate(alphas) if not a.im.is_zero())
    ratio = tag = None
    if len(nonreal) >= 2:
        n, k = nonreal[0], nonreal[1]
        r = _rational_ratio(alphas[n].im, alphas[k].im)
        if r is not None:
            ratio, tag = (n, k, r), RATIONAL
        else:
            q = alphas[k].im.inverse() if _invertible(alphas[k].im) else None
            tag = diophantine_tag(alphas[n].im * q) if q is not None else "unknown"
    return CoefficientProfile(
        tuple(a.re.is_rational for a in alphas),
        tuple(a.im.is_rational for a in alphas),
        tuple(a.im.is_zero() for a in alphas),
        nonreal,
        tuple(diophantine_tag(a.re) for a in alphas),
        ratio,
        tag,
    )


def _invertible(x: ExactReal) -> bool:
    try:
        x.inverse()
    except PreconditionError:
        return False
    return True


# -- rational lattice ----------------------------------------------------------


def lattice_step_rational(spec: OperatorSpec | Sequence) -> Fraction:
    """Generator ``d/Q`` of ``Z + alpha_1 Z + ... + alpha_N Z`` for real rational alphas.

    ``Q = q_1...q_N`` and ``d = gcd(Q, p_1 Q_1, ..., p_N Q_N)`` with ``Q_j = Q/q_j``.
    """
    if isinstance(spec, OperatorSpec):
        if not all(a.im.is_zero() and a.re.is_rational for a in spec.alphas):
            raise PreconditionError("lattice_step_rational needs real rational coefficients")
        values = [a.re.as_rational() for a in spec.alphas]
    else:
        values = [Fraction(v) for v in spec]
    Q = prod(v.denominator for v in values)
    d = Q
    for v in values:
        d = gcd(d, v.numerator * (Q // v.denominator))
    return Fraction(d, Q)


def lattice_gap_sq(spec: OperatorSpec) -> Fraction:
    """Lower bound for ``|rho|^2`` at every lattice point, all-real rational coefficients.

    ``Re rho`` runs through ``step*Z - Re lambda`` so the bound is the squared
    distance of ``Re lambda`` to ``step*Z`` plus ``(Im lambda)^2``.
    """
    step = lattice_step_rational(spec)
    lr, li = spec.lam.re.as_rational(), spec.lam.im.as_rational()
    if lr is None or li is None:
        raise PreconditionError("lattice_gap_sq needs a rational perturbation")
    t = lr / step
    dist = min(t - (t.numerator // t.denominator), (t.numerator // t.denominator) + 1 - t) * step
    return dist * dist + li * li


# -- Kronecker density ---------------------------------------------------------


@dataclass(frozen=True)
class DensityCertificate:
    """Outcome of the rational-solution test for density of ``Z + sum alpha_j Z`` in C.

    ``r`` is None when the solution space is trivial (dense). Otherwise
    ``a_1j r_1 + a_2j r_2 = s_j Im alpha_k`` holds for the rational ``s``.
    """

    k: int
    columns: tuple[int, ...]
    A: tuple[tuple[ExactReal, ...], tuple[ExactReal, ...]]
    r: tuple[Fraction, Fraction] | None
    s: tuple[Fraction, ...] | None

    @property
    def dense(self) -> bool:
        return self.r is None

    def verify(self, spec: OperatorSpec) -> bool:
        fresh = _density_matrix(spec, self.k)
        if fresh != self.A:
            return False
        if self.r is None:
            return _solution_space(spec, self.k) == []
        if self.r == (0, 0):
            return False
        imk = spec.alphas[self.k].im
        return all(
            (a1 * self.r[0] + a2 * self.r[1] - imk * s).is_zero()
            for a1, a2, s in zip(self.A[0], self.A[1], self.s)
        )

    def to_json(self) -> dict:
        return {
            "k": self.k,
            "columns": list(self.columns),
            "A": [[e.to_json() for e in row] for row in self.A],
            "outcome": "trivial-solution-space" if self.r is None else "nontrivial",
            "r": None if self.r is None else [_frac(x) for x in self.r],
            "s": None if self.s is None else [_frac(x) for x in self.s],
        }


def _density_matrix(spec: OperatorSpec, k: int):
    ak = spec.alphas[k]
    cols = [j for j in range(spec.N) if j != k]
    row1 = tuple(spec.alphas[j].re * ak.im - ak.re * spec.alphas[j].im for j in cols)
    row2 = tuple(spec.alphas[j].im for j in cols)
    return (row1, row2)


def _solution_space(spec: OperatorSpec, k: int) -> list[list[Fraction]]:
    # unknowns (r1, r2, s_1..s_{N-1}); one equation per monomial per column
    row1, row2 = _density_matrix(spec, k)
    imk = spec.alphas[k].im
    m = len(row1)
    eqs = []
    for j in range(m):
        monos = sorted(set(row1[j].terms) | set(row2[j].terms) | set(imk.terms))
        for mono in monos:
            eq = [row1[j].coeff(mono), row2[j].coeff(mono)] + [Fraction(0)] * m
            eq[2 + j] = -imk.coeff(mono)
            eqs.append(eq)
    return rational_nullspace(eqs, 2 + m) if eqs else [[Fraction(int(i == c)) for c in range(2 + m)] for i in range(2 + m)]


def kronecker_density_test(spec: OperatorSpec, k: int) -> DensityCertificate:
    """Decide density in C of ``Z + alpha_1 Z + ... + alpha_N Z`` using index ``k``.

    Dense iff no nonzero rational ``r`` makes ``Im alpha_k^{-1} A^T r``
    rational. The condition is solved with ``s = Im alpha_k^{-1} A^T r`` as
    extra rational unknowns, which avoids inverting ``Im alpha_k``.
    """
    if not 0 <= k < spec.N:
        raise PreconditionError(f"index {k} out of range")
    if spec.alphas[k].im.is_zero():
        raise PreconditionError(f"Im alpha_{k + 1} is zero")
    A = _density_matrix(spec, k)
    cols = tuple(j for j in range(spec.N) if j != k)
    space = _solution_space(spec, k)
    if not space:
        return DensityCertificate(k, cols, A, None, None)
    # prefer the simplest certificate: fewest nonzero r-entries, then smallest height
    def weight(v):
        return (sum(1 for x in v[:2] if x), max(abs(x.numerator) + x.denominator for x in v[:2]), v[0] != 0)

    v = min((u for u in space if any(u[:2])), key=weight)
    return DensityCertificate(k, cols, A, (v[0], v[1]), tuple(v[2:]))


# -- lattice membership --------------------------------------------------------


def lambda_lattice_membership(spec: OperatorSpec, bound: int) -> tuple[int, ...] | None:
    """Integers ``(m, n_1..n_N)`` with ``lambda = m + sum n_j alpha_j`` and all ``|.| <= bound``.

    The exact integer solution set is computed first; among small lattice
    shifts the representative with least ℓ¹ norm (then lexicographically
    least) is returned.
    """
    N = spec.N
    parts = [(spec.basis.rational(1), spec.basis.rational(0))] + [(a.re, a.im) for a in spec.alphas]
    rows, rhs = [], []
    for which in (0, 1):
        target = spec.lam.re if which == 0 else spec.lam.im
        monos = sorted(set(target.terms).union(*(p[which].terms for p in parts)))
        for mono in monos:
            row = integer_row([p[which].coeff(mono) for p in parts] + [target.coeff(mono)])
            rows.append(row[:-1])
            rhs.append(row[-1])
    if not rows:
        return tuple([0] * (N + 1)) if bound >= 0 else None
    sol = solve_integer_system(rows, rhs)
    if sol is None:
        return None
    base, kernel = sol
    if not kernel:
        return tuple(base) if max(abs(x) for x in base) <= bound else None
    best = None
    reach = min(bound, 6) if len(kernel) > 2 else min(bound, 40)
    for cs in product(range(-reach, reach + 1), repeat=len(kernel)):
        v = [b + sum(c * kv[i] for c, kv in zip(cs, kernel)) for i, b in enumerate(base)]
        if max(abs(x) for x in v) > bound:
            continue
        key = (sum(abs(x) for x in v), v)
        if best is None or key < best:
            best = key
    return tuple(best[1]) if best else None


# -- line families and maps ----------------------------------------------------


@dataclass(frozen=True)
class LineFamily:
    """Horizontal lines ``Im z = m * spacing``, ``m`` in Z."""

    name: str
    spacing: ExactReal
    description: str
    kind: str = "horizontal-in-C"

    def to_json(self) -> dict:
        return {"kind": self.kind, "name": self.name, "spacing": self.spacing.to_json(), "description": self.description}


def line_structure(spec: OperatorSpec) -> LineFamily | None:
    """Carrier lines of ``M_N`` when the imaginary parts force them, else None."""
    prof = profile_coefficients(spec)
    nr = prof.nonreal_indices
    if len(nr) == 1:
        k = nr[0]
        return LineFamily("t", _abs(spec.alphas[k].im), f"t_m: Im z = m*Im(alpha_{k + 1})")
    if len(nr) == 2 and prof.im_ratio is not None:
        n, k, r = prof.im_ratio
        return LineFamily(
            "ell", _abs(spec.alphas[k].im) / r.denominator, f"ell_m: Im z = m*Im(alpha_{k + 1})/{r.denominator}"
        )
    return None


def _on_line(z: ExactComplex, height: ExactReal, m: int):
    if not (z.im - height).is_zero():
        raise PreconditionError(f"point {z} is not on line m={m}")


def theta_map(m: int, z, spec: OperatorSpec, printed: bool = False) -> ExactReal:
    """Map ``t_m -> R`` carrying ``M_N`` on the line onto ``N_N`` of the reduced operator.

    With one nonreal coefficient ``alpha_k``, on ``Im z = m Im alpha_k`` the
    symbol vanishes only when ``xi_k = m``; its real part then reads
    ``tau + sum_{j != k} alpha_j xi_j - (x - m Re alpha_k)``. The map is
    ``m Re alpha_k - x``. ``printed=True`` uses ``m Re alpha_k / Im alpha_k - x``
    instead, kept only for comparison.
    """
    z = _to_complex(z, spec.basis)
    nr = profile_coefficients(spec).nonreal_indices
    if len(nr) != 1:
        raise PreconditionError("theta_map needs exactly one nonreal coefficient")
    ak = spec.alphas[nr[0]]
    _on_line(z, ak.im * m, m)
    if printed:
        return ak.re * ak.im.inverse() * m - z.re
    return ak.re * m - z.re


class PsiValue(NamedTuple):
    value: ExactReal
    base: tuple[int, int]


def psi_base_solution(m: int, p: int, q: int) -> tuple[int, int]:
    """Solution of ``p*xi + q*eta = m`` with least ``|xi|``, ties to ``xi >= 0``."""
    g, x, _ = egcd(p, q)
    if g != 1:
        raise PreconditionError("p and q must be coprime")
    xi0 = (x * m) % q
    xi = min((xi0, xi0 - q), key=lambda v: (abs(v), v < 0))
    eta = (m - p * xi) // q
    return xi, eta


def psi_map(m: int, z, spec: OperatorSpec) -> PsiValue:
    """Isometry ``ell_m -> R``: ``x + i m Im alpha_k / q  |->  x - Re alpha_n xi_m - Re alpha_k eta_m``.

    ``Im alpha_n / Im alpha_k = p/q`` and ``(xi_m, eta_m)`` is the canonical
    solution of ``p xi + q eta = m``.
    """
    z = _to_complex(z, spec.basis)
    prof = profile_coefficients(spec)
    if prof.im_ratio is None or len(prof.nonreal_indices) != 2:
        raise PreconditionError("psi_map needs two nonreal coefficients with rational Im ratio")
    n, k, r = prof.im_ratio
    p, q = r.numerator, r.denominator
    _on_line(z, spec.alphas[k].im * m / q, m)
    xi, eta = psi_base_solution(m, p, q)
    return PsiValue(z.re - spec.alphas[n].re * xi - spec.alphas[k].re * eta, (xi, eta))


def resonant_combination(spec: OperatorSpec) -> ExactReal:
    """``q Re alpha_n - p Re alpha_k``: the real symbol along ``(xi_n, xi_k) = (q, -p)``."""
    prof = profile_coefficients(spec)
    if prof.im_ratio is None:
        raise PreconditionError("needs a rational Im ratio")
    n, k, r = prof.im_ratio
    return spec.alphas[n].re * r.denominator - spec.alphas[k].re * r.numerator


# -- classification ------------------------------------------------------------


@dataclass(frozen=True)
class Structure:
    kind: str
    step: Fraction | None = None
    carrier: LineFamily | str | None = None
    reason: str | None = None

    def to_json(self) -> dict:
        out: dict = {"kind": self.kind}
        if self.step is not None:
            out["step"] = _frac(self.step)
        if isinstance(self.carrier, LineFamily):
            out["family"] = self.carrier.to_json()
        elif self.carrier is not None:
            out["carrier"] = self.carrier
        if self.reason is not None:
            out["reason"] = self.reason
        return out


EMPTY = Structure("EmptySet")
DENSE_REAL = Structure("DenseGdeltaReal")
DENSE_COMPLEX = Structure("DenseGdeltaComplex")


def undetermined(reason: str) -> Structure:
    return Structure("Undetermined", reason=reason)


@dataclass(frozen=True)
class GHStatus:
    kind: str
    reason: str | None = None
    certificates: tuple = ()

    def to_json(self) -> dict:
        out: dict = {"kind": self.kind}
        if self.reason:
            out["reason"] = self.reason
        if self.certificates:
            out["certificates"] = [c.to_json() if hasattr(c, "to_json") else c for c in self.certificates]
        return out


@dataclass(frozen=True)
class ClassificationReport:
    case: str
    mn_structure: Structure
    nn_structure: Structure
    base_gh: GHStatus
    profile: CoefficientProfile
    certificates: tuple = field(default=())

    def to_json(self) -> dict:
        certs = []
        for c in self.certificates:
            certs.append(c.to_json() if hasattr(c, "to_json") else c)
        return {
            "schema": SCHEMA,
            "case": self.case,
            "mn_structure": self.mn_structure.to_json(),
            "nn_structure": self.nn_structure.to_json(),
            "base_gh": self.base_gh.to_json(),
            "profile": self.profile.to_json(),
            "certificates": certs,
        }


def _real_structure(coeffs: Sequence[ExactReal]) -> tuple[Structure, list]:
    """``N`` for ``D_t + sum c_j D_{x_j} - gamma`` with real coefficients."""
    if not coeffs:
        return Structure("DiscreteLattice", Fraction(1), "RealAxis"), [{"gcd_step": "1", "values": []}]
    vals = [c.as_rational() for c in coeffs]
    if all(v is not None for v in vals):
        step = lattice_step_rational(vals)
        Q = prod(v.denominator for v in vals)
        return Structure("DiscreteLattice", step, "RealAxis"), [
            {"gcd_step": _frac(step), "Q": Q, "values": [_frac(v) for v in vals]}
        ]
    irr = [j for j, v in enumerate(vals) if v is None]
    return DENSE_REAL, [{"irrational_coefficient_indices": irr}]


def _lines_structure(family: LineFamily, trace: Structure) -> Structure:
    if trace.kind == "DiscreteLattice":
        return Structure("LinesWithDiscreteTrace", trace.step, family)
    return Structure("LinesWithDenseTrace", None, family)


def classify_MN(spec: OperatorSpec, gh_budget: SearchBudget | None = None) -> ClassificationReport:
    """Decide the structure of ``M_N`` and ``N_N`` from the coefficient profile."""
    prof = profile_coefficients(spec)
    gh = base_gh_status(spec, gh_budget)
    alphas = spec.alphas
    nr = prof.nonreal_indices

    if spec.N == 1:
        a = alphas[0]
        if nr:
            return ClassificationReport("N=1 nonreal", EMPTY, EMPTY, gh, prof, ({"im_alpha": a.im.to_json()},))
        s, certs = _real_structure([a.re])
        return ClassificationReport("N=1 real", s, s, gh, prof, tuple(certs))

    if not nr:
        s, certs = _real_structure([a.re for a in alphas])
        case = "all real rational" if s.kind == "DiscreteLattice" else "all real, some irrational"
        return ClassificationReport(case, s, s, gh, prof, tuple(certs))

    if len(nr) == 1:
        k = nr[0]
        family = line_structure(spec)
        trace, certs = _real_structure([alphas[j].re for j in range(spec.N) if j != k])
        return ClassificationReport(
            "one nonreal", _lines_structure(family, trace), trace, gh, prof, tuple(certs) + ({"k": k},)
        )

    if len(nr) == 2 and prof.im_ratio is not None:
        n, k, r = prof.im_ratio
        gamma = resonant_combination(spec)
        others = [alphas[j].re for j in range(spec.N) if j not in (n, k)]
        trace, certs = _real_structure([gamma] + others)
        family = line_structure(spec)
        info = {"n": n, "k": k, "p": r.numerator, "q": r.denominator, "resonant_combination": gamma.to_json()}
        return ClassificationReport(
            "two nonreal, rational Im ratio", _lines_structure(family, trace), trace, gh, prof, tuple(certs) + (info,)
        )

    cert = kronecker_density_test(spec, nr[0])
    if cert.dense:
        nn = _nn_when_dense(spec, prof)
        return ClassificationReport("Kronecker dense", DENSE_COMPLEX, nn, gh, prof, (cert,))
    reason = (
        "Kronecker condition fails: M_N lies on parallel lines that may accumulate; "
        "exact structure not characterized"
    )
    return ClassificationReport(
        "Kronecker not dense", undetermined(reason), _nn_when_dense(spec, prof), gh, prof, (cert,)
    )


def _nn_when_dense(spec: OperatorSpec, prof: CoefficientProfile) -> Structure:
    if spec.N == 2 and prof.im_ratio_tag in NON_LIOUVILLE_TAGS:
        return EMPTY
    return undetermined(f"N_N depends on whether Im(alpha_1)/Im(alpha_2) is Liouville (tag: {prof.im_ratio_tag})")


# -- base operator -------------------------------------------------------------


def _algebraic(x: ExactReal) -> bool:
    return all(isinstance(x.basis[n], SqrtSymbol) for n in x.symbol_names())


def _real_gh(coeffs: Sequence[ExactReal], budget: SearchBudget | None, label: str) -> GHStatus:
    """GH status of ``D_t + sum c_j D_{x_j}`` with real coefficients (and lambda = 0)."""
    if not coeffs:
        return GHStatus("NotGH", f"{label}: D_t alone has the zero family (0, xi)")
    for j, c in enumerate(coeffs):
        if c.is_rational:
            return GHStatus("NotGH", f"{label}: coefficient {j + 1} is rational {c}")
    # integer relation among 1, c_1..c_N gives a lattice of exact zeros
    monos = sorted(set().union(*(c.terms for c in coeffs)) | {()})
    eqs = [[Fraction(int(mono == ()))] + [c.coeff(mono) for c in coeffs] for mono in monos]
    rel = rational_nullspace(eqs, 1 + len(coeffs))
    if rel:
        v = integer_row(rel[0])
        return GHStatus("NotGH", f"{label}: integer relation {v} among 1 and the coefficients")
    if all(_algebraic(c) for c in coeffs):
        return GHStatus("GH", f"{label}: 1 and the algebraic coefficients are rationally independent")
    if len(coeffs) == 1:
        tag = diophantine_tag(coeffs[0])
        if tag in NON_LIOUVILLE_TAGS:
            return GHStatus("GH", f"{label}: coefficient is {tag}")
        if tag == LIOUVILLE and budget is not None:
            spec1 = OperatorSpec.build([coeffs[0]], 0)
            certs = []
            for j in (1, 2, 3):
                w = find_witness(spec1, j, budget)
                if w is None:
                    return GHStatus("Undetermined", f"{label}: no certified witness for j={j} within budget")
                certs.append(w)
            return GHStatus("NotGH", f"{label}: certified small-divisor witnesses j=1..3", tuple(certs))
        return GHStatus("Undetermined", f"{label}: Liouville status of {coeffs[0]} unknown (tag {tag})")
    return GHStatus("Undetermined", f"{label}: simultaneous Diophantine type of the real coefficients unknown")


def base_gh_status(spec: OperatorSpec, budget: SearchBudget | None = None) -> GHStatus:
    """Global hypoellipticity of the unperturbed operator ``lambda = 0``."""
    spec0 = spec.with_lambda(0)
    alphas = spec0.alphas
    for j, a in enumerate(alphas):
        if a.im.is_zero() and a.re.is_rational:
            return GHStatus("NotGH", f"alpha_{j + 1} is real rational")
    prof = profile_coefficients(spec0)
    nr = prof.nonreal_indices
    if not nr:
        return _real_gh([a.re for a in alphas], budget, "all real")
    if len(nr) == 1:
        # |Im rho| >= |Im alpha_k| unless xi_k = 0
        rest = [alphas[j].re for j in range(spec.N) if j != nr[0]]
        if not rest:
            return GHStatus("GH", "single nonreal coefficient")
        return _real_gh(rest, budget, "reduced to the real coefficients")
    if len(nr) == 2 and prof.im_ratio is not None:
        n, k, _ = prof.im_ratio
        rest = [resonant_combination(spec0)] + [alphas[j].re for j in range(spec.N) if j not in (n, k)]
        return _real_gh(rest, budget, "reduced along the resonant direction")
    if spec.N == 2 and prof.im_ratio_tag in NON_LIOUVILLE_TAGS:
        return GHStatus("GH", f"Im(alpha_1)/Im(alpha_2) is irrational and {prof.im_ratio_tag}")
    return GHStatus("Undetermined", f"Diophantine type of the imaginary parts unknown (tag {prof.im_ratio_tag})")
