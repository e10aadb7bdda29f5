import itertools
import math
import random
from fractions import Fraction as F

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hypotor.errors import TooFewPoints
from hypotor.exactnum import ExactComplex, liouville, preset_basis
from hypotor.symbol import (
    LatticePoint,
    OperatorSpec,
    SearchBudget,
    find_witness,
    fit_exponent,
    record_minima,
    scan_shells,
    symbol_eval,
    zero_set_rational,
)


def golden():
    b = preset_basis("sqrt5")
    return (b.rational(1) + b.gen("sqrt5")) * F(1, 2)


def c_exact(x):
    z = x if isinstance(x, ExactComplex) else None
    return (z.re.as_rational(), z.im.as_rational())


def shell_points(N, r):
    """Every lattice point of l1-norm exactly r (independent oracle)."""
    for v in itertools.product(range(-r, r + 1), repeat=N + 1):
        if sum(map(abs, v)) == r:
            yield v


def brute_min(alphas, lam, r):
    """Exact shell minimum of |rho|^2 for rational (re, im) coefficients."""
    best = None
    for v in shell_points(len(alphas), r):
        re = v[0] + sum(a[0] * x for a, x in zip(alphas, v[1:])) - lam[0]
        im = sum(a[1] * x for a, x in zip(alphas, v[1:])) - lam[1]
        m = re * re + im * im
        if best is None or (m, v) < best:
            best = (m, v)
    return best


# -- symbol_eval -----------------------------------------------------------------


def test_symbol_eval_examples():
    s = OperatorSpec.build([F(1, 2)], 0)
    assert c_exact(symbol_eval(s, LatticePoint.of(-1, 2))) == (0, 0)
    s = OperatorSpec.build([F(1, 2), F(1, 3)], F(1, 6))
    assert c_exact(symbol_eval(s, LatticePoint.of(0, 1, -1))) == (0, 0)
    s = OperatorSpec.build([(0, 1), (0, 1)], 0)
    assert c_exact(symbol_eval(s, LatticePoint.of(1, 1, 0))) == (1, 1)


# -- zero sets -------------------------------------------------------------------


def test_zero_set_examples():
    z = zero_set_rational(OperatorSpec.build([F(1, 2), F(1, 3)], F(1, 6)))
    assert z.infinite
    # the base point is a zero and every lattice vector solves 6 tau + 3 xi + 2 eta = 0
    s = OperatorSpec.build([F(1, 2), F(1, 3)], F(1, 6))
    assert c_exact(symbol_eval(s, z.base)) == (0, 0)
    for v in z.lattice:
        assert 6 * v[0] + 3 * v[1] + 2 * v[2] == 0
    assert z.contains(LatticePoint.of(0, 1, -1))

    assert zero_set_rational(OperatorSpec.build([F(1, 2), F(1, 3)], F(1, 12))).empty

    s = OperatorSpec.build([(0, 1), (0, 1)], (2, 3))
    z = zero_set_rational(s)
    assert z.infinite
    for pt in [LatticePoint.of(2, 0, 3), LatticePoint.of(2, 5, -2)]:
        assert z.contains(pt)
    assert not z.contains(LatticePoint.of(1, 0, 3))


@settings(max_examples=30, deadline=None)
@given(
    st.lists(st.fractions(min_value=-3, max_value=3, max_denominator=6), min_size=1, max_size=2),
    st.fractions(min_value=-2, max_value=2, max_denominator=12),
)
def test_zero_set_agrees_with_scan(alphas, lam):
    spec = OperatorSpec.build(alphas, lam)
    z = zero_set_rational(spec)
    recs = scan_shells(spec, 6)
    for rec in recs:
        hit = any(z.contains(LatticePoint(v[0], tuple(v[1:]))) for v in shell_points(len(alphas), rec.r))
        assert rec.is_exact_zero == hit


# -- scans -----------------------------------------------------------------------


def test_scan_half_finds_zero_on_shell_three():
    recs = {r.r: r for r in scan_shells(OperatorSpec.build([F(1, 2)], 0), 4)}
    assert recs[3].is_exact_zero
    assert recs[3].argmin == LatticePoint.of(-1, 2)


def test_scan_golden_follows_fibonacci():
    recs = {r.r: r for r in scan_shells(OperatorSpec.build([golden()], 0), 13)}
    assert recs[13].argmin == LatticePoint.of(-8, 5)
    assert recs[8].argmin == LatticePoint.of(-5, 3)


def test_scan_lines_bounded_below():
    recs = scan_shells(OperatorSpec.build([(0, 1), (0, 1)], F(1, 2)), 12)
    assert all(r.min_modulus_sq.lo >= F(1, 4) for r in recs)
    assert all(r.min_modulus_sq.lo == F(1, 4) for r in recs)


@settings(max_examples=25, deadline=None)
@given(
    st.lists(
        st.tuples(
            st.fractions(min_value=-2, max_value=2, max_denominator=5),
            st.fractions(min_value=-1, max_value=1, max_denominator=3),
        ),
        min_size=1,
        max_size=2,
    ),
    st.tuples(st.fractions(min_value=-1, max_value=1, max_denominator=7), st.fractions(-1, 1, max_denominator=4)),
)
def test_scan_matches_exhaustive_enumeration(alphas, lam):
    spec = OperatorSpec.build(alphas, lam)
    for rec in scan_shells(spec, 5):
        m, v = brute_min(alphas, lam, rec.r)
        assert rec.min_modulus_sq.lo == rec.min_modulus_sq.hi == m
        assert (rec.argmin.tau,) + rec.argmin.xi == v


def test_scan_irrational_encloses_brute_force():
    s2 = preset_basis("sqrt2").gen("sqrt2")
    spec = OperatorSpec.build([s2, F(1, 3)], F(1, 5))
    x = math.sqrt(2)
    for rec in scan_shells(spec, 7):
        best = min(
            (v[0] + x * v[1] + v[2] / 3 - 0.2) ** 2 for v in shell_points(2, rec.r)
        )
        assert float(rec.min_modulus_sq.lo) - 1e-12 <= best <= float(rec.min_modulus_sq.hi) + 1e-12


def test_parallel_scan_is_identical():
    spec = OperatorSpec.build([golden(), F(1, 3)], 0)
    a = scan_shells(spec, 40)
    b = scan_shells(spec, 40, workers=3)
    assert [r.csv_row() for r in a] == [r.csv_row() for r in b]


def test_rational_alpha_bound_below_by_distance():
    # alpha = p/q, lambda not in q^-1 Z: every minimum >= dist(q lambda, Z)/q
    for p, q, lam in [(1, 3, F(1, 7)), (2, 5, F(3, 11)), (-3, 4, F(1, 9))]:
        d = min(q * lam - math.floor(q * lam), math.ceil(q * lam) - q * lam) / q
        recs = scan_shells(OperatorSpec.build([F(p, q)], lam), 30)
        assert all(r.min_modulus_sq.lo >= d * d for r in recs)


# -- shift invariance --------------------------------------------------------------


def _shifted(spec, m, n):
    lam = spec.lam
    b = spec.basis
    lam = ExactComplex(lam.re + b.rational(m), lam.im)
    for a, k in zip(spec.alphas, n):
        lam = lam + a * b.rational(k)
    return spec.with_lambda(lam)


def test_shift_invariance_with_irrationals():
    # lambda' = lambda + m + sum n_j alpha_j moves the zero set by (m, n)
    rng = random.Random(5)
    b = preset_basis("sqrt2,sqrt3")
    spec = OperatorSpec.build([(b.gen("sqrt2"), b.gen("sqrt3")), (F(1, 3), 1)], (F(1, 2), 0), basis=b)
    for _ in range(30):
        m, n = rng.randint(-3, 3), [rng.randint(-3, 3) for _ in range(2)]
        sh = _shifted(spec, m, n)
        pt = LatticePoint.of(rng.randint(-20, 20), rng.randint(-20, 20), rng.randint(-20, 20))
        moved = LatticePoint(pt.tau + m, tuple(x + k for x, k in zip(pt.xi, n)))
        assert symbol_eval(sh, moved) == symbol_eval(spec, pt)


# -- witnesses ---------------------------------------------------------------------


def test_liouville_witnesses():
    spec = OperatorSpec.build([liouville(10, 4)], 0)
    w1 = find_witness(spec, 1, SearchBudget(10))
    assert w1.point == LatticePoint.of(-11, 100)
    assert w1.verify(spec)
    # independent oracle: |100 L - 11| from the partial sum plus tail, below 1/111
    tail_hi = F(2, 10**24)
    val = 100 * F(110001000000000000000000, 10**24) - 11
    assert 0 < val and (val + 100 * tail_hi) ** 2 < F(1, 111**2)
    w2 = find_witness(spec, 2, SearchBudget(10))
    assert w2.point == LatticePoint.of(-110001, 10**6)
    assert w2.verify(spec)
    assert w2.rhs_sq == F(1, (110001 + 10**6) ** 4)


def test_golden_has_no_small_witness():
    spec = OperatorSpec.build([golden()], 0)
    assert find_witness(spec, 1, SearchBudget(2000)) is None


def test_witness_certificate_serializes():
    spec = OperatorSpec.build([liouville(10, 4)], 0)
    w = find_witness(spec, 1, SearchBudget(10))
    js = w.to_json()
    assert js["j"] == 1 and (js["tau"], js["xi"]) == (-11, [100])
    assert F(js["lhs_sq_upper"]) < F(js["rhs_sq"])


# -- fits --------------------------------------------------------------------------


def test_fit_golden_exponent_near_one():
    fit = fit_exponent(scan_shells(OperatorSpec.build([golden()], 0), 10**4))
    assert 0.9 <= fit.M_hat <= 1.1


def test_fit_bounded_below_has_zero_exponent():
    fit = fit_exponent(scan_shells(OperatorSpec.build([F(1, 2)], F(1, 4)), 200))
    assert abs(fit.M_hat) < 1e-9


def test_fit_rejects_only_zeros():
    recs = scan_shells(OperatorSpec.build([F(1, 2)], 0), 20)
    with pytest.raises(TooFewPoints):
        fit_exponent([r for r in recs if r.is_exact_zero])


def test_record_minima_non_increasing():
    recs = scan_shells(OperatorSpec.build([golden(), F(1, 7)], F(1, 3)), 60)
    vals = [v for _, v in record_minima(recs)]
    assert all(a >= b for a, b in zip(vals, vals[1:]))
