import math
import random
from fractions import Fraction as F

import mpmath
import numpy as np
import pytest

from hypotor.construct import (
    BumpSpec,
    TrigPoly,
    TubeOperatorSpec,
    apply_operator,
    averages,
    build_homogeneous_singular,
    build_pair,
    bump_mass,
    find_eta_sequence,
    kronecker_approximate,
    kronecker_frame,
    liouville_tube,
    make_grid,
    resonant_tube,
    smoothness_diagnostic,
    spectral_derivative,
)
from hypotor.errors import NoneWithinBudget, PreconditionError
from hypotor.exactnum import ExactComplex, liouville, preset_basis
from hypotor.symbol import SearchBudget

BUDGET = SearchBudget(0, 32)


def dense_alphas():
    b = preset_basis("sqrt2,sqrt3")
    return (ExactComplex(b.gen("sqrt2"), b.gen("sqrt3")), ExactComplex(b.rational(1), b.rational(1)))


def golden():
    b = preset_basis("sqrt5")
    return (b.rational(1) + b.gen("sqrt5")) * F(1, 2)


@pytest.fixture(scope="module")
def resonant():
    tube = resonant_tube()
    seq = find_eta_sequence(tube, 8, BUDGET)
    return tube, seq, build_homogeneous_singular(tube, seq, 256)


@pytest.fixture(scope="module")
def liouville_pair():
    tube = liouville_tube()
    seq = find_eta_sequence(tube, 8, BUDGET)
    f, u, tns = build_pair(tube, seq, BumpSpec(), 256)
    return tube, seq, f, u, tns


# -- Kronecker approximation -------------------------------------------------------


def test_approximate_trivial_targets():
    al = dense_alphas()
    b = al[0].basis
    hit = kronecker_approximate(al, ExactComplex(b.rational(0)), F(1, 100), 5)
    assert (hit.ell, hit.m, hit.n) == (0, (0,), 0) and hit.dist_sq_upper == 0
    hit = kronecker_approximate(al, al[0], F(1, 100), 5)
    assert (hit.ell, hit.m, hit.n) == (0, (1,), 0) and hit.dist_sq_upper == 0


def test_approximate_regression_fixture():
    al = dense_alphas()
    b = al[0].basis
    z = ExactComplex(b.rational(F(1, 2)), b.rational(F(1, 4)))
    hit = kronecker_approximate(al, z, F(1, 10), 50)
    assert (hit.ell, hit.m, hit.n) == (0, (-1,), 2)
    # independent recomputation in high precision
    with mpmath.workdps(50):
        s2, s3 = mpmath.sqrt(2), mpmath.sqrt(3)
        w = -(s2 + 1j * s3) + 2 * (1 + 1j)
        assert abs(w - (0.5 + 0.25j)) < 0.1


def test_approximate_soundness_random_targets():
    al = dense_alphas()
    b = al[0].basis
    rng = random.Random(3)
    for _ in range(10):
        zr, zi = F(rng.randint(0, 20), 20), F(rng.randint(0, 20), 20)
        hit = kronecker_approximate(al, ExactComplex(b.rational(zr), b.rational(zi)), F(1, 20), 10**4)
        assert hit is not None
        ell, m, n = hit.ell, hit.m[0], hit.n
        with mpmath.workdps(40):
            w = ell + m * (mpmath.sqrt(2) + 1j * mpmath.sqrt(3)) + n * (1 + 1j)
            assert abs(w - mpmath.mpc(zr.numerator / zr.denominator, zi.numerator / zi.denominator)) < 0.05


def test_frame_identity():
    al = dense_alphas()
    fr = kronecker_frame(al)
    rng = random.Random(1)
    for _ in range(25):
        ell, m, n = rng.randint(-30, 30), (rng.randint(-30, 30),), rng.randint(-30, 30)
        x, y = fr.coordinates(ell, m, n)
        direct = al[0] * al[0].basis.rational(m[0]) + al[1] * al[0].basis.rational(n)
        direct = ExactComplex(direct.re + al[0].basis.rational(ell), direct.im)
        assert fr.from_coordinates(x, y) == direct
        assert x == al[0].basis.rational(ell) + fr.T1[0] * m[0]
        assert y == al[0].basis.rational(n) + fr.T2[0] * m[0]


# -- averages and sequences ----------------------------------------------------------


def test_averages_examples():
    t = TubeOperatorSpec((TrigPoly.of({0: F(1, 2), 1: F(3, 2), -1: F(3, 2)}),), TrigPoly.of({1: (0, F(-1, 2)), -1: (0, F(1, 2))}))
    c10, lam0 = averages(t)
    assert c10.re.as_rational() == F(1, 2) and c10.im.as_rational() == 0
    assert lam0.is_zero()
    L = liouville(10, 4)
    t = TubeOperatorSpec((TrigPoly.of({0: L, 1: 1}),), TrigPoly.of({}))
    assert averages(t)[0] == ExactComplex(L)


def test_resonant_sequence_is_exact(resonant):
    _, seq, _ = resonant
    assert seq.exact and seq.strictly_increasing
    assert [e.eta for e in seq.entries] == [(2 * n + 1,) for n in range(1, 9)]
    assert all(e.bound == 0 for e in seq.entries)


def test_liouville_sequence_bounds(liouville_pair):
    _, seq, *_ = liouville_pair
    assert seq.strictly_increasing and not seq.exact
    assert seq.entries[0].eta == (100,)
    for e in seq.entries:
        assert e.bound < e.threshold
        assert abs(e.eta[0]) > e.n


def test_liouville_eta_one_oracle():
    tube = liouville_tube()
    seq = find_eta_sequence(tube, 1, BUDGET)
    e = seq.entries[0]
    # |1 - exp(-2 pi i 100 L)| <= 2 pi (100 L - 11) with 100 L - 11 = 1.0001e-4 + tiny
    with mpmath.workdps(40):
        frac = mpmath.mpf(100) * (mpmath.mpf(1) / 10 + mpmath.mpf(1) / 100 + mpmath.mpf(10) ** -6 + mpmath.mpf(10) ** -24) - 11
        direct = abs(1 - mpmath.exp(-2j * mpmath.pi * frac))
        assert direct <= e.bound < mpmath.mpf(1) / 100


def test_golden_average_has_no_sequence():
    tube = TubeOperatorSpec((TrigPoly.of({0: golden()}),), TrigPoly.of({}))
    with pytest.raises(NoneWithinBudget) as info:
        find_eta_sequence(tube, 3, SearchBudget(0, 40))
    assert info.value.partial is not None


# -- homogeneous branch ----------------------------------------------------------------


def test_mu_normalized_at_tn(resonant):
    tube, seq, mu = resonant
    t = mu.grid
    assert all(abs(tn - math.pi) < 1e-9 for tn in mu.t_n)
    for m in mu.modes:
        assert abs(float(m.sup_abs(t)) - 1) < 1e-12
        assert abs(float(m.abs_at_ref()) - 1) < 1e-12


def test_mu_scale_is_exp_minus_two_xi(resonant):
    _, seq, mu = resonant
    for e, m in zip(seq.entries, mu.modes):
        assert mpmath.almosteq(abs(m.scale), mpmath.exp(-2 * e.eta[0]), rel_eps=1e-12)


def test_mu_residual(resonant):
    tube, _, mu = resonant
    rep = apply_operator(tube, mu)
    assert rep.max_relative <= 1e-10


def test_branches_are_exclusive(resonant, liouville_pair):
    tube, seq, _ = resonant
    with pytest.raises(PreconditionError):
        build_pair(tube, seq)
    ltube, lseq, *_ = liouville_pair
    with pytest.raises(PreconditionError):
        build_homogeneous_singular(ltube, lseq)


# -- pair branch -------------------------------------------------------------------------


def test_pair_bounds(liouville_pair):
    tube, seq, f, u, tns = liouville_pair
    mass = bump_mass(BumpSpec(), tns[-1])
    assert mass > 0
    t = f.grid
    for e, fm, um in zip(seq.entries, f.modes, u.modes):
        assert fm.sup_abs(t) <= abs(fm.scale) <= e.threshold
        assert um.abs_at_ref() >= mass / 2


def test_pair_residual(liouville_pair):
    tube, _, _, u, _ = liouville_pair
    assert apply_operator(tube, u).max_relative <= 1e-8


def test_smoothness_labels(liouville_pair):
    _, _, f, u, _ = liouville_pair
    assert smoothness_diagnostic(f).label == "rapid-decay"
    assert smoothness_diagnostic(u).label != "rapid-decay"


def test_smoothness_power_law():
    data = [(10**k, mpmath.mpf(10) ** (-2 * k)) for k in range(1, 9)]
    rep = smoothness_diagnostic(data)
    assert rep.label == "slow-growth" and abs(rep.rate + 2) < 1e-9


def test_u_against_quadrature_oracle():
    # constant coefficients: c_1 = L, lambda = 0
    L = liouville(10, 4)
    tube = TubeOperatorSpec((TrigPoly.of({0: L}),), TrigPoly.of({}))
    seq = find_eta_sequence(tube, 2, BUDGET)
    bump = BumpSpec()
    f, u, tns = build_pair(tube, seq, bump, 64)
    c, hw = bump.place(tns[-1])

    def phi(s):
        x = (s - c) / hw
        return mpmath.exp(1 - 1 / (1 - x * x)) if abs(x) < 1 else mpmath.mpf(0)

    def integral(lo, hi):
        lo2, hi2 = max(lo, c - hw), min(hi, c + hw)
        return mpmath.quad(phi, [lo2, hi2]) if lo2 < hi2 else mpmath.mpf(0)

    t = u.grid
    with mpmath.workdps(60):
        for e, um in zip(seq.entries, u.modes):
            eta = e.eta[0]
            Lv = sum(mpmath.mpf(10) ** -math.factorial(k) for k in range(1, 7))
            frac = mpmath.frac(eta * Lv)
            wrap = mpmath.exp(-2j * mpmath.pi * frac)
            for i in range(0, 64, 9):
                ti = mpmath.mpf(t[i])
                # after substitution both pieces are integrals of phi itself
                a = integral(0, ti)
                b = integral(ti, 2 * mpmath.pi)
                oracle = 1j * (a + wrap * b)
                env = um.scale * sum(term.coeff * complex(term.w[i]) for term in um.terms)
                # the carrier and oscillating phase are unimodular; compare the envelopes
                assert abs(env - oracle) <= 1e-8 * abs(oracle) + 1e-12


# -- spectral tools ------------------------------------------------------------------------


def test_spectral_derivative_exact_on_trig_poly():
    t = make_grid(64)
    y = np.exp(3j * t) + 2 * np.cos(5 * t)
    dy = spectral_derivative(y)
    assert np.max(np.abs(dy - (3j * np.exp(3j * t) - 10 * np.sin(5 * t)))) < 1e-11
