import itertools
import math
import random
from fractions import Fraction as F

import pytest

from hypotor.classify import (
    base_gh_status,
    classify_MN,
    kronecker_density_test,
    lambda_lattice_membership,
    lattice_step_rational,
    profile_coefficients,
    psi_base_solution,
    psi_map,
    resonant_combination,
    theta_map,
)
from hypotor.errors import PreconditionError
from hypotor.exactnum import ExactComplex, preset_basis
from hypotor.symbol import OperatorSpec, SearchBudget, scan_shells, zero_set_rational


def dense_example():
    b = preset_basis("sqrt2,sqrt3")
    return OperatorSpec.build([(b.gen("sqrt2"), b.gen("sqrt3")), (1, 1)], 0, basis=b)


# -- profile -----------------------------------------------------------------------


def test_profile_examples():
    p = profile_coefficients(OperatorSpec.build([F(1, 2), F(1, 3)], 0))
    assert all(p.is_real) and all(p.re_rational)
    p = profile_coefficients(dense_example())
    assert p.nonreal_indices == (0, 1) and p.im_ratio is None
    p = profile_coefficients(OperatorSpec.build([(1, 2), (3, 4)], 0))
    assert p.im_ratio[2] == F(1, 2)


# -- rational lattice ----------------------------------------------------------------


def test_lattice_step_examples():
    assert lattice_step_rational(OperatorSpec.build([F(1, 2), F(1, 3)], 0)) == F(1, 6)
    assert lattice_step_rational(OperatorSpec.build([F(0)], 0)) == 1
    assert lattice_step_rational(OperatorSpec.build([F(2, 3), F(2, 3)], 0)) == F(1, 3)
    with pytest.raises(PreconditionError):
        lattice_step_rational(OperatorSpec.build([(0, 1)], 0))


def test_lattice_step_against_zero_sets():
    rng = random.Random(11)
    for _ in range(15):
        alphas = [F(rng.randint(-9, 9), rng.randint(1, 6)) for _ in range(rng.randint(1, 3))]
        step = lattice_step_rational(OperatorSpec.build(alphas, 0))
        assert not zero_set_rational(OperatorSpec.build(alphas, step)).empty
        assert zero_set_rational(OperatorSpec.build(alphas, step / 2)).empty


def test_rational_gap_bounds_shell_minima():
    alphas = [F(1, 2), F(1, 3)]
    step = lattice_step_rational(OperatorSpec.build(alphas, 0))
    lam = step / 3
    recs = scan_shells(OperatorSpec.build(alphas, lam), 20)
    assert all(r.min_modulus_sq.lo >= (step / 3) ** 2 for r in recs)


# -- Kronecker test ------------------------------------------------------------------


def test_kronecker_examples():
    # indices are 0-based: k=1 is the second coefficient
    cert = kronecker_density_test(dense_example(), 1)
    assert cert.dense and cert.verify(dense_example())
    ii = OperatorSpec.build([(0, 1), (0, 1)], 0)
    cert = kronecker_density_test(ii, 0)
    assert not cert.dense and cert.r == (0, 1) and cert.verify(ii)
    one = OperatorSpec.build([(2, 1), 3], 0)
    cert = kronecker_density_test(one, 0)
    assert not cert.dense
    with pytest.raises(PreconditionError):
        kronecker_density_test(one, 1)


def test_kronecker_certificate_lines_are_exact():
    # for (i, i) every bounded combination has integer imaginary part
    spec = OperatorSpec.build([(0, 1), (0, 1)], 0)
    for ell, a, b in itertools.product(range(-4, 5), repeat=3):
        z = spec.alphas[0] * spec.basis.rational(a) + spec.alphas[1] * spec.basis.rational(b)
        im = z.im.as_rational()
        assert im is not None and im.denominator == 1


# -- membership ----------------------------------------------------------------------


def test_membership_examples():
    b = preset_basis("sqrt2")
    s2 = b.gen("sqrt2")
    spec = OperatorSpec.build([s2], b.rational(3) + s2 * 2, basis=b)
    assert lambda_lattice_membership(spec, 10) == (3, 2)
    assert lambda_lattice_membership(OperatorSpec.build([F(1, 2)], F(1, 3)), 50) is None
    assert lambda_lattice_membership(OperatorSpec.build([(0, 1), (1, 1)], 1), 5) == (1, 0, 0)


# -- classification ------------------------------------------------------------------


def test_classify_examples():
    r = classify_MN(OperatorSpec.build([F(1, 2), F(1, 3)], 0))
    assert r.mn_structure.kind == "DiscreteLattice" and r.mn_structure.step == F(1, 6)
    r = classify_MN(OperatorSpec.build([(0, 1), (0, 1)], 0))
    assert r.mn_structure.kind == "LinesWithDiscreteTrace" and r.mn_structure.step == 1
    assert r.mn_structure.carrier.spacing.as_rational() == 1
    r = classify_MN(dense_example())
    assert r.mn_structure.kind == "DenseGdeltaComplex"
    assert r.base_gh.kind == "GH"


def test_lines_case_agrees_with_zero_sets():
    # (i, i): M_2 = Z + iZ; lambda in it has infinitely many zeros, lambda off it none
    for lam, member in [((2, 3), True), ((F(1, 2), 1), False), ((1, F(1, 3)), False)]:
        z = zero_set_rational(OperatorSpec.build([(0, 1), (0, 1)], lam))
        assert z.infinite == member


def test_one_nonreal_case():
    r = classify_MN(OperatorSpec.build([F(1, 2), (0, 3)], 0))
    assert r.mn_structure.kind == "LinesWithDiscreteTrace"
    assert r.mn_structure.carrier.spacing.as_rational() == 3
    s2 = preset_basis("sqrt2").gen("sqrt2")
    r = classify_MN(OperatorSpec.build([s2, (0, 3)], 0))
    assert r.mn_structure.kind == "LinesWithDenseTrace"


def test_one_nonreal_lines_bound_scan():
    # lambda strictly between t_m lines: minima >= distance to Im alpha_k Z
    spec = OperatorSpec.build([F(1, 2), (0, 3)], (0, 1))
    recs = scan_shells(spec, 25)
    assert all(r.min_modulus_sq.lo >= 1 for r in recs)


def test_resonant_direction_uses_second_index_ratio():
    # alpha = (1/4 + i, 0 + 2i): p/q = 1/2, trace on Im = 0 is Z + (1/2)Z
    spec = OperatorSpec.build([(F(1, 4), 1), (0, 2)], 0)
    assert resonant_combination(spec).as_rational() == F(1, 2)
    r = classify_MN(spec)
    assert r.mn_structure.step == F(1, 2)
    # oracle: brute force the real zeros with xi + 2 eta = 0
    vals = {t + F(1, 4) * xi for t, xi, eta in itertools.product(range(-6, 7), repeat=3) if xi + 2 * eta == 0}
    g = 0
    for v in vals:
        g = math.gcd(g, int(v * 4))
    assert F(g, 4) == F(1, 2)


def test_theta_corrected_vs_printed():
    # alpha = (1/2, 2 + 3i): lambda on the line t_1 maps into Z + (1/2)Z
    spec = OperatorSpec.build([F(1, 2), (2, 3)], 0)
    b = spec.basis
    for tau, xi in [(0, 0), (1, 3), (-2, 5)]:
        lam = ExactComplex(b.rational(tau + F(xi, 2) + 2), b.rational(3))
        good = theta_map(1, lam, spec).as_rational()
        assert (2 * good).denominator == 1
        bad = theta_map(1, lam, spec, printed=True).as_rational()
        assert (2 * bad).denominator != 1
    assert theta_map(0, (F(1, 2), 0), spec).as_rational() == F(-1, 2)


def test_theta_rejects_points_off_line():
    spec = OperatorSpec.build([F(1, 2), (2, 3)], 0)
    with pytest.raises(PreconditionError):
        theta_map(1, (0, 1), spec)


def test_psi_examples_and_isometry():
    spec = OperatorSpec.build([(0, 1), (0, 1)], 0)
    v = psi_map(1, (F(1, 2), 1), spec)
    assert v.value.as_rational() == F(1, 2)
    a = psi_map(1, (F(3, 10), 1), spec).value.as_rational()
    b = psi_map(1, (F(7, 10), 1), spec).value.as_rational()
    assert abs(a - b) == F(2, 5)
    p, q = 3, 5
    for m in range(-7, 8):
        x, y = psi_base_solution(m, p, q)
        assert p * x + q * y == m


# -- global hypoellipticity ------------------------------------------------------------


def test_base_gh_examples():
    assert base_gh_status(OperatorSpec.build([F(3, 7)], 0)).kind == "NotGH"
    s2 = preset_basis("sqrt2").gen("sqrt2")
    assert base_gh_status(OperatorSpec.build([s2], 0)).kind == "GH"
    assert base_gh_status(dense_example()).kind == "GH"
    assert base_gh_status(OperatorSpec.build([(1, 1)], 0)).kind == "GH"


def test_liouville_gh_needs_budget():
    from hypotor.exactnum import liouville

    spec = OperatorSpec.build([liouville(10, 4)], 0)
    assert base_gh_status(spec).kind == "Undetermined"
    st = base_gh_status(spec, SearchBudget(10))
    assert st.kind == "NotGH" and st.certificates


def test_report_json_has_schema():
    js = classify_MN(dense_example()).to_json()
    assert js["schema"] == "hypotor-report/1"
