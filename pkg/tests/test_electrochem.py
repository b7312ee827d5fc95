import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import REF, bisect_current, j0_mp, ref
from photocell import (
    ModelParameters,
    OperatingProblem,
    PolarizationPoint,
    bv_residual,
    exchange_current_density,
    polarization_sweep,
    power_curve,
    solve_operating_point,
)
from photocell.core import FittedRateProfile, RateEntry, ValidationError
from photocell.electrochem import SolverError, polarization_csv, transfer_coefficients

J0_K1_X12 = 167044.700638559          # mpmath, 50 digits
TWO_POW_ALPHA = 1.0034717485095       # 2 ** 0.005, mpmath
GOLDEN_I = 7.753010620603249e-4       # bisection oracle, K=1e-4, x=12.2, R_ext=1000


def test_j0_zero_rate(params):
    assert exchange_current_density(0.0, 12.2, params) == 0.0


def test_j0_reference_value(params):
    j0 = exchange_current_density(1.0, 12.2, params)
    assert float(j0_mp(1.0, 12.2, REF)) == pytest.approx(J0_K1_X12, rel=1e-12)
    assert j0 == pytest.approx(J0_K1_X12, rel=1e-12)
    assert j0 == pytest.approx(1.6704e5, rel=1e-3)


def test_j0_light_doubling(params):
    ratio = (exchange_current_density(1.0, 12.2, params.with_values(L0=1250.0))
             / exchange_current_density(1.0, 12.2, params))
    assert ratio == pytest.approx(TWO_POW_ALPHA, abs=1e-12)


@pytest.mark.parametrize("name", ["L0", "A_s", "Q", "eta_eff"])
def test_j0_power_law_in_photon_terms(params, name):
    base = getattr(params, name)
    scaled = params.with_values(**{name: base * 0.5})
    ratio = exchange_current_density(1.0, 12.2, params) / exchange_current_density(1.0, 12.2, scaled)
    assert ratio == pytest.approx(2 ** params.alpha, rel=1e-13)


def test_transfer_coefficients(params):
    c1, c2 = transfer_coefficients(params)
    assert c1 == pytest.approx(0.38943, abs=1e-4)
    assert c1 + c2 == pytest.approx(2 * 96486 / (8.314 * 298), rel=1e-14)


def test_residual_examples(params):
    prob = OperatingProblem(1000.0, 1e-4, 12.2, params)
    upper = params.E0 / (1000.0 + params.R_int)
    assert bv_residual(upper, prob) == pytest.approx(-upper, rel=1e-12)
    dead = OperatingProblem(1000.0, 0.0, 12.2, params)
    assert bv_residual(0.0, dead) == 0.0
    c1, c2 = transfer_coefficients(params)
    expected = params.A_E * prob.j0 * (math.exp(c1 * 1.241) - math.exp(-c2 * 1.241))
    assert bv_residual(0.0, prob) == pytest.approx(expected, rel=1e-14)
    assert bv_residual(0.0, prob) > 0


def test_residual_is_finite_far_outside_bracket(params):
    prob = OperatingProblem(10.0, 1e2, 1e5, params)
    assert math.isfinite(bv_residual(1e3, prob))
    assert math.isfinite(bv_residual(-1e3, prob))


def test_dead_cell(params):
    pt = solve_operating_point(OperatingProblem(1000.0, 0.0, 12.2, params))
    assert pt.i == 0.0 and pt.v == 0.0 and pt.eta_act == params.E0


def test_golden_point(params):
    assert bisect_current(1000.0, 1e-4, 12.2, REF) == pytest.approx(GOLDEN_I, rel=1e-14)
    pt = solve_operating_point(OperatingProblem(1000.0, 1e-4, 12.2, params))
    assert pt.i == pytest.approx(GOLDEN_I, rel=1e-10)
    assert abs(bv_residual(pt.i, OperatingProblem(1000.0, 1e-4, 12.2, params))) <= 1e-12


def test_point_fields_consistent(params):
    pt = solve_operating_point(OperatingProblem(2500.0, 3e-5, 40.0, params))
    assert 0 < pt.i < params.E0 / (2500.0 + params.R_int)
    assert 0 < pt.eta_act < params.E0
    assert pt.v == pytest.approx(pt.i * 2500.0, rel=1e-9)
    assert pt.j == pytest.approx(pt.i / params.A_E, rel=1e-12)
    assert pt.p == pytest.approx(pt.v * pt.i / params.A_E, rel=1e-12)
    assert pt.eta_act == pytest.approx(params.E0 - pt.i * (2500.0 + params.R_int), rel=1e-12)
    assert pt.k == 3e-5 and pt.x_at_eval == 40.0


def test_problem_validation(params):
    with pytest.raises(ValidationError):
        OperatingProblem(0.0, 1e-4, 12.2, params)
    with pytest.raises(ValidationError):
        OperatingProblem(100.0, -1.0, 12.2, params)
    with pytest.raises(ValidationError):
        OperatingProblem(100.0, 1e-4, 2e5, params)


def test_nonpositive_potential_is_a_solver_error():
    # E0 <= 0 cannot come from a validated parameter set; bypass validation on purpose
    p = ModelParameters()
    object.__setattr__(p, "E0", 0.0)
    with pytest.raises(SolverError):
        solve_operating_point(OperatingProblem(100.0, 1e-4, 12.2, p))


def _random_problem(rng, params):
    k = 10 ** rng.uniform(-8, 2)
    r = 10 ** rng.uniform(1, 7)
    x = rng.uniform(1, 1e5)
    return OperatingProblem(r, k, x, params)


def test_solver_matches_bisection_and_residual_decreases(params):
    rng = np.random.default_rng(20240611)
    for _ in range(200):
        prob = _random_problem(rng, params)
        pt = solve_operating_point(prob)
        oracle = bisect_current(prob.r_ext, prob.k, prob.x, REF)
        assert pt.i == pytest.approx(oracle, rel=1e-10)
        grid = np.linspace(0.0, prob.current_upper, 100)
        f = [bv_residual(i, prob) for i in grid]
        assert all(b < a for a, b in zip(f, f[1:]))
        assert 0 <= pt.v < params.E0


@settings(max_examples=60, deadline=None)
@given(k=st.floats(1e-8, 1e2), x=st.floats(1.0, 1e5),
       r1=st.floats(10.0, 1e7), r2=st.floats(10.0, 1e7))
def test_polarization_monotone_in_load(k, x, r1, r2):
    if abs(r1 - r2) < 1e-6 * max(r1, r2):
        return
    lo, hi = sorted((r1, r2))
    p = ModelParameters()
    a = solve_operating_point(OperatingProblem(lo, k, x, p))
    b = solve_operating_point(OperatingProblem(hi, k, x, p))
    assert b.i < a.i
    assert b.v > a.v


def test_doubling_electrode_area_increases_current(params):
    double = params.with_values(A_E=2 * params.A_E)
    for r in np.geomspace(10, 1e7, 15):
        a = solve_operating_point(OperatingProblem(r, 1e-4, 12.2, params))
        b = solve_operating_point(OperatingProblem(r, 1e-4, 12.2, double))
        assert b.i > a.i


# ----------------------------------------------------------------------
# sweeps and power
# ----------------------------------------------------------------------

def test_single_load_sweep_equals_direct_solve(params):
    [pt] = polarization_sweep([1500.0], 2e-5, params)
    assert pt == solve_operating_point(OperatingProblem(1500.0, 2e-5, params.x0, params))


def test_sweep_two_loads(params):
    hi, lo = polarization_sweep([1e6, 1e3], 1e-4, params)
    assert lo.i > hi.i and lo.v < hi.v


def test_sweep_balanced_growth_keeps_x_constant():
    p = ModelParameters(k2=5e-5, mu_max=5e-5, K_N=1e-12)
    loads = list(np.geomspace(100, 1e6, 32))
    pts = polarization_sweep(loads, 1e-4, p, dwell=3600)
    xs = [pt.x_at_eval for pt in pts]
    assert max(xs) == pytest.approx(min(xs), rel=1e-10)
    j0s = [exchange_current_density(1e-4, x, p) for x in xs]
    assert max(j0s) == pytest.approx(min(j0s), rel=1e-12)


def test_sweep_with_dwell_sees_growth(params):
    pts = polarization_sweep([1000.0, 1000.0 * 1.01], 1e-4, params, dwell=3600)
    assert pts[0].x_at_eval > params.x0
    assert pts[1].x_at_eval > pts[0].x_at_eval


def test_sweep_accepts_profile(params):
    prof = FittedRateProfile((RateEntry(100.0, 1e-3), RateEntry(1e4, 1e-5)))
    [pt] = polarization_sweep([1000.0], prof, params)
    assert pt.k == pytest.approx(1e-4, rel=1e-12)


def test_sweep_errors_carry_load_index(params):
    with pytest.raises(ValidationError, match="load index 1"):
        polarization_sweep([100.0, -5.0], 1e-4, params)
    with pytest.raises(ValidationError):
        polarization_sweep([], 1e-4, params)


def test_power_curve():
    pt0 = PolarizationPoint(1e3, 0.0, 0.0, 0.0, 0.0, 1e-4, 1.241, 12.2)
    assert power_curve([pt0]) == [(0.0, 0.0)]
    short = PolarizationPoint(1e-9, 1e-3, 0.0, 1e-3 / 4.84e-4, 0.0, 1e-4, 0.5, 12.2)
    assert power_curve([short])[0][1] == 0.0
    pt = PolarizationPoint(3e5, 1e-6, 0.3, 1e-6 / 4.84e-4, 0.0, 1e-4, 0.1, 12.2)
    assert power_curve([pt])[0][1] == pytest.approx(6.198347107438016e-4, rel=1e-14)
    with pytest.raises(ValidationError):
        power_curve([])


def test_power_curve_matches_point_power(params):
    pts = polarization_sweep(list(np.geomspace(100, 1e6, 8)), 1e-4, params)
    for pt, (j, p) in zip(pts, power_curve(pts)):
        assert j == pt.j and p == pytest.approx(pt.p, rel=1e-14)


def test_polarization_csv_layout(params):
    text = polarization_csv(polarization_sweep([1000.0], 0.0, params))
    header, row = text.splitlines()
    assert header == "r_ext_ohm,i_amp,v_volt,j_a_per_m2,p_w_per_m2,k_per_m2,eta_act_volt,x_g_per_m3"
    assert row.split(",")[:3] == ["1.00000000000e+03", "0.00000000000e+00", "0.00000000000e+00"]
