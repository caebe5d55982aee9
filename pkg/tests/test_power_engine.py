import math

import numpy as np
import pytest
from hypothesis import assume, given, strategies as st

from enrichsim.power_engine import (DegenerateWeightError, HistoricalModel, InfoFraction,
                                    StageCounts, SurrogateReadout, Variant, binomial_case_split,
                                    blended_drift, conditional_power, hr_from_ve, modified_cp,
                                    predict_statistic, required_events, schoenfeld_events,
                                    theoretical_stage_covariance, ve_from_hr)
from enrichsim.stat_core import DomainError, z_upper

PLANNED = StageCounts(60, 160)
ALPHA = 0.025

counts_st = st.tuples(st.integers(1, 300), st.integers(1, 300)).map(
    lambda p: StageCounts(p[0], p[0] + p[1]))


def test_stage_counts():
    assert PLANNED.n2_incr == 100
    assert PLANNED.t == pytest.approx(0.375)
    for bad in ((0, 10), (10, 10), (20, 10)):
        with pytest.raises(DomainError):
            StageCounts(*bad)


def test_cp_extremes():
    assert conditional_power(10.0, PLANNED, ALPHA) >= 1 - 1e-9
    assert conditional_power(-10.0, PLANNED, ALPHA) <= 1e-9


def test_cp_matches_conditional_simulation():
    # Z2 (cumulative) | Z1 under the independent-increment law with the drift
    # estimated from z1: the increment has mean z1*sqrt(inc/n1) and variance 1
    z1, n1, n2 = 2.0, 60, 160
    inc = n2 - n1
    rng = np.random.default_rng(20240601)
    incr = z1 * math.sqrt(inc / n1) + rng.standard_normal(1_000_000)
    z2 = (z1 * math.sqrt(n1) + incr * math.sqrt(inc)) / math.sqrt(n2)
    mc = np.mean(z2 > z_upper(ALPHA))
    assert conditional_power(z1, StageCounts(n1, n2), ALPHA) == pytest.approx(mc, abs=0.002)


def test_cp_rejects_bad_inputs():
    with pytest.raises(DomainError):
        conditional_power(1.0, PLANNED, 0.6)
    with pytest.raises(DomainError):
        conditional_power(1.0, PLANNED, ALPHA, 0)


def test_cp_vectorised():
    out = conditional_power(np.array([-1.0, 0.0, 1.0]), PLANNED, ALPHA)
    assert out.shape == (3,) and np.all(np.diff(out) > 0)


@given(counts_st)
def test_cp_strictly_increasing_in_z1(counts):
    z = np.linspace(-3, 3, 1000)
    cp = conditional_power(z, counts, ALPHA)
    inner = (cp > 1e-12) & (cp < 1 - 1e-12)  # away from floating-point saturation
    assert np.all(np.diff(cp[inner]) > 0)


@given(counts_st, st.floats(0.05, 1.0))
def test_cp_increasing_in_increment(counts, frac):
    # monotone in the increment as long as z1 has not already crossed the final boundary
    z1 = frac * z_upper(ALPHA) * math.sqrt(counts.n2 / counts.n1)
    inc = np.arange(1, 400)
    cp = conditional_power(z1, counts, ALPHA, inc)
    inner = cp < 1 - 1e-12
    assert np.all(np.diff(cp[inner]) >= 0)


def test_cp_can_fall_with_increment_past_the_boundary():
    # documented limit of the monotonicity property: past the boundary, CP dips
    # for increments below -(c sqrt(n2) - z1 sqrt(n1)) sqrt(n1) / z1
    counts = StageCounts(60, 160)
    z1 = 1.2 * z_upper(ALPHA) * math.sqrt(160 / 60)
    turn = -(z_upper(ALPHA) * math.sqrt(160) - z1 * math.sqrt(60)) * math.sqrt(60) / z1
    assert 5 < turn < 15
    assert conditional_power(z1, counts, ALPHA, 5) < conditional_power(z1, counts, ALPHA, 1)


@pytest.mark.parametrize("variant", list(Variant))
@given(z1=st.floats(-4, 4), t=st.floats(0.01, 1.0), fc=st.floats(0.01, 0.99),
       counts=counts_st, inc=st.integers(1, 300))
def test_mcp_collapses_to_cp_when_prediction_equals_z1(variant, z1, t, fc, counts, inc):
    assume(abs(z1) > 1e-3)
    info = InfoFraction(t, fc)
    mcp = modified_cp(variant, z1, z1, info, counts, ALPHA, inc)
    assert mcp == pytest.approx(conditional_power(z1, counts, ALPHA, inc), abs=1e-12)


@given(z1=st.floats(-4, 4), f=st.floats(-4, 4), counts=counts_st)
def test_w1_with_t_one_is_cp(z1, f, counts):
    mcp = modified_cp("W1", z1, f, InfoFraction(1.0), counts, ALPHA)
    assert mcp == pytest.approx(conditional_power(z1, counts, ALPHA), abs=1e-12)


def test_blend_formulas():
    info = InfoFraction(0.25, 0.4)
    z1, f = 1.0, 2.0
    assert blended_drift("W1", z1, f, info)[0] == pytest.approx(1.0 * 0.25 + 2.0 * 0.75)
    assert blended_drift("W2", z1, f, info)[0] == pytest.approx(2.0 / (0.75 + 0.5))
    assert blended_drift("W3", z1, f, info)[0] == pytest.approx(2.0 / (0.6 + 0.8))
    assert blended_drift("none", z1, f, info)[0] == 1.0


def test_harmonic_blend_degenerate_cases():
    info = InfoFraction(0.5, 0.5)
    with pytest.raises(DegenerateWeightError):
        modified_cp("W2", 1.0, -1.0, info, PLANNED, ALPHA)
    drift, bad = blended_drift("W2", 1.0, -1.0, info)
    assert bool(bad) and drift == pytest.approx(0.0)  # W1 fallback
    drift, bad = blended_drift("W3", np.array([1.0, 0.0]), np.array([2.0, 1.0]), info)
    assert list(bad) == [False, True]
    with pytest.raises(DomainError):
        blended_drift("W3", 1.0, 1.0, InfoFraction(0.5))


@given(f1=st.floats(-5, 5), f2=st.floats(-5, 5), z1=st.floats(0.01, 3), t=st.floats(0.01, 0.99))
def test_w1_monotone_in_prediction(f1, f2, z1, t):
    lo, hi = sorted((f1, f2))
    info = InfoFraction(t)
    assert modified_cp("W1", z1, lo, info, PLANNED, ALPHA) <= modified_cp("W1", z1, hi, info, PLANNED, ALPHA)


def test_oncology_subgroup_mcp():
    # 24 interim subgroup events, planned increment 100, t = n1 / n2
    counts = StageCounts(24, 124)
    mcp = modified_cp("W1", -0.27, 1.73, InfoFraction(counts.t), counts, ALPHA)
    assert mcp == pytest.approx(0.66, abs=0.05)


def test_variant_parse():
    assert Variant.parse("w2") is Variant.W2
    assert Variant.parse("NONE") is Variant.NONE
    with pytest.raises(DomainError):
        Variant.parse("W4")


def test_historical_model():
    assert predict_statistic(HistoricalModel(0, 0, False), 0.3) == 0.0
    assert predict_statistic(HistoricalModel(0, 1, False), 0.2) == pytest.approx(0.2)
    onc = HistoricalModel(1.91, -1.82 / 0.19, logrank_convention=True)
    assert onc.predict(0.38) == pytest.approx(-1.73)
    assert predict_statistic(onc, SurrogateReadout(0.38, "S")) == pytest.approx(1.73)
    assert predict_statistic(onc, 0.19) == pytest.approx(-0.09)
    with pytest.raises(DomainError):
        SurrogateReadout(1.5)


def test_info_fraction_domain():
    with pytest.raises(DomainError):
        InfoFraction(0.0)
    with pytest.raises(DomainError):
        InfoFraction(0.5, 1.2)


def test_required_events_examples():
    assert required_events(0.6, 0.025, 0.9) == 162
    assert abs(required_events(0.6, 0.025, 0.9) - 160) <= 3
    assert required_events(0.66, 0.025, 0.9) == 244
    assert abs(required_events(0.66, 0.025, 0.9) - 240) <= 5


def test_required_events_diverges_at_margin():
    sizes = [schoenfeld_events(0.65 - eps, 0.025, 0.9, hr_margin=0.65) for eps in (0.1, 0.01, 0.001)]
    assert sizes[0] < sizes[1] < sizes[2] and sizes[2] > 1e5
    with pytest.raises(DomainError):
        required_events(0.7, 0.025, 0.9, hr_margin=0.65)


@given(st.floats(0.2, 0.95), st.floats(0.5, 1.0))
def test_required_events_margin_invariance(ratio, margin):
    hr_alt = ratio * margin
    assume(hr_alt < margin)
    a = schoenfeld_events(hr_alt, 0.025, 0.9, hr_margin=margin)
    b = schoenfeld_events(hr_alt / margin, 0.025, 0.9)
    assert a == pytest.approx(b, rel=1e-12)


def test_ve_conversions():
    assert ve_from_hr(1.0) == 0.0
    assert ve_from_hr(0.3) == pytest.approx(70.0)
    assert hr_from_ve(35.0) == pytest.approx(0.65)
    for hr in (0.1, 0.5, 0.99):
        assert hr_from_ve(ve_from_hr(hr)) == pytest.approx(hr, abs=1e-15)
    with pytest.raises(DomainError):
        ve_from_hr(0.0)


def test_vaccine_case_split():
    split = binomial_case_split(70, 35, 0.05, 0.9)
    assert 84 <= split["score"] <= 95
    assert split["p_vaccine_alt"] == pytest.approx(0.3 / 1.3)


def test_covariance_examples():
    m = theoretical_stage_covariance(30, 30, 80, 80, 0.5)
    assert np.allclose(m, m.T) and np.allclose(np.diag(m), 1)
    assert np.linalg.eigvalsh(m).min() > -1e-12
    assert m[0, 1] == pytest.approx(math.sqrt(0.5))  # Z1_S vs Z1_F
    assert m[1, 3] == pytest.approx(math.sqrt(60 / 160))  # Z1_F vs Z2_F
    same = theoretical_stage_covariance(30, 30, 30, 30, 0.5)
    assert same[1, 3] == pytest.approx(1.0) and same[0, 2] == pytest.approx(1.0)
    full = theoretical_stage_covariance(30, 30, 80, 80, 1.0)
    assert full[0, 1] == pytest.approx(1.0) and full[0, 3] == pytest.approx(full[1, 3])
    with pytest.raises(DomainError):
        theoretical_stage_covariance(30, 30, 80, 80, 0.0)


def test_covariance_matches_simulated_mean_differences():
    rng = np.random.default_rng(3)
    R, n1, n2, tau = 20_000, 40, 100, 0.5
    m = theoretical_stage_covariance(n1, n1, n2, n2, tau)
    zs = []
    x_t = rng.standard_normal((R, n2))
    x_c = rng.standard_normal((R, n2))
    sub = rng.random((1, n2)) < tau  # fixed membership with exact prevalence
    sub[:] = (np.arange(n2) % 2 == 0)
    for n in (n1, n2):
        for member in (sub[0, :n], np.ones(n, bool)):
            k = member.sum()
            d = x_t[:, :n][:, member].mean(1) - x_c[:, :n][:, member].mean(1)
            zs.append(d / math.sqrt(2 / k))
    emp = np.corrcoef(np.array(zs))
    assert np.allclose(emp, m, atol=0.03)
