import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from enrichsim.decision_engine import (DecisionRule, InterimSnapshot, Zone, ZoneThresholds,
                                       classify_zone, classify_zones, decide, default_cap_incr,
                                       reestimate_events, reestimate_events_batch)
from enrichsim.power_engine import InfoFraction, StageCounts, Variant, conditional_power
from enrichsim.stat_core import DomainError

TH = ZoneThresholds()
prob = st.floats(0.0, 1.0)


def test_table5_examples():
    assert classify_zone(0.95, 0.0, TH) is Zone.FAVORABLE
    assert classify_zone(0.95, 1.0, TH) is Zone.FAVORABLE
    assert classify_zone(0.02, 0.66, TH) is Zone.ENRICHMENT
    assert classify_zone(0.03, 0.03, TH) is Zone.FUTILITY
    assert classify_zone(0.5, 0.99, TH) is Zone.PROMISING
    assert classify_zone(0.2, 0.3, TH) is Zone.UNFAVORABLE
    assert classify_zone(0.03, 0.3, TH) is Zone.UNFAVORABLE


def test_boundaries_use_lower_edge():
    assert classify_zone(0.9, 0.0, TH) is Zone.FAVORABLE
    assert classify_zone(0.4, 0.0, TH) is Zone.PROMISING
    assert classify_zone(0.1, 0.5, TH) is Zone.ENRICHMENT
    assert classify_zone(0.05, 0.0, TH) is Zone.UNFAVORABLE


def test_futility_switch():
    off = ZoneThresholds(futility=False)
    assert classify_zone(0.01, 0.01, off) is Zone.UNFAVORABLE


def test_threshold_validation():
    with pytest.raises(DomainError):
        ZoneThresholds(delta_F=0.95)
    with pytest.raises(DomainError):
        ZoneThresholds(futility_S=0.6)
    with pytest.raises(DomainError):
        classify_zone(1.2, 0.0, TH)


@given(prob, prob)
def test_zones_partition(cp_F, cp_S):
    z = classify_zone(cp_F, cp_S, TH)
    expected = {
        Zone.FAVORABLE: cp_F >= 0.9,
        Zone.PROMISING: 0.4 <= cp_F < 0.9,
        Zone.ENRICHMENT: cp_F < 0.4 and cp_S >= 0.5,
        Zone.FUTILITY: cp_F < 0.05 and cp_S < 0.05,
    }
    expected[Zone.UNFAVORABLE] = not any(expected.values())
    assert sum(expected.values()) == 1
    assert expected[z]


@given(prob, prob, prob)
def test_zone_monotone_in_cp_F(a, b, cp_S):
    lo, hi = sorted((a, b))
    good = {Zone.FAVORABLE, Zone.PROMISING}
    if classify_zone(lo, cp_S, TH) in good:
        assert classify_zone(hi, cp_S, TH) in good


def test_population_labels():
    assert Zone.ENRICHMENT.population == "S"
    assert Zone.FUTILITY.population == "none"
    assert Zone.PROMISING.population == "F"


def test_vectorised_matches_scalar():
    rng = np.random.default_rng(1)
    f, s = rng.random(500), rng.random(500)
    z = classify_zones(f, s, TH)
    assert all(Zone(int(z[i])) is classify_zone(f[i], s[i], TH) for i in range(500))


def test_ssr_trivial_cases():
    assert reestimate_events(lambda n: 0.95, 100, 164, 0.9).events == 100
    res = reestimate_events(lambda n: 0.5, 100, 164, 0.9)
    assert res.events == 164 and res.flag is None
    res = reestimate_events(lambda n: 0.8 - n / 1000, 100, 164, 0.9)
    assert res.events == 164 and res.flag == "non-monotone"
    with pytest.raises(DomainError):
        reestimate_events(lambda n: 0.5, 100, 50, 0.9)


@given(st.floats(0.3, 3.0), st.integers(1, 200), st.integers(0, 200))
def test_ssr_postcondition(z1, planned, extra):
    counts = StageCounts(60, 160)
    cap = planned + extra
    fn = lambda inc: conditional_power(z1, counts, 0.025, inc)
    e = reestimate_events(fn, planned, cap, 0.9).events
    assert planned <= e <= cap
    assert fn(e) >= 0.9 or e == cap
    if e > planned:
        assert fn(e - 1) < 0.9  # smallest such count


def test_ssr_batch_matches_scalar():
    counts = StageCounts(60, 160)
    z = np.linspace(0.0, 3.0, 61)
    batch = reestimate_events_batch(lambda inc: conditional_power(z, counts, 0.025, inc),
                                    100, 164, 0.9, len(z))
    scalar = [reestimate_events(lambda inc: conditional_power(zi, counts, 0.025, inc),
                                100, 164, 0.9).events for zi in z]
    assert list(batch) == scalar


def test_default_cap():
    assert default_cap_incr(160, 60) == 164
    assert default_cap_incr(160, 60, 1.4) + 60 == 224


def _snapshot(z_F, z_S, f_F=None, f_S=None, n_F=40, n_S=24, planned=100):
    cF, cS = StageCounts(n_F, n_F + planned), StageCounts(n_S, n_S + planned)
    return InterimSnapshot(z_F, z_S, cF, cS, InfoFraction(cF.t), f_F, f_S, n_F, n_S, InfoFraction(cS.t))


def test_oncology_decisions():
    snap = _snapshot(0.05, -0.27, -0.09, 1.73)
    no_se = decide(snap, DecisionRule(variant=Variant.NONE))
    assert no_se.zone is Zone.FUTILITY and no_se.selected_population == "none"
    assert no_se.n2_incr_final == 0
    w1 = decide(snap, DecisionRule(variant=Variant.W1))
    assert w1.zone is Zone.ENRICHMENT and w1.selected_population == "S"
    assert w1.cp_S == pytest.approx(0.66, abs=0.05)
    assert abs(24 + w1.n2_incr_final - 168) <= 4


def test_vaccine_decisions():
    snap = _snapshot(0.8562, 0.936, 1.8635, 1.912, n_F=26, n_S=14, planned=66)
    rule = dict(planned_incr=66, cap_incr=86)
    no_se = decide(snap, DecisionRule(variant=Variant.NONE, **rule))
    assert no_se.zone is Zone.ENRICHMENT
    assert (no_se.cp_F, no_se.cp_S) == pytest.approx((0.34, 0.62), abs=1e-3)
    w1 = decide(snap, DecisionRule(variant=Variant.W1, **rule))
    assert w1.zone is Zone.PROMISING
    assert (w1.cp_F, w1.cp_S) == pytest.approx((0.77, 0.98), abs=0.03)
    assert 66 <= w1.n2_incr_final <= 86


@given(st.floats(-3, 3), st.floats(-3, 3))
def test_prediction_equal_to_observed_matches_benchmark(z_F, z_S):
    snap = _snapshot(z_F, z_S, z_F, z_S)
    for v in (Variant.W1, Variant.W2):
        a = decide(snap, DecisionRule(variant=v))
        b = decide(snap, DecisionRule(variant=Variant.NONE))
        if not (a.fallback_F or a.fallback_S):
            assert a.zone == b.zone and a.n2_incr_final == b.n2_incr_final


@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(-3, 3), st.floats(-3, 3))
def test_decision_invariants(z_F, z_S, f_F, f_S):
    rule = DecisionRule(variant=Variant.W1)
    d = decide(_snapshot(z_F, z_S, f_F, f_S), rule)
    assert (d.zone is Zone.FUTILITY) == (d.selected_population == "none")
    if d.zone in (Zone.FAVORABLE, Zone.UNFAVORABLE):
        assert d.n2_incr_final == rule.planned_incr
    if d.zone in (Zone.PROMISING, Zone.ENRICHMENT):
        assert rule.planned_incr <= d.n2_incr_final <= rule.cap_incr
    assert d == decide(_snapshot(z_F, z_S, f_F, f_S), rule)


def test_surrogate_required_for_mcp():
    with pytest.raises(DomainError):
        decide(_snapshot(1.0, 1.0), DecisionRule(variant=Variant.W1))
