"""Interim zone classification and event-size re-estimation."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .power_engine import (InfoFraction, StageCounts, Variant, _cp_from_drift,
                           blended_drift)
from .stat_core import DomainError


class Zone(enum.IntEnum):
    FAVORABLE = 0
    PROMISING = 1
    ENRICHMENT = 2
    UNFAVORABLE = 3
    FUTILITY = 4

    @property
    def label(self) -> str:
        return self.name.capitalize()

    @property
    def population(self) -> str:
        return {Zone.ENRICHMENT: "S", Zone.FUTILITY: "none"}.get(self, "F")


@dataclass(frozen=True)
class ZoneThresholds:
    favorable: float = 0.9
    delta_F: float = 0.4
    delta_S: float = 0.5
    futility_F: float = 0.05
    futility_S: float = 0.05
    futility: bool = True

    def __post_init__(self):
        if not (0 <= self.futility_F <= self.delta_F <= self.favorable <= 1):
            raise DomainError("need 0 <= futility_F <= delta_F <= favorable <= 1")
        if not (0 <= self.futility_S <= self.delta_S <= 1):
            raise DomainError("need 0 <= futility_S <= delta_S <= 1")


def classify_zones(cp_F, cp_S, thresholds: ZoneThresholds) -> np.ndarray:
    """Vectorised zone classification; returns an integer array of :class:`Zone`."""
    cp_F = np.asarray(cp_F, dtype=float)
    cp_S = np.asarray(cp_S, dtype=float)
    th = thresholds
    zone = np.full(np.broadcast(cp_F, cp_S).shape, int(Zone.UNFAVORABLE), dtype=np.int8)
    if th.futility:
        zone[(cp_F < th.futility_F) & (cp_S < th.futility_S)] = Zone.FUTILITY
    zone[(cp_F < th.delta_F) & (cp_S >= th.delta_S)] = Zone.ENRICHMENT
    zone[(cp_F >= th.delta_F) & (cp_F < th.favorable)] = Zone.PROMISING
    zone[cp_F >= th.favorable] = Zone.FAVORABLE
    return zone


def classify_zone(cp_F: float, cp_S: float, thresholds: ZoneThresholds) -> Zone:
    for name, p in (("cp_F", cp_F), ("cp_S", cp_S)):
        if not (0.0 <= p <= 1.0):
            raise DomainError(f"{name} must be a probability, got {p}")
    return Zone(int(classify_zones(cp_F, cp_S, thresholds)))


@dataclass
class SSRResult:
    events: int
    flag: Optional[str] = None


def reestimate_events(cp_fn: Callable[[float], float], planned_incr: int, cap_incr: int,
                      target: float) -> SSRResult:
    """Smallest increment in ``[planned_incr, cap_incr]`` whose CP reaches ``target``.

    Bisection over the integers, so ``cp_fn`` is evaluated O(log(cap - planned))
    times.  Returns the cap when the target is out of reach; a CP that is
    lower at the cap than at the planned size is reported with a flag.
    """
    planned_incr, cap_incr = int(planned_incr), int(cap_incr)
    if not (1 <= planned_incr <= cap_incr):
        raise DomainError(f"need 1 <= planned ({planned_incr}) <= cap ({cap_incr})")
    at_planned = cp_fn(planned_incr)
    if at_planned >= target:
        return SSRResult(planned_incr)
    at_cap = cp_fn(cap_incr)
    if at_cap < target:
        flag = "non-monotone" if at_cap < at_planned else None
        return SSRResult(cap_incr, flag)
    lo, hi = planned_incr, cap_incr  # cp(lo) < target <= cp(hi)
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if cp_fn(mid) >= target:
            hi = mid
        else:
            lo = mid
    return SSRResult(hi)


def reestimate_events_batch(cp_fn: Callable[[np.ndarray], np.ndarray], planned_incr: int,
                            cap_incr: int, target: float, size: int) -> np.ndarray:
    """Row-wise :func:`reestimate_events` for a vectorised ``cp_fn``.

    ``cp_fn(incr)`` receives an integer array of length ``size`` (one
    candidate increment per row) and returns the matching CP values.
    """
    planned_incr, cap_incr = int(planned_incr), int(cap_incr)
    if not (1 <= planned_incr <= cap_incr):
        raise DomainError(f"need 1 <= planned ({planned_incr}) <= cap ({cap_incr})")
    lo = np.full(size, planned_incr, dtype=np.int64)
    hi = np.full(size, cap_incr, dtype=np.int64)
    done_lo = cp_fn(lo) >= target
    reach = cp_fn(hi) >= target
    active = ~done_lo & reach
    while True:
        open_ = active & (hi - lo > 1)
        if not open_.any():
            break
        mid = (lo + hi) // 2
        ok = cp_fn(mid) >= target
        hi = np.where(open_ & ok, mid, hi)
        lo = np.where(open_ & ~ok, mid, lo)
    return np.where(done_lo, planned_incr, np.where(reach, hi, cap_incr))


@dataclass
class InterimSnapshot:
    """What is known at the interim look, in oriented convention.

    ``counts_F``/``counts_S`` are the planned counts the conditional power is
    evaluated against; ``predicted_*`` are oriented surrogate predictions
    (ignored when surrogate use is disabled).  ``info`` holds the MCP weights
    for both populations unless ``info_S`` gives the subgroup its own.
    """

    z1_F: float
    z1_S: float
    counts_F: StageCounts
    counts_S: StageCounts
    info: InfoFraction
    predicted_F: Optional[float] = None
    predicted_S: Optional[float] = None
    events_F: Optional[int] = None
    events_S: Optional[int] = None
    info_S: Optional[InfoFraction] = None


@dataclass(frozen=True)
class DecisionRule:
    """Decision-time settings shared by the simulator and the one-shot engine."""

    alpha: float = 0.025
    power: float = 0.9
    thresholds: ZoneThresholds = field(default_factory=ZoneThresholds)
    variant: Variant = Variant.W1
    planned_incr: int = 100
    cap_incr: int = 164


@dataclass
class InterimDecision:
    zone: Zone
    selected_population: str
    n2_incr_final: int
    cp_F: float
    cp_S: float
    fallback_F: bool = False
    fallback_S: bool = False
    ssr_flag: Optional[str] = None


def decide(snapshot: InterimSnapshot, rule: DecisionRule) -> InterimDecision:
    """Interim decision for one trial: CPs, zone, and the stage-2 event target."""
    variant = Variant.parse(rule.variant)
    use_surrogate = variant is not Variant.NONE
    if use_surrogate and (snapshot.predicted_F is None or snapshot.predicted_S is None):
        raise DomainError("surrogate predictions are required when an MCP variant is used")

    def curve(z1, predicted, counts, info):
        drift, bad = blended_drift(variant, z1, predicted if use_surrogate else z1, info)
        drift = float(drift)
        return (lambda inc: float(_cp_from_drift(z1, drift, counts, rule.alpha, inc))), bool(bad)

    info_S = snapshot.info if snapshot.info_S is None else snapshot.info_S
    cp_fn_F, fb_F = curve(snapshot.z1_F, snapshot.predicted_F, snapshot.counts_F, snapshot.info)
    cp_fn_S, fb_S = curve(snapshot.z1_S, snapshot.predicted_S, snapshot.counts_S, info_S)
    cp_F, cp_S = cp_fn_F(rule.planned_incr), cp_fn_S(rule.planned_incr)
    zone = classify_zone(cp_F, cp_S, rule.thresholds)
    n2, flag = rule.planned_incr, None
    if zone in (Zone.PROMISING, Zone.ENRICHMENT):
        fn = cp_fn_F if zone is Zone.PROMISING else cp_fn_S
        res = reestimate_events(fn, rule.planned_incr, rule.cap_incr, rule.power)
        n2, flag = res.events, res.flag
    elif zone is Zone.FUTILITY:
        n2 = 0
    return InterimDecision(zone, zone.population, n2, cp_F, cp_S, fb_F, fb_S, flag)


def default_cap_incr(d_total_planned: int, d_stage1: int, multiplier: float = 1.4) -> int:
    return math.ceil(multiplier * d_total_planned - 1e-9) - d_stage1
