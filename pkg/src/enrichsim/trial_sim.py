"""Patient-level simulation of the two-stage enrichment trial.

Timeline of one replication:

1. cohort 1 is enrolled; the interim look happens at the ``d_interim``-th
   cohort-1 event;
2. log-rank statistics for F and S are computed at that cut, surrogate
   predictions are drawn, and the interim decision is taken;
3. cohort 1 stage-1 data are frozen at its ``d_stage1``-th event (a
   pre-specified count, whatever the decision);
4. cohort 2 (subgroup only after enrichment) starts enrolling at the interim
   and is followed until the stage-2 event target is met in the selected
   population;
5. the stage-2 statistic comes from cohort 2 alone, so it is independent of
   everything used at the interim, and the closed CHW test is applied.

Many replications are simulated at once as ``(R, N)`` arrays.  Replication
``r`` draws all of its random numbers from ``RngStream(seed, r)`` in a fixed
layout, so results do not depend on how replications are batched, and every
design "arm" evaluated on the same batch sees identical patients (common
random numbers).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .decision_engine import (InterimDecision, Zone, ZoneThresholds, classify_zones,
                              default_cap_incr, reestimate_events_batch)
from .inference import ClosedTestResult, closed_test_arrays, logrank_batch
from .power_engine import DEGENERATE_TOL, StageCounts, Variant
from .stat_core import DomainError, RngStream, norm_sf, z_upper


@dataclass(frozen=True)
class Scenario:
    """Data-generating truth.  Hazard ratios are treatment/control."""

    hr_F: float = 1.0
    hr_S: float = 1.0
    control_median: float = 14.0
    p_c_F: float = 0.2
    p_c_S: float = 0.2
    theta_F: float = 0.0
    theta_S: float = 0.0
    phi: float = 0.0
    rho: float = -0.6
    tau: float = 0.5
    # how hr_F splits into hr_S and the complement: "linear" or "log-linear" in tau
    complement_hr: str = "linear"

    def __post_init__(self):
        if self.complement_hr not in ("linear", "log-linear"):
            raise DomainError(f"complement_hr must be 'linear' or 'log-linear', got {self.complement_hr!r}")
        if not (self.hr_F > 0 and self.hr_S > 0 and self.control_median > 0):
            raise DomainError("hazard ratios and the control median must be positive")
        if not (0 < self.tau < 1):
            raise DomainError(f"tau must lie in (0, 1), got {self.tau}")
        if not abs(self.rho) < 1:
            raise DomainError(f"|rho| must be below 1, got {self.rho}")
        for name, p_c, theta in (("F", self.p_c_F, self.theta_F), ("S", self.p_c_S, self.theta_S),
                                 ("S^c", self.p_c_Sc, self.theta_Sc)):
            if not (0 <= p_c <= 1 and 0 <= p_c + theta <= 1):
                raise DomainError(f"response rates in {name} leave [0, 1]")
        if not self.hr_Sc > 0:
            raise DomainError(f"complement hazard ratio {self.hr_Sc:.4g} is not positive")

    @property
    def control_rate(self) -> float:
        return math.log(2.0) / self.control_median

    @property
    def hr_Sc(self) -> float:
        if self.complement_hr == "linear":
            # hr_F = tau hr_S + (1 - tau) hr_Sc
            return (self.hr_F - self.tau * self.hr_S) / (1 - self.tau)
        # log hr_F = tau log hr_S + (1 - tau) log hr_Sc
        return math.exp((math.log(self.hr_F) - self.tau * math.log(self.hr_S)) / (1 - self.tau))

    @property
    def theta_Sc(self) -> float:
        return (self.theta_F - self.tau * self.theta_S) / (1 - self.tau)

    @property
    def p_c_Sc(self) -> float:
        return (self.p_c_F - self.tau * self.p_c_S) / (1 - self.tau)

    def data_key(self) -> tuple:
        """Fields that shape patient data (``phi`` and ``rho`` do not)."""
        return (self.hr_F, self.hr_S, self.control_median, self.p_c_F, self.p_c_S,
                self.theta_F, self.theta_S, self.tau, self.complement_hr)


@dataclass(frozen=True)
class DesignSpec:
    alpha: float = 0.025
    power: float = 0.9
    d_interim: int = 40
    d_stage1: int = 60
    d_stage2: int = 100
    cap_multiplier: float = 1.4
    n_cohort1: int = 100
    n_cohort2: int = 200
    accrual1: float = 8.0
    accrual2: float = 15.0
    accrual_process: str = "uniform"  # or "poisson"
    enrichment_screening: str = "skip"  # or "dilute"
    thresholds: ZoneThresholds = field(default_factory=ZoneThresholds)
    variant: Variant = Variant.W1
    info_fraction: Optional[float] = None
    surrogate_source: str = "true"  # or "empirical"
    surrogate_noise_sd: float = 0.0
    cp_counts: str = "observed"  # or "planned"
    stage2_intersection: str = "selected"  # or "hochberg"

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant.parse(self.variant))
        if not (0 < self.alpha < 0.5 < self.power < 1):
            raise DomainError("need 0 < alpha < 0.5 < power < 1")
        if not (1 <= self.d_interim <= self.d_stage1 <= self.n_cohort1):
            raise DomainError("need 1 <= d_interim <= d_stage1 <= n_cohort1")
        if self.d_stage2 < 1 or self.n_cohort2 < 1:
            raise DomainError("stage 2 needs a positive event target and cohort size")
        if self.cap_incr < self.d_stage2:
            raise DomainError("cap multiplier leaves the cap below the planned increment")
        if not (self.accrual1 > 0 and self.accrual2 > 0):
            raise DomainError("accrual rates must be positive")
        if self.accrual_process not in ("uniform", "poisson"):
            raise DomainError(f"accrual_process must be uniform or poisson, got {self.accrual_process!r}")
        if self.enrichment_screening not in ("skip", "dilute"):
            raise DomainError("enrichment_screening must be skip or dilute")
        if self.surrogate_source not in ("true", "empirical"):
            raise DomainError("surrogate_source must be true or empirical")
        if self.surrogate_noise_sd < 0:
            raise DomainError("surrogate_noise_sd must be non-negative")
        if self.cp_counts not in ("planned", "observed"):
            raise DomainError("cp_counts must be planned or observed")
        if self.stage2_intersection not in ("selected", "hochberg"):
            raise DomainError("stage2_intersection must be selected or hochberg")
        if self.info_fraction is not None and not (0 < self.info_fraction <= 1):
            raise DomainError("info_fraction must lie in (0, 1]")

    @property
    def d_total(self) -> int:
        return self.d_stage1 + self.d_stage2

    @property
    def planned(self) -> StageCounts:
        return StageCounts(self.d_stage1, self.d_total)

    @property
    def cap_incr(self) -> int:
        return default_cap_incr(self.d_total, self.d_stage1, self.cap_multiplier)


@dataclass(frozen=True)
class Arm:
    """One design evaluated on a shared batch of simulated patients."""

    variant: Variant
    phi: float
    rho: float
    futility: bool = True

    @property
    def label(self) -> str:
        base = self.variant.value if self.variant is Variant.NONE else (
            f"{self.variant.value}(phi={self.phi:g},rho={self.rho:g})")
        return base if self.futility else base + "/nofut"


# ---------------------------------------------------------------- raw draws

@dataclass
class RawDraws:
    """Every random number a batch of replications consumes, by role."""

    c1_u: np.ndarray  # (R, 3, N1): subgroup, surrogate response, accrual gap
    c1_e: np.ndarray  # (R, N1) unit exponentials
    c2_u: np.ndarray
    c2_e: np.ndarray
    eps: np.ndarray  # (R, 4): prediction F, prediction S, observation F, observation S


def draw_raw(seed: int, stream_ids: Sequence[int], n1: int, n2: int) -> RawDraws:
    R = len(stream_ids)
    c1_u, c1_e = np.empty((R, 3, n1)), np.empty((R, n1))
    c2_u, c2_e = np.empty((R, 3, n2)), np.empty((R, n2))
    eps = np.empty((R, 4))
    for i, sid in enumerate(stream_ids):
        g = RngStream(seed, int(sid)).generator
        c1_u[i] = g.random((3, n1))
        c1_e[i] = g.standard_exponential(n1)
        c2_u[i] = g.random((3, n2))
        c2_e[i] = g.standard_exponential(n2)
        eps[i] = g.standard_normal(4)
    return RawDraws(c1_u, c1_e, c2_u, c2_e, eps)


# ----------------------------------------------------------------- cohorts

@dataclass
class Cohort:
    """Subjects of one enrolment wave, as ``(R, N)`` arrays."""

    enroll: np.ndarray
    subgroup: np.ndarray
    arm: np.ndarray
    event_time: np.ndarray
    response: np.ndarray

    @property
    def calendar_event(self) -> np.ndarray:
        return self.enroll + self.event_time

    def row(self, i: int) -> dict:
        return {k: getattr(self, k)[i] for k in ("enroll", "subgroup", "arm", "event_time", "response")}


def _alternating_arms(subgroup: np.ndarray) -> np.ndarray:
    """1:1 allocation alternating within each subgroup, treatment first."""
    rank_in = np.cumsum(subgroup, axis=1) - 1
    rank_out = np.cumsum(~subgroup, axis=1) - 1
    rank = np.where(subgroup, rank_in, rank_out)
    return (rank % 2 == 0).astype(np.int8)


def build_cohort(u: np.ndarray, e: np.ndarray, start, accrual_rate: float, scenario: Scenario,
                 subgroup_only: bool = False, poisson: bool = False) -> Cohort:
    """Turn uniforms ``u`` (R, 3, N) and unit exponentials ``e`` into subjects."""
    R, _, N = u.shape
    start = np.broadcast_to(np.asarray(start, dtype=float), (R,))
    if poisson:
        gaps = -np.log1p(-u[:, 2, :]) / accrual_rate
    else:
        gaps = np.full((R, N), 1.0 / accrual_rate)
    enroll = start[:, None] + np.cumsum(gaps, axis=1)
    subgroup = np.ones((R, N), dtype=bool) if subgroup_only else u[:, 0, :] < scenario.tau
    arm = _alternating_arms(subgroup)
    hr = np.where(subgroup, scenario.hr_S, scenario.hr_Sc)
    rate = scenario.control_rate * np.where(arm == 1, hr, 1.0)
    p_resp = np.where(subgroup, scenario.p_c_S, scenario.p_c_Sc) + arm * np.where(
        subgroup, scenario.theta_S, scenario.theta_Sc)
    return Cohort(enroll, subgroup, arm, e / rate, (u[:, 1, :] < p_resp).astype(np.int8))


def generate_cohort(rng: RngStream, size: int, accrual_rate: float, scenario: Scenario,
                    stage: int = 1, start: float = 0.0, subgroup_only: bool = False,
                    poisson: bool = False) -> Cohort:
    """Draw one cohort from ``rng`` (a single replication, rows of length ``size``).

    ``stage`` only labels the wave; stage 2 normally passes ``start`` (the
    interim time) and, after enrichment, ``subgroup_only=True``.
    """
    if size < 1 or not accrual_rate > 0:
        raise DomainError("cohort size must be >= 1 and the accrual rate positive")
    if stage not in (1, 2):
        raise DomainError(f"stage must be 1 or 2, got {stage}")
    u = rng.generator.random((1, 3, size))
    e = rng.generator.standard_exponential((1, size))
    return build_cohort(u, e, start, accrual_rate, scenario, subgroup_only, poisson)


def draw_predicted_statistic(rng_or_eps, scenario: Scenario, population: str, events,
                             theta_hat, phi: Optional[float] = None, rho: Optional[float] = None):
    """Surrogate-predicted log-rank statistic (log-rank sign convention).

    Normal with mean ``log(hr) * sqrt(m / 4) + rho * (theta_hat + phi - theta)``
    and variance ``1 - rho^2``.  ``rng_or_eps`` is an :class:`RngStream`
    or pre-drawn standard normals.  Negate the result for the oriented scale.
    """
    phi = scenario.phi if phi is None else phi
    rho = scenario.rho if rho is None else rho
    if not abs(rho) < 1:
        raise DomainError(f"|rho| must be below 1, got {rho}")
    if np.any(np.asarray(events) < 1):
        raise DomainError("events at the interim must be >= 1")
    hr, theta = (scenario.hr_F, scenario.theta_F) if population == "F" else (scenario.hr_S, scenario.theta_S)
    mean = math.log(hr) * np.sqrt(np.asarray(events, dtype=float) / 4.0) + rho * (
        np.asarray(theta_hat) + phi - theta)
    eps = rng_or_eps.generator.standard_normal(np.shape(mean)) if isinstance(rng_or_eps, RngStream) else rng_or_eps
    out = mean + math.sqrt(1.0 - rho * rho) * np.asarray(eps)
    return float(out) if np.ndim(out) == 0 else out


# ------------------------------------------------------------------ engine

def _kth_smallest(values: np.ndarray, k) -> np.ndarray:
    """k-th smallest entry per row (1-based); ``k`` may vary by row."""
    srt = np.sort(values, axis=1)
    k = np.clip(np.broadcast_to(np.asarray(k), (values.shape[0],)), 1, values.shape[1])
    return srt[np.arange(values.shape[0]), k - 1]


@dataclass
class BatchOutcome:
    """Per-replication results of one arm, aligned with ``stream_ids``."""

    arm: Arm
    stream_ids: np.ndarray
    zone: np.ndarray
    n2_incr: np.ndarray
    cp_F: np.ndarray
    cp_S: np.ndarray
    fallback: np.ndarray
    z_elem: np.ndarray
    z_inter: np.ndarray
    reject_elem: np.ndarray
    reject_inter: np.ndarray
    duration: np.ndarray
    total_events: np.ndarray
    interim_time: np.ndarray
    z1_F: np.ndarray
    z1_S: np.ndarray
    z2_F: np.ndarray
    z2_S: np.ndarray
    zi_F: np.ndarray
    zi_S: np.ndarray

    @property
    def reject(self) -> np.ndarray:
        return self.reject_elem & self.reject_inter


@dataclass
class _Stage1:
    interim_time: np.ndarray
    zi_F: np.ndarray
    zi_S: np.ndarray
    m_F: np.ndarray
    m_S: np.ndarray
    theta_hat_F: np.ndarray
    theta_hat_S: np.ndarray
    fc_F: np.ndarray
    fc_S: np.ndarray
    stage1_time: np.ndarray
    z1_F: np.ndarray
    z1_S: np.ndarray


def _risk_difference(cohort: Cohort, member: np.ndarray) -> np.ndarray:
    def rate(arm):
        sel = member & (cohort.arm == arm)
        return np.sum(cohort.response * sel, axis=1) / np.maximum(sel.sum(axis=1), 1)
    return rate(1) - rate(0)


def _stage1(c1: Cohort, raw: RawDraws, scenario: Scenario, spec: DesignSpec) -> _Stage1:
    cal = c1.calendar_event
    t_int = _kth_smallest(cal, spec.d_interim)
    everyone = np.ones_like(c1.subgroup)
    zi_F, m_F = logrank_batch(c1.enroll, c1.event_time, c1.arm, everyone, t_int)
    zi_S, m_S = logrank_batch(c1.enroll, c1.event_time, c1.arm, c1.subgroup, t_int)

    if spec.surrogate_source == "empirical":
        enrolled = c1.enroll < t_int[:, None]
        th_F = _risk_difference(c1, enrolled)
        th_S = _risk_difference(c1, enrolled & c1.subgroup)
    else:
        th_F = np.full(len(t_int), scenario.theta_F)
        th_S = np.full(len(t_int), scenario.theta_S)
    th_F = th_F + spec.surrogate_noise_sd * raw.eps[:, 2]
    th_S = th_S + spec.surrogate_noise_sd * raw.eps[:, 3]

    # control CDF at the mean observed follow-up of control patients (W3 weight)
    follow = np.clip(np.minimum(c1.event_time, t_int[:, None] - c1.enroll), 0.0, None)
    ctrl = (c1.arm == 0) & (c1.enroll < t_int[:, None])

    def fc(member):
        sel = ctrl & member
        mean_fu = np.sum(follow * sel, axis=1) / np.maximum(sel.sum(axis=1), 1)
        return -np.expm1(-scenario.control_rate * mean_fu)

    t_s1 = _kth_smallest(cal, spec.d_stage1)
    z1_F, _ = logrank_batch(c1.enroll, c1.event_time, c1.arm, everyone, t_s1)
    z1_S, _ = logrank_batch(c1.enroll, c1.event_time, c1.arm, c1.subgroup, t_s1)
    return _Stage1(t_int, zi_F, zi_S, m_F, m_S, th_F, th_S, fc(everyone), fc(c1.subgroup),
                   t_s1, z1_F, z1_S)


def _decide_batch(s1: _Stage1, eps: np.ndarray, scenario: Scenario, spec: DesignSpec, arm: Arm):
    R = len(s1.zi_F)
    # an undefined interim statistic (no events or no variance) counts as no signal
    zi_F = np.nan_to_num(s1.zi_F, nan=0.0)
    zi_S = np.nan_to_num(s1.zi_S, nan=0.0)
    if spec.cp_counts == "observed":
        n1_F = np.maximum(s1.m_F, 1).astype(float)
        n1_S = np.maximum(s1.m_S, 1).astype(float)
    else:
        n1_F = n1_S = np.full(R, float(spec.d_stage1))
    if spec.info_fraction is None:
        t_F = n1_F / (n1_F + spec.d_stage2)
        t_S = n1_S / (n1_S + spec.d_stage2)
    else:
        t_F = t_S = np.full(R, spec.info_fraction)
    sc = replace(scenario, phi=arm.phi, rho=arm.rho)
    if arm.variant is Variant.NONE:
        drift_F, drift_S = zi_F, zi_S
        fallback = np.zeros(R, dtype=bool)
    else:
        f_F = -draw_predicted_statistic(eps[:, 0], sc, "F", np.maximum(s1.m_F, 1), s1.theta_hat_F)
        f_S = -draw_predicted_statistic(eps[:, 1], sc, "S", np.maximum(s1.m_S, 1), s1.theta_hat_S)
        drift_F, fb_F = _drift_rows(arm.variant, zi_F, f_F, t_F, s1.fc_F)
        drift_S, fb_S = _drift_rows(arm.variant, zi_S, f_S, t_S, s1.fc_S)
        fallback = fb_F | fb_S
    cp_F = _cp_rows(zi_F, drift_F, n1_F, spec, spec.d_stage2)
    cp_S = _cp_rows(zi_S, drift_S, n1_S, spec, spec.d_stage2)
    cp_S = np.where(s1.m_S > 0, cp_S, 0.0)
    th = replace(spec.thresholds, futility=spec.thresholds.futility and arm.futility)
    zone = classify_zones(cp_F, cp_S, th)

    promising = zone == Zone.PROMISING
    z_sel = np.where(promising, zi_F, zi_S)
    d_sel = np.where(promising, drift_F, drift_S)
    n1_sel = np.where(promising, n1_F, n1_S)

    def cp_fn(incr):
        return _cp_rows(z_sel, d_sel, n1_sel, spec, incr)

    ssr = reestimate_events_batch(cp_fn, spec.d_stage2, spec.cap_incr, spec.power, R)
    adapt = promising | (zone == Zone.ENRICHMENT)
    n2 = np.where(adapt, ssr, spec.d_stage2)
    n2 = np.where(zone == Zone.FUTILITY, 0, n2)
    return zone, n2, cp_F, cp_S, fallback


def _drift_rows(variant: Variant, z1, f, t, fc):
    """Blended drift with per-row weights; W2/W3 fall back to W1 where undefined."""
    w1 = z1 * t + f * (1.0 - t)
    if variant is Variant.W1:
        return w1, np.zeros(len(z1), dtype=bool)
    weight = t if variant is Variant.W2 else fc
    denom = z1 * (1.0 - weight) + f * weight
    bad = (np.abs(denom) <= DEGENERATE_TOL) | (z1 * f <= 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        harmonic = z1 * f / np.where(bad, 1.0, denom)
    return np.where(bad, w1, harmonic), bad


def _cp_rows(z1, drift, n1, spec: DesignSpec, incr):
    """Conditional power with a per-row first-stage count ``n1``.

    The planned total is ``n1 + d_stage2``: the interim information plus the
    planned second-stage increment.
    """
    n2 = n1 + spec.d_stage2
    first = (z_upper(spec.alpha) * np.sqrt(n2) - z1 * np.sqrt(n1)) / np.sqrt(incr)
    return norm_sf(first - drift * np.sqrt(incr / n1))


def _stage2(rows: np.ndarray, cohort: Cohort, n2: np.ndarray, need_F: bool):
    """Final cut and stage-2 statistics for the given rows of ``cohort``."""
    enroll, event_time = cohort.enroll[rows], cohort.event_time[rows]
    arm, sub = cohort.arm[rows], cohort.subgroup[rows]
    cut = _kth_smallest(enroll + event_time, n2[rows])
    z_S, _ = logrank_batch(enroll, event_time, arm, sub, cut)
    if need_F:
        z_F, _ = logrank_batch(enroll, event_time, arm, np.ones_like(sub), cut)
    else:
        z_F = np.full(len(rows), np.nan)
    return cut, z_F, z_S


def simulate_batch(scenario: Scenario, spec: DesignSpec, seed: int, stream_ids: Sequence[int],
                   arms: Optional[Sequence[Arm]] = None) -> list[BatchOutcome]:
    """Simulate replications ``stream_ids`` once and evaluate every arm on them."""
    stream_ids = np.asarray(stream_ids, dtype=np.uint64)
    if arms is None:
        arms = [Arm(spec.variant, scenario.phi, scenario.rho, spec.thresholds.futility)]
    raw = draw_raw(seed, stream_ids, spec.n_cohort1, spec.n_cohort2)
    poisson = spec.accrual_process == "poisson"
    c1 = build_cohort(raw.c1_u, raw.c1_e, 0.0, spec.accrual1, scenario, poisson=poisson)
    s1 = _stage1(c1, raw, scenario, spec)

    c2_full = build_cohort(raw.c2_u, raw.c2_e, s1.interim_time, spec.accrual2, scenario,
                           poisson=poisson)
    rate_enr = spec.accrual2 * (scenario.tau if spec.enrichment_screening == "dilute" else 1.0)
    c2_enr = build_cohort(raw.c2_u, raw.c2_e, s1.interim_time, rate_enr, scenario,
                          subgroup_only=True, poisson=poisson)

    R = len(stream_ids)
    out = []
    for arm in arms:
        zone, n2, cp_F, cp_S, fallback = _decide_batch(s1, raw.eps, scenario, spec, arm)
        enriched = zone == Zone.ENRICHMENT
        stopped = zone == Zone.FUTILITY
        full = ~enriched & ~stopped
        cut = np.full(R, np.nan)
        z2_F = np.full(R, np.nan)
        z2_S = np.full(R, np.nan)
        for mask, cohort, need_F in ((full, c2_full, True), (enriched, c2_enr, False)):
            rows = np.flatnonzero(mask)
            if rows.size:
                cut[rows], z2_F[rows], z2_S[rows] = _stage2(rows, cohort, n2, need_F)
        # the cut sits on the n2-th event of the selected population, or after all of them
        d2 = np.minimum(n2, spec.n_cohort2)
        z_e, z_i, r_e, r_i = closed_test_arrays(
            np.nan_to_num(s1.z1_F), np.nan_to_num(s1.z1_S),
            np.nan_to_num(z2_F), np.nan_to_num(z2_S), enriched, spec.planned, spec.alpha,
            spec.stage2_intersection)
        r_e &= ~stopped
        r_i &= ~stopped
        duration = np.where(stopped, s1.interim_time, np.fmax(cut, s1.stage1_time))
        total = np.where(stopped, spec.d_interim, spec.d_stage1 + d2)
        out.append(BatchOutcome(arm, stream_ids, zone, n2, cp_F, cp_S, fallback, z_e, z_i,
                                r_e, r_i, duration, total, s1.interim_time,
                                s1.z1_F, s1.z1_S, z2_F, z2_S, s1.zi_F, s1.zi_S))
    return out


@dataclass
class ReplicationOutcome:
    decision: InterimDecision
    test: ClosedTestResult
    duration: float
    total_events: int
    interim_time: float

    @property
    def zone(self) -> Zone:
        return self.decision.zone


def run_replication(rng: RngStream, scenario: Scenario, spec: DesignSpec) -> ReplicationOutcome:
    """One full trial for stream ``(rng.seed, rng.stream_id)``."""
    b = simulate_batch(scenario, spec, rng.seed, [rng.stream_id])[0]
    zone = Zone(int(b.zone[0]))
    decision = InterimDecision(zone, zone.population, int(b.n2_incr[0]), float(b.cp_F[0]),
                               float(b.cp_S[0]), fallback_F=bool(b.fallback[0]))
    test = ClosedTestResult(zone.population, float(b.z_elem[0]), float(b.z_inter[0]),
                            bool(b.reject_elem[0]), bool(b.reject_inter[0]))
    if zone is Zone.FUTILITY:
        test = ClosedTestResult("none")
    return ReplicationOutcome(decision, test, float(b.duration[0]), int(b.total_events[0]),
                              float(b.interim_time[0]))
