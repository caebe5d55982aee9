"""Stagewise log-rank statistics, CHW combination and closed testing.

Statistics are oriented (positive favours treatment) unless a name says
``logrank``.  Arm coding: 1 = treatment, 0 = control.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .power_engine import StageCounts
from .stat_core import P_CLAMP, DomainError, norm_quantile, norm_sf, z_upper


class UndefinedStatisticError(ArithmeticError):
    """The log-rank statistic has no events (or no variance) to work with."""


@dataclass(frozen=True)
class SurvivalSample:
    """Patient-level data analysed at calendar time ``cut``.

    ``event_time`` is measured from enrolment; ``np.inf`` means the subject
    never has the event.  Subjects enrolled at or after the cut are dropped.
    """

    arm: np.ndarray
    subgroup: np.ndarray
    enroll: np.ndarray
    event_time: np.ndarray
    cut: float = math.inf

    def __post_init__(self):
        n = len(self.arm)
        if not all(len(a) == n for a in (self.subgroup, self.enroll, self.event_time)):
            raise DomainError("all subject columns must have the same length")
        if np.any(np.asarray(self.event_time) < 0) or np.any(np.asarray(self.enroll) < 0):
            raise DomainError("times must be non-negative")

    def at(self, cut: float) -> "SurvivalSample":
        return SurvivalSample(self.arm, self.subgroup, self.enroll, self.event_time, cut)

    def observed(self, population: str = "F"):
        """Return ``(time, event, arm)`` for subjects in ``population`` at the cut."""
        enroll = np.asarray(self.enroll, dtype=float)
        keep = enroll < self.cut
        if population == "S":
            keep &= np.asarray(self.subgroup, dtype=bool)
        elif population != "F":
            raise DomainError(f"population must be 'F' or 'S', got {population!r}")
        follow = self.cut - enroll[keep]
        t_event = np.asarray(self.event_time, dtype=float)[keep]
        # isfinite guards the no-cut case, where inf <= inf would count as an event
        event = np.isfinite(t_event) & (t_event <= follow)
        time = np.where(event, t_event, follow)
        return time, event, np.asarray(self.arm)[keep].astype(int)


def load_survival_sample(path, cut: float = math.inf) -> SurvivalSample:
    """Read a delimited file with columns arm, subgroup, enroll_month, event_month.

    ``arm`` accepts 1/0 or treatment/control; ``subgroup`` accepts 1/0 or
    true/false; an empty or ``inf`` event_month means no event.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        sample = fh.read(2048)
        fh.seek(0)
        dialect = csv.Sniffer().sniff(sample, delimiters=",;\t ")
        reader = csv.DictReader(fh, dialect=dialect)
        required = {"arm", "subgroup", "enroll_month", "event_month"}
        missing = required - set(reader.fieldnames or ())
        if missing:
            raise DomainError(f"{path}: missing column(s) {sorted(missing)}")
        arm, sub, enroll, event = [], [], [], []
        for lineno, row in enumerate(reader, start=2):
            try:
                arm.append(_parse_flag(row["arm"], {"treatment": 1, "control": 0}))
                sub.append(_parse_flag(row["subgroup"], {"true": 1, "false": 0}))
                enroll.append(float(row["enroll_month"]))
                raw = (row["event_month"] or "").strip()
                event.append(math.inf if raw in ("", "inf", "NA") else float(raw))
            except (ValueError, KeyError) as exc:
                raise DomainError(f"{path}:{lineno}: {exc}") from None
    return SurvivalSample(np.array(arm), np.array(sub, dtype=bool), np.array(enroll),
                          np.array(event), cut)


def _parse_flag(raw: str, words: dict) -> int:
    key = raw.strip().lower()
    if key in words:
        return words[key]
    value = int(float(key))
    if value not in (0, 1):
        raise ValueError(f"expected 0/1, got {raw!r}")
    return value


def logrank_statistic(sample: SurvivalSample, population: str = "F") -> tuple[float, int]:
    """Oriented two-sample log-rank statistic and the number of events.

    Tied event times are grouped and use the hypergeometric variance
    ``d * n1 * n0 * (n - d) / (n^2 * (n - 1))``.
    """
    time, event, arm = sample.observed(population)
    n_events = int(event.sum())
    if n_events == 0:
        raise UndefinedStatisticError(f"no events in population {population}")
    o_minus_e = 0.0
    var = 0.0
    for u in np.unique(time[event]):
        at_risk = time >= u
        n = at_risk.sum()
        n1 = (at_risk & (arm == 1)).sum()
        here = event & (time == u)
        d = here.sum()
        d1 = (here & (arm == 1)).sum()
        o_minus_e += d1 - d * n1 / n
        if n > 1:
            var += d * n1 * (n - n1) * (n - d) / (n * n * (n - 1))
    if var <= 0:
        raise UndefinedStatisticError(f"log-rank variance is zero in population {population}")
    return -o_minus_e / math.sqrt(var), n_events


def logrank_batch(enroll: np.ndarray, event_time: np.ndarray, arm: np.ndarray,
                  member: np.ndarray, cut: np.ndarray):
    """Row-wise oriented log-rank statistics for many trials at once.

    Every argument except ``cut`` is ``(R, N)``; ``cut`` has one calendar
    time per row.  Assumes no tied event times within a row, which holds
    almost surely for continuous simulated data.  Returns ``(z, events)``
    with ``z = nan`` where the statistic is undefined.
    """
    cut = np.asarray(cut, dtype=float)[:, None]
    follow = cut - enroll
    valid = member & (follow > 0)
    event = valid & (event_time <= follow)
    time = np.where(valid, np.minimum(event_time, follow), np.inf)
    order = np.argsort(time, axis=1, kind="stable")
    valid = np.take_along_axis(valid, order, axis=1)
    event = np.take_along_axis(event, order, axis=1)
    treat = np.take_along_axis(arm, order, axis=1) == 1
    n = np.cumsum(valid[:, ::-1], axis=1)[:, ::-1].astype(float)
    n1 = np.cumsum((valid & treat)[:, ::-1], axis=1)[:, ::-1].astype(float)
    with np.errstate(divide="ignore", invalid="ignore"):
        share = np.where(event, n1 / n, 0.0)
        o_minus_e = np.sum(np.where(event, treat - share, 0.0), axis=1)
        var = np.sum(np.where(event, share * (1.0 - share), 0.0), axis=1)
        z = np.where(var > 0, -o_minus_e / np.sqrt(var), np.nan)
    return z, event.sum(axis=1)


def increment_statistic(z_cum, z1, d1, d2):
    """Statistic of the information accrued between ``d1`` and ``d2`` events."""
    d1 = np.asarray(d1, dtype=float)
    d2 = np.asarray(d2, dtype=float)
    if np.any(d1 < 1) or np.any(d2 <= d1):
        raise DomainError("need d2 > d1 >= 1")
    out = (np.asarray(z_cum) * np.sqrt(d2) - np.asarray(z1) * np.sqrt(d1)) / np.sqrt(d2 - d1)
    return float(out) if np.ndim(out) == 0 else out


def chw_weights(planned: StageCounts) -> tuple[float, float]:
    return math.sqrt(planned.n1 / planned.n2), math.sqrt(planned.n2_incr / planned.n2)


def chw_combine(z1, z2_incr, planned: StageCounts):
    """Cui-Hung-Wang statistic with weights fixed by the planned counts."""
    w1, w2 = chw_weights(planned)
    out = w1 * np.asarray(z1, dtype=float) + w2 * np.asarray(z2_incr, dtype=float)
    return float(out) if np.ndim(out) == 0 else out


def hochberg_intersection(z_F, z_S):
    """Statistic for the intersection null from two one-sided statistics.

    Equal-weight Hochberg: ``p = min(2 * min(p_F, p_S), max(p_F, p_S))``,
    mapped back to the z scale.  p is clamped to ``[1e-16, 1 - 1e-16]``.
    """
    z_F = np.asarray(z_F, dtype=float)
    z_S = np.asarray(z_S, dtype=float)
    hi, lo = np.maximum(z_F, z_S), np.minimum(z_F, z_S)
    p_min, p_max = norm_sf(hi), norm_sf(lo)
    # Phi^-1(1 - p) written as -Phi^-1(p) to keep precision for tiny p
    doubled = -norm_quantile(np.clip(2.0 * p_min, P_CLAMP, 1.0 - P_CLAMP))
    # the max-p branch stays on the z scale so no round trip loses digits
    z_lim = -norm_quantile(P_CLAMP)
    out = np.where(2.0 * p_min < p_max, doubled, np.clip(lo, -z_lim, z_lim))
    return float(out) if np.ndim(out) == 0 else out


@dataclass
class StageStatistics:
    """First-stage and incremental second-stage statistics.

    ``z2_F`` is ``None`` after enrichment: the full population is not
    followed in stage 2.
    """

    z1_S: float
    z1_F: float
    z2_S: float
    z2_F: Optional[float] = None
    d1_S: Optional[int] = None
    d1_F: Optional[int] = None
    d2_S: Optional[int] = None
    d2_F: Optional[int] = None

    @classmethod
    def from_cumulative(cls, z1_S, z1_F, zc_S, zc_F, d1_S, d1_F, d2_S, d2_F=None):
        """Build from cumulative second-look statistics via independent increments."""
        z2_S = increment_statistic(zc_S, z1_S, d1_S, d2_S)
        z2_F = None if zc_F is None else increment_statistic(zc_F, z1_F, d1_F, d2_F)
        return cls(z1_S, z1_F, z2_S, z2_F, d1_S, d1_F, d2_S, d2_F)


@dataclass
class ClosedTestResult:
    tested_population: str
    z_chw_elementary: float = float("nan")
    z_chw_intersection: float = float("nan")
    reject_elementary: bool = False
    reject_intersection: bool = False

    @property
    def reject_overall(self) -> bool:
        return self.reject_elementary and self.reject_intersection


def closed_test_arrays(z1_F, z1_S, z2_F, z2_S, enriched, planned: StageCounts, alpha: float,
                       stage2_intersection: str = "selected"):
    """Vectorised closed test; ``z2_F`` is ignored on enriched rows.

    ``stage2_intersection`` picks the stage-2 intersection statistic when the
    full population continues: ``"hochberg"`` combines both stage-2
    statistics, ``"selected"`` uses the selected population's statistic
    only.  After enrichment the subgroup statistic is always used.
    Returns ``(z_elem, z_inter, reject_elem, reject_inter)``.
    """
    if stage2_intersection not in ("hochberg", "selected"):
        raise DomainError(f"unknown stage-2 intersection rule {stage2_intersection!r}")
    enriched = np.asarray(enriched, dtype=bool)
    z2_F = np.where(enriched, 0.0, np.nan_to_num(np.asarray(z2_F, dtype=float)))
    z1_inter = hochberg_intersection(z1_F, z1_S)
    z2_full = hochberg_intersection(z2_F, z2_S) if stage2_intersection == "hochberg" else z2_F
    z2_inter = np.where(enriched, z2_S, z2_full)
    z_elem = np.where(enriched, chw_combine(z1_S, z2_S, planned), chw_combine(z1_F, z2_F, planned))
    z_inter = chw_combine(z1_inter, z2_inter, planned)
    crit = z_upper(alpha)
    return z_elem, z_inter, z_elem > crit, z_inter > crit


def closed_test(stats: StageStatistics, selected_population: str, planned: StageCounts,
                alpha: float = 0.025, stage2_intersection: str = "selected") -> ClosedTestResult:
    """Closed test of the elementary null in the selected population.

    ``selected_population`` is ``"F"``, ``"S"`` (enrichment) or ``"none"``
    (futility stop, nothing is rejected).
    """
    if selected_population == "none":
        return ClosedTestResult("none")
    if selected_population == "S":
        if stats.z2_F is not None:
            raise DomainError("full-population stage-2 statistic present after enrichment")
        z2_F = 0.0
    elif selected_population == "F":
        if stats.z2_F is None:
            raise DomainError("full population selected but its stage-2 statistic is missing")
        z2_F = stats.z2_F
    else:
        raise DomainError(f"unknown population {selected_population!r}")
    values = [stats.z1_F, stats.z1_S, z2_F, stats.z2_S]
    if not all(math.isfinite(v) for v in values):
        raise DomainError("stage statistics must be finite")
    z_e, z_i, r_e, r_i = closed_test_arrays(*values, selected_population == "S", planned, alpha,
                                            stage2_intersection)
    return ClosedTestResult(selected_population, float(z_e), float(z_i), bool(r_e), bool(r_i))
