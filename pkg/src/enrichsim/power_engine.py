"""Conditional power, surrogate-modified conditional power and event sizing.

All statistics here are *oriented*: larger values mean a better treatment
effect.  A log-rank statistic (treatment O - E over sqrt(V)) is negative when
the treatment works, so it is negated before it enters these functions.
Information is measured in events throughout.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .stat_core import DomainError, norm_cdf, norm_quantile, norm_sf, z_upper

DEGENERATE_TOL = 1e-9


class Variant(str, enum.Enum):
    """How the surrogate prediction enters the conditional power."""

    NONE = "none"
    W1 = "W1"  # information-weighted average
    W2 = "W2"  # harmonic blend weighted by t
    W3 = "W3"  # harmonic blend weighted by the control CDF

    @classmethod
    def parse(cls, value) -> "Variant":
        if isinstance(value, cls):
            return value
        key = str(value).strip()
        for v in cls:
            if v.value.lower() == key.lower():
                return v
        raise DomainError(f"unknown MCP variant {value!r}; expected one of none, W1, W2, W3")


class DegenerateWeightError(ArithmeticError):
    """The harmonic blend of W2/W3 is undefined for the given inputs."""


@dataclass(frozen=True)
class HistoricalModel:
    """Linear map from an observed surrogate effect to a predicted statistic.

    ``logrank_convention`` says the fitted model predicts log-rank
    statistics (negative = benefit); predictions are negated on output so
    callers always receive oriented values.
    """

    intercept: float = 0.0
    slope: float = 0.0
    logrank_convention: bool = True

    def predict(self, theta_hat: float) -> float:
        return self.intercept + self.slope * theta_hat


@dataclass(frozen=True)
class StageCounts:
    n1: float
    n2: float

    def __post_init__(self):
        if not (0 < self.n1 < self.n2):
            raise DomainError(f"need 0 < n1 < n2, got n1={self.n1}, n2={self.n2}")

    @property
    def n2_incr(self) -> float:
        return self.n2 - self.n1

    @property
    def t(self) -> float:
        return self.n1 / self.n2


@dataclass(frozen=True)
class SurrogateReadout:
    theta_hat: float
    population: str = "F"

    def __post_init__(self):
        if not (-1.0 <= self.theta_hat <= 1.0):
            raise DomainError(f"risk difference must lie in [-1, 1], got {self.theta_hat}")
        if self.population not in ("F", "S"):
            raise DomainError(f"population must be 'F' or 'S', got {self.population!r}")


@dataclass(frozen=True)
class InfoFraction:
    t: float
    fc_t: Optional[float] = None

    def __post_init__(self):
        if not (0 < self.t <= 1):
            raise DomainError(f"information fraction must lie in (0, 1], got {self.t}")
        if self.fc_t is not None and not (0 <= self.fc_t <= 1):
            raise DomainError(f"control CDF value must lie in [0, 1], got {self.fc_t}")


def _cp_from_drift(z1, drift, counts: StageCounts, alpha: float, n2_incr_actual):
    if not (0 < alpha < 0.5):
        raise DomainError(f"alpha must lie in (0, 0.5), got {alpha}")
    inc = np.asarray(n2_incr_actual, dtype=float)
    if np.any(inc <= 0):
        raise DomainError("second-stage information must be positive")
    z1 = np.asarray(z1, dtype=float)
    first = (z_upper(alpha) * math.sqrt(counts.n2) - z1 * math.sqrt(counts.n1)) / np.sqrt(inc)
    arg = first - np.asarray(drift, dtype=float) * np.sqrt(inc / counts.n1)
    return norm_sf(arg)


def conditional_power(z1, counts: StageCounts, alpha: float, n2_incr_actual=None):
    """Probability of final success given the interim statistic ``z1``.

    ``n2_incr_actual`` defaults to the planned increment.  Works elementwise
    on arrays of ``z1`` and/or increments.
    """
    if n2_incr_actual is None:
        n2_incr_actual = counts.n2_incr
    return _cp_from_drift(z1, z1, counts, alpha, n2_incr_actual)


def predict_statistic(model: HistoricalModel, surrogate: SurrogateReadout | float) -> float:
    theta = surrogate.theta_hat if isinstance(surrogate, SurrogateReadout) else float(surrogate)
    value = model.predict(theta)
    return -value if model.logrank_convention else value


def blended_drift(variant: Variant, z1, predicted, info: InfoFraction):
    """Drift estimate that replaces ``z1`` in the conditional power.

    Returns ``(drift, fallback)`` where ``fallback`` flags entries for which
    the harmonic W2/W3 blend was undefined (near-zero denominator or ``z1``
    and the prediction of opposite sign) and W1 was used instead.  Arrays
    are handled elementwise.
    """
    variant = Variant.parse(variant)
    z1 = np.asarray(z1, dtype=float)
    f = np.asarray(predicted, dtype=float)
    t = info.t
    w1 = z1 * t + f * (1.0 - t)
    if variant is Variant.NONE:
        return z1 + 0.0 * f, np.zeros(np.broadcast(z1, f).shape, dtype=bool)
    if variant is Variant.W1:
        return w1, np.zeros(w1.shape, dtype=bool)
    if variant is Variant.W2:
        weight = t
    else:
        if info.fc_t is None:
            raise DomainError("W3 needs the control CDF value fc_t")
        weight = info.fc_t
    denom = z1 * (1.0 - weight) + f * weight
    bad = (np.abs(denom) <= DEGENERATE_TOL) | (z1 * f <= 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        harmonic = z1 * f / np.where(bad, 1.0, denom)
    return np.where(bad, w1, harmonic), bad


def modified_cp(variant, z1: float, predicted: float, info: InfoFraction,
                counts: StageCounts, alpha: float, n2_incr_actual=None) -> float:
    """Conditional power with the drift blended with a surrogate prediction.

    Raises :class:`DegenerateWeightError` when a W2/W3 blend is undefined;
    use :func:`blended_drift` to get the W1 fallback instead.
    """
    drift, bad = blended_drift(variant, z1, predicted, info)
    if np.any(bad):
        raise DegenerateWeightError(
            f"{Variant.parse(variant).value} blend undefined for z1={z1}, predicted={predicted}")
    if n2_incr_actual is None:
        n2_incr_actual = counts.n2_incr
    return _cp_from_drift(z1, drift, counts, alpha, n2_incr_actual)


def schoenfeld_events(hr_alt: float, alpha: float, power: float,
                      allocation: float = 1.0, hr_margin: float = 1.0) -> float:
    """Unrounded Schoenfeld event count for a one-sided log-rank test."""
    if not (0 < hr_alt < hr_margin <= 1):
        raise DomainError(f"need 0 < hr_alt < hr_margin <= 1, got {hr_alt}, {hr_margin}")
    if not (0 < alpha < 0.5 < power < 1):
        raise DomainError("need 0 < alpha < 0.5 < power < 1")
    if not allocation > 0:
        raise DomainError("allocation ratio must be positive")
    r = allocation
    zsum = z_upper(alpha) + norm_quantile(power)
    return (1 + r) ** 2 / r * zsum ** 2 / math.log(hr_alt / hr_margin) ** 2


def required_events(hr_alt: float, alpha: float, power: float,
                    allocation: float = 1.0, hr_margin: float = 1.0) -> int:
    return math.ceil(schoenfeld_events(hr_alt, alpha, power, allocation, hr_margin) - 1e-9)


def ve_from_hr(hr: float) -> float:
    """Vaccine efficacy in percent."""
    if not hr > 0:
        raise DomainError(f"hazard ratio must be positive, got {hr}")
    return 100.0 * (1.0 - hr)


def hr_from_ve(ve_percent: float) -> float:
    if not ve_percent < 100:
        raise DomainError(f"VE must be below 100%, got {ve_percent}")
    return 1.0 - ve_percent / 100.0


def binomial_case_split(ve_alt: float, ve_margin: float, alpha_two_sided: float,
                        power: float, allocation: float = 1.0) -> dict:
    """Total cases for a case-driven vaccine trial, two normal approximations.

    Conditional on the total number of cases, the vaccine share is binomial
    with ``p = r*hr / (1 + r*hr)``.  ``wald`` uses the variance under the
    alternative only; ``score`` uses the margin variance for the critical
    value and the alternative variance for power.
    """
    hr_alt, hr_margin = hr_from_ve(ve_alt), hr_from_ve(ve_margin)
    if not hr_alt < hr_margin:
        raise DomainError("alternative VE must exceed the margin")
    r = allocation
    p1 = r * hr_alt / (1 + r * hr_alt)
    p0 = r * hr_margin / (1 + r * hr_margin)
    za = norm_quantile(1 - alpha_two_sided / 2)
    zb = norm_quantile(power)
    wald = (za + zb) ** 2 * p1 * (1 - p1) / (p0 - p1) ** 2
    score = (za * math.sqrt(p0 * (1 - p0)) + zb * math.sqrt(p1 * (1 - p1))) ** 2 / (p0 - p1) ** 2
    return {
        "p_vaccine_alt": p1,
        "p_vaccine_margin": p0,
        "wald": math.ceil(wald),
        "score": math.ceil(score),
        "schoenfeld": required_events(hr_alt, alpha_two_sided / 2, power, r, hr_margin),
    }


def theoretical_stage_covariance(n_treat1: float, n_ctrl1: float, n_treat2: float, n_ctrl2: float,
                                 tau: float, var_treat_F: float = 1.0, var_ctrl_F: float = 1.0,
                                 var_treat_S: Optional[float] = None,
                                 var_ctrl_S: Optional[float] = None) -> np.ndarray:
    """Correlation matrix of (Z1_S, Z1_F, Z2_S, Z2_F).

    ``n_*j`` are cumulative full-population counts per arm at stage ``j``;
    the subgroup holds a fraction ``tau`` of each.  Subgroup variances
    default to the full-population ones.
    """
    if not (0 < tau <= 1):
        raise DomainError(f"subgroup prevalence must lie in (0, 1], got {tau}")
    counts = (n_treat1, n_ctrl1, n_treat2, n_ctrl2)
    if min(counts) <= 0 or n_treat2 < n_treat1 or n_ctrl2 < n_ctrl1:
        raise DomainError("counts must be positive and cumulative")
    vt_S = var_treat_F if var_treat_S is None else var_treat_S
    vc_S = var_ctrl_F if var_ctrl_S is None else var_ctrl_S
    if min(var_treat_F, var_ctrl_F, vt_S, vc_S) <= 0:
        raise DomainError("variances must be positive")

    def pooled_F(j):
        nt, nc = (n_treat1, n_ctrl1) if j == 1 else (n_treat2, n_ctrl2)
        return math.sqrt(var_treat_F / nt + var_ctrl_F / nc)

    def pooled_S(j):
        nt, nc = (n_treat1, n_ctrl1) if j == 1 else (n_treat2, n_ctrl2)
        return math.sqrt(vt_S / (tau * nt) + vc_S / (tau * nc))

    def cross(j_s, j_f):
        # covariance of the two mean differences is driven by the later stage
        nt, nc = (n_treat1, n_ctrl1) if max(j_s, j_f) == 1 else (n_treat2, n_ctrl2)
        return (var_ctrl_F / nc + var_treat_F / nt) / (pooled_S(j_s) * pooled_F(j_f))

    def within(pooled, j, k):
        # independent increments: corr(Z_j, Z_k) = sd_late / sd_early
        return pooled(max(j, k)) / pooled(min(j, k))

    order = [("S", 1), ("F", 1), ("S", 2), ("F", 2)]
    mat = np.eye(4)
    for a in range(4):
        for b in range(a + 1, 4):
            (pa, ja), (pb, jb) = order[a], order[b]
            if pa == pb:
                val = within(pooled_S if pa == "S" else pooled_F, ja, jb)
            elif pa == "S":
                val = cross(ja, jb)
            else:
                val = cross(jb, ja)
            mat[a, b] = mat[b, a] = val
    return mat
