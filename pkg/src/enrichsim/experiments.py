"""Scenario-grid runner: operating characteristics of the enrichment design.

Replications are processed in fixed blocks of stream ids.  Each block is
simulated once and every design arm (MCP variant, offset, correlation,
futility setting) is evaluated on the same patients, so comparisons between
arms use common random numbers.  Block results are summed in block order,
which makes the aggregates independent of how many workers ran them.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from .decision_engine import Zone
from .power_engine import Variant
from .stat_core import DomainError
from .trial_sim import Arm, BatchOutcome, DesignSpec, Scenario, simulate_batch

log = logging.getLogger(__name__)

BLOCK = 2000

# alternative sets of the simulation study: (hr_F, hr_S, theta_F, theta_S)
TABLE2_SETS = {
    "a": (0.6, 0.6, 0.4, 0.4),
    "b": (0.7, 0.6, 0.2, 0.3),
    "c": (0.7, 0.7, 0.3, 0.3),
    "d": (0.8, 0.6, 0.2, 0.4),
}
PHIS = (0.2, 0.0, -0.2)
RHOS = (-0.3, -0.6, -0.9)

_ZONE_NAMES = tuple(z.name.lower() for z in Zone)


@dataclass(frozen=True)
class ScenarioGrid:
    """Scenarios to run, each evaluated under every variant in ``variants``.

    ``futility`` lists the futility settings to evaluate (both when
    ``(True, False)``).  The ``none`` variant ignores ``phi`` and ``rho``,
    so it is evaluated once per distinct patient-generating scenario.
    """

    entries: tuple[tuple[str, Scenario], ...]
    reps: int = 10_000
    variants: tuple[Variant, ...] = (Variant.NONE, Variant.W1)
    futility: tuple[bool, ...] = (True,)

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple((str(l), s) for l, s in self.entries))
        object.__setattr__(self, "variants", tuple(Variant.parse(v) for v in self.variants))
        object.__setattr__(self, "futility", tuple(bool(f) for f in self.futility))
        labels = [l for l, _ in self.entries]
        if len(set(labels)) != len(labels):
            raise DomainError("scenario labels must be unique")
        if not self.entries:
            raise DomainError("a grid needs at least one scenario")
        if self.reps < 1:
            raise DomainError("replications must be >= 1")
        if not self.variants or not self.futility:
            raise DomainError("a grid needs at least one variant and one futility setting")


def table2_grid(reps: int = 10_000, variants=(Variant.NONE, Variant.W1), sets: str = "abcd",
                futility=(True,)) -> ScenarioGrid:
    """Sets (a)-(d) crossed with the offsets and correlations: 36 scenarios."""
    entries = []
    for name in sets:
        hr_F, hr_S, th_F, th_S = TABLE2_SETS[name]
        for phi in PHIS:
            for rho in RHOS:
                sc = Scenario(hr_F=hr_F, hr_S=hr_S, theta_F=th_F, theta_S=th_S, phi=phi, rho=rho)
                entries.append((f"{name}/phi={phi:g}/rho={rho:g}", sc))
    return ScenarioGrid(tuple(entries), reps, tuple(variants), tuple(futility))


def null_grid(reps: int = 100_000, variants=(Variant.NONE, Variant.W1, Variant.W2, Variant.W3),
              futility=(False, True)) -> ScenarioGrid:
    entries = tuple((f"null/rho={rho:g}", Scenario(rho=rho)) for rho in RHOS)
    return ScenarioGrid(entries, reps, tuple(variants), tuple(futility))


# ------------------------------------------------------------ accumulation

@dataclass
class _Acc:
    """Additive per-arm sums; merging two blocks is plain addition."""

    n: int = 0
    zones: np.ndarray = field(default_factory=lambda: np.zeros(len(Zone), dtype=np.int64))
    reject: int = 0
    reject_elem: int = 0
    reject_inter: int = 0
    reject_F: int = 0
    reject_S: int = 0
    fallback: int = 0
    dur: float = 0.0
    dur2: float = 0.0
    evt: float = 0.0
    evt2: float = 0.0
    # paired differences against the reference arm (same replications)
    d_rej: int = 0
    d_rej2: int = 0
    d_evt: float = 0.0
    d_evt2: float = 0.0
    d_dur: float = 0.0
    d_dur2: float = 0.0

    def add(self, other: "_Acc") -> None:
        for k, v in vars(other).items():
            setattr(self, k, getattr(self, k) + v)


def _accumulate(b: BatchOutcome, ref: BatchOutcome) -> _Acc:
    rej = b.reject
    dr = rej.astype(np.int64) - ref.reject.astype(np.int64)
    de = b.total_events.astype(float) - ref.total_events
    dd = b.duration - ref.duration
    enriched = b.zone == Zone.ENRICHMENT
    return _Acc(
        n=len(rej),
        zones=np.bincount(b.zone, minlength=len(Zone)).astype(np.int64),
        reject=int(rej.sum()),
        reject_elem=int(b.reject_elem.sum()),
        reject_inter=int(b.reject_inter.sum()),
        reject_F=int((rej & ~enriched).sum()),
        reject_S=int((rej & enriched).sum()),
        fallback=int(b.fallback.sum()),
        dur=float(b.duration.sum()), dur2=float((b.duration ** 2).sum()),
        evt=float(b.total_events.sum()), evt2=float((b.total_events.astype(float) ** 2).sum()),
        d_rej=int(dr.sum()), d_rej2=int((dr ** 2).sum()),
        d_evt=float(de.sum()), d_evt2=float((de ** 2).sum()),
        d_dur=float(dd.sum()), d_dur2=float((dd ** 2).sum()),
    )


def _ref_arm(arm: Arm, reference: Variant) -> Arm:
    if reference is Variant.NONE:
        return Arm(Variant.NONE, 0.0, 0.0, arm.futility)
    return replace(arm, variant=reference)


def _canonical(arm: Arm) -> Arm:
    return Arm(Variant.NONE, 0.0, 0.0, arm.futility) if arm.variant is Variant.NONE else arm


def _run_block(scenario: Scenario, spec: DesignSpec, seed: int, start: int, stop: int,
               arms: tuple[Arm, ...], refs: tuple[int, ...]) -> list[_Acc]:
    res = simulate_batch(scenario, spec, seed, range(start, stop), arms)
    return [_accumulate(b, res[r]) for b, r in zip(res, refs)]


# ------------------------------------------------------------------ results

def _prop_se(p: float, n: int) -> float:
    return math.sqrt(max(p * (1.0 - p), 0.0) / n)


def _mean_se(s: float, s2: float, n: int) -> tuple[float, float]:
    m = s / n
    var = max(s2 / n - m * m, 0.0) * n / max(n - 1, 1)
    return m, math.sqrt(var / n)


@dataclass
class OperatingCharacteristics:
    """Monte Carlo summary of one (scenario, design arm)."""

    label: str
    variant: str
    phi: float
    rho: float
    futility: bool
    reps: int
    zone_freq: tuple[float, ...]
    zone_se: tuple[float, ...]
    power: float
    power_se: float
    reject_elementary: float
    reject_intersection: float
    reject_full: float
    reject_subgroup: float
    fallback_rate: float
    mean_duration: float
    duration_se: float
    mean_events: float
    events_se: float
    reference: str = "none"
    delta_power: float = 0.0
    delta_power_se: float = 0.0
    delta_events: float = 0.0
    delta_events_se: float = 0.0
    delta_duration: float = 0.0
    delta_duration_se: float = 0.0
    error: str = ""

    def zone(self, zone: Zone) -> float:
        return self.zone_freq[int(zone)]

    @classmethod
    def from_acc(cls, label: str, arm: Arm, acc: _Acc, reference: str) -> "OperatingCharacteristics":
        n = acc.n
        zf = tuple(float(c) / n for c in acc.zones)
        p = acc.reject / n
        dur, dur_se = _mean_se(acc.dur, acc.dur2, n)
        evt, evt_se = _mean_se(acc.evt, acc.evt2, n)
        dp, dp_se = _mean_se(acc.d_rej, acc.d_rej2, n)
        de, de_se = _mean_se(acc.d_evt, acc.d_evt2, n)
        dd, dd_se = _mean_se(acc.d_dur, acc.d_dur2, n)
        return cls(label, arm.variant.value, arm.phi, arm.rho, arm.futility, n, zf,
                   tuple(_prop_se(f, n) for f in zf), p, _prop_se(p, n),
                   acc.reject_elem / n, acc.reject_inter / n, acc.reject_F / n, acc.reject_S / n,
                   acc.fallback / n, dur, dur_se, evt, evt_se, reference,
                   dp, dp_se, de, de_se, dd, dd_se)

    @classmethod
    def failed(cls, label: str, arm: Arm, message: str) -> "OperatingCharacteristics":
        nan = float("nan")
        z = tuple([nan] * len(Zone))
        return cls(label, arm.variant.value, arm.phi, arm.rho, arm.futility, 0, z, z,
                   nan, nan, nan, nan, nan, nan, nan, nan, nan, nan, nan, error=message)


CSV_COLUMNS = (
    ["scenario", "variant", "phi", "rho", "futility", "reps"]
    + [f"zone_{z}" for z in _ZONE_NAMES] + [f"zone_{z}_se" for z in _ZONE_NAMES]
    + ["power", "power_se", "reject_elementary", "reject_intersection", "reject_full",
       "reject_subgroup", "fallback_rate", "mean_duration_months", "duration_se_months",
       "mean_events", "events_se", "reference", "delta_power", "delta_power_se",
       "delta_events", "delta_events_se", "delta_duration_months", "delta_duration_se_months",
       "error"]
)


def _fmt(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        return "nan" if math.isnan(x) else repr(round(x, 10))
    return str(x)


def oc_row(oc: OperatingCharacteristics) -> list[str]:
    vals = ([oc.label, oc.variant, oc.phi, oc.rho, oc.futility, oc.reps]
            + list(oc.zone_freq) + list(oc.zone_se)
            + [oc.power, oc.power_se, oc.reject_elementary, oc.reject_intersection,
               oc.reject_full, oc.reject_subgroup, oc.fallback_rate, oc.mean_duration,
               oc.duration_se, oc.mean_events, oc.events_se, oc.reference, oc.delta_power,
               oc.delta_power_se, oc.delta_events, oc.delta_events_se, oc.delta_duration,
               oc.delta_duration_se, oc.error])
    return [_fmt(v) for v in vals]


def write_csv(results: Sequence[OperatingCharacteristics], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, quoting=csv.QUOTE_MINIMAL, lineterminator="\r\n")
        w.writerow(CSV_COLUMNS)
        for oc in results:
            w.writerow(oc_row(oc))


def _jsonable(obj):
    if isinstance(obj, Variant):
        return obj.value
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


def run_config(grid: ScenarioGrid, spec: DesignSpec, seed: int) -> dict:
    return _jsonable({
        "seed": seed,
        "reps": grid.reps,
        "variants": list(grid.variants),
        "futility": list(grid.futility),
        "scenarios": [{"label": l, **asdict(s)} for l, s in grid.entries],
        "design": asdict(spec),
    })


def config_hash(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def write_sidecar(path, grid: ScenarioGrid, spec: DesignSpec, seed: int, extra: Optional[dict] = None):
    from . import __version__
    config = run_config(grid, spec, seed)
    doc = {"package_version": __version__, "config_sha256": config_hash(config),
           "columns": CSV_COLUMNS, "config": config}
    if extra:
        doc.update(extra)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


# ------------------------------------------------------------------ runner

def _plan(grid: ScenarioGrid, reference: Variant):
    """Group scenarios that generate identical patients and list their arms."""
    groups: dict[tuple, dict] = {}
    for label, sc in grid.entries:
        g = groups.setdefault(sc.data_key(), {"scenario": sc, "arms": [], "rows": []})
        for fut in grid.futility:
            for v in grid.variants:
                arm = _canonical(Arm(v, sc.phi, sc.rho, fut))
                for a in (arm, _canonical(_ref_arm(arm, reference))):
                    if a not in g["arms"]:
                        g["arms"].append(a)
                g["rows"].append((label, arm))
    return list(groups.values())


def _blocks(reps: int, block: int):
    return [(s, min(s + block, reps)) for s in range(0, reps, block)]


def _execute(grid: ScenarioGrid, spec: DesignSpec, seed: int, reference: Variant, threads: int,
             block: int, progress: Optional[Callable[[str], None]]) -> list[OperatingCharacteristics]:
    if threads < 1:
        raise DomainError("threads must be >= 1")
    plan = _plan(grid, reference)
    blocks = _blocks(grid.reps, block)
    pool = ProcessPoolExecutor(max_workers=threads) if threads > 1 else None
    results: dict[tuple, OperatingCharacteristics] = {}
    try:
        for gi, g in enumerate(plan):
            arms = tuple(g["arms"])
            refs = tuple(arms.index(_canonical(_ref_arm(a, reference))) for a in arms)
            sc = g["scenario"]
            try:
                if pool is None:
                    parts = [_run_block(sc, spec, seed, s, e, arms, refs) for s, e in blocks]
                else:
                    futs = [pool.submit(_run_block, sc, spec, seed, s, e, arms, refs) for s, e in blocks]
                    parts = [f.result() for f in futs]
                accs = [_Acc() for _ in arms]
                for part in parts:  # block order, whatever finished first
                    for acc, p in zip(accs, part):
                        acc.add(p)
                err = None
            except Exception as exc:  # one bad scenario must not sink the grid
                err = f"{type(exc).__name__}: {exc}"
                log.error("scenario group %d failed: %s", gi, err)
            for label, arm in g["rows"]:
                if err is None:
                    oc = OperatingCharacteristics.from_acc(label, arm, accs[arms.index(arm)],
                                                           reference.value)
                else:
                    oc = OperatingCharacteristics.failed(label, arm, err)
                results[(label, arm.variant, arm.futility)] = oc
            msg = f"[{gi + 1}/{len(plan)}] {len(g['rows'])} rows, {grid.reps} reps"
            log.info(msg)
            if progress:
                progress(msg)
    finally:
        if pool is not None:
            pool.shutdown()
    ordered = []
    for label, sc in grid.entries:
        for fut in grid.futility:
            for v in grid.variants:
                ordered.append(results[(label, v, fut)])
    return ordered


def run_grid(grid: ScenarioGrid, spec: DesignSpec, seed: int, threads: int = 1,
             block: int = BLOCK, progress: Optional[Callable[[str], None]] = None
             ) -> list[OperatingCharacteristics]:
    """Operating characteristics for every (scenario, variant, futility) of ``grid``.

    Rows come back in grid order.  Deltas are against the ``none`` variant
    under the same futility setting, paired on identical replications.
    """
    return _execute(grid, spec, seed, Variant.NONE, threads, block, progress)


def compare_variants(grid: ScenarioGrid, spec: DesignSpec, variants: Iterable, seed: int,
                     threads: int = 1, block: int = BLOCK,
                     progress: Optional[Callable[[str], None]] = None
                     ) -> list[OperatingCharacteristics]:
    """Paired comparison of MCP variants on common random numbers.

    Deltas are taken against ``none`` when it is among ``variants``,
    otherwise against the first variant listed.
    """
    variants = tuple(Variant.parse(v) for v in variants)
    if len(variants) < 2:
        raise DomainError("compare_variants needs at least two variants")
    reference = Variant.NONE if Variant.NONE in variants else variants[0]
    grid = replace(grid, variants=variants)
    return _execute(grid, spec, seed, reference, threads, block, progress)


def summary_table(results: Sequence[OperatingCharacteristics]) -> str:
    head = (f"{'scenario':<24} {'variant':<7} {'fut':<3} {'power':>7} {'+-se':>6} "
            f"{'events':>7} {'months':>7} " + " ".join(f"{z[:5]:>6}" for z in _ZONE_NAMES))
    lines = [head, "-" * len(head)]
    for oc in results:
        if oc.error:
            lines.append(f"{oc.label:<24} {oc.variant:<7} {'y' if oc.futility else 'n':<3} ERROR {oc.error}")
            continue
        lines.append(
            f"{oc.label:<24} {oc.variant:<7} {'y' if oc.futility else 'n':<3} {oc.power:7.4f} "
            f"{oc.power_se:6.4f} {oc.mean_events:7.1f} {oc.mean_duration:7.1f} "
            + " ".join(f"{f:6.3f}" for f in oc.zone_freq))
    lines.append("power = P(reject elementary and intersection nulls); events in events; "
                 "duration in months; zone columns are frequencies")
    return "\n".join(lines)


def by_key(results: Sequence[OperatingCharacteristics]) -> dict:
    out = defaultdict(dict)
    for oc in results:
        out[oc.label][(oc.variant, oc.futility)] = oc
    return dict(out)
