"""Structured-text configuration files.

INI syntax with dotted section names::

    [run]                 seed, reps, threads, grid, sets, variants, futility
    [design]              DesignSpec fields
    [design.thresholds]   ZoneThresholds fields
    [scenario]            one Scenario (or [scenario.<label>] for several)
    [interim]             observed interim values for ``decide``
    [historical]          linear surrogate model for ``decide``

Keys are case-sensitive.  Unknown sections or keys, unparsable values and
domain violations raise :class:`ConfigError` naming the file, line,
section and key.
"""

from __future__ import annotations

import configparser
import dataclasses
import io
import math
import re
from dataclasses import dataclass, field, fields
from typing import Optional

from .decision_engine import ZoneThresholds
from .power_engine import Variant
from .stat_core import DomainError
from .trial_sim import DesignSpec, Scenario


class ConfigError(DomainError):
    """A configuration problem, located to a line where possible."""


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _opt_float(text: str) -> Optional[float]:
    return None if text.strip().lower() in ("", "auto", "none") else float(text)


def _opt_int(text: str) -> Optional[int]:
    return None if text.strip().lower() in ("", "auto", "none") else int(text)


def _bools(text: str) -> tuple[bool, ...]:
    return tuple(_bool(t) for t in text.split(",") if t.strip())


def _variants(text: str) -> tuple[Variant, ...]:
    return tuple(Variant.parse(t) for t in text.split(",") if t.strip())


@dataclass(frozen=True)
class Key:
    parse: object
    help: str


@dataclass
class RunSettings:
    seed: Optional[int] = None
    reps: int = 10_000
    threads: int = 1
    grid: str = "custom"  # custom | table2 | null
    sets: str = "abcd"
    variants: tuple[Variant, ...] = (Variant.NONE, Variant.W1)
    futility: tuple[bool, ...] = (True,)


@dataclass
class InterimInputs:
    """Observed interim values for a one-shot decision."""

    z_F: float
    z_S: float
    events_F: int
    events_S: int
    convention: str = "logrank"  # logrank: negative favours treatment; oriented: positive does
    surrogate_F: Optional[float] = None
    surrogate_S: Optional[float] = None
    predicted_F: Optional[float] = None
    predicted_S: Optional[float] = None
    planned_increment: Optional[int] = None
    cap_increment: Optional[int] = None
    info_fraction: Optional[float] = None
    fc_F: Optional[float] = None
    fc_S: Optional[float] = None


@dataclass
class HistoricalSettings:
    intercept: float = 0.0
    slope: float = 0.0
    logrank_convention: bool = True


SCHEMA: dict[str, dict[str, Key]] = {
    "run": {
        "seed": Key(_opt_int, "master seed (flag --seed and ENRICHSIM_SEED take precedence)"),
        "reps": Key(int, "replications per scenario"),
        "threads": Key(int, "worker processes"),
        "grid": Key(str, "custom (the [scenario] sections), table2 or null"),
        "sets": Key(str, "table2 grid: which of the sets a-d to include"),
        "variants": Key(_variants, "comma list of MCP variants: none, W1, W2, W3"),
        "futility": Key(_bools, "comma list of futility settings to evaluate"),
    },
    "design": {
        "alpha": Key(float, "one-sided significance level"),
        "power": Key(float, "target (conditional) power 1 - beta"),
        "d_interim": Key(int, "events triggering the interim look (events)"),
        "d_stage1": Key(int, "cohort-1 events counted in stage 1 (events)"),
        "d_stage2": Key(int, "planned stage-2 events (events)"),
        "cap_multiplier": Key(float, "cap on total events as a multiple of d_stage1 + d_stage2"),
        "n_cohort1": Key(int, "cohort-1 size (patients)"),
        "n_cohort2": Key(int, "cohort-2 size (patients)"),
        "accrual1": Key(float, "cohort-1 accrual (patients per month)"),
        "accrual2": Key(float, "cohort-2 accrual (patients per month)"),
        "accrual_process": Key(str, "uniform or poisson"),
        "enrichment_screening": Key(str, "skip (no time spent on non-subgroup candidates) or dilute"),
        "variant": Key(Variant.parse, "default MCP variant: none, W1, W2, W3"),
        "info_fraction": Key(_opt_float, "MCP weight t; auto uses n1 / (n1 + d_stage2)"),
        "surrogate_source": Key(str, "true (plug in the true risk difference) or empirical"),
        "surrogate_noise_sd": Key(float, "sd of noise added to the observed risk difference"),
        "cp_counts": Key(str, "observed (interim events as n1) or planned (d_stage1 as n1)"),
        "stage2_intersection": Key(str, "selected or hochberg: stage-2 intersection statistic"),
    },
    "design.thresholds": {
        "favorable": Key(float, "CP_F at or above which the zone is Favorable"),
        "delta_F": Key(float, "CP_F lower bound of the Promising zone"),
        "delta_S": Key(float, "CP_S lower bound for Enrichment"),
        "futility_F": Key(float, "futility bound on CP_F"),
        "futility_S": Key(float, "futility bound on CP_S"),
        "futility": Key(_bool, "whether the Futility zone is active"),
    },
    "scenario": {
        "hr_F": Key(float, "full-population hazard ratio (treatment / control)"),
        "hr_S": Key(float, "subgroup hazard ratio"),
        "control_median": Key(float, "control median survival (months)"),
        "p_c_F": Key(float, "control response rate, full population"),
        "p_c_S": Key(float, "control response rate, subgroup"),
        "theta_F": Key(float, "true response-rate difference, full population"),
        "theta_S": Key(float, "true response-rate difference, subgroup"),
        "phi": Key(float, "offset of the surrogate prediction"),
        "rho": Key(float, "surrogate / log-rank correlation (log-rank sign convention)"),
        "tau": Key(float, "subgroup prevalence"),
        "complement_hr": Key(str, "linear or log-linear split of hr_F into subgroup and complement"),
    },
    "interim": {
        "convention": Key(str, "sign convention of z_* and predicted_*: logrank or oriented"),
        "z_F": Key(float, "interim statistic, full population"),
        "z_S": Key(float, "interim statistic, subgroup"),
        "events_F": Key(int, "interim events, full population (events)"),
        "events_S": Key(int, "interim events, subgroup (events)"),
        "surrogate_F": Key(float, "observed surrogate effect, full population"),
        "surrogate_S": Key(float, "observed surrogate effect, subgroup"),
        "predicted_F": Key(float, "predicted statistic, full population (overrides the model)"),
        "predicted_S": Key(float, "predicted statistic, subgroup (overrides the model)"),
        "planned_increment": Key(_opt_int, "planned stage-2 events; default design d_stage2"),
        "cap_increment": Key(_opt_int, "maximum stage-2 events; default from the design cap"),
        "info_fraction": Key(_opt_float, "MCP weight t; auto uses events / (events + planned)"),
        "fc_F": Key(_opt_float, "control CDF value for W3, full population"),
        "fc_S": Key(_opt_float, "control CDF value for W3, subgroup"),
    },
    "historical": {
        "intercept": Key(float, "a in f(theta) = a + b theta"),
        "slope": Key(float, "b in f(theta) = a + b theta"),
        "logrank_convention": Key(_bool, "true when f predicts log-rank-signed statistics"),
    },
}


def _schema_for(section: str) -> Optional[dict[str, Key]]:
    if section in SCHEMA:
        return SCHEMA[section]
    if section.startswith("scenario."):
        return SCHEMA["scenario"]
    return None


def describe_keys() -> str:
    """Every accepted section and key, for ``--help``."""
    out = []
    for section, keys in SCHEMA.items():
        name = "scenario] or [scenario.<label>" if section == "scenario" else section
        out.append(f"[{name}]")
        for k, spec in keys.items():
            out.append(f"  {k:<22} {spec.help}")
    return "\n".join(out)


@dataclass
class Config:
    design: DesignSpec = field(default_factory=DesignSpec)
    scenarios: list[tuple[str, Scenario]] = field(default_factory=list)
    run: RunSettings = field(default_factory=RunSettings)
    interim: Optional[InterimInputs] = None
    historical: Optional[HistoricalSettings] = None
    source: str = "<string>"


def _line_index(text: str) -> dict[tuple[str, Optional[str]], int]:
    """(section, key) -> 1-based line number, and (section, None) for headers."""
    index: dict = {}
    section = None
    for i, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line[0] in "#;":
            continue
        m = re.match(r"\[([^\]]+)\]", line)
        if m:
            section = m.group(1).strip()
            index.setdefault((section, None), i)
            continue
        if section is not None and raw[:1] not in " \t":
            key = re.split(r"[=:]", line, maxsplit=1)[0].strip()
            index.setdefault((section, key), i)
    return index


def parse_config(text: str, source: str = "<string>") -> Config:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from None
    lines = _line_index(text)

    def where(section, key=None):
        ln = lines.get((section, key)) or lines.get((section, None))
        loc = f"{source}:{ln}" if ln else source
        return f"{loc}: [{section}]" + (f" {key}" if key else "")

    values: dict[str, dict] = {}
    for section in parser.sections():
        schema = _schema_for(section)
        if schema is None:
            raise ConfigError(f"{where(section)}: unknown section; expected one of "
                              + ", ".join(SCHEMA))
        parsed = {}
        for key, raw in parser.items(section):
            if key not in schema:
                raise ConfigError(f"{where(section, key)}: unknown key; expected one of "
                                  + ", ".join(schema))
            try:
                parsed[key] = schema[key].parse(raw)
            except (ValueError, DomainError) as exc:
                raise ConfigError(f"{where(section, key)}: cannot parse {raw!r}: {exc}") from None
        values[section] = parsed

    def build(cls, section, extra=None):
        kwargs = dict(values.get(section, {}))
        if extra:
            kwargs.update(extra)
        try:
            return cls(**kwargs)
        except (DomainError, ValueError) as exc:
            raise ConfigError(f"{where(section)}: {exc}") from None
        except TypeError as exc:
            raise ConfigError(f"{where(section)}: {exc}") from None

    thresholds = build(ZoneThresholds, "design.thresholds")
    design = build(DesignSpec, "design", {"thresholds": thresholds})
    scenarios = []
    for section in parser.sections():
        if section == "scenario" or section.startswith("scenario."):
            label = section.split(".", 1)[1] if "." in section else "scenario"
            scenarios.append((label, build(Scenario, section)))
    run = build(RunSettings, "run")
    if run.grid not in ("custom", "table2", "null"):
        raise ConfigError(f"{where('run', 'grid')}: expected custom, table2 or null, got {run.grid!r}")
    if run.reps < 1 or run.threads < 1:
        raise ConfigError(f"{where('run')}: reps and threads must be >= 1")
    bad_sets = set(run.sets) - set("abcd")
    if bad_sets:
        raise ConfigError(f"{where('run', 'sets')}: unknown set(s) {''.join(sorted(bad_sets))}")

    interim = None
    if "interim" in values:
        missing = [k for k in ("z_F", "z_S", "events_F", "events_S") if k not in values["interim"]]
        if missing:
            raise ConfigError(f"{where('interim')}: missing required key(s): " + ", ".join(missing))
        interim = build(InterimInputs, "interim")
        if interim.convention not in ("logrank", "oriented"):
            raise ConfigError(f"{where('interim', 'convention')}: expected logrank or oriented")
        if interim.events_F < 1 or interim.events_S < 1:
            raise ConfigError(f"{where('interim')}: interim event counts must be >= 1")
    historical = build(HistoricalSettings, "historical") if "historical" in values else None
    return Config(design, scenarios, run, interim, historical, source)


def load_config(path) -> Config:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config: {exc.strerror}") from None
    return parse_config(text, str(path))


def _text(value) -> str:
    if value is None:
        return "auto"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, Variant):
        return value.value
    if isinstance(value, tuple):
        return ", ".join(_text(v) for v in value)
    if isinstance(value, float):
        return repr(value) if math.isfinite(value) else str(value)
    return str(value)


def dump_config(cfg: Config) -> str:
    """Serialise ``cfg``; :func:`parse_config` restores an equal object."""
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str

    def put(section, obj, skip=()):
        cp[section] = {f.name: _text(getattr(obj, f.name)) for f in fields(obj)
                       if f.name not in skip}

    put("run", cfg.run)
    if cfg.run.seed is None:
        cp.remove_option("run", "seed")
    put("design", cfg.design, skip=("thresholds",))
    put("design.thresholds", cfg.design.thresholds)
    for label, sc in cfg.scenarios:
        put("scenario" if label == "scenario" else f"scenario.{label}", sc)
    if cfg.interim is not None:
        put("interim", cfg.interim)
        for k in ("surrogate_F", "surrogate_S", "predicted_F", "predicted_S"):
            if getattr(cfg.interim, k) is None:
                cp.remove_option("interim", k)
    if cfg.historical is not None:
        put("historical", cfg.historical)
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()


def config_equal(a: Config, b: Config) -> bool:
    keep = lambda c: dataclasses.replace(c, source="")
    return keep(a) == keep(b)
