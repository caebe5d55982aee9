"""Command-line interface: ``enrichsim <subcommand> [flags]``."""

from __future__ import annotations

import argparse
import csv
import math
import os
import sys
import time
from dataclasses import replace
from importlib import resources
from pathlib import Path
from typing import Optional

from . import __version__
from .config import Config, ConfigError, InterimInputs, describe_keys, load_config
from .decision_engine import DecisionRule, InterimDecision, InterimSnapshot, Zone, decide
from .experiments import (ScenarioGrid, compare_variants, null_grid, run_grid, summary_table,
                          table2_grid, write_csv, write_sidecar)
from .inference import UndefinedStatisticError, load_survival_sample, logrank_statistic
from .power_engine import (HistoricalModel, InfoFraction, StageCounts, Variant,
                           binomial_case_split, conditional_power, predict_statistic,
                           schoenfeld_events)
from .stat_core import DomainError

DEFAULT_SEED = 20240601
SEED_ENV = "ENRICHSIM_SEED"


def bundled_configs() -> list[str]:
    return sorted(p.name for p in resources.files("enrichsim").joinpath("configs").iterdir()
                  if p.name.endswith(".cfg"))


def resolve_config(name: str) -> Path:
    """A path on disk, or the name of a bundled config."""
    path = Path(name)
    if path.exists():
        return path
    bundled = resources.files("enrichsim").joinpath("configs", name)
    if bundled.is_file():
        return Path(str(bundled))
    raise ConfigError(f"{name}: no such file (bundled configs: {', '.join(bundled_configs())})")


def resolve_seed(flag: Optional[int], cfg: Optional[Config] = None) -> tuple[int, str]:
    """Seed precedence: --seed, then $ENRICHSIM_SEED, then the config, then the default."""
    if flag is not None:
        return flag, "--seed"
    env = os.environ.get(SEED_ENV)
    if env not in (None, ""):
        try:
            return int(env), SEED_ENV
        except ValueError:
            raise ConfigError(f"{SEED_ENV}={env!r} is not an integer") from None
    if cfg is not None and cfg.run.seed is not None:
        return cfg.run.seed, "config [run] seed"
    return DEFAULT_SEED, "default"


def _grid_from(cfg: Config, args) -> ScenarioGrid:
    run = cfg.run
    reps = args.reps if args.reps is not None else run.reps
    variants = run.variants
    if args.variant:
        variants = tuple(Variant.parse(v) for v in args.variant.split(","))
    if run.grid == "table2":
        return table2_grid(reps, variants, run.sets, run.futility)
    if run.grid == "null":
        return null_grid(reps, variants, run.futility)
    if not cfg.scenarios:
        raise ConfigError(f"{cfg.source}: [run] grid = custom needs at least one [scenario] section")
    return ScenarioGrid(tuple(cfg.scenarios), reps, variants, run.futility)


def _out_dir(args) -> Path:
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _run(cfg: Config, args, stem: str):
    grid = _grid_from(cfg, args)
    seed, seed_src = resolve_seed(args.seed, cfg)
    threads = args.threads if args.threads is not None else cfg.run.threads
    progress = (lambda m: print(m, file=sys.stderr)) if args.progress else None
    t0 = time.perf_counter()
    if len(grid.variants) >= 2:
        results = compare_variants(grid, cfg.design, grid.variants, seed, threads, progress=progress)
    else:
        results = run_grid(grid, cfg.design, seed, threads, progress=progress)
    elapsed = time.perf_counter() - t0
    out = _out_dir(args)
    write_csv(results, out / f"{stem}.csv")
    write_sidecar(out / f"{stem}.json", grid, cfg.design, seed, {"seed_source": seed_src})
    print(f"seed {seed} ({seed_src}); {grid.reps} replications per scenario; {elapsed:.1f} s")
    return results, out


def cmd_simulate(args) -> int:
    cfg = load_config(resolve_config(args.config))
    results, out = _run(cfg, args, "results")
    print(summary_table(results))
    print(f"wrote {out / 'results.csv'} and {out / 'results.json'}")
    return 0


def cmd_calibrate(args) -> int:
    cfg = load_config(resolve_config(args.config)) if args.config else Config(
        run=replace(Config().run, grid="null", reps=100_000,
                    variants=(Variant.NONE, Variant.W1, Variant.W2, Variant.W3),
                    futility=(False, True)))
    if cfg.run.grid == "custom" and not cfg.scenarios:
        cfg = replace(cfg, run=replace(cfg.run, grid="null"))
    results, out = _run(cfg, args, "calibration")
    alpha = cfg.design.alpha
    print(f"{'scenario':<16} {'variant':<7} {'futility':<8} {'FWER':>7} {'+-se':>7}  check vs alpha={alpha}")
    worst = 0
    for oc in results:
        if oc.error:
            print(f"{oc.label:<16} {oc.variant:<7} ERROR {oc.error}")
            worst = 1
            continue
        ok = oc.power <= alpha + 3 * oc.power_se
        worst |= not ok
        print(f"{oc.label:<16} {oc.variant:<7} {str(oc.futility).lower():<8} {oc.power:7.4f} "
              f"{oc.power_se:7.4f}  {'ok' if ok else 'ABOVE alpha + 3 SE'}")
    print("FWER = probability of rejecting (probability scale) under the global null")
    print(f"wrote {out / 'calibration.csv'}")
    return 1 if worst else 0


def _oriented(value: Optional[float], convention: str) -> Optional[float]:
    if value is None:
        return None
    return -value if convention == "logrank" else value


def interim_decision(inputs: InterimInputs, cfg: Config, variant: Variant) -> dict:
    """Decision plus the quantities behind it, for the ``decide`` report."""
    design = cfg.design
    conv = inputs.convention
    z_F, z_S = _oriented(inputs.z_F, conv), _oriented(inputs.z_S, conv)
    pred = {"F": _oriented(inputs.predicted_F, conv), "S": _oriented(inputs.predicted_S, conv)}
    if variant is not Variant.NONE:
        for pop in ("F", "S"):
            if pred[pop] is not None:
                continue
            theta = getattr(inputs, f"surrogate_{pop}")
            if theta is None or cfg.historical is None:
                raise ConfigError(f"{cfg.source}: [interim]: MCP variant {variant.value} needs "
                                  f"predicted_{pop}, or surrogate_{pop} plus a [historical] section")
            h = cfg.historical
            pred[pop] = predict_statistic(HistoricalModel(h.intercept, h.slope, h.logrank_convention), theta)
    planned = inputs.planned_increment or design.d_stage2
    cap = inputs.cap_increment or max(design.cap_incr, planned)
    counts_F = StageCounts(inputs.events_F, inputs.events_F + planned)
    counts_S = StageCounts(inputs.events_S, inputs.events_S + planned)
    if inputs.info_fraction is not None:
        info_F = InfoFraction(inputs.info_fraction, inputs.fc_F)
        info_S = InfoFraction(inputs.info_fraction, inputs.fc_S)
    else:
        info_F = InfoFraction(counts_F.t, inputs.fc_F)
        info_S = InfoFraction(counts_S.t, inputs.fc_S)
    if variant is Variant.W3 and (inputs.fc_F is None or inputs.fc_S is None):
        raise ConfigError(f"{cfg.source}: [interim]: variant W3 needs fc_F and fc_S")
    snap = InterimSnapshot(z_F, z_S, counts_F, counts_S, info_F, pred["F"], pred["S"],
                           inputs.events_F, inputs.events_S, info_S)
    rule = DecisionRule(design.alpha, design.power, design.thresholds, variant, planned, cap)
    dec = decide(snap, rule)
    n1_sel = inputs.events_S if dec.selected_population == "S" else inputs.events_F
    return {
        "decision": dec,
        "z": {"F": z_F, "S": z_S},
        "predicted": pred,
        "cp_plain": {"F": float(conditional_power(z_F, counts_F, design.alpha)),
                     "S": float(conditional_power(z_S, counts_S, design.alpha))},
        "t": {"F": info_F.t, "S": info_S.t},
        "planned_increment": planned,
        "cap_increment": cap,
        "total_events": (n1_sel + dec.n2_incr_final) if dec.zone is not Zone.FUTILITY else None,
        "variant": variant,
    }


def _both(z: Optional[float]) -> str:
    if z is None:
        return "n/a"
    return f"{z:+.4f} oriented (positive favours treatment) / {-z:+.4f} log-rank convention"


def format_decision(rep: dict) -> str:
    dec: InterimDecision = rep["decision"]
    v = rep["variant"]
    label = "CP" if v is Variant.NONE else f"MCP {v.value}"
    rows = [("variant", v.value)]
    rows += [(f"Z1_{p}", _both(rep["z"][p])) for p in ("F", "S")]
    if v is not Variant.NONE:
        rows += [(f"predicted Z_{p}", _both(rep["predicted"][p])) for p in ("F", "S")]
    rows.append(("information t", f"F {rep['t']['F']:.4f}, S {rep['t']['S']:.4f}"))
    rows += [(f"CP_{p} observed", f"{rep['cp_plain'][p]:.4f} (probability)") for p in ("F", "S")]
    if v is not Variant.NONE:
        rows += [(f"{label} {p}", f"{getattr(dec, 'cp_' + p):.4f} (probability)") for p in ("F", "S")]
    if dec.fallback_F or dec.fallback_S:
        rows.append(("note", "harmonic weight undefined; W1 blend used"))
    rows.append(("zone", dec.zone.label))
    rows.append(("population", dec.selected_population))
    if dec.zone is Zone.FUTILITY:
        rows.append(("stage-2 events", "0 events (trial stops at the interim)"))
    else:
        rows.append(("stage-2 events", f"{dec.n2_incr_final} events (planned "
                     f"{rep['planned_increment']}, cap {rep['cap_increment']})"))
        rows.append(("total events", f"{rep['total_events']} events in population "
                     f"{dec.selected_population} (interim events + stage-2 events)"))
    if dec.ssr_flag:
        rows.append(("warning", f"SSR: {dec.ssr_flag}"))
    return "\n".join(f"{k:<18} {val}" for k, val in rows)


def cmd_decide(args) -> int:
    cfg = load_config(resolve_config(args.config))
    if cfg.interim is None:
        raise ConfigError(f"{cfg.source}: decide needs an [interim] section "
                          "(required keys: z_F, z_S, events_F, events_S)")
    variant = Variant.parse(args.variant) if args.variant else cfg.design.variant
    print(format_decision(interim_decision(cfg.interim, cfg, variant)))
    return 0


def cmd_size(args) -> int:
    if args.ve_alt is not None:
        split = binomial_case_split(args.ve_alt, args.ve_margin, args.two_sided_alpha, args.power)
        print(f"VE {args.ve_alt:g}% vs margin {args.ve_margin:g}%, two-sided alpha "
              f"{args.two_sided_alpha:g}, power {args.power:g}")
        print(f"vaccine share of cases: {split['p_vaccine_alt']:.4f} (alternative), "
              f"{split['p_vaccine_margin']:.4f} (margin)")
        print(f"binomial normal approximation, alternative variance: {split['wald']} cases")
        print(f"binomial normal approximation, score variance:       {split['score']} cases")
        print(f"Schoenfeld log-rank approximation:                   {split['schoenfeld']} events")
        return 0
    raw = schoenfeld_events(args.hr_alt, args.alpha, args.power, args.allocation, args.hr_margin)
    print(f"HR {args.hr_alt:g} vs margin {args.hr_margin:g}, one-sided alpha {args.alpha:g}, "
          f"power {args.power:g}, allocation {args.allocation:g}:1")
    print(f"Schoenfeld: {raw:.2f} events, rounded up {math.ceil(raw - 1e-9)} events")
    return 0


def cmd_analyze(args) -> int:
    sample = load_survival_sample(args.data, args.cut if args.cut is not None else math.inf)
    print(f"{len(sample.arm)} subjects; cut at {args.cut if args.cut is not None else 'end of data'} months")
    for pop in ("F", "S"):
        try:
            z, d = logrank_statistic(sample, pop)
        except UndefinedStatisticError as exc:
            print(f"{pop}: undefined ({exc})")
            continue
        print(f"{pop}: {d} events; Z {_both(z)}")
    return 0


def cmd_report(args) -> int:
    path = Path(args.input)
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.DictReader(fh))
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read results: {exc.strerror}") from None
    if not rows or "power" not in rows[0]:
        raise ConfigError(f"{path}: not a results CSV")
    out = _out_dir(args)
    zones = [c for c in rows[0] if c.startswith("zone_") and not c.endswith("_se")]
    with open(out / "zones.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(["scenario", "variant", "futility"] + zones)
        for r in rows:
            w.writerow([r["scenario"], r["variant"], r["futility"]] + [r[z] for z in zones])
    with open(out / "power.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        cols = ["power", "power_se", "mean_events", "mean_duration_months"]
        w.writerow(["scenario", "variant", "futility"] + cols)
        for r in rows:
            w.writerow([r["scenario"], r["variant"], r["futility"]] + [r[c] for c in cols])
    print(f"{'scenario':<24} {'variant':<7} {'power':>7} {'events':>8} {'months':>7}")
    for r in rows:
        print(f"{r['scenario']:<24} {r['variant']:<7} {float(r['power']):7.4f} "
              f"{float(r['mean_events']):8.1f} {float(r['mean_duration_months']):7.1f}")
    print(f"wrote {out / 'zones.csv'} and {out / 'power.csv'}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="enrichsim",
        description="Adaptive enrichment design with surrogate-informed interim decisions.",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog=(f"seed precedence: --seed > ${SEED_ENV} > config [run] seed > {DEFAULT_SEED}\n"
                f"bundled configs: {', '.join(bundled_configs())}\n\nconfig keys:\n{describe_keys()}"))
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config_required=True):
        sp.add_argument("--config", required=config_required,
                        help="config file path or bundled config name")
        sp.add_argument("--seed", type=int, help="master seed")
        sp.add_argument("--reps", type=int, help="replications per scenario (overrides the config)")
        sp.add_argument("--out", help="output directory (default: current directory)")
        sp.add_argument("--variant", help="MCP variant(s), comma separated: none, W1, W2, W3")
        sp.add_argument("--threads", type=int, help="worker processes")
        sp.add_argument("--progress", action="store_true", help="progress lines on stderr")

    common(sub.add_parser("simulate", help="operating characteristics over a scenario grid"))
    common(sub.add_parser("calibrate", help="type I error under the global null"),
           config_required=False)
    sp = sub.add_parser("decide", help="one interim decision from observed values")
    sp.add_argument("--config", required=True, help="config with an [interim] section")
    sp.add_argument("--variant", help="override the MCP variant: none, W1, W2, W3")

    sp = sub.add_parser("size", help="event count for a log-rank or vaccine-efficacy test")
    sp.add_argument("--hr-alt", type=float, default=0.6, help="alternative hazard ratio")
    sp.add_argument("--hr-margin", type=float, default=1.0, help="null hazard ratio")
    sp.add_argument("--alpha", type=float, default=0.025, help="one-sided level")
    sp.add_argument("--power", type=float, default=0.9)
    sp.add_argument("--allocation", type=float, default=1.0, help="treatment:control ratio")
    sp.add_argument("--ve-alt", type=float, help="vaccine efficacy under the alternative (%%)")
    sp.add_argument("--ve-margin", type=float, default=35.0, help="VE margin (%%)")
    sp.add_argument("--two-sided-alpha", type=float, default=0.05)

    sp = sub.add_parser("analyze", help="log-rank statistics from a subject-level file")
    sp.add_argument("--data", required=True,
                    help="delimited file with columns arm, subgroup, enroll_month, event_month")
    sp.add_argument("--cut", type=float, help="analysis cut in calendar months")

    sp = sub.add_parser("report", help="plot-ready tables from a results CSV")
    sp.add_argument("--input", required=True, help="results CSV written by simulate")
    sp.add_argument("--out", help="output directory")
    return p


COMMANDS = {"simulate": cmd_simulate, "calibrate": cmd_calibrate, "decide": cmd_decide,
            "size": cmd_size, "analyze": cmd_analyze, "report": cmd_report}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (DomainError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
