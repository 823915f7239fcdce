"""Command-line entry point.

Subcommands: ``run`` (one episode), ``compare`` (paired filtered/baseline
seeds), ``verify`` (oracle sweeps) and ``admissibility`` (shaping-class
report). ``--verify`` before any subcommand is a shortcut for ``verify``.

Exit codes: 0 success, 1 usage or configuration error, 2 verification
failure, 3 contact with ``--fail-on-contact``.
"""

from __future__ import annotations

import argparse
import statistics
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import __version__
from .barrier import ERF, IDENTITY, RATIONAL, TANH, check_admissibility
from .config import ConfigError, RunConfig, load_config
from .sim import EpisodeMetrics, load_scenario, run_episode, write_episode

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_VERIFY = 2
EXIT_CONTACT = 3

# (row label, metric field, aggregation)
TABLE_ROWS = (
    ("Total exploration time (s)", "exploration_time", "mean"),
    ("Explored area (m²)", "explored_area", "mean"),
    ("Total path length (m)", "path_length", "mean"),
    ("Average speed (m/s)", "avg_speed", "mean"),
    ("Global min clearance (m)", "min_clearance", "min"),
    ("Obstacle violation ticks", "obstacle_violation_ticks", "mean"),
    ("Frontier violation ticks", "frontier_violation_ticks", "mean"),
    ("CBF intervention rate", "intervention_rate", "mean"),
    ("CBF speed clips", "speed_clips", "mean"),
    ("Avg CBF slack", "avg_slack", "mean"),
    ("Avg adaptive γ2", "avg_gamma2", "mean"),
)


class _Parser(argparse.ArgumentParser):
    """Argument errors exit with status 1 instead of argparse's 2 (reserved for verification)."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dualcbf", description="Dual-barrier safety filter: simulation and verification.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--verify", action="store_true", help="run the oracle verification suite and exit")
    parser.add_argument("--verify-tolerance", type=float, default=1e-6, metavar="TOL",
                        help="closed-form vs oracle tolerance (default 1e-6)")
    sub = parser.add_subparsers(dest="command")

    def episode_flags(p):
        p.add_argument("--scenario", help="bundled scenario name or scenario file path")
        p.add_argument("--config", help="key = value configuration file")
        p.add_argument("--ticks", type=int, help="episode length in control ticks")
        p.add_argument("--no-filter", action="store_true", help="bypass the safety filter (baseline)")
        p.add_argument("--out-dir", help="output directory (default from config: runs)")
        p.add_argument("--fail-on-contact", action="store_true", help="exit 3 if any episode made contact")

    run = sub.add_parser("run", help="simulate one episode")
    episode_flags(run)
    run.add_argument("--seed", type=int, help="random seed")

    cmp_ = sub.add_parser("compare", help="paired filtered/baseline episodes over several seeds")
    episode_flags(cmp_)
    cmp_.add_argument("--seed", type=int, help="first seed (default from config)")
    cmp_.add_argument("--seeds", type=int, default=5, help="number of consecutive seeds (default 5)")
    cmp_.add_argument("--jobs", type=int, default=1, help="episodes run in parallel (default 1)")

    ver = sub.add_parser("verify", help="run the oracle verification suite")
    ver.add_argument("--verify-tolerance", type=float, default=None, metavar="TOL", dest="sub_tolerance")
    ver.add_argument("--seed", type=int, default=0)

    sub.add_parser("admissibility", help="check the shaping functions against the admissible class")
    return parser


def _config_from_args(args) -> RunConfig:
    config = load_config(args.config) if args.config else RunConfig()
    changes = {}
    if args.scenario is not None:
        changes["scenario"] = args.scenario
    if args.ticks is not None:
        changes["ticks"] = args.ticks
    if getattr(args, "seed", None) is not None:
        changes["seed"] = args.seed
    if args.no_filter:
        changes["filter_enabled"] = False
    if args.out_dir is not None:
        changes["out_dir"] = args.out_dir
    return config.replace(**changes) if changes else config


def _print_metrics(metrics: EpisodeMetrics, out=sys.stdout):
    for line in metrics.as_lines(prefix="").splitlines():
        print(f"  {line}", file=out)


def cmd_run(args) -> int:
    config = _config_from_args(args)
    scenario = load_scenario(config.scenario, config.robot_radius)
    metrics, trace = run_episode(config, scenario)
    out = write_episode(config, metrics, trace, scenario.name)
    print(f"{scenario.name} seed {config.seed} ({'filtered' if config.filter_enabled else 'baseline'}): "
          f"wrote {out / 'trace.csv'} and {out / 'summary.txt'}")
    _print_metrics(metrics)
    if args.fail_on_contact and metrics.contacts > 0:
        print(f"contact after {metrics.ticks} ticks", file=sys.stderr)
        return EXIT_CONTACT
    return EXIT_OK


def _run_arm(config: RunConfig, mode: str) -> tuple[str, int, EpisodeMetrics, str]:
    scenario = load_scenario(config.scenario, config.robot_radius)
    metrics, trace = run_episode(config, scenario)
    out = write_episode(config, metrics, trace, scenario.name, mode)
    return mode, config.seed, metrics, str(out)


def _aggregate(values: list, how: str) -> str:
    values = [v for v in values if v is not None]
    if not values:
        return "—"
    if how == "min":
        return f"{min(values):.4f}"
    mean = statistics.fmean(values)
    if len(values) > 1:
        return f"{mean:.4f} ± {statistics.stdev(values):.4f}"
    return f"{mean:.4f}"


def comparison_table(per_arm: dict[str, list[EpisodeMetrics]], arms: tuple[str, str]) -> str:
    """Metric rows in the published comparison layout; mean ± std across seeds."""
    label_width = max(len(row[0]) for row in TABLE_ROWS)
    cells = {arm: [_aggregate([getattr(m, fld) for m in per_arm[arm]], how) for _, fld, how in TABLE_ROWS]
             for arm in arms}
    col = max(18, *(len(c) for arm in arms for c in cells[arm]))
    titles = {"filtered": "Dual CBF (filtered)", "baseline": "Baseline (APF only)"}
    lines = [f"{'Metric':<{label_width}}  " + "  ".join(f"{titles.get(a, a):>{col}}" for a in arms)]
    lines.append("-" * len(lines[0]))
    for i, (label, _, _) in enumerate(TABLE_ROWS):
        lines.append(f"{label:<{label_width}}  " + "  ".join(f"{cells[a][i]:>{col}}" for a in arms))
    return "\n".join(lines) + "\n"


def cmd_compare(args) -> int:
    if args.seeds < 1:
        raise ConfigError(f"--seeds must be >= 1, got {args.seeds}")
    if args.jobs < 1:
        raise ConfigError(f"--jobs must be >= 1, got {args.jobs}")
    base = _config_from_args(args)
    scenario = load_scenario(base.scenario, base.robot_radius)  # fail early on a bad scenario
    # --no-filter turns the filtered arm into a second baseline (a control for pairing)
    filtered_on = not args.no_filter
    jobs = []
    for seed in range(base.seed, base.seed + args.seeds):
        jobs.append((base.replace(seed=seed, filter_enabled=filtered_on), "filtered"))
        jobs.append((base.replace(seed=seed, filter_enabled=False), "baseline"))
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_run_arm, *zip(*jobs)))
    else:
        results = [_run_arm(cfg, mode) for cfg, mode in jobs]

    arms = ("filtered", "baseline")
    per_arm = {arm: [] for arm in arms}
    by_seed = {}
    for mode, seed, metrics, out in results:
        per_arm[mode].append(metrics)
        by_seed.setdefault(seed, {})[mode] = metrics
        print(f"{scenario.name} seed {seed} {mode}: explored {metrics.explored_area:.2f} m², "
              f"path {metrics.path_length:.2f} m, min clearance {metrics.min_clearance:.3f} m, "
              f"intervention rate {metrics.intervention_rate:.4f}, contacts {metrics.contacts} -> {out}")
    wins = sum(m["filtered"].explored_area >= m["baseline"].explored_area for m in by_seed.values())
    table = comparison_table(per_arm, arms)
    header = (f"scenario {scenario.name}, seeds {base.seed}..{base.seed + args.seeds - 1}, "
              f"{base.ticks} ticks at dt {base.dt:g} s"
              + ("" if filtered_on else " (filter disabled in both arms)") + "\n")
    footer = f"filtered explored area >= baseline in {wins} of {len(by_seed)} paired seeds\n"
    report = header + "\n" + table + "\n" + footer
    out_dir = Path(base.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    report_path = out_dir / f"{scenario.name}_compare.txt"
    report_path.write_text(report)
    print()
    print(report, end="")
    print(f"wrote {report_path}")
    if args.fail_on_contact and any(m.contacts > 0 for m in per_arm["filtered"] + per_arm["baseline"]):
        return EXIT_CONTACT
    return EXIT_OK


def cmd_verify(tolerance: float, seed: int = 0) -> int:
    from .verification import run_verification

    if not (tolerance > 0):
        raise ConfigError(f"--verify-tolerance must be > 0, got {tolerance}")
    results = run_verification(tolerance=tolerance, seed=seed)
    for res in results:
        print(res.line())
    failed = [r.name for r in results if not r.passed]
    if failed:
        print(f"verification FAILED: {', '.join(failed)}")
        return EXIT_VERIFY
    print(f"verification passed ({len(results)} checks)")
    return EXIT_OK


def cmd_admissibility() -> int:
    for fn in (TANH, RATIONAL, ERF, IDENTITY):
        for line in check_admissibility(fn).lines():
            print(line)
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.verify or args.command == "verify":
            tol = args.verify_tolerance
            if args.command == "verify" and args.sub_tolerance is not None:
                tol = args.sub_tolerance
            return cmd_verify(tol, getattr(args, "seed", 0) if args.command == "verify" else 0)
        if args.command == "run":
            return cmd_run(args)
        if args.command == "compare":
            return cmd_compare(args)
        if args.command == "admissibility":
            return cmd_admissibility()
        parser.print_help(sys.stderr)
        return EXIT_USAGE
    except (ConfigError, ValueError, OSError) as exc:
        print(f"dualcbf: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
