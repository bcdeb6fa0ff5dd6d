"""Command line entry point.

Exit codes: 0 success, 1 unexpected failure, 2 missing input file,
3 invalid configuration, 4 invalid trace.
"""

from __future__ import annotations

import argparse
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

from . import report as rep
from .config import RunConfig, default_config_text, parse_config
from .control import ConfigError
from .engine import Scenario, Simulation
from .routing import Controlled, Epidemic, StaticSpray, strategy_from_name
from .trace import CommunityParams, ContactTrace, TraceError, generate_community_trace, parse_contact_trace, write_contact_trace

EXIT_OK, EXIT_FAIL, EXIT_MISSING, EXIT_CONFIG, EXIT_TRACE = 0, 1, 2, 3, 4


class CliError(Exception):
    def __init__(self, code: int, message: str) -> None:
        self.code = code
        super().__init__(message)


def _read(path: str | None, what: str) -> str:
    if path is None:
        raise CliError(EXIT_MISSING, f"no {what} given")
    p = Path(path)
    if not p.is_file():
        raise CliError(EXIT_MISSING, f"{what} not found: {path}")
    return p.read_text(encoding="utf-8")


def load_config(path: str | None) -> RunConfig:
    text = "" if path is None else _read(path, "config")
    try:
        return parse_config(text)
    except ConfigError as exc:
        raise CliError(EXIT_CONFIG, f"config error ({exc.key or 'syntax'}): {exc}") from None


def load_trace(path: str | None) -> ContactTrace:
    text = _read(path, "trace")
    try:
        return parse_contact_trace(text)
    except TraceError as exc:
        raise CliError(EXIT_TRACE, f"trace error: {exc}") from None


def _int_list(s: str) -> list[int]:
    out = []
    for part in s.split(","):
        part = part.strip()
        if not part:
            continue
        if "-" in part[1:]:
            lo, hi = part.split("-", 1)
            out.extend(range(int(lo), int(hi) + 1))
        else:
            out.append(int(part))
    return out


def _size_list(s: str) -> list[tuple[int, int]]:
    sizes = []
    for part in s.split(","):
        lo, _, hi = part.strip().partition("-")
        sizes.append((int(lo), int(hi or lo)))
    return sizes


def _scenario(cfg: RunConfig, trace: ContactTrace, seed: int, strategy=None) -> Scenario:
    scenario = Scenario(
        trace=trace,
        strategy=strategy or cfg.strategy,
        params=cfg.params,
        controller_ids=cfg.controllers,
        seed=seed,
        node_count=cfg.node_count,
    )
    try:
        scenario.validate()
    except ConfigError as exc:
        raise CliError(EXIT_CONFIG, f"config error ({exc.key}): {exc}") from None
    return scenario


def _simulate(scenario: Scenario) -> rep.RunReport:
    return Simulation(scenario).run()


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    trace = load_trace(args.trace)
    strategy = strategy_from_name(args.strategy, cfg.static_limit) if args.strategy else None
    seed = args.seed if args.seed is not None else cfg.seed
    report = _simulate(_scenario(cfg, trace, seed, strategy))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.csv").write_text(rep.emit_csv(report))
    (out / "report.json").write_text(rep.emit_json(report))
    (out / "rd_timeline.csv").write_text(rep.emit_rd_timeline(report))
    print(f"delivery_ratio={report.delivery_ratio:.6g} created={report.created_data} -> {out}")
    return EXIT_OK


COMPARISON_COLUMNS = (
    "size_min",
    "size_max",
    "seeds",
    "delivery_controlled",
    "delivery_epidemic",
    "delivery_static",
    "latency_controlled",
    "latency_epidemic",
    "latency_static",
    "overhead_controlled",
    "overhead_epidemic",
    "overhead_static",
    "improvement_vs_epidemic",
    "improvement_vs_static",
)


def _opt(x) -> str:
    return "" if x is None else f"{x:.6g}"


def comparison_row(size: tuple[int, int], seeds: int, table: rep.ComparisonTable) -> list[str]:
    s = table.summaries
    labels = ("controlled", "epidemic", "static")
    return [
        str(size[0]),
        str(size[1]),
        str(seeds),
        *(_opt(s[lb].median_delivery_ratio) for lb in labels),
        *(_opt(s[lb].median_latency) for lb in labels),
        *(_opt(s[lb].median_overhead) for lb in labels),
        _opt(table.improvements["epidemic"]),
        _opt(table.improvements["static"]),
    ]


def run_comparison(cfg: RunConfig, trace: ContactTrace, seeds, sizes, jobs: int = 1):
    """Run every (size, strategy, seed) cell; returns [(size, ComparisonTable, {label: reports})]."""
    strategies = {"controlled": Controlled(), "epidemic": Epidemic(), "static": StaticSpray(cfg.static_limit)}
    cells = []
    for size in sizes:
        sized = replace(cfg, params=replace(cfg.params, data_size_min=size[0], data_size_max=size[1]))
        for label, strategy in strategies.items():
            for seed in seeds:
                cells.append((size, label, _scenario(sized, trace, seed, strategy)))
    scenarios = [c[2] for c in cells]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            reports = list(pool.map(_simulate, scenarios))
    else:
        reports = [_simulate(s) for s in scenarios]
    results = []
    for size in sizes:
        by_label = {label: [] for label in strategies}
        for (sz, label, _), r in zip(cells, reports):
            if sz == size:
                by_label[label].append(r)
        results.append((size, rep.compare(by_label, "controlled"), by_label))
    return results


def cmd_compare(args) -> int:
    cfg = load_config(args.config)
    trace = load_trace(args.trace)
    seeds = _int_list(args.seeds) if args.seeds else [cfg.seed]
    sizes = _size_list(args.sizes) if args.sizes else [(cfg.params.data_size_min, cfg.params.data_size_max)]
    for lo, hi in sizes:
        if not 0 < lo <= hi:
            raise CliError(EXIT_CONFIG, f"config error (--sizes): bad size range {lo}-{hi}")
    results = run_comparison(cfg, trace, seeds, sizes, args.jobs)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = [COMPARISON_COLUMNS]
    runs = [("size_min", "size_max", "strategy", "seed") + rep.CSV_COLUMNS]
    for size, table, by_label in results:
        rows.append(comparison_row(size, len(seeds), table))
        for label, reports in by_label.items():
            for seed, r in zip(seeds, reports):
                runs.append((size[0], size[1], label, seed, *rep.csv_row(r)))
    (out / "comparison.csv").write_text(rep._csv(rows))
    (out / "runs.csv").write_text(rep._csv(runs))
    print(f"{len(results)} size bucket(s) x 3 strategies x {len(seeds)} seed(s) -> {out}")
    return EXIT_OK


def cmd_gen_trace(args) -> int:
    try:
        params = CommunityParams(
            groups=args.groups,
            nodes_per_group=args.nodes_per_group,
            intra_rate=args.intra_rate,
            inter_rate=args.inter_rate,
            mean_contact_duration=args.mean_duration,
            duration=args.duration,
            seed=args.seed,
        )
    except ValueError as exc:
        raise CliError(EXIT_CONFIG, f"config error: {exc}") from None
    text = write_contact_trace(generate_community_trace(params))
    Path(args.out).write_text(text)
    return EXIT_OK


def cmd_validate_trace(args) -> int:
    trace = load_trace(args.path)
    print(f"events={len(trace.events)} nodes={trace.node_count} duration={trace.duration:g}")
    return EXIT_OK


def cmd_default_config(args) -> int:
    sys.stdout.write(default_config_text())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="oppctl", description="Controlled opportunistic network simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one scenario")
    p.add_argument("--config")
    p.add_argument("--trace", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--strategy", choices=("controlled", "epidemic", "static"))
    p.add_argument("--out", default="out")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("compare", help="controlled vs epidemic vs static sweep")
    p.add_argument("--config")
    p.add_argument("--trace", required=True)
    p.add_argument("--seeds", help="e.g. 1,2,3 or 1-5")
    p.add_argument("--sizes", help="data size ranges in bytes, e.g. 600-100000,500000-1048576")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", default="out")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("gen-trace", help="write a synthetic community contact trace")
    p.add_argument("--groups", type=int, default=2)
    p.add_argument("--nodes-per-group", type=int, default=10)
    p.add_argument("--intra-rate", type=float, default=2.0, help="contacts per pair per hour")
    p.add_argument("--inter-rate", type=float, default=0.2)
    p.add_argument("--mean-duration", type=float, default=300.0, help="seconds")
    p.add_argument("--duration", type=float, default=4 * 3600.0, help="seconds")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_trace)

    p = sub.add_parser("validate-trace", help="check a contact trace")
    p.add_argument("path")
    p.set_defaults(func=cmd_validate_trace)

    p = sub.add_parser("default-config", help="print every config key with its default")
    p.set_defaults(func=cmd_default_config)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"oppctl: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
