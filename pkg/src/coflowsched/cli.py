"""Experiment runner: topology dumps, offline/online sweeps, CSV emission.

Subcommands:
    topo     emit a FatTree topology as JSON
    offline  run (seed x algorithm) offline experiments, emit CSV
    online   run (seed x algorithm) online experiments, emit CSV
    sweep    offline experiments over a grid of one config key
    verify   run the oracle-equivalence suites and report pass/fail

Rows are sorted by (grid value, seed, algorithm) before writing, so the
same command line always produces the same CSV bytes (the wall-clock
runtime column aside).  Log verbosity comes from $COFLOWSCHED_LOG.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from multiprocessing import get_context

import numpy as np

from .errors import SchedulingError
from .netgraph import fat_tree
from .sim import (
    ALGORITHMS,
    ConfigError,
    MetricsRecord,
    OfflineConfig,
    OnlineConfig,
    run_offline,
    run_online,
)

log = logging.getLogger("coflowsched")


# -- small parsers ------------------------------------------------------------


def _parse_seeds(text: str) -> list[int]:
    """Seed lists: "1..20" (inclusive), "0,3,7", or a mix."""
    seeds: list[int] = []
    for token in text.split(","):
        token = token.strip()
        if ".." in token:
            lo, hi = token.split("..")
            seeds.extend(range(int(lo), int(hi) + 1))
        elif token:
            seeds.append(int(token))
    if not seeds:
        raise ConfigError(f"no seeds in {text!r}")
    return seeds


def _parse_value(text: str):
    low = text.lower()
    if low in ("true", "false"):
        return low == "true"
    if low in ("none", "null"):
        return None
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    return text


def _parse_sets(pairs: list[str]) -> dict:
    out = {}
    for pair in pairs:
        if "=" not in pair:
            raise ConfigError(f"--set expects key=value, got {pair!r}")
        key, value = pair.split("=", 1)
        out[key] = _parse_value(value)
    return out


def _parse_grid(spec: str) -> tuple[str, list]:
    """Grid specs like "n_flows=10..100:10" -> (key, [10, 20, ..., 100])."""
    if "=" not in spec:
        raise ConfigError(f"grid spec must look like key=lo..hi:step, got {spec!r}")
    key, rng = spec.split("=", 1)
    if ".." not in rng or ":" not in rng:
        raise ConfigError(f"grid range must look like lo..hi:step, got {rng!r}")
    span, step = rng.rsplit(":", 1)
    lo, hi = span.split("..")
    lo_v, hi_v, step_v = (_parse_value(x) for x in (lo, hi, step))
    values = []
    v = lo_v
    while v <= hi_v + 1e-12:
        values.append(v)
        v += step_v
    return key, values


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    if path.endswith(".json"):
        with open(path) as fh:
            return json.load(fh)
    if path.endswith(".toml"):
        try:
            import tomllib  # type: ignore[import-not-found]
        except ModuleNotFoundError:
            import tomli as tomllib
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    raise ConfigError(f"config file must end in .json or .toml: {path!r}")


# -- experiment execution ------------------------------------------------------


def _offline_task(cfg_dict: dict):
    cfg = OfflineConfig.from_dict(cfg_dict)
    try:
        return ("ok", run_offline(cfg))
    except (SchedulingError, ConfigError) as exc:
        return ("err", f"seed={cfg.seed} algo={cfg.algorithm}: {exc}")


def _online_task(cfg_dict: dict):
    cfg = OnlineConfig.from_dict(cfg_dict)
    try:
        return ("ok", run_online(cfg))
    except (SchedulingError, ConfigError) as exc:
        return ("err", f"seed={cfg.seed} algo={cfg.algorithm}: {exc}")


def _run_grid(task, cfg_dicts: list[dict], jobs: int):
    if jobs > 1:
        with get_context("fork").Pool(jobs) as pool:
            results = pool.map(task, cfg_dicts)
    else:
        results = [task(d) for d in cfg_dicts]
    records = [payload for kind, payload in results if kind == "ok"]
    errors = [payload for kind, payload in results if kind == "err"]
    return records, errors


def _emit(records: list[MetricsRecord], errors: list[str], args) -> int:
    lines = [MetricsRecord.CSV_HEADER] + [r.to_csv_row() for r in records]
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if getattr(args, "summary", False) and records:
        _summarize(records)
    for err in errors:
        print(f"error: {err}", file=sys.stderr)
    return 1 if errors else 0


def _summarize(records: list[MetricsRecord]) -> None:
    by_algo: dict[str, list[MetricsRecord]] = {}
    for r in records:
        by_algo.setdefault(r.algo, []).append(r)
    print("# summary (mean +- stddev over rows)", file=sys.stderr)
    for algo in sorted(by_algo):
        rows = by_algo[algo]
        for metric in ("cct_s", "alloc_gbps", "avg_hops", "runtime_s"):
            vals = np.array([getattr(r, metric) for r in rows])
            print(
                f"# {algo:12s} {metric:12s} {vals.mean():12.4f} +- {vals.std():.4f}",
                file=sys.stderr,
            )


def _experiment_cmd(args, config_cls, task, default_seeds: int) -> int:
    base = _load_config(args.config)
    base.update(_parse_sets(args.set or []))
    config_cls.from_dict(base)  # fail fast on unknown keys / bad values
    seeds = _parse_seeds(args.seeds) if args.seeds else list(range(default_seeds))
    algos = args.algo.split(",") if args.algo else [
        base.get("algorithm", config_cls().algorithm)
    ]
    for algo in algos:
        if algo not in ALGORITHMS:
            raise ConfigError(
                f"unknown algorithm {algo!r}; expected one of {sorted(ALGORITHMS)}"
            )
    grids = getattr(args, "_grid_values", [(None, None)])
    cfg_dicts = []
    for key, value in grids:
        for seed in seeds:
            for algo in algos:
                d = dict(base)
                if key is not None:
                    d[key] = value
                d["seed"] = seed
                d["algorithm"] = algo
                cfg_dicts.append(d)
    records, errors = _run_grid(task, cfg_dicts, args.jobs)
    records.sort(key=lambda r: (r.k, r.n_flows, r.seed, r.algo))
    return _emit(records, errors, args)


# -- verify --------------------------------------------------------------------


def _verify() -> int:
    """Cross-check fast paths against their independent oracles."""
    from .coflow import Flow, Coflow, cct, random_coflow
    from .corba import corba, corba_fast
    from .baselines import mincct_s
    from .lpcore import build_cos_relax_cvx, solve_lp
    from .netgraph import max_capacity_path
    from .optba import RoutingPlan, optba_allocate, optba_lp_oracle
    from .oracles import (
        enumerate_simple_paths,
        random_connected_network,
        widest_path_by_enumeration,
    )

    failures = 0

    def report(name: str, ok: bool, note: str = "") -> None:
        nonlocal failures
        if not ok:
            failures += 1
        print(f"{'PASS' if ok else 'FAIL'}  {name}{'  ' + note if note else ''}")

    rng = np.random.default_rng(20240901)

    # widest path vs exhaustive enumeration
    worst = None
    for _ in range(60):
        net = random_connected_network(rng, int(rng.integers(4, 9)), 6)
        a, b = rng.choice(net.node_count, size=2, replace=False)
        fast = max_capacity_path(net, int(a), int(b))
        slow = widest_path_by_enumeration(net, int(a), int(b))
        if (fast is None) != (slow is None) or (
            fast is not None and fast.nodes != slow.nodes
        ):
            worst = (net, int(a), int(b))
            break
    report("widest path == exhaustive enumeration (60 random graphs)", worst is None)

    # closed-form allocation vs LP oracle
    max_gap = 0.0
    for _ in range(60):
        net = random_connected_network(rng, int(rng.integers(4, 9)), 6)
        flows = []
        for fid in range(int(rng.integers(2, 5))):
            a, b = rng.choice(net.node_count, size=2, replace=False)
            flows.append(Flow(fid, int(a), int(b), float(rng.uniform(10, 100))))
        routes = {}
        ok = True
        for f in flows:
            paths = enumerate_simple_paths(net, f.src, f.dst)
            routes[f.id] = paths[int(rng.integers(len(paths)))]
        plan = RoutingPlan(routes)
        vols = {f.id: f.volume for f in flows}
        rates = optba_allocate(plan, vols, net)
        worst_ct = max(vols[f.id] / rates[f.id] for f in flows)
        oracle = optba_lp_oracle(plan, vols, net)
        max_gap = max(max_gap, abs(worst_ct - oracle) / oracle)
    report(
        "fixed-route allocation == LP oracle (60 random instances)",
        max_gap < 1e-6,
        f"max relative gap {max_gap:.2e}",
    )

    # relaxation optimum is a lower bound for every scheduler
    violations = 0
    for seed in range(5):
        srng = np.random.default_rng(seed)
        net = fat_tree(4, 2, 10.0)
        cf = random_coflow(net, 6, 0.7, 1000.0, srng)
        lower = solve_lp(build_cos_relax_cvx(net, cf)).objective
        for algo in (corba, corba_fast, mincct_s):
            if cct(algo(net, cf)) < lower * (1 - 1e-6):
                violations += 1
    report("relaxation lower-bounds all schedulers (5 seeds x 3 algos)", violations == 0)

    print("verify:", "all suites passed" if failures == 0 else f"{failures} suite(s) failed")
    return 0 if failures == 0 else 1


# -- argument wiring -------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="coflowsched",
        description="Coflow scheduling experiments: topology, offline, online, sweeps.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    topo = sub.add_parser("topo", help="emit a FatTree topology as JSON")
    topo.add_argument("--k", type=int, default=4, help="pods (even)")
    topo.add_argument("--alpha-over", type=int, default=2, dest="alpha_over")
    topo.add_argument("--capacity", type=float, default=10.0, help="Gb/s per link")
    topo.add_argument("--out", help="output path (default stdout)")

    def experiment_args(p):
        p.add_argument("--config", help="JSON or TOML config file")
        p.add_argument("--seeds", help='seed list, e.g. "1..20" or "0,3,7"')
        p.add_argument("--algo", help="comma-separated algorithm list")
        p.add_argument("--jobs", type=int, default=1, help="parallel workers")
        p.add_argument("--out", help="CSV output path (default stdout)")
        p.add_argument("--summary", action="store_true", help="mean/stddev to stderr")
        p.add_argument(
            "--set",
            action="append",
            metavar="KEY=VALUE",
            help="override a config key (repeatable)",
        )

    offline = sub.add_parser("offline", help="single-coflow experiments")
    experiment_args(offline)

    online = sub.add_parser("online", help="arrival-process experiments")
    experiment_args(online)

    sweep = sub.add_parser("sweep", help="offline runs over a config-key grid")
    sweep.add_argument("grid", help='e.g. "n_flows=10..100:10"')
    experiment_args(sweep)

    sub.add_parser("verify", help="run oracle-equivalence suites")
    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(
        level=os.environ.get("COFLOWSCHED_LOG", "WARNING").upper(),
        format="%(levelname)s %(name)s: %(message)s",
    )
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "topo":
            net = fat_tree(args.k, args.alpha_over, args.capacity)
            text = json.dumps(net.to_json(), indent=2) + "\n"
            if args.out:
                with open(args.out, "w") as fh:
                    fh.write(text)
            else:
                sys.stdout.write(text)
            return 0
        if args.command == "offline":
            return _experiment_cmd(args, OfflineConfig, _offline_task, 20)
        if args.command == "online":
            return _experiment_cmd(args, OnlineConfig, _online_task, 10)
        if args.command == "sweep":
            key, values = _parse_grid(args.grid)
            args._grid_values = [(key, v) for v in values]
            return _experiment_cmd(args, OfflineConfig, _offline_task, 20)
        if args.command == "verify":
            return _verify()
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    raise AssertionError("unreachable")


if __name__ == "__main__":
    sys.exit(main())
