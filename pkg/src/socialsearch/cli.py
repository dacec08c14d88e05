"""Command-line entry points.

``socialsearch experiment run`` drives the full matrix from a TOML config,
``socialsearch route one`` traces a single forwarding trial, and the
``socialsearch analyze`` subcommands print descriptive statistics of a
network file pair.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # 3.10
    import tomli as tomllib

from .analysis import (
    cell_population_report,
    community_reach_stats,
    distance_distribution,
    fof_size_stats,
    prominence_stats,
)
from .communities import detect_communities, load_communities, remap_to_graph
from .experiment import ExperimentConfig, run_experiment
from .geo import CONTIGUOUS_US, BoundingBox, build_grid, haversine_km, load_locations
from .graph import giant_component, load_graph
from .knowledge import KnowledgeModel
from .routing import RoutingContext, Weights, route

logger = logging.getLogger(__name__)

_SEED_KEYS = {
    "knowledge": "knowledge_seed",
    "pair": "pair_seed",
    "decision": "decision_seed",
    "network": "network_seed",
    "community": "community_seed",
}

_BBOX_KEYS = ("lat_min", "lat_max", "lon_min", "lon_max")

# config keys that map straight onto ExperimentConfig fields
_PLAIN_KEYS = {
    "edges_file",
    "locations_file",
    "communities_file",
    "n_nodes",
    "mean_degree",
    "side_km",
    "pair_count",
    "min_separation_km",
    "repetitions",
    "hop_limit",
    "samples_per_spec",
    "runs_per_sample",
    "powerlaw_gamma",
    "powerlaw_d_min",
    "rewire_attempts",
    "fof_scoring",
    "community_metric",
    "direct_friend_shortcut",
    "d_max_km",
    "workers",
    "export_samples",
}


def parse_config(text: str) -> ExperimentConfig:
    """Build an ExperimentConfig from TOML text.

    Unknown keys are errors: a typo that silently fell back to a default
    would invalidate a whole run.
    """
    data = tomllib.loads(text)
    kwargs = {}
    for key, value in data.items():
        if key in _PLAIN_KEYS:
            kwargs[key] = value
        elif key in ("embeddings", "friendships"):
            kwargs[key] = tuple(str(v) for v in value)
        elif key == "kappas":
            kwargs[key] = tuple(int(v) for v in value)
        elif key == "weight_settings":
            settings = []
            for triple in value:
                if len(triple) != 3:
                    raise ValueError(f"weight setting {triple!r} needs exactly 3 values")
                settings.append(Weights(*map(float, triple)))
            kwargs[key] = tuple(settings)
        elif key == "seeds":
            for name, seed in value.items():
                if name not in _SEED_KEYS:
                    raise ValueError(f"unknown seed {name!r} (expected one of {sorted(_SEED_KEYS)})")
                kwargs[_SEED_KEYS[name]] = int(seed)
        elif key == "bbox":
            unknown = set(value) - set(_BBOX_KEYS)
            if unknown:
                raise ValueError(f"unknown bbox keys {sorted(unknown)}")
            missing = set(_BBOX_KEYS) - set(value)
            if missing:
                raise ValueError(f"bbox is missing {sorted(missing)}")
            kwargs[key] = BoundingBox(*(float(value[k]) for k in _BBOX_KEYS))
        else:
            valid = sorted(
                _PLAIN_KEYS
                | {"embeddings", "friendships", "kappas", "weight_settings", "seeds", "bbox"}
            )
            raise ValueError(f"unknown config key {key!r} (expected one of {valid})")
    cfg = ExperimentConfig(**kwargs)
    cfg.validate()
    return cfg


def load_config(path: str | Path) -> ExperimentConfig:
    return parse_config(Path(path).read_text(encoding="utf-8"))


def _load_network(args) -> tuple:
    """Giant component plus a community assignment, from CLI file options."""
    g = giant_component(load_graph(args.edges, args.locations))
    if getattr(args, "communities", None):
        comms = remap_to_graph(load_communities(args.communities), g)
    else:
        comms = detect_communities(g, seed=0)
    return g, comms


def _parse_weights(text: str) -> Weights:
    parts = text.split(",")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("weights must be three comma-separated numbers")
    try:
        return Weights(*(float(p) for p in parts))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def _cmd_experiment_run(args) -> int:
    cfg = load_config(args.config)
    if args.workers is not None:
        cfg.workers = args.workers
    table = run_experiment(cfg, out_dir=args.out)
    print(f"wrote {len(table.rows)} metric rows to {Path(args.out) / 'metrics.csv'}")
    return 0


def _cmd_route_one(args) -> int:
    g, comms = _load_network(args)
    try:
        source = g.dense_id(args.source)
        target = g.dense_id(args.target)
    except KeyError as exc:
        print(f"error: {exc.args[0]} (only the giant component is routable)", file=sys.stderr)
        return 1
    model = KnowledgeModel(args.kappa, args.knowledge_seed)
    ctx = RoutingContext(
        g,
        comms,
        model,
        args.weights,
        d_max=args.d_max_km,
        hop_limit=args.hop_limit,
        fof_scoring=args.fof_scoring,
    )
    rng = np.random.default_rng(args.decision_seed)
    result = route(ctx, source, target, rng)
    tgt_pt = g.location(target)
    for step, node in enumerate(result.path):
        pt = g.location(node)
        d = haversine_km(pt, tgt_pt)
        print(f"{step:4d}  node {int(g.ext_ids[node]):>10d}  ({pt.lat:9.4f}, {pt.lon:9.4f})  {d:9.1f} km")
    if result.success:
        print(f"delivered in {result.hops} hops")
    else:
        print(f"failed after {result.hops} hops ({result.termination})")
    return 0 if result.success else 1


def _cmd_analyze_distances(args) -> int:
    g, comms = _load_network(args)
    dist = distance_distribution(
        g, args.relation, communities=comms if args.relation == "communities" else None
    )
    print(f"{args.relation}: {dist.units} units")
    print(f"{'range':>16}  {'share %':>8}  {'cum %':>8}")
    for label, pct, cum in dist.rows():
        print(f"{label:>16}  {pct:8.2f}  {cum:8.2f}")
    return 0


def _cmd_analyze_reach(args) -> int:
    g, comms = _load_network(args)
    model = KnowledgeModel(args.kappa, args.knowledge_seed)
    sizes = fof_size_stats(g, model)
    reach = community_reach_stats(g, comms, model)
    print(f"kappa: {args.kappa}")
    print(f"mean friends:              {sizes.mean_friends:10.2f}")
    print(f"mean distinct fof:         {sizes.mean_fof:10.2f}")
    print(f"mean known fof:            {sizes.mean_known_fof:10.2f}")
    print(f"mean communities, own:     {reach.mean_own:10.2f}")
    print(f"mean communities, friends: {reach.mean_via_friends:10.2f}")
    print(f"mean communities, fof:     {reach.mean_via_fof:10.2f}")
    print(f"mean communities, known:   {reach.mean_via_known_fof:10.2f}")
    return 0


def _cmd_analyze_prominence(args) -> int:
    g, _ = _load_network(args)
    model = KnowledgeModel(args.kappa, args.knowledge_seed)
    stats = prominence_stats(g, model, top_fraction=args.fraction)
    print(f"prominent nodes: {stats.count} (degree >= {stats.threshold_degree})")
    if stats.degenerate:
        print("every node is prominent at this fraction; averages are undefined")
        return 1
    print(f"mean prominent friends:   {stats.mean_prominent_friends:8.3f}")
    print(f"mean prominent fof:       {stats.mean_prominent_fof:8.3f}")
    print(f"mean prominent known fof: {stats.mean_prominent_known_fof:8.3f}")
    return 0


def _cmd_analyze_cells(args) -> int:
    locations = load_locations(args.locations)
    bbox = CONTIGUOUS_US
    grid = build_grid(bbox, args.side_km)
    report = cell_population_report(grid, list(locations.values()), top=args.top)
    print(
        f"{report.nonempty_cells} of {report.n_cells} cells populated, "
        f"{report.total_inside} nodes inside, {report.total_outside} outside"
    )
    print(f"{'cell':>8}  {'nodes':>8}  {'share %':>8}  {'lat':>9}  {'lon':>10}")
    for cell, count, frac, lat, lon in report.rows:
        print(f"{cell:8d}  {count:8d}  {100 * frac:8.2f}  {lat:9.4f}  {lon:10.4f}")
    return 0


def _add_network_options(p: argparse.ArgumentParser, communities: bool = True) -> None:
    p.add_argument("--edges", required=True, help="edges TSV (one undirected edge per line)")
    p.add_argument("--locations", required=True, help="locations TSV (node, lat, lon)")
    if communities:
        p.add_argument(
            "--communities",
            help="communities TSV (node, community); detected from the graph when omitted",
        )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="socialsearch",
        description="Simulate greedy social search on geographic networks.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    top = parser.add_subparsers(dest="command", required=True)

    p_exp = top.add_parser("experiment", help="run experiment matrices")
    exp_sub = p_exp.add_subparsers(dest="subcommand", required=True)
    p_run = exp_sub.add_parser("run", help="run the matrix described by a TOML config")
    p_run.add_argument("--config", required=True, help="TOML config file")
    p_run.add_argument("--out", required=True, help="output directory")
    p_run.add_argument("--workers", type=int, help="override the config worker count")
    p_run.set_defaults(func=_cmd_experiment_run)

    p_route = top.add_parser("route", help="trace forwarding trials")
    route_sub = p_route.add_subparsers(dest="subcommand", required=True)
    p_one = route_sub.add_parser("one", help="trace a single trial between two nodes")
    _add_network_options(p_one)
    p_one.add_argument("--source", type=int, required=True, help="source node id")
    p_one.add_argument("--target", type=int, required=True, help="target node id")
    p_one.add_argument(
        "--weights", type=_parse_weights, default=Weights(0.25, 0.25, 0.5),
        help="distance,community,popularity weights (default 0.25,0.25,0.5)",
    )
    p_one.add_argument("--kappa", type=int, default=6, help="known contacts per friend")
    p_one.add_argument("--hop-limit", type=int, default=50)
    p_one.add_argument("--fof-scoring", choices=("max", "self"), default="max")
    p_one.add_argument("--d-max-km", type=float, help="distance normalization override")
    p_one.add_argument("--knowledge-seed", type=int, default=20210)
    p_one.add_argument("--decision-seed", type=int, default=20212)
    p_one.set_defaults(func=_cmd_route_one)

    p_an = top.add_parser("analyze", help="descriptive statistics")
    an_sub = p_an.add_subparsers(dest="subcommand", required=True)

    p_dist = an_sub.add_parser("distances", help="pair-distance distribution of a relation")
    _add_network_options(p_dist)
    p_dist.add_argument(
        "--relation", choices=("friends", "fof", "communities"), default="friends"
    )
    p_dist.set_defaults(func=_cmd_analyze_distances)

    p_reach = an_sub.add_parser("reach", help="friend, fof, and community reach per node")
    _add_network_options(p_reach)
    p_reach.add_argument("--kappa", type=int, default=6)
    p_reach.add_argument("--knowledge-seed", type=int, default=20210)
    p_reach.set_defaults(func=_cmd_analyze_reach)

    p_prom = an_sub.add_parser("prominence", help="visibility of the highest-degree nodes")
    _add_network_options(p_prom, communities=False)
    p_prom.add_argument("--kappa", type=int, default=6)
    p_prom.add_argument("--fraction", type=float, default=0.01)
    p_prom.add_argument("--knowledge-seed", type=int, default=20210)
    p_prom.set_defaults(func=_cmd_analyze_prominence)

    p_cells = an_sub.add_parser("cells", help="grid occupancy of a locations file")
    p_cells.add_argument("--locations", required=True, help="locations TSV (node, lat, lon)")
    p_cells.add_argument("--side-km", type=float, default=70.0)
    p_cells.add_argument("--top", type=int, default=20, help="rows to print")
    p_cells.set_defaults(func=_cmd_analyze_cells)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except (ValueError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
