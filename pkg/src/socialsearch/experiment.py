"""Experiment orchestration: network matrix, trial blocks, and metrics output."""

from __future__ import annotations

import concurrent.futures
import logging
import math
import platform
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from . import __version__
from .communities import detect_communities, load_communities, remap_to_graph
from .geo import (
    CONTIGUOUS_US,
    BoundingBox,
    build_grid,
    geographic_diameter_arrays,
    write_locations,
)
from .graph import SocialGraph, bfs_hops, giant_component, load_graph, write_edges
from .knowledge import KnowledgeModel
from .netgen import (
    DistanceRanges,
    EmbeddingSpec,
    configuration_model,
    embed_nodes,
    erdos_renyi,
    rewire_preserving_degree_range,
    sample_degree_sequence,
)
from .routing import RoutingContext, Weights, route

logger = logging.getLogger(__name__)

DEFAULT_WEIGHT_SETTINGS = (
    Weights(0.0, 0.0, 0.0),
    Weights(1.0, 0.0, 0.0),
    Weights(0.0, 1.0, 0.0),
    Weights(0.0, 0.0, 1.0),
    Weights(0.25, 0.25, 0.5),
)

DEFAULT_KAPPAS = (0, 3, 6, 12, 24, 48)

FRIENDSHIP_MODELS = ("original", "degree-range-preserving", "uniform-random", "exponential", "power-law")


@dataclass
class ExperimentConfig:
    """Inputs, matrix, and seeds for one experiment run.

    File-based runs give ``edges_file``/``locations_file``; fully synthetic
    runs give ``n_nodes`` and ``mean_degree`` instead.  Every seed governs
    exactly one source of randomness so results are reproducible and
    independently variable.
    """

    edges_file: str | None = None
    locations_file: str | None = None
    communities_file: str | None = None
    n_nodes: int | None = None
    mean_degree: float | None = None
    bbox: BoundingBox = CONTIGUOUS_US
    side_km: float = 70.0
    embeddings: tuple[str, ...] = ("original",)
    friendships: tuple[str, ...] = ("original",)
    weight_settings: tuple[Weights, ...] = DEFAULT_WEIGHT_SETTINGS
    kappas: tuple[int, ...] = DEFAULT_KAPPAS
    pair_count: int = 100
    min_separation_km: float = 1000.0
    repetitions: int = 100
    hop_limit: int = 50
    samples_per_spec: int = 10
    runs_per_sample: int = 10
    knowledge_seed: int = 20210
    pair_seed: int = 20211
    decision_seed: int = 20212
    network_seed: int = 20213
    community_seed: int = 20214
    powerlaw_gamma: float = 1.49
    powerlaw_d_min: int = 1
    rewire_attempts: int | None = None
    fof_scoring: str = "max"
    community_metric: str = "smallest"
    direct_friend_shortcut: bool = True
    d_max_km: float | None = None
    workers: int = 1
    export_samples: bool = False

    def validate(self) -> None:
        has_files = self.edges_file is not None and self.locations_file is not None
        if (self.edges_file is None) != (self.locations_file is None):
            raise ValueError("edges_file and locations_file go together")
        needs_base = "original" in self.embeddings or "original" in self.friendships \
            or "degree-range-preserving" in self.friendships
        if needs_base and not has_files:
            raise ValueError("original/rewired networks need edges_file and locations_file")
        if not has_files:
            if self.n_nodes is None or self.mean_degree is None:
                raise ValueError("synthetic-only runs need n_nodes and mean_degree")
        for label in self.embeddings:
            EmbeddingSpec.from_label(label)  # raises on nonsense
        for label in self.friendships:
            if label not in FRIENDSHIP_MODELS:
                raise ValueError(f"unknown friendship model {label!r}")
        if not self.embeddings or not self.friendships:
            raise ValueError("need at least one embedding and one friendship model")
        if not self.weight_settings or not self.kappas:
            raise ValueError("need at least one weight setting and one kappa")
        if any(k < 0 for k in self.kappas):
            raise ValueError("kappa must be non-negative")
        for positive, name in (
            (self.pair_count, "pair_count"),
            (self.repetitions, "repetitions"),
            (self.hop_limit, "hop_limit"),
            (self.samples_per_spec, "samples_per_spec"),
            (self.runs_per_sample, "runs_per_sample"),
            (self.workers, "workers"),
        ):
            if positive < 1:
                raise ValueError(f"{name} must be at least 1")
        if self.min_separation_km < 0:
            raise ValueError("min_separation_km must be non-negative")


@dataclass(frozen=True)
class MetricsRow:
    embedding: str
    friendship: str
    weights: Weights
    kappa: int
    success_rate: float
    success_se: float
    stretch: float
    stretch_se: float
    mean_hops: float
    pairs_excluded: int


CSV_COLUMNS = (
    "embedding",
    "friendship",
    "w_d",
    "w_c",
    "w_p",
    "kappa",
    "success_rate",
    "success_se",
    "stretch",
    "stretch_se",
    "mean_hops",
    "pairs_excluded",
)


def _fmt(x: float) -> str:
    if isinstance(x, float) and math.isnan(x):
        return "nan"
    return f"{x:.10g}"


@dataclass
class MetricsTable:
    rows: list[MetricsRow] = field(default_factory=list)

    def to_csv(self) -> str:
        lines = [",".join(CSV_COLUMNS)]
        for r in self.rows:
            lines.append(
                ",".join(
                    (
                        r.embedding,
                        r.friendship,
                        _fmt(r.weights.w_d),
                        _fmt(r.weights.w_c),
                        _fmt(r.weights.w_p),
                        str(r.kappa),
                        _fmt(r.success_rate),
                        _fmt(r.success_se),
                        _fmt(r.stretch),
                        _fmt(r.stretch_se),
                        _fmt(r.mean_hops),
                        str(r.pairs_excluded),
                    )
                )
            )
        return "\n".join(lines) + "\n"

    def write(self, path: str | Path) -> None:
        Path(path).write_text(self.to_csv(), encoding="utf-8")


_MAX_PAIR_DRAWS = 1_000_000


def sample_pairs(
    g: SocialGraph,
    count: int,
    min_separation_km: float,
    rng: np.random.Generator,
) -> list[tuple[int, int]]:
    """Uniform source/target pairs at least ``min_separation_km`` apart.

    Pairs are drawn independently (the same pair can repeat).  Raises after
    a million draws without filling the quota, which signals a separation
    no pair can meet.
    """
    from .geo import haversine_km_arrays

    pairs: list[tuple[int, int]] = []
    draws = 0
    while len(pairs) < count:
        batch = min(4096, _MAX_PAIR_DRAWS)
        cand = rng.integers(g.n, size=(batch, 2))
        draws += batch
        ok = cand[:, 0] != cand[:, 1]
        d = haversine_km_arrays(
            g.lats[cand[:, 0]], g.lons[cand[:, 0]], g.lats[cand[:, 1]], g.lons[cand[:, 1]]
        )
        ok &= d >= min_separation_km
        for a, b in cand[ok][: count - len(pairs)]:
            pairs.append((int(a), int(b)))
        if draws >= _MAX_PAIR_DRAWS and len(pairs) < count:
            raise RuntimeError(
                f"could not find {count} pairs {min_separation_km} km apart "
                f"after {draws} draws ({len(pairs)} found)"
            )
    return pairs


@dataclass
class TrialBlock:
    """Raw outcomes of repetitions x pairs trials on one network sample."""

    pairs: list[tuple[int, int]]
    shortest: list[int | None]
    delivered: np.ndarray  # bool, (reps, n_pairs)
    hops: np.ndarray  # int, (reps, n_pairs), -1 where undelivered


def run_trial_block(
    ctx: RoutingContext,
    pairs: list[tuple[int, int]],
    shortest: list[int | None],
    repetitions: int,
    decision_entropy: tuple[int, ...],
    workers: int = 1,
) -> TrialBlock:
    """Route every pair ``repetitions`` times.

    Each trial's generator is seeded by ``(*decision_entropy, pair_index,
    repetition)``, so outcomes are independent of execution order and of
    ``workers``.
    """
    n_pairs = len(pairs)
    delivered = np.zeros((repetitions, n_pairs), dtype=bool)
    hops = np.full((repetitions, n_pairs), -1, dtype=np.int64)

    def one(rep: int, pi: int) -> None:
        rng = np.random.default_rng(np.random.SeedSequence(decision_entropy + (pi, rep)))
        res = route(ctx, pairs[pi][0], pairs[pi][1], rng)
        delivered[rep, pi] = res.success
        if res.success:
            hops[rep, pi] = res.hops

    tasks = [(rep, pi) for rep in range(repetitions) for pi in range(n_pairs)]
    if workers > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(lambda t: one(*t), tasks))
    else:
        for rep, pi in tasks:
            one(rep, pi)
    return TrialBlock(pairs=pairs, shortest=shortest, delivered=delivered, hops=hops)


@dataclass(frozen=True)
class StretchSummary:
    per_pair: np.ndarray  # NaN where excluded
    mean: float
    se: float
    excluded: int


def compute_stretch(block: TrialBlock) -> StretchSummary:
    """Mean delivered hops over shortest-path hops, pair by pair.

    A pair with no delivered trial (or an unreachable target) is excluded
    and reported in the count rather than silently skewing the mean.
    """
    n_pairs = len(block.pairs)
    per_pair = np.full(n_pairs, np.nan)
    for pi in range(n_pairs):
        sp = block.shortest[pi]
        got = block.delivered[:, pi]
        if sp is None or sp <= 0 or not got.any():
            continue
        per_pair[pi] = float(block.hops[got, pi].mean()) / sp
    valid = per_pair[~np.isnan(per_pair)]
    if valid.size == 0:
        return StretchSummary(per_pair, float("nan"), float("nan"), n_pairs)
    se = float(valid.std(ddof=1) / math.sqrt(valid.size)) if valid.size > 1 else 0.0
    return StretchSummary(per_pair, float(valid.mean()), se, int(n_pairs - valid.size))


class _CellAccumulator:
    """Pools trial outcomes for one (embedding, friendship, weights, kappa)."""

    def __init__(self) -> None:
        self.run_rates: list[float] = []
        self.stretches: list[float] = []
        self.excluded = 0
        self.delivered_trials = 0
        self.total_trials = 0
        self.delivered_hops = 0

    def add(self, block: TrialBlock) -> None:
        self.run_rates.extend(block.delivered.mean(axis=1).tolist())
        summary = compute_stretch(block)
        self.stretches.extend(summary.per_pair[~np.isnan(summary.per_pair)].tolist())
        self.excluded += summary.excluded
        self.delivered_trials += int(block.delivered.sum())
        self.total_trials += block.delivered.size
        self.delivered_hops += int(block.hops[block.delivered].sum())

    def finish(self, embedding: str, friendship: str, w: Weights, kappa: int) -> MetricsRow:
        rates = np.array(self.run_rates)
        success_rate = self.delivered_trials / self.total_trials
        success_se = float(rates.std(ddof=1) / math.sqrt(rates.size)) if rates.size > 1 else 0.0
        if self.stretches:
            s = np.array(self.stretches)
            stretch = float(s.mean())
            stretch_se = float(s.std(ddof=1) / math.sqrt(s.size)) if s.size > 1 else 0.0
        else:
            stretch = float("nan")
            stretch_se = float("nan")
        mean_hops = (
            self.delivered_hops / self.delivered_trials if self.delivered_trials else float("nan")
        )
        return MetricsRow(
            embedding=embedding,
            friendship=friendship,
            weights=w,
            kappa=kappa,
            success_rate=success_rate,
            success_se=success_se,
            stretch=stretch,
            stretch_se=stretch_se,
            mean_hops=mean_hops,
            pairs_excluded=self.excluded,
        )


def _base_mean_degree(cfg: ExperimentConfig, base: SocialGraph | None) -> float:
    if cfg.mean_degree is not None:
        return cfg.mean_degree
    if base is None:
        raise ValueError("mean_degree is required without base files")
    return 2.0 * base.edge_count / base.n


def _build_friendship(
    label: str,
    cfg: ExperimentConfig,
    base: SocialGraph | None,
    grid,
    rng: np.random.Generator,
) -> SocialGraph:
    """Sample the topology for one network draw, on base locations if any."""
    if label == "original":
        assert base is not None
        return base
    if label == "degree-range-preserving":
        assert base is not None
        attempts = cfg.rewire_attempts if cfg.rewire_attempts is not None else 10 * base.edge_count
        result = rewire_preserving_degree_range(base, grid, DistanceRanges(), rng, attempts=attempts)
        logger.info("rewire: %d swaps in %d attempts", result.swaps, result.attempts)
        return result.graph
    n = base.n if base is not None else cfg.n_nodes
    mean_degree = _base_mean_degree(cfg, base)
    if label == "uniform-random":
        g = erdos_renyi(n, mean_degree, rng)
    elif label == "exponential":
        seq = sample_degree_sequence("exponential", n, rng, mean=mean_degree)
        g = configuration_model(seq, rng)
    elif label == "power-law":
        seq = sample_degree_sequence(
            "power-law", n, rng,
            gamma=cfg.powerlaw_gamma, d_min=cfg.powerlaw_d_min, target_mean=mean_degree,
        )
        g = configuration_model(seq, rng)
    else:
        raise ValueError(f"unknown friendship model {label!r}")
    if base is not None:
        # inherit the base coordinates node-for-node; embeddings may replace them
        g = g.with_locations(base.lats, base.lons)
    return g


def _apply_embedding(
    g: SocialGraph,
    label: str,
    has_base: bool,
    grid,
    rng: np.random.Generator,
) -> SocialGraph:
    spec = EmbeddingSpec.from_label(label)
    if spec.kind == "original":
        return g  # locations already in place
    if has_base:
        # g carries base coordinates node-for-node, so keying off its own
        # locations gives the base cell populations without an id mapping
        keyed = {int(e): g.location(i) for i, e in enumerate(g.ext_ids)}
        new_locs = embed_nodes(grid, keyed, spec, rng)
    else:
        new_locs = embed_nodes(grid, None, spec, rng, n_nodes=g.n)
    lats = np.array([new_locs[int(e)].lat for e in g.ext_ids])
    lons = np.array([new_locs[int(e)].lon for e in g.ext_ids])
    return g.with_locations(lats, lons)


def run_experiment(cfg: ExperimentConfig, out_dir: str | Path | None = None) -> MetricsTable:
    """Run the full (embedding x friendship x weights x kappa) matrix.

    Original/original cells run ``repetitions`` repetitions on the one real
    network; cells with any generated ingredient run ``samples_per_spec``
    network draws with ``runs_per_sample`` repetitions each.  All weight and
    kappa settings share each network draw and its source/target pairs, so
    comparisons across settings see identical conditions.

    Returns the metrics table; with ``out_dir`` also writes ``metrics.csv``
    and ``manifest.txt`` (plus per-sample TSVs when ``export_samples``).
    """
    cfg.validate()
    out_path = Path(out_dir) if out_dir is not None else None
    if out_path is not None:
        out_path.mkdir(parents=True, exist_ok=True)
    grid = build_grid(cfg.bbox, cfg.side_km)
    base = None
    base_comms_file = None
    if cfg.edges_file is not None:
        full = load_graph(cfg.edges_file, cfg.locations_file)
        base = giant_component(full)
        logger.info("base network: %d of %d nodes in the giant component", base.n, full.n)
        if cfg.communities_file is not None:
            base_comms_file = load_communities(cfg.communities_file)
    table = MetricsTable()
    exported: list[str] = []
    for ei, emb_label in enumerate(cfg.embeddings):
        for fi, fr_label in enumerate(cfg.friendships):
            pristine = emb_label == "original" and fr_label == "original"
            n_samples = 1 if pristine else cfg.samples_per_spec
            reps = cfg.repetitions if pristine else cfg.runs_per_sample
            cells = {
                (wi, ki): _CellAccumulator()
                for wi in range(len(cfg.weight_settings))
                for ki in range(len(cfg.kappas))
            }
            for s in range(n_samples):
                rng_net = np.random.default_rng(
                    np.random.SeedSequence((cfg.network_seed, ei, fi, s))
                )
                g = _build_friendship(fr_label, cfg, base, grid, rng_net)
                g = _apply_embedding(g, emb_label, base is not None, grid, rng_net)
                g = giant_component(g)
                if g.n < 2:
                    raise RuntimeError(f"sample {s} of {emb_label}/{fr_label} collapsed")
                if fr_label == "original" and base_comms_file is not None:
                    comms = remap_to_graph(base_comms_file, g)
                else:
                    comms = detect_communities(g, cfg.community_seed)
                d_max = cfg.d_max_km
                if d_max is None:
                    d_max = geographic_diameter_arrays(g.lats, g.lons)
                rng_pairs = np.random.default_rng(
                    np.random.SeedSequence((cfg.pair_seed, ei, fi, s))
                )
                pairs = sample_pairs(g, cfg.pair_count, cfg.min_separation_km, rng_pairs)
                shortest = [bfs_hops(g, a, b) for a, b in pairs]
                if out_path is not None and cfg.export_samples and not pristine:
                    tag = f"{emb_label.replace(':', '-')}_{fr_label}_{s}"
                    write_edges(out_path / f"sample_{tag}.edges.tsv", g)
                    write_locations(
                        out_path / f"sample_{tag}.locations.tsv",
                        {int(e): g.location(i) for i, e in enumerate(g.ext_ids)},
                    )
                    exported.append(tag)
                for wi, w in enumerate(cfg.weight_settings):
                    for ki, kappa in enumerate(cfg.kappas):
                        model = KnowledgeModel(kappa, cfg.knowledge_seed)
                        ctx = RoutingContext(
                            g,
                            comms,
                            model,
                            w,
                            d_max=d_max,
                            hop_limit=cfg.hop_limit,
                            fof_scoring=cfg.fof_scoring,
                            community_metric=cfg.community_metric,
                            direct_friend_shortcut=cfg.direct_friend_shortcut,
                        )
                        block = run_trial_block(
                            ctx,
                            pairs,
                            shortest,
                            reps,
                            (cfg.decision_seed, ei, fi, s),
                            workers=cfg.workers,
                        )
                        cells[(wi, ki)].add(block)
            for wi, w in enumerate(cfg.weight_settings):
                for ki, kappa in enumerate(cfg.kappas):
                    table.rows.append(cells[(wi, ki)].finish(emb_label, fr_label, w, kappa))
    if out_path is not None:
        table.write(out_path / "metrics.csv")
        (out_path / "manifest.txt").write_text(_manifest(cfg, table, exported), encoding="utf-8")
    return table


def _manifest(cfg: ExperimentConfig, table: MetricsTable, exported: list[str]) -> str:
    lines = []
    for f in fields(ExperimentConfig):
        value = getattr(cfg, f.name)
        if isinstance(value, tuple) and value and isinstance(value[0], Weights):
            value = [(w.w_d, w.w_c, w.w_p) for w in value]
        lines.append(f"{f.name}={value}")
    lines.append(f"rows={len(table.rows)}")
    if exported:
        lines.append(f"exported_samples={','.join(exported)}")
    lines.append(f"package_version={__version__}")
    lines.append(f"python={platform.python_version()}")
    lines.append(f"numpy={np.__version__}")
    return "\n".join(lines) + "\n"
