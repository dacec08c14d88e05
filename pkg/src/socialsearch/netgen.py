"""Synthetic networks: embeddings, degree-preserving rewiring, and null models."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .geo import GeoPoint, RhomboidGrid, haversine_km, haversine_km_arrays
from .graph import SocialGraph

logger = logging.getLogger(__name__)

# doubling breakpoints (km) used for friend-distance histograms and the
# range-preserving rewire; the implicit final bucket is everything beyond
DEFAULT_BREAKPOINTS_KM = (6.25, 12.5, 25.0, 50.0, 100.0, 200.0, 400.0, 800.0, 1600.0, 3200.0, 6400.0)


@dataclass(frozen=True)
class DistanceRanges:
    """Doubling distance buckets: bucket i covers (b[i-1], b[i]] km.

    Bucket 0 is everything up to the first breakpoint; one extra implicit
    bucket catches distances beyond the last breakpoint.
    """

    breakpoints: tuple[float, ...] = DEFAULT_BREAKPOINTS_KM

    def __post_init__(self) -> None:
        bp = self.breakpoints
        if len(bp) < 1 or bp[0] <= 0:
            raise ValueError("need at least one positive breakpoint")
        for prev, cur in zip(bp, bp[1:]):
            if cur <= prev:
                raise ValueError("breakpoints must increase strictly")
            if abs(cur / prev - 2.0) > 1e-9:
                raise ValueError("breakpoints must double")

    @property
    def n_buckets(self) -> int:
        return len(self.breakpoints) + 1

    def bucket(self, distance_km: float) -> int:
        if distance_km < 0:
            raise ValueError("distance must be non-negative")
        return int(np.searchsorted(self.breakpoints, distance_km, side="left"))

    def bucket_arrays(self, distances_km: np.ndarray) -> np.ndarray:
        return np.searchsorted(self.breakpoints, distances_km, side="left")

    def label(self, bucket: int) -> str:
        bp = self.breakpoints
        if bucket == 0:
            return f"<={bp[0]:g}"
        if bucket == len(bp):
            return f">{bp[-1]:g}"
        return f"{bp[bucket - 1]:g}-{bp[bucket]:g}"


# -- embeddings --------------------------------------------------------------

_EMBED_KINDS = ("original", "uniform-random", "exponential", "normal", "zipf")
_WITHIN_MODES = ("uniform", "geographic")


@dataclass(frozen=True)
class EmbeddingSpec:
    """How nodes get geographic positions.

    ``kind`` picks the per-cell population model: "original" keeps input
    locations, "uniform-random" drops every node in a random populated cell,
    and "exponential" / "normal" / "zipf" draw per-cell populations from the
    named distribution before apportioning nodes.  ``within_cell`` places
    nodes inside their cell: "uniform" anywhere, "geographic" mimicking the
    within-cell offsets of a similarly populated cell of the base data.
    ``mean`` and ``variance`` default to the base data's per-cell statistics;
    ``largest_cell`` is the rank-1 population of the zipf model.
    """

    kind: str
    within_cell: str = "uniform"
    mean: float | None = None
    variance: float | None = None
    largest_cell: float = 10700.0

    def __post_init__(self) -> None:
        if self.kind not in _EMBED_KINDS:
            raise ValueError(f"unknown embedding kind {self.kind!r}")
        if self.within_cell not in _WITHIN_MODES:
            raise ValueError(f"unknown within_cell mode {self.within_cell!r}")
        if self.mean is not None and self.mean <= 0:
            raise ValueError("mean must be positive")
        if self.variance is not None and self.variance <= 0:
            raise ValueError("variance must be positive")
        if self.kind == "zipf" and self.largest_cell <= 0:
            raise ValueError("largest_cell must be positive")

    @classmethod
    def from_label(cls, label: str, **overrides) -> "EmbeddingSpec":
        """Parse "kind" or "kind:within_cell" labels used by configs."""
        kind, _, within = label.partition(":")
        if within:
            overrides.setdefault("within_cell", within)
        return cls(kind=kind, **overrides)

    @property
    def label(self) -> str:
        if self.kind == "original":
            return self.kind
        return f"{self.kind}:{self.within_cell}"


def _locate_points(grid: RhomboidGrid, locations: dict[int, GeoPoint]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    nodes = np.array(sorted(locations), dtype=np.int64)
    lats = np.array([locations[int(k)].lat for k in nodes])
    lons = np.array([locations[int(k)].lon for k in nodes])
    return nodes, grid.locate_arrays(lats, lons), np.column_stack((lats, lons))


def apportion(raw_sizes: np.ndarray, total: int) -> np.ndarray:
    """Scale non-negative cell sizes to integers summing exactly to ``total``.

    Largest-remainder rounding; remainder ties go to the lower index, so the
    result is deterministic.
    """
    raw = np.asarray(raw_sizes, dtype=np.float64)
    if np.any(raw < 0):
        raise ValueError("sizes must be non-negative")
    mass = raw.sum()
    if mass <= 0:
        raise ValueError("cannot apportion: all sizes are zero")
    scaled = raw * (total / mass)
    counts = np.floor(scaled).astype(np.int64)
    short = total - int(counts.sum())
    if short > 0:
        frac = scaled - counts
        order = np.lexsort((np.arange(len(frac)), -frac))
        counts[order[:short]] += 1
    return counts


def draw_cell_sizes(spec: EmbeddingSpec, n_cells: int, rng: np.random.Generator,
                    base_mean: float | None = None, base_var: float | None = None) -> np.ndarray:
    """Raw per-cell populations before apportioning, in cell order.

    Exponential draws keep their float values; normal draws are truncated at
    zero and rounded; zipf sizes are ``largest_cell / rank`` with ranks
    assigned by a random permutation of the cells.
    """
    if spec.kind == "exponential":
        mean = spec.mean if spec.mean is not None else base_mean
        if mean is None:
            raise ValueError("exponential embedding needs a mean (none given, no base data)")
        return rng.exponential(mean, n_cells)
    if spec.kind == "normal":
        mean = spec.mean if spec.mean is not None else base_mean
        var = spec.variance if spec.variance is not None else base_var
        if mean is None or var is None:
            raise ValueError("normal embedding needs mean and variance (none given, no base data)")
        draws = rng.normal(mean, math.sqrt(var), n_cells)
        return np.rint(np.maximum(0.0, draws))
    if spec.kind == "zipf":
        ranks = rng.permutation(n_cells) + 1
        return spec.largest_cell / ranks
    raise AssertionError(spec.kind)


def embed_nodes(
    grid: RhomboidGrid,
    base_locations: dict[int, GeoPoint] | None,
    spec: EmbeddingSpec,
    rng: np.random.Generator,
    n_nodes: int | None = None,
) -> dict[int, GeoPoint]:
    """Assign every node a location according to ``spec``.

    Nodes come from ``base_locations`` (keys) or, without base data, are
    ``0..n_nodes-1``.  Only cells populated in the base data are eligible;
    with no base data every grid cell is.  Draw order is fixed: cell sizes,
    node shuffle, then per-cell placements in ascending cell id, so results
    depend only on the rng state and inputs.
    """
    if spec.kind == "original":
        if base_locations is None:
            raise ValueError("original embedding needs base locations")
        return dict(base_locations)
    if base_locations is not None:
        nodes, base_cells, base_coords = _locate_points(grid, base_locations)
        eligible = np.unique(base_cells[base_cells >= 0])
        if eligible.size == 0:
            raise ValueError("no base location falls inside the grid")
        pops = np.bincount(base_cells[base_cells >= 0], minlength=grid.n_cells)
        base_mean = float(pops[eligible].mean())
        base_var = float(pops[eligible].var())
    else:
        if n_nodes is None:
            raise ValueError("need base locations or n_nodes")
        nodes = np.arange(n_nodes, dtype=np.int64)
        base_cells = base_coords = None
        eligible = np.arange(grid.n_cells, dtype=np.int64)
        base_mean = base_var = None
    if spec.within_cell == "geographic" and base_locations is None:
        raise ValueError("geographic placement needs base locations to mimic")
    n = len(nodes)
    if n == 0:
        return {}

    # node -> cell assignment
    if spec.kind == "uniform-random":
        cell_of = eligible[rng.integers(eligible.size, size=n)]
    else:
        sizes = draw_cell_sizes(spec, eligible.size, rng, base_mean, base_var)
        counts = apportion(sizes, n)
        perm = rng.permutation(n)
        cell_of = np.empty(n, dtype=np.int64)
        cell_of[perm] = np.repeat(eligible, counts)

    # placement, cell by cell in ascending id
    out_lat = np.empty(n)
    out_lon = np.empty(n)
    if spec.within_cell == "geographic":
        donor_pops = pops[eligible]
        donor_offsets = {}
        for c in eligible.tolist():
            lat_lo, lat_hi, lon_lo, lon_hi = grid.cell_bounds(c)
            mask = base_cells == c
            donor_offsets[c] = (
                (base_coords[mask, 0] - lat_lo) / (lat_hi - lat_lo),
                (base_coords[mask, 1] - lon_lo) / (lon_hi - lon_lo),
            )
    for cell in np.unique(cell_of).tolist():
        members = np.flatnonzero(cell_of == cell)
        lat_lo, lat_hi, lon_lo, lon_hi = grid.cell_bounds(cell)
        q = len(members)
        if spec.within_cell == "uniform":
            f_lat = rng.random(q)
            f_lon = rng.random(q)
        else:
            # mimic the spread of the base cell whose population is closest
            donor = int(eligible[int(np.argmin(np.abs(donor_pops - q)))])
            off_lat, off_lon = donor_offsets[donor]
            pick = rng.integers(len(off_lat), size=q)
            f_lat = off_lat[pick]
            f_lon = off_lon[pick]
        out_lat[members] = lat_lo + f_lat * (lat_hi - lat_lo)
        out_lon[members] = lon_lo + f_lon * (lon_hi - lon_lo)
    return {int(nodes[i]): GeoPoint(float(out_lat[i]), float(out_lon[i])) for i in range(n)}


# -- degree- and range-preserving rewire -------------------------------------


class RewireResult(NamedTuple):
    graph: SocialGraph
    swaps: int
    attempts: int


def rewire_preserving_degree_range(
    g: SocialGraph,
    grid: RhomboidGrid,
    ranges: DistanceRanges,
    rng: np.random.Generator,
    attempts: int | None = None,
) -> RewireResult:
    """Shuffle edges while preserving each node's degree and its number of
    friends per distance range.

    Repeatedly samples two nodes u, v from the same grid cell and one friend
    of each (x of u, y of v); the swap replaces edges (u, x), (v, y) with
    (u, y), (v, x) when all four pair distances fall in the same range bucket
    and no multi-edge would appear.  Attempts that fail any check are simply
    skipped; the default budget is 10 edge-count attempts.
    """
    if attempts is None:
        attempts = 10 * g.edge_count
    cells = grid.locate_arrays(g.lats, g.lons)
    cell_nodes: dict[int, np.ndarray] = {}
    for c in np.unique(cells[cells >= 0]).tolist():
        members = np.flatnonzero(cells == c)
        if len(members) >= 2:
            cell_nodes[c] = members
    adj_list = [list(map(int, g.neighbors(i))) for i in range(g.n)]
    adj_set = [set(lst) for lst in adj_list]
    swaps = 0
    if cell_nodes:
        eligible = sorted(cell_nodes)
        pt = [GeoPoint(float(g.lats[i]), float(g.lons[i])) for i in range(g.n)]

        def bucket(a: int, b: int) -> int:
            return ranges.bucket(haversine_km(pt[a], pt[b]))

        for _ in range(attempts):
            cell = eligible[int(rng.integers(len(eligible)))]
            members = cell_nodes[cell]
            k = len(members)
            iu = int(rng.integers(k))
            iv = int(rng.integers(k - 1))
            if iv >= iu:
                iv += 1
            u = int(members[iu])
            v = int(members[iv])
            if not adj_list[u] or not adj_list[v]:
                continue
            x = adj_list[u][int(rng.integers(len(adj_list[u])))]
            if x == v or x in adj_set[v]:
                continue
            y = adj_list[v][int(rng.integers(len(adj_list[v])))]
            if y == u or y == x or y in adj_set[u]:
                continue
            b = bucket(u, x)
            if bucket(v, y) != b or bucket(u, y) != b or bucket(v, x) != b:
                continue
            for a, old, new in ((u, x, y), (v, y, x)):
                adj_list[a].remove(old)
                adj_list[a].append(new)
                adj_set[a].discard(old)
                adj_set[a].add(new)
            for a, old, new in ((x, u, v), (y, v, u)):
                adj_list[a].remove(old)
                adj_list[a].append(new)
                adj_set[a].discard(old)
                adj_set[a].add(new)
            swaps += 1
    edges = [(u, w) for u in range(g.n) for w in adj_list[u] if u < w]
    rewired = SocialGraph(
        g.n,
        np.array(edges, dtype=np.int64).reshape(-1, 2),
        g.lats,
        g.lons,
        ext_ids=g.ext_ids,
    )
    return RewireResult(rewired, swaps, attempts)


# -- random graph models ------------------------------------------------------


def _pair_row_starts(n: int) -> np.ndarray:
    u = np.arange(n, dtype=np.int64)
    return u * n - (u * (u + 1)) // 2


def _decode_pairs(idx: np.ndarray, n: int, row_starts: np.ndarray) -> np.ndarray:
    u = np.searchsorted(row_starts, idx, side="right") - 1
    v = idx - row_starts[u] + u + 1
    return np.column_stack((u, v))


def erdos_renyi(n: int, mean_degree: float, rng: np.random.Generator) -> SocialGraph:
    """G(n, p) with p chosen to hit ``mean_degree``; placeholder locations.

    Uses geometric skip sampling over the pair index space, so the cost is
    proportional to the number of edges drawn.
    """
    if n < 2:
        raise ValueError("need at least two nodes")
    if not 0 < mean_degree <= n - 1:
        raise ValueError(f"mean_degree must be in (0, {n - 1}]")
    p = mean_degree / (n - 1)
    total = n * (n - 1) // 2
    row_starts = _pair_row_starts(n)
    if p >= 1.0:
        idx = np.arange(total, dtype=np.int64)
    else:
        log_q = math.log1p(-p)
        chunks = []
        pos = -1
        batch = max(1024, int(total * p * 1.1) + 16)
        while True:
            gaps = np.floor(np.log1p(-rng.random(batch)) / log_q).astype(np.int64) + 1
            hits = pos + np.cumsum(gaps)
            inside = hits[hits < total]
            chunks.append(inside)
            if len(inside) < len(hits):
                break
            pos = int(hits[-1])
            batch = max(1024, int((total - pos) * p * 1.2) + 16)
        idx = np.concatenate(chunks)
    edges = _decode_pairs(idx, n, row_starts)
    zeros = np.zeros(n)
    return SocialGraph(n, edges, zeros, zeros)


def sample_degree_sequence(
    kind: str,
    n: int,
    rng: np.random.Generator,
    *,
    mean: float | None = None,
    gamma: float = 1.49,
    d_min: int = 1,
    d_max: int | None = None,
    target_mean: float | None = None,
) -> np.ndarray:
    """Random degree sequence with an even sum.

    "exponential" draws from an exponential with the given mean and rounds.
    "power-law" draws from ``p(d) ~ d**-gamma`` on ``[d_min, d_max]``; when
    ``d_max`` is omitted it is solved so the distribution mean matches
    ``target_mean`` (error if no cutoff lands within 5%).  An odd sum is
    fixed by incrementing one random entry.
    """
    if n < 1:
        raise ValueError("n must be positive")
    if kind == "exponential":
        if mean is None or mean <= 0:
            raise ValueError("exponential degrees need a positive mean")
        degrees = np.rint(np.maximum(0.0, rng.exponential(mean, n))).astype(np.int64)
    elif kind == "power-law":
        if gamma <= 1.0:
            raise ValueError("gamma must exceed 1")
        if d_min < 1:
            raise ValueError("d_min must be at least 1")
        if d_max is None:
            if target_mean is None:
                raise ValueError("power-law degrees need d_max or target_mean")
            d_max = solve_powerlaw_cutoff(gamma, d_min, target_mean)
        if d_max < d_min:
            raise ValueError("d_max must be at least d_min")
        vals = np.arange(d_min, d_max + 1, dtype=np.float64)
        weights = vals**-gamma
        degrees = rng.choice(vals.astype(np.int64), size=n, p=weights / weights.sum())
    else:
        raise ValueError(f"unknown degree distribution {kind!r}")
    if int(degrees.sum()) % 2:
        degrees[rng.integers(n)] += 1
    return degrees


def powerlaw_mean(gamma: float, d_min: int, d_max: int) -> float:
    """Mean of the truncated discrete power law on [d_min, d_max]."""
    d = np.arange(d_min, d_max + 1, dtype=np.float64)
    w = d**-gamma
    return float((d * w).sum() / w.sum())


_CUTOFF_CAP = 10_000_000


def solve_powerlaw_cutoff(gamma: float, d_min: int, target_mean: float, tol: float = 0.05) -> int:
    """Smallest integer cutoff whose truncated mean best matches the target.

    The truncated mean grows with the cutoff, so bisection applies.  Raises
    when even the best cutoff misses ``target_mean`` by more than ``tol``
    (relative), which happens when gamma is so steep the mean saturates.
    """
    if target_mean <= d_min:
        raise ValueError("target mean must exceed d_min")
    lo, hi = d_min, 2 * d_min + 1
    prev = powerlaw_mean(gamma, d_min, hi)
    while prev < target_mean and hi < _CUTOFF_CAP:
        lo, hi = hi, min(2 * hi, _CUTOFF_CAP)
        cur = powerlaw_mean(gamma, d_min, hi)
        if cur - prev < 1e-12 * target_mean:
            break  # mean saturated below the target, pushing further is futile
        prev = cur
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if powerlaw_mean(gamma, d_min, mid) < target_mean:
            lo = mid
        else:
            hi = mid
    best = min((lo, hi), key=lambda d: abs(powerlaw_mean(gamma, d_min, d) - target_mean))
    achieved = powerlaw_mean(gamma, d_min, best)
    if abs(achieved - target_mean) > tol * target_mean:
        raise ValueError(
            f"no cutoff matches mean {target_mean:g} within {tol:.0%} "
            f"(best {achieved:g} at d_max={best})"
        )
    return int(best)


def configuration_model(
    degrees: Sequence[int] | np.ndarray,
    rng: np.random.Generator,
    max_rounds: int = 200,
) -> SocialGraph:
    """Random simple graph with (approximately) the given degree sequence.

    Stub matching with retries: offending stubs (self loops, repeated edges)
    are re-shuffled and re-paired; when a round makes no progress some
    accepted edges are released back into the pool to break the jam.  Stubs
    still unmatched after ``max_rounds`` are dropped.  Raises when more than
    1% of nodes end up off their requested degree by more than 1.
    """
    seq = np.asarray(degrees, dtype=np.int64)
    if len(seq) == 0:
        raise ValueError("empty degree sequence")
    if np.any(seq < 0):
        raise ValueError("degrees must be non-negative")
    if int(seq.sum()) % 2:
        raise ValueError("degree sum must be even")
    n = len(seq)
    pool = np.repeat(np.arange(n, dtype=np.int64), seq)
    edge_list: list[tuple[int, int]] = []
    edge_set: set[tuple[int, int]] = set()
    for _ in range(max_rounds):
        if pool.size == 0:
            break
        pool = rng.permutation(pool)
        leftover: list[int] = []
        progressed = False
        for i in range(0, len(pool), 2):
            u, v = int(pool[i]), int(pool[i + 1])
            key = (u, v) if u < v else (v, u)
            if u == v or key in edge_set:
                leftover.append(u)
                leftover.append(v)
            else:
                edge_set.add(key)
                edge_list.append(key)
                progressed = True
        if not leftover:
            pool = np.empty(0, dtype=np.int64)
            break
        if not progressed and edge_list:
            release = min(len(edge_list), max(1, len(leftover) // 2))
            for j in sorted(rng.choice(len(edge_list), size=release, replace=False).tolist(), reverse=True):
                eu, ev = edge_list.pop(j)
                edge_set.discard((eu, ev))
                leftover.append(eu)
                leftover.append(ev)
        pool = np.array(leftover, dtype=np.int64)
    if pool.size:
        logger.warning("configuration model dropped %d unmatched stubs", pool.size)
    zeros = np.zeros(n)
    g = SocialGraph(n, np.array(edge_list, dtype=np.int64).reshape(-1, 2), zeros, zeros)
    off = np.abs(g.degrees - seq) > 1
    if off.mean() > 0.01:
        raise RuntimeError(
            f"could not realize degree sequence: {int(off.sum())} of {n} nodes off by more than 1"
        )
    return g


def distance_biased_graph(
    lats: np.ndarray,
    lons: np.ndarray,
    rng: np.random.Generator,
    *,
    out_degree_mean: float = 6.0,
    alpha: float = 2.0,
    epsilon_km: float = 1.0,
) -> SocialGraph:
    """Friendship graph favoring nearby nodes: each node links to targets
    drawn with probability proportional to ``(distance + epsilon)**-alpha``.

    Out-stub counts are geometric with the given mean, which leaves a heavy
    right degree tail once stubs from both sides combine.  Useful as a
    geographically clustered test bed.
    """
    n = len(lats)
    if n < 3:
        raise ValueError("need at least three nodes")
    if out_degree_mean <= 0:
        raise ValueError("out_degree_mean must be positive")
    edges: set[tuple[int, int]] = set()
    stubs = rng.geometric(1.0 / out_degree_mean, size=n)
    for u in range(n):
        d = haversine_km_arrays(lats, lons, float(lats[u]), float(lons[u]))
        w = (d + epsilon_km) ** -alpha
        w[u] = 0.0
        w /= w.sum()
        k = min(int(stubs[u]), n - 1)
        targets = rng.choice(n, size=k, replace=False, p=w)
        for t in targets.tolist():
            edges.add((u, t) if u < t else (t, u))
    return SocialGraph(n, np.array(sorted(edges), dtype=np.int64), lats, lons)
