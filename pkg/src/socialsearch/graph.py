"""Friendship graph model: ingestion, components, shortest paths, degree fits."""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Sequence

import numpy as np

from .geo import GeoPoint, load_locations

logger = logging.getLogger(__name__)


class SocialGraph:
    """Undirected simple graph whose nodes carry geographic locations.

    Nodes are dense integers ``0..n-1``, assigned in ascending order of the
    external ids found in the input files; ``ext_ids[i]`` recovers the
    original id.  Adjacency is stored in compressed sparse form with each
    node's neighbor list sorted ascending.  Instances are immutable and hash
    by identity.
    """

    __slots__ = (
        "n",
        "indptr",
        "nbrs",
        "degrees",
        "lats",
        "lons",
        "ext_ids",
        "_ext_to_dense",
        "self_loops_dropped",
        "duplicate_edges_dropped",
        "__weakref__",
    )

    def __init__(
        self,
        n: int,
        edges: np.ndarray,
        lats: np.ndarray,
        lons: np.ndarray,
        ext_ids: np.ndarray | None = None,
        self_loops_dropped: int = 0,
        duplicate_edges_dropped: int = 0,
    ) -> None:
        """Build from a deduplicated (m, 2) array of dense undirected edges."""
        edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        if edges.size and (edges.min() < 0 or edges.max() >= n):
            raise ValueError("edge endpoint outside [0, n)")
        if np.any(edges[:, 0] == edges[:, 1]):
            raise ValueError("self loops are not allowed")
        lats = np.asarray(lats, dtype=np.float64)
        lons = np.asarray(lons, dtype=np.float64)
        if len(lats) != n or len(lons) != n:
            raise ValueError("every node needs a location")
        canon = np.sort(edges, axis=1)
        if len(np.unique(canon, axis=0)) != len(canon):
            raise ValueError("duplicate edges are not allowed")
        both = np.concatenate((canon, canon[:, ::-1]), axis=0)
        order = np.lexsort((both[:, 1], both[:, 0]))
        both = both[order]
        self.n = int(n)
        self.nbrs = np.ascontiguousarray(both[:, 1])
        self.indptr = np.searchsorted(both[:, 0], np.arange(n + 1), side="left").astype(np.int64)
        self.degrees = np.diff(self.indptr)
        self.lats = lats
        self.lons = lons
        if ext_ids is None:
            ext_ids = np.arange(n, dtype=np.int64)
        else:
            ext_ids = np.asarray(ext_ids, dtype=np.int64)
            if len(ext_ids) != n:
                raise ValueError("ext_ids length must equal n")
            if n > 1 and not np.all(np.diff(ext_ids) > 0):
                # dense ids must follow ascending external order, it is what
                # makes component and routing tie-breaks well defined
                raise ValueError("ext_ids must be strictly increasing")
        self.ext_ids = ext_ids
        self._ext_to_dense = {int(e): i for i, e in enumerate(ext_ids)}
        self.self_loops_dropped = int(self_loops_dropped)
        self.duplicate_edges_dropped = int(duplicate_edges_dropped)

    @property
    def edge_count(self) -> int:
        return len(self.nbrs) // 2

    def neighbors(self, i: int) -> np.ndarray:
        """Sorted neighbor ids of node ``i`` (a read-only view)."""
        return self.nbrs[self.indptr[i] : self.indptr[i + 1]]

    def degree(self, i: int) -> int:
        return int(self.degrees[i])

    def has_edge(self, u: int, v: int) -> bool:
        nb = self.neighbors(u)
        j = np.searchsorted(nb, v)
        return j < len(nb) and nb[j] == v

    def location(self, i: int) -> GeoPoint:
        return GeoPoint(float(self.lats[i]), float(self.lons[i]))

    def dense_id(self, ext_id: int) -> int:
        try:
            return self._ext_to_dense[ext_id]
        except KeyError:
            raise KeyError(f"node {ext_id} is not in the graph") from None

    def edge_array(self) -> np.ndarray:
        """All undirected edges as an (m, 2) array with u < v, sorted."""
        src = np.repeat(np.arange(self.n, dtype=np.int64), self.degrees)
        mask = src < self.nbrs
        return np.column_stack((src[mask], self.nbrs[mask]))

    def with_locations(self, lats: np.ndarray, lons: np.ndarray) -> "SocialGraph":
        """Same topology and ids, different coordinates."""
        return SocialGraph(
            self.n,
            self.edge_array(),
            lats,
            lons,
            ext_ids=self.ext_ids,
            self_loops_dropped=self.self_loops_dropped,
            duplicate_edges_dropped=self.duplicate_edges_dropped,
        )

    def subgraph(self, nodes: np.ndarray) -> "SocialGraph":
        """Induced subgraph on ``nodes`` (dense ids, ascending), renumbered."""
        nodes = np.asarray(nodes, dtype=np.int64)
        keep = np.zeros(self.n, dtype=bool)
        keep[nodes] = True
        remap = np.full(self.n, -1, dtype=np.int64)
        remap[nodes] = np.arange(len(nodes))
        edges = self.edge_array()
        mask = keep[edges[:, 0]] & keep[edges[:, 1]]
        return SocialGraph(
            len(nodes),
            remap[edges[mask]],
            self.lats[nodes],
            self.lons[nodes],
            ext_ids=self.ext_ids[nodes],
        )


def neighbors_of_many(g: SocialGraph, nodes: np.ndarray) -> np.ndarray:
    """Concatenated neighbor lists of ``nodes``, with repeats."""
    nodes = np.asarray(nodes, dtype=np.int64)
    counts = g.degrees[nodes]
    total = int(counts.sum())
    if total == 0:
        return np.empty(0, dtype=np.int64)
    starts = g.indptr[nodes]
    cum = np.cumsum(counts) - counts
    idx = np.repeat(starts - cum, counts) + np.arange(total)
    return g.nbrs[idx]


def _parse_edges(path: str | Path) -> tuple[set[tuple[int, int]], set[int], int, int]:
    edges: set[tuple[int, int]] = set()
    nodes: set[int] = set()
    self_loops = 0
    duplicates = 0
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: expected 'node node', got {raw.rstrip()!r}")
            try:
                u, v = int(parts[0]), int(parts[1])
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
            nodes.add(u)
            nodes.add(v)
            if u == v:
                self_loops += 1
                continue
            key = (u, v) if u < v else (v, u)
            if key in edges:
                duplicates += 1
            else:
                edges.add(key)
    return edges, nodes, self_loops, duplicates


def load_graph(edges_path: str | Path, locations_path: str | Path) -> SocialGraph:
    """Load a graph from edge and location TSV files.

    Self loops and repeated edges are dropped (with a logged count).  Every
    node appearing in the edges file must have a location; nodes that only
    appear in the locations file are kept as isolated nodes.
    """
    edges, edge_nodes, self_loops, duplicates = _parse_edges(edges_path)
    locations = load_locations(locations_path)
    missing = edge_nodes - locations.keys()
    if missing:
        raise ValueError(
            f"node {min(missing)} appears in {edges_path} but has no location "
            f"({len(missing)} such nodes)"
        )
    if self_loops or duplicates:
        logger.warning(
            "dropped %d self loops and %d duplicate edges from %s", self_loops, duplicates, edges_path
        )
    ext_ids = np.array(sorted(locations), dtype=np.int64)
    dense = {int(e): i for i, e in enumerate(ext_ids)}
    edge_arr = np.array([(dense[u], dense[v]) for u, v in sorted(edges)], dtype=np.int64).reshape(-1, 2)
    lats = np.array([locations[int(e)].lat for e in ext_ids])
    lons = np.array([locations[int(e)].lon for e in ext_ids])
    return SocialGraph(
        len(ext_ids),
        edge_arr,
        lats,
        lons,
        ext_ids=ext_ids,
        self_loops_dropped=self_loops,
        duplicate_edges_dropped=duplicates,
    )


def write_edges(path: str | Path, g: SocialGraph) -> None:
    """Write the graph's edges as a TSV of external ids, u < v, sorted."""
    edges = g.edge_array()
    ext = g.ext_ids
    with open(path, "w", encoding="utf-8") as fh:
        pairs = np.sort(np.column_stack((ext[edges[:, 0]], ext[edges[:, 1]])), axis=1)
        order = np.lexsort((pairs[:, 1], pairs[:, 0]))
        for u, v in pairs[order]:
            fh.write(f"{u}\t{v}\n")


def connected_components(g: SocialGraph) -> tuple[np.ndarray, np.ndarray]:
    """Component label per node and component sizes, labels in seed order."""
    labels = np.full(g.n, -1, dtype=np.int64)
    sizes = []
    for seed in range(g.n):
        if labels[seed] >= 0:
            continue
        comp = len(sizes)
        labels[seed] = comp
        frontier = np.array([seed], dtype=np.int64)
        count = 1
        while frontier.size:
            nxt = np.unique(neighbors_of_many(g, frontier))
            nxt = nxt[labels[nxt] < 0]
            labels[nxt] = comp
            count += len(nxt)
            frontier = nxt
        sizes.append(count)
    return labels, np.array(sizes, dtype=np.int64)


def giant_component(g: SocialGraph) -> SocialGraph:
    """Induced subgraph on the largest connected component.

    Ties go to the component containing the smallest external id; since
    components are labeled in order of their smallest dense id (and dense
    order follows external order), that is the first label among the largest.
    """
    if g.n == 0:
        raise ValueError("empty graph has no components")
    labels, sizes = connected_components(g)
    best = int(np.argmax(sizes))  # argmax keeps the first maximum
    return g.subgraph(np.flatnonzero(labels == best))


def bfs_hops(g: SocialGraph, source: int, target: int) -> int | None:
    """Unweighted shortest-path hop count, or None if unreachable."""
    if not (0 <= source < g.n and 0 <= target < g.n):
        raise ValueError("endpoint outside the graph")
    if source == target:
        return 0
    seen = np.zeros(g.n, dtype=bool)
    seen[source] = True
    frontier = np.array([source], dtype=np.int64)
    hops = 0
    while frontier.size:
        hops += 1
        nxt = np.unique(neighbors_of_many(g, frontier))
        nxt = nxt[~seen[nxt]]
        if np.any(nxt == target):
            return hops
        seen[nxt] = True
        frontier = nxt
    return None


def fit_power_law_exponent(degrees: Sequence[int] | np.ndarray, d_min: int = 1) -> float:
    """Maximum-likelihood exponent of a discrete power law ``p(d) ~ d**-gamma``.

    Only degrees ``>= d_min`` enter the fit.  Raises if fewer than 100 usable
    samples remain or the values are degenerate (all equal).
    """
    if d_min < 1:
        raise ValueError("d_min must be at least 1")
    d = np.asarray(degrees, dtype=np.float64)
    d = d[d >= d_min]
    if len(d) < 100:
        raise ValueError(f"need at least 100 samples >= d_min, got {len(d)}")
    if np.all(d == d[0]):
        raise ValueError("degenerate degree values, exponent is not identifiable")
    from scipy.optimize import minimize_scalar
    from scipy.special import zeta

    mean_log = float(np.log(d).mean())

    def neg_loglik(gamma: float) -> float:
        return gamma * mean_log + np.log(zeta(gamma, d_min))

    res = minimize_scalar(neg_loglik, bounds=(1.0001, 25.0), method="bounded", options={"xatol": 1e-7})
    gamma = float(res.x)
    if gamma > 24.0:
        raise ValueError("no finite power-law exponent fits these values")
    return gamma


def degree_histogram(g: SocialGraph) -> np.ndarray:
    """Count of nodes per degree, index = degree."""
    return np.bincount(g.degrees)
