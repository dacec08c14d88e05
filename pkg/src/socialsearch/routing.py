"""Greedy forwarding: utility scores, next-hop choice, and full trials."""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass

import numpy as np

from . import geo
from .communities import (
    CommunityAssignment,
    largest_shared_community_size,
    smallest_shared_community_size,
)
from .graph import SocialGraph
from .knowledge import KnowledgeModel, knows_target

DEFAULT_HOP_LIMIT = 50

_WEIGHT_TOL = 1e-9


@dataclass(frozen=True)
class Weights:
    """Utility weights for the distance, community, and popularity scores.

    Each weight lies in [0, 1] and they sum to 1, except the all-zero
    triple, which switches forwarding to a uniform-random walk.
    """

    w_d: float
    w_c: float
    w_p: float

    def __post_init__(self) -> None:
        for name, w in (("w_d", self.w_d), ("w_c", self.w_c), ("w_p", self.w_p)):
            if not 0.0 <= w <= 1.0:
                raise ValueError(f"{name}={w} outside [0, 1]")
        total = self.w_d + self.w_c + self.w_p
        if total != 0.0 and abs(total - 1.0) > _WEIGHT_TOL:
            raise ValueError(f"weights must sum to 1 or all be 0, got {total}")

    @property
    def all_zero(self) -> bool:
        return self.w_d == 0.0 and self.w_c == 0.0 and self.w_p == 0.0


@dataclass(frozen=True)
class TrialResult:
    """Outcome of one forwarding trial."""

    success: bool
    path: tuple[int, ...]
    termination: str  # "delivered", "dead-end", or "hop-limit"

    @property
    def hops(self) -> int:
        return len(self.path) - 1


class _TargetCache:
    """Lazily filled per-target score columns."""

    __slots__ = ("dist", "cscore")

    def __init__(self, n: int) -> None:
        self.dist = np.full(n, np.nan)
        self.cscore = np.full(n, np.nan)


class RoutingContext:
    """Everything a forwarding decision reads: graph, communities, knowledge,
    weights, and the normalization constants.

    ``d_max`` defaults to the geographic diameter of the node locations.
    ``fof_scoring`` is "max" (a friend inherits its best known unvisited
    FoF utility) or "self" (friends scored on their own utility only).
    ``community_metric`` picks the shared community used for the community
    score: "smallest" or "largest".  Setting ``direct_friend_shortcut``
    False disables the hand-to-target rule, for ablation runs.

    Instances are read-only after construction; internal score caches are
    memoization only and are safe to share across threads.
    """

    def __init__(
        self,
        graph: SocialGraph,
        communities: CommunityAssignment,
        knowledge: KnowledgeModel,
        weights: Weights,
        *,
        d_max: float | None = None,
        hop_limit: int = DEFAULT_HOP_LIMIT,
        fof_scoring: str = "max",
        community_metric: str = "smallest",
        direct_friend_shortcut: bool = True,
    ) -> None:
        if graph.n < 2:
            raise ValueError("routing needs at least two nodes")
        if hop_limit < 1:
            raise ValueError("hop_limit must be at least 1")
        if fof_scoring not in ("max", "self"):
            raise ValueError(f"unknown fof_scoring {fof_scoring!r}")
        if community_metric not in ("smallest", "largest"):
            raise ValueError(f"unknown community_metric {community_metric!r}")
        self.graph = graph
        self.communities = communities
        self.knowledge = knowledge
        self.weights = weights
        self.hop_limit = int(hop_limit)
        self.fof_scoring = fof_scoring
        self.community_metric = community_metric
        self.direct_friend_shortcut = bool(direct_friend_shortcut)
        if d_max is None:
            d_max = geo.geographic_diameter_arrays(graph.lats, graph.lons)
        if not d_max > 0.0:
            raise ValueError("d_max must be positive; are all nodes co-located?")
        self.d_max = float(d_max)
        max_degree = int(graph.degrees.max())
        if max_degree < 2:
            raise ValueError("popularity normalization needs a node of degree >= 2")
        self.p_max = math.log2(max_degree)
        self.c_max = communities.c_max
        if weights.w_c > 0.0 and self.c_max is None:
            raise ValueError("community weight is positive but no community has two members")
        # popularity never depends on the target, precompute it whole
        self._pop = np.log2(np.maximum(graph.degrees, 1).astype(np.float64)) / self.p_max
        self._targets: dict[int, _TargetCache] = {}
        self._lock = threading.Lock()

    # -- score plumbing ----------------------------------------------------

    def _target_cache(self, target: int) -> _TargetCache:
        tc = self._targets.get(target)
        if tc is None:
            with self._lock:
                tc = self._targets.setdefault(target, _TargetCache(self.graph.n))
        return tc

    def _dists(self, tc: _TargetCache, target: int, ids: np.ndarray) -> np.ndarray:
        col = tc.dist
        missing = ids[np.isnan(col[ids])]
        if missing.size:
            g = self.graph
            col[missing] = geo.haversine_km_arrays(
                g.lats[missing], g.lons[missing], float(g.lats[target]), float(g.lons[target])
            )
        return col[ids]

    def _shared_size(self, i: int, target: int) -> int | None:
        if self.community_metric == "smallest":
            return smallest_shared_community_size(self.communities, i, target)
        return largest_shared_community_size(self.communities, i, target)

    def _cscores(self, tc: _TargetCache, target: int, ids: np.ndarray) -> np.ndarray:
        col = tc.cscore
        missing = ids[np.isnan(col[ids])]
        if missing.size:
            c_max = self.c_max
            for i in missing:
                size = self._shared_size(int(i), target)
                # no shared community counts as a fictitious one of size c_max + 1
                c_i = (c_max + 1) if size is None else size
                col[i] = 1.0 - (c_i - 1.0) / c_max
        return col[ids]

    def _utilities(self, tc: _TargetCache, target: int, d_current: float, ids: np.ndarray) -> np.ndarray:
        w = self.weights
        u = np.zeros(len(ids))
        if w.w_d > 0.0:
            u += w.w_d * np.maximum(0.0, (d_current - self._dists(tc, target, ids)) / self.d_max)
        if w.w_c > 0.0:
            u += w.w_c * self._cscores(tc, target, ids)
        if w.w_p > 0.0:
            u += w.w_p * self._pop[ids]
        return u


def distance_score(ctx: RoutingContext, current: int, i: int, target: int) -> float:
    """Normalized distance gain of handing to ``i``: positive only when ``i``
    is closer to the target than the current holder, never above 1."""
    tc = ctx._target_cache(target)
    ids = np.array([current, i], dtype=np.int64)
    d = ctx._dists(tc, target, ids)
    return float(max(0.0, (d[0] - d[1]) / ctx.d_max))


def community_score(ctx: RoutingContext, i: int, target: int) -> float:
    """Closeness of ``i`` to the target in community space, in [0, 1]."""
    if ctx.c_max is None:
        raise ValueError("community score undefined: no community has two members")
    tc = ctx._target_cache(target)
    return float(ctx._cscores(tc, target, np.array([i], dtype=np.int64))[0])


def popularity_score(ctx: RoutingContext, i: int) -> float:
    """log2(degree) scaled by the graph's largest degree, in [0, 1]."""
    return float(ctx._pop[i])


def utility(ctx: RoutingContext, current: int, i: int, target: int) -> float:
    """Weighted sum of the three scores; 0 under all-zero weights."""
    if ctx.weights.all_zero:
        return 0.0
    tc = ctx._target_cache(target)
    d = ctx._dists(tc, target, np.array([current], dtype=np.int64))
    return float(ctx._utilities(tc, target, float(d[0]), np.array([i], dtype=np.int64))[0])


def select_next(
    ctx: RoutingContext,
    current: int,
    target: int,
    visited: set[int],
    rng: np.random.Generator,
) -> int | None:
    """Choose the next holder, or None at a dead end.

    Precedence: (1) hand straight to the target if it is a friend; (2) if a
    friend is known to have the target among its known FoF, forward to the
    smallest-id such friend, provided that friend is unvisited; (3) greedy
    step to the best-scoring unvisited friend.  With "max" FoF scoring a
    friend's effective score is the larger of its own utility and the best
    utility over its known unvisited FoF.  Exact score ties break uniformly
    at random; all-zero weights make the step uniform over unvisited
    friends.

    Consumes exactly one ``rng.integers`` draw when choosing among k > 1
    equally good options, and none otherwise.
    """
    g = ctx.graph
    nbrs = g.neighbors(current)
    if ctx.direct_friend_shortcut:
        j = np.searchsorted(nbrs, target)
        if j < len(nbrs) and nbrs[j] == target:
            return int(target)
    knowledge = ctx.knowledge
    if knowledge.kappa > 0:
        f = knows_target(knowledge, g, current, target)
        if f is not None and f not in visited:
            return f
    unvisited = np.array([int(x) for x in nbrs if int(x) not in visited], dtype=np.int64)
    if unvisited.size == 0:
        return None
    if ctx.weights.all_zero:
        if unvisited.size == 1:
            return int(unvisited[0])
        return int(unvisited[rng.integers(unvisited.size)])
    tc = ctx._target_cache(target)
    d_current = float(ctx._dists(tc, target, np.array([current], dtype=np.int64))[0])
    scores = ctx._utilities(tc, target, d_current, unvisited)
    if ctx.fof_scoring == "max" and knowledge.kappa > 0:
        for j, f in enumerate(unvisited):
            known = knowledge.known(g, current, int(f))
            if known.size == 0:
                continue
            usable = np.array([int(x) for x in known if int(x) not in visited], dtype=np.int64)
            if usable.size == 0:
                continue
            best_fof = float(ctx._utilities(tc, target, d_current, usable).max())
            if best_fof > scores[j]:
                scores[j] = best_fof
    top = scores.max()
    ties = np.flatnonzero(scores == top)
    if ties.size == 1:
        return int(unvisited[ties[0]])
    return int(unvisited[ties[rng.integers(ties.size)]])


def route(
    ctx: RoutingContext, start: int, target: int, rng: np.random.Generator
) -> TrialResult:
    """Run one forwarding trial from ``start`` toward ``target``.

    The folder moves until delivered, stuck at a node with no unvisited
    friends (no backtracking), or out of hops.  The path includes both
    endpoints when delivered.
    """
    n = ctx.graph.n
    if not (0 <= start < n and 0 <= target < n):
        raise ValueError("endpoint outside the graph")
    if start == target:
        raise ValueError("start and target must differ")
    path = [start]
    visited = {start}
    current = start
    for _ in range(ctx.hop_limit):
        nxt = select_next(ctx, current, target, visited, rng)
        if nxt is None:
            return TrialResult(False, tuple(path), "dead-end")
        path.append(nxt)
        visited.add(nxt)
        if nxt == target:
            return TrialResult(True, tuple(path), "delivered")
        current = nxt
    return TrialResult(False, tuple(path), "hop-limit")
