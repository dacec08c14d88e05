"""Descriptive statistics: distance distributions, reach, and prominence."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .communities import CommunityAssignment
from .geo import GeoPoint, RhomboidGrid, haversine_km_arrays
from .graph import SocialGraph, neighbors_of_many
from .knowledge import KnowledgeModel
from .netgen import DistanceRanges

_RELATIONS = ("friends", "fof", "communities")


@dataclass(frozen=True)
class DistanceDistribution:
    """Per-bucket percentage of pair distances for one relation.

    Percentages are macro-averaged: each unit (user, or community) first
    gets its own normalized histogram, then units are averaged, so heavy
    units do not dominate.  ``units`` counts what was averaged.
    """

    relation: str
    ranges: DistanceRanges
    percentages: np.ndarray
    units: int

    def cumulative(self) -> np.ndarray:
        return np.cumsum(self.percentages)

    def rows(self) -> list[tuple[str, float, float]]:
        cum = self.cumulative()
        return [
            (self.ranges.label(b), float(self.percentages[b]), float(cum[b]))
            for b in range(self.ranges.n_buckets)
        ]


def _per_node_fof(g: SocialGraph, node: int) -> np.ndarray:
    """Distinct friends-of-friends of ``node``, minus itself and friends."""
    nbrs = g.neighbors(node)
    if nbrs.size == 0:
        return np.empty(0, dtype=np.int64)
    two_hop = np.unique(neighbors_of_many(g, nbrs))
    fof = np.setdiff1d(two_hop, nbrs, assume_unique=True)
    return fof[fof != node]


def _known_union(model: KnowledgeModel, g: SocialGraph, node: int) -> np.ndarray:
    chunks = [model.known(g, node, int(f)) for f in g.neighbors(node)]
    if not chunks:
        return np.empty(0, dtype=np.int64)
    return np.unique(np.concatenate(chunks))


def distance_distribution(
    g: SocialGraph,
    relation: str,
    ranges: DistanceRanges | None = None,
    communities: CommunityAssignment | None = None,
) -> DistanceDistribution:
    """Distance histogram of a relation's pairs, macro-averaged.

    Relations: "friends" (each user to each friend), "fof" (each user to
    each distinct friend-of-friend), "communities" (each member of every
    community with two or more members to its co-members).
    """
    if relation not in _RELATIONS:
        raise ValueError(f"unknown relation {relation!r}")
    ranges = ranges or DistanceRanges()
    nb = ranges.n_buckets
    if relation == "communities":
        if communities is None:
            raise ValueError("community distances need a community assignment")
        groups: dict[int, list[int]] = {}
        for node, comms in communities.memberships.items():
            for c in comms:
                groups.setdefault(c, []).append(node)
        per_comm = []
        for c in sorted(groups):
            members = np.array(sorted(groups[c]), dtype=np.int64)
            if len(members) < 2:
                continue
            member_rows = np.zeros((len(members), nb))
            for row, m in enumerate(members):
                others = members[members != m]
                d = haversine_km_arrays(
                    g.lats[others], g.lons[others], float(g.lats[m]), float(g.lons[m])
                )
                counts = np.bincount(ranges.bucket_arrays(d), minlength=nb)
                member_rows[row] = counts / len(others)
            per_comm.append(member_rows.mean(axis=0))
        if not per_comm:
            return DistanceDistribution(relation, ranges, np.zeros(nb), 0)
        pct = np.mean(per_comm, axis=0) * 100.0
        return DistanceDistribution(relation, ranges, pct, len(per_comm))

    per_user = np.zeros((g.n, nb))
    used = np.zeros(g.n, dtype=bool)
    if relation == "friends":
        src = np.repeat(np.arange(g.n, dtype=np.int64), g.degrees)
        dst = g.nbrs
        if src.size:
            d = haversine_km_arrays(g.lats[dst], g.lons[dst], g.lats[src], g.lons[src])
            np.add.at(per_user, (src, ranges.bucket_arrays(d)), 1.0)
        used = g.degrees > 0
    else:  # fof
        for u in range(g.n):
            fof = _per_node_fof(g, u)
            if fof.size == 0:
                continue
            d = haversine_km_arrays(g.lats[fof], g.lons[fof], float(g.lats[u]), float(g.lons[u]))
            per_user[u] = np.bincount(ranges.bucket_arrays(d), minlength=nb)
            used[u] = True
    if not used.any():
        return DistanceDistribution(relation, ranges, np.zeros(nb), 0)
    rows = per_user[used]
    rows /= rows.sum(axis=1, keepdims=True)
    return DistanceDistribution(relation, ranges, rows.mean(axis=0) * 100.0, int(used.sum()))


@dataclass(frozen=True)
class FofSizeStats:
    mean_friends: float
    mean_fof: float
    mean_known_fof: float
    kappa: int


def fof_size_stats(g: SocialGraph, model: KnowledgeModel) -> FofSizeStats:
    """Average friend count, distinct-FoF count, and known-FoF count."""
    fof_counts = np.zeros(g.n)
    known_counts = np.zeros(g.n)
    for u in range(g.n):
        fof_counts[u] = len(_per_node_fof(g, u))
        known_counts[u] = len(_known_union(model, g, u))
    return FofSizeStats(
        mean_friends=float(g.degrees.mean()),
        mean_fof=float(fof_counts.mean()),
        mean_known_fof=float(known_counts.mean()),
        kappa=model.kappa,
    )


@dataclass(frozen=True)
class ReachStats:
    """How many distinct communities a node can see at growing radius."""

    mean_own: float
    mean_via_friends: float
    mean_via_fof: float
    mean_via_known_fof: float
    kappa: int


def community_reach_stats(
    g: SocialGraph, communities: CommunityAssignment, model: KnowledgeModel
) -> ReachStats:
    """Mean distinct communities per node: its own, its friends', those of
    friends plus all FoF, and of friends plus known FoF.

    The FoF figures include the friends' communities, so the known-FoF reach
    collapses to the friends reach at kappa 0 and grows to the full FoF
    reach once kappa covers everyone.
    """
    own = np.zeros(g.n)
    via_friends = np.zeros(g.n)
    via_fof = np.zeros(g.n)
    via_known = np.zeros(g.n)
    for u in range(g.n):
        own[u] = len(communities.communities_of(u))
        nbrs = g.neighbors(u)
        friend_comms = set()
        for f in nbrs:
            friend_comms |= communities.communities_of(int(f))
        via_friends[u] = len(friend_comms)
        fof_comms = set(friend_comms)
        for x in _per_node_fof(g, u):
            fof_comms |= communities.communities_of(int(x))
        via_fof[u] = len(fof_comms)
        known_comms = set(friend_comms)
        for x in _known_union(model, g, u):
            known_comms |= communities.communities_of(int(x))
        via_known[u] = len(known_comms)
    return ReachStats(
        mean_own=float(own.mean()),
        mean_via_friends=float(via_friends.mean()),
        mean_via_fof=float(via_fof.mean()),
        mean_via_known_fof=float(via_known.mean()),
        kappa=model.kappa,
    )


@dataclass(frozen=True)
class ProminenceStats:
    """Visibility of the highest-degree nodes from everywhere else."""

    count: int
    threshold_degree: int
    mean_prominent_friends: float
    mean_prominent_fof: float
    mean_prominent_known_fof: float
    degenerate: bool
    kappa: int


def prominence_stats(
    g: SocialGraph, model: KnowledgeModel, top_fraction: float = 0.01
) -> ProminenceStats:
    """Stats about the top ``top_fraction`` of nodes by degree.

    The threshold is the k-th largest degree (k = ceil(fraction * n)); every
    node at or above it counts as prominent, so ties can push the count past
    k.  Averages are over non-prominent nodes; when everyone is prominent
    the result is flagged degenerate and the averages are NaN.
    """
    if not 0.0 < top_fraction <= 1.0:
        raise ValueError("top_fraction must be in (0, 1]")
    k = max(1, int(np.ceil(top_fraction * g.n)))
    threshold = int(np.sort(g.degrees)[::-1][k - 1])
    prominent = g.degrees >= threshold
    others = np.flatnonzero(~prominent)
    if others.size == 0:
        return ProminenceStats(int(prominent.sum()), threshold, float("nan"), float("nan"),
                               float("nan"), True, model.kappa)
    fr = np.zeros(others.size)
    fof = np.zeros(others.size)
    known = np.zeros(others.size)
    for row, u in enumerate(others.tolist()):
        fr[row] = int(prominent[g.neighbors(u)].sum())
        fof[row] = int(prominent[_per_node_fof(g, u)].sum())
        known[row] = int(prominent[_known_union(model, g, u)].sum())
    return ProminenceStats(
        count=int(prominent.sum()),
        threshold_degree=threshold,
        mean_prominent_friends=float(fr.mean()),
        mean_prominent_fof=float(fof.mean()),
        mean_prominent_known_fof=float(known.mean()),
        degenerate=False,
        kappa=model.kappa,
    )


@dataclass(frozen=True)
class CellReport:
    """Grid occupancy summary, densest cells first."""

    rows: tuple[tuple[int, int, float, float, float], ...]  # cell, count, fraction, lat, lon
    total_inside: int
    total_outside: int
    nonempty_cells: int
    n_cells: int


def cell_population_report(
    grid: RhomboidGrid, points: list[GeoPoint], top: int | None = None
) -> CellReport:
    lats = np.array([p.lat for p in points])
    lons = np.array([p.lon for p in points])
    cells = grid.locate_arrays(lats, lons) if len(points) else np.empty(0, dtype=np.int64)
    inside = cells[cells >= 0]
    counts = np.bincount(inside, minlength=grid.n_cells)
    nonempty = np.flatnonzero(counts)
    order = nonempty[np.lexsort((nonempty, -counts[nonempty]))]
    if top is not None:
        order = order[:top]
    total = int(inside.size)
    rows = []
    for c in order.tolist():
        center = grid.cell_center(c)
        frac = counts[c] / total if total else 0.0
        rows.append((c, int(counts[c]), float(frac), center.lat, center.lon))
    return CellReport(
        rows=tuple(rows),
        total_inside=total,
        total_outside=int(len(points) - total),
        nonempty_cells=int(nonempty.size),
        n_cells=grid.n_cells,
    )
