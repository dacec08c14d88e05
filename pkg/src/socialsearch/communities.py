"""Community memberships, sizes, and a deterministic label-propagation detector."""

from __future__ import annotations

from collections import Counter
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .graph import SocialGraph

_MAX_SWEEPS = 100

_EMPTY: frozenset[int] = frozenset()


class CommunityAssignment:
    """Node to community-set mapping with per-community sizes.

    A node may belong to several communities; nodes absent from the mapping
    belong to none.  ``c_max`` is the size of the largest community that has
    at least two members, or None when every community is a singleton.
    """

    __slots__ = ("memberships", "sizes", "c_max")

    def __init__(self, memberships: Mapping[int, Iterable[int]]) -> None:
        self.memberships: dict[int, frozenset[int]] = {
            int(node): frozenset(int(c) for c in comms) for node, comms in memberships.items()
        }
        sizes: Counter[int] = Counter()
        for comms in self.memberships.values():
            for c in comms:
                sizes[c] += 1
        self.sizes: dict[int, int] = dict(sizes)
        multi = [s for s in self.sizes.values() if s >= 2]
        self.c_max: int | None = max(multi) if multi else None

    def communities_of(self, node: int) -> frozenset[int]:
        return self.memberships.get(node, _EMPTY)

    def __len__(self) -> int:
        return len(self.sizes)


def smallest_shared_community_size(assignment: CommunityAssignment, a: int, b: int) -> int | None:
    """Size of the smallest community containing both nodes, or None."""
    shared = assignment.communities_of(a) & assignment.communities_of(b)
    if not shared:
        return None
    return min(assignment.sizes[c] for c in shared)


def largest_shared_community_size(assignment: CommunityAssignment, a: int, b: int) -> int | None:
    """Size of the largest community containing both nodes, or None."""
    shared = assignment.communities_of(a) & assignment.communities_of(b)
    if not shared:
        return None
    return max(assignment.sizes[c] for c in shared)


def load_communities(path: str | Path) -> CommunityAssignment:
    """Read a communities TSV: ``node<TAB>community`` per row.

    A node may appear on several rows; repeated identical rows collapse.
    Blank lines and ``#`` comments are skipped.
    """
    memberships: dict[int, set[int]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: expected 'node community', got {raw.rstrip()!r}")
            try:
                node, comm = int(parts[0]), int(parts[1])
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
            memberships.setdefault(node, set()).add(comm)
    return CommunityAssignment(memberships)


def remap_to_graph(assignment: CommunityAssignment, g: SocialGraph) -> CommunityAssignment:
    """Re-key an external-id assignment to dense node ids.

    Memberships of nodes outside the graph are dropped, and community sizes
    are recomputed over the remaining nodes.
    """
    memberships = {}
    for dense, ext in enumerate(g.ext_ids):
        comms = assignment.communities_of(int(ext))
        if comms:
            memberships[dense] = comms
    return CommunityAssignment(memberships)


def detect_communities(g: SocialGraph, seed: int = 0) -> CommunityAssignment:
    """Synchronous label propagation, one community per node.

    Labels start at the node ids; each sweep every node adopts the most
    frequent label among its neighbors, breaking frequency ties toward the
    smallest label.  Sweeps stop at a fixed point or after 100 rounds.  The
    procedure is fully deterministic; ``seed`` is accepted so stochastic
    detectors can share the signature.
    """
    del seed  # reference detector has no randomness
    labels = np.arange(g.n, dtype=np.int64)
    for _ in range(_MAX_SWEEPS):
        new = labels.copy()
        for u in range(g.n):
            nb = g.neighbors(u)
            if nb.size == 0:
                continue
            vals, counts = np.unique(labels[nb], return_counts=True)
            new[u] = vals[np.argmax(counts)]  # vals sorted, argmax keeps first
        if np.array_equal(new, labels):
            break
        labels = new
    return CommunityAssignment({u: {int(labels[u])} for u in range(g.n)})
