"""Bounded friends-of-friends knowledge with coordinated, nested selections."""

from __future__ import annotations

import threading
import weakref

import numpy as np

from .graph import SocialGraph

# mixed into the stream key so knowledge draws stay independent of other
# consumers seeded with the same integer
_STREAM_TAG = 0x9E3779B97F4A7C15
_MASK64 = (1 << 64) - 1

# per-graph cache of full FoF orderings, shared across model instances:
# {graph: {(seed, node, friend): ordered candidate array}}
_order_cache: "weakref.WeakKeyDictionary[SocialGraph, dict]" = weakref.WeakKeyDictionary()
_order_lock = threading.Lock()


def fof_candidates(g: SocialGraph, node: int, friend: int) -> np.ndarray:
    """Friends of ``friend`` that ``node`` cannot already reach directly.

    Excludes ``node`` itself, ``friend``, and every direct friend of
    ``node``.  Sorted ascending.  Raises if the two are not friends.
    """
    nb = g.neighbors(node)
    j = np.searchsorted(nb, friend)
    if j >= len(nb) or nb[j] != friend:
        raise ValueError(f"node {friend} is not a friend of {node}")
    cand = np.setdiff1d(g.neighbors(friend), nb, assume_unique=True)
    return cand[(cand != node) & (cand != friend)]


def _fof_order(g: SocialGraph, seed: int, node: int, friend: int) -> np.ndarray:
    with _order_lock:
        per_graph = _order_cache.setdefault(g, {})
    key = (seed, node, friend)
    arr = per_graph.get(key)
    if arr is None:
        cand = fof_candidates(g, node, friend)
        if cand.size > 1:
            # counter-keyed stream: the permutation depends only on
            # (seed, node, friend), never on evaluation order
            bits = np.random.Philox(
                key=[seed & _MASK64, _STREAM_TAG], counter=[0, 0, node, friend]
            )
            cand = cand[np.random.Generator(bits).permutation(cand.size)]
        per_graph[key] = arr = cand
    return arr


class KnowledgeModel:
    """What nodes know about their friends' friends, capped at ``kappa``.

    Each node knows a fixed pseudo-random subset of up to ``kappa`` of every
    friend's friends.  The subset for a (node, friend) pair is the first
    ``kappa`` entries of a permutation keyed only by ``knowledge_seed`` and
    the pair, so the same seed yields nested selections across caps and
    identical knowledge in every trial.
    """

    __slots__ = ("kappa", "knowledge_seed", "_sets")

    def __init__(self, kappa: int, knowledge_seed: int) -> None:
        if kappa < 0:
            raise ValueError("kappa must be non-negative")
        self.kappa = int(kappa)
        self.knowledge_seed = int(knowledge_seed)
        self._sets: "weakref.WeakKeyDictionary[SocialGraph, dict]" = weakref.WeakKeyDictionary()

    def known(self, g: SocialGraph, node: int, friend: int) -> np.ndarray:
        """The FoF of ``friend`` that ``node`` knows, in selection order."""
        if self.kappa == 0:
            # validate the pair even though nothing is known
            nb = g.neighbors(node)
            j = np.searchsorted(nb, friend)
            if j >= len(nb) or nb[j] != friend:
                raise ValueError(f"node {friend} is not a friend of {node}")
            return np.empty(0, dtype=np.int64)
        order = _fof_order(g, self.knowledge_seed, node, friend)
        return order[: self.kappa]

    def known_set(self, g: SocialGraph, node: int, friend: int) -> frozenset[int]:
        per_graph = self._sets.setdefault(g, {})
        key = (node, friend)
        s = per_graph.get(key)
        if s is None:
            per_graph[key] = s = frozenset(int(x) for x in self.known(g, node, friend))
        return s


def known_fof(model: KnowledgeModel, g: SocialGraph, node: int, friend: int) -> np.ndarray:
    return model.known(g, node, friend)


def knows_target(model: KnowledgeModel, g: SocialGraph, node: int, target: int) -> int | None:
    """Smallest-id friend of ``node`` that has ``target`` among its known FoF.

    None when no friend qualifies; with ``kappa == 0`` nobody knows anyone.
    A target that is a direct friend is never an FoF candidate, so it yields
    None here (direct delivery is handled before this check).
    """
    if node == target:
        raise ValueError("node and target must differ")
    if model.kappa == 0:
        return None
    for f in g.neighbors(node):
        if target in model.known_set(g, node, int(f)):
            return int(f)
    return None
