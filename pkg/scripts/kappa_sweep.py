#!/usr/bin/env python3
"""Sweep kappa on a synthetic geo network and print success/stretch curves.

Builds a 5,000-node network with zipf-sized cell populations and
distance-biased friendships, then routes 100 pairs x 100 repetitions per
(weights, kappa) cell.  Takes a few minutes single-threaded.
"""

import argparse
import sys
import time

import numpy as np

from socialsearch.communities import detect_communities
from socialsearch.experiment import compute_stretch, run_trial_block, sample_pairs
from socialsearch.geo import CONTIGUOUS_US, build_grid, geographic_diameter_arrays
from socialsearch.graph import bfs_hops, giant_component
from socialsearch.knowledge import KnowledgeModel
from socialsearch.netgen import EmbeddingSpec, distance_biased_graph, embed_nodes
from socialsearch.routing import RoutingContext, Weights


def build_network(n: int, seed: int):
    rng = np.random.default_rng(seed)
    grid = build_grid(CONTIGUOUS_US, 70.0)
    locs = embed_nodes(grid, None, EmbeddingSpec("zipf"), rng, n_nodes=n)
    lats = np.array([locs[i].lat for i in range(n)])
    lons = np.array([locs[i].lon for i in range(n)])
    g = giant_component(distance_biased_graph(lats, lons, rng, out_degree_mean=6.5, alpha=2.0))
    return g, detect_communities(g, seed=seed + 1)


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--nodes", type=int, default=5000)
    parser.add_argument("--pairs", type=int, default=100)
    parser.add_argument("--repetitions", type=int, default=100)
    parser.add_argument("--min-separation-km", type=float, default=500.0)
    parser.add_argument("--kappas", type=int, nargs="+", default=[0, 3, 6, 12, 24, 48])
    parser.add_argument("--seed", type=int, default=424242)
    parser.add_argument("--workers", type=int, default=1)
    args = parser.parse_args()

    t0 = time.time()
    g, comms = build_network(args.nodes, args.seed)
    d_max = geographic_diameter_arrays(g.lats, g.lons)
    print(
        f"network: {g.n} nodes, {g.edge_count} edges, "
        f"mean degree {2 * g.edge_count / g.n:.1f}, built in {time.time() - t0:.0f}s"
    )

    pairs = sample_pairs(g, args.pairs, args.min_separation_km, np.random.default_rng(args.seed + 2))
    shortest = [bfs_hops(g, a, b) for a, b in pairs]

    settings = (
        ("greedy 1/4,1/4,1/2", Weights(0.25, 0.25, 0.5)),
        ("random walk", Weights(0.0, 0.0, 0.0)),
    )
    print(f"\n{'weights':<20} {'kappa':>5} {'success':>8} {'stretch':>8} {'excl':>5}")
    for label, w in settings:
        for kappa in args.kappas:
            ctx = RoutingContext(
                g, comms, KnowledgeModel(kappa, 20210), w, d_max=d_max, hop_limit=50
            )
            block = run_trial_block(
                ctx, pairs, shortest, args.repetitions, (20212, 0), workers=args.workers
            )
            s = compute_stretch(block)
            print(
                f"{label:<20} {kappa:5d} {block.delivered.mean():8.4f} "
                f"{s.mean:8.3f} {s.excluded:5d}"
            )
    print(f"\ntotal {time.time() - t0:.0f}s")
    return 0


if __name__ == "__main__":
    sys.exit(main())
