import itertools
import math

import numpy as np
import pytest

from socialsearch.geo import (
    CONTIGUOUS_US,
    EARTH_RADIUS_KM,
    BoundingBox,
    GeoPoint,
    build_grid,
    haversine_km,
)
from socialsearch.graph import SocialGraph
from socialsearch.netgen import (
    DistanceRanges,
    EmbeddingSpec,
    apportion,
    configuration_model,
    distance_biased_graph,
    draw_cell_sizes,
    embed_nodes,
    erdos_renyi,
    powerlaw_mean,
    rewire_preserving_degree_range,
    sample_degree_sequence,
    solve_powerlaw_cutoff,
)


# -- distance ranges ---------------------------------------------------------


def test_bucket_edges_are_inclusive_on_the_right():
    r = DistanceRanges()
    assert r.bucket(0.0) == 0
    assert r.bucket(6.25) == 0
    assert r.bucket(6.2500001) == 1
    assert r.bucket(6400.0) == 10
    assert r.bucket(6400.1) == 11
    assert r.n_buckets == 12


def test_bucket_arrays_match_scalar():
    r = DistanceRanges()
    ds = np.array([0.0, 3.0, 6.25, 7.0, 100.0, 100.0001, 9999.0])
    got = r.bucket_arrays(ds)
    assert [r.bucket(float(d)) for d in ds] == got.tolist()


def test_bucket_labels():
    r = DistanceRanges()
    assert r.label(0) == "<=6.25"
    assert r.label(1) == "6.25-12.5"
    assert r.label(11) == ">6400"


def test_ranges_must_double():
    with pytest.raises(ValueError, match="double"):
        DistanceRanges((5.0, 11.0))
    with pytest.raises(ValueError, match="increase"):
        DistanceRanges((5.0, 5.0))
    with pytest.raises(ValueError):
        DistanceRanges(())


def test_bucket_rejects_negative():
    with pytest.raises(ValueError):
        DistanceRanges().bucket(-1.0)


# -- apportioning ------------------------------------------------------------


def test_apportion_exact_total_and_tie_order():
    counts = apportion(np.array([1.0, 1.0, 1.0]), 4)
    assert counts.tolist() == [2, 1, 1]
    assert counts.sum() == 4


def test_apportion_tracks_proportions():
    raw = np.array([100.0, 10.0, 1.0, 0.0])
    counts = apportion(raw, 1000)
    assert counts.sum() == 1000
    assert counts[0] > counts[1] > counts[2] >= counts[3] == 0
    assert abs(counts[0] - 1000 * 100 / 111) <= 1


def test_apportion_rejects_zero_mass():
    with pytest.raises(ValueError):
        apportion(np.zeros(3), 10)


# -- embedding specs ----------------------------------------------------------


def test_embedding_spec_validation():
    with pytest.raises(ValueError):
        EmbeddingSpec(kind="pareto")
    with pytest.raises(ValueError):
        EmbeddingSpec(kind="normal", within_cell="center")
    with pytest.raises(ValueError):
        EmbeddingSpec(kind="exponential", mean=-3.0)
    with pytest.raises(ValueError):
        EmbeddingSpec(kind="zipf", largest_cell=0.0)


def test_embedding_spec_from_label():
    s = EmbeddingSpec.from_label("zipf:geographic")
    assert s.kind == "zipf" and s.within_cell == "geographic"
    assert s.label == "zipf:geographic"
    assert EmbeddingSpec.from_label("original").label == "original"


def test_draw_cell_sizes_zipf_raw_maximum():
    spec = EmbeddingSpec(kind="zipf", largest_cell=10700.0)
    sizes = draw_cell_sizes(spec, 500, np.random.default_rng(4))
    assert sizes.max() == 10700.0
    assert sizes.min() == pytest.approx(10700.0 / 500)


def test_draw_cell_sizes_normal_truncated_and_rounded():
    spec = EmbeddingSpec(kind="normal", mean=2.0, variance=100.0)
    sizes = draw_cell_sizes(spec, 2000, np.random.default_rng(5))
    assert sizes.min() >= 0.0
    assert np.all(sizes == np.rint(sizes))


def test_draw_cell_sizes_needs_params_without_base():
    spec = EmbeddingSpec(kind="exponential")
    with pytest.raises(ValueError, match="mean"):
        draw_cell_sizes(spec, 10, np.random.default_rng(0))


# -- embedding ----------------------------------------------------------------

GRID = build_grid(CONTIGUOUS_US, side_km=70.0)


def base_locations_two_clusters(n_per=40):
    rng = np.random.default_rng(99)
    locs = {}
    node = 0
    for lat0, lon0 in ((33.0, -112.0), (41.0, -88.0)):
        for _ in range(n_per):
            locs[node] = GeoPoint(lat0 + rng.uniform(0, 0.3), lon0 + rng.uniform(0, 0.3))
            node += 1
    return locs


def test_embed_original_returns_copy():
    base = base_locations_two_clusters()
    out = embed_nodes(GRID, base, EmbeddingSpec(kind="original"), np.random.default_rng(0))
    assert out == base
    assert out is not base


def test_embed_uniform_random_uses_only_populated_cells():
    base = base_locations_two_clusters()
    base_cells = {GRID.locate(p) for p in base.values()}
    out = embed_nodes(GRID, base, EmbeddingSpec(kind="uniform-random"), np.random.default_rng(1))
    assert out.keys() == base.keys()
    for p in out.values():
        assert GRID.locate(p) in base_cells


def test_embed_uniform_random_is_deterministic():
    base = base_locations_two_clusters()
    a = embed_nodes(GRID, base, EmbeddingSpec(kind="uniform-random"), np.random.default_rng(7))
    b = embed_nodes(GRID, base, EmbeddingSpec(kind="uniform-random"), np.random.default_rng(7))
    assert a == b


def test_embed_without_base_needs_count():
    with pytest.raises(ValueError, match="n_nodes"):
        embed_nodes(GRID, None, EmbeddingSpec(kind="uniform-random"), np.random.default_rng(0))


def test_embed_exponential_total_and_containment():
    spec = EmbeddingSpec(kind="exponential", mean=5.0)
    out = embed_nodes(GRID, None, spec, np.random.default_rng(2), n_nodes=500)
    assert len(out) == 500
    assert set(out) == set(range(500))
    for p in out.values():
        assert CONTIGUOUS_US.contains(p)


def test_embed_normal_derives_stats_from_base():
    base = base_locations_two_clusters()
    out = embed_nodes(GRID, base, EmbeddingSpec(kind="normal"), np.random.default_rng(3))
    assert out.keys() == base.keys()


def test_embed_zipf_concentrates_mass():
    spec = EmbeddingSpec(kind="zipf", largest_cell=10700.0)
    out = embed_nodes(GRID, None, spec, np.random.default_rng(4), n_nodes=2000)
    cells = {}
    for p in out.values():
        c = GRID.locate(p)
        cells[c] = cells.get(c, 0) + 1
    top = max(cells.values())
    # the rank-1 cell holds roughly n / H(n_cells) nodes, far above uniform
    assert top > 50


def test_embed_geographic_placement_mimics_base_offsets():
    # all base points sit at relative offset (0.25, 0.25) of their cell
    base = {}
    for i, cell in enumerate([3, 40, 41, 100]):
        lat_lo, lat_hi, lon_lo, lon_hi = GRID.cell_bounds(cell)
        base[i] = GeoPoint(lat_lo + 0.25 * (lat_hi - lat_lo), lon_lo + 0.25 * (lon_hi - lon_lo))
    spec = EmbeddingSpec(kind="uniform-random", within_cell="geographic")
    out = embed_nodes(GRID, base, spec, np.random.default_rng(5))
    for p in out.values():
        cell = GRID.locate(p)
        lat_lo, lat_hi, lon_lo, lon_hi = GRID.cell_bounds(cell)
        assert (p.lat - lat_lo) / (lat_hi - lat_lo) == pytest.approx(0.25)
        assert (p.lon - lon_lo) / (lon_hi - lon_lo) == pytest.approx(0.25)


def test_embed_geographic_without_base_rejected():
    spec = EmbeddingSpec(kind="exponential", mean=3.0, within_cell="geographic")
    with pytest.raises(ValueError, match="geographic"):
        embed_nodes(GRID, None, spec, np.random.default_rng(0), n_nodes=10)


# -- rewiring -----------------------------------------------------------------


def geo_er_graph(n=400, mean_degree=8.0, seed=10):
    rng = np.random.default_rng(seed)
    g = erdos_renyi(n, mean_degree, rng)
    lats = rng.uniform(33.0, 41.0, n)
    lons = rng.uniform(-112.0, -88.0, n)
    return g.with_locations(lats, lons)


def range_histograms(g, ranges):
    hists = np.zeros((g.n, ranges.n_buckets), dtype=np.int64)
    for u in range(g.n):
        for v in g.neighbors(u):
            d = haversine_km(g.location(u), g.location(int(v)))
            hists[u, ranges.bucket(d)] += 1
    return hists


def test_rewire_preserves_degrees_and_range_histograms():
    g = geo_er_graph()
    ranges = DistanceRanges()
    before = range_histograms(g, ranges)
    result = rewire_preserving_degree_range(g, GRID, ranges, np.random.default_rng(3), attempts=20_000)
    assert result.swaps > 0
    assert result.attempts == 20_000
    assert np.array_equal(result.graph.degrees, g.degrees)
    after = range_histograms(result.graph, ranges)
    assert np.array_equal(before, after)
    assert result.graph.edge_count == g.edge_count
    # something actually changed
    assert sorted(map(tuple, result.graph.edge_array())) != sorted(map(tuple, g.edge_array()))


def test_rewire_deterministic():
    g = geo_er_graph(n=200, seed=4)
    ranges = DistanceRanges()
    a = rewire_preserving_degree_range(g, GRID, ranges, np.random.default_rng(8), attempts=5000)
    b = rewire_preserving_degree_range(g, GRID, ranges, np.random.default_rng(8), attempts=5000)
    assert a.swaps == b.swaps
    assert np.array_equal(a.graph.edge_array(), b.graph.edge_array())


def test_rewire_keeps_locations_and_ids():
    g = geo_er_graph(n=150, seed=6)
    result = rewire_preserving_degree_range(g, GRID, DistanceRanges(), np.random.default_rng(1), attempts=2000)
    assert np.array_equal(result.graph.lats, g.lats)
    assert np.array_equal(result.graph.ext_ids, g.ext_ids)


def test_rewire_zero_attempts_returns_same_edges():
    g = geo_er_graph(n=100, seed=2)
    result = rewire_preserving_degree_range(g, GRID, DistanceRanges(), np.random.default_rng(0), attempts=0)
    assert result.swaps == 0
    assert np.array_equal(result.graph.edge_array(), g.edge_array())


# -- random graphs ------------------------------------------------------------


def test_erdos_renyi_pair_decoding_is_exact():
    # drive p to 1 so every pair index is emitted, then check the decode
    for n in (2, 3, 5, 8):
        g = erdos_renyi(n, float(n - 1), np.random.default_rng(0))
        expect = list(itertools.combinations(range(n), 2))
        assert sorted(map(tuple, g.edge_array())) == expect


def test_erdos_renyi_mean_degree():
    g = erdos_renyi(10_000, 12.0, np.random.default_rng(11))
    mean = g.degrees.mean()
    assert abs(mean - 12.0) / 12.0 < 0.01


def test_erdos_renyi_validation():
    with pytest.raises(ValueError):
        erdos_renyi(1, 1.0, np.random.default_rng(0))
    with pytest.raises(ValueError):
        erdos_renyi(10, 0.0, np.random.default_rng(0))
    with pytest.raises(ValueError):
        erdos_renyi(10, 9.5, np.random.default_rng(0))


def test_degree_sequence_exponential_mean():
    rng = np.random.default_rng(21)
    seq = sample_degree_sequence("exponential", 10_000, rng, mean=12.0)
    assert seq.sum() % 2 == 0
    assert abs(seq.mean() - 12.0) / 12.0 < 0.1
    assert np.all(seq >= 0)


def test_degree_sequence_power_law_hits_target_mean():
    rng = np.random.default_rng(22)
    seq = sample_degree_sequence("power-law", 20_000, rng, gamma=1.49, target_mean=12.0)
    assert seq.sum() % 2 == 0
    assert abs(seq.mean() - 12.0) / 12.0 < 0.05
    assert seq.min() >= 1


def test_degree_sequence_validation():
    rng = np.random.default_rng(0)
    with pytest.raises(ValueError):
        sample_degree_sequence("exponential", 10, rng)
    with pytest.raises(ValueError):
        sample_degree_sequence("power-law", 10, rng, gamma=0.9, target_mean=5.0)
    with pytest.raises(ValueError):
        sample_degree_sequence("power-law", 10, rng, gamma=1.5)
    with pytest.raises(ValueError):
        sample_degree_sequence("cauchy", 10, rng)


def test_degree_sequence_single_node_is_evened():
    rng = np.random.default_rng(1)
    seq = sample_degree_sequence("power-law", 1, rng, gamma=1.49, d_max=9)
    assert len(seq) == 1
    assert seq.sum() % 2 == 0


def test_solve_cutoff_recovers_target():
    cutoff = solve_powerlaw_cutoff(1.49, 1, 12.0)
    assert abs(powerlaw_mean(1.49, 1, cutoff) - 12.0) <= 0.05 * 12.0
    assert 50 < cutoff < 1000


def test_solve_cutoff_errors_when_mean_saturates():
    # at gamma 3.5 the mean tops out near 1.11, far below 50
    with pytest.raises(ValueError, match="no cutoff"):
        solve_powerlaw_cutoff(3.5, 1, 50.0)


def test_configuration_model_triangle():
    g = configuration_model([2, 2, 2], np.random.default_rng(0))
    assert sorted(map(tuple, g.edge_array())) == [(0, 1), (0, 2), (1, 2)]


def test_configuration_model_realizes_big_sequences():
    rng = np.random.default_rng(30)
    seq = sample_degree_sequence("power-law", 3000, rng, gamma=1.49, target_mean=12.0)
    g = configuration_model(seq, rng)
    off = np.abs(g.degrees - seq)
    assert (off > 1).mean() <= 0.01
    assert (off == 0).mean() > 0.95


def test_configuration_model_rejects_bad_input():
    rng = np.random.default_rng(0)
    with pytest.raises(ValueError, match="even"):
        configuration_model([3], rng)
    with pytest.raises(ValueError):
        configuration_model([-2, 2], rng)
    with pytest.raises(RuntimeError):
        configuration_model([2], rng)  # nothing to pair with
    with pytest.raises(RuntimeError):
        configuration_model([3, 1], rng)  # node 0 cannot place 3 simple edges


def test_configuration_model_deterministic():
    seq = [4, 3, 3, 2, 2, 2, 1, 1]
    a = configuration_model(seq, np.random.default_rng(9))
    b = configuration_model(seq, np.random.default_rng(9))
    assert np.array_equal(a.edge_array(), b.edge_array())


def test_distance_biased_graph_prefers_short_edges():
    rng = np.random.default_rng(14)
    lats = rng.uniform(33.0, 41.0, 600)
    lons = rng.uniform(-112.0, -88.0, 600)
    g = distance_biased_graph(lats, lons, np.random.default_rng(15), out_degree_mean=6.0)
    assert 6.0 < g.degrees.mean() < 14.0
    edges = g.edge_array()
    d = [haversine_km(g.location(int(u)), g.location(int(v))) for u, v in edges[:2000]]
    d = np.array(d)
    # local attachment: the median edge is far shorter than the typical
    # random pair separation (several hundred km in this box)
    assert np.median(d) < 200.0
