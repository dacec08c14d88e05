import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from socialsearch.communities import (
    CommunityAssignment,
    detect_communities,
    largest_shared_community_size,
    load_communities,
    remap_to_graph,
    smallest_shared_community_size,
)
from socialsearch.graph import SocialGraph


def make_graph(n, edges, ext_ids=None):
    zeros = np.zeros(n)
    return SocialGraph(n, np.array(edges, dtype=np.int64).reshape(-1, 2), zeros, zeros, ext_ids=ext_ids)


def test_sizes_and_c_max():
    a = CommunityAssignment({1: {10}, 2: {10, 11}, 3: {11}, 4: {12}})
    assert a.sizes == {10: 2, 11: 2, 12: 1}
    assert a.c_max == 2
    assert a.communities_of(2) == frozenset({10, 11})
    assert a.communities_of(99) == frozenset()


def test_c_max_none_when_all_singletons():
    a = CommunityAssignment({1: {10}, 2: {11}})
    assert a.c_max is None


def test_smallest_shared_size():
    a = CommunityAssignment({1: {10, 11}, 2: {10, 11}, 3: {11}})
    # community 10 has 2 members, 11 has 3
    assert smallest_shared_community_size(a, 1, 2) == 2
    assert largest_shared_community_size(a, 1, 2) == 3
    assert smallest_shared_community_size(a, 1, 3) == 3
    assert smallest_shared_community_size(a, 2, 99) is None


def test_shared_size_with_self_uses_own_memberships():
    a = CommunityAssignment({1: {10, 11}, 2: {11}, 3: {11}, 4: {10}})
    assert smallest_shared_community_size(a, 1, 1) == 2


membership_st = st.dictionaries(
    st.integers(0, 15), st.sets(st.integers(0, 6), min_size=1, max_size=3), max_size=16
)


@given(membership_st, st.integers(0, 15), st.integers(0, 15))
def test_shared_size_symmetric_and_bounded(members, a, b):
    asg = CommunityAssignment(members)
    s = smallest_shared_community_size(asg, a, b)
    assert s == smallest_shared_community_size(asg, b, a)
    if s is not None:
        assert 1 <= s <= len(asg.memberships)
        if a != b and asg.c_max is not None:
            # two distinct co-members imply the community has >= 2 members
            assert s <= max(asg.sizes.values())


@given(membership_st)
def test_every_membership_has_a_size(members):
    asg = CommunityAssignment(members)
    for comms in asg.memberships.values():
        for c in comms:
            assert asg.sizes[c] >= 1


def test_load_communities(tmp_path):
    path = tmp_path / "comms.tsv"
    path.write_text("# header\n1\t100\n2\t100\n1\t200\n\n1\t100\n")
    a = load_communities(path)
    assert a.communities_of(1) == frozenset({100, 200})
    assert a.sizes == {100: 2, 200: 1}


def test_load_communities_malformed(tmp_path):
    path = tmp_path / "comms.tsv"
    path.write_text("1\t100\nbroken\n")
    with pytest.raises(ValueError, match=":2"):
        load_communities(path)


def test_remap_to_graph_recomputes_sizes():
    g = make_graph(2, [(0, 1)], ext_ids=np.array([10, 30]))
    a = CommunityAssignment({10: {7}, 20: {7}, 30: {8}})
    r = remap_to_graph(a, g)
    assert r.communities_of(0) == frozenset({7})
    assert r.communities_of(1) == frozenset({8})
    # node 20 is outside the graph, community 7 shrinks to one member
    assert r.sizes == {7: 1, 8: 1}


def two_cliques_graph():
    edges = []
    for base in (0, 5):
        for i in range(5):
            for j in range(i + 1, 5):
                edges.append((base + i, base + j))
    edges.append((4, 9))  # single bridge
    return make_graph(10, edges)


def test_label_propagation_splits_bridged_cliques():
    g = two_cliques_graph()
    a = detect_communities(g)
    first = {frozenset(a.communities_of(u)) for u in range(5)}
    second = {frozenset(a.communities_of(u)) for u in range(5, 10)}
    assert len(first) == 1 and len(second) == 1
    assert first != second
    assert sorted(a.sizes.values()) == [5, 5]


def test_label_propagation_deterministic():
    g = two_cliques_graph()
    a1 = detect_communities(g, seed=1)
    a2 = detect_communities(g, seed=99)
    assert a1.memberships == a2.memberships


def test_label_propagation_isolated_nodes_stay_alone():
    g = make_graph(3, [(0, 1)])
    a = detect_communities(g)
    assert a.communities_of(2) == frozenset({2})


@settings(max_examples=30)
@given(
    st.lists(
        st.tuples(st.integers(0, 11), st.integers(0, 11)).filter(lambda e: e[0] != e[1]),
        max_size=30,
    ).map(lambda es: sorted({(min(u, v), max(u, v)) for u, v in es}))
)
def test_label_propagation_is_a_partition(edges):
    g = make_graph(12, np.array(edges, dtype=np.int64).reshape(-1, 2))
    a = detect_communities(g)
    # exactly one community per node, sizes sum to n
    assert all(len(a.communities_of(u)) == 1 for u in range(12))
    assert sum(a.sizes.values()) == 12
