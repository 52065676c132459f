import csv
import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import datasets
from mcdiffusion import RatingsDataset, build_channel_graph, generate_synthetic, graph_consistency_check


def graph(triples, **kw):
    return build_channel_graph(RatingsDataset.from_triples(triples, **kw))


def memberships(g):
    """Set of (user, (item, level)) edges."""
    return {(u, (i, lvl)) for u, i, lvl in g.edges()}


class TestBuild:
    def test_single_rating(self):
        g = graph([(0, 0, 3)])
        assert g.num_channels == 1
        assert g.channel_id(0) == (0, 3)
        assert g.user_degree.tolist() == [1]
        assert g.channel_degree.tolist() == [1]

    def test_shared_channel(self):
        g = graph([(0, 0, 5), (1, 0, 5)])
        assert g.num_channels == 1
        assert g.channel_id(0) == (0, 5)
        assert g.channel_degree.tolist() == [2]
        assert g.users_of(0).tolist() == [0, 1]

    def test_distinct_levels_make_distinct_channels(self):
        g = graph([(0, 0, 5), (1, 0, 4)])
        # enumerate edges by hand: (u0 -> (0,5)), (u1 -> (0,4)), channels sorted by level
        assert [g.channel_id(c) for c in range(g.num_channels)] == [(0, 4), (0, 5)]
        assert memberships(g) == {(0, (0, 5)), (1, (0, 4))}
        assert g.channel_degree.tolist() == [1, 1]

    def test_channels_sorted_by_item_then_level(self):
        g = graph([(0, 2, 1), (1, 0, 5), (2, 0, 2), (0, 1, 3)])
        ids = [g.channel_id(c) for c in range(g.num_channels)]
        assert ids == sorted(ids)

    def test_isolated_user_not_stored(self):
        g = build_channel_graph(RatingsDataset(3, 1, 5, [0, 2], [0, 0], [1, 1]))
        assert set(g.user_adj) == {0, 2}
        assert g.user_degree.tolist() == [1, 0, 1]
        assert len(g.channels_of(1)) == 0

    def test_empty_training_set(self):
        g = build_channel_graph(RatingsDataset(2, 2, 5, [], [], []))
        assert g.num_channels == 0 and g.num_edges == 0
        assert graph_consistency_check(g)

    def test_write_edges(self, tmp_path):
        g = graph([(0, 1, 2), (1, 0, 5)])
        g.write_edges(tmp_path / "e.csv")
        rows = list(csv.reader(open(tmp_path / "e.csv")))
        assert rows == [["user", "item", "level"], ["0", "1", "2"], ["1", "0", "5"]]

    @settings(max_examples=300, deadline=None)
    @given(datasets(max_m=12, max_n=12))
    def test_edge_count_conservation(self, d):
        g = build_channel_graph(d)
        assert g.user_degree.sum() == g.channel_degree.sum() == len(d)
        assert np.array_equal(g.user_degree, d.user_degrees)
        assert g.channel_degree.min(initial=1) >= 1
        assert graph_consistency_check(g)

    @settings(max_examples=300, deadline=None)
    @given(datasets(max_m=10, max_n=10), st.data())
    def test_changing_a_level_moves_exactly_one_membership(self, d, data):
        k = data.draw(st.integers(0, len(d) - 1))
        new = data.draw(st.integers(1, d.scale_max).filter(lambda r: r != d.ratings[k]))
        ratings = d.ratings.copy()
        ratings[k] = new
        d2 = RatingsDataset(d.num_users, d.num_items, d.scale_max, d.users, d.items, ratings)
        before, after = memberships(build_channel_graph(d)), memberships(build_channel_graph(d2))
        u, i = int(d.users[k]), int(d.items[k])
        assert before - after == {(u, (i, int(d.ratings[k])))}
        assert after - before == {(u, (i, new))}


class TestConsistencyCheck:
    def test_built_graph_passes(self):
        g = build_channel_graph(generate_synthetic(40, 30, 0.3, seed=2))
        report = graph_consistency_check(g)
        assert report.ok, report.problems

    def test_corrupted_transpose_names_edge(self):
        g = graph([(0, 0, 5), (1, 0, 5), (1, 1, 2)])
        c = 0
        adj = list(g.channel_adj)
        adj[c] = np.array([1])  # user 0 dropped from channel (0, 5)
        bad = dataclasses.replace(g, channel_adj=tuple(adj))
        report = graph_consistency_check(bad)
        assert not report.ok
        assert any("user 0, channel 0" in p for p in report.problems)

    def test_empty_adjacency_user_fails(self):
        g = graph([(0, 0, 5), (1, 0, 4)])
        adj = dict(g.user_adj)
        adj[2] = np.zeros(0, dtype=np.int64)
        bad = dataclasses.replace(g, num_users=3, user_adj=adj, user_degree=np.array([1, 1, 0]))
        report = graph_consistency_check(bad)
        assert not report.ok
        assert any("isolated user 2" in p for p in report.problems)

    def test_degree_mismatch_fails(self):
        g = graph([(0, 0, 5), (1, 0, 5)])
        bad = dataclasses.replace(g, channel_degree=np.array([3]))
        assert not graph_consistency_check(bad)

    @pytest.mark.parametrize("field", ["user_degree", "channel_degree"])
    def test_reports_never_raise(self, field):
        g = graph([(0, 0, 5)])
        bad = dataclasses.replace(g, **{field: np.array([], dtype=np.int64)})
        assert not graph_consistency_check(bad).ok
