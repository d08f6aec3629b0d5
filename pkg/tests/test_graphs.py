import json
import os

import numpy as np
import pytest

from conftest import tiny_graph, write_csv_fixture
from fedgat.errors import (
    FeatureConflictError,
    FormatError,
    InfeasiblePartitionError,
    ReferentialIntegrityError,
)
from fedgat.graphs import (
    Graph,
    PartitionSpec,
    SyntheticSpec,
    align_features,
    directed_pairs,
    generate_synthetic,
    load_client_dir,
    load_graph,
    make_splits,
    partition_disjoint,
    partition_overlapping,
    project_masks,
    write_partition,
)


class TestLoadGraph:
    def test_hand_checked_fixture(self, tmp_path):
        fp, ep, lp = write_csv_fixture(
            tmp_path,
            [("node_id", "fa", "fb"), (10, 1.5, 0.0), (20, 0.0, 2.5), (30, 1.0, 1.0)],
            [("src_id", "dst_id"), (10, 20), (20, 30), (20, 10)],  # one duplicate
            [("node_id", "label"), (10, "spam"), (20, "ham"), (30, "spam")],
        )
        g = load_graph(fp, ep, lp)
        assert g.num_nodes == 3 and g.num_features == 2 and g.num_classes == 2
        assert g.feature_names == ("fa", "fb")
        np.testing.assert_array_equal(g.node_ids, [10, 20, 30])
        np.testing.assert_array_equal(g.features, [[1.5, 0.0], [0.0, 2.5], [1.0, 1.0]])
        np.testing.assert_array_equal(g.labels, [0, 1, 0])  # first-seen order
        np.testing.assert_array_equal(g.edges, [[0, 1], [1, 2]])  # deduped

    def test_empty_edge_file_gives_isolated_nodes(self, tmp_path):
        fp, ep, lp = write_csv_fixture(
            tmp_path,
            [("node_id", "x"), (1, 0.5), (2, 1.5)],
            [("src_id", "dst_id")],
            [("node_id", "label"), (1, 0), (2, 1)],
        )
        g = load_graph(fp, ep, lp)
        assert g.num_nodes == 2 and g.num_edges == 0

    def test_self_loops_removed(self, tmp_path):
        fp, ep, lp = write_csv_fixture(
            tmp_path,
            [("node_id", "x"), (1, 0.5), (2, 1.5)],
            [("src_id", "dst_id"), (1, 1), (1, 2)],
            [("node_id", "label"), (1, 0), (2, 1)],
        )
        assert load_graph(fp, ep, lp).num_edges == 1

    def test_dangling_edge(self, tmp_path):
        fp, ep, lp = write_csv_fixture(
            tmp_path,
            [("node_id", "x"), (1, 0.5)],
            [("src_id", "dst_id"), (1, 99)],
            [("node_id", "label"), (1, 0)],
        )
        with pytest.raises(ReferentialIntegrityError, match="99"):
            load_graph(fp, ep, lp)

    def test_ragged_feature_rows(self, tmp_path):
        fp, ep, lp = write_csv_fixture(
            tmp_path,
            [("node_id", "a", "b"), (1, 0.5), (2, 1.0, 2.0)],
            [("src_id", "dst_id")],
            [("node_id", "label"), (1, 0), (2, 0)],
        )
        with pytest.raises(FormatError, match="expected 3 columns"):
            load_graph(fp, ep, lp)

    def test_missing_label(self, tmp_path):
        fp, ep, lp = write_csv_fixture(
            tmp_path,
            [("node_id", "a"), (1, 0.5), (2, 1.0)],
            [("src_id", "dst_id")],
            [("node_id", "label"), (1, 0)],
        )
        with pytest.raises(ReferentialIntegrityError, match="without a label"):
            load_graph(fp, ep, lp)


CORA_DIR = os.environ.get("FEDGAT_CORA_DIR", "")


@pytest.mark.skipif(not (CORA_DIR and os.path.isdir(CORA_DIR)),
                    reason="set FEDGAT_CORA_DIR to a directory with the citation CSVs")
def test_cora_load_stats():
    g = load_client_dir(CORA_DIR)
    assert g.num_nodes == 2708
    assert g.num_features == 1433
    assert g.num_classes == 7


class TestAlignFeatures:
    def test_identical_columns_unchanged(self):
        g1 = self._named([0, 1], ("a", "b"), np.eye(2), [0, 1])
        g2 = self._named([5, 6], ("a", "b"), np.ones((2, 2)), [1, 0])
        a1, a2 = align_features([g1, g2])
        assert a1 is g1 and a2 is g2

    def _named(self, ids, names, values, labels):
        return Graph(node_ids=np.asarray(ids), features=np.asarray(values, dtype=float),
                     labels=np.asarray(labels), edges=np.zeros((0, 2), dtype=np.int64),
                     num_classes=2, feature_names=tuple(names))

    def test_union_with_zero_fill(self):
        g1 = self._named([0, 1], ("a", "b"), [[1.0, 2.0], [3.0, 4.0]], [0, 1])
        g2 = self._named([2, 3], ("b", "c"), [[5.0, 6.0], [7.0, 8.0]], [0, 1])
        a1, a2 = align_features([g1, g2])
        assert a1.feature_names == ("a", "b", "c") == a2.feature_names
        np.testing.assert_array_equal(a1.features, [[1, 2, 0], [3, 4, 0]])
        np.testing.assert_array_equal(a2.features, [[0, 5, 6], [0, 7, 8]])

    def test_three_disjoint_column_sets(self):
        gs = [
            self._named([0], ("a", "b"), [[1.0, 1.0]], [0]),
            self._named([1], ("c", "d", "e"), [[1.0, 1.0, 1.0]], [0]),
            self._named([2], ("f", "g", "h", "i"), [[1.0] * 4], [0]),
        ]
        aligned = align_features(gs)
        assert all(a.num_features == 9 for a in aligned)

    def test_conflicting_values_listed(self):
        g1 = self._named([0, 7], ("a",), [[1.0], [2.0]], [0, 1])
        g2 = self._named([7, 9], ("a",), [[3.0], [4.0]], [0, 1])
        with pytest.raises(FeatureConflictError, match=r"\(7, 'a', 2.0, 3.0\)"):
            align_features([g1, g2])

    def test_idempotent(self):
        g1 = self._named([0, 1], ("a", "b"), [[1.0, 2.0], [3.0, 4.0]], [0, 1])
        g2 = self._named([2, 3], ("b", "c"), [[5.0, 6.0], [7.0, 8.0]], [0, 1])
        once = align_features([g1, g2])
        twice = align_features(once)
        for a, b in zip(once, twice):
            assert a.feature_names == b.feature_names
            np.testing.assert_array_equal(a.features, b.features)


@pytest.fixture(scope="module")
def medium_graph():
    spec = SyntheticSpec(n_nodes=300, n_classes=4, feature_dim=8,
                         intra_class_edge_prob=0.08, inter_class_edge_prob=0.01,
                         seed=2)
    return generate_synthetic(spec)[0]


class TestPartitionOverlapping:
    def test_single_client_is_input(self, medium_graph):
        spec = PartitionSpec(n_clients=1, mode="overlapping", seed=0)
        (client,) = partition_overlapping(medium_graph, spec)
        np.testing.assert_array_equal(client.node_ids, medium_graph.node_ids)

    def test_union_covers_all_nodes(self, medium_graph):
        spec = PartitionSpec(n_clients=3, mode="overlapping",
                             overlap_fraction=0.2, seed=1)
        clients = partition_overlapping(medium_graph, spec)
        union = np.unique(np.concatenate([c.node_ids for c in clients]))
        np.testing.assert_array_equal(union, np.sort(medium_graph.node_ids))

    def test_deterministic_under_seed(self, medium_graph):
        spec = PartitionSpec(n_clients=2, mode="overlapping",
                             overlap_fraction=0.2, seed=9)
        a = partition_overlapping(medium_graph, spec)
        b = partition_overlapping(medium_graph, spec)
        for ga, gb in zip(a, b):
            np.testing.assert_array_equal(ga.node_ids, gb.node_ids)
            np.testing.assert_array_equal(ga.edges, gb.edges)

    def test_sizes_and_label_balance(self, medium_graph):
        spec = PartitionSpec(n_clients=2, mode="overlapping",
                             overlap_fraction=0.2, seed=3)
        clients = partition_overlapping(medium_graph, spec)
        sizes = [c.num_nodes for c in clients]
        assert max(sizes) <= 1.1 * min(sizes)
        global_frac = medium_graph.class_counts() / medium_graph.num_nodes
        for c in clients:
            frac = c.class_counts() / c.num_nodes
            rel = np.abs(frac - global_frac) / global_frac
            assert rel.max() <= 0.2

    def test_pairwise_overlap_near_requested(self, medium_graph):
        f = 0.3
        spec = PartitionSpec(n_clients=2, mode="overlapping",
                             overlap_fraction=f, seed=5)
        a, b = partition_overlapping(medium_graph, spec)
        shared = len(np.intersect1d(a.node_ids, b.node_ids))
        assert shared / a.num_nodes == pytest.approx(f, rel=0.35)

    def test_mode_mismatch(self, medium_graph):
        spec = PartitionSpec(n_clients=2, mode="disjoint", overlap_fraction=0.0)
        with pytest.raises(InfeasiblePartitionError):
            partition_overlapping(medium_graph, spec)

    def test_disjoint_spec_rejects_overlap(self):
        with pytest.raises(InfeasiblePartitionError, match="disjoint mode forces"):
            PartitionSpec(n_clients=2, mode="disjoint", overlap_fraction=1.0)


class TestPartitionDisjoint:
    def test_exact_partition(self, medium_graph):
        spec = PartitionSpec(n_clients=3, mode="disjoint", overlap_fraction=0.0, seed=1)
        clients = partition_disjoint(medium_graph, spec)
        assert sum(c.num_nodes for c in clients) == medium_graph.num_nodes
        for i in range(len(clients)):
            for j in range(i + 1, len(clients)):
                assert len(np.intersect1d(clients[i].node_ids, clients[j].node_ids)) == 0

    def test_edge_conservation(self, medium_graph):
        spec = PartitionSpec(n_clients=3, mode="disjoint", overlap_fraction=0.0, seed=1)
        clients = partition_disjoint(medium_graph, spec)
        kept = sum(c.num_edges for c in clients)
        assert kept <= medium_graph.num_edges
        # dropped edges are exactly those with endpoints in different clients
        owner = {}
        for u, c in enumerate(clients):
            for nid in c.node_ids.tolist():
                owner[nid] = u
        dropped = sum(
            1 for a, b in medium_graph.edges
            if owner[int(medium_graph.node_ids[a])] != owner[int(medium_graph.node_ids[b])]
        )
        assert kept + dropped == medium_graph.num_edges

    def test_too_many_clients(self, medium_graph):
        with pytest.raises(InfeasiblePartitionError):
            partition_disjoint(medium_graph,
                               PartitionSpec(n_clients=301, mode="disjoint",
                                             overlap_fraction=0.0))


class TestGenerateSynthetic:
    def test_single_type(self):
        spec = SyntheticSpec(n_nodes=50, n_classes=2, feature_dim=4,
                             intra_class_edge_prob=0.2, inter_class_edge_prob=0.05)
        graphs = generate_synthetic(spec)
        assert len(graphs) == 1

    def test_equal_probs_give_unit_homophily_ratio(self):
        intra_density = []
        inter_density = []
        for seed in range(10):
            spec = SyntheticSpec(n_nodes=120, n_classes=3, feature_dim=4,
                                 intra_class_edge_prob=0.15,
                                 inter_class_edge_prob=0.15, seed=seed)
            g = generate_synthetic(spec)[0]
            same = g.labels[g.edges[:, 0]] == g.labels[g.edges[:, 1]]
            counts = g.class_counts()
            same_pairs = float(sum(c * (c - 1) / 2 for c in counts))
            cross_pairs = g.num_nodes * (g.num_nodes - 1) / 2 - same_pairs
            intra_density.append(same.sum() / same_pairs)
            inter_density.append((~same).sum() / cross_pairs)
        ratio = np.mean(intra_density) / np.mean(inter_density)
        assert ratio == pytest.approx(1.0, rel=0.1)

    def test_type_density_ratio(self):
        ratios = []
        for seed in range(10):
            spec = SyntheticSpec(n_nodes=200, n_classes=2, feature_dim=4,
                                 intra_class_edge_prob=0.02,
                                 inter_class_edge_prob=0.005,
                                 edge_types=2, type_densities=(1.0, 10.0), seed=seed)
            g1, g2 = generate_synthetic(spec)
            ratios.append(g2.num_edges / g1.num_edges)
        assert np.mean(ratios) == pytest.approx(10.0, rel=0.2)

    def test_shared_nodes_features_labels(self):
        spec = SyntheticSpec(n_nodes=60, n_classes=2, feature_dim=4,
                             intra_class_edge_prob=0.2, inter_class_edge_prob=0.02,
                             edge_types=2, seed=3)
        g1, g2 = generate_synthetic(spec)
        assert np.array_equal(g1.features, g2.features)
        assert np.array_equal(g1.labels, g2.labels)
        assert np.array_equal(g1.node_ids, g2.node_ids)

    def test_homophily_invariant(self):
        with pytest.raises(ValueError, match="homophily"):
            SyntheticSpec(n_nodes=10, n_classes=2, feature_dim=2,
                          intra_class_edge_prob=0.1, inter_class_edge_prob=0.2)


class TestMakeSplits:
    def test_ratio_1_2_7(self):
        g = tiny_graph([], np.arange(100) % 10, num_classes=10)
        s = make_splits(g, (1, 2, 7), seed=0)
        assert (s.train_mask.sum(), s.val_mask.sum(), s.test_mask.sum()) == (10, 20, 70)

    def test_ratio_1_1_3(self):
        g = tiny_graph([], np.arange(100) % 4, num_classes=4)
        s = make_splits(g, (1, 1, 3), seed=0)
        assert (s.train_mask.sum(), s.val_mask.sum(), s.test_mask.sum()) == (20, 20, 60)

    def test_deterministic(self):
        g = tiny_graph([], np.arange(60) % 3)
        a = make_splits(g, (1, 2, 7), seed=5)
        b = make_splits(g, (1, 2, 7), seed=5)
        assert np.array_equal(a.train_mask, b.train_mask)
        assert np.array_equal(a.val_mask, b.val_mask)
        assert np.array_equal(a.test_mask, b.test_mask)

    def test_masks_disjoint_and_cover(self):
        g = tiny_graph([], np.arange(83) % 5)
        s = make_splits(g, (1, 2, 7), seed=1)
        total = s.train_mask.astype(int) + s.val_mask.astype(int) + s.test_mask.astype(int)
        assert (total == 1).all()

    def test_per_class_within_one_node(self):
        g = tiny_graph([], np.arange(83) % 5)
        s = make_splits(g, (1, 2, 7), seed=1)
        for c in range(5):
            cls = g.labels == c
            n_c = cls.sum()
            for mask, frac in ((s.train_mask, 0.1), (s.val_mask, 0.2), (s.test_mask, 0.7)):
                assert abs((mask & cls).sum() - frac * n_c) <= 1.0

    def test_every_present_class_in_train(self):
        labels = np.array([0] * 30 + [1] * 2 + [2] * 3)
        g = tiny_graph([], labels)
        s = make_splits(g, (1, 2, 7), seed=2)
        for c in range(3):
            assert (s.train_mask & (g.labels == c)).any()

    def test_absent_class_warns(self):
        g = tiny_graph([], np.array([0, 0, 2, 2]), num_classes=3)
        with pytest.warns(UserWarning, match=r"classes \[1\]"):
            make_splits(g, (1, 2, 7), seed=0)


def test_project_masks_matches_roles(medium_graph):
    g = make_splits(medium_graph, (1, 2, 7), seed=3)
    spec = PartitionSpec(n_clients=2, mode="overlapping", overlap_fraction=0.2, seed=0)
    clients = [project_masks(g, c) for c in partition_overlapping(g, spec)]
    role = {int(nid): ("train" if g.train_mask[i] else "val" if g.val_mask[i] else "test")
            for i, nid in enumerate(g.node_ids)}
    for c in clients:
        for i, nid in enumerate(c.node_ids.tolist()):
            expected = role[nid]
            got = ("train" if c.train_mask[i] else "val" if c.val_mask[i] else "test")
            assert got == expected


def test_write_partition_roundtrip(tmp_path, medium_graph):
    spec = PartitionSpec(n_clients=2, mode="overlapping", overlap_fraction=0.2, seed=4)
    clients = partition_overlapping(medium_graph, spec)
    write_partition(clients, tmp_path, spec)
    for u, original in enumerate(clients):
        back = load_client_dir(tmp_path / f"client_{u}")
        np.testing.assert_array_equal(back.node_ids, original.node_ids)
        np.testing.assert_array_equal(back.features, original.features)  # bit-exact
        # labels round-trip as tokens (dense indices are per-file first-seen)
        original_tokens = [original.label_names[c] for c in original.labels]
        back_tokens = [back.label_names[c] for c in back.labels]
        assert back_tokens == original_tokens
        np.testing.assert_array_equal(back.edges, original.edges)
        meta = json.loads((tmp_path / f"client_{u}" / "meta.json").read_text())
        assert meta["nodes"] == original.num_nodes
        assert meta["edges"] == original.num_edges
        assert meta["seed"] == 4
        assert meta["spec"]["overlap_fraction"] == 0.2


def test_directed_pairs_counts(path_graph_4):
    dst, src, starts = directed_pairs(path_graph_4, self_loops=True)
    assert len(dst) == 2 * path_graph_4.num_edges + path_graph_4.num_nodes
    counts = np.diff(starts)
    assert (counts >= 1).all()
    # node 1 sees {0, 2, itself}
    seg = src[starts[1]:starts[2]]
    assert set(seg.tolist()) == {0, 1, 2}
