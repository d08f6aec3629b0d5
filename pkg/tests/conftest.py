"""Shared fixtures: tiny graphs and CSV fixture writers."""

import numpy as np
import pytest

from fedgat.graphs import Graph, SyntheticSpec, generate_synthetic, make_splits


def tiny_graph(edges, labels, features=None, num_classes=None, seed=0):
    """Small Graph from explicit edge/label lists (features random if omitted)."""
    labels = np.asarray(labels, dtype=np.int64)
    k = len(labels)
    if features is None:
        rng = np.random.default_rng(seed)
        features = rng.normal(size=(k, 4))
    features = np.asarray(features, dtype=np.float64)
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    if edges.size:
        lo = np.minimum(edges[:, 0], edges[:, 1])
        hi = np.maximum(edges[:, 0], edges[:, 1])
        keep = lo != hi
        edges = np.unique(np.stack([lo[keep], hi[keep]], axis=1), axis=0)
    return Graph(
        node_ids=np.arange(k), features=features, labels=labels, edges=edges,
        num_classes=num_classes or int(labels.max()) + 1,
    )


@pytest.fixture
def path_graph_4():
    """0-1-2-3 path, two classes, fixed features."""
    feats = np.array([[1.0, 0.2], [0.5, -0.3], [-0.4, 0.8], [0.9, 0.1]])
    return tiny_graph([(0, 1), (1, 2), (2, 3)], [0, 0, 1, 1], features=feats)


@pytest.fixture
def small_split_graph():
    """Homophilous 24-node graph with 1:2:7-ish splits for training tests."""
    spec = SyntheticSpec(n_nodes=24, n_classes=3, feature_dim=6,
                         intra_class_edge_prob=0.45, inter_class_edge_prob=0.05,
                         feature_noise=0.6, seed=11)
    return make_splits(generate_synthetic(spec)[0], (2.0, 2.0, 6.0), seed=4)


def write_csv_fixture(tmp_path, features_rows, edges_rows, labels_rows):
    """Write the three CSV files and return their paths."""
    fp = tmp_path / "features.csv"
    ep = tmp_path / "edges.csv"
    lp = tmp_path / "labels.csv"
    fp.write_text("\n".join(",".join(map(str, r)) for r in features_rows) + "\n")
    ep.write_text("\n".join(",".join(map(str, r)) for r in edges_rows) + "\n")
    lp.write_text("\n".join(",".join(map(str, r)) for r in labels_rows) + "\n")
    return fp, ep, lp
