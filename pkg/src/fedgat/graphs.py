"""Graph data model, CSV ingestion, federation partitioners, and synthetic data.

A :class:`Graph` is an immutable snapshot of one client's view (or the global
dataset): float64 node features, dense integer labels, canonical undirected
edges in local indices, and disjoint train/val/test masks. Node identity
across clients is carried by ``node_ids``.
"""

import csv
import json
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import (
    FeatureConflictError,
    FormatError,
    InfeasiblePartitionError,
    ReferentialIntegrityError,
)
from .seeding import rng_for


def canonical_edges(edges, num_nodes: int) -> np.ndarray:
    """Sort endpoints, drop self-loops and duplicates; result is (e, 2) int64."""
    e = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    if e.size:
        if e.min() < 0 or e.max() >= num_nodes:
            raise ReferentialIntegrityError(
                f"edge endpoint outside [0, {num_nodes})"
            )
        lo = np.minimum(e[:, 0], e[:, 1])
        hi = np.maximum(e[:, 0], e[:, 1])
        keep = lo != hi
        e = np.unique(np.stack([lo[keep], hi[keep]], axis=1), axis=0)
    return e.reshape(-1, 2)


@dataclass(frozen=True)
class Graph:
    """One client's (or the global) node-classification dataset."""

    node_ids: np.ndarray          # (k,) global identifiers
    features: np.ndarray          # (k, n) float64
    labels: np.ndarray            # (k,) dense class indices
    edges: np.ndarray             # (e, 2) canonical undirected, local indices
    num_classes: int
    feature_names: tuple = ()
    label_names: tuple = ()       # token per class index; aligns clients' vocabularies
    train_mask: np.ndarray = None
    val_mask: np.ndarray = None
    test_mask: np.ndarray = None
    name: str = ""

    def __post_init__(self):
        k = self.features.shape[0]
        object.__setattr__(self, "node_ids", np.asarray(self.node_ids, dtype=np.int64))
        object.__setattr__(self, "features", np.asarray(self.features, dtype=np.float64))
        object.__setattr__(self, "labels", np.asarray(self.labels, dtype=np.int64))
        object.__setattr__(self, "edges", np.asarray(self.edges, dtype=np.int64).reshape(-1, 2))
        if not self.feature_names:
            object.__setattr__(
                self, "feature_names",
                tuple(f"feat_{j}" for j in range(self.features.shape[1])),
            )
        else:
            object.__setattr__(self, "feature_names", tuple(self.feature_names))
        if not self.label_names:
            object.__setattr__(
                self, "label_names", tuple(str(c) for c in range(self.num_classes)),
            )
        else:
            object.__setattr__(self, "label_names", tuple(self.label_names))
        for attr in ("train_mask", "val_mask", "test_mask"):
            m = getattr(self, attr)
            m = np.zeros(k, dtype=bool) if m is None else np.asarray(m, dtype=bool)
            object.__setattr__(self, attr, m)
        self.validate()

    def validate(self):
        k, n = self.features.shape
        if self.node_ids.shape != (k,):
            raise FormatError(f"node_ids length {self.node_ids.shape} != {k} nodes")
        if len(np.unique(self.node_ids)) != k:
            raise FormatError("duplicate node ids")
        if len(self.feature_names) != n:
            raise FormatError(f"{len(self.feature_names)} feature names for {n} columns")
        if len(self.label_names) != self.num_classes:
            raise FormatError(
                f"{len(self.label_names)} label names for {self.num_classes} classes"
            )
        if self.labels.shape != (k,):
            raise FormatError("labels length does not match node count")
        if k and (self.labels.min() < 0 or self.labels.max() >= self.num_classes):
            raise FormatError(
                f"labels outside [0, {self.num_classes}):"
                f" min={self.labels.min()} max={self.labels.max()}"
            )
        if self.edges.size:
            if self.edges.min() < 0 or self.edges.max() >= k:
                raise ReferentialIntegrityError("edge endpoint is not a present node")
            if (self.edges[:, 0] >= self.edges[:, 1]).any():
                raise FormatError("edges are not canonical (need src < dst, no self-loops)")
            if len(np.unique(self.edges, axis=0)) != len(self.edges):
                raise FormatError("duplicate edges after canonicalization")
        for m in (self.train_mask, self.val_mask, self.test_mask):
            if m.shape != (k,):
                raise FormatError("mask length does not match node count")
        overlap = (
            (self.train_mask & self.val_mask)
            | (self.train_mask & self.test_mask)
            | (self.val_mask & self.test_mask)
        )
        if overlap.any():
            raise FormatError("train/val/test masks are not pairwise disjoint")

    @property
    def num_nodes(self) -> int:
        return self.features.shape[0]

    @property
    def num_features(self) -> int:
        return self.features.shape[1]

    @property
    def num_edges(self) -> int:
        return self.edges.shape[0]

    def with_masks(self, train, val, test) -> "Graph":
        return replace(self, train_mask=np.asarray(train, dtype=bool),
                       val_mask=np.asarray(val, dtype=bool),
                       test_mask=np.asarray(test, dtype=bool))

    def with_name(self, name: str) -> "Graph":
        return replace(self, name=name)

    def adjacency(self, self_loops: bool = True) -> np.ndarray:
        """Dense boolean adjacency, optionally with the diagonal set."""
        k = self.num_nodes
        a = np.zeros((k, k), dtype=bool)
        if self.edges.size:
            a[self.edges[:, 0], self.edges[:, 1]] = True
            a[self.edges[:, 1], self.edges[:, 0]] = True
        if self_loops:
            np.fill_diagonal(a, True)
        return a

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.num_classes)


def directed_pairs(g: Graph, self_loops: bool = True):
    """Directed (dst, src) neighbor pairs sorted by dst, plus segment starts.

    Returns ``(dst, src, starts)`` where pairs ``starts[i]:starts[i+1]`` are
    exactly the in-neighborhood of node i. With ``self_loops`` every node has
    at least one pair, which the attention softmax relies on.
    """
    k = g.num_nodes
    parts_dst = [g.edges[:, 0], g.edges[:, 1]]
    parts_src = [g.edges[:, 1], g.edges[:, 0]]
    if self_loops:
        loop = np.arange(k, dtype=np.int64)
        parts_dst.append(loop)
        parts_src.append(loop)
    dst = np.concatenate(parts_dst) if parts_dst else np.zeros(0, dtype=np.int64)
    src = np.concatenate(parts_src) if parts_src else np.zeros(0, dtype=np.int64)
    order = np.argsort(dst, kind="stable")
    dst, src = dst[order], src[order]
    counts = np.bincount(dst, minlength=k)
    starts = np.zeros(k + 1, dtype=np.int64)
    np.cumsum(counts, out=starts[1:])
    return dst, src, starts


@dataclass(frozen=True)
class PartitionSpec:
    """How to split one global graph across N simulated clients."""

    n_clients: int
    mode: str = "overlapping"          # overlapping | disjoint | edge-type
    overlap_fraction: float = 0.2
    split_ratio: tuple = (1.0, 2.0, 7.0)
    seed: int = 0

    def __post_init__(self):
        if self.n_clients < 1:
            raise InfeasiblePartitionError(f"n_clients must be >= 1, got {self.n_clients}")
        if self.mode not in ("overlapping", "disjoint", "edge-type"):
            raise InfeasiblePartitionError(f"unknown partition mode {self.mode!r}")
        if not 0.0 <= self.overlap_fraction <= 1.0:
            raise InfeasiblePartitionError(
                f"overlap_fraction must lie in [0, 1], got {self.overlap_fraction}"
            )
        if self.mode == "disjoint" and self.overlap_fraction != 0.0:
            raise InfeasiblePartitionError("disjoint mode forces overlap_fraction = 0")
        ratio = tuple(float(r) for r in self.split_ratio)
        if len(ratio) != 3 or any(r <= 0 for r in ratio):
            raise InfeasiblePartitionError(f"split_ratio needs 3 positive entries, got {ratio}")
        total = sum(ratio)
        object.__setattr__(self, "split_ratio", tuple(r / total for r in ratio))


@dataclass(frozen=True)
class SyntheticSpec:
    """Planted-partition generator with class-dependent features.

    Nodes get balanced labels; features are a per-class mean plus Gaussian
    noise scaled by ``feature_noise``. Each edge type draws its own edge set
    with probabilities scaled by ``type_densities``.
    """

    n_nodes: int
    n_classes: int
    feature_dim: int
    intra_class_edge_prob: float
    inter_class_edge_prob: float
    edge_types: int = 1
    type_densities: tuple = None
    feature_noise: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.n_nodes < 1 or self.n_classes < 2 or self.feature_dim < 1:
            raise ValueError("need n_nodes >= 1, n_classes >= 2, feature_dim >= 1")
        if not 0.0 <= self.inter_class_edge_prob <= self.intra_class_edge_prob <= 1.0:
            raise ValueError(
                "need 0 <= inter_class_edge_prob <= intra_class_edge_prob <= 1 "
                f"(homophily), got intra={self.intra_class_edge_prob} "
                f"inter={self.inter_class_edge_prob}"
            )
        if self.edge_types < 1:
            raise ValueError("edge_types must be >= 1")
        dens = self.type_densities
        dens = tuple(1.0 for _ in range(self.edge_types)) if dens is None else tuple(float(d) for d in dens)
        if len(dens) != self.edge_types:
            raise ValueError(f"{len(dens)} type_densities for {self.edge_types} edge types")
        if any(d <= 0 for d in dens):
            raise ValueError("type_densities must be positive")
        if max(dens) * self.intra_class_edge_prob > 1.0:
            raise ValueError("scaled intra-class edge probability exceeds 1")
        object.__setattr__(self, "type_densities", dens)


# --------------------------------------------------------------------------
# CSV ingestion
# --------------------------------------------------------------------------

def _read_rows(path) -> list[list[str]]:
    path = Path(path)
    if not path.exists():
        raise FormatError(f"file not found: {path}")
    with open(path, newline="") as fh:
        rows = [row for row in csv.reader(fh) if row]
    if not rows:
        raise FormatError(f"{path} is empty (header row required)")
    return rows


def _parse_id(token: str, path, line: int) -> int:
    try:
        return int(token)
    except ValueError:
        raise FormatError(f"{path}:{line}: node id {token!r} is not an integer") from None


def load_graph(features_path, edges_path, labels_path) -> Graph:
    """Read the three-file CSV layout into a Graph.

    ``features.csv``: header ``node_id,<name>,...``; one float per column.
    ``edges.csv``: header ``src_id,dst_id``; undirected, duplicates tolerated.
    ``labels.csv``: header ``node_id,label``; string or integer labels are
    mapped to dense indices in first-seen order.
    """
    rows = _read_rows(features_path)
    header = rows[0]
    if len(header) < 1 or header[0] != "node_id":
        raise FormatError(f"{features_path}: first header column must be 'node_id'")
    feature_names = tuple(header[1:])
    width = len(header)
    ids, feats = [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != width:
            raise FormatError(
                f"{features_path}:{lineno}: expected {width} columns, got {len(row)}"
            )
        ids.append(_parse_id(row[0], features_path, lineno))
        try:
            feats.append([float(v) for v in row[1:]])
        except ValueError:
            raise FormatError(f"{features_path}:{lineno}: non-numeric feature value") from None
    node_ids = np.asarray(ids, dtype=np.int64)
    if len(np.unique(node_ids)) != len(node_ids):
        raise FormatError(f"{features_path}: duplicate node ids")
    features = np.asarray(feats, dtype=np.float64).reshape(len(ids), len(feature_names))
    index = {nid: i for i, nid in enumerate(ids)}

    rows = _read_rows(labels_path)
    if rows[0][:2] != ["node_id", "label"]:
        raise FormatError(f"{labels_path}: header must be 'node_id,label'")
    label_of = {}
    class_index: dict[str, int] = {}
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != 2:
            raise FormatError(f"{labels_path}:{lineno}: expected 2 columns")
        nid = _parse_id(row[0], labels_path, lineno)
        if nid not in index:
            raise ReferentialIntegrityError(
                f"{labels_path}:{lineno}: label for unknown node {nid}"
            )
        raw = row[1]
        if raw not in class_index:
            class_index[raw] = len(class_index)
        label_of[nid] = class_index[raw]
    missing = [nid for nid in ids if nid not in label_of]
    if missing:
        raise ReferentialIntegrityError(
            f"{labels_path}: nodes without a label (first few): {missing[:5]}"
        )
    labels = np.asarray([label_of[nid] for nid in ids], dtype=np.int64)

    rows = _read_rows(edges_path)
    if rows[0][:2] != ["src_id", "dst_id"]:
        raise FormatError(f"{edges_path}: header must be 'src_id,dst_id'")
    pairs = []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != 2:
            raise FormatError(f"{edges_path}:{lineno}: expected 2 columns")
        a = _parse_id(row[0], edges_path, lineno)
        b = _parse_id(row[1], edges_path, lineno)
        for endpoint in (a, b):
            if endpoint not in index:
                raise ReferentialIntegrityError(
                    f"{edges_path}:{lineno}: edge endpoint {endpoint} is not a known node"
                )
        pairs.append((index[a], index[b]))
    edges = canonical_edges(np.asarray(pairs, dtype=np.int64).reshape(-1, 2), len(ids))

    return Graph(node_ids=node_ids, features=features, labels=labels, edges=edges,
                 num_classes=len(class_index), feature_names=feature_names,
                 label_names=tuple(class_index))


def write_graph(g: Graph, out_dir) -> None:
    """Write features/edges/labels CSVs for ``g`` (global ids preserved)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "features.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["node_id", *g.feature_names])
        for i in range(g.num_nodes):
            w.writerow([int(g.node_ids[i]), *(repr(float(v)) for v in g.features[i])])
    with open(out / "edges.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["src_id", "dst_id"])
        for a, b in g.edges:
            w.writerow([int(g.node_ids[a]), int(g.node_ids[b])])
    with open(out / "labels.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["node_id", "label"])
        for i in range(g.num_nodes):
            w.writerow([int(g.node_ids[i]), g.label_names[g.labels[i]]])


def write_partition(clients: list[Graph], out_dir, spec: PartitionSpec) -> None:
    """One directory per client (three CSVs plus a meta.json echo)."""
    out = Path(out_dir)
    for u, g in enumerate(clients):
        client_dir = out / f"client_{u}"
        write_graph(g, client_dir)
        meta = {
            "client": u,
            "nodes": g.num_nodes,
            "edges": g.num_edges,
            "classes": g.num_classes,
            "seed": spec.seed,
            "spec": {
                "n_clients": spec.n_clients,
                "mode": spec.mode,
                "overlap_fraction": spec.overlap_fraction,
                "split_ratio": list(spec.split_ratio),
            },
        }
        with open(client_dir / "meta.json", "w") as fh:
            json.dump(meta, fh, indent=2, sort_keys=True)


def load_client_dir(client_dir) -> Graph:
    d = Path(client_dir)
    return load_graph(d / "features.csv", d / "edges.csv", d / "labels.csv")


# --------------------------------------------------------------------------
# Feature and label alignment across clients
# --------------------------------------------------------------------------

def align_labels(graphs: list[Graph]) -> list[Graph]:
    """Remap every graph onto the union label vocabulary.

    Each file maps its label tokens to dense indices in first-seen order, so
    independently loaded clients can disagree on which index a token means;
    this restores one shared vocabulary (first-seen across the input list).
    """
    union: list[str] = []
    seen = set()
    for g in graphs:
        for token in g.label_names:
            if token not in seen:
                seen.add(token)
                union.append(token)
    vocab = {token: c for c, token in enumerate(union)}
    out = []
    for g in graphs:
        remap = np.asarray([vocab[t] for t in g.label_names], dtype=np.int64)
        out.append(replace(g, labels=remap[g.labels], num_classes=len(union),
                           label_names=tuple(union)))
    return out


def align_features(graphs: list[Graph]) -> list[Graph]:
    """Bring every graph onto the union feature-column set, zero-filling gaps.

    Columns keep first-seen order across the input list; shared (node, column)
    cells must agree or a FeatureConflictError lists the offenders.
    """
    union: list[str] = []
    seen = set()
    for g in graphs:
        for name in g.feature_names:
            if name not in seen:
                seen.add(name)
                union.append(name)

    for i in range(len(graphs)):
        for j in range(i + 1, len(graphs)):
            a, b = graphs[i], graphs[j]
            shared_cols = [c for c in a.feature_names if c in set(b.feature_names)]
            if not shared_cols:
                continue
            ids_a = {nid: r for r, nid in enumerate(a.node_ids.tolist())}
            offenders = []
            col_a = {c: k for k, c in enumerate(a.feature_names)}
            col_b = {c: k for k, c in enumerate(b.feature_names)}
            for r_b, nid in enumerate(b.node_ids.tolist()):
                r_a = ids_a.get(nid)
                if r_a is None:
                    continue
                for c in shared_cols:
                    va, vb = a.features[r_a, col_a[c]], b.features[r_b, col_b[c]]
                    if va != vb:
                        offenders.append((nid, c, float(va), float(vb)))
            if offenders:
                raise FeatureConflictError(
                    f"graphs {i} and {j} disagree on {len(offenders)} (node, column) "
                    f"cells; first few: {offenders[:5]}"
                )

    out = []
    for g in graphs:
        if tuple(g.feature_names) == tuple(union):
            out.append(g)
            continue
        aligned = np.zeros((g.num_nodes, len(union)))
        col = {c: k for k, c in enumerate(g.feature_names)}
        for k, c in enumerate(union):
            if c in col:
                aligned[:, k] = g.features[:, col[c]]
        out.append(replace(g, features=aligned, feature_names=tuple(union)))
    return out


# --------------------------------------------------------------------------
# Partitioners
# --------------------------------------------------------------------------

def induced_subgraph(g: Graph, nodes, name: str = "") -> Graph:
    """Subgraph on the given local indices; keeps edges with both endpoints."""
    nodes = np.sort(np.asarray(nodes, dtype=np.int64))
    remap = -np.ones(g.num_nodes, dtype=np.int64)
    remap[nodes] = np.arange(len(nodes))
    if g.edges.size:
        keep = (remap[g.edges[:, 0]] >= 0) & (remap[g.edges[:, 1]] >= 0)
        edges = remap[g.edges[keep]]
    else:
        edges = np.zeros((0, 2), dtype=np.int64)
    return Graph(
        node_ids=g.node_ids[nodes],
        features=g.features[nodes],
        labels=g.labels[nodes],
        edges=canonical_edges(edges, len(nodes)),
        num_classes=g.num_classes,
        feature_names=g.feature_names,
        label_names=g.label_names,
        train_mask=g.train_mask[nodes],
        val_mask=g.val_mask[nodes],
        test_mask=g.test_mask[nodes],
        name=name or g.name,
    )


def _indices_by_class(labels: np.ndarray, num_classes: int) -> list[np.ndarray]:
    return [np.flatnonzero(labels == c) for c in range(num_classes)]


def _largest_remainder(total: int, fractions) -> np.ndarray:
    """Integer allocation of ``total`` proportional to ``fractions``."""
    fractions = np.asarray(fractions, dtype=np.float64)
    exact = fractions / fractions.sum() * total
    counts = np.floor(exact).astype(np.int64)
    short = total - counts.sum()
    order = np.argsort(-(exact - counts), kind="stable")
    counts[order[:short]] += 1
    return counts


def _stratified_parts(by_class: list[np.ndarray], n_parts: int,
                      rng: np.random.Generator) -> list[np.ndarray]:
    """Split class index pools into n near-equal parts, balanced per class."""
    parts: list[list[np.ndarray]] = [[] for _ in range(n_parts)]
    for pool in by_class:
        pool = rng.permutation(pool)
        counts = _largest_remainder(len(pool), np.ones(n_parts))
        # rotate which part gets the odd node so no client is systematically larger
        counts = np.roll(counts, rng.integers(n_parts))
        stops = np.cumsum(counts)
        prev = 0
        for p, stop in enumerate(stops):
            parts[p].append(pool[prev:stop])
            prev = stop
    return [np.sort(np.concatenate(chunks)) for chunks in parts]


def _stratified_sample(by_class: list[np.ndarray], count: int,
                       rng: np.random.Generator) -> np.ndarray:
    sizes = np.asarray([len(p) for p in by_class], dtype=np.float64)
    take = _largest_remainder(count, np.maximum(sizes, 1e-12))
    take = np.minimum(take, sizes.astype(np.int64))
    picked = [rng.choice(pool, size=int(t), replace=False)
              for pool, t in zip(by_class, take) if t > 0]
    return np.sort(np.concatenate(picked)) if picked else np.zeros(0, dtype=np.int64)


def partition_overlapping(g: Graph, spec: PartitionSpec) -> list[Graph]:
    """N client graphs of near-equal size with a shared stratified core.

    A common core of ``overlap_fraction * |V| / N`` nodes is given to every
    client; the remaining nodes are stratified-partitioned into exclusive
    remainders. Client edges are those induced by the client's node set.
    """
    if spec.mode != "overlapping":
        raise InfeasiblePartitionError(f"spec mode is {spec.mode!r}, not 'overlapping'")
    if spec.n_clients > 1 and spec.overlap_fraction <= 0.0:
        raise InfeasiblePartitionError("overlapping mode needs overlap_fraction > 0")
    n = spec.n_clients
    if n > g.num_nodes:
        raise InfeasiblePartitionError(f"{n} clients for {g.num_nodes} nodes")
    if n == 1:
        return [g.with_name("client_0")]
    rng = rng_for(spec.seed, "partition", "overlapping")
    by_class = _indices_by_class(g.labels, g.num_classes)
    core_size = int(round(spec.overlap_fraction * g.num_nodes / n))
    core = _stratified_sample(by_class, core_size, rng)
    in_core = np.zeros(g.num_nodes, dtype=bool)
    in_core[core] = True
    rest_by_class = [pool[~in_core[pool]] for pool in by_class]
    exclusive = _stratified_parts(rest_by_class, n, rng)
    return [
        induced_subgraph(g, np.union1d(core, exclusive[u]), name=f"client_{u}")
        for u in range(n)
    ]


def partition_disjoint(g: Graph, spec: PartitionSpec) -> list[Graph]:
    """Exact stratified partition of the node set; cross-client edges drop."""
    if spec.mode != "disjoint":
        raise InfeasiblePartitionError(f"spec mode is {spec.mode!r}, not 'disjoint'")
    n = spec.n_clients
    if n > g.num_nodes:
        raise InfeasiblePartitionError(f"{n} clients for {g.num_nodes} nodes")
    rng = rng_for(spec.seed, "partition", "disjoint")
    parts = _stratified_parts(_indices_by_class(g.labels, g.num_classes), n, rng)
    return [induced_subgraph(g, part, name=f"client_{u}") for u, part in enumerate(parts)]


def generate_synthetic(spec: SyntheticSpec) -> list[Graph]:
    """One graph per edge type over a shared node/feature/label set."""
    rng = rng_for(spec.seed, "synthetic")
    n, m, d = spec.n_nodes, spec.n_classes, spec.feature_dim
    labels = rng.permutation(np.arange(n, dtype=np.int64) % m)
    # class separation is O(1) along the discriminant regardless of d, so
    # feature_noise alone controls task difficulty
    means = rng.normal(size=(m, d)) / np.sqrt(d)
    features = means[labels] + spec.feature_noise * rng.normal(size=(n, d))
    by_class = _indices_by_class(labels, m)

    graphs = []
    node_ids = np.arange(n, dtype=np.int64)
    for t in range(spec.edge_types):
        p_intra = spec.intra_class_edge_prob * spec.type_densities[t]
        p_inter = spec.inter_class_edge_prob * spec.type_densities[t]
        chunks = []
        for a in range(m):
            pa = by_class[a]
            iu, ju = np.triu_indices(len(pa), k=1)
            keep = rng.random(len(iu)) < p_intra
            if keep.any():
                chunks.append(np.stack([pa[iu[keep]], pa[ju[keep]]], axis=1))
            for b in range(a + 1, m):
                pb = by_class[b]
                hit = rng.random((len(pa), len(pb))) < p_inter
                ii, jj = np.nonzero(hit)
                if len(ii):
                    chunks.append(np.stack([pa[ii], pb[jj]], axis=1))
        edges = np.concatenate(chunks) if chunks else np.zeros((0, 2), dtype=np.int64)
        graphs.append(Graph(
            node_ids=node_ids, features=features, labels=labels,
            edges=canonical_edges(edges, n), num_classes=m,
            name=f"type_{t}",
        ))
    return graphs


# --------------------------------------------------------------------------
# Splits
# --------------------------------------------------------------------------

def make_splits(g: Graph, ratio=(1.0, 2.0, 7.0), seed: int = 0) -> Graph:
    """Stratified random train/val/test masks at the given ratio.

    Deterministic under ``seed``. Every class present in the graph gets at
    least one training node; classes absent from the graph raise a warning
    (the training set then cannot include all labels).
    """
    ratio = np.asarray(ratio, dtype=np.float64)
    if ratio.shape != (3,) or (ratio <= 0).any():
        raise ValueError(f"ratio needs 3 positive entries, got {ratio}")
    rng = rng_for(seed, "splits")
    k = g.num_nodes
    train = np.zeros(k, dtype=bool)
    val = np.zeros(k, dtype=bool)
    test = np.zeros(k, dtype=bool)
    absent = []
    for c, pool in enumerate(_indices_by_class(g.labels, g.num_classes)):
        if len(pool) == 0:
            absent.append(c)
            continue
        pool = rng.permutation(pool)
        counts = _largest_remainder(len(pool), ratio)
        if counts[0] == 0:
            counts[int(np.argmax(counts[1:])) + 1] -= 1
            counts[0] = 1
        a, b = counts[0], counts[0] + counts[1]
        train[pool[:a]] = True
        val[pool[a:b]] = True
        test[pool[b:]] = True
    if absent:
        warnings.warn(
            f"graph {g.name or '<unnamed>'} has no nodes for classes {absent}; "
            "the training set cannot include all labels", stacklevel=2,
        )
    return g.with_masks(train, val, test)


def project_masks(source: Graph, target: Graph) -> Graph:
    """Copy the role (train/val/test) of each shared node id onto ``target``."""
    role = {}
    for mask, tag in ((source.train_mask, 0), (source.val_mask, 1), (source.test_mask, 2)):
        for i in np.flatnonzero(mask):
            role[int(source.node_ids[i])] = tag
    k = target.num_nodes
    train = np.zeros(k, dtype=bool)
    val = np.zeros(k, dtype=bool)
    test = np.zeros(k, dtype=bool)
    for r, nid in enumerate(target.node_ids.tolist()):
        tag = role.get(nid)
        if tag == 0:
            train[r] = True
        elif tag == 1:
            val[r] = True
        elif tag == 2:
            test[r] = True
    return target.with_masks(train, val, test)
