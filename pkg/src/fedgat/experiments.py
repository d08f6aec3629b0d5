"""Config-driven experiment harness: folds, variants, tables, and reports.

"10-fold cross-validation" here means 10 independent stratified re-splits at
the configured ratio (rotation folds cannot honor a fixed 1:2:7 ratio). All
variants within a fold share the same partition, masks, and initial
parameters, so differences are attributable to the aggregation strategy.

Every RNG stream is a named substream of the master seed (see
:mod:`fedgat.seeding`), so enabling noise or attacks never perturbs splits.
"""

import copy
import csv
import hashlib
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import yaml

from . import __version__ as _package_version
from .errors import ConfigError, DivergenceError, FedgatError
from .federation import (
    AggregationPlan,
    ClientState,
    DynamicWeights,
    RoundLog,
    baseline_alone,
    baseline_full,
    run_federation,
)
from .gat import ModelParams, TrainConfig, init_params
from .graphs import (
    Graph,
    PartitionSpec,
    SyntheticSpec,
    align_features,
    align_labels,
    generate_synthetic,
    load_graph,
    make_splits,
    partition_disjoint,
    partition_overlapping,
    project_masks,
)
from .privacy import (
    DpConfig,
    ScenarioArtifact,
    apply_dp,
    attack_sweep,
    write_attack_csv,
)
from .seeding import rng_for

STATIC_VARIANTS = ("L1", "L2", "L3", "L12", "L13", "L23", "L123")
DEFAULT_EPSILONS = (0.5, 1.0, 2.0, 4.0, 8.0)


def parse_variant(name: str) -> dict:
    """Decode a variant name into its run recipe.

    ``alone`` and ``full`` are the baselines; ``L<digits>`` aggregates those
    layers with the static mean; a ``dyn_`` prefix switches to dynamic
    weighting.
    """
    if name in ("alone", "full"):
        return {"name": name, "kind": name}
    core, weighting = name, "static"
    if name.startswith("dyn_"):
        core, weighting = name[4:], "dynamic"
    if core.startswith("L") and core[1:] and all(ch in "123" for ch in core[1:]) \
            and len(set(core[1:])) == len(core[1:]):
        layers = tuple(sorted(int(ch) for ch in core[1:]))
        return {"name": name, "kind": "federated", "layers": layers,
                "weighting": weighting}
    raise ConfigError(f"unknown variant {name!r}")


@dataclass
class ExperimentConfig:
    seed: int = 0
    folds: int = 10
    out_dir: str = "runs/out"
    jobs: int = 1
    metric: str = "best_val"            # or "final"
    dataset: dict = field(default_factory=dict)
    partition: dict = field(default_factory=dict)
    split_ratio: tuple = (1.0, 2.0, 7.0)
    train: TrainConfig = field(default_factory=TrainConfig)
    aggregation: dict = field(default_factory=dict)
    variants: tuple = ("L123", "alone", "full")
    dp: dict = field(default_factory=dict)
    attack: dict = field(default_factory=dict)
    sweep_counts: tuple = ()
    repartition_per_fold: bool = False

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            doc = yaml.safe_load(fh) or {}
        return cls.from_dict(doc)

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        errors: list[str] = []
        known = {f for f in cls.__dataclass_fields__}
        for key in doc:
            if key not in known and key != "train":
                errors.append(f"unknown config key {key!r}")

        def get(key, default):
            return doc.get(key, default)

        seed = get("seed", 0)
        folds = get("folds", 10)
        jobs = get("jobs", 1)
        if not isinstance(seed, int):
            errors.append(f"seed must be an integer, got {seed!r}")
        if not isinstance(folds, int) or folds < 1:
            errors.append(f"folds must be a positive integer, got {folds!r}")
        if not isinstance(jobs, int) or jobs < 1:
            errors.append(f"jobs must be a positive integer, got {jobs!r}")
        metric = get("metric", "best_val")
        if metric not in ("best_val", "final"):
            errors.append(f"metric must be 'best_val' or 'final', got {metric!r}")

        dataset = get("dataset", {}) or {}
        kind = dataset.get("kind")
        if kind not in ("synthetic", "files", "client_files"):
            errors.append(f"dataset.kind must be synthetic|files|client_files, got {kind!r}")
        elif kind == "files":
            for key in ("features", "edges", "labels"):
                p = dataset.get(key)
                if not p:
                    errors.append(f"dataset.{key} is required for kind=files")
                elif not Path(p).exists():
                    errors.append(f"dataset.{key}: file not found: {p}")
        elif kind == "client_files":
            entries = dataset.get("clients")
            if not isinstance(entries, list) or not entries:
                errors.append("dataset.clients must be a nonempty list for kind=client_files")
            else:
                for i, ent in enumerate(entries):
                    for key in ("features", "edges", "labels"):
                        p = (ent or {}).get(key)
                        if not p:
                            errors.append(f"dataset.clients[{i}].{key} is required")
                        elif not Path(p).exists():
                            errors.append(f"dataset.clients[{i}].{key}: file not found: {p}")
        elif kind == "synthetic":
            try:
                _synthetic_spec_from(dataset, seed if isinstance(seed, int) else 0)
            except (ValueError, TypeError) as exc:
                errors.append(f"dataset (synthetic): {exc}")

        partition = get("partition", {}) or {}
        mode = partition.get("mode", "overlapping")
        n_clients = partition.get("n_clients", 2)
        if mode not in ("overlapping", "disjoint", "edge-type"):
            errors.append(f"partition.mode must be overlapping|disjoint|edge-type, got {mode!r}")
        if not isinstance(n_clients, int) or n_clients < 1:
            errors.append(f"partition.n_clients must be a positive integer, got {n_clients!r}")

        ratio = tuple(get("split_ratio", (1.0, 2.0, 7.0)))
        if len(ratio) != 3 or any(not isinstance(r, (int, float)) or r <= 0 for r in ratio):
            errors.append(f"split_ratio needs 3 positive numbers, got {ratio!r}")

        train_doc = get("train", {}) or {}
        try:
            train = TrainConfig(seed=seed if isinstance(seed, int) else 0, **train_doc)
        except (TypeError, ValueError) as exc:
            errors.append(f"train: {exc}")
            train = TrainConfig()

        aggregation = get("aggregation", {}) or {}
        freq = aggregation.get("frequency", 2)
        if not isinstance(freq, int) or freq < 1:
            errors.append(f"aggregation.frequency must be a positive integer, got {freq!r}")
        eta = aggregation.get("eta", 0.05)
        l_up = aggregation.get("l_up", 0.9)
        if not isinstance(eta, (int, float)) or eta < 0:
            errors.append(f"aggregation.eta must be >= 0, got {eta!r}")
        if not isinstance(l_up, (int, float)) or not 0 < l_up <= 1:
            errors.append(f"aggregation.l_up must lie in (0, 1], got {l_up!r}")

        variants = tuple(get("variants", ("L123", "alone", "full")))
        if not variants:
            errors.append("variants must be nonempty")
        for v in variants:
            try:
                parse_variant(v)
            except ConfigError as exc:
                errors.append(str(exc))
        if len(set(variants)) != len(variants):
            errors.append("variants contains duplicates")
        if "full" in variants and kind in ("client_files",):
            errors.append("variant 'full' needs a single global dataset (kind=files or synthetic)")
        if "full" in variants and mode == "edge-type":
            errors.append("variant 'full' is undefined for edge-type partitions")

        dp = get("dp", {}) or {}
        if dp.get("enabled"):
            try:
                DpConfig(epsilon=dp.get("epsilon", 1.0),
                         clip_bound=dp.get("clip_bound", 1.0))
            except ValueError as exc:
                errors.append(f"dp: {exc}")

        attack = get("attack", {}) or {}
        if attack.get("enabled"):
            for m in attack.get("modes", ("black-box", "white-box")):
                if m not in ("black-box", "white-box"):
                    errors.append(f"attack.modes: unknown mode {m!r}")
            eps_grid = attack.get("epsilons", list(DEFAULT_EPSILONS))
            if any(not isinstance(e, (int, float)) or e <= 0 for e in eps_grid):
                errors.append(f"attack.epsilons must be positive numbers, got {eps_grid!r}")
            n_seeds = attack.get("seeds", 5)
            if not isinstance(n_seeds, int) or n_seeds < 1:
                errors.append(f"attack.seeds must be a positive integer, got {n_seeds!r}")
            if isinstance(n_clients, int) and n_clients < 2:
                errors.append("attack needs at least 2 clients (a curious member)")

        sweep_counts = tuple(get("sweep_counts", ()))
        for c in sweep_counts:
            if not isinstance(c, int) or c < 2:
                errors.append(f"sweep_counts entries must be integers >= 2, got {c!r}")

        if errors:
            raise ConfigError("invalid configuration:\n  - " + "\n  - ".join(errors))

        return cls(
            seed=seed, folds=folds, out_dir=str(get("out_dir", "runs/out")),
            jobs=jobs, metric=metric, dataset=dataset,
            partition={"mode": mode, "n_clients": n_clients,
                       "overlap_fraction": partition.get("overlap_fraction", 0.2)},
            split_ratio=tuple(float(r) for r in ratio), train=train,
            aggregation={"frequency": freq, "eta": float(eta), "l_up": float(l_up)},
            variants=variants, dp=dp, attack=attack, sweep_counts=sweep_counts,
            repartition_per_fold=bool(get("repartition_per_fold", False)),
        )

    def echo(self) -> dict:
        doc = {
            "seed": self.seed, "folds": self.folds, "out_dir": self.out_dir,
            "jobs": self.jobs, "metric": self.metric, "dataset": self.dataset,
            "partition": self.partition,
            "split_ratio": list(self.split_ratio),
            "train": asdict(self.train), "aggregation": self.aggregation,
            "variants": list(self.variants), "dp": self.dp, "attack": self.attack,
            "sweep_counts": list(self.sweep_counts),
            "repartition_per_fold": self.repartition_per_fold,
        }
        return doc


def _synthetic_spec_from(dataset: dict, seed: int) -> SyntheticSpec:
    fields = ("n_nodes", "n_classes", "feature_dim", "intra_class_edge_prob",
              "inter_class_edge_prob", "edge_types", "type_densities",
              "feature_noise")
    kwargs = {k: dataset[k] for k in fields if k in dataset}
    if "type_densities" in kwargs and kwargs["type_densities"] is not None:
        kwargs["type_densities"] = tuple(kwargs["type_densities"])
    return SyntheticSpec(seed=dataset.get("seed", seed), **kwargs)


def input_fingerprint(config: ExperimentConfig) -> str:
    """Content hash of the experiment inputs (files or synthetic spec)."""
    h = hashlib.sha256()
    ds = config.dataset
    if ds.get("kind") == "synthetic":
        h.update(json.dumps(ds, sort_keys=True).encode())
    else:
        paths = []
        if ds.get("kind") == "files":
            paths = [ds["features"], ds["edges"], ds["labels"]]
        elif ds.get("kind") == "client_files":
            for ent in ds["clients"]:
                paths += [ent["features"], ent["edges"], ent["labels"]]
        for p in paths:
            h.update(Path(p).read_bytes())
    return h.hexdigest()


# --------------------------------------------------------------------------
# Dataset / partition assembly
# --------------------------------------------------------------------------

def load_dataset(config: ExperimentConfig):
    """Returns (global_graph_or_None, client_graphs_or_None)."""
    ds = config.dataset
    kind = ds["kind"]
    if kind == "files":
        return load_graph(ds["features"], ds["edges"], ds["labels"]), None
    if kind == "client_files":
        graphs = [load_graph(e["features"], e["edges"], e["labels"])
                  for e in ds["clients"]]
        graphs = align_features(align_labels(graphs))
        graphs = [g.with_name(f"client_{i}") for i, g in enumerate(graphs)]
        return None, graphs
    spec = _synthetic_spec_from(ds, config.seed)
    graphs = generate_synthetic(spec)
    if spec.edge_types == 1:
        return graphs[0], None
    return None, [g.with_name(f"client_{i}") for i, g in enumerate(graphs)]


def build_clients(config: ExperimentConfig, global_graph, client_graphs,
                  partition_seed: int):
    """Apply the configured partition mode; returns (global, clients)."""
    part = config.partition
    if client_graphs is not None:
        if len(client_graphs) != part["n_clients"]:
            raise ConfigError(
                f"{len(client_graphs)} client graphs for n_clients={part['n_clients']}"
            )
        return global_graph, client_graphs
    spec = PartitionSpec(
        n_clients=part["n_clients"], mode=part["mode"],
        overlap_fraction=(0.0 if part["mode"] == "disjoint"
                          else part.get("overlap_fraction", 0.2)),
        split_ratio=config.split_ratio, seed=partition_seed,
    )
    if part["mode"] == "overlapping":
        return global_graph, partition_overlapping(global_graph, spec)
    if part["mode"] == "disjoint":
        return global_graph, partition_disjoint(global_graph, spec)
    raise ConfigError("edge-type partitions need per-client graphs "
                      "(synthetic edge_types or client_files)")


# --------------------------------------------------------------------------
# One (variant, fold) job
# --------------------------------------------------------------------------

@dataclass
class CellRow:
    variant: str
    client: str
    fold: int
    run_id: str
    val_best: float
    test_at_best: float
    test_final: float


def _dp_transform(config: ExperimentConfig, fold: int, variant: str):
    dp_doc = config.dp
    if not dp_doc.get("enabled"):
        return None
    dp = DpConfig(epsilon=dp_doc.get("epsilon", 1.0),
                  clip_bound=dp_doc.get("clip_bound", 1.0))
    master = config.seed

    def transform(params, client_index, epoch):
        rng = rng_for(master, "dp", fold, variant, client_index, epoch)
        return apply_dp(params, (1, 2, 3), dp, rng=rng)

    return transform


def execute_run(variant: str, fold: int, clients_f: list, global_f,
                init: ModelParams, config: ExperimentConfig) -> tuple[list, RoundLog]:
    """Run one variant on one fold; returns (cell rows, round log)."""
    recipe = parse_variant(variant)
    cfg = config.train
    run_id = f"{variant}-fold{fold}"

    if recipe["kind"] == "full":
        res = baseline_full(global_f, _states(clients_f, init), cfg, init)
        log = res.log
        names = res.client_names
    else:
        states = _states(clients_f, init)
        if recipe["kind"] == "alone":
            fed = baseline_alone(states, cfg)
        else:
            plan = AggregationPlan(layers=recipe["layers"],
                                   frequency=config.aggregation["frequency"],
                                   weighting=recipe["weighting"])
            dyn = (DynamicWeights.uniform(len(states),
                                          eta=config.aggregation["eta"],
                                          l_up=config.aggregation["l_up"])
                   if recipe["weighting"] == "dynamic" else None)
            fed = run_federation(states, plan, cfg,
                                 upload_transform=_dp_transform(config, fold, variant),
                                 dynamic_weights=dyn)
        log = fed.log
        names = [s.client_id for s in states]

    cells = []
    for name in names:
        epochs, val, test = log.metric_series(name)
        best = int(np.argmax(val))     # ties break to the earliest epoch
        cells.append(CellRow(
            variant=variant, client=name, fold=fold, run_id=run_id,
            val_best=float(val[best]), test_at_best=float(test[best]),
            test_final=float(test[-1]),
        ))
    return cells, log


def _states(clients_f: list, init: ModelParams) -> list:
    return [ClientState(client_id=g.name or f"client_{i}", graph=g,
                        params=init)
            for i, g in enumerate(clients_f)]


def _job(payload):
    variant, fold, clients_f, global_f, init, config = payload
    try:
        cells, log = execute_run(variant, fold, clients_f, global_f, init, config)
        return {"ok": True, "variant": variant, "fold": fold,
                "cells": cells, "log": log}
    except FedgatError as exc:
        return {"ok": False, "variant": variant, "fold": fold,
                "error": f"{type(exc).__name__}: {exc}",
                "divergence": isinstance(exc, DivergenceError)}


# --------------------------------------------------------------------------
# The experiment driver
# --------------------------------------------------------------------------

@dataclass
class ExperimentResult:
    cells: list
    table: list                  # list of (variant, {client: "mean±std"})
    clients: list
    logs: dict                   # run_id -> RoundLog
    failures: list
    attack_rows: list
    manifest: dict

    @property
    def had_divergence(self) -> bool:
        return any(f.get("divergence") for f in self.failures)


def prepare_fold(config: ExperimentConfig, global_graph, client_graphs, fold: int):
    """Partition (optionally per fold), split masks, project to clients."""
    part_seed = (rng_for(config.seed, "partition", fold).integers(2 ** 31)
                 if config.repartition_per_fold
                 else rng_for(config.seed, "partition").integers(2 ** 31))
    g_global, clients = build_clients(config, global_graph, client_graphs,
                                      int(part_seed))
    split_seed = int(rng_for(config.seed, "fold-split", fold).integers(2 ** 31))
    if g_global is not None:
        g_global = make_splits(g_global, config.split_ratio, seed=split_seed)
        clients = [project_masks(g_global, c) for c in clients]
    else:
        # shared node universe (edge-type scenario): split once, mirror to all
        first = make_splits(clients[0], config.split_ratio, seed=split_seed)
        clients = [project_masks(first, c) for c in clients]
    return g_global, clients


def run_experiment(config: ExperimentConfig, write: bool = True) -> ExperimentResult:
    """Run every (variant, fold) job and assemble the result table."""
    t0 = time.time()
    global_graph, client_graphs = load_dataset(config)

    jobs = []
    for fold in range(config.folds):
        g_global, clients_f = prepare_fold(config, global_graph, client_graphs, fold)
        width = clients_f[0].num_features
        m = (g_global or clients_f[0]).num_classes
        init = init_params(width, m, config.train,
                           rng=rng_for(config.seed, "init", fold))
        for variant in config.variants:
            jobs.append((variant, fold, clients_f, g_global, init, config))

    if config.jobs > 1:
        with ProcessPoolExecutor(max_workers=config.jobs) as pool:
            outcomes = list(pool.map(_job, jobs))
    else:
        outcomes = [_job(p) for p in jobs]

    cells: list[CellRow] = []
    logs: dict[str, RoundLog] = {}
    failures = []
    for out in outcomes:
        if out["ok"]:
            cells.extend(out["cells"])
            logs[f"{out['variant']}-fold{out['fold']}"] = out["log"]
        else:
            failures.append({k: out[k] for k in ("variant", "fold", "error", "divergence")})

    client_names = sorted({c.client for c in cells})
    table = assemble_table(cells, config.variants, client_names, config.metric)

    attack_rows = []
    if config.attack.get("enabled"):
        attack_rows = run_attack_suite(config)

    manifest = {
        "package_version": _package_version,
        "config": config.echo(),
        "input_fingerprint": input_fingerprint(config),
        "metric": config.metric,
        "wall_time_s": round(time.time() - t0, 3),
        "failures": failures,
    }

    result = ExperimentResult(cells=cells, table=table, clients=client_names,
                              logs=logs, failures=failures,
                              attack_rows=attack_rows, manifest=manifest)
    if write:
        write_outputs(result, config)
    return result


def assemble_table(cells: list, variants, clients, metric: str) -> list:
    """Mean±std per (variant, client) over folds, in variant order."""
    table = []
    for variant in variants:
        row = {}
        for client in clients:
            vals = [c.test_at_best if metric == "best_val" else c.test_final
                    for c in cells if c.variant == variant and c.client == client]
            if vals:
                row[client] = f"{np.mean(vals):.4f}±{np.std(vals):.4f}"
        table.append((variant, row))
    return table


def write_outputs(result: ExperimentResult, config: ExperimentConfig) -> None:
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    with open(out / "result_table.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["variant", *result.clients])
        for variant, row in result.table:
            w.writerow([variant, *(row.get(c, "") for c in result.clients)])

    with open(out / "cells.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["variant", "client", "fold", "run_id",
                    "val_best", "test_at_best", "test_final"])
        for c in sorted(result.cells, key=lambda c: (c.variant, c.client, c.fold)):
            w.writerow([c.variant, c.client, c.fold, c.run_id,
                        repr(c.val_best), repr(c.test_at_best), repr(c.test_final)])

    with open(out / "rounds.jsonl", "w") as fh:
        for run_id in sorted(result.logs):
            for r in result.logs[run_id].records:
                doc = json.loads(r.to_json())
                doc["run_id"] = run_id
                fh.write(json.dumps(doc, sort_keys=True) + "\n")

    if result.attack_rows:
        write_attack_csv(result.attack_rows, out / "attacks.csv")

    with open(out / "manifest.json", "w") as fh:
        json.dump(result.manifest, fh, indent=2, sort_keys=True)


def read_cells_csv(path) -> list:
    cells = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            cells.append(CellRow(
                variant=row["variant"], client=row["client"],
                fold=int(row["fold"]), run_id=row["run_id"],
                val_best=float(row["val_best"]),
                test_at_best=float(row["test_at_best"]),
                test_final=float(row["test_final"]),
            ))
    return cells


# --------------------------------------------------------------------------
# Client-count sweep and edge-type comparison
# --------------------------------------------------------------------------

def mean_accuracy(cells: list, variant: str, metric: str = "best_val") -> float:
    vals = [c.test_at_best if metric == "best_val" else c.test_final
            for c in cells if c.variant == variant]
    return float(np.mean(vals))


def client_count_sweep(config: ExperimentConfig, counts=None) -> list:
    """Accuracy gaps (full - federated, full - alone) per client count."""
    counts = tuple(counts) if counts else config.sweep_counts
    if not counts:
        raise ConfigError("no client counts to sweep (set sweep_counts)")
    fed_variant = next((v for v in config.variants
                        if parse_variant(v)["kind"] == "federated"), "L123")
    rows = []
    for n in counts:
        sub = copy.deepcopy(config)
        sub.partition = dict(config.partition, n_clients=n)
        sub.variants = (fed_variant, "alone", "full")
        sub.attack = {}
        res = run_experiment(sub, write=False)
        full = mean_accuracy(res.cells, "full", config.metric)
        rows.append({
            "n_clients": n,
            "gap_fl": full - mean_accuracy(res.cells, fed_variant, config.metric),
            "gap_alone": full - mean_accuracy(res.cells, "alone", config.metric),
        })
    return rows


def write_sweep_csv(rows: list, path) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["n_clients", "gap_fl", "gap_alone"])
        for r in rows:
            w.writerow([r["n_clients"], repr(r["gap_fl"]), repr(r["gap_alone"])])


def edge_type_experiment(config: ExperimentConfig) -> list:
    """Alone vs static vs dynamic aggregation on per-type client graphs.

    Returns one row per client network with the three mean accuracies.
    """
    sub = copy.deepcopy(config)
    static = next((v for v in config.variants
                   if parse_variant(v)["kind"] == "federated"
                   and parse_variant(v)["weighting"] == "static"), "L123")
    dynamic = "dyn_" + static
    sub.variants = ("alone", static, dynamic)
    sub.attack = {}
    res = run_experiment(sub, write=False)
    rows = []
    for client in res.clients:
        row = {"network": client}
        for variant, key in (("alone", "alone"), (static, "static"), (dynamic, "dynamic")):
            vals = [c.test_at_best if config.metric == "best_val" else c.test_final
                    for c in res.cells if c.variant == variant and c.client == client]
            row[key] = float(np.mean(vals))
        rows.append(row)
    return rows


def write_edge_type_csv(rows: list, path) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["network", "alone", "static", "dynamic"])
        for r in rows:
            w.writerow([r["network"], repr(r["alone"]), repr(r["static"]),
                        repr(r["dynamic"])])


# --------------------------------------------------------------------------
# Attack suite
# --------------------------------------------------------------------------

def run_attack_suite(config: ExperimentConfig) -> list:
    """Train alone / federated / federated+noise scenarios and attack each.

    The target is client 0; the curious member reconstructing white-box views
    is client 1. One fold of training per attack seed, identical data across
    scenarios so differences come from the sharing strategy alone.
    """
    attack = config.attack
    n_seeds = attack.get("seeds", 5)
    eps_grid = tuple(attack.get("epsilons", DEFAULT_EPSILONS))
    modes = tuple(attack.get("modes", ("black-box", "white-box")))
    clip = attack.get("clip_bound", 1.0)
    shared = (1, 2, 3)

    global_graph, client_graphs = load_dataset(config)
    artifacts = []
    for s in range(n_seeds):
        sub_seed = int(rng_for(config.seed, "attack-seed", s).integers(2 ** 31))
        g_global, clients_f = prepare_fold(config, global_graph, client_graphs, 10_000 + s)
        width = clients_f[0].num_features
        m = (g_global or clients_f[0]).num_classes
        init = init_params(width, m, config.train,
                           rng=rng_for(config.seed, "attack-init", s))
        target_graph = clients_f[0]

        def fed_scenario(name, transform, epsilon=None):
            states = _states(clients_f, init)
            plan = AggregationPlan(layers=shared,
                                   frequency=config.aggregation["frequency"],
                                   weighting="static")
            fed = run_federation(states, plan, config.train,
                                 upload_transform=transform)
            uploads = fed.final_uploads
            _, val, test = fed.log.metric_series(states[0].client_id)
            artifacts.append(ScenarioArtifact(
                scenario=name, seed=sub_seed, target_client=states[0].client_id,
                graph=target_graph, served_params=states[0].params,
                upload_params=None if uploads is None else uploads[0],
                attacker_params=states[1].params if len(states) > 1 else None,
                shared_layers=shared, epsilon=epsilon,
                model_val_acc=val[-1], model_test_acc=test[-1],
            ))

        alone_states = _states(clients_f, init)
        alone = baseline_alone(alone_states, config.train)
        _, val, test = alone.log.metric_series(alone_states[0].client_id)
        artifacts.append(ScenarioArtifact(
            scenario="alone", seed=sub_seed, target_client=alone_states[0].client_id,
            graph=target_graph, served_params=alone_states[0].params,
            upload_params=None, attacker_params=None, shared_layers=shared,
            model_val_acc=val[-1], model_test_acc=test[-1],
        ))

        fed_scenario("federated", None)
        for eps in eps_grid:
            dp = DpConfig(epsilon=eps, clip_bound=clip)

            def transform(params, client_index, epoch, _dp=dp, _s=s):
                rng = rng_for(config.seed, "attack-dp", _s, _dp.epsilon,
                              client_index, epoch)
                return apply_dp(params, shared, _dp, rng=rng)

            fed_scenario("federated+dp", transform, epsilon=eps)

    return attack_sweep(artifacts, modes=modes, seed=config.seed)
