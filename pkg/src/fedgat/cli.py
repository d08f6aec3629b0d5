"""Command-line front end for the experiment harness.

Verbs: partition | train | federate | attack | sweep | report.
Exit codes: 0 success, 2 config error, 3 runtime divergence,
4 partial failure (some variants failed).
"""

import argparse
import json
import sys
from pathlib import Path

from .errors import ConfigError, DivergenceError, FedgatError
from .experiments import (
    ExperimentConfig,
    assemble_table,
    client_count_sweep,
    edge_type_experiment,
    read_cells_csv,
    run_experiment,
    run_attack_suite,
    write_edge_type_csv,
    write_sweep_csv,
)
from .federation import baseline_alone
from .gat import evaluate, init_params, save_params
from .graphs import PartitionSpec, write_partition
from .privacy import write_attack_csv
from .seeding import rng_for

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DIVERGENCE = 3
EXIT_PARTIAL = 4


def _load_config(args) -> ExperimentConfig:
    config = ExperimentConfig.from_file(args.config)
    if args.seed is not None:
        config.seed = args.seed
        config.train = type(config.train)(**{**config.train.__dict__, "seed": args.seed})
    if args.out is not None:
        config.out_dir = args.out
    if args.jobs is not None:
        config.jobs = args.jobs
    if getattr(args, "variant", None):
        config.variants = tuple(v for part in args.variant for v in part.split(","))
    return config


def cmd_partition(args) -> int:
    config = _load_config(args)
    from .experiments import build_clients, load_dataset
    global_graph, client_graphs = load_dataset(config)
    part_seed = int(rng_for(config.seed, "partition").integers(2 ** 31))
    _, clients = build_clients(config, global_graph, client_graphs, part_seed)
    spec = PartitionSpec(
        n_clients=config.partition["n_clients"], mode=config.partition["mode"],
        overlap_fraction=(0.0 if config.partition["mode"] == "disjoint"
                          else config.partition.get("overlap_fraction", 0.2)),
        split_ratio=config.split_ratio, seed=part_seed,
    )
    write_partition(clients, config.out_dir, spec)
    for u, g in enumerate(clients):
        print(f"client_{u}: {g.num_nodes} nodes, {g.num_edges} edges, "
              f"{g.num_classes} classes")
    return EXIT_OK


def cmd_train(args) -> int:
    """Train each client alone and write metrics plus checkpoints."""
    config = _load_config(args)
    from .experiments import prepare_fold, load_dataset, _states
    global_graph, client_graphs = load_dataset(config)
    g_global, clients = prepare_fold(config, global_graph, client_graphs, 0)
    width = clients[0].num_features
    m = (g_global or clients[0]).num_classes
    init = init_params(width, m, config.train, rng=rng_for(config.seed, "init", 0))
    states = _states(clients, init)
    result = baseline_alone(states, config.train)
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    result.log.write_jsonl(out / "rounds.jsonl")
    metrics = {}
    for state in states:
        save_params(state.params, out / f"{state.client_id}.params.json")
        metrics[state.client_id] = evaluate(state.params, state.graph,
                                            state.graph.test_mask)
    with open(out / "metrics.json", "w") as fh:
        json.dump(metrics, fh, indent=2, sort_keys=True)
    for name, acc in metrics.items():
        print(f"{name}: test accuracy {acc:.4f}")
    return EXIT_OK


def cmd_federate(args) -> int:
    config = _load_config(args)
    result = run_experiment(config)
    for variant, row in result.table:
        cells = "  ".join(f"{c}={row.get(c, '-')}" for c in result.clients)
        print(f"{variant:>10}  {cells}")
    print(f"outputs written to {config.out_dir}")
    if result.failures:
        for f in result.failures:
            print(f"FAILED {f['variant']} fold {f['fold']}: {f['error']}",
                  file=sys.stderr)
        return EXIT_DIVERGENCE if result.had_divergence else EXIT_PARTIAL
    return EXIT_OK


def cmd_attack(args) -> int:
    config = _load_config(args)
    rows = run_attack_suite(config)
    out = Path(config.out_dir)
    write_attack_csv(rows, out / "attacks.csv")
    by_key = {}
    for r in rows:
        key = (r.scenario, r.mode, r.epsilon)
        by_key.setdefault(key, []).append(r.i_adv)
    for (scenario, mode, eps), advs in sorted(by_key.items(),
                                              key=lambda kv: (kv[0][0], kv[0][1], kv[0][2] or 0)):
        tag = f" eps={eps}" if eps is not None else ""
        print(f"{scenario:>14}{tag:>9} {mode:>10}: mean I_adv "
              f"{sum(advs) / len(advs):+.4f} over {len(advs)} seeds")
    print(f"attack table written to {out / 'attacks.csv'}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    config = _load_config(args)
    counts = tuple(int(c) for c in args.counts.split(",")) if args.counts else None
    rows = client_count_sweep(config, counts)
    out = Path(config.out_dir)
    write_sweep_csv(rows, out / "client_count_sweep.csv")
    for r in rows:
        print(f"n={r['n_clients']}: gap_fl={r['gap_fl']:+.4f} "
              f"gap_alone={r['gap_alone']:+.4f}")
    return EXIT_OK


def cmd_report(args) -> int:
    """Rebuild the result table from a run directory's cells.csv."""
    config = _load_config(args)
    cells_path = Path(config.out_dir) / "cells.csv"
    if not cells_path.exists():
        print(f"no cells.csv under {config.out_dir}", file=sys.stderr)
        return EXIT_CONFIG
    cells = read_cells_csv(cells_path)
    clients = sorted({c.client for c in cells})
    table = assemble_table(cells, config.variants, clients, config.metric)
    print("variant," + ",".join(clients))
    for variant, row in table:
        print(variant + "," + ",".join(row.get(c, "") for c in clients))
    return EXIT_OK


def cmd_edge_types(args) -> int:
    config = _load_config(args)
    rows = edge_type_experiment(config)
    out = Path(config.out_dir)
    write_edge_type_csv(rows, out / "edge_type_comparison.csv")
    for r in rows:
        print(f"{r['network']}: alone={r['alone']:.4f} static={r['static']:.4f} "
              f"dynamic={r['dynamic']:.4f}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fedgat",
        description="Federated graph-attention training simulator",
    )
    sub = parser.add_subparsers(dest="verb", required=True)
    verbs = {
        "partition": ("write per-client dataset directories", cmd_partition),
        "train": ("train each client alone, save checkpoints", cmd_train),
        "federate": ("run the configured variants and emit the result table", cmd_federate),
        "attack": ("membership-inference attack/defense sweep", cmd_attack),
        "sweep": ("client-count sensitivity sweep", cmd_sweep),
        "report": ("rebuild the result table from cells.csv", cmd_report),
        "edge-types": ("alone vs static vs dynamic on per-type networks", cmd_edge_types),
    }
    for name, (help_text, _) in verbs.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="YAML experiment config")
        p.add_argument("--seed", type=int, default=None, help="override master seed")
        p.add_argument("--out", default=None, help="override output directory")
        p.add_argument("--jobs", type=int, default=None, help="worker pool size")
        p.add_argument("--variant", action="append", default=None,
                       help="restrict to these variants (comma separated, repeatable)")
        if name == "sweep":
            p.add_argument("--counts", default=None,
                           help="client counts, e.g. 2,3,5 (defaults to config sweep_counts)")
    parser._verb_table = {name: fn for name, (_, fn) in verbs.items()}
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handler = parser._verb_table[args.verb]
    try:
        return handler(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DivergenceError as exc:
        print(f"divergence: {exc}", file=sys.stderr)
        return EXIT_DIVERGENCE
    except FedgatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARTIAL


if __name__ == "__main__":
    sys.exit(main())
