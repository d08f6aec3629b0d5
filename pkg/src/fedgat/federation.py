"""Simulated server and clients: per-layer averaging and dynamic weighting.

The server is an in-process barrier. Each round every client runs one local
epoch; every ``frequency`` epochs the selected layers' W and attention
vectors are blended across clients, either as an unweighted mean (static) or
with per-receiving-client weights adjusted by validation-accuracy feedback
(dynamic). The only values that ever cross the client boundary are parameter
records and scalar accuracies.
"""

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .errors import AggregationError, DivergenceError
from .gat import (
    AttentionHead,
    GatLayerParams,
    ModelParams,
    TrainConfig,
    accuracy_from_probs,
    evaluate,
    model_forward,
    parameter_count,
    train_epoch,
)
from .graphs import Graph
from .seeding import rng_for


@dataclass(frozen=True)
class AggregationPlan:
    """Which layers are shared, how often, and with which weighting."""

    layers: tuple = (1, 2, 3)
    frequency: int = 2
    weighting: str = "static"   # "static" (unweighted mean) or "dynamic"

    def __post_init__(self):
        layers = tuple(sorted(set(int(v) for v in self.layers)))
        if not layers or not set(layers) <= {1, 2, 3}:
            raise ValueError(f"layers must be a nonempty subset of {{1,2,3}}, got {self.layers}")
        object.__setattr__(self, "layers", layers)
        if self.frequency < 1:
            raise ValueError(f"frequency must be >= 1, got {self.frequency}")
        if self.weighting not in ("static", "dynamic"):
            raise ValueError(f"weighting must be 'static' or 'dynamic', got {self.weighting!r}")

    @property
    def label(self) -> str:
        return "L" + "".join(str(v) for v in self.layers)


@dataclass
class ClientState:
    client_id: str
    graph: Graph
    params: ModelParams
    opt_state: object = None
    accuracy_history: list = field(default_factory=list)
    epoch: int = 0


@dataclass
class DynamicWeights:
    """Per-receiving-client aggregation weights with feedback adjustment.

    Row u holds the blend client u applies to everyone's parameters. Rows sum
    to 1; the self-weight never exceeds ``l_up``. ``mu`` records the last
    adjustment factor per client (1 when the self-weight was bumped).
    """

    gamma: np.ndarray
    eta: float = 0.05
    l_up: float = 0.9
    mu: np.ndarray = None

    def __post_init__(self):
        self.gamma = np.asarray(self.gamma, dtype=np.float64)
        n = self.gamma.shape[0]
        if self.gamma.shape != (n, n):
            raise ValueError(f"gamma must be square, got {self.gamma.shape}")
        if self.mu is None:
            self.mu = np.zeros(n)
        if self.eta < 0:
            raise ValueError(f"eta must be >= 0, got {self.eta}")
        if n > 1 and not (1.0 / n < self.l_up <= 1.0):
            raise ValueError(f"l_up must lie in (1/{n}, 1], got {self.l_up}")
        self.validate()

    def validate(self):
        if (self.gamma < 0).any():
            raise ValueError("gamma entries must be >= 0")
        if np.abs(self.gamma.sum(axis=1) - 1.0).max() > 1e-9:
            raise ValueError("gamma rows must sum to 1")
        if (np.diag(self.gamma) > self.l_up + 1e-12).any():
            raise ValueError("self-weights exceed l_up")

    @classmethod
    def uniform(cls, n_clients: int, eta: float = 0.05, l_up: float = 0.9) -> "DynamicWeights":
        return cls(gamma=np.full((n_clients, n_clients), 1.0 / n_clients),
                   eta=eta, l_up=l_up)


@dataclass
class RoundRecord:
    epoch: int
    client: str
    phase: str            # "pre" (after the local step) or "post" (after aggregation)
    val_acc: float
    test_acc: float
    loss: float = float("nan")
    gamma_row: Optional[list] = None

    def to_json(self) -> str:
        doc = {"epoch": self.epoch, "client": self.client, "phase": self.phase,
               "val_acc": self.val_acc, "test_acc": self.test_acc, "loss": self.loss}
        if self.gamma_row is not None:
            doc["gamma_row"] = self.gamma_row
        return json.dumps(doc, sort_keys=True)


@dataclass
class RoundLog:
    records: list = field(default_factory=list)
    bytes_per_aggregation: int = 0

    def append(self, record: RoundRecord) -> None:
        self.records.append(record)

    def write_jsonl(self, path) -> None:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w") as fh:
            for r in self.records:
                fh.write(r.to_json() + "\n")

    def metric_series(self, client: str) -> tuple[list, list, list]:
        """Per-epoch (epochs, val, test) of the state the client carries forward.

        Post-aggregation records supersede the same epoch's pre record.
        """
        by_epoch: dict[int, RoundRecord] = {}
        for r in self.records:
            if r.client != client:
                continue
            if r.epoch not in by_epoch or r.phase == "post":
                by_epoch[r.epoch] = r
        epochs = sorted(by_epoch)
        return (epochs,
                [by_epoch[e].val_acc for e in epochs],
                [by_epoch[e].test_acc for e in epochs])


@dataclass
class FederationResult:
    clients: list
    log: RoundLog
    final_uploads: Optional[list] = None

    def test_accuracies(self) -> list:
        return [evaluate(c.params, c.graph, c.graph.test_mask) for c in self.clients]


# --------------------------------------------------------------------------
# Aggregation primitives (the simulated server; sees parameter records only)
# --------------------------------------------------------------------------

def _check_compatible(params_all: list) -> None:
    base = params_all[0]
    for n, p in enumerate(params_all[1:], start=1):
        for v, (bl, pl) in enumerate(zip(base.layers, p.layers), start=1):
            if len(bl.heads) != len(pl.heads) or bl.heads[0].W.shape != pl.heads[0].W.shape:
                raise AggregationError(
                    f"client {n} layer {v} has incompatible shape "
                    f"({pl.heads[0].W.shape} x{len(pl.heads)} vs "
                    f"{bl.heads[0].W.shape} x{len(bl.heads)})"
                )


def _blend_layer(params_all: list, layer_idx: int, weights: np.ndarray):
    """Weighted combination of one layer across clients.

    Computed as base + sum(w_n * (x_n - base)), recentered on the heaviest
    contributor. Blending identical inputs is then an exact no-op (the
    idempotence the parity checks rely on), a one-hot weight row returns that
    client's tensors bit-for-bit, and uniform rows reduce to the same float
    ops for every receiving client.
    """
    base = params_all[int(np.argmax(weights))].layers[layer_idx]
    out = []
    for h_idx, bh in enumerate(base.heads):
        dW = np.zeros_like(bh.W)
        da = np.zeros_like(bh.a)
        for w, p in zip(weights, params_all):
            hh = p.layers[layer_idx].heads[h_idx]
            dW += w * (hh.W - bh.W)
            da += w * (hh.a - bh.a)
        out.append(AttentionHead(W=bh.W + dW, a=bh.a + da))
    return tuple(out)


def _rebuild(own: ModelParams, blended: dict, plan: AggregationPlan) -> ModelParams:
    layers = []
    for v, layer in enumerate(own.layers, start=1):
        if v in plan.layers:
            layers.append(GatLayerParams(heads=blended[v], combine=layer.combine))
        else:
            layers.append(layer)
    return ModelParams(layers=tuple(layers))


def fedavg_aggregate(params_all: list, plan: AggregationPlan) -> list:
    """Unweighted per-layer mean of W and a over the plan's layers.

    Layers outside the plan keep each client's own values. Never mixes
    different layers.
    """
    if not params_all:
        raise AggregationError("no parameter records to aggregate")
    _check_compatible(params_all)
    n = len(params_all)
    weights = np.full(n, 1.0 / n)
    blended = {v: _blend_layer(params_all, v - 1, weights) for v in plan.layers}
    return [_rebuild(p, blended, plan) for p in params_all]


def update_dynamic_weights(dw: DynamicWeights, client: int,
                           acc_prev: float, acc_curr: float) -> DynamicWeights:
    """Accuracy-feedback adjustment of one client's weight row.

    The self-weight grows by ``eta`` (capped at ``l_up``) whenever accuracy
    failed to improve; the residual mass is split equally over the others.
    """
    n = dw.gamma.shape[0]
    if n == 1:
        return dw
    self_w = dw.gamma[client, client]
    mu = 1.0 if (acc_curr - acc_prev <= 0.0 and self_w < dw.l_up) else 0.0
    new_mu = dw.mu.copy()
    new_mu[client] = mu
    if mu * dw.eta == 0.0:
        return DynamicWeights(gamma=dw.gamma.copy(), eta=dw.eta, l_up=dw.l_up, mu=new_mu)
    bumped = min(self_w + dw.eta, dw.l_up)
    gamma = dw.gamma.copy()
    gamma[client, :] = (1.0 - bumped) / (n - 1)
    gamma[client, client] = bumped
    return DynamicWeights(gamma=gamma, eta=dw.eta, l_up=dw.l_up, mu=new_mu)


def dynamic_aggregate(params_all: list, dw: DynamicWeights,
                      plan: AggregationPlan) -> list:
    """Per-receiving-client weighted blend; with uniform rows this equals
    fedavg_aggregate bit-for-bit."""
    if len(params_all) != dw.gamma.shape[0]:
        raise AggregationError(
            f"{len(params_all)} parameter records for {dw.gamma.shape[0]} weight rows"
        )
    _check_compatible(params_all)
    out = []
    for u, own in enumerate(params_all):
        blended = {v: _blend_layer(params_all, v - 1, dw.gamma[u]) for v in plan.layers}
        out.append(_rebuild(own, blended, plan))
    return out


def bytes_shared(plan: AggregationPlan, params: ModelParams) -> int:
    """Bytes one client uploads per aggregation event (8-byte reals)."""
    return parameter_count(params, plan.layers) * 8


# --------------------------------------------------------------------------
# Round orchestration
# --------------------------------------------------------------------------

UploadTransform = Callable[[ModelParams, int, int], ModelParams]


def run_federation(clients: list, plan: AggregationPlan, cfg: TrainConfig,
                   upload_transform: UploadTransform | None = None,
                   dynamic_weights: DynamicWeights | None = None) -> FederationResult:
    """Train all clients for ``cfg.max_epoch`` epochs with periodic aggregation.

    ``upload_transform(params, client_index, epoch)`` is applied to each
    parameter record before the server sees it (identity by default; the
    place a cipher or noise mechanism slots in). Dynamic weighting compares
    each client's last two validation accuracies at every aggregation event.
    """
    if not clients:
        raise ValueError("need at least one client")
    widths = {c.graph.num_features for c in clients}
    if len(widths) != 1:
        raise AggregationError(f"clients are not feature-aligned: widths {sorted(widths)}")
    n = len(clients)
    dw = dynamic_weights
    if plan.weighting == "dynamic" and dw is None:
        dw = DynamicWeights.uniform(n)
    log = RoundLog(bytes_per_aggregation=bytes_shared(plan, clients[0].params))
    last_uploads = None

    for t in range(1, cfg.max_epoch + 1):
        for c in clients:
            drop_rng = (rng_for(cfg.seed, "dropout", c.client_id, t)
                        if cfg.dropout > 0 else None)
            try:
                res = train_epoch(c.params, c.graph, cfg, c.opt_state,
                                  epoch=t, dropout_rng=drop_rng)
            except DivergenceError as err:
                raise DivergenceError(
                    f"client {c.client_id} diverged at epoch {t}: {err}",
                    epoch=t, client_id=c.client_id,
                ) from err
            c.params, c.opt_state = res.params, res.opt_state
            c.accuracy_history.append(res.val_accuracy)
            c.epoch = t
            test_acc = (accuracy_from_probs(res.probs, c.graph.labels, c.graph.test_mask)
                        if c.graph.test_mask.any() else float("nan"))
            log.append(RoundRecord(epoch=t, client=c.client_id, phase="pre",
                                   val_acc=res.val_accuracy, test_acc=test_acc,
                                   loss=res.loss))

        if t % plan.frequency == 0:
            uploads = []
            for idx, c in enumerate(clients):
                p = c.params
                if upload_transform is not None:
                    p = upload_transform(p, idx, t)
                uploads.append(p)
            if plan.weighting == "dynamic":
                for u, c in enumerate(clients):
                    hist = c.accuracy_history
                    prev = hist[-2] if len(hist) >= 2 else float("-inf")
                    dw = update_dynamic_weights(dw, u, prev, hist[-1])
                merged = dynamic_aggregate(uploads, dw, plan)
            else:
                merged = fedavg_aggregate(uploads, plan)
            for u, c in enumerate(clients):
                c.params = merged[u]
                probs = model_forward(c.params, c.graph)
                val = (accuracy_from_probs(probs, c.graph.labels, c.graph.val_mask)
                       if c.graph.val_mask.any() else float("nan"))
                test = (accuracy_from_probs(probs, c.graph.labels, c.graph.test_mask)
                        if c.graph.test_mask.any() else float("nan"))
                log.append(RoundRecord(
                    epoch=t, client=c.client_id, phase="post", val_acc=val,
                    test_acc=test,
                    gamma_row=(dw.gamma[u].tolist() if plan.weighting == "dynamic" else None),
                ))
            last_uploads = uploads

    return FederationResult(clients=clients, log=log, final_uploads=last_uploads)


def baseline_alone(clients: list, cfg: TrainConfig) -> FederationResult:
    """Each client trains in isolation (aggregation never fires)."""
    plan = AggregationPlan(layers=(1, 2, 3), frequency=cfg.max_epoch + 1,
                           weighting="static")
    return run_federation(clients, plan, cfg)


@dataclass
class FullBaselineResult:
    params: ModelParams
    log: RoundLog
    client_names: list

    def test_series(self, client: str) -> tuple[list, list, list]:
        return self.log.metric_series(client)


def baseline_full(global_graph: Graph, clients: list, cfg: TrainConfig,
                  init: ModelParams) -> FullBaselineResult:
    """One model on the global graph, scored on each client's test nodes.

    Per epoch the log holds one record per client: the global validation
    accuracy plus that client's test accuracy read off the global forward.
    """
    pos = {int(nid): i for i, nid in enumerate(global_graph.node_ids.tolist())}
    client_test_idx = {}
    for c in clients:
        ids = c.graph.node_ids[c.graph.test_mask]
        client_test_idx[c.client_id] = np.asarray([pos[int(i)] for i in ids], dtype=np.int64)

    params, opt_state = init, None
    log = RoundLog()
    for t in range(1, cfg.max_epoch + 1):
        drop_rng = rng_for(cfg.seed, "dropout", "full", t) if cfg.dropout > 0 else None
        res = train_epoch(params, global_graph, cfg, opt_state, epoch=t,
                          dropout_rng=drop_rng)
        params, opt_state = res.params, res.opt_state
        for c in clients:
            idx = client_test_idx[c.client_id]
            acc = (accuracy_from_probs(res.probs, global_graph.labels, idx)
                   if idx.size else float("nan"))
            log.append(RoundRecord(epoch=t, client=c.client_id, phase="pre",
                                   val_acc=res.val_accuracy, test_acc=acc,
                                   loss=res.loss))
    return FullBaselineResult(params=params, log=log,
                              client_names=[c.client_id for c in clients])
