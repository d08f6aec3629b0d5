"""Laplace noise on shared parameters and confidence-threshold membership attacks.

The defense clips each shared coordinate to [-C, C] (per-coordinate L1
sensitivity 2C) and adds Laplace(0, 2C/epsilon) noise before upload, so the
server and every other client only ever see the noised record. Attacks score
how well a single confidence threshold separates a target's training nodes
from held-out ones; the reported advantage is 2 * (accuracy - 0.5).
"""

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import IllPosedAttackError
from .gat import AttentionHead, GatLayerParams, ModelParams, model_forward
from .graphs import Graph
from .seeding import rng_for


@dataclass(frozen=True)
class DpConfig:
    epsilon: float
    clip_bound: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError(f"epsilon must be > 0, got {self.epsilon}")
        if self.clip_bound <= 0:
            raise ValueError(f"clip_bound must be > 0, got {self.clip_bound}")

    @property
    def noise_scale(self) -> float:
        return sensitivity(self.clip_bound) / self.epsilon


def sensitivity(clip_bound: float) -> float:
    """Per-coordinate L1 sensitivity of a value clipped to [-C, C]."""
    if clip_bound <= 0:
        raise ValueError(f"clip_bound must be > 0, got {clip_bound}")
    return 2.0 * clip_bound


def laplace_noise(shape, scale: float, rng: np.random.Generator) -> np.ndarray:
    """Inverse-CDF Laplace(0, scale) draws from a uniform source."""
    u = rng.random(shape) - 0.5
    # cap |u| one ulp under 0.5 so log1p never sees exactly -1
    mag = np.minimum(np.abs(u), 0.5 - 2.0 ** -54)
    return -scale * np.sign(u) * np.log1p(-2.0 * mag)


def clip_params(params: ModelParams, layers, clip_bound: float) -> ModelParams:
    """Project the selected layers' coordinates onto [-C, C] (idempotent)."""
    sel = set(layers)
    out = []
    for v, layer in enumerate(params.layers, start=1):
        if v not in sel:
            out.append(layer)
            continue
        heads = tuple(
            AttentionHead(W=np.clip(h.W, -clip_bound, clip_bound),
                          a=np.clip(h.a, -clip_bound, clip_bound))
            for h in layer.heads
        )
        out.append(GatLayerParams(heads=heads, combine=layer.combine))
    return ModelParams(layers=tuple(out))


def apply_dp(params: ModelParams, layers, dp: DpConfig,
             rng: np.random.Generator | None = None) -> ModelParams:
    """Clip then perturb the shared layers; other layers pass through untouched."""
    rng = rng if rng is not None else rng_for(dp.seed, "dp")
    clipped = clip_params(params, layers, dp.clip_bound)
    b = dp.noise_scale
    sel = set(layers)
    out = []
    for v, layer in enumerate(clipped.layers, start=1):
        if v not in sel:
            out.append(layer)
            continue
        heads = tuple(
            AttentionHead(W=h.W + laplace_noise(h.W.shape, b, rng),
                          a=h.a + laplace_noise(h.a.shape, b, rng))
            for h in layer.heads
        )
        out.append(GatLayerParams(heads=heads, combine=layer.combine))
    return ModelParams(layers=tuple(out))


# --------------------------------------------------------------------------
# Membership inference
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class AttackConfig:
    mode: str                        # "black-box" or "white-box"
    member_ids: tuple                # local node indices known to be training nodes
    nonmember_ids: tuple             # local node indices held out of training
    target_client: str = ""
    threshold_strategy: str = "sweep-max-accuracy"

    def __post_init__(self):
        if self.mode not in ("black-box", "white-box"):
            raise ValueError(f"mode must be 'black-box' or 'white-box', got {self.mode!r}")
        if self.threshold_strategy != "sweep-max-accuracy":
            raise ValueError(f"unknown threshold strategy {self.threshold_strategy!r}")
        object.__setattr__(self, "member_ids", tuple(int(i) for i in self.member_ids))
        object.__setattr__(self, "nonmember_ids", tuple(int(i) for i in self.nonmember_ids))


@dataclass
class AttackReport:
    i_acc: float
    i_adv: float
    chosen_threshold: float
    mode: str
    target_client: str
    member_confidences: np.ndarray
    nonmember_confidences: np.ndarray


def node_confidence(params: ModelParams, g: Graph, node: int) -> float:
    """Maximum class probability the model assigns at one node."""
    if not 0 <= node < g.num_nodes:
        raise ValueError(f"node {node} not present (graph has {g.num_nodes} nodes)")
    probs = model_forward(params, g)
    return float(probs[node].max())


def confidences(params: ModelParams, g: Graph, nodes) -> np.ndarray:
    nodes = np.asarray(nodes, dtype=np.int64)
    if nodes.size and (nodes.min() < 0 or nodes.max() >= g.num_nodes):
        raise ValueError("candidate node outside the graph")
    probs = model_forward(params, g)
    return probs[nodes].max(axis=1)


def sweep_threshold(conf: np.ndarray, is_member: np.ndarray) -> tuple[float, float]:
    """Best (accuracy, threshold) for the rule: member iff confidence >= t.

    The sweep covers every observed confidence plus one value above the
    maximum (predict nobody), which is exhaustive: any other threshold is
    equivalent to one of these on the candidate set.
    """
    thresholds = np.concatenate([np.unique(conf), [conf.max() + 1.0]])
    best_acc, best_t = -1.0, thresholds[0]
    for t in thresholds:
        acc = float(np.mean((conf >= t) == is_member))
        if acc > best_acc:
            best_acc, best_t = acc, float(t)
    return best_acc, best_t


def membership_attack(cfg: AttackConfig, params: ModelParams, g: Graph) -> AttackReport:
    """Confidence-threshold attack on the given model view.

    ``params`` is whatever the attacker's access level grants: the target's
    served model for black-box, or a reconstruction from shared parameters
    for white-box (see :func:`white_box_view`).
    """
    if not cfg.member_ids or not cfg.nonmember_ids:
        raise IllPosedAttackError(
            "candidate set needs both members and non-members "
            f"(got {len(cfg.member_ids)} / {len(cfg.nonmember_ids)})"
        )
    members = np.asarray(cfg.member_ids, dtype=np.int64)
    nonmembers = np.asarray(cfg.nonmember_ids, dtype=np.int64)
    conf = confidences(params, g, np.concatenate([members, nonmembers]))
    is_member = np.zeros(conf.size, dtype=bool)
    is_member[:members.size] = True
    i_acc, threshold = sweep_threshold(conf, is_member)
    return AttackReport(
        i_acc=i_acc,
        i_adv=(i_acc - 0.5) * 2.0,
        chosen_threshold=threshold,
        mode=cfg.mode,
        target_client=cfg.target_client,
        member_confidences=conf[:members.size],
        nonmember_confidences=conf[members.size:],
    )


def white_box_view(upload: ModelParams, attacker_own: ModelParams,
                   shared_layers) -> ModelParams:
    """Model an honest-but-curious member reconstructs from an upload.

    Shared layers come from the target's (possibly noised) upload; layers the
    target never shared are substituted with the attacker's own.
    """
    sel = set(shared_layers)
    layers = tuple(
        upload.layers[v - 1] if v in sel else attacker_own.layers[v - 1]
        for v in (1, 2, 3)
    )
    return ModelParams(layers=layers)


def default_candidates(g: Graph, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Balanced candidate set: all training nodes vs an equal test-node sample."""
    members = np.flatnonzero(g.train_mask)
    pool = np.flatnonzero(g.test_mask)
    if members.size == 0 or pool.size == 0:
        raise IllPosedAttackError("graph lacks training or test nodes for an attack")
    size = min(members.size, pool.size)
    if members.size > size:
        members = np.sort(rng.choice(members, size=size, replace=False))
    nonmembers = np.sort(rng.choice(pool, size=size, replace=False))
    return members, nonmembers


# --------------------------------------------------------------------------
# Scenario sweep
# --------------------------------------------------------------------------

@dataclass
class ScenarioArtifact:
    """Everything the attack harness needs about one trained scenario."""

    scenario: str                      # e.g. "alone", "federated", "federated+dp"
    seed: int
    target_client: str
    graph: Graph                       # the target's local graph
    served_params: ModelParams         # what the target's model actually is
    upload_params: Optional[ModelParams] = None   # last record the server saw
    attacker_params: Optional[ModelParams] = None # the curious member's own model
    shared_layers: tuple = (1, 2, 3)
    epsilon: Optional[float] = None
    model_val_acc: float = float("nan")
    model_test_acc: float = float("nan")


@dataclass
class AttackRow:
    scenario: str
    mode: str
    epsilon: Optional[float]
    seed: int
    i_acc: float
    i_adv: float
    model_val_acc: float
    model_test_acc: float


def attack_sweep(artifacts: list, modes=("black-box", "white-box"),
                 seed: int = 0) -> list:
    """Run the membership attack for every scenario and access mode."""
    rows = []
    for art in artifacts:
        members, nonmembers = default_candidates(art.graph, rng_for(seed, "candidates", art.scenario, art.seed))
        for mode in modes:
            if mode == "black-box":
                view = art.served_params
            else:
                if art.upload_params is None:
                    view = art.served_params   # standalone target: full access
                else:
                    view = white_box_view(art.upload_params,
                                          art.attacker_params or art.served_params,
                                          art.shared_layers)
            cfg = AttackConfig(mode=mode, member_ids=tuple(members),
                               nonmember_ids=tuple(nonmembers),
                               target_client=art.target_client)
            report = membership_attack(cfg, view, art.graph)
            rows.append(AttackRow(
                scenario=art.scenario, mode=mode, epsilon=art.epsilon,
                seed=art.seed, i_acc=report.i_acc, i_adv=report.i_adv,
                model_val_acc=art.model_val_acc, model_test_acc=art.model_test_acc,
            ))
    return rows


def write_attack_csv(rows: list, path) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["scenario", "mode", "epsilon", "seed", "i_acc", "i_adv",
                    "model_val_acc", "model_test_acc"])
        for r in rows:
            w.writerow([r.scenario, r.mode,
                        "" if r.epsilon is None else repr(r.epsilon), r.seed,
                        repr(r.i_acc), repr(r.i_adv),
                        repr(r.model_val_acc), repr(r.model_test_acc)])
