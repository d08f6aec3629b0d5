"""Three-layer graph attention model: forward, analytic backward, training.

The architecture is fixed (two multi-head concat layers with ELU, one
single-head softmax output layer), so the backward pass is hand-derived
rather than taped. Attention is evaluated over directed neighbor pairs
(first-order neighbors plus a self-loop for every node) with segment
reductions, which keeps desk-scale graphs cheap without sparse kernels.

Gradients here are verified against :func:`fedgat.numerics.finite_difference_check`
in the test suite; any change to the forward math must keep that check green.
"""

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import numerics
from .errors import DimensionError, DivergenceError, EmptyMaskError
from .graphs import Graph, directed_pairs
from .numerics import elu, elu_grad, leaky_relu, leaky_relu_grad, row_softmax
from .seeding import rng_for

LEAKY_SLOPE = 0.2  # standard GAT negative slope


@dataclass(frozen=True)
class AttentionHead:
    W: np.ndarray   # (in_dim, out_dim)
    a: np.ndarray   # (2 * out_dim,) applied as a . [Wh_i || Wh_j]

    def __post_init__(self):
        object.__setattr__(self, "W", np.ascontiguousarray(self.W, dtype=np.float64))
        object.__setattr__(self, "a", np.ascontiguousarray(self.a, dtype=np.float64))
        if self.a.shape != (2 * self.W.shape[1],):
            raise DimensionError(
                f"attention vector length {self.a.shape} does not match 2*{self.W.shape[1]}"
            )


@dataclass(frozen=True)
class GatLayerParams:
    heads: tuple
    combine: str  # "concat" (hidden layers) or "single" (output layer)

    def __post_init__(self):
        object.__setattr__(self, "heads", tuple(self.heads))
        if self.combine not in ("concat", "single"):
            raise ValueError(f"combine must be 'concat' or 'single', got {self.combine!r}")
        if self.combine == "single" and len(self.heads) != 1:
            raise DimensionError("a 'single' layer has exactly one head")
        if not self.heads:
            raise DimensionError("layer needs at least one head")
        shapes = {h.W.shape for h in self.heads}
        if len(shapes) != 1:
            raise DimensionError(f"heads disagree on shape: {sorted(shapes)}")

    @property
    def in_dim(self) -> int:
        return self.heads[0].W.shape[0]

    @property
    def out_dim(self) -> int:
        return self.heads[0].W.shape[1]

    @property
    def out_width(self) -> int:
        return self.out_dim * len(self.heads) if self.combine == "concat" else self.out_dim


@dataclass(frozen=True)
class ModelParams:
    layers: tuple  # exactly three GatLayerParams

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        if len(self.layers) != 3:
            raise DimensionError(f"model has exactly 3 layers, got {len(self.layers)}")
        l1, l2, l3 = self.layers
        if l1.combine != "concat" or l2.combine != "concat" or l3.combine != "single":
            raise DimensionError("layers 1-2 must concat heads; layer 3 is single-head")
        if l2.in_dim != l1.out_width:
            raise DimensionError(
                f"layer 2 in_dim {l2.in_dim} != layer 1 output width {l1.out_width}"
            )
        if l3.in_dim != l2.out_width:
            raise DimensionError(
                f"layer 3 in_dim {l3.in_dim} != layer 2 output width {l2.out_width}"
            )

    @property
    def num_classes(self) -> int:
        return self.layers[2].out_dim

    @property
    def num_features(self) -> int:
        return self.layers[0].in_dim


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 0.005
    l2: float = 0.0005
    nhid: int = 8
    nhead: int = 8
    max_epoch: int = 200
    dropout: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.lr < 0:
            raise ValueError(f"lr must be >= 0, got {self.lr}")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError(f"dropout must lie in [0, 1), got {self.dropout}")


@dataclass
class GradientSet:
    """Per-parameter gradients mirroring ModelParams, plus the loss value."""

    layers: list          # [[(dW, da), ...] per head] per layer
    loss: float

    def to_vector(self) -> np.ndarray:
        chunks = []
        for layer in self.layers:
            for dW, da in layer:
                chunks.append(dW.ravel())
                chunks.append(da.ravel())
        return np.concatenate(chunks)


def init_params(n_features: int, n_classes: int, cfg: TrainConfig,
                rng: np.random.Generator | None = None) -> ModelParams:
    """Glorot-uniform initialization of the fixed 3-layer architecture."""
    rng = rng if rng is not None else rng_for(cfg.seed, "init")

    def head(in_dim, out_dim):
        lim_w = np.sqrt(6.0 / (in_dim + out_dim))
        lim_a = np.sqrt(6.0 / (2 * out_dim + 1))
        return AttentionHead(
            W=rng.uniform(-lim_w, lim_w, size=(in_dim, out_dim)),
            a=rng.uniform(-lim_a, lim_a, size=2 * out_dim),
        )

    hidden = cfg.nhid * cfg.nhead
    return ModelParams(layers=(
        GatLayerParams(heads=tuple(head(n_features, cfg.nhid) for _ in range(cfg.nhead)),
                       combine="concat"),
        GatLayerParams(heads=tuple(head(hidden, cfg.nhid) for _ in range(cfg.nhead)),
                       combine="concat"),
        GatLayerParams(heads=(head(hidden, n_classes),), combine="single"),
    ))


def params_to_vector(params: ModelParams) -> np.ndarray:
    chunks = []
    for layer in params.layers:
        for h in layer.heads:
            chunks.append(h.W.ravel())
            chunks.append(h.a.ravel())
    return np.concatenate(chunks)


def vector_to_params(vector: np.ndarray, template: ModelParams) -> ModelParams:
    vector = np.asarray(vector, dtype=np.float64).ravel()
    pos = 0
    layers = []
    for layer in template.layers:
        heads = []
        for h in layer.heads:
            w_size = h.W.size
            W = vector[pos:pos + w_size].reshape(h.W.shape)
            pos += w_size
            a = vector[pos:pos + h.a.size].copy()
            pos += h.a.size
            heads.append(AttentionHead(W=W.copy(), a=a))
        layers.append(GatLayerParams(heads=tuple(heads), combine=layer.combine))
    if pos != vector.size:
        raise DimensionError(f"vector length {vector.size} != parameter count {pos}")
    return ModelParams(layers=tuple(layers))


def parameter_count(params: ModelParams, layers=None) -> int:
    """Number of scalars in W and a over the selected 1-indexed layers."""
    sel = set(layers) if layers is not None else {1, 2, 3}
    total = 0
    for v, layer in enumerate(params.layers, start=1):
        if v in sel:
            total += sum(h.W.size + h.a.size for h in layer.heads)
    return total


# --------------------------------------------------------------------------
# Forward / backward kernels
# --------------------------------------------------------------------------

def _segment_sum(values, ends):
    """Sum of consecutive row segments [0:e0], [e0:e1], ... via one cumsum.

    Segments follow the sorted pair layout, so this replaces add.reduceat
    (whose per-segment scalar loop dominates at a few thousand segments).
    """
    csum = np.cumsum(values, axis=0)
    out = csum[ends - 1]
    out[1:] -= csum[ends[:-1] - 1]
    return out


class _PairOrders:
    """Both orderings of the directed neighbor pairs of one graph.

    Pairs arrive sorted by destination (attention softmax segments); the
    backward pass also scatters into source rows, which becomes a segment
    sum after reordering by source. Every node owns at least one pair in
    each ordering thanks to self-loops.
    """

    __slots__ = ("src", "dst", "dst_starts", "dst_ends", "by_src", "src_ends")

    def __init__(self, src, dst, starts, k):
        self.src = src
        self.dst = dst
        self.dst_starts = starts[:-1]
        self.dst_ends = starts[1:]
        self.by_src = np.argsort(src, kind="stable")
        counts = np.bincount(src, minlength=k)
        self.src_ends = np.cumsum(counts)

    def scatter_to_src(self, per_pair):
        return _segment_sum(per_pair[self.by_src], self.src_ends)


class _LayerCache:
    """Forward intermediates one layer's backward pass needs."""

    __slots__ = ("z_all", "z_src", "logit", "alpha", "m_all")

    def __init__(self, z_all, z_src, logit, alpha, m_all):
        self.z_all = z_all      # (k, heads*d) transformed features
        self.z_src = z_src      # (P, heads*d) gathered at pair sources
        self.logit = logit      # (P, heads) pre-LeakyReLU attention logits
        self.alpha = alpha      # (P, heads) normalized attention
        self.m_all = m_all      # (k, heads*d) pre-activation messages


def _attention_vectors(layer: GatLayerParams):
    a = np.stack([h.a for h in layer.heads])        # (heads, 2d)
    d = layer.out_dim
    return a[:, :d], a[:, d:]


def _layer_forward(H, layer: GatLayerParams, orders: _PairOrders, caches=None):
    """One layer over precomputed neighbor pairs.

    Heads are batched: one gemm against the layer input and one segment
    reduction per quantity, with heads side by side in the trailing axis
    (per-head gemms and reductions would re-pay the input stream and the
    per-segment overhead ``heads`` times). Hidden layers apply ELU and
    concatenate, which on this layout is elementwise ELU of the packed
    message matrix; the output layer returns row-softmax probabilities.
    """
    src, dst = orders.src, orders.dst
    nh, d = len(layer.heads), layer.out_dim
    p = len(src)
    w_stack = np.concatenate([h.W for h in layer.heads], axis=1)
    z_all = H @ w_stack                                     # (k, nh*d)
    z3 = z_all.reshape(-1, nh, d)
    a_center, a_neigh = _attention_vectors(layer)
    center = np.einsum("khd,hd->kh", z3, a_center)
    neigh = np.einsum("khd,hd->kh", z3, a_neigh)
    logit = center[dst] + neigh[src]                        # (P, nh)
    e = leaky_relu(logit, LEAKY_SLOPE)
    mx = np.maximum.reduceat(e, orders.dst_starts, axis=0)
    ex = np.exp(e - mx[dst])
    denom = _segment_sum(ex, orders.dst_ends)
    alpha = ex / denom[dst]                                 # (P, nh)
    z_src = z_all[src]
    msg = (alpha[:, :, None] * z_src.reshape(p, nh, d)).reshape(p, nh * d)
    m_all = _segment_sum(msg, orders.dst_ends)              # (k, nh*d)
    if caches is not None:
        caches.append(_LayerCache(z_all, z_src, logit, alpha, m_all))
    if layer.combine == "concat":
        return elu(m_all)
    return row_softmax(m_all)


def _layer_backward(dPre, layer, cache: _LayerCache, H, orders: _PairOrders,
                    k, need_dH=True):
    """Gradients of one layer given d(loss)/d(pre-activation messages).

    Returns (per-head [(dW, da)], dH) where dH is the gradient w.r.t. the
    layer input; all large gemms, reductions, and scatters are batched over
    heads exactly like the forward pass.
    """
    src, dst = orders.src, orders.dst
    nh, d = len(layer.heads), layer.out_dim
    p = len(src)
    a_center, a_neigh = _attention_vectors(layer)
    dm_dst = dPre[dst].reshape(p, nh, d)
    z_src3 = cache.z_src.reshape(p, nh, d)
    dalpha = np.einsum("phd,phd->ph", dm_dst, z_src3)       # (P, nh)
    wsum = _segment_sum(cache.alpha * dalpha, orders.dst_ends)
    de = cache.alpha * (dalpha - wsum[dst])
    dlogit = de * leaky_relu_grad(cache.logit, LEAKY_SLOPE)
    dcenter = _segment_sum(dlogit, orders.dst_ends)         # (k, nh)
    dneigh = orders.scatter_to_src(dlogit)                  # (k, nh)
    msg_grad = (cache.alpha[:, :, None] * dm_dst).reshape(p, nh * d)
    dz3 = orders.scatter_to_src(msg_grad).reshape(k, nh, d)
    dz3 += dcenter[:, :, None] * a_center[None]
    dz3 += dneigh[:, :, None] * a_neigh[None]
    z3 = cache.z_all.reshape(k, nh, d)
    da_center = np.einsum("khd,kh->hd", z3, dcenter)
    da_neigh = np.einsum("khd,kh->hd", z3, dneigh)
    dz_all = dz3.reshape(k, nh * d)
    dw_all = H.T @ dz_all
    head_grads = [
        (dw_all[:, i * d:(i + 1) * d], np.concatenate([da_center[i], da_neigh[i]]))
        for i in range(nh)
    ]
    dH = None
    if need_dH:
        w_stack = np.concatenate([h.W for h in layer.heads], axis=1)
        dH = dz_all @ w_stack.T
    return head_grads, dH


def _check_input_width(params: ModelParams, X):
    if X.shape[1] != params.num_features:
        raise DimensionError(
            f"feature width {X.shape[1]} does not match layer-1 in_dim "
            f"{params.num_features}"
        )


def attention_coefficients(h, layer: GatLayerParams, head_index: int, adjacency) -> np.ndarray:
    """Dense attention matrix for one head over the given neighborhoods.

    ``adjacency`` is a boolean matrix whose True entries (self-loops included)
    define each row's softmax support; rows of the result sum to 1 there and
    are exactly 0 elsewhere.
    """
    h = numerics.as_matrix(h)
    if h.shape[1] != layer.in_dim:
        raise DimensionError(f"input width {h.shape[1]} != layer in_dim {layer.in_dim}")
    head = layer.heads[head_index]
    d = head.W.shape[1]
    Z = numerics.matmul(h, head.W)
    center = Z @ head.a[:d]
    neigh = Z @ head.a[d:]
    logits = leaky_relu(center[:, None] + neigh[None, :], LEAKY_SLOPE)
    return numerics.masked_softmax(logits, adjacency)


def layer_forward(h, layer: GatLayerParams, adjacency) -> np.ndarray:
    """Public single-layer op over a dense boolean adjacency."""
    h = numerics.as_matrix(h)
    if h.shape[1] != layer.in_dim:
        raise DimensionError(f"input width {h.shape[1]} != layer in_dim {layer.in_dim}")
    adjacency = np.asarray(adjacency, dtype=bool)
    dst, src = np.nonzero(adjacency)
    counts = np.bincount(dst, minlength=h.shape[0])
    if (counts == 0).any():
        from .errors import DegenerateNeighborhoodError
        raise DegenerateNeighborhoodError(
            f"nodes {np.flatnonzero(counts == 0).tolist()} have empty neighborhoods"
        )
    starts = np.zeros(h.shape[0] + 1, dtype=np.int64)
    np.cumsum(counts, out=starts[1:])
    orders = _PairOrders(src, dst, starts, h.shape[0])
    return _layer_forward(h, layer, orders)


def _graph_orders(g: Graph) -> _PairOrders:
    dst, src, starts = directed_pairs(g, self_loops=True)
    return _PairOrders(src, dst, starts, g.num_nodes)


def model_forward(params: ModelParams, g: Graph) -> np.ndarray:
    """Class-probability matrix for every node of ``g`` (rows sum to 1)."""
    _check_input_width(params, g.features)
    orders = _graph_orders(g)
    H = g.features
    for layer in params.layers:
        H = _layer_forward(H, layer, orders)
    return H


def loss_and_gradients(params: ModelParams, g: Graph, cfg: TrainConfig,
                       dropout_rng: np.random.Generator | None = None) -> GradientSet:
    """Full-batch training loss and analytic gradients.

    Loss is mean cross-entropy over the train mask plus ``l2 * sum(theta^2)``
    over every trainable parameter. When ``cfg.dropout > 0`` and a generator
    is supplied, inverted dropout is applied to each layer input.
    """
    _check_input_width(params, g.features)
    train_idx = np.flatnonzero(g.train_mask)
    if train_idx.size == 0:
        raise EmptyMaskError("train mask is empty")
    orders = _graph_orders(g)
    k = g.num_nodes

    use_dropout = cfg.dropout > 0.0 and dropout_rng is not None
    inputs, caches, drop_masks = [], [], []
    H = g.features
    for layer in params.layers:
        if use_dropout:
            keep = dropout_rng.random(H.shape) >= cfg.dropout
            scale = keep / (1.0 - cfg.dropout)
            drop_masks.append(scale)
            H = H * scale
        inputs.append(H)
        H = _layer_forward(H, layer, orders, caches=caches)
    probs = H

    # stable log-softmax on the output-layer logits for the loss scalar, so
    # badly perturbed models (e.g. post-noise) get a large finite loss instead
    # of log(0); the fused gradient below uses the forward probabilities
    logits3 = caches[2].m_all
    shifted = logits3[train_idx] - logits3[train_idx].max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1))
    data_loss = float(-np.mean(
        shifted[np.arange(train_idx.size), g.labels[train_idx]] - log_norm
    ))

    # fused softmax + cross-entropy gradient at the output layer
    dM3 = np.zeros_like(probs)
    dM3[train_idx] = probs[train_idx]
    dM3[train_idx, g.labels[train_idx]] -= 1.0
    dM3 /= train_idx.size

    grads: list = [None, None, None]
    dNext = None
    for v in (2, 1, 0):
        layer = params.layers[v]
        dPre = dM3 if v == 2 else dNext * elu_grad(caches[v].m_all)
        head_grads, dH = _layer_backward(
            dPre, layer, caches[v], inputs[v], orders, k,
            need_dH=(v > 0),
        )
        grads[v] = head_grads
        if use_dropout and v > 0:
            dH = dH * drop_masks[v]
        dNext = dH

    reg = 0.0
    for v, layer in enumerate(params.layers):
        for i, head in enumerate(layer.heads):
            reg += float(np.sum(head.W * head.W) + np.sum(head.a * head.a))
            dW, da = grads[v][i]
            grads[v][i] = (dW + 2.0 * cfg.l2 * head.W, da + 2.0 * cfg.l2 * head.a)
    return GradientSet(layers=grads, loss=data_loss + cfg.l2 * reg)


# --------------------------------------------------------------------------
# Optimizer and epoch step
# --------------------------------------------------------------------------

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0

    @classmethod
    def zeros(cls, size: int) -> "AdamState":
        return cls(m=np.zeros(size), v=np.zeros(size), t=0)


def adam_step(theta: np.ndarray, grad: np.ndarray, state: AdamState,
              lr: float) -> tuple[np.ndarray, AdamState]:
    t = state.t + 1
    m = ADAM_BETA1 * state.m + (1.0 - ADAM_BETA1) * grad
    v = ADAM_BETA2 * state.v + (1.0 - ADAM_BETA2) * grad * grad
    m_hat = m / (1.0 - ADAM_BETA1 ** t)
    v_hat = v / (1.0 - ADAM_BETA2 ** t)
    theta = theta - lr * m_hat / (np.sqrt(v_hat) + ADAM_EPS)
    return theta, AdamState(m=m, v=v, t=t)


@dataclass
class EpochResult:
    params: ModelParams
    opt_state: AdamState
    loss: float
    val_accuracy: float
    probs: np.ndarray   # post-step forward output, reusable for test metrics


def train_epoch(params: ModelParams, g: Graph, cfg: TrainConfig,
                opt_state: AdamState | None = None, epoch: int = 0,
                dropout_rng: np.random.Generator | None = None) -> EpochResult:
    """One full-batch Adam step; validation accuracy is measured after it."""
    gset = loss_and_gradients(params, g, cfg, dropout_rng=dropout_rng)
    if not np.isfinite(gset.loss):
        raise DivergenceError(f"non-finite training loss at epoch {epoch}", epoch=epoch)
    theta = params_to_vector(params)
    if opt_state is None:
        opt_state = AdamState.zeros(theta.size)
    theta, opt_state = adam_step(theta, gset.to_vector(), opt_state, cfg.lr)
    new_params = vector_to_params(theta, params)
    probs = model_forward(new_params, g)
    val_acc = (accuracy_from_probs(probs, g.labels, g.val_mask)
               if g.val_mask.any() else float("nan"))
    return EpochResult(params=new_params, opt_state=opt_state, loss=gset.loss,
                       val_accuracy=val_acc, probs=probs)


def accuracy_from_probs(probs: np.ndarray, labels: np.ndarray, mask) -> float:
    idx = np.flatnonzero(np.asarray(mask, dtype=bool)) if np.asarray(mask).dtype == bool \
        else np.asarray(mask, dtype=np.int64)
    if idx.size == 0:
        raise EmptyMaskError("accuracy over an empty node subset")
    pred = np.argmax(probs[idx], axis=1)   # argmax ties break to the lowest class
    return float(np.mean(pred == np.asarray(labels)[idx]))


def evaluate(params: ModelParams, g: Graph, mask) -> float:
    """Fraction of masked nodes whose argmax prediction matches the label."""
    return accuracy_from_probs(model_forward(params, g), g.labels, mask)


def gradient_check(params: ModelParams, g: Graph, cfg: TrainConfig,
                   step: float = 1e-5, num_coords: int | None = None,
                   rng: np.random.Generator | None = None):
    """Finite-difference verification of the full training-loss gradient."""
    template = params

    def loss_and_grad(theta):
        p = vector_to_params(theta, template)
        gset = loss_and_gradients(p, g, cfg)
        return gset.loss, gset.to_vector()

    return numerics.finite_difference_check(
        loss_and_grad, params_to_vector(params), step=step,
        num_coords=num_coords, rng=rng,
    )


# --------------------------------------------------------------------------
# Checkpoints
# --------------------------------------------------------------------------

CHECKPOINT_VERSION = 1


def save_params(params: ModelParams, path) -> None:
    """JSON checkpoint; float repr round-trips bit-exactly."""
    doc = {
        "version": CHECKPOINT_VERSION,
        "layers": [
            {
                "combine": layer.combine,
                "in_dim": layer.in_dim,
                "out_dim": layer.out_dim,
                "heads": [
                    {"W": h.W.tolist(), "a": h.a.tolist()} for h in layer.heads
                ],
            }
            for layer in params.layers
        ],
    }
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(doc, fh)


def load_params(path) -> ModelParams:
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {doc.get('version')!r}")
    layers = []
    for spec in doc["layers"]:
        heads = tuple(
            AttentionHead(W=np.asarray(h["W"], dtype=np.float64),
                          a=np.asarray(h["a"], dtype=np.float64))
            for h in spec["heads"]
        )
        layers.append(GatLayerParams(heads=heads, combine=spec["combine"]))
    return ModelParams(layers=tuple(layers))
