"""fedgat: a desk-scale federated graph-attention learning simulator.

The package trains a fixed 3-layer graph attention model on each simulated
client, periodically blends per-layer weight parameters across clients
(unweighted averaging or accuracy-feedback dynamic weighting), optionally
noises shared parameters with the Laplace mechanism, and evaluates
membership-inference risk with confidence-threshold attacks.
"""

from .errors import (
    AggregationError,
    ConfigError,
    DegenerateNeighborhoodError,
    DeterminismError,
    DimensionError,
    DivergenceError,
    EmptyMaskError,
    FeatureConflictError,
    FedgatError,
    FormatError,
    IllPosedAttackError,
    InfeasiblePartitionError,
    ReferentialIntegrityError,
)
from .federation import (
    AggregationPlan,
    ClientState,
    DynamicWeights,
    FederationResult,
    RoundLog,
    RoundRecord,
    baseline_alone,
    baseline_full,
    bytes_shared,
    dynamic_aggregate,
    fedavg_aggregate,
    run_federation,
    update_dynamic_weights,
)
from .gat import (
    AttentionHead,
    GatLayerParams,
    GradientSet,
    ModelParams,
    TrainConfig,
    attention_coefficients,
    evaluate,
    gradient_check,
    init_params,
    layer_forward,
    load_params,
    model_forward,
    save_params,
    train_epoch,
)
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
    write_partition,
)
from .numerics import (
    cross_entropy,
    finite_difference_check,
    leaky_relu,
    masked_softmax,
    matmul,
)
from .privacy import (
    AttackConfig,
    AttackReport,
    DpConfig,
    ScenarioArtifact,
    apply_dp,
    attack_sweep,
    membership_attack,
    node_confidence,
    sensitivity,
    white_box_view,
)
from .seeding import rng_for

__version__ = "0.1.0"
