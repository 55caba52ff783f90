"""Graph dataset condensation with self-expressive structure reconstruction.

The package condenses a large node-classification graph into a small
synthetic graph (features, labels, and an explicit weighted adjacency) by
matching multi-step training dynamics of models trained on the real data,
and evaluates the result by training downstream graph models on it.
"""

from .data import (
    GraphDataset,
    NormalizedAdjacency,
    PropagatedFeatures,
    class_distribution,
    load_dataset,
    normalize_adjacency,
    propagate,
    save_dataset,
)
from .engine import (
    CondenseConfig,
    CondensedGraph,
    RegularizerState,
    UnrolledTape,
    bootstrap_update,
    condense,
    inner_train_unrolled,
    load_condensed,
    matching_loss,
    meta_gradient,
    save_condensed,
)
from .evaluation import (
    AccuracyReport,
    ccns,
    random_coreset,
    silhouette,
    test_stage,
)
from .initialization import (
    SyntheticLabels,
    allocate_labels,
    class_correlation,
    init_features,
    structure_prior,
)
from .models import (
    ModelParams,
    TrainConfig,
    evaluate,
    forward,
    init_params,
    load_checkpoint,
    loss_and_grad,
    save_checkpoint,
    train,
)
from .sbm import sbm_dataset, toy_dataset
from .selfexpr import SelfExpressiveProblem, solve, solve_iterative, symmetrize
from .trajectory import (
    TrajectoryBuffer,
    generate_expert_trajectories,
    load_buffer,
    sample_segment,
    save_buffer,
)

__version__ = "0.1.0"
