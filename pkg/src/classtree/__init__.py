"""classtree: weight-space decision trees over linear classification heads.

Build a class hierarchy from a trained head's weight rows, run soft or hard
tree inference over features or logits, train heads with tree-supervision
losses, and analyze hierarchies (superclass generalization, path-entropy
ambiguity ranking, similarity probes, traversal statistics).
"""

from .analysis import (
    AmbiguityReport,
    SuperclassSpec,
    baseline_ambiguity_score,
    baseline_superclass_accuracy,
    max_similarity_examples,
    node_hypothesis_accuracy,
    path_entropy_score,
    rank_ambiguous,
    traversal_frequencies,
)
from .cluster import LINKAGES, induce_hierarchy, merge_sequence
from .dot import export_dot
from .errors import (
    ClasstreeError,
    FormatError,
    InvalidConfigError,
    InvalidInputError,
    TrainingFailureError,
)
from .fileio import read_matrix, write_matrix
from .hierarchy import (
    ClassWeights,
    Hierarchy,
    Node,
    NodeLabel,
    attach_weights,
    from_json_text,
    structurally_equal,
    to_json_text,
)
from .infogain import InfoGainTree, build_info_gain_hierarchy
from .inference import (
    FeatureBatch,
    LogitsBatch,
    NodeDistribution,
    PathResult,
    batch_predict,
    hard_predict,
    node_child_probs,
    soft_class_distribution,
    soft_predict,
    soft_predict_from_logits,
)
from .losses import (
    LossConfig,
    LossValue,
    combined_loss,
    hard_tree_loss,
    schedule_weights,
    soft_tree_loss,
)
from .taxonomy import Taxonomy, build_taxonomy_hierarchy, earliest_common_ancestor, label_nodes
from .training import HierarchyUpdate, TrainConfig, history_to_jsonl, train_linear_head

__version__ = "0.1.0"

__all__ = [
    "AmbiguityReport",
    "ClassWeights",
    "ClasstreeError",
    "FeatureBatch",
    "FormatError",
    "Hierarchy",
    "HierarchyUpdate",
    "InfoGainTree",
    "InvalidConfigError",
    "InvalidInputError",
    "LINKAGES",
    "LogitsBatch",
    "LossConfig",
    "LossValue",
    "Node",
    "NodeDistribution",
    "NodeLabel",
    "PathResult",
    "SuperclassSpec",
    "Taxonomy",
    "TrainConfig",
    "TrainingFailureError",
    "attach_weights",
    "baseline_ambiguity_score",
    "baseline_superclass_accuracy",
    "batch_predict",
    "build_info_gain_hierarchy",
    "build_taxonomy_hierarchy",
    "combined_loss",
    "earliest_common_ancestor",
    "export_dot",
    "from_json_text",
    "hard_predict",
    "hard_tree_loss",
    "history_to_jsonl",
    "induce_hierarchy",
    "label_nodes",
    "max_similarity_examples",
    "merge_sequence",
    "node_child_probs",
    "node_hypothesis_accuracy",
    "path_entropy_score",
    "rank_ambiguous",
    "read_matrix",
    "schedule_weights",
    "soft_class_distribution",
    "soft_predict",
    "soft_predict_from_logits",
    "soft_tree_loss",
    "structurally_equal",
    "to_json_text",
    "train_linear_head",
    "traversal_frequencies",
    "write_matrix",
]
