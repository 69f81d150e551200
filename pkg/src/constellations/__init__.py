"""Geometry, losses, bounds, and sphere-constrained training for paired
spherical embeddings."""

from .geometry import (
    ConstellationParams,
    EmbeddingSet,
    GramStats,
    PairedConfig,
    ValidationReport,
    XiReport,
    gram_stats,
    renormalize,
    trimmed_stats,
    unit_rows,
    validate_constellation,
    xi_report,
)
from .losses import (
    BatchMethod,
    Parameterization,
    batch_expected_sigmoid_loss,
    infonce_loss,
    loss_sandwich,
    multimodal_loss,
    rb_sigmoid_loss,
    sigmoid_loss,
    triplet_loss,
)
from .constructions import (
    LiftParams,
    MultiModalConfig,
    SphericalCode,
    SynchronizationGraph,
    adapter_identity_params,
    apply_locked_adapters,
    apply_modality_adapter,
    build_constellation,
    code_as_constellation,
    greedy_spherical_code,
    lift_constellation,
    multimodal_constellation,
    simplex,
    tightness_config,
)
from .bounds import (
    ExponentBounds,
    RegionLabel,
    averaged_gram_inequality_check,
    classify_region,
    exponent_bounds,
    lower_exponent,
    margin_feasibility,
    upper_exponent,
)
from .separation import (
    SeparationResult,
    caratheodory_reduce,
    modality_gap_certificate,
    perceptron_separator,
    positive_functional,
    project_to_hull,
)
from .retrieval import Direction, RetrievalReport, nn_retrieve, robustness_check
from .optimizer import (
    TrainConfig,
    TrainTrace,
    TrainableFlags,
    sweep_fixed_rel_bias,
    sweep_init,
    train,
    train_multimodal,
    train_with_explicit_adapters,
)

__all__ = [name for name in dir() if not name.startswith("_")]
