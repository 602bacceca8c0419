"""proxsel: proximity-based curation of candidate feature pools.

Scores every sample in a large candidate pool by closeness to a small
target-domain distribution (learned estimator plus hand-crafted baselines),
selects top-K manifests, and computes the supporting diagnostics: pairwise
MMD matrices, diversity, mixture composition, and distribution-shift
reports.
"""

from .baselines import (
    avg_distance_score,
    delta_perplexity,
    perplexity,
    score_store_baseline,
)
from .estimator import (
    ProximityEstimator,
    TrainConfig,
    TrainHistory,
    bce_gradient,
    bce_loss,
    load_estimator,
    save_estimator,
    score_sample,
    score_store,
    train_estimator,
)
from .mmd import MMDConfig, MMDMatrix, median_bandwidth, mmd_squared, pairwise_mmd_matrix, rbf_kernel
from .scores import HIGHER_IS_CLOSER, LOWER_IS_CLOSER, ScoreTable, read_score_table, write_score_table
from .selection import (
    CompositionReport,
    DiversityConfig,
    SelectionManifest,
    diversity,
    mixture_composition,
    read_manifest,
    score_histogram,
    selection_shift_report,
    top_k_select,
    write_manifest,
)
from .store import (
    FeatureRecord,
    FeatureStore,
    StoreError,
    StoreFormatError,
    ingest_jsonl,
    open_store,
    validate_store,
    write_store,
)
from .synth import (
    ComponentSpec,
    MixtureSpec,
    RecoveryReport,
    analytic_posterior,
    gen_mixture,
    multimodal_benchmark,
    recovery_eval,
    standard_benchmark,
    write_mixture,
)

__version__ = "0.1.0"
