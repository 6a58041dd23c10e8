"""capforge: curation engine for image-text pools.

Filtering, caption mixing, and caption-quality analysis over precomputed
embeddings, plus a deterministic synthetic pool generator that makes every
procedure verifiable at desk scale.
"""

from .curation import (
    ClusterParams,
    CuratedSet,
    FilterSpec,
    StrategySpec,
    apply_strategy,
    in1k_cluster_mask,
    kmeans,
    threshold_filter,
    top_fraction,
)
from .errors import (
    CapforgeError,
    ConfigError,
    DataError,
    DomainError,
    FormatError,
    IntegrityError,
)
from .pool import (
    CaptionVariant,
    PoolHandle,
    PoolManifest,
    Record,
    ScoreTable,
    SelectionMask,
    materialize,
    open_pool,
    validate_pool,
    write_pool,
)
from .poolgen import GenConfig, SynSource, attach_alignment, embed_concept, generate_pool
from .report import MetricConfig, QualityReport, SweepResult, run_report, run_sweep
from .scoring import clip_s, cosine, recall_at_1, score_pool, select_best_variant
from .textmetrics import (
    diversity_curve,
    grounding_ratio,
    sample_subset,
    tokenize,
    unique_nouns,
    unique_trigrams,
    word_count,
)

__version__ = "0.1.0"
