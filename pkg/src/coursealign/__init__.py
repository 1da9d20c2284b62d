"""Cross-institution course embedding alignment and articulation discovery."""
from __future__ import annotations

__version__ = "0.1.0"

from .catalog import (
    ArticulationPair,
    Catalog,
    Course,
    EnrollmentSequence,
    FoldAssignment,
    Institution,
    fanout_stats,
    institution_of,
    load_articulations,
    load_catalog,
    load_enrollments,
    make_folds,
    segment_breakdown,
)
from .course2vec import Course2vecConfig, train_course2vec
from .dispersion import DispersionReport, dispersion_report, effective_radius
from .embed import (
    EmbeddingTable,
    PlantedSpec,
    compose,
    l2_normalize,
    load_embeddings,
    prepare_tables,
    save_embeddings,
    synthetic_embeddings,
)
from .predict import EvalReport, RankedCandidates, cross_validate, rank_candidates, recall_at_k
from .ssa import (
    AlignmentModel,
    SsaConfig,
    alignment_loss,
    decode_to,
    encode_shared,
    identity_model,
    load_model,
    nearest_orthogonal,
    save_model,
    train_ssa,
)
from .threshold import (
    ExpansionResult,
    ThresholdReport,
    best_threshold,
    expand,
    project_adoption,
    roc_auc,
    sample_pseudo_negatives,
)

__all__ = [
    "__version__",
    "ArticulationPair",
    "Catalog",
    "Course",
    "EnrollmentSequence",
    "FoldAssignment",
    "Institution",
    "fanout_stats",
    "institution_of",
    "load_articulations",
    "load_catalog",
    "load_enrollments",
    "make_folds",
    "segment_breakdown",
    "Course2vecConfig",
    "train_course2vec",
    "DispersionReport",
    "dispersion_report",
    "effective_radius",
    "EmbeddingTable",
    "PlantedSpec",
    "compose",
    "l2_normalize",
    "load_embeddings",
    "prepare_tables",
    "save_embeddings",
    "synthetic_embeddings",
    "EvalReport",
    "RankedCandidates",
    "cross_validate",
    "rank_candidates",
    "recall_at_k",
    "AlignmentModel",
    "SsaConfig",
    "alignment_loss",
    "decode_to",
    "encode_shared",
    "identity_model",
    "load_model",
    "nearest_orthogonal",
    "save_model",
    "train_ssa",
    "ExpansionResult",
    "ThresholdReport",
    "best_threshold",
    "expand",
    "project_adoption",
    "roc_auc",
    "sample_pseudo_negatives",
]
