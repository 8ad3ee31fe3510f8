"""Partition-and-certify ensemble defense against poisoning and evasion.

Thin python surface over the C++ core: datasets, hash partitioning,
deterministic robust training, per-example certification, vote aggregation
with certified poisoning radii, the evaluation metrics, the backdoor attack
simulator, and the soundness audit.
"""

from ._pecan import (
    AggregateResult,
    AuditOptions,
    AuditReport,
    AuditViolation,
    CertRow,
    ConfigError,
    Dataset,
    Ensemble,
    Example,
    FormatError,
    IoError,
    MetricPoint,
    MlpModel,
    PoisonPlan,
    ResultRow,
    TriggerSpec,
    TrainConfig,
    abstention_rate,
    aggregate,
    apply_trigger,
    assign,
    attack_success_rate,
    audit_soundness,
    canonical_bytes,
    certified_accuracy,
    certify_dataset,
    certify_example,
    config_digest,
    crown_bounds,
    dpa_radius,
    forward,
    load_csv,
    load_ensemble,
    load_idx,
    metric_curve,
    normal_accuracy,
    partition,
    perturb_dataset,
    poison_dataset,
    predict,
    propagate_bounds,
    radius_to_modifications,
    robust_loss,
    save_csv,
    save_ensemble,
    select_trigger_features,
    symdiff_size,
    synth_blobs,
    train,
    train_ensemble,
)

__version__ = "0.1.0"

__all__ = [
    "AggregateResult",
    "AuditOptions",
    "AuditReport",
    "AuditViolation",
    "CertRow",
    "ConfigError",
    "Dataset",
    "Ensemble",
    "Example",
    "FormatError",
    "IoError",
    "MetricPoint",
    "MlpModel",
    "PoisonPlan",
    "ResultRow",
    "TriggerSpec",
    "TrainConfig",
    "abstention_rate",
    "aggregate",
    "apply_trigger",
    "assign",
    "attack_success_rate",
    "audit_soundness",
    "canonical_bytes",
    "certified_accuracy",
    "certify_dataset",
    "certify_example",
    "config_digest",
    "crown_bounds",
    "dpa_radius",
    "forward",
    "load_csv",
    "load_ensemble",
    "load_idx",
    "metric_curve",
    "normal_accuracy",
    "partition",
    "perturb_dataset",
    "poison_dataset",
    "predict",
    "propagate_bounds",
    "radius_to_modifications",
    "robust_loss",
    "save_csv",
    "save_ensemble",
    "select_trigger_features",
    "symdiff_size",
    "synth_blobs",
    "train",
    "train_ensemble",
]
