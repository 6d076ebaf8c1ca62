"""Adversarial testing of robust individual fairness on tabular classifiers."""

from fairattack.dataset import (
    Dataset,
    EncodedVector,
    FeatureSchema,
    FeatureSpec,
    Instance,
    SimilarSet,
    distance_d,
    encode,
    enumerate_similar,
    load_csv,
    load_schema,
    split,
)
from fairattack.attack import AttackConfig, AttackMode, AttackResult, adf_baseline, fgsm_baseline, rifair_attack
from fairattack.diagnostics import TrajectoryStep, check_flip_theorems, compute_pii_pid, verify_decomposition
from fairattack.evaluation import EvalReport, OutcomeClass, RifCheckConfig, aggregate, classify_outcome, estimate_k_emp
from fairattack.manipulation import Strategy, build_pool, manipulate, manipulation_table
from fairattack.model import MlpParams, Prediction, TrainConfig, forward, input_gradient, predict_label, train
from fairattack.pipeline import RunSettings, attack_all, attack_instance

__version__ = "0.1.0"

__all__ = [
    "AttackConfig",
    "AttackMode",
    "AttackResult",
    "Dataset",
    "EncodedVector",
    "EvalReport",
    "FeatureSchema",
    "FeatureSpec",
    "Instance",
    "MlpParams",
    "OutcomeClass",
    "Prediction",
    "RifCheckConfig",
    "RunSettings",
    "SimilarSet",
    "Strategy",
    "TrainConfig",
    "TrajectoryStep",
    "adf_baseline",
    "aggregate",
    "attack_all",
    "attack_instance",
    "build_pool",
    "check_flip_theorems",
    "classify_outcome",
    "compute_pii_pid",
    "distance_d",
    "encode",
    "enumerate_similar",
    "estimate_k_emp",
    "fgsm_baseline",
    "forward",
    "input_gradient",
    "load_csv",
    "load_schema",
    "manipulate",
    "manipulation_table",
    "predict_label",
    "rifair_attack",
    "split",
    "train",
    "verify_decomposition",
]
