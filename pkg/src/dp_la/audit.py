"""Privacy audit: shadow-model membership-inference attack and the derived
metrics (utility loss, privacy leakage, true revealed records).

The attack half of the four-way split never touches the victim's rows during
attack training: a shadow model mimicking the victim's architecture is trained
on attack_train, its confidence vectors over attack_train (members) and
attack_test (non-members) form the attack classifier's training set, and only
then is the attack pointed at the victim's released probabilities.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .data import Dataset, FourWaySplit
from .model import LogisticModel, TrainConfig, predict, predict_proba, train
from .pipelines import DpMethod

__all__ = [
    "AttackModel",
    "MiaOutcome",
    "AuditReport",
    "attack_features",
    "train_attack",
    "run_mia",
    "privacy_leakage",
    "utility_loss",
    "true_revealed_records",
    "build_report",
]


@dataclass(frozen=True)
class AttackModel:
    """Logistic membership classifier over (p_class0, p_class1, true_label)."""

    classifier: LogisticModel
    feature_layout: tuple[str, str, str] = ("p_class0", "p_class1", "true_label")


@dataclass(frozen=True)
class MiaOutcome:
    tpr: float
    fpr: float
    true_positive_count: int
    member_count: int
    nonmember_count: int

    def __post_init__(self) -> None:
        if self.true_positive_count > self.member_count:
            raise ValueError("true positives exceed the member pool")


@dataclass(frozen=True)
class AuditReport:
    """Metrics for one sweep cell."""

    acc_private: float
    acc_nonprivate: float
    utility_loss: float
    privacy_leakage: float
    true_revealed_records: int
    trr_rate: float
    tpr: float
    fpr: float
    method: DpMethod
    epsilon: float
    seed: int


def attack_features(prediction_probability: np.ndarray | float, true_label: np.ndarray | int) -> np.ndarray:
    """Per-row attack input [1 - p, p, y]; accepts scalars or vectors."""
    p = np.atleast_1d(np.asarray(prediction_probability, dtype=float))
    y = np.atleast_1d(np.asarray(true_label, dtype=float))
    if p.min() < 0.0 or p.max() > 1.0:
        raise ValueError("prediction probabilities must lie in [0, 1]")
    return np.column_stack([1.0 - p, p, y])


def train_attack(
    shadow_model: LogisticModel,
    dataset: Dataset,
    split: FourWaySplit,
    config: TrainConfig,
) -> AttackModel:
    """Train the membership classifier on the attack half.

    attack_train rows are labeled member=1, attack_test rows member=0, with
    features taken from the shadow model's probabilities. The victim half is
    never read here.
    """
    if shadow_model.weights.shape[0] != dataset.n_features:
        raise ValueError("shadow model dimension does not match the dataset")
    if split.attack_train.size == 0 or split.attack_test.size == 0:
        raise ValueError("attack split must contain both members and non-members")

    member_X = attack_features(
        predict_proba(shadow_model, dataset.features[split.attack_train]),
        dataset.labels[split.attack_train],
    )
    nonmember_X = attack_features(
        predict_proba(shadow_model, dataset.features[split.attack_test]),
        dataset.labels[split.attack_test],
    )
    X = np.vstack([member_X, nonmember_X])
    y = np.concatenate([
        np.ones(member_X.shape[0], dtype=int),
        np.zeros(nonmember_X.shape[0], dtype=int),
    ])
    return AttackModel(classifier=train(X, y, config))


def run_mia(
    attack: AttackModel,
    victim_predict_proba: Callable[[np.ndarray], np.ndarray],
    dataset: Dataset,
    split: FourWaySplit,
) -> MiaOutcome:
    """Attack every victim row: victim_train rows are the true members,
    victim_test rows the true non-members."""
    if split.victim_train.size == 0 or split.victim_test.size == 0:
        raise ValueError("victim split parts must be non-empty")

    def flags(indices: np.ndarray) -> np.ndarray:
        probs = np.asarray(victim_predict_proba(dataset.features[indices]), dtype=float)
        feats = attack_features(probs, dataset.labels[indices])
        return predict(attack.classifier, feats)

    member_flags = flags(split.victim_train)
    nonmember_flags = flags(split.victim_test)
    tp = int(member_flags.sum())
    fp = int(nonmember_flags.sum())
    member_count = int(split.victim_train.size)
    nonmember_count = int(split.victim_test.size)
    return MiaOutcome(
        tpr=tp / member_count,
        fpr=fp / nonmember_count,
        true_positive_count=tp,
        member_count=member_count,
        nonmember_count=nonmember_count,
    )


def privacy_leakage(outcome: MiaOutcome) -> float:
    """TPR - FPR: 0 means the attack leaks nothing, 1 a fully successful attack;
    negative values mean the attack does worse than chance."""
    return outcome.tpr - outcome.fpr


def utility_loss(acc_private: float, acc_nonprivate: float) -> float:
    """Non-private minus private accuracy, so positive values mean degradation."""
    if not (0.0 <= acc_private <= 1.0 and 0.0 <= acc_nonprivate <= 1.0):
        raise ValueError("accuracies must lie in [0, 1]")
    return acc_nonprivate - acc_private


def true_revealed_records(outcome: MiaOutcome) -> int:
    """Raw count of member rows the attack correctly flags."""
    return outcome.true_positive_count


def build_report(
    *,
    acc_private: float,
    acc_nonprivate: float,
    outcome: MiaOutcome,
    method: DpMethod,
    epsilon: float,
    seed: int,
) -> AuditReport:
    """Assemble the per-cell report; the metric identities live in one place."""
    return AuditReport(
        acc_private=acc_private,
        acc_nonprivate=acc_nonprivate,
        utility_loss=utility_loss(acc_private, acc_nonprivate),
        privacy_leakage=privacy_leakage(outcome),
        true_revealed_records=true_revealed_records(outcome),
        trr_rate=outcome.true_positive_count / outcome.member_count,
        tpr=outcome.tpr,
        fpr=outcome.fpr,
        method=method,
        epsilon=epsilon,
        seed=seed,
    )
