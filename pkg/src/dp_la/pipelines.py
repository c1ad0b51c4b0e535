"""The three DP insertion points around the logistic classifier.

* Input perturbation: i.i.d. Gaussian noise on the [0, 1]-normalized training
  features before ordinary training (untrusted-collector stage).
* Objective perturbation: private empirical risk minimization; a random linear
  term is added to the regularized training objective so the released weights
  themselves satisfy epsilon-DP.
* Prediction perturbation: a partitioned teacher ensemble releasing only
  noisy-argmax vote labels per query (teacher-aggregation scheme; no student
  model is trained).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable

import numpy as np

from .data import Dataset, FourWaySplit
from .mechanisms import (
    NoiseKind,
    PrivacyBudget,
    RngState,
    Sensitivity,
    SensitivityNorm,
    gaussian_sigma,
    sample_laplace,
)
from .model import LogisticModel, TrainConfig, _fit, predict, predict_proba, train

__all__ = [
    "DpMethod",
    "TeacherEnsemble",
    "PrivateModelArtifact",
    "PipelineResult",
    "input_perturb",
    "objective_perturb_train",
    "pate_train",
    "pate_predict",
    "pate_vote_fraction",
    "run_pipeline",
    "private_proba_fn",
]

# Logistic loss curvature bound used by the private ERM recipe.
_CURVATURE = 0.25


class DpMethod(Enum):
    INPUT_PERTURBATION = "input_perturbation"
    OBJECTIVE_PERTURBATION = "objective_perturbation"
    PREDICTION_PERTURBATION = "prediction_perturbation"


@dataclass(frozen=True)
class TeacherEnsemble:
    """Disjoint-shard logistic teachers whose noisy votes are the only release."""

    teachers: tuple[LogisticModel, ...]
    partition: tuple[np.ndarray, ...]
    num_teachers: int

    def __post_init__(self) -> None:
        if len(self.teachers) != self.num_teachers or len(self.partition) != self.num_teachers:
            raise ValueError("teacher/partition counts disagree with num_teachers")


@dataclass(frozen=True)
class PrivateModelArtifact:
    method: DpMethod
    budget: PrivacyBudget
    payload: LogisticModel | TeacherEnsemble
    noise_kind: NoiseKind
    metadata: dict

    def __post_init__(self) -> None:
        gaussian = self.noise_kind is NoiseKind.GAUSSIAN
        if gaussian != (self.method is DpMethod.INPUT_PERTURBATION):
            raise ValueError("noise_kind must be Gaussian exactly for input perturbation")
        wants_ensemble = self.method is DpMethod.PREDICTION_PERTURBATION
        if wants_ensemble != isinstance(self.payload, TeacherEnsemble):
            raise ValueError("payload variant does not match the DP method")


@dataclass(frozen=True)
class PipelineResult:
    artifact: PrivateModelArtifact
    private_train_predictions: np.ndarray
    private_test_predictions: np.ndarray


def input_perturb(train_features: np.ndarray, budget: PrivacyBudget, rng: RngState) -> np.ndarray:
    """Add i.i.d. Gaussian noise (per-cell sensitivity 1) to normalized features.

    Cells must already lie in [0, 1]; the noised output is deliberately not
    clipped back, since clipping would bias the mechanism.
    """
    features = np.asarray(train_features, dtype=float)
    if features.size and (features.min() < -1e-9 or features.max() > 1.0 + 1e-9):
        raise ValueError("input perturbation requires [0, 1]-normalized features")
    sigma = gaussian_sigma(Sensitivity(1.0, SensitivityNorm.L2), budget)
    return features + rng.generator.normal(0.0, sigma, size=features.shape)


def _erm_noise_budget(epsilon: float, n: int, lam: float) -> tuple[float, float]:
    """Split the budget per the private ERM recipe.

    Returns (epsilon_prime, extra_regularization). When the headline budget is
    too small for the given n*lam, regularization is raised instead and half
    the budget goes to the noise term.
    """
    eps_prime = epsilon - 2.0 * math.log(1.0 + _CURVATURE / (n * lam))
    if eps_prime > 0:
        return eps_prime, 0.0
    delta_lam = _CURVATURE / (n * (math.exp(epsilon / 4.0) - 1.0)) - lam
    return epsilon / 2.0, delta_lam


def objective_perturb_train(
    features: np.ndarray,
    labels: np.ndarray,
    budget: PrivacyBudget,
    config: TrainConfig,
    rng: RngState,
) -> LogisticModel:
    """Train logistic regression privately via a noisy linear objective term.

    Implements the standard private ERM recipe for logistic loss: rows are
    rescaled to unit L2 norm bound (by 1/sqrt(d) when needed), the budget is
    reduced to eps' = eps - 2 ln(1 + c/(n lam)) with curvature bound c = 1/4
    (falling back to extra regularization when eps' <= 0), and a noise vector
    with ||b|| ~ Gamma(d, 2/eps') in a uniformly random direction is added as
    (1/n) b.w to the objective before minimizing with the shared trainer.
    """
    if budget.delta != 0.0:
        raise ValueError("objective perturbation is a pure epsilon-DP mechanism; delta must be 0")
    if config.lam <= 0:
        raise ValueError("objective perturbation requires a strictly positive regularizer")
    features = np.asarray(features, dtype=float)
    labels = np.asarray(labels)
    n, d = features.shape
    if n == 0 or d == 0:
        raise ValueError("empty training matrix")

    max_norm = float(np.sqrt((features**2).sum(axis=1)).max()) if n else 0.0
    rescale = math.sqrt(d) if max_norm > 1.0 else 1.0
    if max_norm / rescale > 1.0 + 1e-9:
        raise ValueError(
            "row norms exceed 1 even after the 1/sqrt(d) rescale; features must be [0, 1]-normalized"
        )

    eps_prime, delta_lam = _erm_noise_budget(budget.epsilon, n, config.lam)
    lam_eff = config.lam + delta_lam

    direction = rng.generator.normal(size=d)
    direction /= np.linalg.norm(direction)
    b_norm = float(rng.generator.gamma(shape=d, scale=2.0 / eps_prime))
    noise = b_norm * direction

    # The recipe is stated on unit-norm-bounded rows x/rescale with weights w'.
    # Substituting w' = rescale * w turns it into an equivalent objective on the
    # original features with regularizer lam_eff * rescale^2 and linear term
    # rescale * b, which the shared trainer minimizes with the exact same
    # dynamics as the non-private baseline (so the only difference at huge
    # epsilon is the slightly stronger regularizer).
    y_pm = np.where(labels == 1, 1.0, -1.0)
    w, bias, j_final = _fit(
        features,
        y_pm,
        lam_eff * rescale**2,
        config.epochs,
        config.learning_rate,
        linear_term=rescale * noise,
    )
    return LogisticModel(weights=w, bias=bias, config=config, final_objective=j_final)


def pate_train(
    features: np.ndarray,
    labels: np.ndarray,
    num_teachers: int,
    config: TrainConfig,
    rng: RngState,
) -> TeacherEnsemble:
    """Partition the training rows into disjoint near-equal shards and train
    one logistic teacher per shard.

    Shards must each contain both classes; the shuffle is retried up to 10
    times before giving up.
    """
    features = np.asarray(features, dtype=float)
    labels = np.asarray(labels)
    n = features.shape[0]
    if num_teachers < 2:
        raise ValueError(f"num_teachers must be at least 2, got {num_teachers}")
    if num_teachers > n / 4:
        raise ValueError(f"num_teachers={num_teachers} leaves shards below 4 rows for n={n}")

    for attempt in range(10):
        order = rng.substream("pate-shuffle", attempt).generator.permutation(n)
        shards = np.array_split(order, num_teachers)
        if all(np.unique(labels[s]).size == 2 for s in shards):
            break
    else:
        raise ValueError("could not shard the data with both classes per teacher after 10 shuffles")

    teachers = []
    for shard in shards:
        y_pm = np.where(labels[shard] == 1, 1.0, -1.0)
        w, b, j = _fit(features[shard], y_pm, config.lam, config.epochs, config.learning_rate)
        teachers.append(LogisticModel(weights=w, bias=b, config=config, final_objective=j))
    return TeacherEnsemble(
        teachers=tuple(teachers),
        partition=tuple(np.sort(s) for s in shards),
        num_teachers=num_teachers,
    )


def _teacher_votes(ensemble: TeacherEnsemble, features: np.ndarray) -> np.ndarray:
    """Per-row count of teachers voting class 1."""
    if not ensemble.teachers:
        raise ValueError("empty teacher ensemble")
    votes = np.zeros(features.shape[0])
    for teacher in ensemble.teachers:
        votes += predict(teacher, features)
    return votes


def pate_predict(
    ensemble: TeacherEnsemble,
    features: np.ndarray,
    budget: PrivacyBudget,
    rng: RngState,
) -> np.ndarray:
    """Noisy-argmax label release: per row, add independent Lap(2/eps) to each
    class's vote count and return the winner (post-noise ties go to class 1).

    epsilon is spent per query; the caller is responsible for composition
    accounting across queries.
    """
    if budget.delta != 0.0:
        raise ValueError("prediction perturbation is a pure epsilon-DP mechanism; delta must be 0")
    n1 = _teacher_votes(ensemble, np.asarray(features, dtype=float))
    n0 = ensemble.num_teachers - n1
    scale = 2.0 / budget.epsilon
    noisy0 = n0 + np.asarray(sample_laplace(scale, rng, size=n1.shape[0]))
    noisy1 = n1 + np.asarray(sample_laplace(scale, rng, size=n1.shape[0]))
    return (noisy1 >= noisy0).astype(int)


def pate_vote_fraction(
    ensemble: TeacherEnsemble,
    features: np.ndarray,
    budget: PrivacyBudget,
    rng: RngState,
) -> np.ndarray:
    """Noisy class-1 vote fraction in [0, 1], fresh Lap(2/eps) noise per row.

    This is the probability-like release an adversary can observe from the
    ensemble, used when auditing prediction-perturbed models.
    """
    n1 = _teacher_votes(ensemble, np.asarray(features, dtype=float))
    scale = 2.0 / budget.epsilon
    noisy = n1 + np.asarray(sample_laplace(scale, rng, size=n1.shape[0]))
    return np.clip(noisy / ensemble.num_teachers, 0.0, 1.0)


def run_pipeline(
    method: DpMethod,
    dataset: Dataset,
    split: FourWaySplit,
    budget: PrivacyBudget,
    config: TrainConfig,
    rng: RngState,
    num_teachers: int = 10,
) -> PipelineResult:
    """Run one DP configuration end to end on the victim half.

    Always returns predictions on both victim_train (needed by the audit) and
    victim_test (needed for utility scoring).
    """
    X_train = dataset.features[split.victim_train]
    y_train = dataset.labels[split.victim_train]
    X_test = dataset.features[split.victim_test]

    if method is DpMethod.INPUT_PERTURBATION:
        if budget.delta <= 0.0:
            raise ValueError("input perturbation uses the Gaussian mechanism; delta must be > 0")
        sigma = gaussian_sigma(Sensitivity(1.0, SensitivityNorm.L2), budget)
        noised = input_perturb(X_train, budget, rng.substream("input-noise"))
        model = train(noised, y_train, config)
        artifact = PrivateModelArtifact(
            method=method,
            budget=budget,
            payload=model,
            noise_kind=NoiseKind.GAUSSIAN,
            metadata={"seed": config.seed, "sigma": sigma},
        )
        return PipelineResult(artifact, predict(model, X_train), predict(model, X_test))

    if method is DpMethod.OBJECTIVE_PERTURBATION:
        model = objective_perturb_train(X_train, y_train, budget, config, rng.substream("erm-noise"))
        eps_prime, delta_lam = _erm_noise_budget(budget.epsilon, X_train.shape[0], config.lam)
        artifact = PrivateModelArtifact(
            method=method,
            budget=budget,
            payload=model,
            noise_kind=NoiseKind.LAPLACE,
            metadata={
                "seed": config.seed,
                "epsilon_prime": eps_prime,
                "extra_regularization": delta_lam,
            },
        )
        return PipelineResult(artifact, predict(model, X_train), predict(model, X_test))

    if method is DpMethod.PREDICTION_PERTURBATION:
        if budget.delta != 0.0:
            raise ValueError("prediction perturbation uses Laplace noise; delta must be 0")
        ensemble = pate_train(X_train, y_train, num_teachers, config, rng.substream("pate-train"))
        vote_rng = rng.substream("pate-votes")
        train_pred = pate_predict(ensemble, X_train, budget, vote_rng)
        test_pred = pate_predict(ensemble, X_test, budget, vote_rng)
        n_queries = train_pred.shape[0] + test_pred.shape[0]
        artifact = PrivateModelArtifact(
            method=method,
            budget=budget,
            payload=ensemble,
            noise_kind=NoiseKind.LAPLACE,
            metadata={
                "seed": config.seed,
                "num_teachers": num_teachers,
                "queries_answered": n_queries,
                "composed_epsilon": budget.epsilon * n_queries,
            },
        )
        return PipelineResult(artifact, train_pred, test_pred)

    raise ValueError(f"unknown DP method: {method}")


def private_proba_fn(artifact: PrivateModelArtifact, rng: RngState) -> Callable[[np.ndarray], np.ndarray]:
    """Probability-like release function of an artifact, as the audit sees it.

    For input/objective perturbation this is the released model's sigmoid
    output; for prediction perturbation it is the noisy vote fraction with
    fresh per-row noise.
    """
    if artifact.method is DpMethod.PREDICTION_PERTURBATION:
        ensemble = artifact.payload
        vote_rng = rng.substream("audit-votes")

        def proba(features: np.ndarray) -> np.ndarray:
            return pate_vote_fraction(ensemble, features, artifact.budget, vote_rng)

        return proba

    model = artifact.payload

    def proba(features: np.ndarray) -> np.ndarray:
        return predict_proba(model, features)

    return proba
