"""Adaptation driver: entropy partition, pseudo-target construction,
progressive refinement and nuclear-norm model selection.

Nothing on the adaptation path sees target labels.  Ground truth enters
only through the optional ``evaluate`` callback, which produces the
eval-only accuracy fields of :class:`IterationMetrics`.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .classifier import SoftmaxClassifier, TrainConfig, entropy, nuclear_norm, predict_probs, train_ce
from .errors import ConfigError, ValidationError
from .manipulate import ManipulatedSample, ManipulationConfig, manipulate_set
from .oracle import MixtureWorld
from .rng import child_seed

log = logging.getLogger(__name__)

DEFAULT_E = 0.01
DEFAULT_R = 10


@dataclass(frozen=True)
class PartitionResult:
    samples: np.ndarray = field(repr=False)  # (N, n, n) in dataset order
    pseudo_labels: np.ndarray = field(repr=False)  # argmax for every sample
    entropies: np.ndarray = field(repr=False)
    threshold_E: float
    trust_idx: np.ndarray = field(repr=False)
    non_trust_idx: np.ndarray = field(repr=False)

    @property
    def trust(self):
        """List of ``(sample, pseudo_label, entropy)``."""
        return [(self.samples[i], int(self.pseudo_labels[i]), float(self.entropies[i])) for i in self.trust_idx]

    @property
    def non_trust(self):
        """List of ``(sample, entropy)``."""
        return [(self.samples[i], float(self.entropies[i])) for i in self.non_trust_idx]

    @property
    def N_v(self) -> int:
        return int(self.trust_idx.size)

    @property
    def N_u(self) -> int:
        return int(self.non_trust_idx.size)


@dataclass(frozen=True)
class IterationMetrics:
    r: int
    trust_size: int
    non_trust_size: int
    manipulated_size: int
    trust_accuracy: float = float("nan")
    target_accuracy: float = float("nan")


@dataclass(frozen=True)
class RefinementState:
    r: int
    model: SoftmaxClassifier
    history: tuple = ()


@dataclass(frozen=True)
class AdaptationContext:
    """Everything a refinement iteration needs besides the state."""

    world: MixtureWorld
    manipulation: ManipulationConfig
    train: TrainConfig
    E: float = DEFAULT_E
    seed: int = 0
    trace_samples: int = 0  # leading manipulated samples per iteration whose trajectories are kept

    def __post_init__(self):
        if not self.E >= 0:
            raise ConfigError(f"threshold must be >= 0, got {self.E}", "E")


# Signature: (model, partition) -> dict with optional trust_accuracy / target_accuracy.
Evaluator = Callable[[SoftmaxClassifier, PartitionResult], dict]
# Signature: (r, partition, manipulated samples) -> None.
Observer = Callable[[int, PartitionResult, list], None]


def partition(model: SoftmaxClassifier, targets, E: float = DEFAULT_E) -> PartitionResult:
    """Trust iff prediction entropy (nats) <= E; dataset order is kept within each set."""
    if not E >= 0:
        raise ConfigError(f"threshold must be >= 0, got {E}", "E")
    X = np.asarray(targets, dtype=np.float64)
    if X.ndim != 3 or X.shape[0] == 0:
        raise ValidationError("target set must be a nonempty stack of grids")
    P = predict_probs(model, X)
    H = entropy(P, validate=False)
    labels = np.argmax(P, axis=1)
    trusted = H <= E
    return PartitionResult(X, labels, H, float(E), np.flatnonzero(trusted), np.flatnonzero(~trusted))


def build_pseudo_target(part: PartitionResult, manipulated: Sequence[ManipulatedSample], C: Optional[int] = None):
    """``(X, y)`` of trust samples with pseudo-labels followed by manipulated samples."""
    n = part.samples.shape[-1]
    Xv = part.samples[part.trust_idx]
    yv = part.pseudo_labels[part.trust_idx]
    Xm = np.stack([m.output for m in manipulated]) if manipulated else np.empty((0, n, n))
    ym = np.array([m.assigned_label for m in manipulated], dtype=np.int64)
    y = np.concatenate([yv.astype(np.int64), ym])
    if C is not None and (np.any(y < 0) or np.any(y >= C)):
        raise ValidationError(f"pseudo-target labels must lie in [0, {C})")
    return np.concatenate([Xv, Xm]), y


def refine_once(
    state: RefinementState,
    targets,
    ctx: AdaptationContext,
    evaluate: Optional[Evaluator] = None,
    observe: Optional[Observer] = None,
) -> RefinementState:
    """Partition with the current model, manipulate the non-trust set, fine-tune."""
    r = state.r + 1
    part = partition(state.model, targets, ctx.E)
    C = state.model.C
    U = part.samples[part.non_trust_idx]
    manipulated = manipulate_set(
        U, C, ctx.manipulation, ctx.world, seed=child_seed(ctx.seed, "manipulate", r), trace=ctx.trace_samples
    )
    if observe is not None:
        observe(r, part, manipulated)
    X, y = build_pseudo_target(part, manipulated, C)
    if len(y) == 0:
        log.warning("iteration %d: empty pseudo-target domain, model unchanged", r)
        model = state.model
    else:
        model = train_ce(state.model, X, y, replace(ctx.train, seed=child_seed(ctx.seed, "adapt-train", r)))
    metrics = IterationMetrics(r, part.N_v, part.N_u, len(manipulated))
    if evaluate is not None:
        extra = evaluate(model, part)
        metrics = replace(metrics, **extra)
    log.info("iteration %d: trust=%d non_trust=%d manipulated=%d", r, part.N_v, part.N_u, len(manipulated))
    return RefinementState(r, model, state.history + (metrics,))


def run_refinement(
    source_model: SoftmaxClassifier,
    targets,
    R: int,
    ctx: AdaptationContext,
    evaluate: Optional[Evaluator] = None,
    on_iteration: Optional[Callable[[RefinementState], None]] = None,
    observe: Optional[Observer] = None,
) -> RefinementState:
    """Initialize the target model from the source model and refine ``R`` times."""
    if int(R) != R or R < 0:
        raise ConfigError(f"R must be a nonnegative integer, got {R}", "R")
    state = RefinementState(0, source_model)
    for _ in range(int(R)):
        state = refine_once(state, targets, ctx, evaluate, observe)
        if on_iteration is not None:
            on_iteration(state)
    return state


def select_model(candidates: Sequence) -> int:
    """Index of the candidate with the largest nuclear norm; ties go to the lowest index.

    Each candidate is either a probability matrix or a ``(model, matrix)`` pair.
    """
    if len(candidates) == 0:
        raise ValidationError("no candidates to select from")
    norms = []
    for cand in candidates:
        P = cand[1] if isinstance(cand, tuple) else cand
        norms.append(nuclear_norm(P))
    return int(np.argmax(norms))


def label_evaluator(y_true) -> Evaluator:
    """Eval-only metrics against held ground truth (synthetic setting only)."""
    y_true = np.asarray(y_true)

    def evaluate(model: SoftmaxClassifier, part: PartitionResult) -> dict:
        trust = part.trust_idx
        trust_acc = float(np.mean(part.pseudo_labels[trust] == y_true[trust])) if trust.size else float("nan")
        pred = np.argmax(predict_probs(model, part.samples), axis=1)
        return {"trust_accuracy": trust_acc, "target_accuracy": float(np.mean(pred == y_true))}

    return evaluate
