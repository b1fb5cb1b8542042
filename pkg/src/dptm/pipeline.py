"""End-to-end run: generate, train source, adapt, select, write artifacts.

All randomness comes from the run seed through named streams: ``data``,
``source-train``, and per-iteration ``manipulate`` / ``adapt-train``
children (per-sample streams hang off the manipulation seed).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from . import artifacts
from .adapt import AdaptationContext, IterationMetrics, label_evaluator, partition, run_refinement, select_model
from .classifier import SoftmaxClassifier, accuracy, nuclear_norm, predict_probs, train_ce
from .config import RunConfig, config_hash, dump_config
from .manipulate import ManipulationConfig
from .rng import child_seed
from .schedule import make_linear_schedule
from .synthdata import build_world

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class RunResult:
    config_hash: str
    metrics: tuple  # of IterationMetrics, r = 0..R
    models: tuple = field(repr=False)  # checkpoints r = 0..R
    nuclear_norms: tuple = ()
    selected_r: int = 0
    run_dir: Optional[Path] = None

    @property
    def target_accuracies(self) -> list[float]:
        return [m.target_accuracy for m in self.metrics]


def baseline_metrics(model: SoftmaxClassifier, X, y, E: float) -> IterationMetrics:
    """The r = 0 row: source model partition, nothing manipulated yet."""
    part = partition(model, X, E)
    ev = label_evaluator(y)(model, part)
    return IterationMetrics(0, part.N_v, part.N_u, 0, **ev)


def execute(cfg: RunConfig, run_dir=None) -> RunResult:
    """Run the full pipeline; with ``run_dir`` every artifact is written as soon as it exists."""
    chash = config_hash(cfg)
    out = None if run_dir is None else Path(run_dir)
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        artifacts.write_config_echo(out, dump_config(cfg), chash)

    spec = cfg.benchmark
    world, source, target = build_world(spec)
    if out is not None:
        for name, ds in (("source", source), ("target", target)):
            artifacts.save_dataset(out, name, ds.X, ds.y, ds.domain, spec.C, cfg.seed, spec.to_dict(), chash)

    schedule = make_linear_schedule(cfg.schedule.T_train, cfg.schedule.beta_start, cfg.schedule.beta_end)
    manip = ManipulationConfig(schedule, cfg.guidance, cfg.rho_init_value, cfg.rho_mix_value, cfg.redenoise_gamma)
    manip.masks(spec.n)  # validate cutoffs before any training

    src_cfg = replace(cfg.source_train, seed=child_seed(cfg.seed, "source-train"))
    model0 = train_ce(SoftmaxClassifier.zeros(spec.C, spec.n), source.X, source.y, src_cfg)
    log.info("source model: source acc %.4f", accuracy(model0, source.X, source.y))

    metrics = [baseline_metrics(model0, target.X, target.y, cfg.E)]
    models = [model0]
    if out is not None:
        artifacts.save_checkpoint(out, 0, model0, chash)
        artifacts.write_metrics(out / "metrics.csv", metrics, chash)

    def on_iteration(state):
        models.append(state.model)
        metrics.append(state.history[-1])
        if out is not None:
            artifacts.save_checkpoint(out, state.r, state.model, chash)
            artifacts.write_metrics(out / "metrics.csv", metrics, chash)

    def observe(r, part, manipulated):
        if out is not None and cfg.dump_traces:
            artifacts.save_traces(out, r, manipulated, chash)

    ctx = AdaptationContext(
        world,
        manip,
        cfg.adapt_train,
        cfg.E,
        seed=cfg.seed,
        trace_samples=cfg.trace_samples if cfg.dump_traces else 0,
    )
    run_refinement(model0, target.X, cfg.R, ctx, label_evaluator(target.y), on_iteration, observe)

    # selection sees only unlabeled target predictions
    probs = [predict_probs(m, target.X) for m in models]
    norms = tuple(nuclear_norm(P) for P in probs)
    selected = select_model(probs)
    if out is not None:
        artifacts.write_selection(out, selected, norms, [m.target_accuracy for m in metrics], chash)
    log.info("selected r=%d (nuclear norm %.4f)", selected, norms[selected])
    return RunResult(chash, tuple(metrics), tuple(models), norms, selected, out)
