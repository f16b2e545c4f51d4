"""Evolutionary loop: parent sampling, child training with retention, segments.

One task iteration runs a fixed number of generations for a single active
task. Each generation spawns children by sampling a parent (best-scoring
active models first, falling back to a shuffled pass over the rest, each
candidate accepted with probability 0.5^selections), sampling a mutation set
from the parent's probability table, and training the child for a number of
capped cycles. A child checkpoint is kept only while its score stays at or
above both its own best checkpoint and the score of a same-task parent; a
parent from another task imposes no bar. Finalization keeps the single
best-scoring model for the task and garbage-collects everything it orphaned.

A segment bundles config overrides (mode, scale factor, recalibration) with a
round-robin block of task iterations, emitting a metrics snapshot after every
iteration.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

from .data import TaskDataset
from .mutations import (MAKE_TRAINABLE_HEAD, MODE_MUNET_PLUS, MODES,
                        apply_mutations, clone_action, fresh_mu_table,
                        sample_mutations)
from .rng import Rng
from .scoring import calibrate, score_model
from .search_space import SearchSpace
from .system import ROOT_TASK, ModelSpec, SystemState, init_system
from .trainer import TrainBudget, TrainerError, evaluate, train_cycle

log = logging.getLogger("evograft")


class EvolutionError(ValueError):
    pass


@dataclass
class EvolutionConfig:
    generations: int = 4
    children_per_generation: int = 2
    train_cycles: int = 4
    budget: TrainBudget = field(default_factory=TrainBudget)
    mode: str = MODE_MUNET_PLUS

    def __post_init__(self):
        if min(self.generations, self.children_per_generation, self.train_cycles) <= 0:
            raise EvolutionError("generation, child and cycle counts must be positive")
        if self.mode not in MODES:
            raise EvolutionError(f"unknown mode {self.mode!r}")


@dataclass
class SegmentSpec:
    label: str
    tasks: list[str] = field(default_factory=list)
    iterations: int = 1
    mode: str | None = None
    s: float | None = None
    recalibrate: float | None = None
    generations: int | None = None
    children: int | None = None
    cycles: int | None = None
    samples_cap: int | None = None


@dataclass
class MetricsSnapshot:
    index: int
    segment: str
    task: str
    mean_test_accuracy: float
    mean_accounted_params: float
    mean_inference_flops: float
    per_task: dict[str, tuple[float, float, float]] = field(default_factory=dict)


def parent_acceptance_probability(selections: int) -> float:
    return 0.5 ** selections


def bootstrap_system(space: SearchSpace, seed: int, width: int = 32, depth: int = 4,
                     patch: int = 8, channels: int = 3) -> SystemState:
    """Fresh system whose root model carries a fully initialized mutation table."""
    system = init_system(space, seed, width=width, depth=depth, patch=patch,
                         channels=channels)
    root = next(iter(system.models.values()))
    root.mu = fresh_mu_table(system, root, MODE_MUNET_PLUS)
    return system


def sample_parent(system: SystemState, task: str, active: list[ModelSpec],
                  rng: Rng) -> ModelSpec:
    """Walk candidates (active by descending score, then the rest shuffled),
    accepting each with probability 0.5^selections; uniform fallback."""
    if not system.models:
        raise EvolutionError("cannot sample a parent from an empty system")
    scored = sorted(active, key=lambda m: (-score_model(system, m), m.created_at))
    active_ids = {m.id for m in active}
    others = sorted((m for m in system.models.values() if m.id not in active_ids),
                    key=lambda m: m.id)
    rng.shuffle(others)

    chosen = None
    for candidate in scored + others:
        count = system.selection_counts.get((candidate.id, task), 0)
        if parent_acceptance_probability(count) > rng.uniform():
            chosen = candidate
            break
    if chosen is None:
        pool = sorted(system.models.values(), key=lambda m: m.id)
        chosen = pool[rng.randint(len(pool))]
    key = (chosen.id, task)
    system.selection_counts[key] = system.selection_counts.get(key, 0) + 1
    return chosen


def _snapshot_payload(system: SystemState, model: ModelSpec) -> dict:
    payload = {}
    for bid in model.trainable_ids():
        block = system.block(bid)
        payload[bid] = (block.params.copy(), block.opt.copy())
    return payload


def _restore_payload(system: SystemState, payload: dict) -> None:
    for bid, (params, opt) in payload.items():
        block = system.block(bid)
        block.params[:] = params
        block.opt[:] = opt


def _train_child(system: SystemState, child: ModelSpec, parent: ModelSpec,
                 task: str, dataset: TaskDataset, cfg: EvolutionConfig,
                 rng: Rng):
    """Run the training cycles; return (quality, payload) of the best retained
    checkpoint or None if every cycle fell below the bar."""
    val_images, val_labels = dataset.split("val")
    parent_on_task = parent.task == task
    best = None
    for cycle in range(cfg.train_cycles):
        train_cycle(system, child, dataset, cfg.budget, cycle, cfg.train_cycles, rng)
        quality = evaluate(system, child, val_images, val_labels)
        candidate = score_model(system, child, quality)
        bar = -math.inf
        if best is not None:
            bar = max(bar, score_model(system, child, best[0]))
        if parent_on_task:
            bar = max(bar, score_model(system, parent))
        if candidate >= bar:
            best = (quality, _snapshot_payload(system, child))
    return best


def run_generation(system: SystemState, task: str, dataset: TaskDataset,
                   cfg: EvolutionConfig, active: list[ModelSpec],
                   rng: Rng) -> list[ModelSpec]:
    """Spawn, train and retain/discard one generation of children.

    Trainer failures are contained per child: the failing child is discarded
    and the generation moves on."""
    retained = []
    for _ in range(cfg.children_per_generation):
        parent = sample_parent(system, task, active, rng)
        actions = sample_mutations(system, parent, cfg.mode, rng)
        child = apply_mutations(system, parent, actions, task, dataset.num_classes,
                                rng, cfg.mode)
        system.commit_model(child)
        try:
            best = _train_child(system, child, parent, task, dataset, cfg, rng)
        except TrainerError as exc:
            log.warning("child %d failed training on %s: %s", child.id, task, exc)
            system.discard_model(child)
            continue
        if best is None:
            system.discard_model(child)
            continue
        quality, payload = best
        _restore_payload(system, payload)
        child.quality = quality
        child.score_snapshot = score_model(system, child)
        active.append(child)
        retained.append(child)
    return retained


def run_task_iteration(system: SystemState, task: str, dataset: TaskDataset,
                       cfg: EvolutionConfig, rng: Rng) -> SystemState:
    """One active-task iteration: generations of children, then keep-best."""
    if task == ROOT_TASK:
        raise EvolutionError("the root pseudo-task cannot be iterated")
    if dataset.name != task:
        raise EvolutionError(f"dataset {dataset.name!r} does not match task {task!r}")
    active = system.models_for(task)
    val_images, val_labels = dataset.split("val")
    for model in active:
        if model.quality is None:
            model.quality = evaluate(system, model, val_images, val_labels)

    for _ in range(cfg.generations):
        run_generation(system, task, dataset, cfg, active, rng)

    survivors = [m for m in active if m.id in system.models]
    if survivors:
        best = min(survivors, key=lambda m: (-score_model(system, m), m.created_at))
        for model in list(system.models.values()):
            if model.task == task and model.id != best.id:
                system.discard_model(model)
        best.score_snapshot = score_model(system, best)
    system.iterations_done += 1
    return system


def metrics_snapshot(system: SystemState, datasets: dict[str, TaskDataset],
                     task_subset: list[str], segment: str = "",
                     task: str = "") -> MetricsSnapshot:
    """Mean test accuracy over the subset's modeled tasks; cost means over all
    models in the system."""
    per_task = {}
    for name in task_subset:
        models = system.models_for(name)
        if not models:
            continue
        best = max(models, key=lambda m: (score_model(system, m), -m.created_at))
        test_images, test_labels = datasets[name].split("test")
        acc = evaluate(system, best, test_images, test_labels)
        per_task[name] = (acc, system.accounted_params(best),
                          float(system.inference_flops(best)))
    models = list(system.models.values())
    mean_acc = (sum(v[0] for v in per_task.values()) / len(per_task)) if per_task else 0.0
    mean_params = sum(system.accounted_params(m) for m in models) / len(models)
    mean_flops = sum(system.inference_flops(m) for m in models) / len(models)
    return MetricsSnapshot(index=system.iterations_done, segment=segment, task=task,
                           mean_test_accuracy=mean_acc,
                           mean_accounted_params=mean_params,
                           mean_inference_flops=mean_flops, per_task=per_task)


def run_segment(system: SystemState, segment: SegmentSpec,
                datasets: dict[str, TaskDataset], base_cfg: EvolutionConfig,
                rng: Rng | None = None, on_iteration=None,
                skip_iterations: int = 0,
                apply_scoring_overrides: bool = True) -> list[MetricsSnapshot]:
    """Apply the segment's overrides, then run its round-robin task iterations.

    ``skip_iterations`` fast-forwards past work a resumed checkpoint already
    holds; a mid-segment resume passes ``apply_scoring_overrides=False`` since
    the score-parameter changes already happened and recalibration is not
    idempotent. ``on_iteration`` is called with each fresh snapshot.
    """
    for name in segment.tasks:
        if name not in datasets:
            raise EvolutionError(f"segment {segment.label!r} names unknown task {name!r}")
    if rng is None:
        rng = system.rng

    cfg = replace(base_cfg)
    if segment.mode is not None:
        if segment.mode not in MODES:
            raise EvolutionError(f"unknown mode {segment.mode!r}")
        cfg = replace(cfg, mode=segment.mode)
        if apply_scoring_overrides:
            system.score_params = replace(
                system.score_params,
                compute_factor_enabled=(segment.mode == MODE_MUNET_PLUS))
    if apply_scoring_overrides:
        if segment.s is not None:
            system.score_params = replace(system.score_params, s=segment.s)
        if segment.recalibrate is not None:
            system.score_params = calibrate(system, segment.recalibrate)
    if segment.generations is not None:
        cfg = replace(cfg, generations=segment.generations)
    if segment.children is not None:
        cfg = replace(cfg, children_per_generation=segment.children)
    if segment.cycles is not None:
        cfg = replace(cfg, train_cycles=segment.cycles)
    if segment.samples_cap is not None:
        cfg = replace(cfg, budget=TrainBudget(samples_cap=segment.samples_cap,
                                              batch_size=cfg.budget.batch_size))

    snapshots = []
    position = 0
    for _ in range(segment.iterations):
        for task in segment.tasks:
            position += 1
            if position <= skip_iterations:
                continue
            run_task_iteration(system, task, datasets[task], cfg, rng)
            snap = metrics_snapshot(system, datasets, segment.tasks,
                                    segment.label, task)
            system.history.append(snap)
            snapshots.append(snap)
            if on_iteration is not None:
                on_iteration(snap)
    return snapshots


def parse_segments(text: str) -> list[SegmentSpec]:
    """Parse the line-oriented segment file format."""
    segments: list[SegmentSpec] = []
    current: SegmentSpec | None = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split(None, 1)
        key = parts[0]
        value = parts[1].strip() if len(parts) > 1 else ""
        if key == "segment":
            if not value or any(ch.isspace() for ch in value):
                raise EvolutionError(
                    f"line {lineno}: segment needs a whitespace-free label")
            current = SegmentSpec(label=value)
            segments.append(current)
            continue
        if current is None:
            raise EvolutionError(f"line {lineno}: {key!r} before any segment")
        try:
            if key == "mode":
                if value not in MODES:
                    raise EvolutionError(f"line {lineno}: unknown mode {value!r}")
                current.mode = value
            elif key == "s":
                current.s = float(value)
            elif key == "recalibrate":
                current.recalibrate = float(value)
            elif key == "tasks":
                current.tasks = [t.strip() for t in value.split(",") if t.strip()]
            elif key == "iterations":
                current.iterations = int(value)
            elif key == "generations":
                current.generations = int(value)
            elif key == "children":
                current.children = int(value)
            elif key == "cycles":
                current.cycles = int(value)
            elif key == "samples_cap":
                current.samples_cap = int(value)
            else:
                raise EvolutionError(f"line {lineno}: unknown directive {key!r}")
        except ValueError as exc:
            raise EvolutionError(f"line {lineno}: bad value for {key!r}: {exc}") from None
    if not segments:
        raise EvolutionError("segment file defines no segments")
    labels = [s.label for s in segments]
    if len(set(labels)) != len(labels):
        raise EvolutionError("segment labels must be unique")
    return segments


def load_segments(path: str) -> list[SegmentSpec]:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_segments(fh.read())


def finetune_top_actions(parent: ModelSpec, top_k: int) -> set:
    """Action set for the fine-tune-top-layers baseline: a new head plus forced
    clones of the top ``top_k`` non-head layers, no other mutations."""
    non_head = len(parent.layers) - 1
    if not 0 <= top_k <= non_head:
        raise EvolutionError(f"top_k must be in [0, {non_head}]")
    actions = {MAKE_TRAINABLE_HEAD}
    for pos in range(non_head - top_k, non_head):
        actions.add(clone_action(pos))
    return actions
