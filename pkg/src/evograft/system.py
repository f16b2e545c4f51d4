"""Layer-block store, model registry, sharing counts, and cost accounting.

The system holds every parameter block once; models are ordered lists of
(block id, trainable flag) references. A block's cost to one model is its
parameter count divided by one plus the number of models for *other* tasks
referencing it, so shared frozen blocks get cheaper as more tasks reuse them.
Inference flops are an analytic count over the model's own dense maps and do
not depend on sharing.

Reads are safe to run concurrently; commit, discard, and garbage collection
assume a single writer. Training never writes a block referenced frozen, so
child training may overlap reads of shared state.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from .rng import Rng
from .search_space import RESOLUTION_AXIS, SearchSpace

if TYPE_CHECKING:
    from .scoring import ScoreParams

EMBEDDING = "embedding"
HIDDEN = "hidden"
HEAD = "head"

ROOT_TASK = "root"
MIN_HIDDEN_DEPTH = 1


class SystemError_(ValueError):
    """Structural violation in the multitask system."""


@dataclass
class LayerBlock:
    """A block of trainable parameters plus congruent optimizer state.

    ``params`` packs one dense map flat: the row-major weight (d_in*d_out
    values) followed by the bias (d_out values), both float32.
    """

    id: int
    kind: str
    d_in: int
    d_out: int
    params: np.ndarray
    opt: np.ndarray
    created_by_task: str
    generation_tag: int

    @property
    def n_params(self) -> int:
        return self.params.size

    def weight(self, dtype=None) -> np.ndarray:
        w = self.params[: self.d_in * self.d_out].reshape(self.d_in, self.d_out)
        return w if dtype is None else w.astype(dtype)

    def bias(self, dtype=None) -> np.ndarray:
        b = self.params[self.d_in * self.d_out :]
        return b if dtype is None else b.astype(dtype)

    def clone_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        return self.params.copy(), self.opt.copy()


@dataclass
class ModelSpec:
    """One task's model: layer references, hyperparameters, mutation table."""

    id: int
    task: str
    layers: list[tuple[int, bool]]
    hparams: dict
    mu: dict
    parent_id: int | None = None
    created_at: int = 0
    quality: float | None = None
    score_snapshot: float | None = None

    def layer_ids(self) -> list[int]:
        return [lid for lid, _ in self.layers]

    def trainable_ids(self) -> list[int]:
        return [lid for lid, trainable in self.layers if trainable]

    def head_id(self) -> int:
        return self.layers[-1][0]

    def hidden_count(self) -> int:
        return len(self.layers) - 2


class SystemState:
    """The whole multitask system: blocks, models, counts, score parameters."""

    def __init__(self, space: SearchSpace, score_params: "ScoreParams", rng: Rng):
        self.space = space
        self.score_params = score_params
        self.rng = rng
        self.blocks: dict[int, LayerBlock] = {}
        self.models: dict[int, ModelSpec] = {}
        self.selection_counts: dict[tuple[int, str], int] = {}
        self.task_paths: dict[str, str] = {}
        self.ever_trainable: set[int] = set()
        self.history: list = []
        self.run_position: tuple[str, int] | None = None
        self.next_block_id = 0
        self.next_model_id = 0
        self.created_counter = 0
        self.iterations_done = 0

    # -- block and model lifecycle -------------------------------------------

    def add_block(self, kind: str, d_in: int, d_out: int, params: np.ndarray,
                  opt: np.ndarray, created_by_task: str) -> LayerBlock:
        if params.dtype != np.float32 or opt.dtype != np.float32:
            raise SystemError_("block arrays must be float32")
        if params.size != d_in * d_out + d_out or opt.size != params.size:
            raise SystemError_("block array sizes do not match shape")
        block = LayerBlock(self.next_block_id, kind, d_in, d_out, params, opt,
                           created_by_task, self.iterations_done)
        self.blocks[block.id] = block
        self.next_block_id += 1
        return block

    def block(self, block_id: int) -> LayerBlock:
        try:
            return self.blocks[block_id]
        except KeyError:
            raise SystemError_(f"unknown layer block {block_id}") from None

    def new_model_id(self) -> int:
        mid = self.next_model_id
        self.next_model_id += 1
        return mid

    def model_blocks(self, model: ModelSpec) -> list[LayerBlock]:
        return [self.block(lid) for lid in model.layer_ids()]

    def models_for(self, task: str) -> list[ModelSpec]:
        out = [m for m in self.models.values() if m.task == task]
        out.sort(key=lambda m: m.created_at)
        return out

    def tasks_with_models(self) -> list[str]:
        return sorted({m.task for m in self.models.values()})

    def validate_model(self, model: ModelSpec) -> None:
        kinds = [self.block(lid).kind for lid in model.layer_ids()]
        if len(kinds) < 2 + MIN_HIDDEN_DEPTH:
            raise SystemError_(f"model {model.id} is too shallow")
        if kinds[0] != EMBEDDING or kinds[-1] != HEAD:
            raise SystemError_(f"model {model.id} layer order is invalid")
        if any(k != HIDDEN for k in kinds[1:-1]):
            raise SystemError_(f"model {model.id} has a non-hidden interior block")
        head = model.head_id()
        for other in self.models.values():
            if other.id != model.id and head in other.layer_ids() and other.task != model.task:
                raise SystemError_(f"head block {head} shared across tasks")
        self.space.validate_config(model.hparams)

    def commit_model(self, model: ModelSpec) -> None:
        if model.id in self.models:
            raise SystemError_(f"model {model.id} committed twice")
        self.validate_model(model)
        self.models[model.id] = model
        for lid, trainable in model.layers:
            if trainable:
                self.ever_trainable.add(lid)

    def discard_model(self, model: ModelSpec) -> None:
        if model.id not in self.models:
            raise SystemError_(f"model {model.id} is not committed")
        del self.models[model.id]
        self.selection_counts = {k: v for k, v in self.selection_counts.items()
                                 if k[0] != model.id}
        self.collect_garbage()

    def collect_garbage(self) -> None:
        live = set()
        for model in self.models.values():
            live.update(model.layer_ids())
        self.blocks = {bid: b for bid, b in self.blocks.items() if bid in live}

    # -- cost accounting -----------------------------------------------------

    def sharing_count(self, block_id: int, task: str) -> int:
        """Number of models for tasks other than ``task`` referencing the block."""
        self.block(block_id)
        return sum(1 for m in self.models.values()
                   if m.task != task and block_id in m.layer_ids())

    def accounted_params(self, model: ModelSpec) -> float:
        """Parameter cost of the model with shared blocks discounted.

        Each block contributes size / (sharing count + 1), where the sharing
        count looks only at models trained for other tasks.
        """
        total = 0.0
        for lid in model.layer_ids():
            block = self.block(lid)
            total += block.n_params / (self.sharing_count(lid, model.task) + 1)
        return total

    def inference_flops(self, model: ModelSpec) -> int:
        """Dense-map flop count for one input sample at the model's resolution."""
        resolution = model.hparams[RESOLUTION_AXIS]
        total = 0
        for lid in model.layer_ids():
            block = self.block(lid)
            if block.kind == EMBEDDING:
                total += embedding_flops(block, resolution)
            else:
                total += dense_flops(block.d_in, block.d_out)
        return total

    # -- visualization -------------------------------------------------------

    def export_dot(self) -> str:
        return export_dot(self)


def dense_flops(d_in: int, d_out: int) -> int:
    """Multiply-accumulate plus bias-add count of one dense map."""
    return 2 * d_in * d_out + d_out


def embedding_flops(block: LayerBlock, resolution: int) -> int:
    """Embedding applies its dense map once per patch of the input image."""
    return patch_count(block, resolution) * dense_flops(block.d_in, block.d_out)


def patch_count(block: LayerBlock, resolution: int, channels: int | None = None) -> int:
    if channels is None:
        channels = _infer_channels(block)
    patch = _patch_side(block, channels)
    if resolution % patch != 0:
        raise SystemError_(
            f"resolution {resolution} is not divisible by patch side {patch}")
    return (resolution // patch) ** 2


def _infer_channels(block: LayerBlock) -> int:
    for c in (3, 1, 4, 2):
        if block.d_in % c == 0 and _is_square(block.d_in // c):
            return c
    raise SystemError_(f"cannot infer channel count from embedding d_in={block.d_in}")


def _patch_side(block: LayerBlock, channels: int) -> int:
    per_channel = block.d_in // channels
    if block.d_in % channels != 0 or not _is_square(per_channel):
        raise SystemError_(
            f"embedding d_in={block.d_in} does not factor into {channels} channels")
    return int(round(per_channel ** 0.5))


def _is_square(n: int) -> bool:
    r = int(round(n ** 0.5))
    return r * r == n


# -- construction ------------------------------------------------------------

def init_params(rng: Rng, d_in: int, d_out: int, zero: bool = False) -> np.ndarray:
    """Weight ~ U(-1/sqrt(d_in), 1/sqrt(d_in)), zero bias; or all zeros."""
    n = d_in * d_out + d_out
    if zero:
        return np.zeros(n, dtype=np.float32)
    bound = 1.0 / (d_in ** 0.5)
    weight = (rng.uniforms(d_in * d_out) * 2.0 - 1.0) * bound
    return np.concatenate([weight, np.zeros(d_out)]).astype(np.float32)


def init_system(space: SearchSpace, seed: int, width: int = 32, depth: int = 4,
                patch: int = 8, channels: int = 3, root_task: str = ROOT_TASK):
    """Create a fresh system seeded with an untrained root model.

    The root's embedding maps one (patch x patch x channels) tile to ``width``
    features, so its weights do not depend on the resolution hyperparameter;
    every resolution in the axis table must be divisible by ``patch``.
    """
    from .scoring import ScoreParams

    if depth < MIN_HIDDEN_DEPTH:
        raise SystemError_(f"root depth must be at least {MIN_HIDDEN_DEPTH}")
    for res in space.axis(RESOLUTION_AXIS).values:
        if res % patch != 0:
            raise SystemError_(f"resolution {res} is not divisible by patch {patch}")

    system = SystemState(space, ScoreParams(), Rng(seed, "run"))
    init_rng = system.rng.spawn("init")
    d_embed = patch * patch * channels
    layers: list[tuple[int, bool]] = []
    block = system.add_block(EMBEDDING, d_embed, width,
                             init_params(init_rng, d_embed, width),
                             np.zeros(d_embed * width + width, dtype=np.float32),
                             root_task)
    layers.append((block.id, False))
    for _ in range(depth):
        block = system.add_block(HIDDEN, width, width,
                                 init_params(init_rng, width, width),
                                 np.zeros(width * width + width, dtype=np.float32),
                                 root_task)
        layers.append((block.id, False))
    head = system.add_block(HEAD, width, 1,
                            init_params(init_rng, width, 1, zero=True),
                            np.zeros(width + 1, dtype=np.float32),
                            root_task)
    layers.append((head.id, False))

    root = ModelSpec(id=system.new_model_id(), task=root_task, layers=layers,
                     hparams=space.default_config(), mu={}, parent_id=None,
                     created_at=system.created_counter)
    system.created_counter += 1
    system.commit_model(root)
    return system


# -- DOT export ---------------------------------------------------------------

_PALETTE = ("#e6194b", "#3cb44b", "#4363d8", "#f58231", "#911eb4", "#46f0f0",
            "#f032e6", "#bcf60c", "#fabebe", "#008080", "#e6beff", "#9a6324",
            "#fffac8", "#800000", "#aaffc3", "#808000", "#ffd8b1", "#000075")


def _task_color(task: str, order: dict[str, int]) -> str:
    if task == ROOT_TASK:
        return "gray"
    return _PALETTE[order[task] % len(_PALETTE)]


def export_dot(system: SystemState) -> str:
    """DOT digraph: triangle inputs, round blocks colored by creating task,
    rectangular heads; edges follow each model's path bottom to top."""
    lines = ["digraph multitask {", "  rankdir=BT;"]
    tasks = system.tasks_with_models()
    order = {t: i for i, t in enumerate(t for t in tasks if t != ROOT_TASK)}
    models = sorted(system.models.values(), key=lambda m: m.id)

    for task in tasks:
        lines.append(f'  "in_{task}" [shape=triangle, label="{task}"];')
    seen_blocks = set()
    for model in models:
        for lid in model.layer_ids()[:-1]:
            if lid in seen_blocks:
                continue
            seen_blocks.add(lid)
            block = system.block(lid)
            color = _task_color(block.created_by_task, order)
            lines.append(
                f'  "b{lid}" [shape=ellipse, style=filled, fillcolor="{color}", '
                f'label="{block.kind}{lid}"];')
    for model in models:
        color = _task_color(model.task, order)
        lines.append(
            f'  "head_m{model.id}" [shape=box, style=filled, fillcolor="{color}", '
            f'label="{model.task}:m{model.id}"];')
    for model in models:
        color = _task_color(model.task, order)
        path = model.layer_ids()
        lines.append(f'  "in_{model.task}" -> "b{path[0]}" [color="{color}"];')
        for a, b in zip(path[:-2], path[1:-1]):
            lines.append(f'  "b{a}" -> "b{b}" [color="{color}"];')
        lines.append(f'  "b{path[-2]}" -> "head_m{model.id}" [color="{color}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"
