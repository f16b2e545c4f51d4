"""Desk-scale differentiable backbone with hand-written gradients.

The forward pass is: cut the preprocessed image into patches, apply the
embedding's dense map to every patch and average the results into one feature
vector, pass it through residual hidden blocks (dense + tanh + skip), then a
dense head produces the logits. Keeping the embedding patch-wise makes its
weights independent of the input resolution, so one frozen embedding block can
be shared by models running at different resolutions while its flop cost still
scales with the pixel count.

Parameters are stored float32; gradient checking runs the same code in a
float64 shadow evaluation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import TaskDataset, bilinear_resize
from .rng import Rng
from .search_space import RESOLUTION_AXIS
from .system import EMBEDDING, HEAD, ModelSpec, SystemState


class TrainerError(ValueError):
    pass


@dataclass
class TrainBudget:
    samples_cap: int = 51200
    batch_size: int = 32

    def __post_init__(self):
        if self.samples_cap <= 0 or self.batch_size <= 0:
            raise TrainerError("budget fields must be positive")


@dataclass
class CycleStats:
    samples: int
    steps: int
    mean_loss: float


def planned_sample_count(split_size: int, samples_cap: int) -> int:
    """Samples consumed by one cycle: min(one epoch, the cap)."""
    return min(split_size, samples_cap)


# -- preprocessing -------------------------------------------------------------

def preprocess(image: np.ndarray, hparams: dict, rng: Rng | None,
               train_mode: bool) -> np.ndarray:
    """One (h, w, c) uint8 image to a float32 (res, res, c) tensor in [-1, 1].

    Train mode: random crop, resize to the resolution hyperparameter, optional
    horizontal flip, color jitter bounded by the per-axis deltas, quality
    quantization, then scaling. Eval mode is the deterministic resize + scale
    and never touches the rng.
    """
    if image.ndim != 3 or image.dtype != np.uint8:
        raise TrainerError(f"expected uint8 (h, w, c) image, got {image.shape} {image.dtype}")
    x = image.astype(np.float64) / 255.0
    res = hparams[RESOLUTION_AXIS]
    if not train_mode:
        return (bilinear_resize(x, res, res) * 2.0 - 1.0).astype(np.float32)

    if rng is None:
        raise TrainerError("training preprocessing needs an rng")
    x = _random_crop(x, hparams["crop_area_min"], hparams["crop_aspect_min"], rng)
    x = bilinear_resize(x, res, res)
    if hparams["flip"] and rng.uniform() < 0.5:
        x = x[:, ::-1, :]
    x = _color_jitter(x, hparams, rng)
    x = _quality_quantize(x, hparams["quality_delta"], rng)
    return (x * 2.0 - 1.0).astype(np.float32)


def preprocess_batch(images: np.ndarray, hparams: dict, rng: Rng | None,
                     train_mode: bool) -> np.ndarray:
    return np.stack([preprocess(img, hparams, rng, train_mode) for img in images])


def _random_crop(x: np.ndarray, area_min: float, aspect_min: float, rng: Rng):
    h, w = x.shape[:2]
    area = rng.uniform_in(area_min, 1.0)
    aspect = rng.uniform_in(aspect_min, 1.0 / aspect_min)
    target = area * h * w
    ch = min(h, max(1, int(round(math.sqrt(target / aspect)))))
    cw = min(w, max(1, int(round(math.sqrt(target * aspect)))))
    oy = rng.randint(h - ch + 1)
    ox = rng.randint(w - cw + 1)
    return x[oy:oy + ch, ox:ox + cw]


def _color_jitter(x: np.ndarray, hparams: dict, rng: Rng) -> np.ndarray:
    d = hparams["brightness_delta"]
    if d > 0:
        x = x + rng.uniform_in(-d, d)
    d = hparams["contrast_delta"]
    if d > 0:
        mean = x.mean()
        x = mean + (x - mean) * (1.0 + rng.uniform_in(-d, d))
    d = hparams["saturation_delta"]
    if d > 0:
        gray = x.mean(axis=2, keepdims=True)
        x = gray + (x - gray) * (1.0 + rng.uniform_in(-d, d))
    d = hparams["hue_delta"]
    if d > 0:
        shift = rng.uniform_in(-d, d)
        if x.shape[2] >= 3:
            rolled = np.roll(x, 1 if shift > 0 else -1, axis=2)
            x = (1.0 - abs(shift)) * x + abs(shift) * rolled
    return np.clip(x, 0.0, 1.0)


def _quality_quantize(x: np.ndarray, delta: float, rng: Rng) -> np.ndarray:
    # Quantization grain in [5, 255] levels depending on delta and the draw.
    if delta <= 0:
        return x
    levels = max(2, int(round(1.0 / (delta * rng.uniform() + 1.0 / 255.0))))
    return np.round(x * (levels - 1)) / (levels - 1)


# -- forward / backward --------------------------------------------------------

def _patchify(batch: np.ndarray, d_in: int):
    b, res_h, res_w, channels = batch.shape
    if res_h != res_w:
        raise TrainerError("expected square input")
    if d_in % channels != 0:
        raise TrainerError(f"embedding d_in={d_in} not divisible by channels={channels}")
    side = int(round(math.sqrt(d_in // channels)))
    if side * side * channels != d_in:
        raise TrainerError(f"embedding d_in={d_in} is not a square patch")
    if res_h % side != 0:
        raise TrainerError(f"resolution {res_h} not divisible by patch side {side}")
    n = res_h // side
    patches = batch.reshape(b, n, side, n, side, channels)
    patches = patches.transpose(0, 1, 3, 2, 4, 5).reshape(b, n * n, d_in)
    return patches


def _forward_cached(system: SystemState, model: ModelSpec, batch: np.ndarray, dtype):
    blocks = system.model_blocks(model)
    if blocks[0].kind != EMBEDDING or blocks[-1].kind != HEAD:
        raise TrainerError("model layer order is invalid")
    if batch.ndim != 4 or batch.shape[1] != model.hparams[RESOLUTION_AXIS]:
        raise TrainerError(
            f"batch shape {batch.shape} does not match the model's resolution "
            f"{model.hparams[RESOLUTION_AXIS]}")
    x = batch.astype(dtype)
    emb = blocks[0]
    patches = _patchify(x, emb.d_in)
    z = patches @ emb.weight(dtype) + emb.bias(dtype)
    z = z.mean(axis=1)
    inputs, tanhs = [], []
    for block in blocks[1:-1]:
        inputs.append(z)
        t = np.tanh(z @ block.weight(dtype) + block.bias(dtype))
        tanhs.append(t)
        z = z + t
    head = blocks[-1]
    logits = z @ head.weight(dtype) + head.bias(dtype)
    return logits, (blocks, patches, inputs, tanhs, z)


def forward(system: SystemState, model: ModelSpec, batch: np.ndarray,
            dtype=np.float32) -> np.ndarray:
    logits, _ = _forward_cached(system, model, batch, dtype)
    return logits


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def loss(system: SystemState, model: ModelSpec, batch: np.ndarray,
         labels: np.ndarray, dtype=np.float32) -> float:
    logits, _ = _forward_cached(system, model, batch, dtype)
    logp = _log_softmax(logits)
    return float(-logp[np.arange(len(labels)), labels].mean())


def loss_and_gradients(system: SystemState, model: ModelSpec, batch: np.ndarray,
                       labels: np.ndarray, dtype=np.float32):
    """Mean cross-entropy and its exact gradients for the trainable blocks.

    Frozen blocks are traversed by backpropagation but receive no gradient
    entry. Gradient arrays are flat and congruent with each block's params.
    """
    logits, (blocks, patches, inputs, tanhs, z_top) = _forward_cached(
        system, model, batch, dtype)
    b = len(labels)
    logp = _log_softmax(logits)
    loss_value = float(-logp[np.arange(b), labels].mean())

    trainable = set(model.trainable_ids())
    grads: dict[int, np.ndarray] = {}

    d_logits = np.exp(logp)
    d_logits[np.arange(b), labels] -= 1.0
    d_logits /= b

    head = blocks[-1]
    if head.id in trainable:
        grads[head.id] = np.concatenate(
            [(z_top.T @ d_logits).ravel(), d_logits.sum(axis=0)])
    dz = d_logits @ head.weight(dtype).T

    for block, z_in, t in zip(reversed(blocks[1:-1]), reversed(inputs), reversed(tanhs)):
        da = dz * (1.0 - t * t)
        if block.id in trainable:
            grads[block.id] = np.concatenate(
                [(z_in.T @ da).ravel(), da.sum(axis=0)])
        dz = dz + da @ block.weight(dtype).T

    emb = blocks[0]
    if emb.id in trainable:
        n_patches = patches.shape[1]
        d_patch = np.repeat(dz[:, None, :] / n_patches, n_patches, axis=1)
        flat_p = patches.reshape(-1, emb.d_in)
        flat_d = d_patch.reshape(-1, dz.shape[1])
        grads[emb.id] = np.concatenate(
            [(flat_p.T @ flat_d).ravel(), flat_d.sum(axis=0)])
    return loss_value, grads


def gradients(system: SystemState, model: ModelSpec, batch: np.ndarray,
              labels: np.ndarray, dtype=np.float32) -> dict[int, np.ndarray]:
    return loss_and_gradients(system, model, batch, labels, dtype)[1]


# -- optimization ----------------------------------------------------------------

def lr_at(step: int, total_steps: int, peak_lr: float, warmup_ratio: float) -> float:
    """Linear warmup to the peak over ceil(ratio * total) steps, then cosine
    decay to zero at ``total_steps``."""
    if not 0 <= step <= total_steps:
        raise TrainerError(f"step {step} outside [0, {total_steps}]")
    if step >= total_steps:
        return 0.0
    warmup_steps = math.ceil(warmup_ratio * total_steps)
    if step < warmup_steps:
        return peak_lr * step / warmup_steps
    progress = (step - warmup_steps) / (total_steps - warmup_steps)
    return peak_lr * 0.5 * (1.0 + math.cos(math.pi * progress))


def sgd_step(params: np.ndarray, opt: np.ndarray, grad: np.ndarray, lr: float,
             momentum: float, nesterov: bool) -> None:
    """In-place momentum SGD: v <- m*v + g, then the plain or nesterov update."""
    g = grad.astype(np.float32)
    opt *= np.float32(momentum)
    opt += g
    if nesterov:
        params -= np.float32(lr) * (g * np.float32(momentum) + opt)
    else:
        params -= np.float32(lr) * opt


def train_cycle(system: SystemState, model: ModelSpec, dataset: TaskDataset,
                budget: TrainBudget, cycle_index: int, total_cycles: int,
                rng: Rng) -> CycleStats:
    """One capped pass over the shuffled training split.

    The learning-rate schedule spans total_cycles * steps_per_cycle updates so
    successive cycles continue a single warmup/decay curve. Only the model's
    trainable blocks are written.
    """
    images, labels = dataset.split("train")
    if len(images) == 0:
        raise TrainerError(f"dataset {dataset.name!r} has an empty training split")
    n = planned_sample_count(len(images), budget.samples_cap)
    order = list(range(len(images)))
    rng.shuffle(order)
    order = order[:n]

    steps_per_cycle = math.ceil(n / budget.batch_size)
    total_steps = total_cycles * steps_per_cycle
    hp = model.hparams
    losses = []
    for step_i, start in enumerate(range(0, n, budget.batch_size)):
        idx = order[start:start + budget.batch_size]
        batch = preprocess_batch(images[idx], hp, rng, train_mode=True)
        lr = lr_at(cycle_index * steps_per_cycle + step_i, total_steps,
                   hp["learning_rate"], hp["warmup_ratio"])
        loss_value, grads = loss_and_gradients(system, model, batch, labels[idx])
        for bid, grad in grads.items():
            block = system.block(bid)
            sgd_step(block.params, block.opt, grad, lr, hp["momentum"], hp["nesterov"])
        losses.append(loss_value)
    return CycleStats(samples=n, steps=steps_per_cycle,
                      mean_loss=float(np.mean(losses)))


def evaluate(system: SystemState, model: ModelSpec, images: np.ndarray,
             labels: np.ndarray, batch_size: int = 256) -> float:
    """Top-1 accuracy under deterministic eval preprocessing."""
    if len(images) == 0:
        raise TrainerError("cannot evaluate on an empty split")
    correct = 0
    for start in range(0, len(images), batch_size):
        chunk = preprocess_batch(images[start:start + batch_size], model.hparams,
                                 None, train_mode=False)
        logits = forward(system, model, chunk)
        correct += int((logits.argmax(axis=1) == labels[start:start + batch_size]).sum())
    return correct / len(images)
