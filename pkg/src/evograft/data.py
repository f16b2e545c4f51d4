"""Task datasets: binary on-disk format, loading, synthetic generation.

A task is a directory holding a ``meta`` text file (``name=``, ``classes=``,
``h=``, ``w=``, ``c=`` lines) and three binary splits ``train.bin``,
``val.bin``, ``test.bin``. Each split starts with the magic bytes ``MTDS``
followed by little-endian u32 sample count, height, width and channels, then
one record per sample: h*w*c pixel bytes row-major plus a little-endian u16
label.

The synthetic generator builds families of classification tasks from noisy
class prototypes; related tasks share a configured fraction of prototypes so
cross-task transfer genuinely helps.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from .rng import Rng

MAGIC = b"MTDS"
SPLITS = ("train", "val", "test")


class DatasetError(ValueError):
    pass


@dataclass
class TaskDataset:
    name: str
    num_classes: int
    h: int
    w: int
    c: int
    splits: dict[str, tuple[np.ndarray, np.ndarray]] = field(default_factory=dict)

    def split(self, name: str) -> tuple[np.ndarray, np.ndarray]:
        try:
            return self.splits[name]
        except KeyError:
            raise DatasetError(f"dataset {self.name!r} has no split {name!r}") from None


def _record_dtype(h: int, w: int, c: int) -> np.dtype:
    return np.dtype([("img", np.uint8, (h, w, c)), ("label", "<u2")])


def write_split(path: str, images: np.ndarray, labels: np.ndarray) -> None:
    n, h, w, c = images.shape
    records = np.empty(n, dtype=_record_dtype(h, w, c))
    records["img"] = images
    records["label"] = labels.astype("<u2")
    header = np.array([n, h, w, c], dtype="<u4").tobytes()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(header)
        fh.write(records.tobytes())


def read_split(path: str) -> tuple[np.ndarray, np.ndarray]:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != MAGIC:
        raise DatasetError(f"{path}: bad magic bytes")
    n, h, w, c = np.frombuffer(blob[4:20], dtype="<u4")
    records = np.frombuffer(blob[20:], dtype=_record_dtype(int(h), int(w), int(c)))
    if records.size != n:
        raise DatasetError(f"{path}: expected {n} samples, found {records.size}")
    return records["img"].copy(), records["label"].astype(np.int64)


def write_task_dataset(dataset: TaskDataset, out_dir: str) -> None:
    os.makedirs(out_dir, exist_ok=True)
    meta = (f"name={dataset.name}\nclasses={dataset.num_classes}\n"
            f"h={dataset.h}\nw={dataset.w}\nc={dataset.c}\n")
    with open(os.path.join(out_dir, "meta"), "w", encoding="utf-8") as fh:
        fh.write(meta)
    for split in SPLITS:
        images, labels = dataset.split(split)
        write_split(os.path.join(out_dir, f"{split}.bin"), images, labels)


def load_task_dir(path: str) -> TaskDataset:
    meta_path = os.path.join(path, "meta")
    fields = {}
    with open(meta_path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            key, _, value = line.partition("=")
            fields[key] = value
    for key in ("name", "classes", "h", "w", "c"):
        if key not in fields:
            raise DatasetError(f"{meta_path}: missing {key}=")
    name = fields["name"]
    if not name or any(ch.isspace() for ch in name):
        raise DatasetError(f"{meta_path}: task name must be whitespace-free")
    dataset = TaskDataset(name=name, num_classes=int(fields["classes"]),
                          h=int(fields["h"]), w=int(fields["w"]), c=int(fields["c"]))
    for split in SPLITS:
        images, labels = read_split(os.path.join(path, f"{split}.bin"))
        if images.shape[1:] != (dataset.h, dataset.w, dataset.c):
            raise DatasetError(f"{path}/{split}.bin dims disagree with meta")
        if labels.size and labels.max() >= dataset.num_classes:
            raise DatasetError(f"{path}/{split}.bin has labels out of range")
        dataset.splits[split] = (images, labels)
    return dataset


def load_task_library(root: str) -> dict[str, TaskDataset]:
    """Load every task directory directly under ``root``, keyed by task name."""
    out = {}
    for entry in sorted(os.listdir(root)):
        full = os.path.join(root, entry)
        if os.path.isdir(full) and os.path.exists(os.path.join(full, "meta")):
            ds = load_task_dir(full)
            out[ds.name] = ds
    if not out:
        raise DatasetError(f"no task directories under {root}")
    return out


def bilinear_resize(image: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Resize an (h, w, c) float image with half-pixel-centered bilinear sampling."""
    h, w = image.shape[:2]
    if (h, w) == (out_h, out_w):
        return image.copy()
    ys = (np.arange(out_h) + 0.5) * (h / out_h) - 0.5
    xs = (np.arange(out_w) + 0.5) * (w / out_w) - 0.5
    y0 = np.clip(np.floor(ys).astype(int), 0, h - 1)
    x0 = np.clip(np.floor(xs).astype(int), 0, w - 1)
    y1 = np.clip(y0 + 1, 0, h - 1)
    x1 = np.clip(x0 + 1, 0, w - 1)
    wy = np.clip(ys - y0, 0.0, 1.0)[:, None, None]
    wx = np.clip(xs - x0, 0.0, 1.0)[None, :, None]
    top = image[y0][:, x0] * (1 - wx) + image[y0][:, x1] * wx
    bot = image[y1][:, x0] * (1 - wx) + image[y1][:, x1] * wx
    return top * (1 - wy) + bot * wy


# -- synthetic generation ------------------------------------------------------

@dataclass
class TaskGenSpec:
    name: str
    classes: int
    h: int = 16
    w: int = 16
    c: int = 3
    train: int = 192
    val: int = 64
    test: int = 64
    noise: float = 0.06


@dataclass
class GenSpec:
    tasks: list[TaskGenSpec]
    relations: list[tuple[str, str, float]] = field(default_factory=list)


def parse_gen_spec(text: str) -> GenSpec:
    tasks: list[TaskGenSpec] = []
    relations = []
    names = set()
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if parts[0] == "task":
            if len(parts) < 2:
                raise DatasetError(f"malformed task line: {line!r}")
            spec = TaskGenSpec(name=parts[1], classes=4)
            for token in parts[2:]:
                key, _, value = token.partition("=")
                if key == "noise":
                    spec.noise = float(value)
                elif key in ("classes", "h", "w", "c", "train", "val", "test"):
                    setattr(spec, key, int(value))
                else:
                    raise DatasetError(f"unknown task field {key!r}")
            if spec.name in names:
                raise DatasetError(f"duplicate task name {spec.name!r}")
            names.add(spec.name)
            tasks.append(spec)
        elif parts[0] == "relate":
            if len(parts) != 4 or not parts[3].startswith("share="):
                raise DatasetError(f"malformed relate line: {line!r}")
            relations.append((parts[1], parts[2], float(parts[3][6:])))
        else:
            raise DatasetError(f"unknown directive {parts[0]!r}")
    if not tasks:
        raise DatasetError("generation spec defines no tasks")
    for a, b, share in relations:
        if a not in names or b not in names:
            raise DatasetError(f"relation references unknown task: {a} {b}")
        if not 0.0 <= share <= 1.0:
            raise DatasetError(f"share must be in [0, 1], got {share}")
    return GenSpec(tasks=tasks, relations=relations)


def load_gen_spec(path: str) -> GenSpec:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_gen_spec(fh.read())


def _prototype(rng: Rng, h: int, w: int, c: int) -> np.ndarray:
    """A smooth class signature: coarse random grid upsampled to full size."""
    coarse = 0.25 + 0.5 * rng.uniforms(4 * 4 * c).reshape(4, 4, c)
    return bilinear_resize(coarse, h, w)


def _sample_split(rng: Rng, protos: np.ndarray, count: int, noise: float):
    k, h, w, c = protos.shape
    labels = np.array([rng.randint(k) for _ in range(count)], dtype=np.int64)
    noise_arr = rng.normals(count * h * w * c, 0.0, noise).reshape(count, h, w, c)
    images = np.clip(protos[labels] + noise_arr, 0.0, 1.0)
    return np.round(images * 255.0).astype(np.uint8), labels


def generate_synthetic_tasks(spec: GenSpec, seed: int, out_dir: str) -> list[str]:
    """Write one MTDS directory per task; byte-identical for a fixed seed."""
    master = Rng(seed, "gen")
    protos: dict[str, np.ndarray] = {}
    for task in spec.tasks:
        task_rng = master.spawn(f"proto/{task.name}")
        protos[task.name] = np.stack(
            [_prototype(task_rng, task.h, task.w, task.c) for _ in range(task.classes)])
    by_name = {t.name: t for t in spec.tasks}
    for a, b, share in spec.relations:
        ta, tb = by_name[a], by_name[b]
        if (ta.h, ta.w, ta.c) != (tb.h, tb.w, tb.c):
            raise DatasetError(f"related tasks {a} and {b} must share image dims")
        n_shared = int(round(share * min(ta.classes, tb.classes)))
        protos[b][:n_shared] = protos[a][:n_shared]

    paths = []
    for task in spec.tasks:
        dataset = TaskDataset(name=task.name, num_classes=task.classes,
                              h=task.h, w=task.w, c=task.c)
        for split, count in (("train", task.train), ("val", task.val), ("test", task.test)):
            split_rng = master.spawn(f"split/{task.name}/{split}")
            dataset.splits[split] = _sample_split(split_rng, protos[task.name],
                                                  count, task.noise)
        path = os.path.join(out_dir, task.name)
        write_task_dataset(dataset, path)
        paths.append(path)
    return paths
