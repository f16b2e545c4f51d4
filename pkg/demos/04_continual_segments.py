"""Continual development as a sequence of segments.

Segment one runs the baseline mode (no compute-affecting mutations, size
penalty only) until the tasks settle. Segment two switches the extended mode
on: top-layer removal and resolution changes become available, the compute
factor joins the score, and the cost scales are recalibrated to ten times the
current system means. Watch the cost metrics move while accuracy holds.
"""

import tempfile

from evograft import EvolutionConfig, TrainBudget, bootstrap_system, load_builtin_space
from evograft.data import GenSpec, TaskGenSpec, generate_synthetic_tasks, load_task_dir
from evograft.evolution import SegmentSpec, run_segment

TASKS = ["front", "back", "left", "right"]

with tempfile.TemporaryDirectory() as tmp:
    spec = GenSpec(
        tasks=[TaskGenSpec(t, classes=4, train=160, val=64, test=64, noise=0.03)
               for t in TASKS],
        relations=[("front", "back", 0.5), ("left", "right", 0.5)])
    generate_synthetic_tasks(spec, seed=101, out_dir=tmp)
    datasets = {t: load_task_dir(f"{tmp}/{t}") for t in TASKS}

    system = bootstrap_system(load_builtin_space("desk"), seed=202, width=16,
                              depth=4, patch=8, channels=3)
    cfg = EvolutionConfig(generations=2, children_per_generation=3, train_cycles=3,
                          budget=TrainBudget(batch_size=16))

    segments = [
        SegmentSpec(label="baseline", tasks=TASKS, iterations=2, mode="munet",
                    s=0.99, recalibrate=10.0),
        SegmentSpec(label="extended", tasks=TASKS, iterations=2, mode="munet_plus",
                    recalibrate=10.0),
    ]
    print(f"{'iter':>4} {'segment':>9} {'task':>6} {'acc':>7} {'params':>9} {'flops':>9}")
    for segment in segments:
        for snap in run_segment(system, segment, datasets, cfg):
            print(f"{snap.index:>4} {snap.segment:>9} {snap.task:>6} "
                  f"{snap.mean_test_accuracy:>7.3f} "
                  f"{snap.mean_accounted_params:>9.1f} "
                  f"{snap.mean_inference_flops:>9.0f}")

    print("\nfinal models:")
    for task in TASKS:
        m = system.models_for(task)[0]
        print(f"  {task:6s} depth={m.hidden_count()} "
              f"resolution={m.hparams['resolution']} quality={m.quality:.3f}")
