"""Command-line front end over the library.

Subcommands: init, run, add-tasks, set-scoring, report, export-dot, gen-tasks.
Exits 0 on success; on failure prints a one-line diagnostic to stderr and
exits nonzero. ``run`` saves the checkpoint after every task iteration and,
rerun against the same segments file, continues from the recorded position.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace

from . import checkpoint as ckpt
from .data import DatasetError, generate_synthetic_tasks, load_gen_spec, load_task_dir
from .evolution import EvolutionConfig, load_segments, run_segment
from .scoring import calibrate
from .search_space import load_space
from .system import SystemState, export_dot
from .evolution import bootstrap_system
from .reports import emit_reports


def _scan_tasks(root: str) -> dict[str, str]:
    """Map task name to directory for every dataset under ``root``."""
    paths = {}
    for entry in sorted(os.listdir(root)):
        full = os.path.join(root, entry)
        if os.path.isdir(full) and os.path.exists(os.path.join(full, "meta")):
            ds = load_task_dir(full)
            if ds.name in paths:
                raise DatasetError(f"duplicate task name {ds.name!r} under {root}")
            paths[ds.name] = full
    if not paths:
        raise DatasetError(f"no task directories under {root}")
    return paths


def _load_registered(system: SystemState):
    return {name: load_task_dir(path) for name, path in system.task_paths.items()}


def cmd_init(args) -> None:
    space = load_space(args.space)
    paths = _scan_tasks(args.tasks)
    datasets = {name: load_task_dir(path) for name, path in paths.items()}
    channels = {ds.c for ds in datasets.values()}
    if len(channels) != 1:
        raise DatasetError(f"tasks disagree on channel count: {sorted(channels)}")
    system = bootstrap_system(space, args.seed, width=args.width, depth=args.depth,
                              patch=args.patch, channels=channels.pop())
    system.task_paths = paths
    ckpt.save_checkpoint(system, args.out)
    print(f"initialized checkpoint at {args.out} with {len(paths)} task(s)")


def cmd_run(args) -> None:
    system = ckpt.load_checkpoint(args.checkpoint)
    segments = load_segments(args.segments)
    datasets = _load_registered(system)
    base_cfg = EvolutionConfig()

    resume_label, resume_done = (None, 0)
    if system.run_position is not None:
        resume_label, resume_done = system.run_position
        if resume_label not in {s.label for s in segments}:
            raise ValueError(
                f"checkpoint is positioned at unknown segment {resume_label!r}")
    reached_resume = resume_label is None

    for segment in segments:
        total = segment.iterations * len(segment.tasks)
        skip = 0
        resuming_mid_segment = False
        if not reached_resume:
            if segment.label != resume_label:
                continue
            reached_resume = True
            if resume_done >= total:
                continue
            skip = resume_done
            resuming_mid_segment = skip > 0

        done = skip

        def save_progress(snap, _segment=segment):
            nonlocal done
            done += 1
            system.run_position = (_segment.label, done)
            ckpt.save_checkpoint(system, args.checkpoint)
            print(f"[{snap.index}] {_segment.label}/{snap.task} "
                  f"acc={snap.mean_test_accuracy:.4f} "
                  f"params={snap.mean_accounted_params:.1f} "
                  f"flops={snap.mean_inference_flops:.0f}")

        run_segment(system, segment, datasets, base_cfg,
                    on_iteration=save_progress, skip_iterations=skip,
                    apply_scoring_overrides=not resuming_mid_segment)
        system.run_position = (segment.label, total)
        ckpt.save_checkpoint(system, args.checkpoint)
    print(f"run complete: {system.iterations_done} task iteration(s) total")


def cmd_add_tasks(args) -> None:
    system = ckpt.load_checkpoint(args.checkpoint)
    paths = _scan_tasks(args.tasks)
    added = 0
    for name, path in paths.items():
        if name in system.task_paths:
            if os.path.abspath(system.task_paths[name]) != os.path.abspath(path):
                raise DatasetError(f"task {name!r} already registered elsewhere")
            continue
        system.task_paths[name] = path
        added += 1
    ckpt.save_checkpoint(system, args.checkpoint)
    print(f"registered {added} new task(s)")


def cmd_set_scoring(args) -> None:
    system = ckpt.load_checkpoint(args.checkpoint)
    system.score_params = replace(system.score_params, s=args.s)
    if args.recalibrate is not None:
        system.score_params = calibrate(system, args.recalibrate)
    ckpt.save_checkpoint(system, args.checkpoint)
    sp = system.score_params
    print(f"scoring set: s={sp.s} P={sp.P:.6g} F={sp.F:.6g}")


def cmd_report(args) -> None:
    system = ckpt.load_checkpoint(args.checkpoint)
    written = emit_reports(system, system.history, args.out)
    print(f"wrote {len(written)} report file(s) to {args.out}")


def cmd_export_dot(args) -> None:
    system = ckpt.load_checkpoint(args.checkpoint)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(export_dot(system))
    print(f"wrote {args.out}")


def cmd_gen_tasks(args) -> None:
    spec = load_gen_spec(args.spec)
    paths = generate_synthetic_tasks(spec, args.seed, args.out)
    print(f"generated {len(paths)} task(s) under {args.out}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="evograft")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("init", help="create a fresh system checkpoint")
    p.add_argument("--space", required=True, help="axis table file")
    p.add_argument("--tasks", required=True, help="directory of task datasets")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--width", type=int, default=32)
    p.add_argument("--depth", type=int, default=4)
    p.add_argument("--patch", type=int, default=8)
    p.add_argument("out", help="checkpoint directory to create")
    p.set_defaults(func=cmd_init)

    p = sub.add_parser("run", help="run a segment file against a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--segments", required=True)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("add-tasks", help="register additional task datasets")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--tasks", required=True)
    p.set_defaults(func=cmd_add_tasks)

    p = sub.add_parser("set-scoring", help="set the scale factor, optionally recalibrate P/F")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--s", type=float, required=True)
    p.add_argument("--recalibrate", type=float, default=None)
    p.set_defaults(func=cmd_set_scoring)

    p = sub.add_parser("report", help="emit CSV reports and the DOT graph")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("export-dot", help="write the system graph as DOT text")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export_dot)

    p = sub.add_parser("gen-tasks", help="generate synthetic task datasets")
    p.add_argument("--spec", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_tasks)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
