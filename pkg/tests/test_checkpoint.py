import os

import pytest

from evograft.checkpoint import (CheckpointError, checkpoint_digest, load_checkpoint,
                                 save_checkpoint, system_digest)
from evograft.evolution import bootstrap_system, run_task_iteration
from evograft.rng import Rng
from evograft.search_space import load_builtin_space

from conftest import make_dataset
from test_data import tree_sha
from test_evolution import quick_config


def evolved_system(seed=21, iterations=1):
    from evograft.evolution import metrics_snapshot
    system = bootstrap_system(load_builtin_space("desk"), seed=seed, width=8,
                              depth=3, patch=8, channels=3)
    system.task_paths = {"t": "datasets/t"}
    ds = make_dataset("t", seed=60)
    for _ in range(iterations):
        run_task_iteration(system, "t", ds, quick_config(), system.rng)
        system.history.append(metrics_snapshot(system, {"t": ds}, ["t"], "seg", "t"))
    return system


def test_save_load_save_is_byte_identical(tmp_path):
    system = evolved_system()
    system.run_position = ("seg", 1)
    first = tmp_path / "one"
    second = tmp_path / "two"
    save_checkpoint(system, str(first))
    reloaded = load_checkpoint(str(first))
    save_checkpoint(reloaded, str(second))
    assert tree_sha(first) == tree_sha(second)
    assert checkpoint_digest(str(first)) == checkpoint_digest(str(second))


def test_load_reproduces_every_field(tmp_path):
    system = evolved_system()
    save_checkpoint(system, str(tmp_path))
    other = load_checkpoint(str(tmp_path))
    assert system_digest(other) == system_digest(system)
    assert other.rng.state() == system.rng.state()
    assert other.task_paths == system.task_paths
    assert other.selection_counts == system.selection_counts
    assert other.ever_trainable == system.ever_trainable
    assert other.iterations_done == system.iterations_done
    assert len(other.history) == len(system.history)
    assert other.history[0].per_task == system.history[0].per_task
    for mid, model in system.models.items():
        twin = other.models[mid]
        assert twin.layers == model.layers
        assert twin.hparams == model.hparams
        assert twin.mu == model.mu
        assert twin.quality == model.quality


def test_rng_resumes_mid_stream(tmp_path):
    system = evolved_system()
    continuation = Rng.from_state(*system.rng.state())
    upcoming = [continuation.uniform() for _ in range(3)]
    save_checkpoint(system, str(tmp_path))
    other = load_checkpoint(str(tmp_path))
    assert [other.rng.uniform() for _ in range(3)] == upcoming


def test_truncated_block_file_names_the_block(tmp_path):
    system = evolved_system()
    save_checkpoint(system, str(tmp_path))
    victim = sorted(system.blocks)[0]
    path = tmp_path / "blocks" / f"{victim}.bin"
    path.write_bytes(path.read_bytes()[:10])
    with pytest.raises(CheckpointError, match=str(victim)):
        load_checkpoint(str(tmp_path))


def test_missing_block_file_names_the_block(tmp_path):
    system = evolved_system()
    save_checkpoint(system, str(tmp_path))
    victim = sorted(system.blocks)[-1]
    os.remove(tmp_path / "blocks" / f"{victim}.bin")
    with pytest.raises(CheckpointError, match=str(victim)):
        load_checkpoint(str(tmp_path))


def test_version_mismatch_rejected(tmp_path):
    system = evolved_system()
    save_checkpoint(system, str(tmp_path))
    manifest = tmp_path / "manifest"
    text = manifest.read_text().replace("evograft-checkpoint 1", "evograft-checkpoint 999")
    manifest.write_text(text)
    with pytest.raises(CheckpointError, match="version"):
        load_checkpoint(str(tmp_path))


def test_corrupt_manifest_line_rejected(tmp_path):
    system = evolved_system()
    save_checkpoint(system, str(tmp_path))
    manifest = tmp_path / "manifest"
    manifest.write_text(manifest.read_text() + "blurb nonsense\n")
    with pytest.raises(CheckpointError):
        load_checkpoint(str(tmp_path))
    with pytest.raises(CheckpointError):
        load_checkpoint(str(tmp_path / "missing"))


def test_interrupted_and_resumed_run_matches_straight_run(tmp_path):
    from evograft.evolution import metrics_snapshot
    straight = evolved_system(iterations=2)

    broken = evolved_system(iterations=1)
    save_checkpoint(broken, str(tmp_path))
    resumed = load_checkpoint(str(tmp_path))
    ds = make_dataset("t", seed=60)
    run_task_iteration(resumed, "t", ds, quick_config(), resumed.rng)
    resumed.history.append(metrics_snapshot(resumed, {"t": ds}, ["t"], "seg", "t"))

    assert system_digest(resumed) == system_digest(straight)


def test_identical_seeds_give_identical_digests():
    assert system_digest(evolved_system(seed=5)) == system_digest(evolved_system(seed=5))
    assert system_digest(evolved_system(seed=5)) != system_digest(evolved_system(seed=6))


def test_stale_block_payloads_are_removed(tmp_path):
    system = evolved_system()
    save_checkpoint(system, str(tmp_path))
    junk = tmp_path / "blocks" / "9999.bin"
    junk.write_bytes(b"junk")
    save_checkpoint(system, str(tmp_path))
    assert not junk.exists()
