import numpy as np

from evograft.rng import Rng, fnv1a64


def test_replay_is_identical():
    a = Rng(42, "stream")
    b = Rng(42, "stream")
    assert [a.uniform() for _ in range(50)] == [b.uniform() for _ in range(50)]


def test_state_round_trip_resumes_mid_stream():
    a = Rng(42, "stream")
    for _ in range(17):
        a.uniform()
    b = Rng.from_state(*a.state())
    assert [a.uniform() for _ in range(20)] == [b.uniform() for _ in range(20)]


def test_vector_draws_match_scalar_draws():
    a = Rng(9, "v")
    b = Rng(9, "v")
    vec = a.uniforms(257)
    scalars = np.array([b.uniform() for _ in range(257)])
    assert np.array_equal(vec, scalars)
    assert a.counter == b.counter


def test_normals_match_scalar_normal():
    a = Rng(9, "n")
    b = Rng(9, "n")
    vec = a.normals(33)
    scalars = np.array([b.normal() for _ in range(33)])
    assert np.allclose(vec, scalars, rtol=0, atol=0)


def test_streams_with_different_labels_disagree():
    a = Rng(5, "alpha")
    b = Rng(5, "beta")
    assert [a.raw() for _ in range(8)] != [b.raw() for _ in range(8)]


def test_spawn_does_not_consume_parent_draws():
    a = Rng(5, "parent")
    _ = a.spawn("child")
    assert a.counter == 0
    assert a.spawn("child").label == "parent/child"


def test_uniform_range_and_mean():
    u = Rng(123, "u").uniforms(20000)
    assert u.min() >= 0.0 and u.max() < 1.0
    # mean of U[0,1) over n draws: sigma = 1/sqrt(12 n)
    assert abs(u.mean() - 0.5) < 3.0 / np.sqrt(12 * 20000)


def test_normal_moments():
    z = Rng(7, "z").normals(20000)
    assert abs(z.mean()) < 3.0 / np.sqrt(20000)
    assert abs(z.std() - 1.0) < 0.03


def test_randint_bounds_and_coverage():
    rng = Rng(1, "ints")
    draws = [rng.randint(5) for _ in range(2000)]
    assert set(draws) == {0, 1, 2, 3, 4}


def test_shuffle_is_a_permutation():
    rng = Rng(2, "shuf")
    seq = list(range(40))
    rng.shuffle(seq)
    assert sorted(seq) == list(range(40))
    assert seq != list(range(40))


def test_fnv1a64_known_vector():
    # standard FNV-1a 64-bit test vector
    assert fnv1a64("") == 0xCBF29CE484222325
    assert fnv1a64("a") == 0xAF63DC4C8601EC8C


def test_label_validation():
    import pytest
    with pytest.raises(ValueError):
        Rng(0, "has space")
