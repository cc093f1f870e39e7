import numpy as np

from percolab.rng import fold_key, uniforms


def test_reproducible_and_in_range():
    keys = np.arange(1000, dtype=np.uint64)
    a = uniforms(7, keys, 0, 3)
    assert a.shape == (3, 1000)
    assert np.array_equal(a, uniforms(7, keys, 0, 3))
    assert ((a >= 0) & (a < 1)).all()


def test_trial_offsets_line_up():
    keys = np.arange(50, dtype=np.uint64)
    block = uniforms(1, keys, 0, 6)
    assert np.array_equal(block[4:], uniforms(1, keys, 4, 2))


def test_draws_depend_on_key_not_position():
    keys = np.array([5, 17, 99], dtype=np.uint64)
    a = uniforms(3, keys)
    b = uniforms(3, keys[::-1])
    assert np.array_equal(a[0], b[0][::-1])


def test_roughly_uniform():
    u = uniforms(123, np.arange(200000, dtype=np.uint64))[0]
    assert abs(u.mean() - 0.5) < 0.003
    hist = np.histogram(u, bins=10, range=(0, 1))[0]
    assert np.all(np.abs(hist - 20000) < 700)
    assert abs(np.corrcoef(u[:-1], u[1:])[0, 1]) < 0.01


def test_seeds_and_trials_decorrelated():
    keys = np.arange(10000, dtype=np.uint64)
    a = uniforms(1, keys)[0]
    b = uniforms(2, keys)[0]
    c = uniforms(1, keys, 1)[0]
    assert abs(np.corrcoef(a, b)[0, 1]) < 0.05
    assert abs(np.corrcoef(a, c)[0, 1]) < 0.05


def test_fold_key():
    assert fold_key(12345) == 12345
    big = fold_key(2**100 + 5)
    assert 0 <= big < 2**64
    assert big != fold_key(2**100 + 6)
