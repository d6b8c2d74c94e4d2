import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ctxgap.environments import (
    EnvSpec,
    EnvStep,
    KernelExpansion,
    child_seed,
    load_csv,
    make_env,
    simple_regret,
    simple_regret_batch,
    step,
    write_csv,
)
from ctxgap.errors import (
    DataParseError,
    EndOfDataError,
    InvalidArgumentError,
    SchemaError,
    UnsupportedError,
)
from ctxgap.kernel_core import KernelSpec

HALF_PI = np.array([[math.pi / 2]])


def test_sine_means_at_half_pi():
    env = make_env(EnvSpec("synthetic_sine", arms=20))
    m = env.means(HALF_PI)[0]
    assert m[0] == 1.0
    # sin(a pi/2) cycles through 1, 0, -1, 0, so every arm a = 1 mod 4 ties for best
    ref = [math.sin(a * math.pi / 2) for a in range(1, 21)]
    np.testing.assert_allclose(m, ref, atol=1e-15)
    assert int(np.argmax(m)) == 0


def test_simple_regret_values():
    env = make_env(EnvSpec("synthetic_sine", arms=20))
    m = env.means(HALF_PI)[0]
    s = EnvStep(HALF_PI[0], m, m)
    assert simple_regret(s, 0) == 0.0
    assert simple_regret(s, 1) == pytest.approx(1.0, abs=1e-15)
    perm = m.copy()
    perm[[3, 7]] = perm[[7, 3]]
    assert simple_regret(EnvStep(HALF_PI[0], perm, perm), 1) == simple_regret(s, 1)


def test_sine_bounds_and_noiseless_rewards():
    b = make_env(EnvSpec("synthetic_sine", arms=5)).generate(1000, 3)
    assert np.all((b.contexts >= 0) & (b.contexts <= 2 * math.pi))
    assert np.all(np.abs(b.means) <= 1.0)
    np.testing.assert_array_equal(b.rewards, b.means)


def test_offsets_give_persistent_order():
    env = make_env(EnvSpec("synthetic_sine", arms=3, offsets=(1.0, 0.5, 0.0), amplitude=0.2))
    m = env.generate(500, 0).means
    assert np.all(m[:, 0] > m[:, 2]) and np.all(m[:, 1] > m[:, 2])


def test_seed_determinism():
    env = make_env(EnvSpec("ar1_sensor", arms=4, dims=2, noise_sigma=0.1))
    a, b = env.generate(200, 11), env.generate(200, 11)
    np.testing.assert_array_equal(a.contexts, b.contexts)
    np.testing.assert_array_equal(a.rewards, b.rewards)
    c = env.generate(200, 12)
    assert not np.array_equal(a.contexts, c.contexts)


def test_prefix_consistency():
    env = make_env(EnvSpec("synthetic_sine", arms=4, noise_sigma=0.3))
    long, short = env.generate(300, 5), env.generate(100, 5)
    np.testing.assert_array_equal(long.head(100).rewards, short.rewards)
    ar = make_env(EnvSpec("ar1_sensor", arms=2))
    np.testing.assert_array_equal(ar.generate(300, 5).contexts[:100], ar.generate(100, 5).contexts)


def test_step_is_stream_of_spec_seed():
    env = make_env(EnvSpec("synthetic_sine", arms=3, seed=4))
    b = env.generate(10, 4)
    for t in (0, 9, 70):
        s = step(env, t)
        if t < 10:
            np.testing.assert_array_equal(s.context, b.contexts[t])
        assert s.true_means.shape == (3,)


def test_ar1_stationary_variance():
    X = make_env(EnvSpec("ar1_sensor", arms=1, dims=2, ar_coefficient=0.9)).generate(100_000, 0).contexts
    assert np.all(np.abs(X.var(axis=0) - 1.0) < 0.1)


def test_unit_circle_second_moment():
    env = make_env(EnvSpec("unit_circle", arms=2))
    X = env.generate(100_000, 0).contexts
    eig = np.linalg.eigvalsh(X.T @ X / len(X))
    assert np.all(np.abs(eig - 0.5) < 0.01)
    np.testing.assert_allclose(np.linalg.norm(X, axis=1), 1.0)
    assert np.all(np.linalg.norm(env.weights, axis=1) <= 1 + 1e-12)


def test_split_disjoint_streams():
    env = make_env(EnvSpec("synthetic_sine", arms=3))
    ex, ev = env.split(50, 20, 0)
    assert len(ex) == 50 and len(ev) == 20
    assert not np.intersect1d(ex.contexts, ev.contexts).size
    ar = make_env(EnvSpec("ar1_sensor", arms=2))
    ex, ev = ar.split(50, 20, 0)
    np.testing.assert_array_equal(ar.generate(70, 0).contexts[50:], ev.contexts)


def test_child_seed_is_pure():
    ss = np.random.SeedSequence(3)
    a = child_seed(ss, 1).generate_state(2)
    b = child_seed(ss, 1).generate_state(2)
    np.testing.assert_array_equal(a, b)
    assert ss.n_children_spawned == 0
    assert not np.array_equal(a, child_seed(ss, 2).generate_state(2))


def test_kernel_expansion_norm(rng):
    k = KernelSpec("gaussian", 0.7)
    f = KernelExpansion.random(k, 2, 8, rng, target_norm=1.5)
    assert f.rkhs_norm == pytest.approx(1.5)
    G = k.gram(f.centers, f.centers)
    assert math.sqrt(f.weights @ G @ f.weights) == pytest.approx(1.5)


def test_spec_validation():
    with pytest.raises(InvalidArgumentError):
        EnvSpec("moon")
    with pytest.raises(InvalidArgumentError):
        EnvSpec(ar_coefficient=1.0)
    with pytest.raises(InvalidArgumentError):
        EnvSpec(arms=3, offsets=(1.0,))
    with pytest.raises(InvalidArgumentError):
        EnvSpec("csv")
    with pytest.raises(InvalidArgumentError):
        make_env(EnvSpec("synthetic_sine", dims=2))


def test_csv_round_trip(tmp_path, rng):
    X, R, M = rng.normal(size=(3, 2)), rng.normal(size=(3, 4)), rng.normal(size=(3, 4))
    p = tmp_path / "d.csv"
    write_csv(p, X, R, M)
    env = load_csv(p, shuffle=False)
    np.testing.assert_array_equal(env.contexts, X)
    np.testing.assert_array_equal(env.rewards, R)
    np.testing.assert_array_equal(env.true_means, M)
    b = env.generate(3, 0)
    np.testing.assert_array_equal(b.contexts, X)


def test_csv_shuffle_orders(tmp_path, rng):
    p = tmp_path / "d.csv"
    write_csv(p, rng.normal(size=(150, 1)), rng.normal(size=(150, 2)))
    env = load_csv(p, shuffle=True)
    np.testing.assert_array_equal(env.order(1), env.order(1))
    assert not np.array_equal(env.order(1), env.order(2))


def test_csv_missing_means(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("d=1,A=2\n0.5, 0.1, 0.9, ,\n")
    env = load_csv(p, shuffle=False)
    assert env.true_means is None
    with pytest.raises(UnsupportedError):
        simple_regret(env.generate(1, 0).step(0), 0)
    with pytest.raises(UnsupportedError):
        simple_regret_batch(None, [0])


@pytest.mark.parametrize(
    "text, err, line",
    [
        ("", SchemaError, 1),
        ("d=1\n0,1\n", SchemaError, 1),
        ("d=1,A=2\n0.5,0.1\n", SchemaError, 2),
        ("d=1,A=2\n0.5,0.1,0.2\n0.5,x,0.2\n", DataParseError, 3),
        ("d=1,A=1,means=1\n0.5,0.1\n", SchemaError, 2),
        ("d=1,A=1\n0.5,inf\n", DataParseError, 2),
    ],
)
def test_csv_errors(tmp_path, text, err, line):
    p = tmp_path / "bad.csv"
    p.write_text(text)
    with pytest.raises(err) as info:
        load_csv(p)
    assert info.value.line == line
    assert str(info.value).startswith(f"line {line}:")


def test_csv_end_of_data(tmp_path, rng):
    p = tmp_path / "d.csv"
    write_csv(p, rng.normal(size=(5, 1)), rng.normal(size=(5, 2)))
    env = load_csv(p)
    with pytest.raises(EndOfDataError):
        env.generate(6, 0)
    with pytest.raises(EndOfDataError):
        env.split(4, 2, 0)
    ho, ev = env.halves(0.4)
    assert len(ho) == 2 and len(ev) == 3


@given(st.integers(0, 2**32 - 1), st.integers(2, 8))
def test_regret_nonnegative_and_zero_at_best(seed, A):
    b = make_env(EnvSpec("synthetic_sine", arms=A)).generate(20, seed)
    best = b.means.argmax(axis=1)
    assert np.all(simple_regret_batch(b.means, best) == 0)
    arms = np.random.default_rng(seed).integers(A, size=20)
    assert np.all(simple_regret_batch(b.means, arms) >= 0)
