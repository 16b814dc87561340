import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qmee.datagen import (
    Background,
    MixtureNoiseSpec,
    embed_and_split,
    gen_linear_regression,
    gen_mackey_glass,
    load_csv_dataset,
    make_rng,
    minmax_normalize,
    sample_mixture_noise,
    spawn_seeds,
    write_csv_dataset,
)
from qmee.datagen import CsvFormatError


def test_gaussian_background_has_unit_variance():
    spec = MixtureNoiseSpec(c=0.0, background=Background.GAUSSIAN)
    v = sample_mixture_noise(100_000, spec, 1)
    assert abs(v.var() - 1.0) < 0.03


def test_pure_outliers_have_configured_variance():
    spec = MixtureNoiseSpec(c=1.0, outlier_var=10000.0)
    v = sample_mixture_noise(100_000, spec, 2)
    assert abs(v.var() / 10000.0 - 1.0) < 0.05


def test_zero_noise_targets_are_exact():
    spec = MixtureNoiseSpec(c=0.0, background=Background.NONE)
    ds = gen_linear_regression(50, spec, seed=3)
    np.testing.assert_array_equal(ds.targets, ds.true_omega @ ds.inputs)
    assert ds.inputs.shape == (2, 50)
    assert ds.inputs.min() >= -2 and ds.inputs.max() <= 2


@pytest.mark.parametrize("case,mean,var", [
    (1, 0.0, 10.0), (2, -8.0 / 3.0, 1.0 + 98.0 / 9.0), (3, 0.0, 4.0), (4, 0.0, 1.0)])
def test_background_moments(case, mean, var):
    spec = MixtureNoiseSpec.case(case, c=0.0)
    v = sample_mixture_noise(200_000, spec, case)
    se = math.sqrt(var / v.size)
    assert abs(v.mean() - mean) < 5 * se
    assert abs(v.var() / var - 1.0) < 0.03


def test_gate_frequency_within_three_standard_errors():
    c = 0.2
    spec = MixtureNoiseSpec.esn(0.1, c=c)
    _, gate = sample_mixture_noise(100_000, spec, 5, return_gate=True)
    se = math.sqrt(c * (1 - c) / gate.size)
    assert abs(gate.mean() - c) < 3 * se
    assert abs(gate.mean() - c) < 0.01


def test_generators_are_deterministic():
    spec = MixtureNoiseSpec.case(1)
    a = gen_linear_regression(100, spec, seed=11)
    b = gen_linear_regression(100, spec, seed=11)
    assert a.inputs.tobytes() == b.inputs.tobytes()
    assert a.targets.tobytes() == b.targets.tobytes()
    c = gen_linear_regression(100, spec, seed=12)
    assert not np.array_equal(a.targets, c.targets)


def test_spawned_substreams_are_independent_of_order():
    seeds = spawn_seeds(7, 4)
    first = [make_rng(s).random(3) for s in seeds]
    again = [make_rng(s).random(3) for s in reversed(spawn_seeds(7, 4))][::-1]
    for x, y in zip(first, again):
        np.testing.assert_array_equal(x, y)
    assert not np.array_equal(first[0], first[1])


def test_noise_spec_rejects_bad_values():
    with pytest.raises(ValueError):
        MixtureNoiseSpec(c=1.5)
    with pytest.raises(ValueError):
        MixtureNoiseSpec(outlier_var=-1.0)
    with pytest.raises(ValueError):
        MixtureNoiseSpec.case(7)
    with pytest.raises(ValueError):
        gen_linear_regression(0, MixtureNoiseSpec(), 0)


def test_mackey_glass_without_feedback_is_exponential_decay():
    x = gen_mackey_glass(100, b=0.0, transient=0.0)
    t = np.arange(100.0)
    np.testing.assert_allclose(x, 1.2 * np.exp(-0.1 * t), rtol=0, atol=1e-6)


def test_mackey_glass_step_halving():
    coarse = gen_mackey_glass(100, dt=0.1)
    fine = gen_mackey_glass(100, dt=0.05)
    assert np.max(np.abs(coarse - fine)) < 1e-4


def test_mackey_glass_is_aperiodic():
    x = gen_mackey_glass(1500)
    assert np.all(np.isfinite(x))
    for p in range(1, 501):
        assert np.max(np.abs(x[p:] - x[:-p])) > 1e-6, p


def test_mackey_glass_rejects_misaligned_delay():
    with pytest.raises(ValueError):
        gen_mackey_glass(10, tau=17.05)


def test_embedding_without_noise_reproduces_raw():
    raw = gen_mackey_glass(1400)
    ds = embed_and_split(raw, None)
    assert ds.train_inputs.shape == (900, 4) and ds.test_inputs.shape == (400, 4)
    assert ds.train_targets.size == 900 and ds.test_targets.size == 400
    np.testing.assert_array_equal(ds.train_targets, raw[ds.train_index])
    np.testing.assert_array_equal(ds.test_targets, raw[ds.test_index])
    k = 10
    t = ds.train_index[k]
    np.testing.assert_array_equal(ds.train_inputs[k], raw[[t - 24, t - 18, t - 12, t - 6]])


def test_embedding_noise_hits_training_targets_only():
    raw = gen_mackey_glass(1400)
    ds = embed_and_split(raw, MixtureNoiseSpec.esn(0.2), seed=1)
    np.testing.assert_array_equal(ds.test_targets, raw[ds.test_index])
    assert not np.array_equal(ds.train_targets, ds.train_clean_targets)
    with pytest.raises(ValueError):
        embed_and_split(raw[:500], None)


def test_minmax_examples():
    tr, te, sc = minmax_normalize(np.array([[0.0], [5.0], [10.0]]), np.array([[15.0], [-5.0]]))
    np.testing.assert_array_equal(tr.ravel(), [0.0, 0.5, 1.0])
    np.testing.assert_array_equal(te.ravel(), [1.5, -0.5])
    with pytest.raises(ValueError, match="feature 1"):
        minmax_normalize(np.array([[0.0, 2.0], [1.0, 2.0]]))


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 30), st.integers(1, 4), st.integers(0, 2**31))
def test_minmax_round_trip(n, d, seed):
    x = make_rng(seed).normal(size=(n, d)) * 10
    tr, _, sc = minmax_normalize(x)
    assert tr.min() >= 0 and tr.max() <= 1
    np.testing.assert_allclose(sc.inverse(tr), x, rtol=0, atol=1e-12 * max(1.0, np.abs(x).max()))


def test_csv_toy_file(tmp_path):
    p = tmp_path / "toy.csv"
    p.write_text("a,b,y\n1,2,3\n4,5,6\n7,8,9\n")
    ds = load_csv_dataset(p, "y")
    assert ds.inputs.shape == (2, 3)
    np.testing.assert_array_equal(ds.targets, [3, 6, 9])
    ds0 = load_csv_dataset(p, 0)
    np.testing.assert_array_equal(ds0.targets, [1, 4, 7])
    assert ds0.feature_names == ["b", "y"]


def test_csv_errors(tmp_path):
    blank = tmp_path / "blank.csv"
    blank.write_text("a,b,y\n1,2,3\n4,,6\n")
    with pytest.raises(CsvFormatError, match=r"row 3, column 2"):
        load_csv_dataset(blank, "y")
    ragged = tmp_path / "ragged.csv"
    ragged.write_text("a,b,y\n1,2,3\n4,5\n")
    with pytest.raises(CsvFormatError, match="row 3"):
        load_csv_dataset(ragged, "y")
    with pytest.raises(FileNotFoundError):
        load_csv_dataset(tmp_path / "missing.csv", "y")
    with pytest.raises(CsvFormatError):
        load_csv_dataset(blank, "nope")


def test_csv_round_trip(tmp_path):
    ds = gen_linear_regression(40, MixtureNoiseSpec.case(2), seed=9)
    p = tmp_path / "rt.csv"
    write_csv_dataset(ds, p)
    back = load_csv_dataset(p, "y")
    np.testing.assert_array_equal(back.inputs, ds.inputs)
    np.testing.assert_array_equal(back.targets, ds.targets)
