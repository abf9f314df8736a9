import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from isodiffi.errors import InvalidArgumentError
from isodiffi.synth import FAMILIES, SynthSpec, dataset_name, generate, generate_test_outliers


def test_default_spec_counts():
    data, labels = generate(SynthSpec(1000, 0.10, 4, 0))
    assert data.n == 1000 and data.p == 6
    assert labels.sum() == 100
    assert data.feature_names == ("f1", "f2", "f3", "f4", "f5", "f6")


def test_radii_bands():
    data, labels = generate(SynthSpec(2000, 0.2, 2, 5))
    r = np.hypot(data.values[:, 0], data.values[:, 1])
    assert (r[labels == 0] <= 3).all()
    assert ((r[labels == 1] >= 4) & (r[labels == 1] <= 30)).all()
    assert not ((r > 3) & (r < 4)).any()


def test_noise_mean_concentration():
    n = 1000
    data, _ = generate(SynthSpec(n, 0.1, 4, 11))
    assert (np.abs(data.values[:, 2:].mean(axis=0)) <= 4 / np.sqrt(n)).all()


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 3000), st.floats(0.001, 0.999))
def test_outlier_count_round_half_up(n, frac):
    spec = SynthSpec(n, frac, 1, 0)
    _, labels = generate(spec)
    assert labels.sum() == int(np.floor(n * frac + 0.5)) == spec.n_outliers


def test_deterministic_and_noise_independent():
    a, la = generate(SynthSpec(500, 0.1, 4, 3))
    b, lb = generate(SynthSpec(500, 0.1, 4, 3))
    assert np.array_equal(a.values, b.values) and np.array_equal(la, lb)
    c, lc = generate(SynthSpec(500, 0.1, 9, 3))
    assert np.array_equal(a.values[:, :2], c.values[:, :2]) and np.array_equal(la, lc)


def test_spec_validation():
    for bad in (dict(n=0), dict(anomaly_fraction=0.0), dict(anomaly_fraction=1.0), dict(p_noise=-1), dict(seed=-1)):
        with pytest.raises(InvalidArgumentError):
            SynthSpec(**bad)


def test_dataset_name():
    assert SynthSpec(1000, 0.10, 4).name == "1k_10_4"
    assert dataset_name(10000, 0.05, 8) == "10k_5_8"
    assert dataset_name(1500, 0.025, 0) == "1500_2.5_0"


@pytest.mark.parametrize("noise", ["zero", "resample"])
def test_test_outlier_families(noise):
    X, fam = generate_test_outliers(100, seed=2, p_noise=4, noise=noise)
    assert X.n == 300 and X.p == 6
    assert [int((fam == f).sum()) for f in FAMILIES] == [100, 100, 100]
    v = X.values
    xa, ya, bi = v[fam == "x-axis"], v[fam == "y-axis"], v[fam == "bisector"]
    assert (xa[:, 1] == 0).all() and (ya[:, 0] == 0).all()
    assert np.array_equal(np.abs(bi[:, 0]), np.abs(bi[:, 1]))
    for block in (xa, ya, bi):
        r = np.hypot(block[:, 0], block[:, 1])
        assert ((r >= 4 - 1e-12) & (r <= 30 + 1e-12)).all()
        signed = block[:, 0] + block[:, 1]
        assert (signed[::2] > 0).all() and (signed[1::2] < 0).all()
    if noise == "zero":
        assert (v[:, 2:] == 0).all()
    else:
        assert v[:, 2:].std() > 0.5


def test_test_outlier_validation():
    with pytest.raises(InvalidArgumentError):
        generate_test_outliers(0)
    with pytest.raises(InvalidArgumentError):
        generate_test_outliers(5, noise="other")
