"""Smoke tests for the python bindings, cross-checked against numpy/scipy."""

import math

import numpy as np
import pytest
import scipy.signal
import scipy.stats

import eegkd


def test_zero_center_worked_example():
    f = np.array([1.0, 0.0, 0.0, 2.0]).reshape(2, 1, 1, 2)
    out = eegkd.zero_center(f)
    np.testing.assert_allclose(out.ravel(), [0.25, -0.75, -0.75, 1.25], atol=1e-12)


def test_similarity_matrix_micro_example():
    f = np.array([1.0, 0.0, 0.0, 2.0]).reshape(2, 1, 1, 2)
    m = eegkd.similarity_matrix(f, criterion="cosine", centered=True)
    expected = -1.125 / math.sqrt(0.625 * 2.125)
    assert m[0, 1] == pytest.approx(expected, abs=1e-9)
    assert m[0, 0] == pytest.approx(1.0)


def test_sk_loss_micro_example():
    teacher = {"LF2": np.array([1.0, 0.0, 0.0, 1.0]).reshape(2, 1, 1, 2)}
    student = {"LF2": np.array([1.0, 0.0, 0.0, 2.0]).reshape(2, 1, 1, 2)}
    loss = eegkd.sk_loss(teacher, student, layer_pairs=[("LF2", "LF2")])
    assert loss == pytest.approx(2.8353e-4, abs=1e-6)


def test_sk_loss_identity_is_zero():
    rng = np.random.default_rng(0)
    taps = {
        "LF2": rng.normal(size=(4, 3, 1, 8)),
        "LF3": rng.normal(size=(4, 2, 1, 5)),
    }
    assert eegkd.sk_loss(taps, taps) == 0.0


def test_hkd_loss_worked_example():
    z = np.array([[1.0, 0.0]])
    loss = eegkd.hkd_loss(z, z, [0], alpha=0.9, temperature=4.0)
    assert loss == pytest.approx(0.1 * math.log(1 + math.exp(-1)), abs=1e-9)


def test_total_loss_breakdown_sums_exactly():
    rng = np.random.default_rng(1)
    teacher = {
        "LF2": rng.normal(size=(3, 2, 1, 6)),
        "LF3": rng.normal(size=(3, 2, 1, 4)),
        "logits": rng.normal(size=(3, 4, 1, 1)),
    }
    student = {
        "LF2": rng.normal(size=(3, 2, 1, 6)),
        "LF3": rng.normal(size=(3, 2, 1, 4)),
        "logits": rng.normal(size=(3, 4, 1, 1)),
    }
    out = eegkd.total_loss(teacher, student, [0, 1, 2], use_logits_loss=True)
    assert out["total"] == out["term_ce"] + out["term_kl"] + out["term_sk"]
    assert out["term_sk"] == pytest.approx(450.0 * out["sk"])


def test_wilcoxon_signed_rank_against_scipy():
    rng = np.random.default_rng(2)
    checked = 0
    for _ in range(100):
        n = int(rng.integers(3, 13))
        a = rng.normal(size=n)
        b = rng.normal(size=n)
        stat, p, exact = eegkd.wilcoxon_signed_rank(list(a), list(b))
        assert exact
        ref = scipy.stats.wilcoxon(a, b, alternative="two-sided", method="exact")
        assert p == pytest.approx(ref.pvalue, abs=1e-6)
        checked += 1
    assert checked == 100


def test_wilcoxon_rank_sum_against_scipy():
    rng = np.random.default_rng(3)
    for _ in range(100):
        na = int(rng.integers(2, 9))
        nb = int(rng.integers(2, 9))
        a = rng.normal(size=na)
        b = rng.normal(size=nb)
        stat, p, exact = eegkd.wilcoxon_rank_sum(list(a), list(b))
        assert exact
        ref = scipy.stats.mannwhitneyu(a, b, alternative="two-sided", method="exact")
        assert p == pytest.approx(ref.pvalue, abs=1e-6)


def test_pinned_statistics_examples():
    _, p, _ = eegkd.wilcoxon_signed_rank([2.0, 3.0, 4.0], [1.0, 1.0, 1.0])
    assert p == pytest.approx(0.25, abs=1e-12)
    _, p, _ = eegkd.wilcoxon_rank_sum([1.0, 2.0, 3.0], [4.0, 5.0, 6.0])
    assert p == pytest.approx(0.1, abs=1e-12)


def test_plv_bounds_and_identity():
    rng = np.random.default_rng(4)
    x = rng.normal(size=64)
    assert eegkd.plv(list(x), list(x)) == pytest.approx(1.0)
    y = rng.normal(size=64)
    assert 0.0 <= eegkd.plv(list(x), list(y)) <= 1.0


def test_plv_against_scipy_hilbert_oracle():
    rng = np.random.default_rng(7)
    for length in (16, 37, 100, 256, 333):  # includes non-power-of-two lengths
        a = rng.normal(size=length)
        b = rng.normal(size=length)
        pa = np.angle(scipy.signal.hilbert(a))
        pb = np.angle(scipy.signal.hilbert(b))
        ref = abs(np.mean(np.exp(1j * (pa - pb))))
        assert eegkd.plv(list(a), list(b)) == pytest.approx(ref, abs=1e-9)


def test_resample_against_scipy():
    t = np.arange(1024) / 256.0
    x = np.sin(2 * np.pi * 10 * t)[None, :]
    got = eegkd.resample(x, 256, 128)
    ref = scipy.signal.resample_poly(x, 1, 2, axis=1)
    assert got.shape == (1, 512)
    corr = np.corrcoef(got[0, 16:-16], ref[0, 16:-16])[0, 1]
    assert corr > 0.999


def test_bandpass_matches_scipy_filtfilt():
    rng = np.random.default_rng(5)
    x = rng.normal(size=(2, 512))
    got = eegkd.bandpass(x, 4, 38, 128)
    b, a = scipy.signal.butter(4, [4, 38], btype="bandpass", fs=128)
    ref = scipy.signal.filtfilt(b, a, x, axis=1)
    assert np.max(np.abs(got - ref)) < 1e-6


def test_container_roundtrip(tmp_path):
    rng = np.random.default_rng(6)
    data = rng.normal(size=(5, 3, 32)).astype(np.float32)
    path = str(tmp_path / "d.eegc")
    eegkd.save_epoched(path, data, [0, 1, 2, 0, 1], 128.0, ["C3", "Cz", "C4"], 3)
    back = eegkd.load_epoched(path)
    np.testing.assert_array_equal(back["data"], data)
    assert back["labels"] == [0, 1, 2, 0, 1]
    assert back["fs"] == 128.0
    assert back["channel_names"] == ["C3", "Cz", "C4"]


def test_errors_are_typed():
    with pytest.raises(eegkd.EegkdError):
        eegkd.bandpass(np.zeros((1, 512)), 4, 100, 128)  # band beyond Nyquist
    with pytest.raises(eegkd.EegkdError):
        eegkd.plv([1.0, 2.0, 3.0, 4.0], [1.0, 2.0, 3.0])
