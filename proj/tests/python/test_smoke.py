"""Smoke tests for the python bindings: one pass over every exposed
operation, checking shapes, ranges, and round trips rather than exact
numerics (the C++ test suite owns those)."""

import math

import numpy as np
import pytest

import tempogauge as tg


def test_constants():
    assert tg.MODEL_SAMPLE_RATE == 11025
    assert tg.NUM_MELS == 40
    assert tg.WINDOW_FRAMES == 256
    assert tg.NUM_CLASSES == 256
    assert tg.BPM_MIN == 30.0
    assert tg.BPM_MAX == 285.0
    assert tg.REFERENCE_TRAINABLE_PARAMS == 6583772


def test_class_mapping_round_trip():
    assert tg.bpm_to_class(120.0) == 90
    assert tg.class_to_bpm(90) == 120.0
    for cls in (0, 100, 255):
        assert tg.bpm_to_class(tg.class_to_bpm(cls)) == cls
    with pytest.raises(tg.Error):
        tg.bpm_to_class(0.0)
    with pytest.raises(tg.Error):
        tg.class_to_bpm(256)


def test_click_track_and_oracle():
    samples = tg.gen_click_track(132.0, duration_seconds=20.0, seed=7)
    assert samples.dtype == np.float32
    assert samples.shape == (round(20.0 * tg.MODEL_SAMPLE_RATE),)
    assert abs(float(np.abs(samples).max()) - 0.9) < 1e-3

    est = tg.oracle_tempo(samples, tg.MODEL_SAMPLE_RATE)
    assert abs(est - 132.0) <= 0.04 * 132.0

    again = tg.gen_click_track(132.0, duration_seconds=20.0, seed=7)
    assert np.array_equal(samples, again)

    with pytest.raises(tg.Error):
        tg.gen_click_track(10.0)


def test_mel_front_end():
    samples = tg.gen_click_track(100.0, duration_seconds=15.0, seed=1)
    mel, hop = tg.mel_spectrogram(samples, tg.MODEL_SAMPLE_RATE)
    assert mel.shape[0] == tg.NUM_MELS
    assert mel.shape[1] == 1 + (len(samples) - 1024) // 512
    assert hop == pytest.approx(512.0 / 11025.0)

    env = tg.onset_envelope(mel)
    assert env.shape == (mel.shape[1],)
    assert env[0] == 0.0
    assert abs(tg.autocorr_tempo(env, hop) - 100.0) <= 4.0


def test_scale_time():
    mel, hop = tg.mel_spectrogram(
        tg.gen_click_track(120.0, duration_seconds=15.0, seed=2),
        tg.MODEL_SAMPLE_RATE,
    )
    factors = tg.scale_factors()
    assert len(factors) == 11
    scaled, mult = tg.scale_time(mel, hop, factors[-1])
    assert mult == pytest.approx(1.2)
    assert scaled.shape == (tg.NUM_MELS, int(mel.shape[1] / mult + 0.5))
    with pytest.raises(tg.Error):
        tg.scale_time(mel, hop, 0.9)  # off the admissible grid


def test_accuracy_metrics():
    assert tg.accuracy0(120.4, 120.0)
    assert not tg.accuracy0(145.0, 290.0)
    assert tg.accuracy1(104.0, 100.0)
    assert not tg.accuracy1(140.0, 70.0)
    assert tg.accuracy2(145.0, 290.0) == 0.5
    assert tg.accuracy2(140.0, 70.0) == 2.0
    assert tg.accuracy2(150.0, 100.0) is None


def test_wav_round_trip(tmp_path):
    samples = tg.gen_click_track(90.0, duration_seconds=12.0, seed=4)
    path = tmp_path / "click.wav"
    tg.write_wav(path, samples, tg.MODEL_SAMPLE_RATE)
    loaded, rate = tg.read_wav(path)
    assert rate == tg.MODEL_SAMPLE_RATE
    assert loaded.shape == samples.shape
    assert float(np.abs(loaded - samples).max()) < 1e-4


def test_model_predict_and_save_load(tmp_path):
    model = tg.Model.build(seed=5)
    assert model.param_count == 6424960
    assert model.rnn_param_count == 10900
    assert model.seed == 5

    samples = tg.gen_click_track(140.0, duration_seconds=15.0, seed=6)
    mel, _ = tg.mel_spectrogram(samples, tg.MODEL_SAMPLE_RATE)
    window = mel[:, : tg.WINDOW_FRAMES]

    probs = model.predict_window(window)
    assert probs.shape == (tg.NUM_CLASSES,)
    assert float(probs.sum()) == pytest.approx(1.0, abs=1e-5)

    est = model.estimate_track(samples, tg.MODEL_SAMPLE_RATE)
    assert tg.BPM_MIN <= est["bpm"] <= tg.BPM_MAX
    assert est["n_windows"] >= 1
    assert est["probs"].shape == (tg.NUM_CLASSES,)

    path = tmp_path / "weights.tgw"
    model.save(path)
    loaded = tg.Model.load(path)
    assert np.array_equal(loaded.predict_window(window), probs)

    with pytest.raises(tg.Error):
        tg.Model.load(tmp_path / "missing.tgw")


def test_train_and_evaluate(tmp_path):
    manifest = tg.gen_corpus(4, 80.0, 160.0, tmp_path / "corpus", seed=9)
    history = tg.train(
        manifest,
        tmp_path / "run",
        batch_size=4,
        max_epochs=1,
        patience=1,
        windows_per_track=1,
        seed=9,
    )
    assert history["best_epoch"] == 1
    assert math.isfinite(history["best_val_loss"])
    assert len(history["epochs"]) == 1
    assert (tmp_path / "run" / "weights.tgw").exists()
    assert (tmp_path / "run" / "history.json").exists()

    model = tg.Model.load(history["weights"])
    table, report_json = tg.evaluate(model, manifest)
    assert "Dataset" in table and "Acc2" in table
    assert '"acc2_factor"' in report_json


def test_grad_checks_small_tolerance():
    report = tg.run_grad_checks(tolerance=1e-4)
    assert report["passed"]
    names = {b["name"] for b in report["blocks"]}
    assert "full_stack" in names
    assert any(b["skipped"] for b in report["blocks"])
