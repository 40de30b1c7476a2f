"""Tempo estimation toolkit: synthetic percussion, a mel front end, an
autocorrelation oracle, and a recurrent tempo classifier."""

from ._tempogauge import (
    BPM_MAX,
    BPM_MIN,
    MODEL_SAMPLE_RATE,
    NUM_CLASSES,
    NUM_MELS,
    REFERENCE_TRAINABLE_PARAMS,
    WINDOW_FRAMES,
    Error,
    Model,
    accuracy0,
    accuracy1,
    accuracy2,
    autocorr_tempo,
    bpm_to_class,
    class_to_bpm,
    evaluate,
    gen_click_track,
    gen_corpus,
    mel_spectrogram,
    onset_envelope,
    oracle_tempo,
    read_wav,
    run_grad_checks,
    scale_factors,
    scale_time,
    train,
    write_wav,
)

__all__ = [
    "BPM_MAX",
    "BPM_MIN",
    "MODEL_SAMPLE_RATE",
    "NUM_CLASSES",
    "NUM_MELS",
    "REFERENCE_TRAINABLE_PARAMS",
    "WINDOW_FRAMES",
    "Error",
    "Model",
    "accuracy0",
    "accuracy1",
    "accuracy2",
    "autocorr_tempo",
    "bpm_to_class",
    "class_to_bpm",
    "evaluate",
    "gen_click_track",
    "gen_corpus",
    "mel_spectrogram",
    "onset_envelope",
    "oracle_tempo",
    "read_wav",
    "run_grad_checks",
    "scale_factors",
    "scale_time",
    "train",
    "write_wav",
]
