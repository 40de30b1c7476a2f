// Python bindings for the toolkit's main operations: synthesis, the mel
// front end, the autocorrelation oracle, the classifier (build, load, save,
// predict, whole-track estimation), training, evaluation, and the gradient
// audit. Arrays cross the boundary as float32 numpy buffers; every toolkit
// error surfaces as tempogauge.Error.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <cstring>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "tempogauge/audio.hpp"
#include "tempogauge/dsp.hpp"
#include "tempogauge/errors.hpp"
#include "tempogauge/evaluation.hpp"
#include "tempogauge/gradcheck.hpp"
#include "tempogauge/manifest.hpp"
#include "tempogauge/model.hpp"
#include "tempogauge/synthgen.hpp"
#include "tempogauge/training.hpp"

namespace py = pybind11;
using namespace tempogauge;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;

AudioClip clip_from(const FloatArray& samples, int sample_rate) {
  if (samples.ndim() != 1) throw ShapeError("samples must be 1-D");
  AudioClip clip;
  clip.sample_rate = sample_rate;
  clip.samples.assign(samples.data(), samples.data() + samples.size());
  return clip;
}

py::array_t<float> to_array(const std::vector<float>& v) {
  py::array_t<float> out(static_cast<py::ssize_t>(v.size()));
  std::memcpy(out.mutable_data(), v.data(), v.size() * sizeof(float));
  return out;
}

py::array_t<float> mel_to_array(const MelSpectrogram& spec) {
  py::array_t<float> out({static_cast<py::ssize_t>(spec.n_mels),
                          static_cast<py::ssize_t>(spec.n_frames)});
  std::memcpy(out.mutable_data(), spec.data.data(),
              spec.data.size() * sizeof(float));
  return out;
}

MelSpectrogram mel_from_array(const FloatArray& mel, double hop_seconds) {
  if (mel.ndim() != 2) throw ShapeError("mel spectrogram must be 2-D");
  MelSpectrogram spec;
  spec.n_mels = static_cast<std::size_t>(mel.shape(0));
  spec.n_frames = static_cast<std::size_t>(mel.shape(1));
  spec.hop_seconds = hop_seconds;
  spec.data.assign(mel.data(), mel.data() + mel.size());
  return spec;
}

SpectrogramWindow window_from_array(const FloatArray& w) {
  if (w.ndim() != 2 || w.shape(0) != static_cast<py::ssize_t>(kNumMels) ||
      w.shape(1) != static_cast<py::ssize_t>(kWindowFrames)) {
    throw ShapeError("window must be [40, 256]");
  }
  SpectrogramWindow out;
  std::memcpy(out.values.data(), w.data(), out.values.size() * sizeof(float));
  return out;
}

// Held by value behind a class so python owns the full network.
struct PyModel {
  TempoModel model;

  static PyModel build(std::uint64_t seed) {
    return PyModel{build_model(ModelConfig{}, seed)};
  }
  static PyModel load(const std::filesystem::path& path) {
    return PyModel{load_weights(path)};
  }
};

py::dict history_dict(const TrainHistory& h) {
  py::list epochs;
  for (const auto& e : h.epochs) {
    epochs.append(py::dict(py::arg("epoch") = e.epoch,
                           py::arg("train_loss") = e.train_loss,
                           py::arg("val_loss") = e.val_loss,
                           py::arg("seconds") = e.seconds));
  }
  return py::dict(py::arg("best_epoch") = h.best_epoch,
                  py::arg("best_val_loss") = h.best_val_loss,
                  py::arg("stopped_early") = h.stopped_early,
                  py::arg("label_clamp_events") = h.label_clamp_events,
                  py::arg("epochs") = epochs);
}

}  // namespace

PYBIND11_MODULE(_tempogauge, m) {
  m.doc() = "tempo estimation toolkit";

  py::register_exception<Error>(m, "Error");

  m.attr("MODEL_SAMPLE_RATE") = kModelSampleRate;
  m.attr("NUM_MELS") = static_cast<int>(kNumMels);
  m.attr("WINDOW_FRAMES") = static_cast<int>(kWindowFrames);
  m.attr("NUM_CLASSES") = static_cast<int>(kNumClasses);
  m.attr("BPM_MIN") = kBpmMin;
  m.attr("BPM_MAX") = kBpmMax;
  m.attr("REFERENCE_TRAINABLE_PARAMS") =
      static_cast<std::size_t>(kReferenceTrainableParams);

  m.def("bpm_to_class", &bpm_to_class, py::arg("bpm"),
        "Whole-bpm class index for a tempo; classes cover 30..285 bpm.");
  m.def("class_to_bpm", &class_to_bpm, py::arg("cls"),
        "Tempo in bpm for a class index.");

  m.def(
      "gen_click_track",
      [](double bpm, double duration_seconds, int subdivision,
         int accent_period, double click_decay_ms,
         std::optional<double> noise_snr_db, std::uint64_t seed) {
        ClickProfile p;
        p.bpm = bpm;
        p.duration_seconds = duration_seconds;
        p.subdivision = subdivision;
        p.accent_period = accent_period;
        p.click_decay_ms = click_decay_ms;
        p.noise_snr_db = noise_snr_db;
        p.seed = seed;
        return to_array(gen_click_track(p).clip.samples);
      },
      py::arg("bpm"), py::arg("duration_seconds") = 30.0,
      py::arg("subdivision") = 1, py::arg("accent_period") = 4,
      py::arg("click_decay_ms") = 5.0, py::arg("noise_snr_db") = py::none(),
      py::arg("seed") = 0,
      "Synthesize a click track at MODEL_SAMPLE_RATE; returns float32 "
      "samples.");

  m.def(
      "gen_corpus",
      [](std::size_t n, double bpm_lo, double bpm_hi,
         const std::filesystem::path& out_dir, std::uint64_t seed,
         const std::string& dataset) {
        gen_corpus(n, bpm_lo, bpm_hi, out_dir, seed, dataset);
        return (out_dir / "manifest.jsonl").string();
      },
      py::arg("n"), py::arg("bpm_lo"), py::arg("bpm_hi"), py::arg("out_dir"),
      py::arg("seed") = 0, py::arg("dataset") = "synth",
      py::call_guard<py::gil_scoped_release>(),
      "Write an annotated synthetic corpus; returns the manifest path.");

  m.def(
      "read_wav",
      [](const std::filesystem::path& path) {
        AudioClip clip = read_wav(path);
        return py::make_tuple(to_array(clip.samples), clip.sample_rate);
      },
      py::arg("path"), "Decode a WAV file to (float32 samples, sample_rate).");

  m.def(
      "write_wav",
      [](const std::filesystem::path& path, const FloatArray& samples,
         int sample_rate) {
        write_wav16(path, clip_from(samples, sample_rate));
      },
      py::arg("path"), py::arg("samples"), py::arg("sample_rate"),
      "Encode samples as 16-bit PCM mono.");

  m.def(
      "mel_spectrogram",
      [](const FloatArray& samples, int sample_rate) {
        AudioClip clip = clip_from(samples, sample_rate);
        if (clip.sample_rate != kModelSampleRate) {
          clip = resample(clip, kModelSampleRate);
        }
        MelSpectrogram spec = mel_spectrogram(clip);
        return py::make_tuple(mel_to_array(spec), spec.hop_seconds);
      },
      py::arg("samples"), py::arg("sample_rate"),
      "Mel magnitudes as ([NUM_MELS, frames], hop_seconds); input is "
      "resampled to MODEL_SAMPLE_RATE first.");

  m.def(
      "onset_envelope",
      [](const FloatArray& mel) {
        return to_array(onset_envelope(mel_from_array(mel, 0.0)));
      },
      py::arg("mel"),
      "Half-wave rectified spectral flux over a [mels, frames] array.");

  m.def(
      "autocorr_tempo",
      [](const FloatArray& envelope, double hop_seconds) {
        std::vector<float> env(envelope.data(),
                               envelope.data() + envelope.size());
        return autocorr_tempo(env, hop_seconds);
      },
      py::arg("envelope"), py::arg("hop_seconds"),
      "Model-free tempo in bpm from an onset envelope.");

  m.def(
      "oracle_tempo",
      [](const FloatArray& samples, int sample_rate) {
        AudioClip clip = clip_from(samples, sample_rate);
        if (clip.sample_rate != kModelSampleRate) {
          clip = resample(clip, kModelSampleRate);
        }
        MelSpectrogram spec = mel_spectrogram(clip);
        return autocorr_tempo(onset_envelope(spec), spec.hop_seconds);
      },
      py::arg("samples"), py::arg("sample_rate"),
      "Resample, mel, onset envelope, autocorrelation: tempo in bpm.");

  m.def("scale_factors", [] { return ScaleFactor::all(); },
        "The eleven admissible playback-speed factors.");

  m.def(
      "scale_time",
      [](const FloatArray& mel, double hop_seconds, double factor) {
        ScaledSpectrogram scaled =
            scale_time(mel_from_array(mel, hop_seconds), ScaleFactor::of(factor));
        return py::make_tuple(mel_to_array(scaled.spec), scaled.bpm_multiplier);
      },
      py::arg("mel"), py::arg("hop_seconds"), py::arg("factor"),
      "Resample a spectrogram along time; returns (scaled, bpm_multiplier).");

  m.def("accuracy0", &accuracy0, py::arg("estimate"), py::arg("truth"),
        "Exact agreement after rounding both tempi to whole bpm.");
  m.def("accuracy1", &accuracy1, py::arg("estimate"), py::arg("truth"),
        "Within 4% of the true tempo.");
  m.def("accuracy2", &accuracy2, py::arg("estimate"), py::arg("truth"),
        "Matching octave factor in {1, 1/2, 1/3, 2, 3}, or None.");

  py::class_<PyModel>(m, "Model")
      .def_static("build", &PyModel::build, py::arg("seed") = 0,
                  "Fresh Glorot-initialized model with identity "
                  "normalization statistics.")
      .def_static("load", &PyModel::load, py::arg("path"))
      .def("save",
           [](PyModel& self, const std::filesystem::path& path) {
             save_weights(self.model, path);
           },
           py::arg("path"))
      .def_property_readonly(
          "seed", [](const PyModel& self) { return self.model.seed; })
      .def_property_readonly(
          "param_count",
          [](PyModel& self) { return self.model.net.param_count(); })
      .def_property_readonly(
          "rnn_param_count",
          [](PyModel& self) { return self.model.net.rnn_param_count(); })
      .def(
          "predict_window",
          [](PyModel& self, const FloatArray& window) {
            return to_array(
                predict_window(self.model, window_from_array(window)).probs);
          },
          py::arg("window"),
          "Class distribution (256 floats summing to 1) for a [40, 256] "
          "window.")
      .def(
          "estimate_track",
          [](PyModel& self, const FloatArray& samples, int sample_rate) {
            TempoEstimate est =
                estimate_track(self.model, clip_from(samples, sample_rate));
            return py::dict(py::arg("bpm") = est.bpm,
                            py::arg("n_windows") = est.n_windows,
                            py::arg("probs") = to_array(est.class_probs));
          },
          py::arg("samples"), py::arg("sample_rate"),
          "Whole-track tempo: windows at 128-frame hops, distributions "
          "averaged.");

  m.def(
      "train",
      [](const std::filesystem::path& manifest_path,
         const std::filesystem::path& out_dir, std::size_t batch_size,
         std::size_t max_epochs, std::size_t patience,
         std::size_t windows_per_track, std::uint64_t seed, bool verbose) {
        TrainHistory history;
        {
          py::gil_scoped_release release;

          DatasetManifest manifest = load_manifest(manifest_path);
          bool any_unassigned = false;
          for (const auto& e : manifest.entries) {
            if (e.split == "unassigned") any_unassigned = true;
          }
          if (any_unassigned) split_dataset(manifest, seed);

          TrainConfig cfg;
          cfg.batch_size = batch_size;
          cfg.max_epochs = max_epochs;
          cfg.early_stop_patience = patience;
          cfg.windows_per_track_per_epoch = windows_per_track;
          cfg.seed = seed;
          cfg.validate();

          TempoModel model = build_model(ModelConfig{}, seed);
          TrainResult result = train(manifest, std::move(model), cfg,
                                     verbose ? &std::cout : nullptr);
          std::filesystem::create_directories(out_dir);
          checkpoint(result.model, result.history, out_dir);
          history = std::move(result.history);
        }
        py::dict out = history_dict(history);
        out["weights"] = (out_dir / "weights.tgw").string();
        return out;
      },
      py::arg("manifest_path"), py::arg("out_dir"), py::arg("batch_size") = 32,
      py::arg("max_epochs") = 1000, py::arg("patience") = 100,
      py::arg("windows_per_track") = 4, py::arg("seed") = 0,
      py::arg("verbose") = false,
      "Split (if needed), train, and checkpoint weights.tgw plus "
      "history.json under out_dir; returns the history.");

  m.def(
      "evaluate",
      [](PyModel& model, const std::filesystem::path& manifest_path,
         const std::string& split) {
        std::string table, json;
        {
          py::gil_scoped_release release;
          DatasetManifest manifest = load_manifest(manifest_path);
          std::string filter = split == "all" ? "" : split;
          EvalReport report = evaluate_manifest(model.model, manifest, filter,
                                                manifest_path.string());
          table = render_table(report);
          json = report_to_json(report);
        }
        return py::make_tuple(table, json);
      },
      py::arg("model"), py::arg("manifest_path"), py::arg("split") = "all",
      "Score a model over a manifest; returns (table, json_report).");

  m.def(
      "run_grad_checks",
      [](double tolerance) {
        nn::GradCheckReport report;
        {
          py::gil_scoped_release release;
          report = nn::run_standard_grad_checks(tolerance);
        }
        py::list blocks;
        for (const auto& b : report.blocks) {
          blocks.append(py::dict(py::arg("name") = b.name,
                                 py::arg("max_rel_err") = b.max_rel_err,
                                 py::arg("skipped") = b.skipped));
        }
        return py::dict(py::arg("passed") = report.passed(),
                        py::arg("blocks") = blocks);
      },
      py::arg("tolerance") = 1e-4,
      "Finite-difference audit of every differentiable block, in double.");
}
