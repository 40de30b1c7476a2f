#include "tempogauge/cli.hpp"

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <set>

#include "CLI11.hpp"
#include "json.hpp"
#include "tempogauge/dsp.hpp"
#include "tempogauge/errors.hpp"
#include "tempogauge/evaluation.hpp"
#include "tempogauge/gradcheck.hpp"
#include "tempogauge/model.hpp"
#include "tempogauge/synthgen.hpp"
#include "tempogauge/threading.hpp"
#include "tempogauge/training.hpp"

namespace tempogauge::cli {

namespace {

std::uint64_t resolve_seed(bool given, std::uint64_t value) {
  if (given) return value;
  if (const char* env = std::getenv("TEMPOGAUGE_SEED")) {
    char* end = nullptr;
    unsigned long long v = std::strtoull(env, &end, 10);
    if (end == env || *end != '\0') {
      throw ValidationError("TEMPOGAUGE_SEED is not an unsigned integer");
    }
    return static_cast<std::uint64_t>(v);
  }
  return 0;
}

int cmd_gen(std::size_t count, double lo, double hi, const std::string& out_dir,
            std::uint64_t seed, const std::string& dataset, std::ostream& out) {
  DatasetManifest m = gen_corpus(count, lo, hi, out_dir, seed, dataset);
  out << "wrote " << m.entries.size() << " tracks to " << out_dir
      << " (manifest.jsonl)\n";
  return 0;
}

int cmd_train(const std::string& manifest_path, const std::string& out_dir,
              const TrainConfig& config, const std::set<std::string>& heldout,
              std::ostream& out) {
  DatasetManifest manifest = load_manifest(manifest_path);
  bool any_unassigned = false;
  for (const auto& e : manifest.entries) {
    if (e.split == "unassigned") any_unassigned = true;
  }
  if (any_unassigned) {
    split_dataset(manifest, config.seed, heldout);
  }

  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir);
  // The split copy lands in out_dir, so relative paths must be re-anchored
  // there or `evaluate --manifest out/split.jsonl` cannot find the audio.
  DatasetManifest split_copy = manifest;
  for (auto& e : split_copy.entries) {
    std::filesystem::path resolved = manifest.resolve(e);
    std::error_code rel_ec;
    std::filesystem::path rel =
        std::filesystem::relative(resolved, out_dir, rel_ec);
    e.path = (rel_ec || rel.empty()) ? resolved.string() : rel.string();
  }
  save_manifest(split_copy, std::filesystem::path(out_dir) / "split.jsonl");

  TempoModel model = build_model(ModelConfig{}, config.seed);
  out << "parameters: " << model.net.param_count() << " (recurrent stack "
      << model.net.rnn_param_count() << ", reference "
      << kReferenceTrainableParams << ")\n";

  TrainResult result = train(manifest, std::move(model), config, &out);
  checkpoint(result.model, result.history, out_dir);
  out << "best epoch " << result.history.best_epoch << "  val loss "
      << result.history.best_val_loss << "\n";
  out << "saved " << (std::filesystem::path(out_dir) / "weights.tgw").string()
      << "\n";
  return 0;
}

int cmd_estimate(const std::string& model_path,
                 const std::vector<std::string>& files, bool as_json,
                 std::ostream& out) {
  TempoModel model = load_weights(model_path);
  nlohmann::json results = nlohmann::json::array();
  for (const auto& f : files) {
    AudioClip clip = read_wav(f);
    TempoEstimate est = estimate_track(model, clip);
    if (as_json) {
      results.push_back({{"path", f},
                         {"bpm", est.bpm},
                         {"n_windows", est.n_windows},
                         {"probs", est.class_probs}});
    } else {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.2f", est.bpm);
      out << f << "\t" << buf << "\n";
    }
  }
  if (as_json) {
    out << nlohmann::json{{"model", model_path}, {"results", results}}.dump(2)
        << "\n";
  }
  return 0;
}

int cmd_evaluate(const std::string& model_path, const std::string& manifest_path,
                 const std::string& split, const std::string& json_path,
                 std::ostream& out) {
  TempoModel model = load_weights(model_path);
  DatasetManifest manifest = load_manifest(manifest_path);
  std::string filter = split == "all" ? "" : split;
  EvalReport report = evaluate_manifest(model, manifest, filter, model_path);
  out << render_table(report);
  for (const auto& e : report.errors) out << "error: " << e << "\n";
  if (!json_path.empty()) {
    std::ofstream jf(json_path, std::ios::trunc);
    if (!jf) throw IoError("cannot open " + json_path + " for writing");
    jf << report_to_json(report) << "\n";
    if (!jf) throw IoError("write failed on " + json_path);
  }
  return 0;
}

int cmd_spectrogram(const std::string& in_path, const std::string& out_path,
                    std::ostream& out) {
  AudioClip clip = resample(read_wav(in_path), kModelSampleRate);
  MelSpectrogram spec = mel_spectrogram(clip);

  std::string csv;
  char buf[32];
  for (std::size_t m = 0; m < spec.n_mels; ++m) {
    for (std::size_t t = 0; t < spec.n_frames; ++t) {
      if (t) csv += ",";
      std::snprintf(buf, sizeof buf, "%.6g", spec.at(m, t));
      csv += buf;
    }
    csv += "\n";
  }
  if (out_path.empty()) {
    out << csv;
  } else {
    std::ofstream f(out_path, std::ios::trunc);
    if (!f) throw IoError("cannot open " + out_path + " for writing");
    f << csv;
    if (!f) throw IoError("write failed on " + out_path);
  }
  return 0;
}

int cmd_oracle(const std::vector<std::string>& files, std::ostream& out) {
  for (const auto& f : files) {
    AudioClip clip = resample(read_wav(f), kModelSampleRate);
    MelSpectrogram spec = mel_spectrogram(clip);
    double bpm = autocorr_tempo(onset_envelope(spec), spec.hop_seconds);
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", bpm);
    out << f << "\t" << buf << "\n";
  }
  return 0;
}

int cmd_gradcheck(std::ostream& out) {
  nn::GradCheckReport report = nn::run_standard_grad_checks();
  for (const auto& b : report.blocks) {
    if (b.skipped) {
      out << b.name << ": skipped (" << b.note << ")\n";
    } else {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.3e", b.max_rel_err);
      out << b.name << ": max rel err " << buf << " over " << b.n_elements
          << " elements\n";
    }
  }
  out << "gradcheck " << (report.passed() ? "PASSED" : "FAILED")
      << " (tolerance " << report.tolerance << ")\n";
  return report.passed() ? 0 : 2;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err) {
  CLI::App app{"tempo estimation toolkit"};
  app.require_subcommand(1);

  unsigned n_jobs = std::thread::hardware_concurrency();
  if (n_jobs == 0) n_jobs = 1;
  bool deterministic = false;
  app.add_option("--jobs", n_jobs, "worker threads")->check(CLI::PositiveNumber);
  app.add_flag("--deterministic", deterministic,
               "single-threaded, bit-reproducible runs");

  auto* gen = app.add_subcommand("gen", "generate a synthetic click corpus");
  std::size_t gen_count = 100;
  double gen_lo = 60.0, gen_hi = 180.0;
  std::string gen_out, gen_dataset = "synth";
  std::uint64_t gen_seed = 0;
  gen->add_option("--count", gen_count, "tracks to generate")
      ->check(CLI::PositiveNumber);
  gen->add_option("--bpm-lo", gen_lo, "lower tempo bound");
  gen->add_option("--bpm-hi", gen_hi, "upper tempo bound");
  gen->add_option("--out", gen_out, "output directory")->required();
  gen->add_option("--seed", gen_seed, "rng seed (default TEMPOGAUGE_SEED or 0)");
  gen->add_option("--dataset", gen_dataset, "dataset name in the manifest");

  auto* train_cmd = app.add_subcommand("train", "train a tempo model");
  std::string train_manifest, train_out, train_config_path;
  std::vector<std::string> train_heldout;
  std::size_t train_batch = 0, train_epochs = 0, train_patience = 0,
              train_wpt = 0;
  std::uint64_t train_seed = 0;
  train_cmd->add_option("--manifest", train_manifest, "dataset manifest")
      ->required();
  train_cmd->add_option("--out", train_out, "checkpoint directory")->required();
  train_cmd->add_option("--config", train_config_path,
                        "training config JSON file");
  train_cmd->add_option("--batch-size", train_batch, "examples per step");
  train_cmd->add_option("--max-epochs", train_epochs, "epoch cap");
  train_cmd->add_option("--patience", train_patience,
                        "early stopping patience, epochs");
  train_cmd->add_option("--windows-per-track", train_wpt,
                        "training windows drawn per track per epoch");
  train_cmd->add_option("--seed", train_seed,
                        "rng seed (default TEMPOGAUGE_SEED or 0)");
  train_cmd->add_option("--heldout", train_heldout,
                        "dataset to split 80/10/10 with a test share");

  auto* estimate = app.add_subcommand("estimate", "estimate tempo of WAV files");
  std::string est_model;
  std::vector<std::string> est_files;
  bool est_json = false;
  estimate->add_option("--model", est_model, "weights file")->required();
  estimate->add_option("files", est_files, "WAV files")->required();
  estimate->add_flag("--json", est_json, "emit JSON with class distributions");

  auto* evaluate = app.add_subcommand("evaluate", "score a model on a manifest");
  std::string eval_model, eval_manifest, eval_split = "all", eval_json;
  evaluate->add_option("--model", eval_model, "weights file")->required();
  evaluate->add_option("--manifest", eval_manifest, "dataset manifest")
      ->required();
  evaluate->add_option("--split", eval_split, "train, val, test or all")
      ->check(CLI::IsMember({"train", "val", "test", "unassigned", "all"}));
  evaluate->add_option("--json", eval_json, "also write a JSON report here");

  auto* spectrogram =
      app.add_subcommand("spectrogram", "dump a mel spectrogram as CSV");
  std::string spec_in, spec_out;
  spectrogram->add_option("input", spec_in, "WAV file")->required();
  spectrogram->add_option("--out", spec_out, "CSV path (default stdout)");

  auto* oracle = app.add_subcommand(
      "oracle", "autocorrelation tempo estimate, no model needed");
  std::vector<std::string> oracle_files;
  oracle->add_option("files", oracle_files, "WAV files")->required();

  auto* gradcheck =
      app.add_subcommand("gradcheck", "finite-difference gradient audit");

  std::vector<const char*> argv;
  argv.push_back("tempogauge");
  for (const auto& a : args) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  try {
    set_jobs(deterministic ? 1 : n_jobs);

    if (*gen) {
      return cmd_gen(gen_count, gen_lo, gen_hi, gen_out,
                     resolve_seed(gen->count("--seed") > 0, gen_seed),
                     gen_dataset, out);
    }
    if (*train_cmd) {
      TrainConfig config;
      bool seed_specified = false;
      if (!train_config_path.empty()) {
        std::ifstream f(train_config_path);
        if (!f) throw IoError("cannot open training config " + train_config_path);
        std::string text((std::istreambuf_iterator<char>(f)),
                         std::istreambuf_iterator<char>());
        config = train_config_from_json(text);
        nlohmann::json j = nlohmann::json::parse(text, nullptr, false);
        seed_specified = j.is_object() && j.contains("seed");
      }
      if (train_cmd->count("--batch-size")) config.batch_size = train_batch;
      if (train_cmd->count("--max-epochs")) config.max_epochs = train_epochs;
      if (train_cmd->count("--patience")) {
        config.early_stop_patience = train_patience;
      }
      if (train_cmd->count("--windows-per-track")) {
        config.windows_per_track_per_epoch = train_wpt;
      }
      if (train_cmd->count("--seed")) {
        config.seed = train_seed;
        seed_specified = true;
      }
      config.seed = resolve_seed(seed_specified, config.seed);
      config.validate();
      return cmd_train(train_manifest, train_out, config,
                       {train_heldout.begin(), train_heldout.end()}, out);
    }
    if (*estimate) return cmd_estimate(est_model, est_files, est_json, out);
    if (*evaluate) {
      return cmd_evaluate(eval_model, eval_manifest, eval_split, eval_json, out);
    }
    if (*spectrogram) return cmd_spectrogram(spec_in, spec_out, out);
    if (*oracle) return cmd_oracle(oracle_files, out);
    if (*gradcheck) return cmd_gradcheck(out);
    err << "error: no subcommand\n";
    return 1;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace tempogauge::cli
