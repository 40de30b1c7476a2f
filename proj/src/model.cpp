#include "tempogauge/model.hpp"

#include <algorithm>
#include <cmath>

#include "tempogauge/errors.hpp"

namespace tempogauge {

std::size_t bpm_to_class(double bpm) {
  if (!(bpm > 0.0) || !std::isfinite(bpm)) {
    throw DomainError("bpm_to_class: bpm must be positive and finite");
  }
  auto cls = std::llround(bpm) - static_cast<long long>(kBpmMin);
  cls = std::clamp<long long>(cls, 0, static_cast<long long>(kNumClasses) - 1);
  return static_cast<std::size_t>(cls);
}

double class_to_bpm(std::size_t cls) {
  if (cls >= kNumClasses) {
    throw BoundsError("class_to_bpm: class " + std::to_string(cls) +
                      " out of range");
  }
  return kBpmMin + static_cast<double>(cls);
}

void ModelConfig::validate() const {
  if (n_mels < 1 || window_frames < 1 || rnn_layers < 1 || rnn_units < 1 ||
      n_classes < 2) {
    throw ValidationError("model config: all sizes must be positive");
  }
  if (pool_k < 1 || pool_k > window_frames) {
    throw ValidationError("model config: pool kernel outside [1, frames]");
  }
  if (dense_widths.size() != 2 || dense_widths[0] < 1 || dense_widths[1] < 1) {
    throw ValidationError("model config: expected two dense widths");
  }
  if (!(dropout_p >= 0.0 && dropout_p < 1.0)) {
    throw ValidationError("model config: dropout must be in [0, 1)");
  }
}

TempoModel build_model(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  TempoModel model(cfg);
  model.seed = seed;
  model.net.init(seed);
  return model;
}

nn::Tensor<float> normalize_input(const SpectrogramWindow& window) {
  double mean = 0.0;
  for (float v : window.values) mean += v;
  mean /= static_cast<double>(window.values.size());
  double var = 0.0;
  for (float v : window.values) {
    double d = v - mean;
    var += d * d;
  }
  var /= static_cast<double>(window.values.size());
  float scale = 1.0f / (static_cast<float>(std::sqrt(var)) + kNormEps);
  float shift = static_cast<float>(mean);

  nn::Tensor<float> out({kNumMels, kWindowFrames});
  for (std::size_t i = 0; i < window.values.size(); ++i) {
    out[i] = (window.values[i] - shift) * scale;
  }
  return out;
}

void fill_batch_row(nn::Tensor<float>& batch, std::size_t b,
                    const SpectrogramWindow& window) {
  if (batch.rank() != 3 || batch.dim(1) != kWindowFrames ||
      batch.dim(2) != kNumMels || b >= batch.dim(0)) {
    throw ShapeError("fill_batch_row: batch " + nn::shape_str(batch.shape()));
  }
  nn::Tensor<float> norm = normalize_input(window);
  for (std::size_t t = 0; t < kWindowFrames; ++t) {
    float* row = &batch(b, t, 0);
    for (std::size_t m = 0; m < kNumMels; ++m) {
      row[m] = norm(m, t);
    }
  }
}

std::size_t TempoClassDistribution::argmax() const {
  std::size_t best = 0;
  for (std::size_t i = 1; i < probs.size(); ++i) {
    if (probs[i] > probs[best]) best = i;
  }
  return best;
}

TempoClassDistribution predict_window(TempoModel& model,
                                      const SpectrogramWindow& window) {
  nn::Tensor<float> x({1, kWindowFrames, kNumMels});
  fill_batch_row(x, 0, window);
  nn::Tensor<float> logits = model.net.forward(x, nn::Mode::kInfer);
  nn::Tensor<float> probs = nn::softmax_rows(logits);
  TempoClassDistribution out;
  out.probs.assign(probs.data(), probs.data() + probs.numel());
  return out;
}

}  // namespace tempogauge
