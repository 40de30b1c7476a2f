#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "tempogauge/dsp.hpp"
#include "tempogauge/nn.hpp"

namespace tempogauge {

// Tempo classes are whole bpm values: class i <-> (30 + i) bpm, 256 classes.
inline constexpr std::size_t kNumClasses = 256;

// Trainable-parameter count of the reference configuration this
// architecture reproduces; reported next to our own count.
inline constexpr std::size_t kReferenceTrainableParams = 6583772;

inline constexpr float kNormEps = 1e-5f;

std::size_t bpm_to_class(double bpm);   // DomainError on bpm <= 0
double class_to_bpm(std::size_t cls);   // BoundsError on cls >= kNumClasses

struct ModelConfig {
  std::size_t n_mels = kNumMels;
  std::size_t window_frames = kWindowFrames;
  std::size_t rnn_layers = 3;
  std::size_t rnn_units = 25;
  std::size_t pool_k = 5;
  std::vector<std::size_t> dense_widths{2048, 512};
  std::size_t n_classes = kNumClasses;
  double dropout_p = 0.5;

  void validate() const;
};

// The full network: three bidirectional recurrent layers, mean pooling over
// time, then a batch-normalized dense head ending in a class softmax.
// Templated so gradient checks can run the identical code in double.
template <class T>
struct TempoNet {
  ModelConfig cfg;
  std::vector<nn::BiRecurrent<T>> rnn;
  nn::AvgPoolTime<T> pool;
  nn::BatchNorm<T> bn_in;  // on the flattened pooled features
  nn::Dropout<T> drop;
  nn::Dense<T> fc1;
  nn::Elu<T> elu1;
  nn::BatchNorm<T> bn_mid;
  nn::Dense<T> fc2;
  nn::Elu<T> elu2;
  nn::Dense<T> head;

  explicit TempoNet(const ModelConfig& c)
      : cfg(c), pool(c.pool_k), drop(static_cast<T>(c.dropout_p)) {
    cfg.validate();
    std::size_t in = cfg.n_mels;
    for (std::size_t l = 0; l < cfg.rnn_layers; ++l) {
      rnn.emplace_back(in, cfg.rnn_units);
      in = 2 * cfg.rnn_units;
    }
    std::size_t flat = (cfg.window_frames / cfg.pool_k) * in;
    bn_in = nn::BatchNorm<T>(flat);
    fc1 = nn::Dense<T>(flat, cfg.dense_widths[0]);
    bn_mid = nn::BatchNorm<T>(cfg.dense_widths[0]);
    fc2 = nn::Dense<T>(cfg.dense_widths[0], cfg.dense_widths[1]);
    head = nn::Dense<T>(cfg.dense_widths[1], cfg.n_classes);
  }

  void init(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    for (auto& r : rnn) r.init(rng);
    fc1.init(rng);
    fc2.init(rng);
    head.init(rng);
    bn_in.init_identity_stats();
    bn_mid.init_identity_stats();
  }

  // x: [B, window_frames, n_mels] -> logits [B, n_classes].
  nn::Tensor<T> forward(const nn::Tensor<T>& x, nn::Mode mode,
                        std::mt19937_64* rng = nullptr) {
    if (x.rank() != 3 || x.dim(1) != cfg.window_frames ||
        x.dim(2) != cfg.n_mels) {
      throw ShapeError("model: input " + nn::shape_str(x.shape()));
    }
    nn::Tensor<T> h = x;
    for (auto& r : rnn) h = r.forward(h);
    h = pool.forward(h);
    flat_shape_ = h.shape();
    h.reshape({h.dim(0), h.dim(1) * h.dim(2)});
    h = bn_in.forward(h, mode);
    h = drop.forward(h, mode, rng);
    h = fc1.forward(h);
    h = elu1.forward(h);
    h = bn_mid.forward(h, mode);
    h = fc2.forward(h);
    h = elu2.forward(h);
    return head.forward(h);
  }

  nn::Tensor<T> backward(const nn::Tensor<T>& dlogits) {
    nn::Tensor<T> d = head.backward(dlogits);
    d = elu2.backward(d);
    d = fc2.backward(d);
    d = bn_mid.backward(d);
    d = elu1.backward(d);
    d = fc1.backward(d);
    d = drop.backward(d);
    d = bn_in.backward(d);
    d.reshape(flat_shape_);
    d = pool.backward(d);
    for (std::size_t l = rnn.size(); l-- > 0;) d = rnn[l].backward(d);
    return d;
  }

  void zero_grad() {
    for (auto& r : rnn) r.zero_grad();
    bn_in.zero_grad();
    fc1.zero_grad();
    bn_mid.zero_grad();
    fc2.zero_grad();
    head.zero_grad();
  }

  std::vector<nn::TensorRef<T>> params() {
    std::vector<nn::TensorRef<T>> p, b;
    collect(p, b);
    return p;
  }

  std::vector<nn::TensorRef<T>> buffers() {
    std::vector<nn::TensorRef<T>> p, b;
    collect(p, b);
    return b;
  }

  std::size_t param_count() {
    std::size_t n = 0;
    for (const auto& p : params()) n += p.value->numel();
    return n;
  }

  std::size_t rnn_param_count() {
    std::size_t n = 0;
    for (const auto& p : params()) {
      if (p.name.rfind("rnn", 0) == 0) n += p.value->numel();
    }
    return n;
  }

 private:
  void collect(std::vector<nn::TensorRef<T>>& p,
               std::vector<nn::TensorRef<T>>& b) {
    for (std::size_t l = 0; l < rnn.size(); ++l) {
      rnn[l].collect("rnn" + std::to_string(l), p, b);
    }
    bn_in.collect("bn_in", p, b);
    fc1.collect("fc1", p, b);
    bn_mid.collect("bn_mid", p, b);
    fc2.collect("fc2", p, b);
    head.collect("head", p, b);
  }

  std::vector<std::size_t> flat_shape_;
};

struct TempoModel {
  ModelConfig cfg;
  TempoNet<float> net;
  std::uint64_t seed = 0;

  explicit TempoModel(const ModelConfig& c = ModelConfig{})
      : cfg(c), net(c) {}
};

// Fresh Glorot-initialized model whose batch-norm layers carry identity
// statistics, so it predicts (uniformly, more or less) before training.
TempoModel build_model(const ModelConfig& cfg, std::uint64_t seed);

// Per-window standardization: subtract the window's global mean, divide by
// its global standard deviation plus kNormEps. Returns [n_mels, frames].
nn::Tensor<float> normalize_input(const SpectrogramWindow& window);

// Writes one normalized window into row b of a [B, frames, mels] batch.
void fill_batch_row(nn::Tensor<float>& batch, std::size_t b,
                    const SpectrogramWindow& window);

struct TempoClassDistribution {
  std::vector<float> probs;

  std::size_t argmax() const;  // ties resolve to the lower class
};

TempoClassDistribution predict_window(TempoModel& model,
                                      const SpectrogramWindow& window);

// Binary weights container: magic "TGW1", little-endian length-prefixed JSON
// header (config, seed, normalization scheme, tensor table), raw float32
// tensor data in header order, trailing CRC-32 of everything before it.
// Writes are atomic (temp file + rename). Load never returns a partial
// model: VersionError on a different format version (naming both),
// CorruptionError on checksum or truncation, ValidationError on a header
// whose tensors disagree with the config.
void save_weights(TempoModel& model, const std::filesystem::path& path);
TempoModel load_weights(const std::filesystem::path& path);

}  // namespace tempogauge
