#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "tempogauge/errors.hpp"
#include "tempogauge/optimizer.hpp"
#include "tempogauge/tensor.hpp"

namespace tempogauge::nn {

enum class Mode { kTrain, kInfer };

// Glorot/uniform fan-based init: U(-s, s) with s = sqrt(6 / (fan_in + fan_out)).
template <class T>
void glorot_init(Tensor<T>& w, std::size_t fan_in, std::size_t fan_out,
                 std::mt19937_64& rng) {
  double s = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> u(-s, s);
  for (std::size_t i = 0; i < w.numel(); ++i) w[i] = static_cast<T>(u(rng));
}

// y = x w + b for x [B, in].
template <class T>
struct Dense {
  Tensor<T> w, b, gw, gb;
  Tensor<T> x_;

  Dense() = default;
  Dense(std::size_t in, std::size_t out)
      : w({in, out}), b({out}), gw({in, out}), gb({out}) {}

  std::size_t in_dim() const { return w.dim(0); }
  std::size_t out_dim() const { return w.dim(1); }

  void init(std::mt19937_64& rng) {
    glorot_init(w, in_dim(), out_dim(), rng);
    b.fill(T(0));
  }

  Tensor<T> forward(const Tensor<T>& x) {
    if (x.rank() != 2 || x.dim(1) != in_dim()) {
      throw ShapeError("dense: input " + shape_str(x.shape()) + " vs weight " +
                       shape_str(w.shape()));
    }
    x_ = x;
    std::size_t B = x.dim(0), out = out_dim();
    Tensor<T> y({B, out});
    matmul(x.data(), w.data(), y.data(), B, in_dim(), out);
    for (std::size_t i = 0; i < B; ++i) {
      T* row = y.data() + i * out;
      for (std::size_t j = 0; j < out; ++j) row[j] += b[j];
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy) {
    std::size_t B = x_.dim(0), in = in_dim(), out = out_dim();
    if (dy.rank() != 2 || dy.dim(0) != B || dy.dim(1) != out) {
      throw ShapeError("dense backward: gradient " + shape_str(dy.shape()));
    }
    matmul_at_b(x_.data(), dy.data(), gw.data(), B, in, out);
    gb.fill(T(0));
    for (std::size_t i = 0; i < B; ++i) {
      const T* row = dy.data() + i * out;
      for (std::size_t j = 0; j < out; ++j) gb[j] += row[j];
    }
    Tensor<T> dx({B, in});
    matmul_a_bt(dy.data(), w.data(), dx.data(), B, out, in);
    return dx;
  }

  void zero_grad() {
    gw.fill(T(0));
    gb.fill(T(0));
  }

  void collect(const std::string& prefix, std::vector<TensorRef<T>>& params,
               std::vector<TensorRef<T>>& buffers) {
    params.push_back({prefix + ".w", &w, &gw});
    params.push_back({prefix + ".b", &b, &gb});
    (void)buffers;
  }
};

// Batch normalization over the feature axis of [B, F]. Training uses the
// biased batch variance and updates moving statistics with momentum 0.99;
// inference uses the moving statistics and refuses to run before any exist.
template <class T>
struct BatchNorm {
  Tensor<T> gamma, beta, ggamma, gbeta;
  Tensor<T> moving_mean, moving_var;
  bool stats_ready = false;
  T momentum = T(0.99);
  T eps = T(1e-5);

  Tensor<T> xmu_;      // x - batch mean
  Tensor<T> inv_std_;  // 1 / sqrt(var + eps)

  BatchNorm() = default;
  explicit BatchNorm(std::size_t features)
      : gamma({features}, T(1)),
        beta({features}),
        ggamma({features}),
        gbeta({features}),
        moving_mean({features}),
        moving_var({features}, T(1)) {}

  std::size_t features() const { return gamma.dim(0); }

  // Marks the (0, 1) moving statistics as usable, so a freshly built model
  // can run inference before it has seen a training batch.
  void init_identity_stats() {
    moving_mean.fill(T(0));
    moving_var.fill(T(1));
    stats_ready = true;
  }

  Tensor<T> forward(const Tensor<T>& x, Mode mode) {
    std::size_t F = features();
    if (x.rank() != 2 || x.dim(1) != F) {
      throw ShapeError("batch_norm: input " + shape_str(x.shape()) +
                       " vs features " + std::to_string(F));
    }
    std::size_t B = x.dim(0);
    Tensor<T> y({B, F});
    if (mode == Mode::kInfer) {
      if (!stats_ready) {
        throw UninitializedStatsError(
            "batch_norm: inference before any statistics were accumulated");
      }
      for (std::size_t j = 0; j < F; ++j) {
        T scale = gamma[j] / std::sqrt(moving_var[j] + eps);
        T shift = beta[j] - scale * moving_mean[j];
        for (std::size_t i = 0; i < B; ++i) y(i, j) = scale * x(i, j) + shift;
      }
      return y;
    }

    xmu_ = Tensor<T>({B, F});
    inv_std_ = Tensor<T>({F});
    for (std::size_t j = 0; j < F; ++j) {
      T mean = T(0);
      for (std::size_t i = 0; i < B; ++i) mean += x(i, j);
      mean /= static_cast<T>(B);
      T var = T(0);
      for (std::size_t i = 0; i < B; ++i) {
        T d = x(i, j) - mean;
        xmu_(i, j) = d;
        var += d * d;
      }
      var /= static_cast<T>(B);
      T istd = T(1) / std::sqrt(var + eps);
      inv_std_[j] = istd;
      for (std::size_t i = 0; i < B; ++i) {
        y(i, j) = gamma[j] * xmu_(i, j) * istd + beta[j];
      }
      moving_mean[j] = momentum * moving_mean[j] + (T(1) - momentum) * mean;
      moving_var[j] = momentum * moving_var[j] + (T(1) - momentum) * var;
    }
    stats_ready = true;
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy) {
    std::size_t B = xmu_.dim(0), F = features();
    if (dy.rank() != 2 || dy.dim(0) != B || dy.dim(1) != F) {
      throw ShapeError("batch_norm backward: gradient " +
                       shape_str(dy.shape()));
    }
    Tensor<T> dx({B, F});
    const T invB = T(1) / static_cast<T>(B);
    for (std::size_t j = 0; j < F; ++j) {
      T istd = inv_std_[j];
      T sum_dy = T(0), sum_dy_xhat = T(0);
      for (std::size_t i = 0; i < B; ++i) {
        T xhat = xmu_(i, j) * istd;
        sum_dy += dy(i, j);
        sum_dy_xhat += dy(i, j) * xhat;
      }
      ggamma[j] += sum_dy_xhat;
      gbeta[j] += sum_dy;
      // dx = (gamma istd / B) (B dy - sum_dy - xhat sum_dy_xhat)
      T scale = gamma[j] * istd * invB;
      for (std::size_t i = 0; i < B; ++i) {
        T xhat = xmu_(i, j) * istd;
        dx(i, j) = scale * (static_cast<T>(B) * dy(i, j) - sum_dy -
                            xhat * sum_dy_xhat);
      }
    }
    return dx;
  }

  void zero_grad() {
    ggamma.fill(T(0));
    gbeta.fill(T(0));
  }

  void collect(const std::string& prefix, std::vector<TensorRef<T>>& params,
               std::vector<TensorRef<T>>& buffers) {
    params.push_back({prefix + ".gamma", &gamma, &ggamma});
    params.push_back({prefix + ".beta", &beta, &gbeta});
    buffers.push_back({prefix + ".moving_mean", &moving_mean, nullptr});
    buffers.push_back({prefix + ".moving_var", &moving_var, nullptr});
  }
};

// Inverted dropout: kept activations are scaled by 1/(1-p) at train time so
// inference is the identity.
template <class T>
struct Dropout {
  T p;
  Tensor<T> mask_;

  explicit Dropout(T drop_p = T(0.5)) : p(drop_p) {
    if (!(p >= T(0) && p < T(1))) {
      throw DomainError("dropout: p must be in [0, 1)");
    }
  }

  Tensor<T> forward(const Tensor<T>& x, Mode mode, std::mt19937_64* rng) {
    if (mode == Mode::kInfer || p == T(0)) {
      mask_ = Tensor<T>();
      return x;
    }
    if (rng == nullptr) {
      throw ValidationError("dropout: train mode needs an rng");
    }
    std::uniform_real_distribution<double> u(0.0, 1.0);
    T keep_scale = T(1) / (T(1) - p);
    mask_ = Tensor<T>(x.shape());
    Tensor<T> y(x.shape());
    for (std::size_t i = 0; i < x.numel(); ++i) {
      T m = (u(*rng) >= static_cast<double>(p)) ? keep_scale : T(0);
      mask_[i] = m;
      y[i] = x[i] * m;
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy) {
    if (mask_.numel() == 0) return dy;  // was identity
    if (!dy.same_shape(mask_)) {
      throw ShapeError("dropout backward: gradient " + shape_str(dy.shape()));
    }
    Tensor<T> dx(dy.shape());
    for (std::size_t i = 0; i < dy.numel(); ++i) dx[i] = dy[i] * mask_[i];
    return dx;
  }
};

template <class T>
struct Elu {
  Tensor<T> y_;

  Tensor<T> forward(const Tensor<T>& x) {
    Tensor<T> y(x.shape());
    for (std::size_t i = 0; i < x.numel(); ++i) {
      y[i] = x[i] >= T(0) ? x[i] : std::expm1(x[i]);
    }
    y_ = y;
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy) {
    if (!dy.same_shape(y_)) {
      throw ShapeError("elu backward: gradient " + shape_str(dy.shape()));
    }
    Tensor<T> dx(dy.shape());
    for (std::size_t i = 0; i < dy.numel(); ++i) {
      dx[i] = dy[i] * (y_[i] >= T(0) ? T(1) : y_[i] + T(1));
    }
    return dx;
  }
};

template <class T>
struct TanhAct {
  Tensor<T> y_;

  Tensor<T> forward(const Tensor<T>& x) {
    Tensor<T> y(x.shape());
    for (std::size_t i = 0; i < x.numel(); ++i) y[i] = std::tanh(x[i]);
    y_ = y;
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy) {
    if (!dy.same_shape(y_)) {
      throw ShapeError("tanh backward: gradient " + shape_str(dy.shape()));
    }
    Tensor<T> dx(dy.shape());
    for (std::size_t i = 0; i < dy.numel(); ++i) {
      dx[i] = dy[i] * (T(1) - y_[i] * y_[i]);
    }
    return dx;
  }
};

// Non-overlapping mean pooling along the time axis of [B, T, F]; trailing
// frames that do not fill a kernel are dropped.
template <class T>
struct AvgPoolTime {
  std::size_t k;
  std::size_t t_in_ = 0;

  explicit AvgPoolTime(std::size_t kernel = 5) : k(kernel) {
    if (k < 1) throw DomainError("avg_pool: kernel must be >= 1");
  }

  Tensor<T> forward(const Tensor<T>& x) {
    if (x.rank() != 3) {
      throw ShapeError("avg_pool: input " + shape_str(x.shape()));
    }
    std::size_t B = x.dim(0), Tt = x.dim(1), F = x.dim(2);
    if (Tt < k) throw ShapeError("avg_pool: fewer frames than the kernel");
    t_in_ = Tt;
    std::size_t out_t = Tt / k;
    Tensor<T> y({B, out_t, F});
    const T inv = T(1) / static_cast<T>(k);
    for (std::size_t b = 0; b < B; ++b) {
      for (std::size_t s = 0; s < out_t; ++s) {
        T* dst = &y(b, s, 0);
        for (std::size_t j = 0; j < k; ++j) {
          const T* src = &x(b, s * k + j, 0);
          for (std::size_t f = 0; f < F; ++f) dst[f] += src[f];
        }
        for (std::size_t f = 0; f < F; ++f) dst[f] *= inv;
      }
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy) {
    if (dy.rank() != 3) {
      throw ShapeError("avg_pool backward: gradient " + shape_str(dy.shape()));
    }
    std::size_t B = dy.dim(0), out_t = dy.dim(1), F = dy.dim(2);
    Tensor<T> dx({B, t_in_, F});
    const T inv = T(1) / static_cast<T>(k);
    for (std::size_t b = 0; b < B; ++b) {
      for (std::size_t s = 0; s < out_t; ++s) {
        const T* src = &dy(b, s, 0);
        for (std::size_t j = 0; j < k; ++j) {
          T* dst = &dx(b, s * k + j, 0);
          for (std::size_t f = 0; f < F; ++f) dst[f] = src[f] * inv;
        }
      }
    }
    return dx;
  }
};

// One direction of an Elman recurrence: h_t = tanh(x_t Wx + h_{t-1} Wh + b),
// h_0 = 0.
template <class T>
struct RnnDirection {
  Tensor<T> wx, wh, b, gwx, gwh, gb;
  Tensor<T> h_;  // [B, T, H], states of the last forward

  RnnDirection() = default;
  RnnDirection(std::size_t in, std::size_t units)
      : wx({in, units}),
        wh({units, units}),
        b({units}),
        gwx({in, units}),
        gwh({units, units}),
        gb({units}) {}
};

// Bidirectional recurrent layer over [B, T, in]; output concatenates the
// forward and backward states per step into [B, T, 2 units].
template <class T>
struct BiRecurrent {
  RnnDirection<T> fw, bw;
  Tensor<T> x_;

  BiRecurrent() = default;
  BiRecurrent(std::size_t in, std::size_t units)
      : fw(in, units), bw(in, units) {}

  std::size_t in_dim() const { return fw.wx.dim(0); }
  std::size_t units() const { return fw.wx.dim(1); }

  void init(std::mt19937_64& rng) {
    // Fan-based bounds treat each matrix as its own affine map.
    glorot_init(fw.wx, in_dim(), units(), rng);
    glorot_init(fw.wh, units(), units(), rng);
    fw.b.fill(T(0));
    glorot_init(bw.wx, in_dim(), units(), rng);
    glorot_init(bw.wh, units(), units(), rng);
    bw.b.fill(T(0));
  }

  Tensor<T> forward(const Tensor<T>& x) {
    if (x.rank() != 3 || x.dim(2) != in_dim()) {
      throw ShapeError("birnn: input " + shape_str(x.shape()) + " vs in_dim " +
                       std::to_string(in_dim()));
    }
    x_ = x;
    std::size_t B = x.dim(0), Tt = x.dim(1), D = in_dim(), H = units();
    Tensor<T> y({B, Tt, 2 * H});
    scan(x.data(), B, Tt, D, fw, /*reverse=*/false);
    scan(x.data(), B, Tt, D, bw, /*reverse=*/true);
    for (std::size_t b = 0; b < B; ++b) {
      for (std::size_t t = 0; t < Tt; ++t) {
        const T* hf = &fw.h_(b, t, 0);
        const T* hb = &bw.h_(b, t, 0);
        T* row = &y(b, t, 0);
        std::copy(hf, hf + H, row);
        std::copy(hb, hb + H, row + H);
      }
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy) {
    std::size_t B = x_.dim(0), Tt = x_.dim(1), D = in_dim(), H = units();
    if (dy.rank() != 3 || dy.dim(0) != B || dy.dim(1) != Tt ||
        dy.dim(2) != 2 * H) {
      throw ShapeError("birnn backward: gradient " + shape_str(dy.shape()));
    }
    Tensor<T> dx({B, Tt, D});
    scan_grad(dy, dx, B, Tt, D, fw, /*reverse=*/false);
    scan_grad(dy, dx, B, Tt, D, bw, /*reverse=*/true);
    return dx;
  }

  void zero_grad() {
    for (RnnDirection<T>* d : {&fw, &bw}) {
      d->gwx.fill(T(0));
      d->gwh.fill(T(0));
      d->gb.fill(T(0));
    }
  }

  void collect(const std::string& prefix, std::vector<TensorRef<T>>& params,
               std::vector<TensorRef<T>>& buffers) {
    params.push_back({prefix + ".fw.wx", &fw.wx, &fw.gwx});
    params.push_back({prefix + ".fw.wh", &fw.wh, &fw.gwh});
    params.push_back({prefix + ".fw.b", &fw.b, &fw.gb});
    params.push_back({prefix + ".bw.wx", &bw.wx, &bw.gwx});
    params.push_back({prefix + ".bw.wh", &bw.wh, &bw.gwh});
    params.push_back({prefix + ".bw.b", &bw.b, &bw.gb});
    (void)buffers;
  }

 private:
  void scan(const T* x, std::size_t B, std::size_t Tt, std::size_t D,
            RnnDirection<T>& dir, bool reverse) {
    std::size_t H = units();
    // Input projections for every step at once.
    Tensor<T> ax({B * Tt, H});
    matmul(x, dir.wx.data(), ax.data(), B * Tt, D, H);
    dir.h_ = Tensor<T>({B, Tt, H});
    Tensor<T> prev({B, H});
    Tensor<T> rec({B, H});
    for (std::size_t step = 0; step < Tt; ++step) {
      std::size_t t = reverse ? Tt - 1 - step : step;
      matmul(prev.data(), dir.wh.data(), rec.data(), B, H, H);
      for (std::size_t bi = 0; bi < B; ++bi) {
        const T* a = ax.data() + (bi * Tt + t) * H;
        const T* r = rec.data() + bi * H;
        T* h = &dir.h_(bi, t, 0);
        T* pv = prev.data() + bi * H;
        for (std::size_t j = 0; j < H; ++j) {
          T v = std::tanh(a[j] + r[j] + dir.b[j]);
          h[j] = v;
          pv[j] = v;
        }
      }
    }
  }

  void scan_grad(const Tensor<T>& dy, Tensor<T>& dx, std::size_t B,
                 std::size_t Tt, std::size_t D, RnnDirection<T>& dir,
                 bool reverse) {
    std::size_t H = units();
    std::size_t half_offset = reverse ? H : 0;
    Tensor<T> dax({B * Tt, H});
    Tensor<T> carry({B, H});
    Tensor<T> g({B, H});
    Tensor<T> hprev({B, H});
    for (std::size_t step = 0; step < Tt; ++step) {
      // Walk opposite to the forward scan so carry flows to earlier states.
      std::size_t t = reverse ? step : Tt - 1 - step;
      for (std::size_t bi = 0; bi < B; ++bi) {
        const T* h = &dir.h_(bi, t, 0);
        const T* d = &dy(bi, t, half_offset);
        const T* cy = carry.data() + bi * H;
        T* gr = g.data() + bi * H;
        for (std::size_t j = 0; j < H; ++j) {
          gr[j] = (d[j] + cy[j]) * (T(1) - h[j] * h[j]);
        }
      }
      for (std::size_t bi = 0; bi < B; ++bi) {
        const T* gr = g.data() + bi * H;
        for (std::size_t j = 0; j < H; ++j) dir.gb[j] += gr[j];
      }
      for (std::size_t bi = 0; bi < B; ++bi) {
        std::copy(g.data() + bi * H, g.data() + (bi + 1) * H,
                  dax.data() + (bi * Tt + t) * H);
      }
      bool has_prev = reverse ? (t + 1 < Tt) : (t > 0);
      if (has_prev) {
        std::size_t tp = reverse ? t + 1 : t - 1;
        for (std::size_t bi = 0; bi < B; ++bi) {
          std::copy(&dir.h_(bi, tp, 0), &dir.h_(bi, tp, 0) + H,
                    hprev.data() + bi * H);
        }
        matmul_at_b(hprev.data(), g.data(), dir.gwh.data(), B, H, H,
                    /*accumulate=*/true);
      }
      matmul_a_bt(g.data(), dir.wh.data(), carry.data(), B, H, H);
    }
    matmul_at_b(x_.data(), dax.data(), dir.gwx.data(), B * Tt, D, H,
                /*accumulate=*/true);
    // dx accumulates both directions.
    Tensor<T> dx_dir({B * Tt, D});
    matmul_a_bt(dax.data(), dir.wx.data(), dx_dir.data(), B * Tt, H, D);
    for (std::size_t i = 0; i < dx.numel(); ++i) dx[i] += dx_dir[i];
  }
};

// Row-wise stable softmax for [B, C].
template <class T>
Tensor<T> softmax_rows(const Tensor<T>& logits) {
  if (logits.rank() != 2) {
    throw ShapeError("softmax: input " + shape_str(logits.shape()));
  }
  std::size_t B = logits.dim(0), C = logits.dim(1);
  Tensor<T> p({B, C});
  for (std::size_t i = 0; i < B; ++i) {
    const T* in = logits.data() + i * C;
    T* out = p.data() + i * C;
    T mx = in[0];
    for (std::size_t j = 1; j < C; ++j) mx = std::max(mx, in[j]);
    T sum = T(0);
    for (std::size_t j = 0; j < C; ++j) {
      out[j] = std::exp(in[j] - mx);
      sum += out[j];
    }
    T inv = T(1) / sum;
    for (std::size_t j = 0; j < C; ++j) out[j] *= inv;
  }
  return p;
}

// Mean cross-entropy of one-hot targets against given probabilities, and the
// gradient with respect to the logits that produced them: (p - onehot) / B.
// Probabilities are floored at 1e-12 inside the log only.
template <class T>
T cce_loss(const Tensor<T>& probs, const std::vector<std::size_t>& targets,
           Tensor<T>* dlogits) {
  if (probs.rank() != 2 || probs.dim(0) != targets.size()) {
    throw ShapeError("cce: probs " + shape_str(probs.shape()) + " vs " +
                     std::to_string(targets.size()) + " targets");
  }
  std::size_t B = probs.dim(0), C = probs.dim(1);
  double loss = 0.0;
  for (std::size_t i = 0; i < B; ++i) {
    if (targets[i] >= C) throw BoundsError("cce: target class out of range");
    double p = static_cast<double>(probs(i, targets[i]));
    loss -= std::log(std::max(p, 1e-12));
  }
  if (dlogits != nullptr) {
    *dlogits = Tensor<T>({B, C});
    const T invB = T(1) / static_cast<T>(B);
    for (std::size_t i = 0; i < B; ++i) {
      for (std::size_t j = 0; j < C; ++j) {
        T y = (j == targets[i]) ? T(1) : T(0);
        (*dlogits)(i, j) = (probs(i, j) - y) * invB;
      }
    }
  }
  return static_cast<T>(loss / static_cast<double>(B));
}

// Fused softmax + cross-entropy.
template <class T>
T softmax_cce(const Tensor<T>& logits, const std::vector<std::size_t>& targets,
              Tensor<T>* dlogits, Tensor<T>* probs_out = nullptr) {
  Tensor<T> probs = softmax_rows(logits);
  T loss = cce_loss(probs, targets, dlogits);
  if (probs_out != nullptr) *probs_out = std::move(probs);
  return loss;
}

}  // namespace tempogauge::nn
