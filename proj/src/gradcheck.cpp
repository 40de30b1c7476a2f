#include "tempogauge/gradcheck.hpp"

#include <cmath>
#include <random>

#include "tempogauge/model.hpp"
#include "tempogauge/nn.hpp"

namespace tempogauge::nn {

GradCheckBlock check_gradients(const std::string& name,
                               const std::function<double()>& loss_fn,
                               const std::function<void()>& compute_grads,
                               const std::vector<TensorRef<double>>& params,
                               double step, double floor) {
  compute_grads();
  std::vector<std::vector<double>> analytic;
  analytic.reserve(params.size());
  for (const auto& p : params) {
    analytic.emplace_back(p.grad->data(), p.grad->data() + p.grad->numel());
  }

  GradCheckBlock blk;
  blk.name = name;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Tensor<double>& v = *params[pi].value;
    for (std::size_t i = 0; i < v.numel(); ++i) {
      double orig = v[i];
      v[i] = orig + step;
      double lp = loss_fn();
      v[i] = orig - step;
      double lm = loss_fn();
      v[i] = orig;
      double numeric = (lp - lm) / (2.0 * step);
      double ana = analytic[pi][i];
      double denom = std::max({std::abs(ana), std::abs(numeric), floor});
      double rel = std::abs(ana - numeric) / denom;
      blk.max_rel_err = std::max(blk.max_rel_err, rel);
      ++blk.n_elements;
    }
  }
  return blk;
}

namespace {

Tensor<double> random_tensor(std::vector<std::size_t> shape,
                             std::mt19937_64& rng, double scale = 1.0) {
  Tensor<double> t(std::move(shape));
  std::normal_distribution<double> n(0.0, scale);
  for (std::size_t i = 0; i < t.numel(); ++i) t[i] = n(rng);
  return t;
}

double dot_loss(const Tensor<double>& y, const Tensor<double>& r) {
  double acc = 0.0;
  for (std::size_t i = 0; i < y.numel(); ++i) acc += y[i] * r[i];
  return acc;
}

GradCheckBlock check_dense() {
  std::mt19937_64 rng(11);
  Dense<double> layer(7, 5);
  layer.init(rng);
  Tensor<double> x = random_tensor({4, 7}, rng);
  Tensor<double> r = random_tensor({4, 5}, rng);
  Tensor<double> dx({4, 7});
  auto loss = [&] { return dot_loss(layer.forward(x), r); };
  auto grads = [&] {
    layer.zero_grad();
    layer.forward(x);
    dx = layer.backward(r);
  };
  return check_gradients("dense", loss, grads,
                         {{"w", &layer.w, &layer.gw},
                          {"b", &layer.b, &layer.gb},
                          {"x", &x, &dx}});
}

GradCheckBlock check_batch_norm() {
  std::mt19937_64 rng(12);
  BatchNorm<double> layer(5);
  for (std::size_t i = 0; i < 5; ++i) {
    layer.gamma[i] = 0.5 + 0.3 * static_cast<double>(i);
    layer.beta[i] = -0.2 * static_cast<double>(i);
  }
  Tensor<double> x = random_tensor({6, 5}, rng, 2.0);
  Tensor<double> r = random_tensor({6, 5}, rng);
  Tensor<double> dx({6, 5});
  auto loss = [&] { return dot_loss(layer.forward(x, Mode::kTrain), r); };
  auto grads = [&] {
    layer.zero_grad();
    layer.forward(x, Mode::kTrain);
    dx = layer.backward(r);
  };
  return check_gradients("batch_norm", loss, grads,
                         {{"gamma", &layer.gamma, &layer.ggamma},
                          {"beta", &layer.beta, &layer.gbeta},
                          {"x", &x, &dx}});
}

GradCheckBlock check_elu() {
  std::mt19937_64 rng(13);
  Elu<double> layer;
  Tensor<double> x = random_tensor({3, 9}, rng, 1.5);
  Tensor<double> r = random_tensor({3, 9}, rng);
  Tensor<double> dx({3, 9});
  auto loss = [&] { return dot_loss(layer.forward(x), r); };
  auto grads = [&] {
    layer.forward(x);
    dx = layer.backward(r);
  };
  return check_gradients("elu", loss, grads, {{"x", &x, &dx}});
}

GradCheckBlock check_tanh() {
  std::mt19937_64 rng(14);
  TanhAct<double> layer;
  Tensor<double> x = random_tensor({3, 9}, rng, 1.5);
  Tensor<double> r = random_tensor({3, 9}, rng);
  Tensor<double> dx({3, 9});
  auto loss = [&] { return dot_loss(layer.forward(x), r); };
  auto grads = [&] {
    layer.forward(x);
    dx = layer.backward(r);
  };
  return check_gradients("tanh", loss, grads, {{"x", &x, &dx}});
}

GradCheckBlock check_softmax_cce() {
  std::mt19937_64 rng(15);
  Tensor<double> logits = random_tensor({3, 6}, rng, 2.0);
  std::vector<std::size_t> targets = {2, 0, 5};
  Tensor<double> dlogits({3, 6});
  auto loss = [&] { return softmax_cce<double>(logits, targets, nullptr); };
  auto grads = [&] { softmax_cce(logits, targets, &dlogits); };
  return check_gradients("softmax_cce", loss, grads,
                         {{"logits", &logits, &dlogits}});
}

GradCheckBlock check_avg_pool() {
  std::mt19937_64 rng(16);
  AvgPoolTime<double> layer(3);
  Tensor<double> x = random_tensor({2, 7, 4}, rng);  // one trailing frame dropped
  Tensor<double> r = random_tensor({2, 2, 4}, rng);
  Tensor<double> dx({2, 7, 4});
  auto loss = [&] { return dot_loss(layer.forward(x), r); };
  auto grads = [&] {
    layer.forward(x);
    dx = layer.backward(r);
  };
  return check_gradients("avg_pool", loss, grads, {{"x", &x, &dx}});
}

GradCheckBlock check_birnn() {
  std::mt19937_64 rng(17);
  BiRecurrent<double> layer(5, 4);
  layer.init(rng);
  Tensor<double> x = random_tensor({2, 11, 5}, rng);
  Tensor<double> r = random_tensor({2, 11, 8}, rng);
  Tensor<double> dx({2, 11, 5});
  auto loss = [&] { return dot_loss(layer.forward(x), r); };
  auto grads = [&] {
    layer.zero_grad();
    layer.forward(x);
    dx = layer.backward(r);
  };
  std::vector<TensorRef<double>> params;
  std::vector<TensorRef<double>> buffers;
  layer.collect("rnn", params, buffers);
  params.push_back({"x", &x, &dx});
  return check_gradients("birnn", loss, grads, params);
}

GradCheckBlock check_full_stack() {
  // The production recurrent geometry (3 layers x 25 units, 40 bands) on a
  // short 16-frame input, with a slim dense head to keep probing cheap.
  ModelConfig cfg;
  cfg.window_frames = 16;
  cfg.pool_k = 5;
  cfg.dense_widths = {24, 12};
  cfg.n_classes = 8;
  cfg.dropout_p = 0.0;
  TempoNet<double> net(cfg);
  net.init(21);

  std::mt19937_64 rng(22);
  Tensor<double> x = random_tensor({2, 16, 40}, rng);
  std::vector<std::size_t> targets = {3, 6};
  Tensor<double> dx({2, 16, 40});
  auto loss = [&] {
    Tensor<double> logits = net.forward(x, Mode::kTrain);
    return softmax_cce<double>(logits, targets, nullptr);
  };
  auto grads = [&] {
    net.zero_grad();
    Tensor<double> logits = net.forward(x, Mode::kTrain);
    Tensor<double> dlogits;
    softmax_cce(logits, targets, &dlogits);
    dx = net.backward(dlogits);
  };
  std::vector<TensorRef<double>> params = net.params();
  params.push_back({"x", &x, &dx});
  return check_gradients("full_stack", loss, grads, params);
}

}  // namespace

GradCheckReport run_standard_grad_checks(double tolerance) {
  GradCheckReport report;
  report.tolerance = tolerance;
  report.blocks.push_back(check_dense());
  report.blocks.push_back(check_batch_norm());
  report.blocks.push_back(check_elu());
  report.blocks.push_back(check_tanh());
  report.blocks.push_back(check_softmax_cce());
  report.blocks.push_back(check_avg_pool());
  report.blocks.push_back(check_birnn());
  report.blocks.push_back(check_full_stack());

  GradCheckBlock dropout;
  dropout.name = "dropout";
  dropout.skipped = true;
  dropout.note = "stochastic mask has no pointwise derivative to compare";
  report.blocks.push_back(dropout);
  return report;
}

}  // namespace tempogauge::nn
