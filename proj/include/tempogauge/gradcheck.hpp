#pragma once

#include <functional>
#include <string>
#include <vector>

#include "tempogauge/optimizer.hpp"
#include "tempogauge/tensor.hpp"

namespace tempogauge::nn {

struct GradCheckBlock {
  std::string name;
  double max_rel_err = 0.0;
  std::size_t n_elements = 0;
  bool skipped = false;
  std::string note;
};

struct GradCheckReport {
  std::vector<GradCheckBlock> blocks;
  double tolerance = 1e-4;

  bool passed() const {
    for (const auto& b : blocks) {
      if (!b.skipped && !(b.max_rel_err < tolerance)) return false;
    }
    return true;
  }
};

// Central-difference check of analytic gradients, in double.
//
// compute_grads must zero the model's gradients and run one deterministic
// forward/backward; loss_fn must rerun the same forward and return the loss.
// For every element of every listed parameter the relative error is
// |analytic - numeric| / max(|analytic|, |numeric|, floor). The floor is the
// comparison's absolute resolution: components below it must still agree to
// tolerance * floor in absolute terms (1e-8 at the defaults). It cannot sit
// much lower, because the numeric side carries O(step^2 * |f'''|) truncation
// error, which in a deep stack reaches a few 1e-9 on components whose
// gradient is itself that small.
GradCheckBlock check_gradients(
    const std::string& name, const std::function<double()>& loss_fn,
    const std::function<void()>& compute_grads,
    const std::vector<TensorRef<double>>& params, double step = 1e-5,
    double floor = 1e-4);

// Checks every differentiable block at a small fixed geometry: dense,
// batch-norm, ELU, tanh, softmax+cross-entropy, average pooling, the
// bidirectional recurrence, and the full three-layer stack end to end.
// Dropout's stochastic mask is reported as skipped rather than checked.
GradCheckReport run_standard_grad_checks(double tolerance = 1e-4);

}  // namespace tempogauge::nn
