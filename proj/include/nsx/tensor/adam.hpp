#pragma once

#include <vector>

#include "nsx/tensor/tensor.hpp"

namespace nsx {

struct AdamOptions {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam with bias correction. Moments are kept in double per parameter.
class Adam {
 public:
  Adam(std::vector<Tensor> params, AdamOptions options);

  /// One update from the current gradients. Throws if a parameter has no
  /// gradient buffer (it was never reached by backward).
  void step();
  void zero_grad();

  void set_lr(double lr) { options_.lr = lr; }
  double lr() const { return options_.lr; }
  long steps() const { return steps_; }
  const std::vector<Tensor>& params() const { return params_; }

 private:
  std::vector<Tensor> params_;
  AdamOptions options_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  long steps_ = 0;
};

}  // namespace nsx
