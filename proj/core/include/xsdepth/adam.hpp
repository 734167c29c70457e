#pragma once

#include <vector>

#include "xsdepth/autograd.hpp"

namespace xsdepth {

// Adam over one parameter group. State (first/second moments, step count)
// lives with the optimizer instance; each group gets its own instance.
class AdamOptimizer {
 public:
  AdamOptimizer() = default;
  explicit AdamOptimizer(std::vector<Var> params, Scalar lr = 2e-4, Scalar beta1 = 0.9,
                         Scalar beta2 = 0.999, Scalar eps = 1e-8);

  // Applies one update from the gradients currently stored on the params.
  // Parameters whose grad has not been populated are skipped.
  void step();
  void zero_grad();
  long step_count() const { return t_; }
  const std::vector<Var>& params() const { return params_; }

 private:
  struct MomentPair {
    Tensor m, v;
  };
  std::vector<Var> params_;
  std::vector<MomentPair> state_;
  Scalar lr_ = 2e-4, beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
  long t_ = 0;
};

}  // namespace xsdepth
