#pragma once

#include <cstdint>
#include <vector>

#include "rgcn/autodiff.hpp"

namespace rgcn {

struct AdamOptions {
  double learning_rate = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Full-batch Adam over a fixed parameter list. Moments start at zero and the
/// step counter advances by one per call to step().
template <typename Scalar>
class Adam {
 public:
  Adam(std::vector<Tensor<Scalar>> params, AdamOptions options = {});

  /// Applies one update from the accumulated gradients. Parameters with no
  /// gradient are treated as having a zero gradient. Throws NumericalError
  /// naming the first parameter whose gradient holds a NaN or infinity.
  void step();
  void zero_grad();

  std::int64_t step_count() const { return t_; }
  const AdamOptions& options() const { return options_; }
  const std::vector<Tensor<Scalar>>& parameters() const { return params_; }
  const Matrix<Scalar>& first_moment(std::size_t k) const { return m_[k]; }
  const Matrix<Scalar>& second_moment(std::size_t k) const { return v_[k]; }

 private:
  std::vector<Tensor<Scalar>> params_;
  AdamOptions options_;
  std::vector<Matrix<Scalar>> m_;
  std::vector<Matrix<Scalar>> v_;
  std::int64_t t_ = 0;
};

}  // namespace rgcn
