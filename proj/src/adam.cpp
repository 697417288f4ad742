#include "rgcn/adam.hpp"

#include <cmath>

#include "rgcn/error.hpp"

namespace rgcn {

template <typename S>
Adam<S>::Adam(std::vector<Tensor<S>> params, AdamOptions options)
    : params_(std::move(params)), options_(options) {
  for (const auto& p : params_) {
    m_.push_back(Matrix<S>::Zero(p.rows(), p.cols()));
    v_.push_back(Matrix<S>::Zero(p.rows(), p.cols()));
  }
}

template <typename S>
void Adam<S>::step() {
  for (const auto& p : params_) {
    if (p.has_grad() && !p.grad().allFinite()) {
      throw NumericalError("adam: non-finite gradient in parameter '" + p.name() + "'");
    }
  }
  ++t_;
  const double b1 = options_.beta1;
  const double b2 = options_.beta2;
  const double correction1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double correction2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  const S lr = static_cast<S>(options_.learning_rate);
  const S eps = static_cast<S>(options_.epsilon);
  for (std::size_t k = 0; k < params_.size(); ++k) {
    auto& p = params_[k];
    if (!p.has_grad()) {
      m_[k] *= static_cast<S>(b1);
      v_[k] *= static_cast<S>(b2);
    } else {
      const auto& g = p.grad();
      m_[k] = static_cast<S>(b1) * m_[k] + static_cast<S>(1.0 - b1) * g;
      v_[k] = static_cast<S>(b2) * v_[k] + static_cast<S>(1.0 - b2) * g.cwiseAbs2();
    }
    auto m_hat = m_[k].array() / static_cast<S>(correction1);
    auto v_hat = v_[k].array() / static_cast<S>(correction2);
    p.mutable_value().array() -= lr * m_hat / (v_hat.sqrt() + eps);
  }
}

template <typename S>
void Adam<S>::zero_grad() {
  for (const auto& p : params_) p.zero_grad();
}

template class Adam<float>;
template class Adam<double>;

}  // namespace rgcn
