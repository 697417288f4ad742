#include "rgcn/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "rgcn/error.hpp"

namespace rgcn {

namespace {

std::string shape_of(std::int64_t rows, std::int64_t cols) {
  return "[" + std::to_string(rows) + "x" + std::to_string(cols) + "]";
}

template <typename S>
void require_same_shape(const char* op, const Tensor<S>& a, const Tensor<S>& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(op) + ": shape mismatch " +
                     shape_of(a.rows(), a.cols()) + " vs " +
                     shape_of(b.rows(), b.cols()));
  }
}

}  // namespace

template <typename S>
Matrix<S> SparseMatrix<S>::to_dense() const {
  Matrix<S> dense = Matrix<S>::Zero(rows, cols);
  for (std::int64_t i = 0; i < rows; ++i) {
    for (auto e = row_ptr[i]; e < row_ptr[i + 1]; ++e) dense(i, col[e]) += value[e];
  }
  return dense;
}

template <typename S>
Tensor<S> Tensor<S>::parameter(MatrixType value, std::string name) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->requires_grad = true;
  node->name = std::move(name);
  return Tensor(std::move(node));
}

template <typename S>
Tensor<S> Tensor<S>::constant(MatrixType value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  return Tensor(std::move(node));
}

template <typename S>
typename Tensor<S>::MatrixType& Tensor<S>::grad() const {
  if (!node_->grad_ready) {
    node_->grad = MatrixType::Zero(node_->value.rows(), node_->value.cols());
    node_->grad_ready = true;
  }
  return node_->grad;
}

template <typename S>
void Tensor<S>::zero_grad() const {
  if (node_->grad_ready) node_->grad.setZero();
}

template <typename S>
S Tensor<S>::item() const {
  if (rows() != 1 || cols() != 1) {
    throw ShapeError("item: expected a 1x1 tensor, got " + shape_of(rows(), cols()));
  }
  return node_->value(0, 0);
}

template <typename S>
Tensor<S> Tape<S>::record(MatrixType value, const std::vector<TensorType>& inputs,
                          std::function<void(const TensorType& out)> backward_fn) {
  auto node = std::make_shared<typename TensorType::Node>();
  node->value = std::move(value);
  node->is_leaf = false;
  bool needs_grad = false;
  for (const auto& in : inputs) needs_grad = needs_grad || in.requires_grad();
  if (!record_ || !needs_grad) return TensorType(std::move(node));

  node->requires_grad = true;
  for (const auto& in : inputs) {
    if (in.requires_grad() && in.node_->is_leaf) leaves_.push_back(in.node_);
  }
  intermediates_.push_back(node);
  ops_.push_back([fn = std::move(backward_fn), weak = std::weak_ptr(node)]() {
    auto out = weak.lock();
    if (!out || !out->grad_ready) return;
    fn(TensorType(out));
  });
  return TensorType(std::move(node));
}

template <typename S>
void Tape<S>::backward(const TensorType& loss) {
  if (loss.rows() != 1 || loss.cols() != 1) {
    throw ShapeError("backward: loss must be a 1x1 scalar, got " +
                     shape_of(loss.rows(), loss.cols()));
  }
  for (auto& node : intermediates_) {
    if (node->grad_ready) node->grad.setZero();
  }
  for (auto& leaf : leaves_) {
    if (!leaf->grad_ready) {
      leaf->grad = MatrixType::Zero(leaf->value.rows(), leaf->value.cols());
      leaf->grad_ready = true;
    }
  }
  loss.grad()(0, 0) += S(1);
  for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) (*it)();
}

namespace ad {

template <typename S>
T<S> matmul(Tape<S>& tape, const T<S>& a, const T<S>& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: inner dimensions differ " + shape_of(a.rows(), a.cols()) +
                     " x " + shape_of(b.rows(), b.cols()));
  }
  Matrix<S> value = a.value() * b.value();
  return tape.record(std::move(value), {a, b}, [a, b](const T<S>& out) {
    const auto& g = out.grad();
    if (a.requires_grad()) a.grad().noalias() += g * b.value().transpose();
    if (b.requires_grad()) b.grad().noalias() += a.value().transpose() * g;
  });
}

template <typename S>
T<S> sparse_matmul(Tape<S>& tape, std::shared_ptr<const SparseMatrix<S>> a,
                   const T<S>& x) {
  if (a->cols != x.rows()) {
    throw ShapeError("sparse_matmul: " + shape_of(a->rows, a->cols) + " x " +
                     shape_of(x.rows(), x.cols()));
  }
  Matrix<S> value = Matrix<S>::Zero(a->rows, x.cols());
  const auto& xv = x.value();
  for (std::int64_t i = 0; i < a->rows; ++i) {
    for (auto e = a->row_ptr[i]; e < a->row_ptr[i + 1]; ++e) {
      value.row(i) += a->value[e] * xv.row(a->col[e]);
    }
  }
  return tape.record(std::move(value), {x}, [a, x](const T<S>& out) {
    const auto& g = out.grad();
    auto& dx = x.grad();
    for (std::int64_t i = 0; i < a->rows; ++i) {
      for (auto e = a->row_ptr[i]; e < a->row_ptr[i + 1]; ++e) {
        dx.row(a->col[e]) += a->value[e] * g.row(i);
      }
    }
  });
}

template <typename S>
T<S> sparse_matmul_grouped(Tape<S>& tape, std::shared_ptr<const SparseMatrix<S>> a,
                           const T<S>& coeff, std::int64_t column, const T<S>& x) {
  if (a->cols != x.rows()) {
    throw ShapeError("sparse_matmul_grouped: " + shape_of(a->rows, a->cols) + " x " +
                     shape_of(x.rows(), x.cols()));
  }
  if (a->group.size() != a->nnz()) {
    throw ShapeError("sparse_matmul_grouped: sparse matrix carries no group labels");
  }
  if (column < 0 || column >= coeff.cols()) {
    throw ShapeError("sparse_matmul_grouped: column " + std::to_string(column) +
                     " outside coefficient table " +
                     shape_of(coeff.rows(), coeff.cols()));
  }
  for (auto grp : a->group) {
    if (grp < 0 || grp >= coeff.rows()) {
      throw ShapeError("sparse_matmul_grouped: group " + std::to_string(grp) +
                       " outside coefficient table " +
                       shape_of(coeff.rows(), coeff.cols()));
    }
  }
  Matrix<S> value = Matrix<S>::Zero(a->rows, x.cols());
  const auto& xv = x.value();
  const auto& cv = coeff.value();
  for (std::int64_t i = 0; i < a->rows; ++i) {
    for (auto e = a->row_ptr[i]; e < a->row_ptr[i + 1]; ++e) {
      value.row(i) += (a->value[e] * cv(a->group[e], column)) * xv.row(a->col[e]);
    }
  }
  return tape.record(std::move(value), {coeff, x}, [a, coeff, column, x](const T<S>& out) {
    const auto& g = out.grad();
    const auto& xv = x.value();
    const auto& cv = coeff.value();
    const bool want_x = x.requires_grad();
    const bool want_c = coeff.requires_grad();
    for (std::int64_t i = 0; i < a->rows; ++i) {
      for (auto e = a->row_ptr[i]; e < a->row_ptr[i + 1]; ++e) {
        const auto j = a->col[e];
        if (want_x) x.grad().row(j) += (a->value[e] * cv(a->group[e], column)) * g.row(i);
        if (want_c) coeff.grad()(a->group[e], column) += a->value[e] * g.row(i).dot(xv.row(j));
      }
    }
  });
}

template <typename S>
T<S> add(Tape<S>& tape, const T<S>& a, const T<S>& b) {
  require_same_shape("add", a, b);
  Matrix<S> value = a.value() + b.value();
  return tape.record(std::move(value), {a, b}, [a, b](const T<S>& out) {
    if (a.requires_grad()) a.grad() += out.grad();
    if (b.requires_grad()) b.grad() += out.grad();
  });
}

template <typename S>
T<S> scale(Tape<S>& tape, const T<S>& a, S factor) {
  Matrix<S> value = factor * a.value();
  return tape.record(std::move(value), {a}, [a, factor](const T<S>& out) {
    a.grad() += factor * out.grad();
  });
}

template <typename S>
T<S> relu(Tape<S>& tape, const T<S>& a) {
  Matrix<S> value = a.value().cwiseMax(S(0));
  return tape.record(std::move(value), {a}, [a](const T<S>& out) {
    a.grad().array() += (a.value().array() > S(0)).template cast<S>() * out.grad().array();
  });
}

template <typename S>
T<S> sigmoid(Tape<S>& tape, const T<S>& a) {
  Matrix<S> value = a.value().unaryExpr([](S v) { return S(1) / (S(1) + std::exp(-v)); });
  return tape.record(std::move(value), {a}, [a](const T<S>& out) {
    const auto& y = out.value().array();
    a.grad().array() += out.grad().array() * y * (S(1) - y);
  });
}

template <typename S>
T<S> softmax_rows(Tape<S>& tape, const T<S>& a) {
  Matrix<S> value(a.rows(), a.cols());
  for (std::int64_t i = 0; i < a.rows(); ++i) {
    const S peak = a.value().row(i).maxCoeff();
    value.row(i) = (a.value().row(i).array() - peak).exp().matrix();
    value.row(i) /= value.row(i).sum();
  }
  return tape.record(std::move(value), {a}, [a](const T<S>& out) {
    const auto& y = out.value();
    const auto& g = out.grad();
    auto& da = a.grad();
    for (std::int64_t i = 0; i < y.rows(); ++i) {
      const S inner = g.row(i).dot(y.row(i));
      da.row(i).array() += y.row(i).array() * (g.row(i).array() - inner);
    }
  });
}

template <typename S>
T<S> elementwise_mul(Tape<S>& tape, const T<S>& a, const T<S>& b) {
  require_same_shape("elementwise_mul", a, b);
  Matrix<S> value = a.value().cwiseProduct(b.value());
  return tape.record(std::move(value), {a, b}, [a, b](const T<S>& out) {
    if (a.requires_grad()) a.grad() += out.grad().cwiseProduct(b.value());
    if (b.requires_grad()) b.grad() += out.grad().cwiseProduct(a.value());
  });
}

template <typename S>
T<S> row_gather(Tape<S>& tape, const T<S>& a, std::span<const std::int32_t> index) {
  Matrix<S> value(static_cast<std::int64_t>(index.size()), a.cols());
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] < 0 || index[i] >= a.rows()) {
      throw ShapeError("row_gather: index " + std::to_string(index[i]) +
                       " outside " + shape_of(a.rows(), a.cols()));
    }
    value.row(static_cast<std::int64_t>(i)) = a.value().row(index[i]);
  }
  std::vector<std::int32_t> idx(index.begin(), index.end());
  return tape.record(std::move(value), {a}, [a, idx = std::move(idx)](const T<S>& out) {
    const auto& g = out.grad();
    auto& da = a.grad();
    for (std::size_t i = 0; i < idx.size(); ++i) {
      da.row(idx[i]) += g.row(static_cast<std::int64_t>(i));
    }
  });
}

template <typename S>
T<S> concat_rows(Tape<S>& tape, const std::vector<T<S>>& parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no inputs");
  std::int64_t rows = 0;
  for (const auto& p : parts) {
    if (p.cols() != parts.front().cols()) {
      throw ShapeError("concat_rows: column mismatch " +
                       shape_of(parts.front().rows(), parts.front().cols()) + " vs " +
                       shape_of(p.rows(), p.cols()));
    }
    rows += p.rows();
  }
  Matrix<S> value(rows, parts.front().cols());
  std::int64_t offset = 0;
  for (const auto& p : parts) {
    value.middleRows(offset, p.rows()) = p.value();
    offset += p.rows();
  }
  return tape.record(std::move(value), parts, [parts](const T<S>& out) {
    const auto& g = out.grad();
    std::int64_t offset = 0;
    for (const auto& p : parts) {
      if (p.requires_grad()) p.grad() += g.middleRows(offset, p.rows());
      offset += p.rows();
    }
  });
}

template <typename S>
T<S> block_diag_apply(Tape<S>& tape, const T<S>& x, const T<S>& blocks,
                      std::int64_t num_blocks) {
  if (num_blocks <= 0 || blocks.rows() % num_blocks != 0 ||
      x.cols() != num_blocks * blocks.cols()) {
    throw ShapeError("block_diag_apply: input " + shape_of(x.rows(), x.cols()) +
                     " incompatible with " + std::to_string(num_blocks) +
                     " stacked blocks " + shape_of(blocks.rows(), blocks.cols()));
  }
  const std::int64_t in_b = blocks.cols();
  const std::int64_t out_b = blocks.rows() / num_blocks;
  Matrix<S> value(x.rows(), blocks.rows());
  for (std::int64_t b = 0; b < num_blocks; ++b) {
    value.middleCols(b * out_b, out_b).noalias() =
        x.value().middleCols(b * in_b, in_b) *
        blocks.value().middleRows(b * out_b, out_b).transpose();
  }
  return tape.record(std::move(value), {x, blocks},
                     [x, blocks, num_blocks, in_b, out_b](const T<S>& out) {
    const auto& g = out.grad();
    for (std::int64_t b = 0; b < num_blocks; ++b) {
      if (x.requires_grad()) {
        x.grad().middleCols(b * in_b, in_b).noalias() +=
            g.middleCols(b * out_b, out_b) * blocks.value().middleRows(b * out_b, out_b);
      }
      if (blocks.requires_grad()) {
        blocks.grad().middleRows(b * out_b, out_b).noalias() +=
            g.middleCols(b * out_b, out_b).transpose() * x.value().middleCols(b * in_b, in_b);
      }
    }
  });
}

template <typename S>
T<S> sum(Tape<S>& tape, const T<S>& a) {
  Matrix<S> value(1, 1);
  value(0, 0) = a.value().sum();
  return tape.record(std::move(value), {a}, [a](const T<S>& out) {
    a.grad().array() += out.grad()(0, 0);
  });
}

template <typename S>
T<S> row_sum(Tape<S>& tape, const T<S>& a) {
  Matrix<S> value = a.value().rowwise().sum();
  return tape.record(std::move(value), {a}, [a](const T<S>& out) {
    a.grad().colwise() += out.grad().col(0);
  });
}

template <typename S>
T<S> l2_norm_sq(Tape<S>& tape, const T<S>& a) {
  Matrix<S> value(1, 1);
  value(0, 0) = a.value().squaredNorm();
  return tape.record(std::move(value), {a}, [a](const T<S>& out) {
    a.grad() += (S(2) * out.grad()(0, 0)) * a.value();
  });
}

template <typename S>
T<S> negative_log_likelihood(Tape<S>& tape, const T<S>& probs,
                             std::span<const std::int32_t> row,
                             std::span<const std::int32_t> column) {
  if (row.size() != column.size()) {
    throw ShapeError("negative_log_likelihood: " + std::to_string(row.size()) +
                     " rows vs " + std::to_string(column.size()) + " columns");
  }
  S total = 0;
  for (std::size_t k = 0; k < row.size(); ++k) {
    if (row[k] < 0 || row[k] >= probs.rows() || column[k] < 0 ||
        column[k] >= probs.cols()) {
      throw ShapeError("negative_log_likelihood: entry (" + std::to_string(row[k]) +
                       ", " + std::to_string(column[k]) + ") outside " +
                       shape_of(probs.rows(), probs.cols()));
    }
    total -= std::log(probs.value()(row[k], column[k]));
  }
  Matrix<S> value(1, 1);
  value(0, 0) = total;
  std::vector<std::int32_t> rows(row.begin(), row.end());
  std::vector<std::int32_t> cols(column.begin(), column.end());
  return tape.record(std::move(value), {probs},
                     [probs, rows = std::move(rows), cols = std::move(cols)](const T<S>& out) {
    const S g = out.grad()(0, 0);
    auto& dp = probs.grad();
    for (std::size_t k = 0; k < rows.size(); ++k) {
      dp(rows[k], cols[k]) -= g / probs.value()(rows[k], cols[k]);
    }
  });
}

template <typename S>
T<S> trilinear_score(Tape<S>& tape, const T<S>& entities, const T<S>& diagonals,
                     std::span<const std::int32_t> subject,
                     std::span<const std::int32_t> relation,
                     std::span<const std::int32_t> object) {
  if (entities.cols() != diagonals.cols()) {
    throw ShapeError("trilinear_score: entity width " + shape_of(entities.rows(), entities.cols()) +
                     " vs relation width " + shape_of(diagonals.rows(), diagonals.cols()));
  }
  if (subject.size() != relation.size() || subject.size() != object.size()) {
    throw ShapeError("trilinear_score: index lists of unequal length");
  }
  const auto n = static_cast<std::int64_t>(subject.size());
  for (std::int64_t k = 0; k < n; ++k) {
    if (subject[k] < 0 || subject[k] >= entities.rows() || object[k] < 0 ||
        object[k] >= entities.rows() || relation[k] < 0 || relation[k] >= diagonals.rows()) {
      throw ShapeError("trilinear_score: triple " + std::to_string(k) + " out of range");
    }
  }
  const auto& e = entities.value();
  const auto& d = diagonals.value();
  Matrix<S> value(n, 1);
  for (std::int64_t k = 0; k < n; ++k) {
    value(k, 0) = (e.row(subject[k]).cwiseProduct(d.row(relation[k])))
                      .dot(e.row(object[k]));
  }
  std::vector<std::int32_t> s(subject.begin(), subject.end());
  std::vector<std::int32_t> r(relation.begin(), relation.end());
  std::vector<std::int32_t> o(object.begin(), object.end());
  return tape.record(std::move(value), {entities, diagonals},
                     [entities, diagonals, s = std::move(s), r = std::move(r),
                      o = std::move(o)](const T<S>& out) {
    const auto& g = out.grad();
    const auto& e = entities.value();
    const auto& d = diagonals.value();
    const bool want_e = entities.requires_grad();
    const bool want_d = diagonals.requires_grad();
    for (std::size_t k = 0; k < s.size(); ++k) {
      const S gk = g(static_cast<std::int64_t>(k), 0);
      if (gk == S(0)) continue;
      if (want_e) {
        auto& de = entities.grad();
        de.row(s[k]) += gk * d.row(r[k]).cwiseProduct(e.row(o[k]));
        de.row(o[k]) += gk * d.row(r[k]).cwiseProduct(e.row(s[k]));
      }
      if (want_d) {
        diagonals.grad().row(r[k]) += gk * e.row(s[k]).cwiseProduct(e.row(o[k]));
      }
    }
  });
}

template <typename S>
T<S> binary_cross_entropy_with_logits(Tape<S>& tape, const T<S>& logits,
                                      std::span<const std::uint8_t> labels) {
  if (logits.cols() != 1 || logits.rows() != static_cast<std::int64_t>(labels.size())) {
    throw ShapeError("binary_cross_entropy_with_logits: logits " +
                     shape_of(logits.rows(), logits.cols()) + " vs " +
                     std::to_string(labels.size()) + " labels");
  }
  if (labels.empty()) throw ShapeError("binary_cross_entropy_with_logits: empty batch");
  const auto n = static_cast<S>(labels.size());
  S total = 0;
  for (std::size_t k = 0; k < labels.size(); ++k) {
    const S f = logits.value()(static_cast<std::int64_t>(k), 0);
    // softplus(f) - y f == -[y ln sigmoid(f) + (1 - y) ln(1 - sigmoid(f))]
    total += std::max(f, S(0)) + std::log1p(std::exp(-std::abs(f))) - (labels[k] ? f : S(0));
  }
  Matrix<S> value(1, 1);
  value(0, 0) = total / n;
  std::vector<std::uint8_t> y(labels.begin(), labels.end());
  return tape.record(std::move(value), {logits}, [logits, y = std::move(y), n](const T<S>& out) {
    const S g = out.grad()(0, 0) / n;
    auto& dl = logits.grad();
    for (std::size_t k = 0; k < y.size(); ++k) {
      const S f = logits.value()(static_cast<std::int64_t>(k), 0);
      const S p = S(1) / (S(1) + std::exp(-f));
      dl(static_cast<std::int64_t>(k), 0) += g * (p - (y[k] ? S(1) : S(0)));
    }
  });
}

}  // namespace ad

template <typename S>
GradientCheckReport finite_difference_check(
    const std::function<Tensor<S>(Tape<S>&)>& loss_fn, std::vector<Tensor<S>> params,
    double step, std::size_t max_coordinates, std::uint64_t seed, double kink_tolerance) {
  for (const auto& p : params) p.zero_grad();
  {
    Tape<S> tape;
    auto loss = loss_fn(tape);
    tape.backward(loss);
  }

  auto evaluate = [&]() {
    Tape<S> tape(false);
    return static_cast<double>(loss_fn(tape).item());
  };

  GradientCheckReport report;
  std::mt19937_64 rng(seed);
  for (auto& p : params) {
    GradientCheckEntry entry;
    entry.name = p.name();
    const auto size = static_cast<std::size_t>(p.value().size());
    std::vector<std::size_t> coords(size);
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (size > max_coordinates) {
      std::shuffle(coords.begin(), coords.end(), rng);
      coords.resize(max_coordinates);
    }
    for (auto c : coords) {
      S* slot = p.mutable_value().data() + c;
      const S original = *slot;
      *slot = static_cast<S>(original + step);
      const double up = evaluate();
      *slot = static_cast<S>(original - step);
      const double down = evaluate();
      *slot = original;
      const double numeric = (up - down) / (2.0 * step);
      if (kink_tolerance > 0.0) {
        const double center = evaluate();
        const double forward = (up - center) / step;
        const double backward = (center - down) / step;
        if (std::abs(forward - backward) > kink_tolerance * std::max(1.0, std::abs(numeric))) {
          ++entry.coordinates_skipped;
          continue;
        }
      }
      const double analytic = p.has_grad() ? static_cast<double>(p.grad().data()[c]) : 0.0;
      const double rel = std::abs(analytic - numeric) / std::max(1.0, std::abs(numeric));
      entry.max_relative_error = std::max(entry.max_relative_error, rel);
    }
    entry.coordinates_checked = coords.size() - entry.coordinates_skipped;
    report.max_relative_error = std::max(report.max_relative_error, entry.max_relative_error);
    report.entries.push_back(std::move(entry));
  }
  return report;
}

#define RGCN_INSTANTIATE_AD(S)                                                         \
  template struct SparseMatrix<S>;                                                     \
  template class Tensor<S>;                                                            \
  template class Tape<S>;                                                              \
  template Tensor<S> ad::matmul(Tape<S>&, const Tensor<S>&, const Tensor<S>&);         \
  template Tensor<S> ad::sparse_matmul(Tape<S>&, std::shared_ptr<const SparseMatrix<S>>, \
                                       const Tensor<S>&);                              \
  template Tensor<S> ad::sparse_matmul_grouped(                                        \
      Tape<S>&, std::shared_ptr<const SparseMatrix<S>>, const Tensor<S>&, std::int64_t,  \
      const Tensor<S>&);                                                               \
  template Tensor<S> ad::add(Tape<S>&, const Tensor<S>&, const Tensor<S>&);            \
  template Tensor<S> ad::scale(Tape<S>&, const Tensor<S>&, S);                         \
  template Tensor<S> ad::relu(Tape<S>&, const Tensor<S>&);                             \
  template Tensor<S> ad::sigmoid(Tape<S>&, const Tensor<S>&);                          \
  template Tensor<S> ad::softmax_rows(Tape<S>&, const Tensor<S>&);                     \
  template Tensor<S> ad::elementwise_mul(Tape<S>&, const Tensor<S>&, const Tensor<S>&); \
  template Tensor<S> ad::row_gather(Tape<S>&, const Tensor<S>&,                        \
                                    std::span<const std::int32_t>);                    \
  template Tensor<S> ad::concat_rows(Tape<S>&, const std::vector<Tensor<S>>&);         \
  template Tensor<S> ad::block_diag_apply(Tape<S>&, const Tensor<S>&, const Tensor<S>&, \
                                          std::int64_t);                               \
  template Tensor<S> ad::sum(Tape<S>&, const Tensor<S>&);                              \
  template Tensor<S> ad::row_sum(Tape<S>&, const Tensor<S>&);                          \
  template Tensor<S> ad::l2_norm_sq(Tape<S>&, const Tensor<S>&);                       \
  template Tensor<S> ad::negative_log_likelihood(Tape<S>&, const Tensor<S>&,           \
                                                 std::span<const std::int32_t>,        \
                                                 std::span<const std::int32_t>);       \
  template Tensor<S> ad::trilinear_score(Tape<S>&, const Tensor<S>&, const Tensor<S>&,     \
                                         std::span<const std::int32_t>,                 \
                                         std::span<const std::int32_t>,                 \
                                         std::span<const std::int32_t>);                \
  template Tensor<S> ad::binary_cross_entropy_with_logits(                             \
      Tape<S>&, const Tensor<S>&, std::span<const std::uint8_t>);                      \
  template GradientCheckReport finite_difference_check<S>(                             \
      const std::function<Tensor<S>(Tape<S>&)>&, std::vector<Tensor<S>>, double,       \
      std::size_t, std::uint64_t, double);

RGCN_INSTANTIATE_AD(float)
RGCN_INSTANTIATE_AD(double)

}  // namespace rgcn
