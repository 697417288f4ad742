#pragma once

// Minimal reverse-mode differentiation over dense row-major matrices and
// compressed sparse rows. A Tape records one backward closure per primitive;
// Tape::backward replays them in reverse order.

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace rgcn {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Compressed sparse rows with an optional group label per entry. Grouped
/// entries let a coefficient table rescale every entry of one group (one
/// relation) at multiplication time.
template <typename Scalar>
struct SparseMatrix {
  std::int64_t rows = 0;
  std::int64_t cols = 0;
  std::vector<std::int64_t> row_ptr{0};
  std::vector<std::int32_t> col;
  std::vector<Scalar> value;
  std::vector<std::int32_t> group;  // empty or one per entry

  std::size_t nnz() const { return col.size(); }
  Matrix<Scalar> to_dense() const;
};

template <typename Scalar>
class Tape;

/// Handle to a matrix that may take part in gradient accumulation. Copies
/// share the same storage.
template <typename Scalar>
class Tensor {
 public:
  using MatrixType = Matrix<Scalar>;

  Tensor() = default;

  /// A leaf the optimizer owns. `name` shows up in diagnostics.
  static Tensor parameter(MatrixType value, std::string name = {});
  /// A leaf that never receives gradients.
  static Tensor constant(MatrixType value);

  bool defined() const { return static_cast<bool>(node_); }
  std::int64_t rows() const { return node_->value.rows(); }
  std::int64_t cols() const { return node_->value.cols(); }
  const std::string& name() const { return node_->name; }
  bool requires_grad() const { return node_->requires_grad; }

  const MatrixType& value() const { return node_->value; }
  MatrixType& mutable_value() { return node_->value; }

  bool has_grad() const { return node_->grad_ready; }
  /// Gradient accumulator, allocated as zeros on first access.
  MatrixType& grad() const;
  void zero_grad() const;

  /// Scalar value of a 1x1 tensor.
  Scalar item() const;

  bool all_finite() const { return node_->value.allFinite(); }

  bool same_storage(const Tensor& other) const { return node_ == other.node_; }

 private:
  friend class Tape<Scalar>;

  struct Node {
    MatrixType value;
    MatrixType grad;
    bool requires_grad = false;
    bool grad_ready = false;
    bool is_leaf = true;
    std::string name;
  };

  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  std::shared_ptr<Node> node_;
};

/// Ordered record of primitive operations. Single-threaded; independent tapes
/// may run concurrently. A tape built with `record = false` evaluates forward
/// values only.
template <typename Scalar>
class Tape {
 public:
  using MatrixType = Matrix<Scalar>;
  using TensorType = Tensor<Scalar>;

  explicit Tape(bool record = true) : record_(record) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return record_; }
  std::size_t size() const { return ops_.size(); }

  /// Seeds d(loss)/d(loss) = 1 and replays the tape backwards. Leaf gradients
  /// accumulate across calls; intermediate gradients are reset each call.
  void backward(const TensorType& loss);

  /// Creates an op output. When any input requires a gradient and the tape is
  /// recording, `backward_fn` is stored and receives the output handle.
  TensorType record(MatrixType value, const std::vector<TensorType>& inputs,
                    std::function<void(const TensorType& out)> backward_fn);

 private:
  bool record_;
  std::vector<std::function<void()>> ops_;
  std::vector<std::shared_ptr<typename TensorType::Node>> intermediates_;
  std::vector<std::shared_ptr<typename TensorType::Node>> leaves_;
};

namespace ad {

template <typename Scalar>
using T = Tensor<Scalar>;

template <typename S> T<S> matmul(Tape<S>& tape, const T<S>& a, const T<S>& b);
/// y = A x for a fixed sparse A.
template <typename S>
T<S> sparse_matmul(Tape<S>& tape, std::shared_ptr<const SparseMatrix<S>> a,
                   const T<S>& x);
/// y = A' x where entry e of A' is A.value[e] * coeff(A.group[e], column).
template <typename S>
T<S> sparse_matmul_grouped(Tape<S>& tape, std::shared_ptr<const SparseMatrix<S>> a,
                           const T<S>& coeff, std::int64_t column, const T<S>& x);
template <typename S> T<S> add(Tape<S>& tape, const T<S>& a, const T<S>& b);
template <typename S> T<S> scale(Tape<S>& tape, const T<S>& a, S factor);
template <typename S> T<S> relu(Tape<S>& tape, const T<S>& a);
template <typename S> T<S> sigmoid(Tape<S>& tape, const T<S>& a);
template <typename S> T<S> softmax_rows(Tape<S>& tape, const T<S>& a);
template <typename S> T<S> elementwise_mul(Tape<S>& tape, const T<S>& a, const T<S>& b);
/// Row i of the result is row index[i] of `a`; repeated indices allowed.
template <typename S>
T<S> row_gather(Tape<S>& tape, const T<S>& a, std::span<const std::int32_t> index);
/// Stacks inputs vertically; all must share a column count.
template <typename S>
T<S> concat_rows(Tape<S>& tape, const std::vector<T<S>>& parts);
/// x [n x in] times diag(Q_1..Q_B)^T where `blocks` stacks the B blocks
/// Q_b [(out/B) x (in/B)] vertically into an [out x in/B] matrix.
template <typename S>
T<S> block_diag_apply(Tape<S>& tape, const T<S>& x, const T<S>& blocks,
                      std::int64_t num_blocks);
template <typename S> T<S> sum(Tape<S>& tape, const T<S>& a);
template <typename S> T<S> row_sum(Tape<S>& tape, const T<S>& a);
template <typename S> T<S> l2_norm_sq(Tape<S>& tape, const T<S>& a);
/// -sum_i ln a(row[i], column[i]).
template <typename S>
T<S> negative_log_likelihood(Tape<S>& tape, const T<S>& probs,
                             std::span<const std::int32_t> row,
                             std::span<const std::int32_t> column);
/// Scores e_s^T diag(d_r) e_o for every (subject[k], relation[k], object[k]);
/// returns a column of length k. Gathers rows of `entities` and `diagonals`.
template <typename S>
T<S> trilinear_score(Tape<S>& tape, const T<S>& entities, const T<S>& diagonals,
                     std::span<const std::int32_t> subject,
                     std::span<const std::int32_t> relation,
                     std::span<const std::int32_t> object);
/// Mean binary cross-entropy of sigmoid(logits) against 0/1 labels.
template <typename S>
T<S> binary_cross_entropy_with_logits(Tape<S>& tape, const T<S>& logits,
                                      std::span<const std::uint8_t> labels);

}  // namespace ad

/// Per-parameter finite-difference report.
struct GradientCheckEntry {
  std::string name;
  std::size_t coordinates_checked = 0;
  std::size_t coordinates_skipped = 0;  // straddling a kink
  double max_relative_error = 0.0;
};

struct GradientCheckReport {
  std::vector<GradientCheckEntry> entries;
  double max_relative_error = 0.0;
};

/// Compares analytic gradients of `loss_fn` against central differences,
/// |analytic - numeric| / max(1, |numeric|), over at most
/// `max_coordinates` sampled coordinates per parameter. `loss_fn` must be
/// deterministic and build its graph on the tape it is given.
///
/// With a positive `kink_tolerance`, coordinates whose forward and backward
/// one-sided slopes differ by more than kink_tolerance * max(1, |numeric|)
/// are skipped: the step crosses a ReLU boundary there and the central
/// difference measures nothing.
template <typename Scalar>
GradientCheckReport finite_difference_check(
    const std::function<Tensor<Scalar>(Tape<Scalar>&)>& loss_fn,
    std::vector<Tensor<Scalar>> params, double step,
    std::size_t max_coordinates = 64, std::uint64_t seed = 0, double kink_tolerance = 0.0);

}  // namespace rgcn
