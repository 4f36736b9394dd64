#pragma once

#include <cstddef>
#include <functional>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "bdlab/graph.hpp"
#include "bdlab/matrix.hpp"

namespace bdlab::grad {

enum class Activation { kRelu, kSoftplus };

double activate(double x, Activation kind);
double activate_derivative(double x, Activation kind);
const char* activation_name(Activation kind);
Activation parse_activation(const std::string& name);

/// Handle to a node on a Tape.
struct Var {
  std::size_t id = std::numeric_limits<std::size_t>::max();
  bool valid() const { return id != std::numeric_limits<std::size_t>::max(); }
};

/// Sparse matrix with a fixed pattern whose entry values live on the tape
/// (an nnz x 1 column, aligned with pattern->cols).
struct SparseVar {
  std::shared_ptr<const graph::SparseOperator> pattern;
  Var values;
};

enum class Aggregation {
  kSymmetricNormalized,  // D^{-1/2}(W + sI)D^{-1/2}
  kSum,                  // W + sI
};

/// Undirected edge list over local node ids. Edges with weight_slot -1 carry
/// weight 1; others read their weight from a tape column. extra_degree adds
/// degree mass for edges that exist in the full graph but are not listed.
struct EdgeLayout {
  std::size_t n = 0;
  std::vector<graph::Edge> edges;
  std::vector<std::ptrdiff_t> weight_slot;
  std::vector<double> extra_degree;
  std::size_t num_slots = 0;
};

/// Reverse-mode differentiation over dense matrices. Nodes are appended in
/// evaluation order; backward() walks them in reverse. Every forward value
/// is checked for finiteness.
class Tape {
 public:
  Var constant(DenseMatrix value);
  Var variable(DenseMatrix value);

  const DenseMatrix& value(Var v) const { return nodes_.at(v.id).value; }
  /// Gradient accumulated by backward(); zeros when the node received none.
  DenseMatrix grad(Var v) const;
  double scalar(Var v) const;
  bool requires_grad(Var v) const { return nodes_.at(v.id).requires_grad; }
  std::size_t size() const { return nodes_.size(); }

  Var matmul(Var a, Var b);
  Var transpose(Var a);
  Var spmm(const std::shared_ptr<const graph::SparseOperator>& op, Var x);
  Var spmm(const SparseVar& op, Var x);
  /// Builds the aggregation operator of `layout` (with self loops of weight
  /// self_weight on every node). `weights` is num_slots x 1 or invalid when
  /// the layout has no slots.
  SparseVar propagation(const std::shared_ptr<const EdgeLayout>& layout, Aggregation kind,
                        double self_weight, Var weights);

  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var hadamard(Var a, Var b);
  Var scale(Var a, double s);
  Var add_scalar(Var a, double s);
  /// m + 1 x cols row broadcast over every row.
  Var add_row(Var m, Var row);
  /// Row i of m scaled by col(i, 0).
  Var scale_rows(Var m, Var col);
  /// Column j of m scaled by row(0, j).
  Var scale_cols(Var m, Var row);

  Var activation(Var a, Activation kind);
  /// Elementwise derivative of the activation, itself differentiable.
  Var activation_derivative(Var a, Activation kind);
  Var row_softmax(Var a);
  /// Sum over `rows` of -log softmax(logits[r])[labels[r]].
  Var cross_entropy(Var logits, std::span<const std::size_t> rows, std::span<const int> labels);

  /// Rows by index; -1 yields a zero row.
  Var gather_rows(Var a, std::vector<std::ptrdiff_t> rows);
  Var concat_rows(std::span<const Var> parts);
  Var slice_cols(Var a, std::size_t start, std::size_t count);
  /// Row-major reinterpretation.
  Var reshape(Var a, std::size_t rows, std::size_t cols);
  /// Forward: 1 where a > 0 else 0. Backward: identity (straight-through).
  Var binarize_ste(Var a);

  /// n x 1 column of row L2 norms.
  Var row_norms(Var a);
  /// m x 1 cosine similarities between row pairs of x. A zero-norm row
  /// yields cosine 0 and is counted in zero_norm_cosines().
  Var cosine_pairs(Var x, std::vector<std::pair<std::size_t, std::size_t>> pairs);
  Var exp(Var a);
  /// max(0, a) elementwise.
  Var hinge(Var a);
  /// 1 x 1 sum of all entries.
  Var sum(Var a);
  /// 1 x 1 Frobenius norm.
  Var l2_norm(Var a);

  struct SegmentTerm {
    std::size_t segment;
    std::size_t row;
    double coef;
  };
  /// out(segment, 0) = sum of coef * col(row, 0) over the terms.
  Var segment_sum(Var col, std::vector<SegmentTerm> terms, std::size_t segments);

  /// Seeds d(root)/d(root) = 1 and propagates. root must be 1 x 1.
  void backward(Var root);

  std::size_t zero_norm_cosines() const { return zero_norm_cosines_; }

 private:
  struct Node {
    DenseMatrix value;
    DenseMatrix grad;
    bool requires_grad = false;
    std::function<void()> backprop;
  };

  Var push(DenseMatrix value, bool requires_grad, const char* op);
  DenseMatrix& grad_ref(Var v);
  const DenseMatrix& upstream(Var v) const { return nodes_[v.id].grad; }
  bool needs(Var v) const { return nodes_[v.id].requires_grad; }
  void check_valid(Var v, const char* op) const;

  std::vector<Node> nodes_;
  std::size_t zero_norm_cosines_ = 0;
};

}  // namespace bdlab::grad
