#include "bdlab/tape.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "bdlab/common.hpp"

namespace bdlab::grad {

double activate(double x, Activation kind) {
  switch (kind) {
    case Activation::kRelu:
      return x > 0.0 ? x : 0.0;
    case Activation::kSoftplus:
      return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
  }
  return 0.0;
}

namespace {

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

void add_into(DenseMatrix& dst, const DenseMatrix& src) {
  auto d = dst.values();
  auto s = src.values();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
}

// a^T b without materializing the transpose.
DenseMatrix matmul_tn(const DenseMatrix& a, const DenseMatrix& b) {
  DenseMatrix out(a.cols(), b.cols());
  for (std::size_t k = 0; k < a.rows(); ++k) {
    auto arow = a.row(k);
    auto brow = b.row(k);
    for (std::size_t i = 0; i < a.cols(); ++i) {
      if (arow[i] != 0.0) axpy(arow[i], brow, out.row(i));
    }
  }
  return out;
}

// a b^T.
DenseMatrix matmul_nt(const DenseMatrix& a, const DenseMatrix& b) {
  DenseMatrix out(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto arow = a.row(i);
    for (std::size_t j = 0; j < b.rows(); ++j) out(i, j) = dot(arow, b.row(j));
  }
  return out;
}

void require_shape(bool ok, const char* op, const std::string& what) {
  if (!ok) throw std::invalid_argument(std::string(op) + ": " + what);
}

std::string dims(const DenseMatrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

}  // namespace

double activate_derivative(double x, Activation kind) {
  switch (kind) {
    case Activation::kRelu:
      return x > 0.0 ? 1.0 : 0.0;
    case Activation::kSoftplus:
      return sigmoid(x);
  }
  return 0.0;
}

const char* activation_name(Activation kind) {
  return kind == Activation::kRelu ? "relu" : "softplus";
}

Activation parse_activation(const std::string& name) {
  if (name == "relu") return Activation::kRelu;
  if (name == "softplus") return Activation::kSoftplus;
  throw std::invalid_argument("unknown activation '" + name + "'");
}

Var Tape::push(DenseMatrix value, bool requires_grad, const char* op) {
  if (!value.all_finite()) throw NumericError(std::string("non-finite value produced by ") + op);
  nodes_.push_back(Node{std::move(value), DenseMatrix(), requires_grad, nullptr});
  return Var{nodes_.size() - 1};
}

void Tape::check_valid(Var v, const char* op) const {
  if (!v.valid() || v.id >= nodes_.size()) throw std::invalid_argument(std::string(op) + ": invalid variable");
}

DenseMatrix& Tape::grad_ref(Var v) {
  auto& node = nodes_[v.id];
  if (node.grad.empty() && !node.value.empty()) node.grad = DenseMatrix(node.value.rows(), node.value.cols());
  return node.grad;
}

DenseMatrix Tape::grad(Var v) const {
  const auto& node = nodes_.at(v.id);
  if (node.grad.empty()) return DenseMatrix(node.value.rows(), node.value.cols());
  return node.grad;
}

double Tape::scalar(Var v) const {
  const auto& m = value(v);
  if (m.rows() != 1 || m.cols() != 1) throw std::invalid_argument("scalar: value is " + dims(m));
  return m(0, 0);
}

Var Tape::constant(DenseMatrix value) { return push(std::move(value), false, "constant"); }

Var Tape::variable(DenseMatrix value) { return push(std::move(value), true, "variable"); }

Var Tape::matmul(Var a, Var b) {
  check_valid(a, "matmul");
  check_valid(b, "matmul");
  require_shape(value(a).cols() == value(b).rows(), "matmul",
                "shape mismatch " + dims(value(a)) + " * " + dims(value(b)));
  Var out = push(bdlab::matmul(value(a), value(b)), needs(a) || needs(b), "matmul");
  if (needs(out)) {
    nodes_[out.id].backprop = [this, a, b, out] {
      const auto& g = upstream(out);
      if (needs(a)) add_into(grad_ref(a), matmul_nt(g, value(b)));
      if (needs(b)) add_into(grad_ref(b), matmul_tn(value(a), g));
    };
  }
  return out;
}

Var Tape::transpose(Var a) {
  check_valid(a, "transpose");
  Var out = push(bdlab::transpose(value(a)), needs(a), "transpose");
  if (needs(out)) {
    nodes_[out.id].backprop = [this, a, out] { add_into(grad_ref(a), bdlab::transpose(upstream(out))); };
  }
  return out;
}

Var Tape::spmm(const std::shared_ptr<const graph::SparseOperator>& op, Var x) {
  check_valid(x, "spmm");
  require_shape(op && op->n == value(x).rows(), "spmm", "operator size does not match rows of " + dims(value(x)));
  Var out = push(op->apply(value(x)), needs(x), "spmm");
  if (needs(out)) {
    nodes_[out.id].backprop = [this, op, x, out] {
      const auto& g = upstream(out);
      auto& gx = grad_ref(x);
      for (std::size_t r = 0; r < op->n; ++r) {
        for (std::size_t e = op->row_ptr[r]; e < op->row_ptr[r + 1]; ++e) {
          axpy(op->values[e], g.row(r), gx.row(op->cols[e]));
        }
      }
    };
  }
  return out;
}

Var Tape::spmm(const SparseVar& a, Var x) {
  check_valid(x, "spmm");
  check_valid(a.values, "spmm");
  const auto& op = *a.pattern;
  const auto& w = value(a.values);
  require_shape(op.n == value(x).rows(), "spmm", "operator size does not match rows of " + dims(value(x)));
  require_shape(w.rows() == op.nnz() && w.cols() == 1, "spmm", "value column does not match pattern");
  const auto& xv = value(x);
  DenseMatrix y(op.n, xv.cols());
  for (std::size_t r = 0; r < op.n; ++r) {
    for (std::size_t e = op.row_ptr[r]; e < op.row_ptr[r + 1]; ++e) axpy(w(e, 0), xv.row(op.cols[e]), y.row(r));
  }
  Var out = push(std::move(y), needs(x) || needs(a.values), "spmm");
  if (needs(out)) {
    nodes_[out.id].backprop = [this, pattern = a.pattern, vals = a.values, x, out] {
      const auto& g = upstream(out);
      const auto& w = value(vals);
      const auto& xv = value(x);
      const bool gx_needed = needs(x);
      const bool gw_needed = needs(vals);
      for (std::size_t r = 0; r < pattern->n; ++r) {
        for (std::size_t e = pattern->row_ptr[r]; e < pattern->row_ptr[r + 1]; ++e) {
          const auto c = pattern->cols[e];
          if (gx_needed) axpy(w(e, 0), g.row(r), grad_ref(x).row(c));
          if (gw_needed) grad_ref(vals)(e, 0) += dot(g.row(r), xv.row(c));
        }
      }
    };
  }
  return out;
}

SparseVar Tape::propagation(const std::shared_ptr<const EdgeLayout>& layout, Aggregation kind,
                            double self_weight, Var weights) {
  const auto& L = *layout;
  const std::size_t n = L.n;
  require_shape(L.weight_slot.size() == L.edges.size(), "propagation", "weight_slot size");
  require_shape(L.extra_degree.empty() || L.extra_degree.size() == n, "propagation", "extra_degree size");
  if (L.num_slots > 0) {
    check_valid(weights, "propagation");
    require_shape(value(weights).rows() == L.num_slots && value(weights).cols() == 1, "propagation",
                  "weights must be num_slots x 1");
  }

  // Pattern: every listed edge in both directions plus the diagonal.
  std::vector<std::vector<NodeId>> adj(n);
  for (const auto& e : L.edges) {
    require_shape(e.u < n && e.v < n && e.u != e.v, "propagation", "bad edge");
    adj[e.u].push_back(e.v);
    adj[e.v].push_back(e.u);
  }
  auto pattern = std::make_shared<graph::SparseOperator>();
  pattern->n = n;
  pattern->self_loops = true;
  pattern->row_ptr.assign(1, 0);
  for (std::size_t i = 0; i < n; ++i) {
    adj[i].push_back(static_cast<NodeId>(i));
    std::sort(adj[i].begin(), adj[i].end());
    if (std::adjacent_find(adj[i].begin(), adj[i].end()) != adj[i].end()) {
      throw std::invalid_argument("propagation: duplicate edge");
    }
    pattern->cols.insert(pattern->cols.end(), adj[i].begin(), adj[i].end());
    pattern->row_ptr.push_back(pattern->cols.size());
  }
  pattern->values.assign(pattern->cols.size(), 0.0);

  struct Positions {
    std::vector<std::size_t> uv, vu, diag;
  };
  auto pos = std::make_shared<Positions>();
  for (const auto& e : L.edges) {
    pos->uv.push_back(static_cast<std::size_t>(pattern->find(e.u, e.v)));
    pos->vu.push_back(static_cast<std::size_t>(pattern->find(e.v, e.u)));
  }
  for (std::size_t i = 0; i < n; ++i) {
    pos->diag.push_back(static_cast<std::size_t>(pattern->find(static_cast<NodeId>(i), static_cast<NodeId>(i))));
  }

  auto edge_weight = [&](std::size_t k) {
    const auto slot = L.weight_slot[k];
    return slot < 0 ? 1.0 : value(weights)(static_cast<std::size_t>(slot), 0);
  };

  DenseMatrix vals(pattern->nnz(), 1);
  auto degree = std::make_shared<std::vector<double>>(n, self_weight);
  if (kind == Aggregation::kSum) {
    for (std::size_t k = 0; k < L.edges.size(); ++k) {
      vals(pos->uv[k], 0) = vals(pos->vu[k], 0) = edge_weight(k);
    }
    for (std::size_t i = 0; i < n; ++i) vals(pos->diag[i], 0) = self_weight;
  } else {
    auto& deg = *degree;
    if (!L.extra_degree.empty()) {
      for (std::size_t i = 0; i < n; ++i) deg[i] += L.extra_degree[i];
    }
    for (std::size_t k = 0; k < L.edges.size(); ++k) {
      const double w = edge_weight(k);
      deg[L.edges[k].u] += w;
      deg[L.edges[k].v] += w;
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (deg[i] < 0.0) throw NumericError("propagation: negative degree");
    }
    auto rs = [&](std::size_t i) { return deg[i] > 0.0 ? 1.0 / std::sqrt(deg[i]) : 0.0; };
    for (std::size_t k = 0; k < L.edges.size(); ++k) {
      const auto& e = L.edges[k];
      vals(pos->uv[k], 0) = vals(pos->vu[k], 0) = edge_weight(k) * rs(e.u) * rs(e.v);
    }
    for (std::size_t i = 0; i < n; ++i) vals(pos->diag[i], 0) = deg[i] > 0.0 ? self_weight / deg[i] : 0.0;
  }
  std::copy(vals.values().begin(), vals.values().end(), pattern->values.begin());

  const bool grad_flows = L.num_slots > 0 && needs(weights);
  Var out = push(std::move(vals), grad_flows, "propagation");
  if (grad_flows) {
    nodes_[out.id].backprop = [this, layout, kind, self_weight, weights, out, pos, degree] {
      const auto& L = *layout;
      const auto& g = upstream(out);
      auto& gw = grad_ref(weights);
      if (kind == Aggregation::kSum) {
        for (std::size_t k = 0; k < L.edges.size(); ++k) {
          if (L.weight_slot[k] < 0) continue;
          gw(static_cast<std::size_t>(L.weight_slot[k]), 0) += g(pos->uv[k], 0) + g(pos->vu[k], 0);
        }
        return;
      }
      const auto& deg = *degree;
      const auto& v = value(out);
      // dL/ddeg_i: every entry in row i and column i scales with deg_i^{-1/2},
      // the diagonal with deg_i^{-1}.
      std::vector<double> gdeg(L.n, 0.0);
      for (std::size_t k = 0; k < L.edges.size(); ++k) {
        const auto& e = L.edges[k];
        const double contrib = g(pos->uv[k], 0) * v(pos->uv[k], 0) + g(pos->vu[k], 0) * v(pos->vu[k], 0);
        if (deg[e.u] > 0.0) gdeg[e.u] -= 0.5 * contrib / deg[e.u];
        if (deg[e.v] > 0.0) gdeg[e.v] -= 0.5 * contrib / deg[e.v];
      }
      for (std::size_t i = 0; i < L.n; ++i) {
        if (deg[i] > 0.0) gdeg[i] -= g(pos->diag[i], 0) * self_weight / (deg[i] * deg[i]);
      }
      for (std::size_t k = 0; k < L.edges.size(); ++k) {
        if (L.weight_slot[k] < 0) continue;
        const auto& e = L.edges[k];
        const double ru = deg[e.u] > 0.0 ? 1.0 / std::sqrt(deg[e.u]) : 0.0;
        const double rv = deg[e.v] > 0.0 ? 1.0 / std::sqrt(deg[e.v]) : 0.0;
        gw(static_cast<std::size_t>(L.weight_slot[k]), 0) +=
            (g(pos->uv[k], 0) + g(pos->vu[k], 0)) * ru * rv + gdeg[e.u] + gdeg[e.v];
      }
    };
  }
  return SparseVar{std::move(pattern), out};
}

Var Tape::add(Var a, Var b) {
  check_valid(a, "add");
  check_valid(b, "add");
  require_shape(value(a).same_shape(value(b)), "add", dims(value(a)) + " vs " + dims(value(b)));
  DenseMatrix y = value(a);
  add_into(y, value(b));
  Var out = push(std::move(y), needs(a) || needs(b), "add");
  if (needs(out)) {
    nodes_[out.id].backprop = [this, a, b, out] {
      if (needs(a)) add_into(grad_ref(a), upstream(out));
      if (needs(b)) add_into(grad_ref(b), upstream(out));
    };
  }
  return out;
}

Var Tape::sub(Var a, Var b) { return add(a, scale(b, -1.0)); }

Var Tape::hadamard(Var a, Var b) {
  check_valid(a, "hadamard");
  check_valid(b, "hadamard");
  require_shape(value(a).same_shape(value(b)), "hadamard", dims(value(a)) + " vs " + dims(value(b)));
  DenseMatrix y = value(a);
  auto yv = y.values();
  auto bv = value(b).values();
  for (std::size_t i = 0; i < yv.size(); ++i) yv[i] *= bv[i];
  Var out = push(std::move(y), needs(a) || needs(b), "hadamard");
  if (needs(out)) {
    nodes_[out.id].backprop = [this, a, b, out] {
      auto g = upstream(out).values();
      if (needs(a)) {
        auto ga = grad_ref(a).values();
        auto bv = value(b).values();
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
      }
      if (needs(b)) {
        auto gb = grad_ref(b).values();
        auto av = value(a).values();
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
      }
    };
  }
  return out;
}

Var Tape::scale(Var a, double s) {
  check_valid(a, "scale");
  DenseMatrix y = value(a);
  for (double& v : y.values()) v *= s;
  Var out = push(std::move(y), needs(a), "scale");
  if (needs(out)) {
    nodes_[out.id].backprop = [this, a, s, out] { axpy(s, upstream(out).values(), grad_ref(a).values()); };
  }
  return out;
}

Var Tape::add_scalar(Var a, double s) {
  check_valid(a, "add_scalar");
  DenseMatrix y = value(a);
  for (double& v : y.values()) v += s;
  Var out = push(std::move(y), needs(a), "add_scalar");
  if (needs(out)) {
    nodes_[out.id].backprop = [this, a, out] { add_into(grad_ref(a), upstream(out)); };
  }
  return out;
}

Var Tape::add_row(Var m, Var row) {
  check_valid(m, "add_row");
  check_valid(row, "add_row");
  require_shape(value(row).rows() == 1 && value(row).cols() == value(m).cols(), "add_row",
                dims(value(m)) + " + " + dims(value(row)));
  DenseMatrix y = value(m);
  for (std::size_t i = 0; i < y.rows(); ++i) axpy(1.0, value(row).row(0), y.row(i));
  Var out = push(std::move(y), needs(m) || needs(row), "add_row");
  if (needs(out)) {
    nodes_[out.id].backprop = [this, m, row, out] {
      const auto& g = upstream(out);
      if (needs(m)) add_into(grad_ref(m), g);
      if (needs(row)) {
        auto& gr = grad_ref(row);
        for (std::size_t i = 0; i < g.rows(); ++i) axpy(1.0, g.row(i), gr.row(0));
      }
    };
  }
  return out;
}

Var Tape::scale_rows(Var m, Var col) {
  check_valid(m, "scale_rows");
  check_valid(col, "scale_rows");
  require_shape(value(col).cols() == 1 && value(col).rows() == value(m).rows(), "scale_rows",
                dims(value(m)) + " by " + dims(value(col)));
  DenseMatrix y = value(m);
  for (std::size_t i = 0; i < y.rows(); ++i) {
    const double c = value(col)(i, 0);
    for (double& v : y.row(i)) v *= c;
  }
  Var out = push(std::move(y), needs(m) || needs(col), "scale_rows");
  if (needs(out)) {
    nodes_[out.id].backprop = [this, m, col, out] {
      const auto& g = upstream(out);
      for (std::size_t i = 0; i < g.rows(); ++i) {
        if (needs(m)) axpy(value(col)(i, 0), g.row(i), grad_ref(m).row(i));
        if (needs(col)) grad_ref(col)(i, 0) += dot(g.row(i), value(m).row(i));
      }
    };
  }
  return out;
}

Var Tape::scale_cols(Var m, Var row) {
  check_valid(m, "scale_cols");
  check_valid(row, "scale_cols");
  require_shape(value(row).rows() == 1 && value(row).cols() == value(m).cols(), "scale_cols",
                dims(value(m)) + " by " + dims(value(row)));
  DenseMatrix y = value(m);
  const auto r = value(row).row(0);
  for (std::size_t i = 0; i < y.rows(); ++i) {
    auto yr = y.row(i);
    for (std::size_t j = 0; j < yr.size(); ++j) yr[j] *= r[j];
  }
  Var out = push(std::move(y), needs(m) || needs(row), "scale_cols");
  if (needs(out)) {
    nodes_[out.id].backprop = [this, m, row, out] {
      const auto& g = upstream(out);
      const auto r = value(row).row(0);
      for (std::size_t i = 0; i < g.rows(); ++i) {
        auto gi = g.row(i);
        if (needs(m)) {
          auto gm = grad_ref(m).row(i);
          for (std::size_t j = 0; j < gi.size(); ++j) gm[j] += gi[j] * r[j];
        }
        if (needs(row)) {
          auto gr = grad_ref(row).row(0);
          auto mi = value(m).row(i);
          for (std::size_t j = 0; j < gi.size(); ++j) gr[j] += gi[j] * mi[j];
        }
      }
    };
  }
  return out;
}

Var Tape::activation(Var a, Activation kind) {
  check_valid(a, "activation");
  DenseMatrix y = value(a);
  for (double& v : y.values()) v = activate(v, kind);
  Var out = push(std::move(y), needs(a), "activation");
  if (needs(out)) {
    nodes_[out.id].backprop = [this, a, kind, out] {
      auto g = upstream(out).values();
      auto x = value(a).values();
      auto ga = grad_ref(a).values();
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * activate_derivative(x[i], kind);
    };
  }
  return out;
}

Var Tape::activation_derivative(Var a, Activation kind) {
  check_valid(a, "activation_derivative");
  DenseMatrix y = value(a);
  for (double& v : y.values()) v = activate_derivative(v, kind);
  // The ReLU step has zero derivative almost everywhere.
  const bool flows = needs(a) && kind == Activation::kSoftplus;
  Var out = push(std::move(y), flows, "activation_derivative");
  if (flows) {
    nodes_[out.id].backprop = [this, a, out] {
      auto g = upstream(out).values();
      auto x = value(a).values();
      auto ga = grad_ref(a).values();
      for (std::size_t i = 0; i < g.size(); ++i) {
        const double s = sigmoid(x[i]);
        ga[i] += g[i] * s * (1.0 - s);
      }
    };
  }
  return out;
}

Var Tape::row_softmax(Var a) {
  check_valid(a, "row_softmax");
  DenseMatrix y = value(a);
  for (std::size_t i = 0; i < y.rows(); ++i) {
    auto r = y.row(i);
    const double mx = *std::max_element(r.begin(), r.end());
    double z = 0.0;
    for (double& v : r) z += (v = std::exp(v - mx));
    for (double& v : r) v /= z;
  }
  Var out = push(std::move(y), needs(a), "row_softmax");
  if (needs(out)) {
    nodes_[out.id].backprop = [this, a, out] {
      const auto& g = upstream(out);
      const auto& p = value(out);
      auto& ga = grad_ref(a);
      for (std::size_t i = 0; i < p.rows(); ++i) {
        const double inner = dot(g.row(i), p.row(i));
        auto pi = p.row(i);
        auto gi = g.row(i);
        auto gai = ga.row(i);
        for (std::size_t j = 0; j < pi.size(); ++j) gai[j] += pi[j] * (gi[j] - inner);
      }
    };
  }
  return out;
}

Var Tape::cross_entropy(Var logits, std::span<const std::size_t> rows, std::span<const int> labels) {
  check_valid(logits, "cross_entropy");
  require_shape(rows.size() == labels.size(), "cross_entropy", "rows and labels differ in length");
  const auto& z = value(logits);
  DenseMatrix probs(rows.size(), z.cols());
  double loss = 0.0;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    require_shape(rows[k] < z.rows(), "cross_entropy", "row out of range");
    require_shape(labels[k] >= 0 && static_cast<std::size_t>(labels[k]) < z.cols(), "cross_entropy",
                  "label out of range");
    auto r = z.row(rows[k]);
    const double mx = *std::max_element(r.begin(), r.end());
    double sum = 0.0;
    for (std::size_t j = 0; j < r.size(); ++j) sum += (probs(k, j) = std::exp(r[j] - mx));
    for (std::size_t j = 0; j < r.size(); ++j) probs(k, j) /= sum;
    loss += mx + std::log(sum) - r[static_cast<std::size_t>(labels[k])];
  }
  Var out = push(DenseMatrix(1, 1, loss), needs(logits), "cross_entropy");
  if (needs(out)) {
    nodes_[out.id].backprop = [this, logits, out, probs = std::move(probs),
                               rows = std::vector<std::size_t>(rows.begin(), rows.end()),
                               labels = std::vector<int>(labels.begin(), labels.end())] {
      const double g = upstream(out)(0, 0);
      auto& gz = grad_ref(logits);
      for (std::size_t k = 0; k < rows.size(); ++k) {
        auto gr = gz.row(rows[k]);
        for (std::size_t j = 0; j < gr.size(); ++j) gr[j] += g * probs(k, j);
        gr[static_cast<std::size_t>(labels[k])] -= g;
      }
    };
  }
  return out;
}

Var Tape::gather_rows(Var a, std::vector<std::ptrdiff_t> rows) {
  check_valid(a, "gather_rows");
  const auto& x = value(a);
  DenseMatrix y(rows.size(), x.cols());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    if (rows[k] < 0) continue;
    require_shape(static_cast<std::size_t>(rows[k]) < x.rows(), "gather_rows", "row out of range");
    auto src = x.row(static_cast<std::size_t>(rows[k]));
    std::copy(src.begin(), src.end(), y.row(k).begin());
  }
  Var out = push(std::move(y), needs(a), "gather_rows");
  if (needs(out)) {
    nodes_[out.id].backprop = [this, a, out, rows = std::move(rows)] {
      const auto& g = upstream(out);
      auto& ga = grad_ref(a);
      for (std::size_t k = 0; k < rows.size(); ++k) {
        if (rows[k] >= 0) axpy(1.0, g.row(k), ga.row(static_cast<std::size_t>(rows[k])));
      }
    };
  }
  return out;
}

Var Tape::concat_rows(std::span<const Var> parts) {
  require_shape(!parts.empty(), "concat_rows", "no parts");
  std::size_t rows = 0;
  const std::size_t cols = value(parts[0]).cols();
  bool flows = false;
  for (Var p : parts) {
    check_valid(p, "concat_rows");
    require_shape(value(p).cols() == cols, "concat_rows", "column mismatch");
    rows += value(p).rows();
    flows = flows || needs(p);
  }
  DenseMatrix y(rows, cols);
  std::size_t offset = 0;
  for (Var p : parts) {
    auto src = value(p).values();
    std::copy(src.begin(), src.end(), y.values().begin() + static_cast<std::ptrdiff_t>(offset * cols));
    offset += value(p).rows();
  }
  Var out = push(std::move(y), flows, "concat_rows");
  if (flows) {
    nodes_[out.id].backprop = [this, out, parts = std::vector<Var>(parts.begin(), parts.end())] {
      const auto g = upstream(out).values();
      std::size_t offset = 0;
      for (Var p : parts) {
        const std::size_t count = value(p).size();
        if (needs(p)) axpy(1.0, g.subspan(offset, count), grad_ref(p).values());
        offset += count;
      }
    };
  }
  return out;
}

Var Tape::slice_cols(Var a, std::size_t start, std::size_t count) {
  check_valid(a, "slice_cols");
  const auto& x = value(a);
  require_shape(start + count <= x.cols(), "slice_cols", "range exceeds " + dims(x));
  DenseMatrix y(x.rows(), count);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    auto src = x.row(i).subspan(start, count);
    std::copy(src.begin(), src.end(), y.row(i).begin());
  }
  Var out = push(std::move(y), needs(a), "slice_cols");
  if (needs(out)) {
    nodes_[out.id].backprop = [this, a, out, start, count] {
      const auto& g = upstream(out);
      auto& ga = grad_ref(a);
      for (std::size_t i = 0; i < g.rows(); ++i) axpy(1.0, g.row(i), ga.row(i).subspan(start, count));
    };
  }
  return out;
}

Var Tape::reshape(Var a, std::size_t rows, std::size_t cols) {
  check_valid(a, "reshape");
  require_shape(rows * cols == value(a).size(), "reshape", dims(value(a)) + " cannot become " +
                                                               std::to_string(rows) + "x" + std::to_string(cols));
  auto src = value(a).values();
  Var out = push(DenseMatrix(rows, cols, std::vector<double>(src.begin(), src.end())), needs(a), "reshape");
  if (needs(out)) {
    nodes_[out.id].backprop = [this, a, out] { axpy(1.0, upstream(out).values(), grad_ref(a).values()); };
  }
  return out;
}

Var Tape::binarize_ste(Var a) {
  check_valid(a, "binarize_ste");
  DenseMatrix y = value(a);
  for (double& v : y.values()) v = v > 0.0 ? 1.0 : 0.0;
  Var out = push(std::move(y), needs(a), "binarize_ste");
  if (needs(out)) {
    nodes_[out.id].backprop = [this, a, out] { add_into(grad_ref(a), upstream(out)); };
  }
  return out;
}

Var Tape::row_norms(Var a) {
  check_valid(a, "row_norms");
  const auto& x = value(a);
  DenseMatrix y(x.rows(), 1);
  for (std::size_t i = 0; i < x.rows(); ++i) y(i, 0) = bdlab::l2_norm(x.row(i));
  Var out = push(std::move(y), needs(a), "row_norms");
  if (needs(out)) {
    nodes_[out.id].backprop = [this, a, out] {
      const auto& g = upstream(out);
      const auto& norms = value(out);
      auto& ga = grad_ref(a);
      for (std::size_t i = 0; i < norms.rows(); ++i) {
        if (norms(i, 0) > 0.0) axpy(g(i, 0) / norms(i, 0), value(a).row(i), ga.row(i));
      }
    };
  }
  return out;
}

Var Tape::cosine_pairs(Var x, std::vector<std::pair<std::size_t, std::size_t>> pairs) {
  check_valid(x, "cosine_pairs");
  const auto& xv = value(x);
  DenseMatrix y(pairs.size(), 1);
  std::vector<char> degenerate(pairs.size(), 0);
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const auto [i, j] = pairs[k];
    require_shape(i < xv.rows() && j < xv.rows(), "cosine_pairs", "row out of range");
    const double ni = bdlab::l2_norm(xv.row(i));
    const double nj = bdlab::l2_norm(xv.row(j));
    if (ni == 0.0 || nj == 0.0) {
      degenerate[k] = 1;
      ++zero_norm_cosines_;
      continue;
    }
    y(k, 0) = dot(xv.row(i), xv.row(j)) / (ni * nj);
  }
  Var out = push(std::move(y), needs(x), "cosine_pairs");
  if (needs(out)) {
    nodes_[out.id].backprop = [this, x, out, pairs = std::move(pairs), degenerate = std::move(degenerate)] {
      const auto& g = upstream(out);
      const auto& xv = value(x);
      const auto& c = value(out);
      auto& gx = grad_ref(x);
      for (std::size_t k = 0; k < pairs.size(); ++k) {
        if (degenerate[k] || g(k, 0) == 0.0) continue;
        const auto [i, j] = pairs[k];
        const double ni = bdlab::l2_norm(xv.row(i));
        const double nj = bdlab::l2_norm(xv.row(j));
        const double gk = g(k, 0);
        // d cos / d x_i = x_j / (|x_i||x_j|) - cos * x_i / |x_i|^2
        axpy(gk / (ni * nj), xv.row(j), gx.row(i));
        axpy(-gk * c(k, 0) / (ni * ni), xv.row(i), gx.row(i));
        axpy(gk / (ni * nj), xv.row(i), gx.row(j));
        axpy(-gk * c(k, 0) / (nj * nj), xv.row(j), gx.row(j));
      }
    };
  }
  return out;
}

Var Tape::exp(Var a) {
  check_valid(a, "exp");
  DenseMatrix y = value(a);
  for (double& v : y.values()) v = std::exp(v);
  Var out = push(std::move(y), needs(a), "exp");
  if (needs(out)) {
    nodes_[out.id].backprop = [this, a, out] {
      auto g = upstream(out).values();
      auto y = value(out).values();
      auto ga = grad_ref(a).values();
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * y[i];
    };
  }
  return out;
}

Var Tape::hinge(Var a) {
  check_valid(a, "hinge");
  DenseMatrix y = value(a);
  for (double& v : y.values()) v = std::max(v, 0.0);
  Var out = push(std::move(y), needs(a), "hinge");
  if (needs(out)) {
    nodes_[out.id].backprop = [this, a, out] {
      auto g = upstream(out).values();
      auto x = value(a).values();
      auto ga = grad_ref(a).values();
      for (std::size_t i = 0; i < g.size(); ++i) {
        if (x[i] > 0.0) ga[i] += g[i];
      }
    };
  }
  return out;
}

Var Tape::sum(Var a) {
  check_valid(a, "sum");
  double s = 0.0;
  for (double v : value(a).values()) s += v;
  Var out = push(DenseMatrix(1, 1, s), needs(a), "sum");
  if (needs(out)) {
    nodes_[out.id].backprop = [this, a, out] {
      const double g = upstream(out)(0, 0);
      for (double& v : grad_ref(a).values()) v += g;
    };
  }
  return out;
}

Var Tape::l2_norm(Var a) {
  check_valid(a, "l2_norm");
  const double norm = bdlab::l2_norm(value(a).values());
  Var out = push(DenseMatrix(1, 1, norm), needs(a), "l2_norm");
  if (needs(out)) {
    nodes_[out.id].backprop = [this, a, out] {
      const double n = value(out)(0, 0);
      if (n > 0.0) axpy(upstream(out)(0, 0) / n, value(a).values(), grad_ref(a).values());
    };
  }
  return out;
}

Var Tape::segment_sum(Var col, std::vector<SegmentTerm> terms, std::size_t segments) {
  check_valid(col, "segment_sum");
  const auto& c = value(col);
  require_shape(c.cols() == 1, "segment_sum", "input must be a column");
  DenseMatrix y(segments, 1);
  for (const auto& t : terms) {
    require_shape(t.segment < segments && t.row < c.rows(), "segment_sum", "term out of range");
    y(t.segment, 0) += t.coef * c(t.row, 0);
  }
  Var out = push(std::move(y), needs(col), "segment_sum");
  if (needs(out)) {
    nodes_[out.id].backprop = [this, col, out, terms = std::move(terms)] {
      const auto& g = upstream(out);
      auto& gc = grad_ref(col);
      for (const auto& t : terms) gc(t.row, 0) += t.coef * g(t.segment, 0);
    };
  }
  return out;
}

void Tape::backward(Var root) {
  check_valid(root, "backward");
  const auto& r = value(root);
  if (r.rows() != 1 || r.cols() != 1) throw std::invalid_argument("backward: root must be 1x1, got " + dims(r));
  for (auto& node : nodes_) node.grad = DenseMatrix();
  if (!needs(root)) return;
  grad_ref(root)(0, 0) = 1.0;
  for (std::size_t i = root.id + 1; i-- > 0;) {
    auto& node = nodes_[i];
    if (node.backprop && !node.grad.empty()) {
      node.backprop();
      if (!node.grad.all_finite()) throw NumericError("non-finite gradient at node " + std::to_string(i));
    }
  }
}

}  // namespace bdlab::grad
