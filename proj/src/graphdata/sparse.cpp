#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "bdlab/graph.hpp"

namespace bdlab::graph {

namespace {

struct Entry {
  NodeId r;
  NodeId c;
  double v;
};

SparseOperator from_entries(std::size_t n, bool self_loops, std::vector<Entry> entries) {
  std::sort(entries.begin(), entries.end(),
            [](const Entry& a, const Entry& b) { return a.r != b.r ? a.r < b.r : a.c < b.c; });
  SparseOperator op;
  op.n = n;
  op.self_loops = self_loops;
  op.row_ptr.assign(n + 1, 0);
  op.cols.reserve(entries.size());
  op.values.reserve(entries.size());
  for (const auto& e : entries) {
    ++op.row_ptr[e.r + 1];
    op.cols.push_back(e.c);
    op.values.push_back(e.v);
  }
  for (std::size_t i = 0; i < n; ++i) op.row_ptr[i + 1] += op.row_ptr[i];
  return op;
}

}  // namespace

std::ptrdiff_t SparseOperator::find(NodeId r, NodeId c) const {
  auto first = cols.begin() + static_cast<std::ptrdiff_t>(row_ptr[r]);
  auto last = cols.begin() + static_cast<std::ptrdiff_t>(row_ptr[r + 1]);
  auto it = std::lower_bound(first, last, c);
  if (it == last || *it != c) return -1;
  return it - cols.begin();
}

DenseMatrix SparseOperator::apply(const DenseMatrix& x) const {
  if (x.rows() != n) throw std::invalid_argument("SparseOperator::apply: row count mismatch");
  DenseMatrix out(n, x.cols());
  for (std::size_t i = 0; i < n; ++i) {
    auto out_row = out.row(i);
    for (std::size_t k = row_ptr[i]; k < row_ptr[i + 1]; ++k) {
      const double w = values[k];
      auto src = x.row(cols[k]);
      for (std::size_t j = 0; j < x.cols(); ++j) out_row[j] += w * src[j];
    }
  }
  return out;
}

DenseMatrix SparseOperator::to_dense() const {
  DenseMatrix out(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = row_ptr[i]; k < row_ptr[i + 1]; ++k) out(i, cols[k]) = values[k];
  return out;
}

SparseOperator normalized_adjacency(std::size_t n, std::span<const Edge> edges,
                                    std::span<const double> extra_degree, bool add_self_loops) {
  if (!extra_degree.empty() && extra_degree.size() != n) {
    throw std::invalid_argument("normalized_adjacency: extra_degree size mismatch");
  }
  std::vector<double> deg(n, add_self_loops ? 1.0 : 0.0);
  for (std::size_t i = 0; i < extra_degree.size(); ++i) deg[i] += extra_degree[i];
  for (const auto& e : edges) {
    deg[e.u] += 1.0;
    deg[e.v] += 1.0;
  }
  std::vector<double> inv_sqrt(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) inv_sqrt[i] = deg[i] > 0.0 ? 1.0 / std::sqrt(deg[i]) : 0.0;

  std::vector<Entry> entries;
  entries.reserve(2 * edges.size() + (add_self_loops ? n : 0));
  for (const auto& e : edges) {
    const double w = inv_sqrt[e.u] * inv_sqrt[e.v];
    entries.push_back({e.u, e.v, w});
    entries.push_back({e.v, e.u, w});
  }
  if (add_self_loops) {
    for (std::size_t i = 0; i < n; ++i) {
      entries.push_back({static_cast<NodeId>(i), static_cast<NodeId>(i), inv_sqrt[i] * inv_sqrt[i]});
    }
  }
  return from_entries(n, add_self_loops, std::move(entries));
}

SparseOperator normalized_adjacency(const Graph& graph, bool add_self_loops) {
  return normalized_adjacency(graph.num_nodes(), graph.edges(), {}, add_self_loops);
}

SparseOperator sum_adjacency(std::size_t n, std::span<const Edge> edges, double self_weight) {
  std::vector<Entry> entries;
  entries.reserve(2 * edges.size() + n);
  for (const auto& e : edges) {
    entries.push_back({e.u, e.v, 1.0});
    entries.push_back({e.v, e.u, 1.0});
  }
  for (std::size_t i = 0; i < n; ++i) {
    entries.push_back({static_cast<NodeId>(i), static_cast<NodeId>(i), self_weight});
  }
  return from_entries(n, true, std::move(entries));
}

}  // namespace bdlab::graph
