#include <stdexcept>
#include <string>

#include "bdlab/graph.hpp"

namespace bdlab::graph {

std::vector<Edge> Trigger::internal_edges() const {
  std::vector<Edge> out;
  const std::size_t s = size();
  for (std::size_t a = 0; a < s; ++a)
    for (std::size_t b = a + 1; b < s; ++b)
      if (adjacency(a, b) != 0.0) out.push_back({static_cast<NodeId>(a), static_cast<NodeId>(b)});
  return out;
}

void Trigger::validate(std::size_t feature_dim) const {
  const std::size_t s = size();
  if (s == 0) throw std::invalid_argument("Trigger: empty trigger");
  if (features.cols() != feature_dim) {
    throw std::invalid_argument("Trigger: feature dimension " + std::to_string(features.cols()) +
                                " does not match graph dimension " + std::to_string(feature_dim));
  }
  if (adjacency.rows() != s || adjacency.cols() != s) throw std::invalid_argument("Trigger: adjacency shape");
  if (attach_index >= s) throw std::invalid_argument("Trigger: attach index out of range");
  for (std::size_t a = 0; a < s; ++a) {
    if (adjacency(a, a) != 0.0) throw std::invalid_argument("Trigger: nonzero adjacency diagonal");
    for (std::size_t b = 0; b < s; ++b) {
      const double v = adjacency(a, b);
      if (v != 0.0 && v != 1.0) throw std::invalid_argument("Trigger: adjacency is not binary");
      if (v != adjacency(b, a)) throw std::invalid_argument("Trigger: adjacency is not symmetric");
    }
  }
  if (!features.all_finite()) throw std::invalid_argument("Trigger: non-finite feature");
}

Trigger erdos_renyi_trigger(std::size_t size, double edge_prob, const FeatureSampler& features,
                            Rng& rng) {
  if (size == 0) throw std::invalid_argument("erdos_renyi_trigger: size must be >= 1");
  if (!(edge_prob >= 0.0 && edge_prob <= 1.0)) {
    throw std::invalid_argument("erdos_renyi_trigger: probability must lie in [0, 1]");
  }
  Trigger t;
  t.adjacency = DenseMatrix(size, size);
  for (std::size_t a = 0; a < size; ++a) {
    for (std::size_t b = a + 1; b < size; ++b) {
      if (rng.bernoulli(edge_prob)) t.adjacency(a, b) = t.adjacency(b, a) = 1.0;
    }
  }
  std::vector<double> first = features(rng);
  t.features = DenseMatrix(size, first.size());
  std::copy(first.begin(), first.end(), t.features.row(0).begin());
  for (std::size_t i = 1; i < size; ++i) {
    auto row = features(rng);
    if (row.size() != first.size()) throw std::invalid_argument("erdos_renyi_trigger: ragged sampler");
    std::copy(row.begin(), row.end(), t.features.row(i).begin());
  }
  t.attach_index = 0;
  return t;
}

Trigger erdos_renyi_trigger(std::size_t size, double edge_prob, const FeatureSampler& features,
                            std::uint64_t seed) {
  Rng rng(seed);
  return erdos_renyi_trigger(size, edge_prob, features, rng);
}

FeatureSampler row_sampler(const Graph& graph, std::vector<NodeId> pool) {
  if (pool.empty()) throw std::invalid_argument("row_sampler: empty pool");
  std::vector<std::size_t> rows(pool.begin(), pool.end());
  return [rows = gather_rows(graph.features(), rows)](Rng& rng) {
    auto row = rows.row(rng.below(rows.rows()));
    return std::vector<double>(row.begin(), row.end());
  };
}

}  // namespace bdlab::graph
