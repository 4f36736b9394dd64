#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include "bdlab/graph.hpp"

namespace bdlab::graph {

DenseMatrix random_class_means(std::size_t num_classes, std::size_t dim, double scale,
                               std::uint64_t seed) {
  Rng rng(seed);
  DenseMatrix means(num_classes, dim);
  for (double& v : means.values()) v = rng.uniform(-scale, scale);
  return means;
}

Graph generate_synthetic(const SyntheticSpec& spec) {
  if (spec.n < 2) throw std::invalid_argument("generate_synthetic: need at least two nodes");
  if (spec.num_classes == 0) throw std::invalid_argument("generate_synthetic: need a class");
  if (!(spec.homophily >= 0.0 && spec.homophily <= 1.0)) {
    throw std::invalid_argument("generate_synthetic: homophily must lie in [0, 1]");
  }
  if (spec.num_classes == 1 && spec.homophily < 1.0) {
    throw std::invalid_argument("generate_synthetic: homophily below 1 is unreachable with one class");
  }
  if (!(spec.feature_bound > 0.0)) throw std::invalid_argument("generate_synthetic: feature bound must be positive");
  if (!(spec.noise_scale >= 0.0)) throw std::invalid_argument("generate_synthetic: negative noise scale");
  if (!(spec.avg_degree >= 1.0)) throw std::invalid_argument("generate_synthetic: avg_degree must be >= 1");
  if (spec.class_means.rows() != spec.num_classes || spec.class_means.cols() != spec.dim) {
    throw std::invalid_argument("generate_synthetic: class_means must be num_classes x dim");
  }

  Rng rng(spec.seed);
  const std::size_t n = spec.n;
  std::vector<int> labels(n);
  for (auto& y : labels) y = static_cast<int>(rng.below(spec.num_classes));

  DenseMatrix features(n, spec.dim);
  const double s = spec.feature_bound;
  for (std::size_t i = 0; i < n; ++i) {
    auto mu = spec.class_means.row(static_cast<std::size_t>(labels[i]));
    auto row = features.row(i);
    for (std::size_t j = 0; j < spec.dim; ++j) {
      const double noise = spec.noise_scale > 0.0 ? rng.uniform(-spec.noise_scale, spec.noise_scale) : 0.0;
      row[j] = std::clamp(mu[j] + noise, -s, s);
    }
  }

  // Rejection placement: uniform candidate pairs, same-label pairs accepted
  // with weight h and cross-label pairs with (1-h)/(C-1). Under balanced
  // labels the accepted same-label fraction is h in expectation.
  const double cross = spec.num_classes > 1 ? (1.0 - spec.homophily) / static_cast<double>(spec.num_classes - 1) : 0.0;
  const double top = std::max(spec.homophily, cross);
  const double accept_same = spec.homophily / top;
  const double accept_cross = cross / top;

  const auto target = static_cast<std::size_t>(std::llround(static_cast<double>(n) * spec.avg_degree / 2.0));
  const std::size_t max_pairs = n * (n - 1) / 2;
  if (target > max_pairs) throw std::invalid_argument("generate_synthetic: avg_degree too large for n");

  std::set<Edge> chosen;
  const std::size_t max_draws = 1000 * target + 100000;
  std::size_t draws = 0;
  while (chosen.size() < target) {
    if (++draws > max_draws) {
      throw std::invalid_argument("generate_synthetic: cannot place edges at the requested homophily");
    }
    const auto a = static_cast<NodeId>(rng.below(n));
    const auto b = static_cast<NodeId>(rng.below(n));
    if (a == b) continue;
    const double p = labels[a] == labels[b] ? accept_same : accept_cross;
    if (!rng.bernoulli(p)) continue;
    chosen.insert(Edge::canonical(a, b));
  }
  return Graph(spec.num_classes, std::move(features), std::move(labels),
               std::vector<Edge>(chosen.begin(), chosen.end()));
}

}  // namespace bdlab::graph
