#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "bdlab/shield.hpp"

namespace bdlab::shield {

double theorem_bound(const TheoremInput& in) {
  if (!(in.deg >= 1.0)) throw std::invalid_argument("theorem_bound: deg must be >= 1");
  if (!(in.gamma >= 0.0 && in.gamma <= 1.0)) throw std::invalid_argument("theorem_bound: gamma must lie in [0, 1]");
  if (!(in.d >= 1.0)) throw std::invalid_argument("theorem_bound: d must be >= 1");
  if (!(in.feature_bound > 0.0)) throw std::invalid_argument("theorem_bound: S must be positive");
  if (!(in.mean_dist_sq >= 0.0)) throw std::invalid_argument("theorem_bound: mean distance must be >= 0");
  const double gap = 1.0 - in.gamma;
  const double exponent =
      in.deg * gap * gap * in.mean_dist_sq / (2.0 * in.d * in.feature_bound * in.feature_bound);
  return std::min(1.0, 2.0 * in.d * std::exp(-exponent));
}

namespace {

void sample_feature(const graph::SyntheticSpec& spec, int cls, Rng& rng, std::span<double> out) {
  auto mu = spec.class_means.row(static_cast<std::size_t>(cls));
  for (std::size_t j = 0; j < out.size(); ++j) {
    const double noise = spec.noise_scale > 0.0 ? rng.uniform(-spec.noise_scale, spec.noise_scale) : 0.0;
    out[j] = std::clamp(mu[j] + noise, -spec.feature_bound, spec.feature_bound);
  }
}

}  // namespace

TheoremTable theorem_harness(const graph::SyntheticSpec& spec, std::span<const double> gamma_grid,
                             const TheoremOptions& options) {
  const int yt = options.target_class;
  if (spec.num_classes < 2) throw std::invalid_argument("theorem_harness: need at least two classes");
  if (yt < 0 || static_cast<std::size_t>(yt) >= spec.num_classes) {
    throw std::invalid_argument("theorem_harness: target class out of range");
  }
  if (options.degree < 1 || options.trials < 1) throw std::invalid_argument("theorem_harness: degree and trials must be >= 1");

  const Graph g = graph::generate_synthetic(spec);
  const auto split = graph::inductive_split(g, 0.5, options.seed);
  auto hyper = options.hyper;
  hyper.seed = options.seed;
  const auto model = models::train_classifier(g, split.train_labeled, hyper);

  TheoremTable table;
  const auto mt = spec.class_means.row(static_cast<std::size_t>(yt));
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < spec.num_classes; ++c) {
    if (static_cast<int>(c) == yt) continue;
    const auto mc = spec.class_means.row(c);
    double dist = 0.0;
    for (std::size_t j = 0; j < spec.dim; ++j) dist += (mc[j] - mt[j]) * (mc[j] - mt[j]);
    if (dist < best) {
      best = dist;
      table.source_class = static_cast<int>(c);
    }
  }
  table.mean_dist_sq = best;

  {
    std::vector<NodeId> held;
    for (const auto* part : {&split.test_target, &split.test_clean}) {
      for (NodeId v : *part) {
        if (g.label(v) == table.source_class) held.push_back(v);
      }
    }
    if (!held.empty()) {
      const auto pred = models::predict_labels(models::classifier_logits(model, g), held);
      table.baseline_rate = static_cast<double>(std::count(pred.begin(), pred.end(), yt)) / static_cast<double>(held.size());
    }
  }

  std::vector<double> grid(gamma_grid.begin(), gamma_grid.end());
  std::sort(grid.begin(), grid.end());
  const std::size_t D = options.degree;
  Rng rng(options.seed + 7);
  for (double gamma : grid) {
    if (!(gamma >= 0.0 && gamma <= 1.0)) {
      table.notes.push_back("gamma " + std::to_string(gamma) + " outside [0, 1], skipped");
      continue;
    }
    const double want = gamma * static_cast<double>(D);
    const double rounded = std::round(want);
    if (std::abs(want - rounded) > 1e-9) {
      table.notes.push_back("gamma " + std::to_string(gamma) + " infeasible with degree " + std::to_string(D) +
                            ", skipped");
      continue;
    }
    const auto n_trigger = static_cast<std::size_t>(rounded);
    const std::size_t star = D + 1;
    DenseMatrix features(options.trials * star, spec.dim);
    std::vector<int> labels(options.trials * star);
    std::vector<graph::Edge> edges;
    std::vector<NodeId> hosts;
    for (std::size_t t = 0; t < options.trials; ++t) {
      const auto host = static_cast<NodeId>(t * star);
      hosts.push_back(host);
      labels[host] = table.source_class;
      sample_feature(spec, table.source_class, rng, features.row(host));
      for (std::size_t k = 0; k < D; ++k) {
        const auto leaf = static_cast<NodeId>(host + 1 + k);
        const int cls = k < n_trigger ? yt : table.source_class;
        labels[leaf] = cls;
        sample_feature(spec, cls, rng, features.row(leaf));
        edges.push_back({host, leaf});
      }
    }
    const Graph stars(spec.num_classes, std::move(features), std::move(labels), std::move(edges));
    const auto pred = models::predict_labels(models::classifier_logits(model, stars), hosts);
    TheoremRow row;
    row.gamma = gamma;
    row.trials = options.trials;
    row.empirical_rate = static_cast<double>(std::count(pred.begin(), pred.end(), yt)) / static_cast<double>(options.trials);
    row.bound = theorem_bound({static_cast<double>(D), gamma, static_cast<double>(spec.dim), spec.feature_bound,
                               table.mean_dist_sq});
    table.rows.push_back(row);
  }
  return table;
}

}  // namespace bdlab::shield
