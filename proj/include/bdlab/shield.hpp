#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "bdlab/attack.hpp"

namespace bdlab::shield {

using attack::Provenance;
using attack::TriggerSource;
using graph::Graph;
using models::ClassifierParams;

/// Fraction of `test_target` nodes whose label differs from y_t that are
/// predicted y_t after attaching a trigger from `source`, one host at a time.
/// With `prune_threshold`, trigger edges whose endpoint cosine falls below it
/// are dropped (the base graph is expected to be pruned already).
double attack_success_rate(const ClassifierParams& target, const Graph& graph, const TriggerSource& source,
                           std::span<const NodeId> test_target, int target_class,
                           std::optional<double> prune_threshold = std::nullopt);

double clean_accuracy(const ClassifierParams& target, const Graph& graph, std::span<const NodeId> test_clean);

/// Fraction of trigger nodes among the k highest-ranked candidates, divided
/// by min(k, trigger count). Candidates are (node, score); ties rank the
/// lower id first.
double irt_fraction(std::vector<std::pair<NodeId, double>> candidates, const std::set<NodeId>& triggers,
                    std::size_t k);

/// Mean irt_fraction over provenance entries, ranking every node of the
/// host's 2-hop computational graph (host excluded) by saliency for y_t.
double important_rate_of_triggers(const ClassifierParams& target, const Graph& backdoored,
                                  std::span<const Provenance> provenance, int target_class, std::size_t k);

/// Removes every edge whose endpoint cosine similarity is below tau.
Graph cosine_prune(const Graph& graph, double tau);

/// Smallest threshold (on the observed cosine grid) that removes at most
/// `max_fraction` of the edges of `graph`.
double tune_prune_threshold(const Graph& graph, double max_fraction);

struct DegreePruneResult {
  Graph graph;
  double rtc = 1.0;
  std::size_t removed = 0;
};

/// The ceil(top_pct * n) highest-degree nodes (ties to lower id) each lose
/// their n_edges lowest-cosine incident edges. RTC is surviving trigger
/// edges over trigger edges before pruning, 1.0 when there are none.
DegreePruneResult degree_prune_rtc(const Graph& graph, std::span<const Provenance> provenance, double top_pct,
                                   std::size_t n_edges);

/// Natural-log entropy of scores normalized to a distribution; returns the
/// index of the dominant score when the entropy is below the threshold.
std::optional<std::size_t> gm_decision(std::span<const double> scores, double entropy_threshold);

/// Trains a victim on `labeled` and removes, for each labeled node whose
/// normalized neighbor saliency has low entropy, the edge to its dominant
/// neighbor.
Graph gradient_mask_defense(const Graph& graph, std::span<const NodeId> labeled, double entropy_threshold,
                            const models::TrainHyper& hyper);

struct TheoremInput {
  double deg = 1.0;
  double gamma = 0.0;
  double d = 1.0;
  double feature_bound = 1.0;
  double mean_dist_sq = 0.0;
};

double theorem_bound(const TheoremInput& in);

struct TheoremOptions {
  int target_class = 0;
  std::size_t degree = 50;
  std::size_t trials = 50;
  models::TrainHyper hyper;
  std::uint64_t seed = 3407;
};

struct TheoremRow {
  double gamma = 0.0;
  double empirical_rate = 0.0;
  double bound = 1.0;
  std::size_t trials = 0;
};

struct TheoremTable {
  std::vector<TheoremRow> rows;
  std::vector<std::string> notes;
  int source_class = 0;
  double mean_dist_sq = 0.0;
  /// Rate at which held-out nodes of the source class are predicted y_t.
  double baseline_rate = 0.0;
};

/// Builds star-shaped test nodes of the source class (the class whose mean is
/// closest to y_t) with round(gamma * degree) neighbors drawn from the y_t
/// feature distribution and the rest from the source distribution, and
/// records how often a clean model trained on the synthetic graph predicts y_t.
TheoremTable theorem_harness(const graph::SyntheticSpec& spec, std::span<const double> gamma_grid,
                             const TheoremOptions& options);

}  // namespace bdlab::shield
