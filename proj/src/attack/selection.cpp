#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "bdlab/attack.hpp"

namespace bdlab::attack {

void AttackConfig::validate() const {
  auto fail = [](const std::string& what) { throw std::invalid_argument("attack config: " + what); };
  if (target_class < 0) fail("target_class must be >= 0");
  if (delta_p < 1) fail("delta_p must be >= 1");
  if (trigger_size < 1) fail("trigger_size must be >= 1");
  if (!(margin_t >= 0.0)) fail("margin_t must be >= 0");
  if (!(beta >= 0.0)) fail("beta must be >= 0");
  if (inner_steps < 1) fail("inner_steps must be >= 1");
  if (outer_batch < 1) fail("outer_batch must be >= 1");
  if (!(lr_surrogate > 0.0) || !(lr_generator > 0.0)) fail("learning rates must be positive");
  if (!(weight_decay >= 0.0) || !(generator_weight_decay >= 0.0)) fail("weight decay must be >= 0");
  if (surrogate_hidden < 1 || generator_hidden < 1) fail("hidden widths must be >= 1");
  if (!(fd_step > 0.0)) fail("fd_step must be positive");
}

double uncertainty_score(std::span<const double> probs, int target_class) {
  if (probs.empty()) throw std::invalid_argument("uncertainty_score: empty distribution");
  if (target_class < 0 || static_cast<std::size_t>(target_class) >= probs.size()) {
    throw std::invalid_argument("uncertainty_score: target class out of range");
  }
  double total = 0.0;
  double entropy = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0) || !std::isfinite(p)) throw std::invalid_argument("uncertainty_score: invalid probability");
    total += p;
    if (p > 0.0) entropy -= p * std::log(p);
  }
  if (std::abs(total - 1.0) > 1e-6) throw std::invalid_argument("uncertainty_score: probabilities do not sum to 1");
  return (1.0 - probs[static_cast<std::size_t>(target_class)]) + entropy;
}

PoisonPlan plan_from_scores(std::span<const NodeId> candidates, std::span<const double> scores, std::size_t delta_p) {
  if (candidates.size() != scores.size()) throw std::invalid_argument("plan_from_scores: length mismatch");
  if (candidates.empty()) throw std::invalid_argument("select_poisoned: no candidate nodes of the target class");
  std::vector<std::size_t> order(candidates.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return candidates[a] < candidates[b];
  });
  PoisonPlan plan;
  plan.shortfall = candidates.size() < delta_p;
  const std::size_t keep = std::min(delta_p, candidates.size());
  for (std::size_t k = 0; k < keep; ++k) {
    plan.poisoned.push_back(candidates[order[k]]);
    plan.scores.push_back(scores[order[k]]);
  }
  return plan;
}

PoisonPlan select_poisoned(const ClassifierParams& selector, const Graph& graph,
                           std::span<const NodeId> train_labeled, int target_class, std::size_t delta_p) {
  if (delta_p < 1) throw std::invalid_argument("select_poisoned: delta_p must be >= 1");
  std::vector<NodeId> candidates;
  for (NodeId v : train_labeled) {
    if (v >= graph.num_nodes()) throw std::invalid_argument("select_poisoned: node out of range");
    if (graph.label(v) == target_class) candidates.push_back(v);
  }
  if (candidates.empty()) throw std::invalid_argument("select_poisoned: no candidate nodes of the target class");
  const DenseMatrix probs = models::softmax_rows(models::classifier_logits(selector, graph));
  std::vector<double> scores;
  scores.reserve(candidates.size());
  for (NodeId v : candidates) scores.push_back(uncertainty_score(probs.row(v), target_class));
  return plan_from_scores(candidates, scores, delta_p);
}

}  // namespace bdlab::attack
