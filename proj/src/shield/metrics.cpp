#include <algorithm>
#include <stdexcept>

#include "bdlab/shield.hpp"

namespace bdlab::shield {

using models::Tape;
using models::Var;

namespace {

std::vector<int> predict_with_triggers(const ClassifierParams& model, const Graph& graph,
                                       std::span<const NodeId> hosts, std::span<const graph::Trigger> triggers,
                                       std::optional<double> prune_threshold) {
  if (hosts.empty()) return {};
  const std::size_t s = triggers.empty() ? 0 : triggers[0].size();
  const std::size_t d = graph.feature_dim();
  const std::size_t pairs = models::trigger_pair_count(s);
  DenseMatrix feats(hosts.size() * s, d);
  DenseMatrix adj(hosts.size(), pairs);
  for (std::size_t b = 0; b < triggers.size(); ++b) {
    const auto& t = triggers[b];
    t.validate(d);
    if (t.size() != s) throw std::invalid_argument("attack_success_rate: triggers differ in size");
    if (t.attach_index != 0) throw std::invalid_argument("attack_success_rate: triggers must attach at node 0");
    for (std::size_t a = 0; a < s; ++a) std::copy(t.features.row(a).begin(), t.features.row(a).end(), feats.row(b * s + a).begin());
    std::size_t p = 0;
    for (std::size_t a = 0; a < s; ++a) {
      for (std::size_t c = a + 1; c < s; ++c, ++p) {
        const bool kept = !prune_threshold || cosine(t.features.row(a), t.features.row(c)) >= *prune_threshold;
        adj(b, p) = kept ? t.adjacency(a, c) : 0.0;
      }
    }
  }
  const auto batch = models::build_view_batch(graph, hosts, s);
  Tape tape;
  Var weights = pairs > 0 ? tape.constant(DenseMatrix(hosts.size() * pairs, 1, {adj.values().begin(), adj.values().end()}))
                          : Var{};
  const auto op = models::view_operator(tape, batch, model.arch, model.gin_eps, weights);
  Var x = models::view_features(tape, batch, graph, s > 0 ? tape.constant(std::move(feats)) : Var{});
  Var logits = models::view_host_logits(tape, batch, op, x, tape.constant(model.w1), tape.constant(model.w2), model.act);
  std::vector<int> out;
  for (std::size_t b = 0; b < hosts.size(); ++b) out.push_back(models::argmax_row(tape.value(logits).row(b)));
  return out;
}

}  // namespace

double attack_success_rate(const ClassifierParams& target, const Graph& graph, const TriggerSource& source,
                           std::span<const NodeId> test_target, int target_class,
                           std::optional<double> prune_threshold) {
  std::vector<NodeId> hosts;
  for (NodeId v : test_target) {
    if (v >= graph.num_nodes()) throw std::invalid_argument("attack_success_rate: node out of range");
    if (graph.label(v) != target_class) hosts.push_back(v);
  }
  if (hosts.empty()) throw std::invalid_argument("attack_success_rate: no target nodes outside the target class");
  const auto triggers = source(graph, hosts);
  if (triggers.size() != hosts.size()) throw std::invalid_argument("attack_success_rate: trigger source size mismatch");

  // A pruned attach edge leaves the host without its trigger.
  std::vector<NodeId> attached, detached;
  std::vector<graph::Trigger> kept;
  for (std::size_t b = 0; b < hosts.size(); ++b) {
    const auto& t = triggers[b];
    if (prune_threshold && cosine(graph.feature(hosts[b]), t.features.row(t.attach_index)) < *prune_threshold) {
      detached.push_back(hosts[b]);
    } else {
      attached.push_back(hosts[b]);
      kept.push_back(t);
    }
  }
  std::size_t hits = 0;
  for (int y : predict_with_triggers(target, graph, attached, kept, prune_threshold)) hits += y == target_class;
  for (int y : predict_with_triggers(target, graph, detached, {}, std::nullopt)) hits += y == target_class;
  return static_cast<double>(hits) / static_cast<double>(hosts.size());
}

double clean_accuracy(const ClassifierParams& target, const Graph& graph, std::span<const NodeId> test_clean) {
  if (test_clean.empty()) throw std::invalid_argument("clean_accuracy: empty test set");
  for (NodeId v : test_clean) {
    if (v >= graph.num_nodes() || !graph.is_labeled(v)) throw std::invalid_argument("clean_accuracy: unlabeled node");
  }
  const auto pred = models::predict_labels(models::classifier_logits(target, graph), test_clean);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hits += pred[i] == graph.label(test_clean[i]);
  return static_cast<double>(hits) / static_cast<double>(test_clean.size());
}

double irt_fraction(std::vector<std::pair<NodeId, double>> candidates, const std::set<NodeId>& triggers,
                    std::size_t k) {
  if (k < 1) throw std::invalid_argument("important_rate_of_triggers: k must be >= 1");
  if (triggers.empty()) return 0.0;
  std::sort(candidates.begin(), candidates.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  const std::size_t top = std::min(k, candidates.size());
  std::size_t hits = 0;
  for (std::size_t i = 0; i < top; ++i) hits += triggers.count(candidates[i].first);
  return static_cast<double>(hits) / static_cast<double>(std::min(k, triggers.size()));
}

double important_rate_of_triggers(const ClassifierParams& target, const Graph& backdoored,
                                  std::span<const Provenance> provenance, int target_class, std::size_t k) {
  if (k < 1) throw std::invalid_argument("important_rate_of_triggers: k must be >= 1");
  if (provenance.empty()) throw std::invalid_argument("important_rate_of_triggers: no poisoned nodes");
  std::vector<NodeId> hosts;
  for (const auto& p : provenance) hosts.push_back(p.host);
  const auto batch = models::build_view_batch(backdoored, hosts, 0, models::NeighborScope::kTwoHop);
  Tape tape;
  const auto op = models::view_operator(tape, batch, target.arch, target.gin_eps, Var{});
  Var x = models::view_features(tape, batch, backdoored, Var{});
  Var sal = models::view_saliency(tape, batch, op, x, tape.constant(target.w1), tape.constant(target.w2), target.act,
                                  static_cast<std::size_t>(target_class));
  const auto& scores = tape.value(sal);
  double total = 0.0;
  for (std::size_t v = 0; v < provenance.size(); ++v) {
    std::vector<std::pair<NodeId, double>> cands;
    for (std::size_t r : batch.field_rows[v]) cands.emplace_back(batch.base_ids[r], scores(r, 0));
    const std::set<NodeId> trig(provenance[v].trigger_ids.begin(), provenance[v].trigger_ids.end());
    total += irt_fraction(std::move(cands), trig, k);
  }
  return total / static_cast<double>(provenance.size());
}

}  // namespace bdlab::shield
