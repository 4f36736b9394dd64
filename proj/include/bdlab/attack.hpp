#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <span>
#include <vector>

#include "bdlab/graph.hpp"
#include "bdlab/models.hpp"

namespace bdlab::attack {

using graph::Graph;
using graph::Trigger;
using models::ClassifierParams;
using models::GeneratorParams;

enum class LogicGradient { kAnalytic, kFiniteDifference };

struct AttackConfig {
  int target_class = 0;
  std::size_t delta_p = 40;
  std::size_t trigger_size = graph::kBaselineTriggerSize;
  double margin_t = 1.0;
  double beta = 0.1;
  std::size_t inner_steps = 3;
  std::size_t outer_epochs = 200;
  double lr_surrogate = 1e-2;
  double lr_generator = 1e-2;
  double weight_decay = 5e-3;
  double generator_weight_decay = 0.0;
  std::size_t outer_batch = 256;
  std::size_t surrogate_hidden = 32;
  std::size_t generator_hidden = models::kDefaultGeneratorHidden;
  grad::Activation surrogate_act = grad::Activation::kSoftplus;
  grad::Activation generator_act = grad::Activation::kRelu;
  models::NeighborScope neighbor_scope = models::NeighborScope::kOneHop;
  models::SaliencyTarget saliency = models::SaliencyTarget::kLogit;
  LogicGradient logic_gradient = LogicGradient::kAnalytic;
  double fd_step = 1e-5;
  bool plain_descent = false;
  std::uint64_t seed = 3407;

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
};

struct PoisonPlan {
  std::vector<NodeId> poisoned;
  std::vector<double> scores;
  bool shortfall = false;
};

/// (1 - p[y_t]) + entropy(p), natural log, 0 log 0 = 0.
double uncertainty_score(std::span<const double> probs, int target_class);

/// Top-delta_p candidates by score, ties to the lower id.
PoisonPlan plan_from_scores(std::span<const NodeId> candidates, std::span<const double> scores, std::size_t delta_p);

/// Candidates are train-labeled nodes of class y_t scored by the selector's
/// softmax on `graph`.
PoisonPlan select_poisoned(const ClassifierParams& selector, const Graph& graph,
                           std::span<const NodeId> train_labeled, int target_class, std::size_t delta_p);

struct AttachedView {
  const Graph* base = nullptr;
  NodeId host = 0;
  Trigger trigger;
  std::vector<NodeId> injected_ids;
  std::vector<graph::Edge> attach_edges;
  std::vector<NodeId> clean_neighbors;
  Graph augmented;
};

AttachedView attach_trigger(const Graph& graph, NodeId host, const Trigger& trigger,
                            models::NeighborScope scope = models::NeighborScope::kOneHop);

/// Per poisoned node: host, injected trigger ids, and the host-trigger edge.
struct Provenance {
  NodeId host = 0;
  std::vector<NodeId> trigger_ids;
  graph::Edge attach_edge;
  friend bool operator==(const Provenance&, const Provenance&) = default;
};

struct BackdooredGraph {
  Graph graph;
  std::vector<Provenance> provenance;
};

/// Appends one trigger per host (in order) to `base`.
BackdooredGraph build_backdoored(const Graph& base, std::span<const NodeId> hosts, std::span<const Trigger> triggers);

void save_provenance(std::span<const Provenance> provenance, const std::filesystem::path& path);
std::vector<Provenance> load_provenance(const std::filesystem::path& path);

/// Edges touching a trigger node (internal and attach), over all provenance entries.
std::vector<graph::Edge> trigger_edges(const Graph& graph, std::span<const Provenance> provenance);

struct SaliencyRow {
  NodeId center = 0;
  std::size_t cls = 0;
  std::map<NodeId, double> scores;
};

SaliencyRow sa_importance(const ClassifierParams& surrogate, const AttachedView& view, std::size_t cls);

double logic_poison_loss(const ClassifierParams& surrogate, std::span<const AttachedView> views, std::size_t cls,
                         double margin_t);

/// `zero_norm` (optional) receives the number of degenerate cosines.
double unnoticeable_loss(std::span<const AttachedView> views, std::size_t* zero_norm = nullptr);

/// Summed cross-entropy over `labeled` nodes on their own labels.
double surrogate_loss(const ClassifierParams& surrogate, const Graph& backdoored, std::span<const NodeId> labeled);

/// Triggers for a batch of hosts, in host order.
std::vector<Trigger> generate_triggers(const GeneratorParams& gen, const Graph& graph, std::span<const NodeId> hosts);

struct LossBreakdown {
  double attack_ce = 0.0;
  double l_u = 0.0;
  double l_a = 0.0;
  double l_f = 0.0;
  double total() const;
};

struct OuterGradient {
  LossBreakdown losses;
  std::vector<DenseMatrix> grads;  // w1, b1, w2, b2
  std::size_t zero_norm_cosines = 0;
};

/// Gradient of attack CE + L_U + beta * L_A over the sampled hosts with the
/// surrogate frozen.
OuterGradient outer_objective_gradient(const GeneratorParams& gen, const ClassifierParams& surrogate,
                                       const Graph& graph, std::span<const NodeId> sampled,
                                       const AttackConfig& config);

/// Outer objective value with the binarized adjacency replaced by its
/// straight-through linearization around `anchor`: binarize(anchor logits) +
/// logits - anchor logits. l_a is reported already scaled by beta. Its
/// gradient at gen == anchor is what outer_objective_gradient returns.
LossBreakdown outer_objective_linearized(const GeneratorParams& gen, const GeneratorParams& anchor,
                                        const ClassifierParams& surrogate, const Graph& graph,
                                        std::span<const NodeId> sampled, const AttackConfig& config);

struct BilevelResult {
  GeneratorParams generator;
  ClassifierParams surrogate;
  BackdooredGraph backdoored;
  std::vector<LossBreakdown> history;
  bool diverged = false;
  std::string diagnostics;
};

/// Alternating optimization on `graph` (the attacker's training graph).
/// `labeled` carries the surrogate's supervision; outer batches are drawn
/// from all nodes of `graph`.
BilevelResult run_bilevel(const Graph& graph, std::span<const NodeId> labeled, const PoisonPlan& plan,
                          const AttackConfig& config);

/// Random-graph baseline: poisoned nodes sampled uniformly from the
/// candidates; each trigger is Erdos-Renyi with features drawn from rows of
/// the candidate pool.
inline constexpr double kErbaEdgeProbability = 0.8;

struct ErbaAttack {
  PoisonPlan plan;
  std::vector<Trigger> triggers;
  graph::FeatureSampler sampler;
  double edge_prob = kErbaEdgeProbability;
};

ErbaAttack erba_attack(const Graph& graph, std::span<const NodeId> train_labeled, int target_class,
                       std::size_t delta_p, std::size_t trigger_size, std::uint64_t seed);

/// Produces the trigger for each host of a batch.
using TriggerSource = std::function<std::vector<Trigger>(const Graph&, std::span<const NodeId>)>;
TriggerSource generator_source(GeneratorParams gen);
TriggerSource erba_source(graph::FeatureSampler sampler, std::size_t trigger_size, double edge_prob,
                          std::uint64_t seed);

}  // namespace bdlab::attack
