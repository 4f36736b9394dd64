#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "bdlab/attack.hpp"
#include "bdlab/optim.hpp"

namespace bdlab::attack {

using models::Var;

namespace {

constexpr double kDivergenceLimit = 1e6;

// One optimizer step on the summed cross-entropy over `labeled`; returns the
// loss at the pre-step parameters.
double surrogate_step(ClassifierParams& sur, const Graph& backdoored, std::span<const std::size_t> rows,
                      std::span<const int> labels, grad::OptimState& state) {
  const auto op = models::propagation_operator(backdoored, sur.arch, sur.gin_eps);
  models::Tape tape;
  Var w1 = tape.variable(sur.w1);
  Var w2 = tape.variable(sur.w2);
  Var logits = models::classifier_forward(tape, op, tape.constant(backdoored.features()), w1, w2, sur.act);
  Var loss = tape.cross_entropy(logits, rows, labels);
  tape.backward(loss);
  const DenseMatrix grads[] = {tape.grad(w1), tape.grad(w2)};
  DenseMatrix* params[] = {&sur.w1, &sur.w2};
  grad::adam_step(params, grads, state);
  return tape.scalar(loss);
}

}  // namespace

BilevelResult run_bilevel(const Graph& graph, std::span<const NodeId> labeled, const PoisonPlan& plan,
                          const AttackConfig& config) {
  config.validate();
  if (plan.poisoned.empty()) throw std::invalid_argument("run_bilevel: empty poison plan");
  if (labeled.empty()) throw std::invalid_argument("run_bilevel: no labeled nodes");
  if (static_cast<std::size_t>(config.target_class) >= graph.num_classes()) {
    throw std::invalid_argument("run_bilevel: target class out of range");
  }
  std::vector<std::size_t> rows;
  std::vector<int> labels;
  for (NodeId v : labeled) {
    if (v >= graph.num_nodes() || !graph.is_labeled(v)) throw std::invalid_argument("run_bilevel: bad labeled node");
    rows.push_back(v);
    labels.push_back(graph.label(v));
  }

  const std::size_t d = graph.feature_dim();
  BilevelResult result;
  result.generator = models::init_generator(d, config.trigger_size, config.generator_hidden, config.generator_act,
                                            config.seed + 2);
  result.surrogate = models::init_classifier(models::Arch::kGcn, d, config.surrogate_hidden, graph.num_classes(),
                                             config.surrogate_act, config.seed + 3);
  grad::OptimState sur_state;
  sur_state.lr = config.lr_surrogate;
  sur_state.weight_decay = config.weight_decay;
  sur_state.plain = config.plain_descent;
  grad::OptimState gen_state;
  gen_state.lr = config.lr_generator;
  gen_state.weight_decay = config.generator_weight_decay;
  gen_state.plain = config.plain_descent;

  std::vector<NodeId> pool(graph.num_nodes());
  std::iota(pool.begin(), pool.end(), NodeId{0});
  const std::size_t batch = std::min(config.outer_batch, pool.size());
  Rng rng(config.seed + 1);

  for (std::size_t epoch = 0; epoch < config.outer_epochs; ++epoch) {
    ClassifierParams sur = result.surrogate;
    GeneratorParams gen = result.generator;
    LossBreakdown losses;
    try {
      const auto triggers = generate_triggers(gen, graph, plan.poisoned);
      const auto backdoored = build_backdoored(graph, plan.poisoned, triggers);
      for (std::size_t n = 0; n < config.inner_steps; ++n) {
        losses.l_f = surrogate_step(sur, backdoored.graph, rows, labels, sur_state);
      }
      const auto sampled = rng.sample(pool, batch);
      auto outer = outer_objective_gradient(gen, sur, graph, sampled, config);
      const double l_f = losses.l_f;
      losses = outer.losses;
      losses.l_f = l_f;
      if (!std::isfinite(losses.total() + l_f) || losses.total() > kDivergenceLimit || l_f > kDivergenceLimit) {
        throw NumericError("loss exceeded divergence limit");
      }
      DenseMatrix* params[] = {&gen.w1, &gen.b1, &gen.w2, &gen.b2};
      grad::adam_step(params, outer.grads, gen_state);
    } catch (const NumericError& e) {
      result.diverged = true;
      result.diagnostics = "outer epoch " + std::to_string(epoch) + ": " + e.what() + " (ce " +
                           std::to_string(losses.attack_ce) + ", l_u " + std::to_string(losses.l_u) + ", l_a " +
                           std::to_string(losses.l_a) + ", l_f " + std::to_string(losses.l_f) + ")";
      break;
    }
    result.surrogate = std::move(sur);
    result.generator = std::move(gen);
    result.history.push_back(losses);
  }

  const auto triggers = generate_triggers(result.generator, graph, plan.poisoned);
  result.backdoored = build_backdoored(graph, plan.poisoned, triggers);
  return result;
}

}  // namespace bdlab::attack
