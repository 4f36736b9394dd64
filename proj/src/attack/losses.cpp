#include <numeric>
#include <stdexcept>

#include "bdlab/attack.hpp"

namespace bdlab::attack {

using models::Tape;
using models::Var;

double LossBreakdown::total() const { return attack_ce + l_u + l_a; }

namespace {

struct OuterTerms {
  Var ce;
  Var lu;
  Var la_per_view;  // B x 1, invalid when not requested
};

struct OuterContext {
  const models::ViewBatch& batch;
  const Graph& graph;
  const ClassifierParams& surrogate;
  const AttackConfig& config;
};

OuterTerms build_terms(Tape& tape, const OuterContext& ctx, Var feats, Var adjacency, bool with_ce_lu,
                       bool with_la) {
  const auto& batch = ctx.batch;
  const std::size_t views = batch.num_views();
  const std::size_t s = batch.trigger_size;
  const std::size_t pairs = models::trigger_pair_count(s);
  Var weights = pairs > 0 ? tape.reshape(adjacency, views * pairs, 1) : Var{};
  const auto op = models::view_operator(tape, batch, ctx.surrogate.arch, ctx.surrogate.gin_eps, weights);
  Var x = models::view_features(tape, batch, ctx.graph, feats);
  Var w1 = tape.constant(ctx.surrogate.w1);
  Var w2 = tape.constant(ctx.surrogate.w2);
  OuterTerms terms;

  if (with_ce_lu) {
    Var logits = models::view_host_logits(tape, batch, op, x, w1, w2, ctx.surrogate.act);
    std::vector<std::size_t> rows(views);
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    std::vector<int> labels(views, ctx.config.target_class);
    terms.ce = tape.cross_entropy(logits, rows, labels);

    // Present edges only: the binarized adjacency acts as a fixed mask here.
    std::vector<std::pair<std::size_t, std::size_t>> edges;
    const auto& adj = tape.value(adjacency);
    for (std::size_t v = 0; v < views; ++v) {
      edges.emplace_back(batch.host_rows[v], batch.trigger_row(v, 0));
      std::size_t p = 0;
      for (std::size_t a = 0; a < s; ++a) {
        for (std::size_t b = a + 1; b < s; ++b, ++p) {
          if (adj(v, p) > 0.5) edges.emplace_back(batch.trigger_row(v, a), batch.trigger_row(v, b));
        }
      }
    }
    terms.lu = tape.sum(tape.exp(tape.scale(tape.cosine_pairs(x, std::move(edges)), -1.0)));
  }

  if (with_la) {
    Var sal = models::view_saliency(tape, batch, op, x, w1, w2, ctx.surrogate.act,
                                    static_cast<std::size_t>(ctx.config.target_class), ctx.config.saliency);
    std::vector<Tape::SegmentTerm> seg;
    for (std::size_t v = 0; v < views; ++v) {
      for (std::size_t a = 0; a < s; ++a) seg.push_back({v, batch.trigger_row(v, a), 1.0});
      for (std::size_t r : batch.neighbor_rows[v]) seg.push_back({v, r, -1.0});
    }
    Var margin = tape.segment_sum(sal, std::move(seg), views);
    terms.la_per_view = tape.hinge(tape.add_scalar(tape.scale(margin, -1.0), ctx.config.margin_t));
  }
  return terms;
}

std::vector<double> la_values(const OuterContext& ctx, const DenseMatrix& feats, const DenseMatrix& adjacency) {
  Tape tape;
  auto terms = build_terms(tape, ctx, tape.constant(feats), tape.constant(adjacency), false, true);
  const auto& col = tape.value(terms.la_per_view);
  return {col.values().begin(), col.values().end()};
}

// Central differences of each view's L_A term with respect to its own trigger
// features and (continuous) adjacency entries. Views are independent, so one
// coordinate is perturbed in every view at once.
std::pair<DenseMatrix, DenseMatrix> la_finite_difference(const OuterContext& ctx, const DenseMatrix& feats,
                                                         const DenseMatrix& adjacency, double eps) {
  const std::size_t views = ctx.batch.num_views();
  const std::size_t s = ctx.batch.trigger_size;
  const std::size_t d = feats.cols();
  DenseMatrix g_feat(feats.rows(), d);
  DenseMatrix g_adj(adjacency.rows(), adjacency.cols());
  for (std::size_t a = 0; a < s; ++a) {
    for (std::size_t j = 0; j < d; ++j) {
      DenseMatrix up = feats;
      DenseMatrix down = feats;
      for (std::size_t v = 0; v < views; ++v) {
        up(v * s + a, j) += eps;
        down(v * s + a, j) -= eps;
      }
      const auto fu = la_values(ctx, up, adjacency);
      const auto fd = la_values(ctx, down, adjacency);
      for (std::size_t v = 0; v < views; ++v) g_feat(v * s + a, j) = (fu[v] - fd[v]) / (2.0 * eps);
    }
  }
  for (std::size_t p = 0; p < adjacency.cols(); ++p) {
    DenseMatrix up = adjacency;
    DenseMatrix down = adjacency;
    for (std::size_t v = 0; v < views; ++v) {
      up(v, p) += eps;
      down(v, p) -= eps;
    }
    const auto fu = la_values(ctx, feats, up);
    const auto fd = la_values(ctx, feats, down);
    for (std::size_t v = 0; v < views; ++v) g_adj(v, p) = (fu[v] - fd[v]) / (2.0 * eps);
  }
  return {std::move(g_feat), std::move(g_adj)};
}

}  // namespace

OuterGradient outer_objective_gradient(const GeneratorParams& gen, const ClassifierParams& surrogate,
                                       const Graph& graph, std::span<const NodeId> sampled,
                                       const AttackConfig& config) {
  if (sampled.empty()) throw std::invalid_argument("outer_objective_gradient: no sampled nodes");
  if (gen.input_dim() != graph.feature_dim() || surrogate.input_dim() != graph.feature_dim()) {
    throw std::invalid_argument("outer_objective_gradient: dimension mismatch");
  }
  if (static_cast<std::size_t>(config.target_class) >= surrogate.num_classes()) {
    throw std::invalid_argument("outer_objective_gradient: target class out of range");
  }
  const std::size_t d = graph.feature_dim();
  const std::size_t s = gen.trigger_size;
  const auto batch = models::build_view_batch(graph, sampled, s, config.neighbor_scope);
  const OuterContext ctx{batch, graph, surrogate, config};

  Tape tape;
  auto vars = models::generator_variables(tape, gen, true);
  std::vector<std::size_t> rows(sampled.begin(), sampled.end());
  auto out = models::generator_forward(tape, vars, tape.constant(gather_rows(graph.features(), rows)), s, d, gen.act);

  const bool logic = config.beta > 0.0;
  const bool analytic = config.logic_gradient == LogicGradient::kAnalytic;
  auto terms = build_terms(tape, ctx, out.features, out.adjacency, true, logic && analytic);
  Var total = tape.add(terms.ce, terms.lu);

  OuterGradient result;
  result.losses.attack_ce = tape.scalar(terms.ce);
  result.losses.l_u = tape.scalar(terms.lu);
  if (logic && analytic) {
    Var la = tape.sum(terms.la_per_view);
    result.losses.l_a = tape.scalar(la);
    total = tape.add(total, tape.scale(la, config.beta));
  } else if (logic) {
    const auto& feats = tape.value(out.features);
    const auto& adj = tape.value(out.adjacency);
    for (double v : la_values(ctx, feats, adj)) result.losses.l_a += v;
    auto [g_feat, g_adj] = la_finite_difference(ctx, feats, adj, config.fd_step);
    for (double& v : g_feat.values()) v *= config.beta;
    for (double& v : g_adj.values()) v *= config.beta;
    Var chain = tape.sum(tape.hadamard(out.features, tape.constant(std::move(g_feat))));
    if (adj.cols() > 0) chain = tape.add(chain, tape.sum(tape.hadamard(out.adjacency, tape.constant(std::move(g_adj)))));
    total = tape.add(total, chain);
  }
  tape.backward(total);
  result.grads = {tape.grad(vars.w1), tape.grad(vars.b1), tape.grad(vars.w2), tape.grad(vars.b2)};
  result.zero_norm_cosines = tape.zero_norm_cosines();
  return result;
}

LossBreakdown outer_objective_linearized(const GeneratorParams& gen, const GeneratorParams& anchor,
                                        const ClassifierParams& surrogate, const Graph& graph,
                                        std::span<const NodeId> sampled, const AttackConfig& config) {
  if (sampled.empty()) throw std::invalid_argument("outer_objective_linearized: no sampled nodes");
  const std::size_t d = graph.feature_dim();
  const std::size_t s = gen.trigger_size;
  const auto batch = models::build_view_batch(graph, sampled, s, config.neighbor_scope);
  const OuterContext ctx{batch, graph, surrogate, config};
  std::vector<std::size_t> rows(sampled.begin(), sampled.end());
  const DenseMatrix host_x = gather_rows(graph.features(), rows);

  Tape tape;
  auto anchor_out = models::generator_forward(tape, models::generator_variables(tape, anchor, false),
                                              tape.constant(host_x), s, d, anchor.act);
  auto out = models::generator_forward(tape, models::generator_variables(tape, gen, false), tape.constant(host_x), s,
                                       d, gen.act);
  DenseMatrix shift = tape.value(anchor_out.adjacency);
  const auto& anchor_logits = tape.value(anchor_out.adjacency_logits);
  for (std::size_t i = 0; i < shift.values().size(); ++i) shift.values()[i] -= anchor_logits.values()[i];
  Var adjacency = tape.add(out.adjacency_logits, tape.constant(std::move(shift)));
  auto terms = build_terms(tape, ctx, out.features, adjacency, true, config.beta > 0.0);
  LossBreakdown losses;
  losses.attack_ce = tape.scalar(terms.ce);
  losses.l_u = tape.scalar(terms.lu);
  if (config.beta > 0.0) losses.l_a = config.beta * tape.scalar(tape.sum(terms.la_per_view));
  return losses;
}

}  // namespace bdlab::attack
