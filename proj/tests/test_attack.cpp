#include <algorithm>
#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "bdlab/attack.hpp"
#include "grad_check.hpp"
#include "test_util.hpp"

using namespace bdlab;
using namespace bdlab::attack;
using models::Arch;
using models::Activation;

namespace {

// GIN with eps 0 aggregates with A + I, so two-hop saliencies are walk counts
// times |w1 * w2[cls]| whenever every pre-activation is positive.
ClassifierParams linear_gin(double readout) {
  ClassifierParams p;
  p.arch = Arch::kGin;
  p.w1 = DenseMatrix{{1.0}};
  p.w2 = DenseMatrix{{readout, 0.3}};
  return p;
}

Trigger star_trigger(std::size_t s, double feature) {
  Trigger t;
  t.features = DenseMatrix(s, 1, feature);
  t.adjacency = DenseMatrix(s, s);
  for (std::size_t a = 1; a < s; ++a) t.adjacency(0, a) = t.adjacency(a, 0) = 1.0;
  return t;
}

// Host 0 with `clean` pendant neighbors, all features positive.
Graph host_with_pendants(std::size_t clean) {
  std::vector<graph::Edge> edges;
  for (NodeId c = 1; c <= clean; ++c) edges.push_back({0, c});
  return Graph(2, DenseMatrix(clean + 1, 1, 1.0), std::vector<int>(clean + 1, 0), edges);
}

Graph small_synthetic(std::size_t n, std::uint64_t seed) {
  graph::SyntheticSpec spec;
  spec.n = n;
  spec.num_classes = 3;
  spec.dim = 4;
  spec.noise_scale = 0.8;
  spec.feature_bound = 2.0;
  spec.class_means = graph::random_class_means(3, 4, 1.0, seed);
  spec.seed = seed;
  return graph::generate_synthetic(spec);
}

std::vector<NodeId> iota_nodes(std::size_t n) {
  std::vector<NodeId> v(n);
  std::iota(v.begin(), v.end(), NodeId{0});
  return v;
}

AttackConfig tiny_config() {
  AttackConfig c;
  c.delta_p = 4;
  c.outer_epochs = 3;
  c.outer_batch = 6;
  c.surrogate_hidden = 6;
  c.generator_hidden = 5;
  c.beta = 0.7;
  c.seed = 5;
  return c;
}

}  // namespace

TEST(Uncertainty, ClosedForms) {
  EXPECT_EQ(uncertainty_score(std::vector<double>{0, 1, 0}, 1), 0.0);
  EXPECT_NEAR(uncertainty_score(std::vector<double>{0.25, 0.25, 0.25, 0.25}, 2), 0.75 + std::log(4.0), 1e-12);
  EXPECT_NEAR(uncertainty_score(std::vector<double>{0.25, 0.25, 0.25, 0.25}, 2), 2.13629, 1e-5);
  // 0.3 + (-(0.7 ln 0.7 + 0.2 ln 0.2 + 0.1 ln 0.1))
  const double h = -(0.7 * std::log(0.7) + 0.2 * std::log(0.2) + 0.1 * std::log(0.1));
  EXPECT_NEAR(uncertainty_score(std::vector<double>{0.7, 0.2, 0.1}, 0), 0.3 + h, 1e-12);
  EXPECT_NEAR(uncertainty_score(std::vector<double>{0.7, 0.2, 0.1}, 0), 1.10182, 1e-5);
  EXPECT_THROW(uncertainty_score(std::vector<double>{0.5, 0.6}, 0), std::invalid_argument);
  EXPECT_THROW(uncertainty_score(std::vector<double>{-0.1, 1.1}, 0), std::invalid_argument);
}

TEST(Uncertainty, MinimizedOnlyByOneHotAndMonotone) {
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> p(4);
    double s = 0.0;
    for (double& v : p) s += (v = rng.uniform(0.01, 1.0));
    for (double& v : p) v /= s;
    const double u = uncertainty_score(p, 0);
    EXPECT_GT(u, 0.0);
    // move mass from y_t to another class: U must rise while p(y_t) > 1/2 of the moved share
    auto q = p;
    const double eps = 0.5 * q[0];
    q[0] -= eps;
    q[1] += eps;
    if (q[1] <= q[0]) {
      EXPECT_GT(uncertainty_score(q, 0), u);
    }
  }
  // same p(y_t), more spread among the rest
  EXPECT_GT(uncertainty_score(std::vector<double>{0.6, 0.2, 0.2}, 0),
            uncertainty_score(std::vector<double>{0.6, 0.4, 0.0}, 0));
}

TEST(Selection, TiesGoToLowerIds) {
  const std::vector<NodeId> cand{9, 3, 7, 1, 5};
  const std::vector<double> scores(5, 0.5);
  const auto plan = plan_from_scores(cand, scores, 3);
  EXPECT_EQ(plan.poisoned, (std::vector<NodeId>{1, 3, 5}));
  EXPECT_FALSE(plan.shortfall);
}

TEST(Selection, MatchesSortOracleAndMonotoneTransform) {
  Rng rng(8);
  std::vector<NodeId> cand(30);
  std::vector<double> scores(30);
  for (std::size_t i = 0; i < 30; ++i) {
    cand[i] = static_cast<NodeId>(100 - 3 * i);
    scores[i] = std::round(rng.uniform(0, 10));  // plenty of ties
  }
  const auto plan = plan_from_scores(cand, scores, 12);
  std::vector<std::pair<double, NodeId>> brute;
  for (std::size_t i = 0; i < 30; ++i) brute.push_back({-scores[i], cand[i]});
  std::sort(brute.begin(), brute.end());
  for (std::size_t k = 0; k < 12; ++k) {
    EXPECT_EQ(plan.poisoned[k], brute[k].second);
    EXPECT_EQ(plan.scores[k], -brute[k].first);
  }
  EXPECT_TRUE(std::is_sorted(plan.scores.rbegin(), plan.scores.rend()));
  std::vector<double> warped(30);
  std::transform(scores.begin(), scores.end(), warped.begin(), [](double s) { return std::exp(2 * s) - 7; });
  EXPECT_EQ(plan_from_scores(cand, warped, 12).poisoned, plan.poisoned);
}

TEST(Selection, Shortfall) {
  const std::vector<NodeId> cand{4, 2};
  const std::vector<double> scores{0.1, 0.2};
  const auto plan = plan_from_scores(cand, scores, 3);
  EXPECT_EQ(plan.poisoned, (std::vector<NodeId>{2, 4}));
  EXPECT_TRUE(plan.shortfall);
  EXPECT_THROW(plan_from_scores(std::vector<NodeId>{}, std::vector<double>{}, 3), std::invalid_argument);
}

TEST(Selection, CandidatesAreTargetClassTrainNodes) {
  const Graph g = small_synthetic(150, 2);
  const auto sel = models::init_classifier(Arch::kGcn, 4, 8, 3, Activation::kRelu, 1);
  std::vector<NodeId> train;
  for (NodeId v = 0; v < 150; v += 2) train.push_back(v);
  const auto plan = select_poisoned(sel, g, train, 1, 10);
  EXPECT_EQ(plan.poisoned.size(), 10u);
  const auto probs = models::softmax_rows(models::classifier_logits(sel, g));
  for (std::size_t k = 0; k < plan.poisoned.size(); ++k) {
    const NodeId v = plan.poisoned[k];
    EXPECT_EQ(v % 2, 0u);
    EXPECT_EQ(g.label(v), 1);
    EXPECT_DOUBLE_EQ(plan.scores[k], uncertainty_score(probs.row(v), 1));
  }
}

TEST(Attach, CountsAndBaseUntouched) {
  const Graph g = fixture::random_graph(12, 2, 2, 0.3, 4);
  const Graph before = g;
  Trigger t = star_trigger(3, 0.5);
  t.features = DenseMatrix(3, 2, 0.5);
  const auto view = attach_trigger(g, 5, t);
  EXPECT_EQ(view.augmented.num_nodes(), g.num_nodes() + 3);
  EXPECT_EQ(view.augmented.num_edges(), g.num_edges() + 3);
  EXPECT_TRUE(view.augmented.has_edge(5, 12));
  EXPECT_EQ(g, before);
  for (const auto& e : g.edges()) EXPECT_TRUE(view.augmented.has_edge(e.u, e.v));
  const std::vector<NodeId> nb(g.neighbors(5).begin(), g.neighbors(5).end());
  EXPECT_EQ(view.clean_neighbors, nb);
  EXPECT_THROW(attach_trigger(g, 5, star_trigger(3, 0.5)), std::invalid_argument);
}

TEST(Saliency, ZeroWeightsGiveZeroScores) {
  auto p = linear_gin(0.0);
  p.w1(0, 0) = 0.0;
  const auto view = attach_trigger(host_with_pendants(2), 0, star_trigger(3, 1.0));
  for (const auto& [node, s] : sa_importance(p, view, 0).scores) EXPECT_EQ(s, 0.0) << node;
}

TEST(Saliency, LinearRegimeClosedForm) {
  // GCN, positive weights and features: score j = (P^2)[host, j] * |w1 w2[:, cls]|
  const Graph g = host_with_pendants(3);
  const auto view = attach_trigger(g, 0, star_trigger(3, 1.0));
  ClassifierParams p;
  p.w1 = DenseMatrix{{0.8, 0.5}};
  p.w2 = DenseMatrix{{0.7, 0.1}, {0.4, 0.2}};
  const double w = 0.8 * 0.7 + 0.5 * 0.4;
  const auto a = fixture::dense_normalized(view.augmented, true);
  const auto a2 = fixture::dense_mul(a, a);
  const auto row = sa_importance(p, view, 0);
  for (const auto& [j, s] : row.scores) EXPECT_NEAR(s, a2[0][j] * w, 1e-14) << j;
  // node 5 (trigger leaf) is two hops away and present; nothing else is missing
  EXPECT_EQ(row.scores.size(), view.augmented.num_nodes());
}

TEST(LogicLoss, HingeExamples) {
  // readout r: view A (star of 4, one pendant) has trigger 5r vs clean 2r;
  // view B (star of 3, four pendants) has trigger 4r vs clean 8r
  const auto view_a = attach_trigger(host_with_pendants(1), 0, star_trigger(4, 1.0));
  const auto view_b = attach_trigger(host_with_pendants(4), 0, star_trigger(3, 1.0));
  const auto row = sa_importance(linear_gin(1.0), view_a, 0);
  double trig = 0.0;
  for (NodeId t : view_a.injected_ids) trig += row.scores.at(t);
  EXPECT_NEAR(trig, 5.0, 1e-12);
  EXPECT_NEAR(row.scores.at(1), 2.0, 1e-12);

  const std::vector<AttachedView> a{view_a};
  EXPECT_NEAR(logic_poison_loss(linear_gin(1.0), a, 0, 1.0), 0.0, 1e-12);
  // trigger 1 vs clean 2 with T = 1
  const std::vector<AttachedView> b{view_b};
  EXPECT_NEAR(logic_poison_loss(linear_gin(0.25), b, 0, 1.0), 2.0, 1e-12);
}

TEST(LogicLoss, TwoViewsSum) {
  // r = 0.5, T = 0: A contributes max(0, -(2.5 - 1)) = 0, B contributes max(0, -(2 - 4)) = 2
  const std::vector<AttachedView> views{attach_trigger(host_with_pendants(1), 0, star_trigger(4, 1.0)),
                                        attach_trigger(host_with_pendants(4), 0, star_trigger(3, 1.0))};
  const auto p = linear_gin(0.5);
  EXPECT_NEAR(logic_poison_loss(p, std::span(views).first(1), 0, 0.0), 0.0, 1e-12);
  EXPECT_NEAR(logic_poison_loss(p, std::span(views).last(1), 0, 0.0), 2.0, 1e-12);
  EXPECT_NEAR(logic_poison_loss(p, views, 0, 0.0), 2.0, 1e-12);
}

TEST(LogicLoss, InactiveWheneverMarginMet) {
  Rng rng(10);
  const Graph g = small_synthetic(60, 3);
  const auto p = models::init_classifier(Arch::kGcn, 4, 6, 3, Activation::kRelu, 2);
  for (int trial = 0; trial < 10; ++trial) {
    Trigger t = star_trigger(3, 0.0);
    t.features = fixture::random_matrix(3, 4, rng, -3, 3);
    const auto view = attach_trigger(g, static_cast<NodeId>(rng.below(60)), t);
    const auto row = sa_importance(p, view, 1);
    double gap = 0.0;
    for (NodeId x : view.injected_ids) gap += row.scores.at(x);
    for (NodeId c : view.clean_neighbors) gap -= row.scores.at(c);
    const std::vector<AttachedView> v{view};
    if (gap >= 0.0) {
      EXPECT_EQ(logic_poison_loss(p, v, 1, gap), 0.0);
    }
    EXPECT_NEAR(logic_poison_loss(p, v, 1, gap + 1.0), 1.0, 1e-12);
  }
}

TEST(Unnoticeable, ClosedForms) {
  const Graph host(1, DenseMatrix{{1.0, 2.0}}, {0}, {});
  Trigger one;
  one.features = DenseMatrix{{1.0, 2.0}};
  one.adjacency = DenseMatrix(1, 1);
  const std::vector<AttachedView> same{attach_trigger(host, 0, one)};
  EXPECT_NEAR(unnoticeable_loss(same), std::exp(-1.0), 1e-15);
  EXPECT_NEAR(unnoticeable_loss(same), 0.36788, 1e-5);

  one.features = DenseMatrix{{-2.0, 1.0}};
  const std::vector<AttachedView> ortho{attach_trigger(host, 0, one)};
  EXPECT_NEAR(unnoticeable_loss(ortho), 1.0, 1e-15);

  Trigger tri;
  tri.features = DenseMatrix{{1.0, 2.0}, {1.0, 2.0}, {1.0, 2.0}};
  tri.adjacency = DenseMatrix{{0, 1, 1}, {1, 0, 1}, {1, 1, 0}};
  const std::vector<AttachedView> full{attach_trigger(host, 0, tri)};
  EXPECT_NEAR(unnoticeable_loss(full), 4.0 * std::exp(-1.0), 1e-15);
  EXPECT_NEAR(unnoticeable_loss(full), 1.47152, 1e-5);
}

TEST(Unnoticeable, ScaleInvarianceAndZeroNorm) {
  Rng rng(12);
  const Graph g = small_synthetic(40, 5);
  Trigger t = star_trigger(3, 0.0);
  t.features = fixture::random_matrix(3, 4, rng);
  const std::vector<AttachedView> v{attach_trigger(g, 7, t)};
  for (double k : {0.01, 3.0, 1e4}) {
    Trigger s = t;
    for (double& x : s.features.row(1)) x *= k;
    const std::vector<AttachedView> w{attach_trigger(g, 7, s)};
    EXPECT_NEAR(unnoticeable_loss(w), unnoticeable_loss(v), 1e-12);
  }
  t.features.fill(0.0);
  std::size_t zero = 0;
  const std::vector<AttachedView> z{attach_trigger(g, 7, t)};
  EXPECT_NEAR(unnoticeable_loss(z, &zero), 3.0, 1e-15);
  EXPECT_EQ(zero, 3u);
}

TEST(SurrogateLoss, EmptyPlanIsMaskedCrossEntropy) {
  const Graph g = small_synthetic(50, 6);
  const auto p = models::init_classifier(Arch::kGcn, 4, 5, 3, Activation::kRelu, 3);
  const std::vector<NodeId> labeled{0, 4, 9, 30};
  const auto probs = models::softmax_rows(models::classifier_logits(p, g));
  double want = 0.0;
  for (NodeId v : labeled) want -= std::log(probs(v, static_cast<std::size_t>(g.label(v))));
  const auto bd = build_backdoored(g, std::vector<NodeId>{}, std::vector<Trigger>{});
  EXPECT_EQ(bd.graph, g);
  EXPECT_NEAR(surrogate_loss(p, bd.graph, labeled), want, 1e-12);
}

TEST(SurrogateLoss, PerfectClassifierNearZero) {
  // features equal the one-hot label, propagation is the identity on isolated nodes
  const Graph g(2, DenseMatrix{{1, 0}, {0, 1}, {1, 0}}, {0, 1, 0}, {});
  ClassifierParams p;
  p.w1 = DenseMatrix{{30, 0}, {0, 30}};
  p.w2 = DenseMatrix{{1, 0}, {0, 1}};
  EXPECT_LT(surrogate_loss(p, g, std::vector<NodeId>{0, 1, 2}), 1e-9);
}

TEST(BuildBackdoored, ProvenanceAndEdges) {
  const Graph g = fixture::random_graph(10, 2, 2, 0.2, 1);
  Trigger t = star_trigger(3, 0.0);
  t.features = DenseMatrix(3, 2, 0.4);
  const std::vector<NodeId> hosts{2, 6};
  const std::vector<Trigger> ts{t, t};
  const auto bd = build_backdoored(g, hosts, ts);
  EXPECT_EQ(bd.graph.num_nodes(), 16u);
  ASSERT_EQ(bd.provenance.size(), 2u);
  EXPECT_EQ(bd.provenance[1].trigger_ids, (std::vector<NodeId>{13, 14, 15}));
  EXPECT_EQ(bd.provenance[1].attach_edge, (graph::Edge{6, 13}));
  EXPECT_EQ(trigger_edges(bd.graph, bd.provenance).size(), 6u);
  for (NodeId v = 10; v < 16; ++v) EXPECT_FALSE(bd.graph.is_labeled(v));

  auto dir = fixture::scratch_dir("prov");
  save_provenance(bd.provenance, dir / "p.txt");
  EXPECT_EQ(load_provenance(dir / "p.txt"), bd.provenance);
}

TEST(OuterGradient, BetaZeroIgnoresLogicPath) {
  const Graph g = small_synthetic(30, 7);
  auto cfg = tiny_config();
  cfg.beta = 0.0;
  const auto gen = models::init_generator(4, 3, 5, Activation::kRelu, 1);
  const auto sur = models::init_classifier(Arch::kGcn, 4, 6, 3, Activation::kRelu, 2);
  const std::vector<NodeId> sampled{1, 5, 8, 20};
  const auto analytic = outer_objective_gradient(gen, sur, g, sampled, cfg);
  cfg.logic_gradient = LogicGradient::kFiniteDifference;
  const auto fd = outer_objective_gradient(gen, sur, g, sampled, cfg);
  EXPECT_EQ(analytic.losses.l_a, 0.0);
  EXPECT_EQ(analytic.grads, fd.grads);
  EXPECT_EQ(analytic.losses.attack_ce, fd.losses.attack_ce);
}

TEST(OuterGradient, MatchesLinearizedFiniteDifferences) {
  const Graph g = small_synthetic(8, 8);
  for (auto mode : {LogicGradient::kAnalytic, LogicGradient::kFiniteDifference}) {
    auto cfg = tiny_config();
    cfg.trigger_size = 2;
    cfg.beta = 0.8;
    cfg.margin_t = 50.0;
    cfg.logic_gradient = mode;
    cfg.surrogate_act = Activation::kSoftplus;
    const auto gen = models::init_generator(4, 2, 5, Activation::kSoftplus, 3);
    const auto sur = models::init_classifier(Arch::kGcn, 4, 6, 3, Activation::kSoftplus, 4);
    const std::vector<NodeId> sampled{0, 2, 3, 6};
    const auto got = outer_objective_gradient(gen, sur, g, sampled, cfg);
    for (std::size_t k = 0; k < 4; ++k) {
      GeneratorParams probe = gen;
      DenseMatrix* targets[] = {&probe.w1, &probe.b1, &probe.w2, &probe.b2};
      DenseMatrix& m = *targets[k];
      const DenseMatrix base = m;
      auto f = [&](std::span<const double> x) {
        std::copy(x.begin(), x.end(), m.values().begin());
        return outer_objective_linearized(probe, gen, sur, g, sampled, cfg).total();
      };
      const auto fd = grad::finite_diff_gradient(f, base.values(), 1e-5);
      double diff = 0.0, norm = 0.0;
      for (std::size_t i = 0; i < fd.size(); ++i) {
        diff += std::pow(got.grads[k].values()[i] - fd[i], 2);
        norm += fd[i] * fd[i];
      }
      EXPECT_LT(std::sqrt(diff), 5e-3 * std::max(1.0, std::sqrt(norm))) << "param " << k;
    }
  }
}

TEST(OuterGradient, AnalyticAndFiniteDifferenceModesAgree) {
  const Graph g = small_synthetic(20, 9);
  auto cfg = tiny_config();
  cfg.margin_t = 100.0;
  cfg.surrogate_act = Activation::kSoftplus;
  const auto gen = models::init_generator(4, 3, 5, Activation::kRelu, 5);
  const auto sur = models::init_classifier(Arch::kGcn, 4, 6, 3, Activation::kSoftplus, 6);
  const std::vector<NodeId> sampled{3, 4, 11};
  const auto a = outer_objective_gradient(gen, sur, g, sampled, cfg);
  cfg.logic_gradient = LogicGradient::kFiniteDifference;
  const auto b = outer_objective_gradient(gen, sur, g, sampled, cfg);
  EXPECT_NEAR(a.losses.l_a, b.losses.l_a, 1e-12);
  for (std::size_t k = 0; k < 4; ++k) {
    for (std::size_t i = 0; i < a.grads[k].size(); ++i) {
      EXPECT_NEAR(a.grads[k].values()[i], b.grads[k].values()[i], 1e-4 * std::max(1.0, std::abs(a.grads[k].values()[i])));
    }
  }
}

TEST(Bilevel, ZeroEpochsReturnsInitialization) {
  const Graph g = small_synthetic(40, 10);
  auto cfg = tiny_config();
  cfg.outer_epochs = 0;
  const auto labeled = iota_nodes(40);
  const PoisonPlan plan{{1, 2}, {0, 0}, false};
  const auto r = run_bilevel(g, labeled, plan, cfg);
  EXPECT_EQ(r.generator, models::init_generator(4, 3, cfg.generator_hidden, cfg.generator_act, cfg.seed + 2));
  EXPECT_TRUE(r.history.empty());
  const auto triggers = generate_triggers(r.generator, g, plan.poisoned);
  EXPECT_EQ(r.backdoored.graph, build_backdoored(g, plan.poisoned, triggers).graph);
}

TEST(Bilevel, DeterministicUnderSeed) {
  const Graph g = small_synthetic(40, 11);
  const auto labeled = iota_nodes(40);
  const PoisonPlan plan{{3, 4, 9}, {0, 0, 0}, false};
  const auto a = run_bilevel(g, labeled, plan, tiny_config());
  const auto b = run_bilevel(g, labeled, plan, tiny_config());
  EXPECT_EQ(a.generator, b.generator);
  EXPECT_EQ(a.surrogate, b.surrogate);
  EXPECT_EQ(a.history.size(), 3u);
}

TEST(Bilevel, ToyRunFoolsItsSurrogate) {
  graph::SyntheticSpec spec;
  spec.n = 200;
  spec.num_classes = 3;
  spec.dim = 8;
  spec.noise_scale = 1.0;
  spec.feature_bound = 2.0;
  spec.class_means = graph::random_class_means(3, 8, 1.0, 21);
  spec.seed = 21;
  const Graph g = graph::generate_synthetic(spec);
  const auto split = graph::inductive_split(g, 0.5, 22);
  const auto train = graph::induced_subgraph(g, split.train_labeled);
  const auto labeled = iota_nodes(train.graph.num_nodes());

  AttackConfig cfg;
  cfg.delta_p = 10;
  cfg.outer_epochs = 50;
  cfg.beta = 0.1;
  cfg.seed = 23;
  const auto sel = models::init_classifier(Arch::kGcn, 8, 16, 3, Activation::kRelu, 1);
  const auto plan = select_poisoned(sel, train.graph, labeled, 0, cfg.delta_p);
  const auto r = run_bilevel(train.graph, labeled, plan, cfg);
  ASSERT_FALSE(r.diverged) << r.diagnostics;

  std::size_t hits = 0, total = 0;
  for (NodeId v : split.test_target) {
    if (g.label(v) == 0) continue;
    const auto t = generate_triggers(r.generator, g, std::vector<NodeId>{v});
    const auto view = attach_trigger(g, v, t[0]);
    hits += models::predict_labels(models::classifier_logits(r.surrogate, view.augmented), std::vector<NodeId>{v})[0] == 0;
    ++total;
  }
  EXPECT_GE(static_cast<double>(hits) / static_cast<double>(total), 0.9);
}

TEST(Erba, PlanAndTriggers) {
  const Graph g = small_synthetic(80, 12);
  const auto train = iota_nodes(40);
  const auto atk = erba_attack(g, train, 2, 5, 3, 4);
  EXPECT_EQ(atk.plan.poisoned.size(), 5u);
  for (NodeId v : atk.plan.poisoned) {
    EXPECT_LT(v, 40u);
    EXPECT_EQ(g.label(v), 2);
  }
  EXPECT_EQ(atk.triggers.size(), 5u);
  for (const auto& t : atk.triggers) EXPECT_EQ(t.size(), 3u);
  const auto again = erba_attack(g, train, 2, 5, 3, 4);
  EXPECT_EQ(again.plan.poisoned, atk.plan.poisoned);
  const auto src = erba_source(atk.sampler, 3, atk.edge_prob, 9);
  const std::vector<NodeId> hosts{50, 60};
  const auto t1 = src(g, hosts);
  const auto t2 = src(g, hosts);
  EXPECT_EQ(t1[1].features, t2[1].features);
}

TEST(AttackConfig, Validation) {
  AttackConfig c;
  EXPECT_NO_THROW(c.validate());
  c.delta_p = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = AttackConfig{};
  c.beta = -1;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = AttackConfig{};
  c.inner_steps = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
}
