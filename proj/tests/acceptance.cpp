// Acceptance run: one PASS/FAIL line per criterion. A FAIL does not change
// the exit status; only an exception or crash does.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <sstream>
#include <string>

#include "bdlab/lab.hpp"
#include "grad_check.hpp"
#include "test_util.hpp"

using namespace bdlab;
using attack::AttachedView;
using attack::Trigger;
using grad::Tape;
using grad::Var;
using models::Activation;
using models::Arch;
using models::ClassifierParams;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = true;
  std::string detail;
};

void report(int id, const char* name, const Outcome& o, double secs) {
  std::printf("criterion %2d %s: %s (%s) [%.1fs]\n", id, o.pass ? "PASS" : "FAIL", name, o.detail.c_str(), secs);
  std::fflush(stdout);
}

std::string fmt(const char* f, double a) {
  char buf[96];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

DenseMatrix dense_apply(const std::vector<std::vector<double>>& p, const DenseMatrix& x) {
  DenseMatrix out(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t k = 0; k < x.rows(); ++k) {
      if (p[i][k] == 0.0) continue;
      for (std::size_t j = 0; j < x.cols(); ++j) out(i, j) += p[i][k] * x(k, j);
    }
  }
  return out;
}

DenseMatrix dense_matmul(const DenseMatrix& a, const DenseMatrix& b) {
  DenseMatrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t k = 0; k < a.cols(); ++k) {
      for (std::size_t j = 0; j < b.cols(); ++j) out(i, j) += a(i, k) * b(k, j);
    }
  }
  return out;
}

std::vector<std::vector<double>> dense_operator(const graph::Graph& g, Arch arch, double eps) {
  if (arch == Arch::kGcn) return fixture::dense_normalized(g, true);
  const std::size_t n = g.num_nodes();
  std::vector<std::vector<double>> a(n, std::vector<double>(n, 0.0));
  for (const auto& e : g.edges()) a[e.u][e.v] = a[e.v][e.u] = 1.0;
  for (std::size_t i = 0; i < n; ++i) a[i][i] = 1.0 + eps;
  return a;
}

double min_abs(const DenseMatrix& m) {
  double out = std::numeric_limits<double>::infinity();
  for (double v : m.values()) out = std::min(out, std::abs(v));
  return out;
}

// ---- 1: gradients of classifiers, generators and saliency losses

Outcome criterion_gradients() {
  constexpr double kTol = 1e-4;
  constexpr double kKink = 1e-3;
  Rng rng(101);
  double worst = 0.0;
  std::size_t models_checked = 0;
  std::string worst_kind;
  auto record = [&](double err, const char* kind) {
    ++models_checked;
    if (err > worst) {
      worst = err;
      worst_kind = kind;
    }
  };

  // classifiers: parameters and input features
  while (models_checked < 40) {
    const std::size_t n = 5 + rng.below(8);
    const auto g = fixture::random_graph(n, 3, 3, 0.3, rng.below(1u << 30));
    const Arch arch = models_checked % 2 ? Arch::kGin : Arch::kGcn;
    const Activation act = (models_checked / 2) % 2 ? Activation::kSoftplus : Activation::kRelu;
    const double eps = arch == Arch::kGin ? 0.2 : 0.0;
    const auto op = models::propagation_operator(g, arch, eps);
    const DenseMatrix x = g.features();
    const DenseMatrix w1 = fixture::random_matrix(3, 4, rng);
    const DenseMatrix w2 = fixture::random_matrix(4, 3, rng);
    if (act == Activation::kRelu) {
      const DenseMatrix pre = op->apply(dense_matmul(x, w1));
      if (min_abs(pre) < kKink) continue;
    }
    std::vector<std::size_t> rows(n);
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    const std::vector<int> labels(g.labels().begin(), g.labels().end());
    const auto r = fixture::check_gradients(
        [&](Tape& t, const std::vector<Var>& v) {
          return t.cross_entropy(models::classifier_forward(t, op, v[0], v[1], v[2], act), rows, labels);
        },
        {x, w1, w2});
    record(r.max_rel_error, "classifier");
  }

  // generators: parameters and host features
  while (models_checked < 70) {
    const std::size_t d = 2 + rng.below(3), s = 2 + rng.below(3), b = 1 + rng.below(3);
    const Activation act = models_checked % 2 ? Activation::kSoftplus : Activation::kRelu;
    auto gen = models::init_generator(d, s, 5, act, rng.below(1u << 30));
    for (double& v : gen.b1.values()) v = rng.uniform(-0.5, 0.5);
    for (double& v : gen.b2.values()) v = rng.uniform(-0.5, 0.5);
    const DenseMatrix hosts = fixture::random_matrix(b, d, rng);
    if (act == Activation::kRelu) {
      DenseMatrix pre = dense_matmul(hosts, gen.w1);
      for (std::size_t i = 0; i < b; ++i) {
        for (std::size_t j = 0; j < pre.cols(); ++j) pre(i, j) += gen.b1(0, j);
      }
      if (min_abs(pre) < kKink) continue;
    }
    const DenseMatrix rf = fixture::random_matrix(b * s, d, rng);
    const DenseMatrix ra = fixture::random_matrix(b, models::trigger_pair_count(s), rng);
    const auto r = fixture::check_gradients(
        [&](Tape& t, const std::vector<Var>& v) {
          const auto out = models::generator_forward(t, {v[1], v[2], v[3], v[4]}, v[0], s, d, act);
          Var f = out.features;
          Var loss = t.add(t.sum(t.hadamard(f, t.constant(rf))), t.scale(t.sum(t.hadamard(f, f)), 0.5));
          return t.add(loss, t.sum(t.hadamard(out.adjacency_logits, t.constant(ra))));
        },
        {hosts, gen.w1, gen.b1, gen.w2, gen.b2});
    record(r.max_rel_error, "generator");
  }

  // saliency and host logits on trigger-attached view batches (double backward)
  while (models_checked < 100) {
    const std::size_t n = 8 + rng.below(6), s = 3;
    const auto g = fixture::random_graph(n, 3, 3, 0.25, rng.below(1u << 30));
    const Arch arch = models_checked % 2 ? Arch::kGin : Arch::kGcn;
    const auto scope = (models_checked / 2) % 2 ? models::NeighborScope::kTwoHop : models::NeighborScope::kOneHop;
    const std::vector<NodeId> hosts{static_cast<NodeId>(rng.below(n)), static_cast<NodeId>(rng.below(n))};
    const auto batch = models::build_view_batch(g, hosts, s, scope);
    const DenseMatrix tf = fixture::random_matrix(hosts.size() * s, 3, rng);
    const DenseMatrix slots = fixture::random_matrix(hosts.size() * models::trigger_pair_count(s), 1, rng, 0.2, 1.0);
    const DenseMatrix w1 = fixture::random_matrix(3, 4, rng);
    const DenseMatrix w2 = fixture::random_matrix(4, 3, rng);
    const DenseMatrix weights = fixture::random_matrix(batch.num_rows(), 1, rng);
    const std::size_t cls = rng.below(3);
    const std::vector<std::size_t> host_rows{0, 1};
    const std::vector<int> target(2, static_cast<int>(cls));
    const double eps = arch == Arch::kGin ? 0.1 : 0.0;
    const auto r = fixture::check_gradients(
        [&](Tape& t, const std::vector<Var>& v) {
          auto op = models::view_operator(t, batch, arch, eps, v[1]);
          Var x = models::view_features(t, batch, g, v[0]);
          Var sal = models::view_saliency(t, batch, op, x, v[2], v[3], Activation::kSoftplus, cls);
          Var logits = models::view_host_logits(t, batch, op, x, v[2], v[3], Activation::kSoftplus);
          return t.add(t.sum(t.hadamard(sal, t.constant(weights))), t.cross_entropy(logits, host_rows, target));
        },
        {tf, slots, w1, w2});
    record(r.max_rel_error, "saliency");
  }

  Outcome o;
  o.pass = worst <= kTol;
  o.detail = std::to_string(models_checked) + " models, worst relative error " + fmt("%.2e", worst) + " (" +
             worst_kind + ")";
  return o;
}

// ---- 2: forward passes against dense evaluation

Outcome criterion_oracle() {
  Rng rng(202);
  double worst_fwd = 0.0, worst_adj = 0.0;
  std::size_t graphs = 0;
  for (std::size_t n : {1u, 2u, 3u, 5u, 8u, 13u, 21u, 34u, 50u, 64u}) {
    for (double p : {0.0, 0.05, 0.2, 0.6}) {
      const auto g = fixture::random_graph(n, 4, 3, p, rng.below(1u << 30));
      ++graphs;
      const auto want = fixture::dense_normalized(g, true);
      DenseMatrix eye(n, n);
      for (std::size_t i = 0; i < n; ++i) eye(i, i) = 1.0;
      const DenseMatrix got = graph::normalized_adjacency(g, true).apply(eye);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) worst_adj = std::max(worst_adj, std::abs(got(i, j) - want[i][j]));
      }
      for (Arch arch : {Arch::kGcn, Arch::kGin}) {
        for (Activation act : {Activation::kRelu, Activation::kSoftplus}) {
          auto params = models::init_classifier(arch, 4, 6, 3, act, rng.below(1u << 30));
          params.gin_eps = arch == Arch::kGin ? 0.3 : 0.0;
          const auto P = dense_operator(g, arch, params.gin_eps);
          DenseMatrix h = dense_apply(P, dense_matmul(g.features(), params.w1));
          for (double& v : h.values()) v = grad::activate(v, act);
          const DenseMatrix oracle = dense_apply(P, dense_matmul(h, params.w2));
          const DenseMatrix out = arch == Arch::kGcn
                                      ? models::gcn_forward(params, *models::propagation_operator(g, arch), g.features())
                                      : models::gin_forward(params, g, g.features());
          for (std::size_t i = 0; i < out.values().size(); ++i) {
            worst_fwd = std::max(worst_fwd, fixture::rel_err(out.values()[i], oracle.values()[i]));
          }
        }
      }
    }
  }
  Outcome o;
  o.pass = worst_fwd <= 1e-8 && worst_adj <= 1e-8;
  o.detail = std::to_string(graphs) + " graphs, forward " + fmt("%.1e", worst_fwd) + ", adjacency " +
             fmt("%.1e", worst_adj);
  return o;
}

// ---- 3: closed-form examples

ClassifierParams readout_gin(double r) {
  ClassifierParams p;
  p.arch = Arch::kGin;
  p.w1 = DenseMatrix{{1.0}};
  p.w2 = DenseMatrix{{r, 0.3}};
  return p;
}

Trigger star(std::size_t s, std::size_t d, double feature) {
  Trigger t;
  t.features = DenseMatrix(s, d, feature);
  t.adjacency = DenseMatrix(s, s);
  for (std::size_t a = 1; a < s; ++a) t.adjacency(0, a) = t.adjacency(a, 0) = 1.0;
  return t;
}

graph::Graph pendants(std::size_t k) {
  std::vector<graph::Edge> edges;
  for (NodeId c = 1; c <= k; ++c) edges.push_back({0, c});
  return graph::Graph(2, DenseMatrix(k + 1, 1, 1.0), std::vector<int>(k + 1, 0), edges);
}

Outcome criterion_closed_forms() {
  std::vector<std::string> misses;
  std::size_t checks = 0;
  auto expect = [&](const std::string& what, double got, double want, double tol = 1e-9) {
    ++checks;
    if (!(std::abs(got - want) <= tol)) misses.push_back(what + " got " + fmt("%.10g", got));
  };

  const double onehot[] = {1.0, 0.0, 0.0};
  const double uniform[] = {0.25, 0.25, 0.25, 0.25};
  const double skew[] = {0.7, 0.2, 0.1};
  expect("U(one-hot)", attack::uncertainty_score(onehot, 0), 0.0);
  expect("U(uniform 4)", attack::uncertainty_score(uniform, 0), 0.75 + std::log(4.0));
  expect("U(uniform 4) tagged", attack::uncertainty_score(uniform, 0), 2.13629, 5e-6);
  expect("U(.7,.2,.1)", attack::uncertainty_score(skew, 0),
         0.3 - (0.7 * std::log(0.7) + 0.2 * std::log(0.2) + 0.1 * std::log(0.1)));
  expect("U(.7,.2,.1) tagged", attack::uncertainty_score(skew, 0), 1.10182, 5e-6);

  const graph::Graph host(1, DenseMatrix{{1.0, 2.0}}, {0}, {});
  Trigger single;
  single.features = DenseMatrix{{2.0, 4.0}};
  single.adjacency = DenseMatrix(1, 1);
  const std::vector<AttachedView> same{attack::attach_trigger(host, 0, single)};
  expect("L_U identical", attack::unnoticeable_loss(same), std::exp(-1.0));
  single.features = DenseMatrix{{-2.0, 1.0}};
  const std::vector<AttachedView> orth{attack::attach_trigger(host, 0, single)};
  expect("L_U orthogonal", attack::unnoticeable_loss(orth), 1.0);
  Trigger tri;
  tri.features = DenseMatrix{{1.0, 2.0}, {1.0, 2.0}, {1.0, 2.0}};
  tri.adjacency = DenseMatrix{{0, 1, 1}, {1, 0, 1}, {1, 1, 0}};
  const std::vector<AttachedView> triangle{attack::attach_trigger(host, 0, tri)};
  expect("L_U triangle", attack::unnoticeable_loss(triangle), 4.0 * std::exp(-1.0));

  // GIN with unit features: trigger saliency 5r vs clean 2r, and 4r vs 8r
  const std::vector<AttachedView> views{attack::attach_trigger(pendants(1), 0, star(4, 1, 1.0)),
                                        attack::attach_trigger(pendants(4), 0, star(3, 1, 1.0))};
  expect("L_A inactive", attack::logic_poison_loss(readout_gin(1.0), std::span(views).first(1), 0, 1.0), 0.0);
  expect("L_A 1 vs 2", attack::logic_poison_loss(readout_gin(0.25), std::span(views).last(1), 0, 1.0), 2.0);
  expect("L_A two views", attack::logic_poison_loss(readout_gin(0.5), views, 0, 0.0), 2.0);

  expect("bound gamma=1", shield::theorem_bound({100, 1.0, 4, 1, 2}), 1.0);
  expect("bound equal means", shield::theorem_bound({100, 0.3, 4, 1, 0}), 1.0);
  expect("bound example", shield::theorem_bound({100, 0.5, 4, 1, 2}), 8.0 * std::exp(-6.25));
  expect("bound tagged", shield::theorem_bound({100, 0.5, 4, 1, 2}), 0.01544, 5e-6);

  const std::set<NodeId> trig{7, 8, 9};
  expect("IRT saturated", shield::irt_fraction({{7, 5.0}, {8, 4.0}, {9, 3.0}, {1, 2.0}}, trig, 3), 1.0);
  expect("IRT none", shield::irt_fraction({{7, 0.1}, {8, 0.1}, {9, 0.1}, {1, 2}, {2, 2}, {3, 2}}, trig, 3), 0.0);
  {
    // host 0 alone with its trigger, host 1 with four pendants that outrank it
    std::vector<graph::Edge> edges;
    for (NodeId c = 2; c <= 5; ++c) edges.push_back({1, c});
    const graph::Graph base(2, DenseMatrix(6, 1, 1.0), std::vector<int>(6, 0), edges);
    const auto t = star(3, 1, 1.0);
    const auto bd = attack::build_backdoored(base, std::vector<NodeId>{0, 1}, std::vector<Trigger>{t, t});
    ClassifierParams p = readout_gin(1.0);
    p.w2 = DenseMatrix{{1.0, 0.5}};
    expect("IRT half", shield::important_rate_of_triggers(p, bd.graph, bd.provenance, 0, 3), 0.5);
  }

  Outcome o;
  o.pass = misses.empty();
  o.detail = std::to_string(checks - misses.size()) + "/" + std::to_string(checks) + " values match";
  for (const auto& m : misses) o.detail += "; " + m;
  return o;
}

// ---- 4, 5, 7, 8: desk-scale attack runs

lab::RunConfig desk_config(std::vector<std::pair<std::string, std::string>> extra) {
  std::vector<std::pair<std::string, std::string>> o{{"out_dir", "unused"}, {"n", "2000"},
                                                     {"num_classes", "5"},  {"dim", "32"},
                                                     {"homophily", "0.8"},  {"avg_degree", "6"},
                                                     {"delta_p", "40"},     {"trigger_size", "3"},
                                                     {"outer_epochs", "200"}, {"targets", "gcn,gin"},
                                                     {"repeats", "5"},      {"irt_k", "3"}};
  o.insert(o.end(), extra.begin(), extra.end());
  return lab::parse_config_text("", o);
}

struct Means {
  std::map<std::pair<std::string, std::string>, lab::SummaryRow> by_key;
  const lab::SummaryRow& at(const std::string& method, const std::string& defense) const {
    return by_key.at({method, defense});
  }
};

Means group_means(const std::vector<lab::MetricsRow>& rows) {
  Means m;
  for (const auto& s : lab::summarize(rows)) m.by_key[{s.method, s.defense}] = s;
  return m;
}

void print_table(const std::vector<lab::MetricsRow>& rows) {
  std::istringstream table(lab::format_summary_table(lab::summarize(rows)));
  for (std::string line; std::getline(table, line);) std::printf("    %s\n", line.c_str());
}

// ---- 6: bound against the empirical rate

Outcome criterion_theorem() {
  graph::SyntheticSpec spec;
  spec.n = 2000;
  spec.num_classes = 5;
  spec.dim = 8;
  spec.noise_scale = 0.5;
  spec.feature_bound = 1.0;
  spec.class_means = graph::random_class_means(5, 8, 1.0, 606);
  spec.seed = 606;
  shield::TheoremOptions opt;
  opt.degree = 50;
  opt.trials = 50;
  opt.seed = 606;
  std::vector<double> grid;
  for (int k = 0; k <= 10; ++k) grid.push_back(k / 10.0);
  const auto table = shield::theorem_harness(spec, grid, opt);

  Outcome o;
  std::size_t informative = 0;
  double prev = -1.0;
  for (const auto& r : table.rows) {
    if (r.trials < 50) o.pass = false;
    if (r.bound < prev) o.pass = false;
    prev = r.bound;
    if (r.bound < 1.0) {
      ++informative;
      if (r.empirical_rate > r.bound) {
        o.pass = false;
        o.detail += fmt("gamma %.1f violates; ", r.gamma);
      }
    }
    std::printf("    gamma %.1f  empirical %.3f  bound %.4g\n", r.gamma, r.empirical_rate, r.bound);
  }
  o.detail += std::to_string(table.rows.size()) + " rows, " + std::to_string(informative) +
              " with bound < 1, bound monotone in gamma: " + (o.pass ? "yes" : "see rows");
  return o;
}

// ---- 9: byte-identical metrics

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome criterion_determinism() {
  std::vector<std::string> csv;
  for (int k = 0; k < 2; ++k) {
    const auto dir = fixture::scratch_dir("acceptance_det_" + std::to_string(k));
    const auto config = lab::parse_config_text(
        "", {{"out_dir", dir.string()}, {"n", "400"}, {"dim", "16"}, {"delta_p", "10"}, {"outer_epochs", "20"},
             {"defenses", "none,prune,degree,gm"}, {"repeats", "2"}});
    lab::run_experiment(config);
    csv.push_back(slurp(dir / "metrics.csv"));
  }
  Outcome o;
  o.pass = !csv[0].empty() && csv[0] == csv[1];
  o.detail = std::to_string(std::count(csv[0].begin(), csv[0].end(), '\n')) + " lines, " +
             (o.pass ? "identical" : "different");
  return o;
}

// ---- 10: outer-epoch cost against graph size

double outer_epoch_seconds(std::size_t n) {
  auto config = desk_config({{"n", std::to_string(n)}});
  const auto data = lab::load_dataset(config);
  const auto train = graph::induced_subgraph(data.graph, data.split.train_labeled);
  std::vector<NodeId> labeled(train.graph.num_nodes());
  std::iota(labeled.begin(), labeled.end(), NodeId{0});
  std::vector<NodeId> candidates;
  for (NodeId v : labeled) {
    if (train.graph.label(v) == config.attack.target_class) candidates.push_back(v);
  }
  const auto plan = attack::plan_from_scores(candidates, std::vector<double>(candidates.size(), 0.0),
                                             config.attack.delta_p);
  auto timed = [&](std::size_t epochs) {
    auto ac = config.attack;
    ac.outer_epochs = epochs;
    ac.seed = config.seed;
    double best = std::numeric_limits<double>::infinity();
    for (int rep = 0; rep < 3; ++rep) {
      const auto t0 = Clock::now();
      attack::run_bilevel(train.graph, labeled, plan, ac);
      best = std::min(best, seconds_since(t0));
    }
    return best;
  };
  return (timed(11) - timed(1)) / 10.0;
}

Outcome criterion_scaling() {
  const double small = outer_epoch_seconds(2000);
  const double large = outer_epoch_seconds(4000);
  Outcome o;
  const double ratio = large / small;
  o.pass = ratio <= 2.5;
  o.detail = fmt("%.1f ms", 1e3 * small) + " at n=2000, " + fmt("%.1f ms", 1e3 * large) + " at n=4000, ratio " +
             fmt("%.2f", ratio);
  return o;
}

template <typename F>
void run(int id, const char* name, F&& f) {
  const auto t0 = Clock::now();
  const Outcome o = f();
  report(id, name, o, seconds_since(t0));
}

}  // namespace

int main() {
  run(1, "gradient check", criterion_gradients);
  run(2, "dense oracle", criterion_oracle);
  run(3, "closed forms", criterion_closed_forms);

  // one shared desk-scale run feeds criteria 4, 5 and 7
  const auto t0 = Clock::now();
  const auto main_run = lab::run_pipeline(desk_config({{"defenses", "none,prune,degree"}}));
  const double main_secs = seconds_since(t0);
  print_table(main_run.rows);
  for (const auto& n : main_run.manifest.notes) std::printf("    note: %s\n", n.c_str());
  const Means m = group_means(main_run.rows);

  run(4, "attack gap", [&] {
    const double ba = m.at("ba-logic", "none").asr->mean;
    const double erba = m.at("erba-baseline", "none").asr->mean;
    const double drop = m.at("clean-only", "none").clean_acc->mean - m.at("ba-logic", "none").clean_acc->mean;
    Outcome o;
    o.pass = ba >= 0.85 && erba <= 0.40 && drop <= 0.03;
    o.detail = fmt("ASR ba-logic %.3f", ba) + fmt(", erba %.3f", erba) + fmt(", clean-accuracy drop %.3f", drop) +
               fmt(", shared run %.0fs", main_secs);
    return o;
  });
  run(5, "IRT separation", [&] {
    const double ba = m.at("ba-logic", "none").irt->mean;
    const double erba = m.at("erba-baseline", "none").irt->mean;
    Outcome o;
    o.pass = ba >= 2.0 * erba && ba >= 0.6;
    o.detail = fmt("IRT ba-logic %.3f", ba) + fmt(", erba %.3f", erba);
    return o;
  });
  run(6, "theorem bound", criterion_theorem);
  run(7, "defense resilience", [&] {
    const double base = m.at("ba-logic", "none").asr->mean;
    const double pruned = m.at("ba-logic", "prune").asr->mean;
    const double rtc = m.at("ba-logic", "degree").rtc->mean;
    const double kept = base > 0.0 ? pruned / base : 0.0;
    Outcome o;
    o.pass = kept >= 0.8 && rtc >= 0.75;
    o.detail = fmt("pruned ASR %.3f", pruned) + fmt(" keeps %.3f of undefended", kept) + fmt(", RTC %.3f", rtc);
    return o;
  });
  run(8, "budget monotonicity", [&] {
    std::vector<double> asr;
    for (const char* budget : {"10", "20"}) {
      const auto r = lab::run_pipeline(desk_config({{"methods", "ba-logic"}, {"delta_p", budget}}));
      asr.push_back(group_means(r.rows).at("ba-logic", "none").asr->mean);
    }
    asr.push_back(m.at("ba-logic", "none").asr->mean);
    Outcome o;
    o.pass = asr[1] >= asr[0] - 0.05 && asr[2] >= asr[1] - 0.05;
    o.detail = fmt("ASR %.3f", asr[0]) + fmt(" / %.3f", asr[1]) + fmt(" / %.3f at budget 10/20/40", asr[2]);
    return o;
  });
  run(9, "determinism", criterion_determinism);
  run(10, "scaling", criterion_scaling);
  return 0;
}
