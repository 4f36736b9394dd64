#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <numeric>
#include <set>

#include "bdlab/graph_io.hpp"
#include "bdlab/lab.hpp"

namespace bdlab::lab {

namespace fs = std::filesystem;

namespace {

// Seed offsets per stage, all derived from the master seed.
constexpr std::uint64_t kMeansSeed = 11;
constexpr std::uint64_t kSplitSeed = 12;
constexpr std::uint64_t kSelectorSeed = 4;
constexpr std::uint64_t kErbaSeed = 5;
constexpr std::uint64_t kErbaTestSeed = 6;
constexpr std::uint64_t kVictimSeed = 7;

std::vector<NodeId> labeled_nodes(const Graph& g) {
  std::vector<NodeId> out;
  for (NodeId v = 0; v < g.num_nodes(); ++v) {
    if (g.is_labeled(v)) out.push_back(v);
  }
  return out;
}

double surviving_fraction(const Graph& before, const Graph& after, std::span<const attack::Provenance> prov) {
  const auto b = attack::trigger_edges(before, prov);
  if (b.empty()) return 1.0;
  return static_cast<double>(attack::trigger_edges(after, prov).size()) / static_cast<double>(b.size());
}

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

void add_time(RunManifest& m, const std::string& stage, double s) {
  for (auto& [k, v] : m.stage_seconds) {
    if (k == stage) {
      v += s;
      return;
    }
  }
  m.stage_seconds.emplace_back(stage, s);
}

// Output layout shared by the stage commands and the pipeline.
struct Layout {
  fs::path root;
  fs::path nodes() const { return root / "data" / "nodes.txt"; }
  fs::path edges() const { return root / "data" / "edges.txt"; }
  fs::path split() const { return root / "data" / "split.txt"; }
  fs::path method_dir(Method m) const { return root / method_name(m); }
  fs::path bd_nodes(Method m) const { return method_dir(m) / "backdoored_nodes.txt"; }
  fs::path bd_edges(Method m) const { return method_dir(m) / "backdoored_edges.txt"; }
  fs::path provenance(Method m) const { return method_dir(m) / "provenance.txt"; }
  fs::path generator(Method m) const { return method_dir(m) / "generator.ckpt"; }
  fs::path def_nodes(Method m, Defense d) const {
    return method_dir(m) / (std::string("defended-") + defense_name(d) + "_nodes.txt");
  }
  fs::path def_edges(Method m, Defense d) const {
    return method_dir(m) / (std::string("defended-") + defense_name(d) + "_edges.txt");
  }
  fs::path target(Method m, Defense d, Arch a, std::uint64_t seed) const {
    return method_dir(m) /
           (std::string("target-") + defense_name(d) + "-" + models::arch_name(a) + "-" + std::to_string(seed) + ".ckpt");
  }
  fs::path metrics() const { return root / "metrics.csv"; }
  fs::path manifest() const { return root / "manifest.json"; }
};

void ensure_parent(const fs::path& p) { fs::create_directories(p.parent_path()); }

void save_attack(const Layout& out, const AttackArtifacts& a, std::vector<fs::path>& written) {
  ensure_parent(out.bd_nodes(a.method));
  graph::save_graph(a.backdoored.graph, out.bd_nodes(a.method), out.bd_edges(a.method));
  attack::save_provenance(a.backdoored.provenance, out.provenance(a.method));
  written.insert(written.end(), {out.bd_nodes(a.method), out.bd_edges(a.method), out.provenance(a.method)});
  if (a.generator) {
    models::save_generator(*a.generator, out.generator(a.method));
    written.push_back(out.generator(a.method));
  }
}

// Rebuilds the attack artifacts of an earlier `attack` run from its files.
AttackArtifacts load_attack(const RunConfig& config, const Dataset& data, Method method, const Layout& out) {
  AttackArtifacts a;
  a.method = method;
  a.train = graph::induced_subgraph(data.graph, data.split.train_labeled);
  assert_inductive(a.train, data.split);
  if (method == Method::kCleanOnly) {
    a.backdoored.graph = a.train.graph;
    return a;
  }
  a.backdoored.graph = graph::load_graph(out.bd_nodes(method), out.bd_edges(method));
  a.backdoored.provenance = attack::load_provenance(out.provenance(method));
  if (method == Method::kBaLogic) {
    a.generator = models::load_generator(out.generator(method));
    a.source = attack::generator_source(*a.generator);
  } else {
    const auto local = labeled_nodes(a.train.graph);
    auto erba = attack::erba_attack(a.train.graph, local, config.attack.target_class, config.attack.delta_p,
                                    config.attack.trigger_size, config.seed + kErbaSeed);
    a.source = attack::erba_source(erba.sampler, config.attack.trigger_size, erba.edge_prob,
                                   config.seed + kErbaTestSeed);
  }
  return a;
}

}  // namespace

Graph generate_data(const RunConfig& config) {
  auto spec = config.synthetic;
  spec.seed = config.seed;
  spec.class_means = graph::random_class_means(spec.num_classes, spec.dim, config.means_scale, config.seed + kMeansSeed);
  return graph::generate_synthetic(spec);
}

SplitMask make_split(const RunConfig& config, const Graph& graph) {
  return graph::inductive_split(graph, config.mask_fraction, config.seed + kSplitSeed);
}

Dataset load_dataset(const RunConfig& config) {
  Dataset d;
  d.graph = config.nodes_path.empty() ? generate_data(config) : graph::load_graph(config.nodes_path, config.edges_path);
  d.split = config.split_path.empty() ? make_split(config, d.graph) : graph::load_split(config.split_path);
  return d;
}

void assert_inductive(const graph::Subgraph& train, const SplitMask& split) {
  std::set<NodeId> test(split.test_target.begin(), split.test_target.end());
  test.insert(split.test_clean.begin(), split.test_clean.end());
  for (NodeId v : train.original_id) {
    if (test.count(v)) {
      throw std::logic_error("inductive guarantee violated: attack graph contains test node " + std::to_string(v));
    }
  }
}

AttackArtifacts run_attack(const RunConfig& config, const Dataset& data, Method method) {
  AttackArtifacts a;
  a.method = method;
  a.train = graph::induced_subgraph(data.graph, data.split.train_labeled);
  assert_inductive(a.train, data.split);
  const Graph& g = a.train.graph;
  const auto local = labeled_nodes(g);
  const int yt = config.attack.target_class;

  switch (method) {
    case Method::kCleanOnly:
      a.backdoored.graph = g;
      break;
    case Method::kBaLogic: {
      models::TrainHyper sel;
      sel.arch = Arch::kGcn;
      sel.epochs = config.selector_epochs;
      sel.hidden_dim = config.attack.surrogate_hidden;
      sel.learning_rate = config.attack.lr_surrogate;
      sel.weight_decay = config.attack.weight_decay;
      sel.seed = config.seed + kSelectorSeed;
      const auto selector = models::train_classifier(g, local, sel);
      const auto plan = attack::select_poisoned(selector, g, local, yt, config.attack.delta_p);
      auto ac = config.attack;
      ac.seed = config.seed;
      auto result = attack::run_bilevel(g, local, plan, ac);
      a.backdoored = std::move(result.backdoored);
      a.generator = result.generator;
      a.source = attack::generator_source(result.generator);
      a.history = std::move(result.history);
      a.diverged = result.diverged;
      a.diagnostics = std::move(result.diagnostics);
      break;
    }
    case Method::kErba: {
      auto erba = attack::erba_attack(g, local, yt, config.attack.delta_p, config.attack.trigger_size,
                                      config.seed + kErbaSeed);
      a.backdoored = attack::build_backdoored(g, erba.plan.poisoned, erba.triggers);
      a.source = attack::erba_source(erba.sampler, config.attack.trigger_size, erba.edge_prob,
                                     config.seed + kErbaTestSeed);
      break;
    }
  }
  return a;
}

DefendedGraph apply_defense(const RunConfig& config, Defense defense, const AttackArtifacts& attacked,
                            const Dataset& data) {
  const Graph& bd = attacked.backdoored.graph;
  const auto& prov = attacked.backdoored.provenance;
  const bool attacked_graph = attacked.method != Method::kCleanOnly;
  DefendedGraph out;
  switch (defense) {
    case Defense::kNone:
      out.graph = bd;
      if (attacked_graph) out.rtc = 1.0;
      break;
    case Defense::kPrune: {
      const double tau = shield::tune_prune_threshold(data.graph, config.prune_fraction);
      out.graph = shield::cosine_prune(bd, tau);
      out.eval_threshold = tau;
      if (attacked_graph) out.rtc = surviving_fraction(bd, out.graph, prov);
      break;
    }
    case Defense::kDegree: {
      auto r = shield::degree_prune_rtc(bd, prov, config.degree_top_pct, config.degree_edges);
      out.graph = std::move(r.graph);
      if (attacked_graph) out.rtc = r.rtc;
      break;
    }
    case Defense::kGradientMask: {
      auto hyper = config.target;
      hyper.arch = Arch::kGcn;
      hyper.seed = config.seed + kVictimSeed;
      out.graph = shield::gradient_mask_defense(bd, labeled_nodes(bd), config.gm_threshold, hyper);
      if (attacked_graph) out.rtc = surviving_fraction(bd, out.graph, prov);
      break;
    }
  }
  return out;
}

std::uint64_t target_seed(const RunConfig& config, std::size_t rep) { return config.seed + 1000 * rep; }

models::ClassifierParams train_target(const RunConfig& config, const Graph& training_graph, Arch arch,
                                      std::size_t rep) {
  auto hyper = config.target;
  hyper.arch = arch;
  hyper.seed = target_seed(config, rep);
  return models::train_classifier(training_graph, labeled_nodes(training_graph), hyper);
}

MetricsRow evaluate(const RunConfig& config, const Dataset& data, const AttackArtifacts& attacked,
                    const DefendedGraph& defended, const models::ClassifierParams& target, Defense defense,
                    std::uint64_t seed) {
  MetricsRow row{config.dataset, method_name(attacked.method), models::arch_name(target.arch), defense_name(defense),
                 seed, {}, {}, {}, {}};
  const Graph eval = defended.eval_threshold ? shield::cosine_prune(data.graph, *defended.eval_threshold) : data.graph;
  row.clean_acc = shield::clean_accuracy(target, eval, data.split.test_clean);
  if (attacked.method != Method::kCleanOnly) {
    const int yt = config.attack.target_class;
    row.asr = shield::attack_success_rate(target, eval, attacked.source, data.split.test_target, yt,
                                          defended.eval_threshold);
    row.irt = shield::important_rate_of_triggers(target, defended.graph, attacked.backdoored.provenance, yt,
                                                 config.irt_k);
    row.rtc = defended.rtc;
  }
  return row;
}

namespace {

struct StageFailure : std::runtime_error {
  StageFailure(std::string stage, const std::string& what) : std::runtime_error(what), stage(std::move(stage)) {}
  std::string stage;
};

template <typename F>
auto stage(RunManifest& m, const std::string& name, F&& f) {
  Stopwatch sw;
  try {
    if constexpr (std::is_void_v<decltype(f())>) {
      f();
      add_time(m, name, sw.seconds());
    } else {
      auto r = f();
      add_time(m, name, sw.seconds());
      return r;
    }
  } catch (const StageFailure&) {
    throw;
  } catch (const std::exception& e) {
    throw StageFailure(name, e.what());
  }
}

ExperimentResult run_impl(const RunConfig& config, const Layout* out) {
  ExperimentResult res;
  auto& m = res.manifest;
  m.config_hash = config_hash(config);
  m.resolved = resolved_fields(config);

  const Dataset data = stage(m, "data", [&] { return load_dataset(config); });
  if (out) {
    stage(m, "data", [&] {
      ensure_parent(out->nodes());
      graph::save_graph(data.graph, out->nodes(), out->edges());
      graph::save_split(data.split, out->split());
      m.outputs.insert(m.outputs.end(), {out->nodes(), out->edges(), out->split()});
    });
  }
  for (Method method : config.methods) {
    const std::string mname = method_name(method);
    const auto attacked = stage(m, "attack:" + mname, [&] { return run_attack(config, data, method); });
    if (attacked.diverged) m.notes.push_back(mname + " diverged: " + attacked.diagnostics);
    if (out) stage(m, "attack:" + mname, [&] { save_attack(*out, attacked, m.outputs); });
    for (Defense defense : config.defenses) {
      const auto defended = stage(m, "defend:" + std::string(defense_name(defense)),
                                  [&] { return apply_defense(config, defense, attacked, data); });
      for (Arch arch : config.targets) {
        for (std::size_t rep = 0; rep < config.repeats; ++rep) {
          const auto target = stage(m, "train-target", [&] { return train_target(config, defended.graph, arch, rep); });
          res.rows.push_back(stage(m, "evaluate", [&] {
            return evaluate(config, data, attacked, defended, target, defense, target_seed(config, rep));
          }));
        }
      }
    }
  }
  if (out) {
    stage(m, "report", [&] {
      write_metrics_csv(res.rows, out->metrics());
      m.outputs.push_back(out->metrics());
    });
  }
  return res;
}

void write_text(const fs::path& p, const std::string& text) {
  ensure_parent(p);
  std::ofstream f(p, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + p.string());
  f << text;
}

}  // namespace

ExperimentResult run_pipeline(const RunConfig& config) {
  try {
    return run_impl(config, nullptr);
  } catch (const StageFailure& e) {
    throw std::runtime_error("stage " + e.stage + " failed: " + e.what());
  }
}

ExperimentResult run_experiment(const RunConfig& config) {
  const Layout out{config.out_dir};
  fs::create_directories(config.out_dir);
  RunManifest failed;
  failed.config_hash = config_hash(config);
  failed.resolved = resolved_fields(config);
  try {
    auto res = run_impl(config, &out);
    res.manifest.outputs.push_back(out.manifest());
    write_text(out.manifest(), manifest_json(res.manifest));
    return res;
  } catch (const StageFailure& e) {
    // Remove everything under the layout a partial run may have written.
    std::error_code ec;
    fs::remove(out.metrics(), ec);
    fs::remove_all(config.out_dir / "data", ec);
    for (Method mth : {Method::kBaLogic, Method::kErba, Method::kCleanOnly}) fs::remove_all(out.method_dir(mth), ec);
    failed.status = "failed";
    failed.failed_stage = e.stage;
    failed.error = e.what();
    failed.outputs.push_back(out.manifest());
    write_text(out.manifest(), manifest_json(failed));
    throw std::runtime_error("stage " + e.stage + " failed: " + e.what());
  }
}

namespace {

Dataset stage_dataset(const RunConfig& config, const Layout& out) {
  Dataset d;
  if (!config.nodes_path.empty()) {
    d.graph = graph::load_graph(config.nodes_path, config.edges_path);
  } else if (fs::exists(out.nodes())) {
    d.graph = graph::load_graph(out.nodes(), out.edges());
  } else {
    throw std::runtime_error("no graph: set nodes_path/edges_path or run gen-data first");
  }
  if (!config.split_path.empty()) {
    d.split = graph::load_split(config.split_path);
  } else if (fs::exists(out.split())) {
    d.split = graph::load_split(out.split());
  } else {
    throw std::runtime_error("no split: set split_path or run split first");
  }
  return d;
}

DefendedGraph load_defended(const RunConfig& config, const Dataset& data, const AttackArtifacts& a, Defense defense,
                            const Layout& out) {
  DefendedGraph d;
  d.graph = graph::load_graph(out.def_nodes(a.method, defense), out.def_edges(a.method, defense));
  if (a.method != Method::kCleanOnly) d.rtc = surviving_fraction(a.backdoored.graph, d.graph, a.backdoored.provenance);
  if (defense == Defense::kPrune) d.eval_threshold = shield::tune_prune_threshold(data.graph, config.prune_fraction);
  return d;
}

void print_summary(const std::vector<MetricsRow>& rows) { std::cout << format_summary_table(summarize(rows)); }

}  // namespace

int run_command(const RunConfig& config) {
  const Layout out{config.out_dir};
  const std::string& cmd = config.command;
  if (cmd == "gen-data") {
    const Graph g = config.nodes_path.empty() ? generate_data(config) : graph::load_graph(config.nodes_path, config.edges_path);
    ensure_parent(out.nodes());
    graph::save_graph(g, out.nodes(), out.edges());
    std::cout << "wrote " << g.num_nodes() << " nodes, " << g.num_edges() << " edges (homophily "
              << graph::edge_homophily(g) << ")\n";
  } else if (cmd == "split") {
    const Graph g = config.nodes_path.empty() ? graph::load_graph(out.nodes(), out.edges())
                                              : graph::load_graph(config.nodes_path, config.edges_path);
    const auto s = make_split(config, g);
    ensure_parent(out.split());
    graph::save_split(s, out.split());
    std::cout << "train " << s.train_labeled.size() << ", target " << s.test_target.size() << ", clean "
              << s.test_clean.size() << "\n";
  } else if (cmd == "attack") {
    const auto data = stage_dataset(config, out);
    for (Method m : config.methods) {
      const auto a = run_attack(config, data, m);
      std::vector<fs::path> written;
      save_attack(out, a, written);
      std::cout << method_name(m) << ": " << a.backdoored.provenance.size() << " poisoned nodes";
      if (a.diverged) std::cout << " (diverged: " << a.diagnostics << ")";
      std::cout << "\n";
    }
  } else if (cmd == "defend") {
    const auto data = stage_dataset(config, out);
    for (Method m : config.methods) {
      const auto a = load_attack(config, data, m, out);
      for (Defense d : config.defenses) {
        const auto def = apply_defense(config, d, a, data);
        ensure_parent(out.def_nodes(m, d));
        graph::save_graph(def.graph, out.def_nodes(m, d), out.def_edges(m, d));
        std::cout << method_name(m) << "/" << defense_name(d) << ": " << def.graph.num_edges() << " edges kept\n";
      }
    }
  } else if (cmd == "train-target") {
    const auto data = stage_dataset(config, out);
    for (Method m : config.methods) {
      const auto a = load_attack(config, data, m, out);
      for (Defense d : config.defenses) {
        const auto def = load_defended(config, data, a, d, out);
        for (Arch arch : config.targets) {
          for (std::size_t rep = 0; rep < config.repeats; ++rep) {
            models::save_classifier(train_target(config, def.graph, arch, rep),
                                    out.target(m, d, arch, target_seed(config, rep)));
          }
        }
      }
    }
  } else if (cmd == "evaluate") {
    const auto data = stage_dataset(config, out);
    std::vector<MetricsRow> rows;
    for (Method m : config.methods) {
      const auto a = load_attack(config, data, m, out);
      for (Defense d : config.defenses) {
        const auto def = load_defended(config, data, a, d, out);
        for (Arch arch : config.targets) {
          for (std::size_t rep = 0; rep < config.repeats; ++rep) {
            const auto seed = target_seed(config, rep);
            rows.push_back(evaluate(config, data, a, def, models::load_classifier(out.target(m, d, arch, seed)), d, seed));
          }
        }
      }
    }
    write_metrics_csv(rows, out.metrics());
    print_summary(rows);
  } else if (cmd == "theorem") {
    auto spec = config.synthetic;
    spec.seed = config.seed;
    spec.class_means = graph::random_class_means(spec.num_classes, spec.dim, config.means_scale, config.seed + kMeansSeed);
    shield::TheoremOptions opt;
    opt.target_class = config.attack.target_class;
    opt.degree = config.theorem_degree;
    opt.trials = config.theorem_trials;
    opt.hyper = config.target;
    opt.hyper.arch = Arch::kGcn;
    opt.seed = config.seed;
    const auto table = shield::theorem_harness(spec, config.theorem_gammas, opt);
    std::string csv = "gamma,trials,empirical_rate,bound\n";
    char buf[128];
    for (const auto& r : table.rows) {
      std::snprintf(buf, sizeof buf, "%.6f,%zu,%.6f,%.6f\n", r.gamma, r.trials, r.empirical_rate, r.bound);
      csv += buf;
    }
    write_text(config.out_dir / "theorem.csv", csv);
    std::cout << csv << "source class " << table.source_class << ", squared mean distance " << table.mean_dist_sq
              << ", baseline rate " << table.baseline_rate << "\n";
    for (const auto& n : table.notes) std::cout << "note: " << n << "\n";
  } else if (cmd == "report") {
    std::vector<MetricsRow> rows;
    if (config.report_inputs.empty()) {
      rows = read_metrics_csv(out.metrics());
    } else {
      for (const auto& p : config.report_inputs) {
        auto more = read_metrics_csv(p);
        rows.insert(rows.end(), more.begin(), more.end());
      }
    }
    const auto summary = summarize(rows);
    write_text(config.out_dir / "summary.csv", format_summary_csv(summary));
    std::cout << format_summary_table(summary);
  } else if (cmd == "pipeline") {
    const auto res = run_experiment(config);
    print_summary(res.rows);
    for (const auto& n : res.manifest.notes) std::cout << "note: " << n << "\n";
  } else {
    throw ConfigError("unknown command: " + cmd);
  }
  return 0;
}

}  // namespace bdlab::lab
