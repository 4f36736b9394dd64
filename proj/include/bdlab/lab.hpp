#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "bdlab/attack.hpp"
#include "bdlab/shield.hpp"

namespace bdlab::lab {

using graph::Graph;
using graph::SplitMask;
using models::Arch;

/// Bad config or command line; the CLI maps it to exit code 1.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Method { kBaLogic, kErba, kCleanOnly };
enum class Defense { kNone, kPrune, kDegree, kGradientMask };

const char* method_name(Method m);
Method parse_method(const std::string& s);
const char* defense_name(Defense d);
Defense parse_defense(const std::string& s);

struct RunConfig {
  std::string command;
  std::uint64_t seed = 3407;
  std::filesystem::path out_dir;

  std::string dataset = "synthetic";
  std::filesystem::path nodes_path, edges_path, split_path;
  graph::SyntheticSpec synthetic{.n = 2000, .num_classes = 5, .dim = 32, .homophily = 0.8, .class_means = {},
                                 .noise_scale = 2.5, .feature_bound = 3.0, .avg_degree = 6.0, .seed = 3407};
  double means_scale = 1.0;
  double mask_fraction = 0.5;

  std::vector<Method> methods{Method::kBaLogic, Method::kErba, Method::kCleanOnly};
  std::vector<Arch> targets{Arch::kGcn, Arch::kGin};
  std::vector<Defense> defenses{Defense::kNone};
  std::size_t repeats = 1;
  std::size_t irt_k = 3;

  attack::AttackConfig attack;
  std::size_t selector_epochs = 200;
  models::TrainHyper target;

  double prune_fraction = 0.05;
  double degree_top_pct = 0.1;
  std::size_t degree_edges = 3;
  double gm_threshold = 0.5;

  std::vector<double> theorem_gammas{0.0, 0.2, 0.4, 0.6, 0.8, 1.0};
  std::size_t theorem_degree = 50;
  std::size_t theorem_trials = 50;

  std::vector<std::filesystem::path> report_inputs;
};

/// Every config key in a fixed order with its resolved value.
std::vector<std::pair<std::string, std::string>> resolved_fields(const RunConfig& config);

/// Documented keys with one-line descriptions.
std::vector<std::pair<std::string, std::string>> documented_keys();

/// Applies one `key = value` setting; unknown keys are rejected by name.
void set_field(RunConfig& config, const std::string& key, const std::string& value);

/// Reads a flat `key = value` file (`#` starts a comment), then applies the
/// overrides in order, then validates.
RunConfig parse_config(const std::optional<std::filesystem::path>& path,
                       const std::vector<std::pair<std::string, std::string>>& overrides);
RunConfig parse_config_text(const std::string& text,
                            const std::vector<std::pair<std::string, std::string>>& overrides);

/// Checks paths, ranges and required fields. Throws ConfigError.
void validate(const RunConfig& config);

/// FNV-1a over the resolved fields, as 16 hex digits.
std::string config_hash(const RunConfig& config);

struct MetricsRow {
  std::string dataset;
  std::string method;
  std::string target;
  std::string defense;
  std::uint64_t seed = 0;
  std::optional<double> asr, clean_acc, irt, rtc;
};

inline constexpr const char* kMetricsHeader = "dataset,method,target,defense,seed,asr,clean_acc,irt,rtc";

std::string format_metrics_csv(const std::vector<MetricsRow>& rows);
void write_metrics_csv(const std::vector<MetricsRow>& rows, const std::filesystem::path& path);
std::vector<MetricsRow> read_metrics_csv(const std::filesystem::path& path);

struct SummaryStat {
  std::size_t count = 0;
  double mean = 0.0;
  double sd = 0.0;  // population
};

struct SummaryRow {
  std::string method;
  std::string defense;
  std::size_t runs = 0;
  std::optional<SummaryStat> asr, clean_acc, irt, rtc;
  /// "ASR | CA" in percent, "- | CA" without ASR.
  std::string cell;
};

/// Groups by (method, defense) in first-seen order.
std::vector<SummaryRow> summarize(const std::vector<MetricsRow>& rows);
std::string format_summary_csv(const std::vector<SummaryRow>& rows);
std::string format_summary_table(const std::vector<SummaryRow>& rows);

// Pipeline stages. Each is a pure function of its inputs and the config.

struct Dataset {
  Graph graph;
  SplitMask split;
};

Graph generate_data(const RunConfig& config);
SplitMask make_split(const RunConfig& config, const Graph& graph);
/// Files from the config when given, generated otherwise.
Dataset load_dataset(const RunConfig& config);

/// The attacker's view: the subgraph induced on train_labeled, with
/// triggers (if any) appended.
struct AttackArtifacts {
  Method method = Method::kCleanOnly;
  graph::Subgraph train;
  attack::BackdooredGraph backdoored;
  attack::TriggerSource source;
  std::optional<models::GeneratorParams> generator;
  std::vector<attack::LossBreakdown> history;
  bool diverged = false;
  std::string diagnostics;
};

/// Throws std::logic_error when any node of the attacker's graph is a
/// test node.
void assert_inductive(const graph::Subgraph& train, const SplitMask& split);

AttackArtifacts run_attack(const RunConfig& config, const Dataset& data, Method method);

struct DefendedGraph {
  Graph graph;
  std::optional<double> rtc;
  /// Cosine threshold applied to evaluation graphs and test triggers.
  std::optional<double> eval_threshold;
};

DefendedGraph apply_defense(const RunConfig& config, Defense defense, const AttackArtifacts& attacked,
                            const Dataset& data);

std::uint64_t target_seed(const RunConfig& config, std::size_t rep);

models::ClassifierParams train_target(const RunConfig& config, const Graph& training_graph, Arch arch,
                                      std::size_t rep);

MetricsRow evaluate(const RunConfig& config, const Dataset& data, const AttackArtifacts& attacked,
                    const DefendedGraph& defended, const models::ClassifierParams& target, Defense defense,
                    std::uint64_t seed);

struct RunManifest {
  std::string config_hash;
  std::vector<std::pair<std::string, std::string>> resolved;
  std::vector<std::pair<std::string, double>> stage_seconds;
  std::vector<std::filesystem::path> outputs;
  std::string status = "ok";
  std::string failed_stage;
  std::string error;
  std::vector<std::string> notes;
};

inline constexpr const char* kEngineVersion = "0.1.0";

std::string manifest_json(const RunManifest& manifest);

struct ExperimentResult {
  std::vector<MetricsRow> rows;
  RunManifest manifest;
};

/// Runs every method x defense x target x repeat in memory.
ExperimentResult run_pipeline(const RunConfig& config);

/// run_pipeline plus outputs under out_dir (metrics.csv, manifest.json,
/// graph and provenance files). On failure the manifest records the stage
/// and other outputs are removed before rethrowing.
ExperimentResult run_experiment(const RunConfig& config);

/// Dispatches a CLI command. Returns the process exit code for success;
/// errors propagate.
int run_command(const RunConfig& config);

}  // namespace bdlab::lab
