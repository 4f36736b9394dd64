#include <charconv>
#include <cmath>
#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

#include "bdlab/lab.hpp"

namespace bdlab::lab {

namespace {

using Setter = std::function<void(RunConfig&, const std::string&)>;
using Getter = std::function<std::string(const RunConfig&)>;

struct Key {
  std::string name;
  std::string doc;
  Setter set;
  Getter get;
};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size() || !std::isfinite(out)) {
    throw ConfigError("invalid number for " + key + ": '" + v + "'");
  }
  return out;
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw ConfigError("invalid non-negative integer for " + key + ": '" + v + "'");
  }
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("invalid boolean for " + key + ": '" + v + "'");
}

template <typename T, typename F>
T parse_enum(const std::string& key, const std::string& v, F parse) {
  try {
    return parse(v);
  } catch (const std::exception&) {
    throw ConfigError("invalid value for " + key + ": '" + v + "'");
  }
}

template <typename T, typename F>
std::string join(const std::vector<T>& items, F name) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += ",";
    out += name(items[i]);
  }
  return out;
}

Key dbl(std::string name, std::string doc, std::function<double&(RunConfig&)> field) {
  return {name, std::move(doc),
          [field, name](RunConfig& c, const std::string& v) { field(c) = to_double(name, v); },
          [field](const RunConfig& c) { return fmt_double(field(const_cast<RunConfig&>(c))); }};
}

Key size(std::string name, std::string doc, std::function<std::size_t&(RunConfig&)> field) {
  return {name, std::move(doc),
          [field, name](RunConfig& c, const std::string& v) { field(c) = static_cast<std::size_t>(to_u64(name, v)); },
          [field](const RunConfig& c) { return std::to_string(field(const_cast<RunConfig&>(c))); }};
}

Key path(std::string name, std::string doc, std::function<std::filesystem::path&(RunConfig&)> field) {
  return {name, std::move(doc), [field](RunConfig& c, const std::string& v) { field(c) = v; },
          [field](const RunConfig& c) { return field(const_cast<RunConfig&>(c)).string(); }};
}

Key act(std::string name, std::string doc, std::function<grad::Activation&(RunConfig&)> field) {
  return {name, std::move(doc),
          [field, name](RunConfig& c, const std::string& v) {
            field(c) = parse_enum<grad::Activation>(name, v, grad::parse_activation);
          },
          [field](const RunConfig& c) { return std::string(grad::activation_name(field(const_cast<RunConfig&>(c)))); }};
}

const std::vector<Key>& registry() {
  static const std::vector<Key> keys = [] {
    std::vector<Key> k;
    k.push_back({"seed", "master seed; every stage derives its seed from it",
                 [](RunConfig& c, const std::string& v) { c.seed = to_u64("seed", v); },
                 [](const RunConfig& c) { return std::to_string(c.seed); }});
    k.push_back(path("out_dir", "output directory (required)", [](RunConfig& c) -> auto& { return c.out_dir; }));
    k.push_back({"dataset", "dataset name written to the metrics",
                 [](RunConfig& c, const std::string& v) { c.dataset = v; },
                 [](const RunConfig& c) { return c.dataset; }});
    k.push_back(path("nodes_path", "node file; empty means synthetic data", [](RunConfig& c) -> auto& { return c.nodes_path; }));
    k.push_back(path("edges_path", "edge file, required with nodes_path", [](RunConfig& c) -> auto& { return c.edges_path; }));
    k.push_back(path("split_path", "split file; empty means a seeded split", [](RunConfig& c) -> auto& { return c.split_path; }));
    k.push_back(size("n", "synthetic node count", [](RunConfig& c) -> auto& { return c.synthetic.n; }));
    k.push_back(size("num_classes", "synthetic class count", [](RunConfig& c) -> auto& { return c.synthetic.num_classes; }));
    k.push_back(size("dim", "synthetic feature dimension", [](RunConfig& c) -> auto& { return c.synthetic.dim; }));
    k.push_back(dbl("homophily", "synthetic edge homophily", [](RunConfig& c) -> auto& { return c.synthetic.homophily; }));
    k.push_back(dbl("avg_degree", "synthetic average degree", [](RunConfig& c) -> auto& { return c.synthetic.avg_degree; }));
    k.push_back(dbl("noise_scale", "half-width of the uniform feature noise", [](RunConfig& c) -> auto& { return c.synthetic.noise_scale; }));
    k.push_back(dbl("feature_bound", "features are clamped to [-S, S]", [](RunConfig& c) -> auto& { return c.synthetic.feature_bound; }));
    k.push_back(dbl("means_scale", "class means are uniform in [-scale, scale]", [](RunConfig& c) -> auto& { return c.means_scale; }));
    k.push_back(dbl("mask_fraction", "fraction of nodes held out for testing", [](RunConfig& c) -> auto& { return c.mask_fraction; }));
    k.push_back({"methods", "comma list of ba-logic, erba-baseline, clean-only",
                 [](RunConfig& c, const std::string& v) {
                   c.methods.clear();
                   for (const auto& s : split_list(v)) c.methods.push_back(parse_enum<Method>("methods", s, parse_method));
                 },
                 [](const RunConfig& c) { return join(c.methods, method_name); }});
    k.push_back({"targets", "comma list of target architectures (gcn, gin)",
                 [](RunConfig& c, const std::string& v) {
                   c.targets.clear();
                   for (const auto& s : split_list(v)) c.targets.push_back(parse_enum<Arch>("targets", s, models::parse_arch));
                 },
                 [](const RunConfig& c) { return join(c.targets, models::arch_name); }});
    k.push_back({"defenses", "comma list of none, prune, degree, gm",
                 [](RunConfig& c, const std::string& v) {
                   c.defenses.clear();
                   for (const auto& s : split_list(v)) c.defenses.push_back(parse_enum<Defense>("defenses", s, parse_defense));
                 },
                 [](const RunConfig& c) { return join(c.defenses, defense_name); }});
    k.push_back(size("repeats", "fresh target models per (method, target, defense)", [](RunConfig& c) -> auto& { return c.repeats; }));
    k.push_back(size("irt_k", "top-k used by the IRT metric", [](RunConfig& c) -> auto& { return c.irt_k; }));
    k.push_back({"target_class", "class the backdoor steers towards",
                 [](RunConfig& c, const std::string& v) {
                   c.attack.target_class = static_cast<int>(to_u64("target_class", v));
                 },
                 [](const RunConfig& c) { return std::to_string(c.attack.target_class); }});
    k.push_back(size("delta_p", "poisoning budget", [](RunConfig& c) -> auto& { return c.attack.delta_p; }));
    k.push_back(size("trigger_size", "nodes per trigger", [](RunConfig& c) -> auto& { return c.attack.trigger_size; }));
    k.push_back(dbl("margin_t", "saliency margin of the logic loss", [](RunConfig& c) -> auto& { return c.attack.margin_t; }));
    k.push_back(dbl("beta", "weight of the logic loss", [](RunConfig& c) -> auto& { return c.attack.beta; }));
    k.push_back(size("inner_steps", "surrogate steps per outer epoch", [](RunConfig& c) -> auto& { return c.attack.inner_steps; }));
    k.push_back(size("outer_epochs", "generator epochs", [](RunConfig& c) -> auto& { return c.attack.outer_epochs; }));
    k.push_back(dbl("lr_surrogate", "surrogate learning rate", [](RunConfig& c) -> auto& { return c.attack.lr_surrogate; }));
    k.push_back(dbl("lr_generator", "generator learning rate", [](RunConfig& c) -> auto& { return c.attack.lr_generator; }));
    k.push_back(dbl("weight_decay", "surrogate and selector weight decay", [](RunConfig& c) -> auto& { return c.attack.weight_decay; }));
    k.push_back(dbl("generator_weight_decay", "generator weight decay", [](RunConfig& c) -> auto& { return c.attack.generator_weight_decay; }));
    k.push_back(size("outer_batch", "hosts sampled per outer epoch", [](RunConfig& c) -> auto& { return c.attack.outer_batch; }));
    k.push_back(size("surrogate_hidden", "surrogate hidden width", [](RunConfig& c) -> auto& { return c.attack.surrogate_hidden; }));
    k.push_back(size("generator_hidden", "generator hidden width", [](RunConfig& c) -> auto& { return c.attack.generator_hidden; }));
    k.push_back(act("surrogate_act", "surrogate activation (relu, softplus)", [](RunConfig& c) -> auto& { return c.attack.surrogate_act; }));
    k.push_back(act("generator_act", "generator activation (relu, softplus)", [](RunConfig& c) -> auto& { return c.attack.generator_act; }));
    k.push_back({"neighbor_scope", "clean neighbors in the logic loss (one-hop, two-hop)",
                 [](RunConfig& c, const std::string& v) {
                   if (v == "one-hop") c.attack.neighbor_scope = models::NeighborScope::kOneHop;
                   else if (v == "two-hop") c.attack.neighbor_scope = models::NeighborScope::kTwoHop;
                   else throw ConfigError("invalid value for neighbor_scope: '" + v + "'");
                 },
                 [](const RunConfig& c) {
                   return std::string(c.attack.neighbor_scope == models::NeighborScope::kOneHop ? "one-hop" : "two-hop");
                 }});
    k.push_back({"saliency", "saliency target (logit, probability)",
                 [](RunConfig& c, const std::string& v) {
                   if (v == "logit") c.attack.saliency = models::SaliencyTarget::kLogit;
                   else if (v == "probability") c.attack.saliency = models::SaliencyTarget::kProbability;
                   else throw ConfigError("invalid value for saliency: '" + v + "'");
                 },
                 [](const RunConfig& c) {
                   return std::string(c.attack.saliency == models::SaliencyTarget::kLogit ? "logit" : "probability");
                 }});
    k.push_back({"logic_gradient", "gradient of the logic loss (analytic, finite-difference)",
                 [](RunConfig& c, const std::string& v) {
                   if (v == "analytic") c.attack.logic_gradient = attack::LogicGradient::kAnalytic;
                   else if (v == "finite-difference") c.attack.logic_gradient = attack::LogicGradient::kFiniteDifference;
                   else throw ConfigError("invalid value for logic_gradient: '" + v + "'");
                 },
                 [](const RunConfig& c) {
                   return std::string(c.attack.logic_gradient == attack::LogicGradient::kAnalytic ? "analytic"
                                                                                                  : "finite-difference");
                 }});
    k.push_back(dbl("fd_step", "step of the finite-difference logic gradient", [](RunConfig& c) -> auto& { return c.attack.fd_step; }));
    k.push_back({"plain_descent", "use plain gradient descent instead of Adam",
                 [](RunConfig& c, const std::string& v) { c.attack.plain_descent = to_bool("plain_descent", v); },
                 [](const RunConfig& c) { return std::string(c.attack.plain_descent ? "true" : "false"); }});
    k.push_back(size("selector_epochs", "training epochs of the poison selector", [](RunConfig& c) -> auto& { return c.selector_epochs; }));
    k.push_back(size("target_epochs", "training epochs of target models", [](RunConfig& c) -> auto& { return c.target.epochs; }));
    k.push_back(size("target_hidden", "hidden width of target models", [](RunConfig& c) -> auto& { return c.target.hidden_dim; }));
    k.push_back(dbl("target_lr", "target learning rate", [](RunConfig& c) -> auto& { return c.target.learning_rate; }));
    k.push_back(dbl("target_weight_decay", "target weight decay", [](RunConfig& c) -> auto& { return c.target.weight_decay; }));
    k.push_back(act("target_act", "target activation (relu, softplus)", [](RunConfig& c) -> auto& { return c.target.act; }));
    k.push_back(dbl("prune_fraction", "max fraction of clean edges the cosine prune may remove", [](RunConfig& c) -> auto& { return c.prune_fraction; }));
    k.push_back(dbl("degree_top_pct", "fraction of highest-degree nodes hit by degree pruning", [](RunConfig& c) -> auto& { return c.degree_top_pct; }));
    k.push_back(size("degree_edges", "edges removed per high-degree node", [](RunConfig& c) -> auto& { return c.degree_edges; }));
    k.push_back(dbl("gm_threshold", "entropy threshold of the gradient mask defense", [](RunConfig& c) -> auto& { return c.gm_threshold; }));
    k.push_back({"theorem_gammas", "comma list of trigger-neighbor fractions",
                 [](RunConfig& c, const std::string& v) {
                   c.theorem_gammas.clear();
                   for (const auto& s : split_list(v)) c.theorem_gammas.push_back(to_double("theorem_gammas", s));
                 },
                 [](const RunConfig& c) { return join(c.theorem_gammas, fmt_double); }});
    k.push_back(size("theorem_degree", "neighbors per test node in the theorem harness", [](RunConfig& c) -> auto& { return c.theorem_degree; }));
    k.push_back(size("theorem_trials", "test nodes per gamma", [](RunConfig& c) -> auto& { return c.theorem_trials; }));
    k.push_back({"report_inputs", "comma list of metrics files for the report command",
                 [](RunConfig& c, const std::string& v) {
                   c.report_inputs.clear();
                   for (const auto& s : split_list(v)) c.report_inputs.emplace_back(s);
                 },
                 [](const RunConfig& c) {
                   return join(c.report_inputs, [](const std::filesystem::path& p) { return p.string(); });
                 }});
    return k;
  }();
  return keys;
}

}  // namespace

const char* method_name(Method m) {
  switch (m) {
    case Method::kBaLogic: return "ba-logic";
    case Method::kErba: return "erba-baseline";
    case Method::kCleanOnly: return "clean-only";
  }
  return "?";
}

Method parse_method(const std::string& s) {
  if (s == "ba-logic") return Method::kBaLogic;
  if (s == "erba-baseline") return Method::kErba;
  if (s == "clean-only") return Method::kCleanOnly;
  throw std::invalid_argument("unknown method: " + s);
}

const char* defense_name(Defense d) {
  switch (d) {
    case Defense::kNone: return "none";
    case Defense::kPrune: return "prune";
    case Defense::kDegree: return "degree";
    case Defense::kGradientMask: return "gm";
  }
  return "?";
}

Defense parse_defense(const std::string& s) {
  if (s == "none") return Defense::kNone;
  if (s == "prune") return Defense::kPrune;
  if (s == "degree") return Defense::kDegree;
  if (s == "gm") return Defense::kGradientMask;
  throw std::invalid_argument("unknown defense: " + s);
}

std::vector<std::pair<std::string, std::string>> resolved_fields(const RunConfig& config) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& k : registry()) out.emplace_back(k.name, k.get(config));
  return out;
}

std::vector<std::pair<std::string, std::string>> documented_keys() {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& k : registry()) out.emplace_back(k.name, k.doc);
  return out;
}

void set_field(RunConfig& config, const std::string& key, const std::string& value) {
  for (const auto& k : registry()) {
    if (k.name == key) {
      k.set(config, value);
      return;
    }
  }
  throw ConfigError("unknown config key: " + key);
}

RunConfig parse_config_text(const std::string& text,
                            const std::vector<std::pair<std::string, std::string>>& overrides) {
  RunConfig config;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(lineno) + ": expected 'key = value'");
    }
    set_field(config, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  for (const auto& [key, value] : overrides) set_field(config, key, value);
  validate(config);
  return config;
}

RunConfig parse_config(const std::optional<std::filesystem::path>& path,
                       const std::vector<std::pair<std::string, std::string>>& overrides) {
  std::string text;
  if (path) {
    std::ifstream in(*path);
    if (!in) throw ConfigError("cannot read config file: " + path->string());
    std::stringstream ss;
    ss << in.rdbuf();
    text = ss.str();
  }
  return parse_config_text(text, overrides);
}

void validate(const RunConfig& c) {
  if (c.out_dir.empty()) throw ConfigError("missing required field: out_dir");
  if (!c.nodes_path.empty() || !c.edges_path.empty()) {
    if (c.nodes_path.empty()) throw ConfigError("missing required field: nodes_path (edges_path is set)");
    if (c.edges_path.empty()) throw ConfigError("missing required field: edges_path (nodes_path is set)");
  }
  for (const auto* p : {&c.nodes_path, &c.edges_path, &c.split_path}) {
    if (!p->empty() && !std::filesystem::exists(*p)) throw ConfigError("path does not exist: " + p->string());
  }
  for (const auto& p : c.report_inputs) {
    if (!std::filesystem::exists(p)) throw ConfigError("path does not exist: " + p.string());
  }
  if (!(c.mask_fraction > 0.0 && c.mask_fraction < 1.0)) throw ConfigError("mask_fraction must lie in (0, 1)");
  if (c.methods.empty()) throw ConfigError("methods must not be empty");
  if (c.targets.empty()) throw ConfigError("targets must not be empty");
  if (c.defenses.empty()) throw ConfigError("defenses must not be empty");
  if (c.repeats < 1) throw ConfigError("repeats must be >= 1");
  if (c.irt_k < 1) throw ConfigError("irt_k must be >= 1");
  if (!(c.prune_fraction >= 0.0 && c.prune_fraction <= 1.0)) throw ConfigError("prune_fraction must lie in [0, 1]");
  if (!(c.degree_top_pct > 0.0 && c.degree_top_pct <= 1.0)) throw ConfigError("degree_top_pct must lie in (0, 1]");
  if (c.target.epochs < 1 || c.target.hidden_dim < 1) throw ConfigError("target_epochs and target_hidden must be >= 1");
  if (c.selector_epochs < 1) throw ConfigError("selector_epochs must be >= 1");
  try {
    c.attack.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

std::string config_hash(const RunConfig& config) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& [key, value] : resolved_fields(config)) {
    for (unsigned char ch : key + "=" + value + "\n") {
      h ^= ch;
      h *= 0x100000001b3ULL;
    }
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, h);
  return buf;
}

}  // namespace bdlab::lab
