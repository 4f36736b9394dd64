#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>

#include "bdlab/attack.hpp"

namespace bdlab::attack {

AttachedView attach_trigger(const Graph& graph, NodeId host, const Trigger& trigger, models::NeighborScope scope) {
  if (host >= graph.num_nodes()) throw std::invalid_argument("attach_trigger: host out of range");
  trigger.validate(graph.feature_dim());
  const auto n = static_cast<NodeId>(graph.num_nodes());
  AttachedView view;
  view.base = &graph;
  view.host = host;
  view.trigger = trigger;
  for (std::size_t a = 0; a < trigger.size(); ++a) view.injected_ids.push_back(n + static_cast<NodeId>(a));
  for (const auto& e : trigger.internal_edges()) view.attach_edges.push_back({n + e.u, n + e.v});
  view.attach_edges.push_back(graph::Edge::canonical(host, n + static_cast<NodeId>(trigger.attach_index)));
  view.augmented = graph::augment(graph, trigger.features, view.attach_edges);

  std::set<NodeId> clean(graph.neighbors(host).begin(), graph.neighbors(host).end());
  if (scope == models::NeighborScope::kTwoHop) {
    for (NodeId u : graph.neighbors(host)) clean.insert(graph.neighbors(u).begin(), graph.neighbors(u).end());
    clean.erase(host);
  }
  view.clean_neighbors.assign(clean.begin(), clean.end());
  return view;
}

BackdooredGraph build_backdoored(const Graph& base, std::span<const NodeId> hosts, std::span<const Trigger> triggers) {
  if (hosts.size() != triggers.size()) throw std::invalid_argument("build_backdoored: one trigger per host required");
  const std::size_t d = base.feature_dim();
  std::size_t extra = 0;
  for (const auto& t : triggers) {
    t.validate(d);
    extra += t.size();
  }
  DenseMatrix features(extra, d);
  std::vector<graph::Edge> edges;
  BackdooredGraph out;
  auto next = static_cast<NodeId>(base.num_nodes());
  std::size_t row = 0;
  for (std::size_t k = 0; k < hosts.size(); ++k) {
    const auto& t = triggers[k];
    if (hosts[k] >= base.num_nodes()) throw std::invalid_argument("build_backdoored: host out of range");
    Provenance p;
    p.host = hosts[k];
    for (std::size_t a = 0; a < t.size(); ++a, ++row) {
      p.trigger_ids.push_back(next + static_cast<NodeId>(a));
      std::copy(t.features.row(a).begin(), t.features.row(a).end(), features.row(row).begin());
    }
    for (const auto& e : t.internal_edges()) edges.push_back({next + e.u, next + e.v});
    p.attach_edge = graph::Edge::canonical(hosts[k], next + static_cast<NodeId>(t.attach_index));
    edges.push_back(p.attach_edge);
    next += static_cast<NodeId>(t.size());
    out.provenance.push_back(std::move(p));
  }
  out.graph = graph::augment(base, features, edges);
  return out;
}

void save_provenance(std::span<const Provenance> provenance, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const auto& p : provenance) {
    out << p.host << " |";
    for (NodeId t : p.trigger_ids) out << ' ' << t;
    out << " | " << p.attach_edge.u << ' ' << p.attach_edge.v << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::vector<Provenance> load_provenance(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  std::vector<Provenance> out;
  std::string line;
  std::size_t lineno = 0;
  auto ids = [&](const std::string& text) {
    std::istringstream ss(text);
    std::vector<NodeId> v;
    for (std::string tok; ss >> tok;) {
      std::size_t used = 0;
      long long x = -1;
      try {
        x = std::stoll(tok, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != tok.size() || x < 0) {
        throw ParseError(path.string() + ":" + std::to_string(lineno) + ": bad node id '" + tok + "'");
      }
      v.push_back(static_cast<NodeId>(x));
    }
    return v;
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto a = line.find('|');
    const auto b = a == std::string::npos ? a : line.find('|', a + 1);
    if (b == std::string::npos) {
      throw ParseError(path.string() + ":" + std::to_string(lineno) + ": expected `host | triggers | u v`");
    }
    const auto host = ids(line.substr(0, a));
    const auto edge = ids(line.substr(b + 1));
    if (host.size() != 1 || edge.size() != 2) {
      throw ParseError(path.string() + ":" + std::to_string(lineno) + ": expected `host | triggers | u v`");
    }
    Provenance p;
    p.host = host[0];
    p.trigger_ids = ids(line.substr(a + 1, b - a - 1));
    p.attach_edge = graph::Edge::canonical(edge[0], edge[1]);
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<graph::Edge> trigger_edges(const Graph& graph, std::span<const Provenance> provenance) {
  std::vector<char> is_trigger(graph.num_nodes(), 0);
  for (const auto& p : provenance) {
    for (NodeId t : p.trigger_ids) {
      if (t >= graph.num_nodes()) throw std::invalid_argument("trigger_edges: trigger id out of range");
      is_trigger[t] = 1;
    }
  }
  std::vector<graph::Edge> out;
  for (const auto& e : graph.edges()) {
    if (is_trigger[e.u] || is_trigger[e.v]) out.push_back(e);
  }
  return out;
}

SaliencyRow sa_importance(const ClassifierParams& surrogate, const AttachedView& view, std::size_t cls) {
  const Graph& g = view.augmented;
  const DenseMatrix grad = models::input_gradient(surrogate, g, g.features(), view.host, cls);
  SaliencyRow row;
  row.center = view.host;
  row.cls = cls;
  std::set<NodeId> field{view.host};
  for (NodeId u : g.neighbors(view.host)) {
    field.insert(u);
    field.insert(g.neighbors(u).begin(), g.neighbors(u).end());
  }
  for (NodeId j : field) row.scores[j] = l2_norm(grad.row(j));
  return row;
}

double logic_poison_loss(const ClassifierParams& surrogate, std::span<const AttachedView> views, std::size_t cls,
                         double margin_t) {
  if (views.empty()) throw std::invalid_argument("logic_poison_loss: no views");
  double total = 0.0;
  for (const auto& view : views) {
    const auto row = sa_importance(surrogate, view, cls);
    auto score = [&](NodeId j) {
      auto it = row.scores.find(j);
      return it == row.scores.end() ? 0.0 : it->second;
    };
    double trig = 0.0;
    double clean = 0.0;
    for (NodeId t : view.injected_ids) trig += score(t);
    for (NodeId c : view.clean_neighbors) clean += score(c);
    total += std::max(0.0, margin_t - (trig - clean));
  }
  return total;
}

double unnoticeable_loss(std::span<const AttachedView> views, std::size_t* zero_norm) {
  double total = 0.0;
  std::size_t degenerate = 0;
  for (const auto& view : views) {
    const Graph& g = view.augmented;
    for (const auto& e : view.attach_edges) {
      const auto a = g.feature(e.u);
      const auto b = g.feature(e.v);
      if (l2_norm(a) == 0.0 || l2_norm(b) == 0.0) ++degenerate;
      total += std::exp(-cosine(a, b));
    }
  }
  if (zero_norm) *zero_norm = degenerate;
  return total;
}

double surrogate_loss(const ClassifierParams& surrogate, const Graph& backdoored, std::span<const NodeId> labeled) {
  const DenseMatrix logits = models::classifier_logits(surrogate, backdoored);
  double total = 0.0;
  for (NodeId v : labeled) {
    if (v >= backdoored.num_nodes() || !backdoored.is_labeled(v)) {
      throw std::invalid_argument("surrogate_loss: node is not labeled");
    }
    auto r = logits.row(v);
    const double mx = *std::max_element(r.begin(), r.end());
    double z = 0.0;
    for (double x : r) z += std::exp(x - mx);
    total += mx + std::log(z) - r[static_cast<std::size_t>(backdoored.label(v))];
  }
  return total;
}

std::vector<Trigger> generate_triggers(const GeneratorParams& gen, const Graph& graph, std::span<const NodeId> hosts) {
  const std::size_t d = graph.feature_dim();
  if (gen.input_dim() != d) throw std::invalid_argument("generate_triggers: generator dimension mismatch");
  std::vector<Trigger> out;
  if (hosts.empty()) return out;
  std::vector<std::size_t> rows(hosts.begin(), hosts.end());
  models::Tape tape;
  auto vars = models::generator_variables(tape, gen, false);
  auto g = models::generator_forward(tape, vars, tape.constant(gather_rows(graph.features(), rows)),
                                     gen.trigger_size, d, gen.act);
  const auto& feats = tape.value(g.features);
  const auto& logits = tape.value(g.adjacency_logits);
  const std::size_t s = gen.trigger_size;
  for (std::size_t b = 0; b < hosts.size(); ++b) {
    Trigger t;
    t.features = DenseMatrix(s, d);
    for (std::size_t a = 0; a < s; ++a) {
      std::copy(feats.row(b * s + a).begin(), feats.row(b * s + a).end(), t.features.row(a).begin());
    }
    t.adjacency = models::adjacency_from_logits(logits.row(b), s);
    out.push_back(std::move(t));
  }
  return out;
}

ErbaAttack erba_attack(const Graph& graph, std::span<const NodeId> train_labeled, int target_class,
                       std::size_t delta_p, std::size_t trigger_size, std::uint64_t seed) {
  std::vector<NodeId> candidates;
  for (NodeId v : train_labeled) {
    if (graph.label(v) == target_class) candidates.push_back(v);
  }
  if (candidates.empty()) throw std::invalid_argument("erba_attack: no candidate nodes of the target class");
  Rng rng(seed);
  ErbaAttack atk;
  atk.plan.poisoned = rng.sample(candidates, delta_p);
  atk.plan.shortfall = candidates.size() < delta_p;
  std::sort(atk.plan.poisoned.begin(), atk.plan.poisoned.end());
  atk.plan.scores.assign(atk.plan.poisoned.size(), 0.0);
  atk.sampler = graph::row_sampler(graph, candidates);
  for (std::size_t k = 0; k < atk.plan.poisoned.size(); ++k) {
    atk.triggers.push_back(graph::erdos_renyi_trigger(trigger_size, atk.edge_prob, atk.sampler, rng));
  }
  return atk;
}

TriggerSource generator_source(GeneratorParams gen) {
  return [gen = std::move(gen)](const Graph& graph, std::span<const NodeId> hosts) {
    return generate_triggers(gen, graph, hosts);
  };
}

TriggerSource erba_source(graph::FeatureSampler sampler, std::size_t trigger_size, double edge_prob,
                          std::uint64_t seed) {
  return [sampler = std::move(sampler), trigger_size, edge_prob, seed](const Graph&, std::span<const NodeId> hosts) {
    Rng rng(seed);
    std::vector<Trigger> out;
    for (std::size_t k = 0; k < hosts.size(); ++k) {
      out.push_back(graph::erdos_renyi_trigger(trigger_size, edge_prob, sampler, rng));
    }
    return out;
  };
}

}  // namespace bdlab::attack
