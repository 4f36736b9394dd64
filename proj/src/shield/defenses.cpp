#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <stdexcept>

#include "bdlab/shield.hpp"

namespace bdlab::shield {

using models::Tape;
using models::Var;

namespace {

double edge_cosine(const Graph& g, const graph::Edge& e) { return cosine(g.feature(e.u), g.feature(e.v)); }

}  // namespace

Graph cosine_prune(const Graph& graph, double tau) {
  if (std::isnan(tau) || tau < -1.0) throw std::invalid_argument("cosine_prune: threshold must be >= -1");
  std::vector<graph::Edge> kept;
  for (const auto& e : graph.edges()) {
    if (edge_cosine(graph, e) >= tau) kept.push_back(e);
  }
  return graph::with_edges(graph, std::move(kept));
}

double tune_prune_threshold(const Graph& graph, double max_fraction) {
  if (!(max_fraction >= 0.0 && max_fraction <= 1.0)) {
    throw std::invalid_argument("tune_prune_threshold: fraction must lie in [0, 1]");
  }
  std::vector<double> cos;
  for (const auto& e : graph.edges()) cos.push_back(edge_cosine(graph, e));
  if (cos.empty()) return -1.0;
  std::sort(cos.begin(), cos.end());
  const auto allowed = static_cast<std::size_t>(std::floor(max_fraction * static_cast<double>(cos.size())));
  if (allowed >= cos.size()) return std::nextafter(cos.back(), std::numeric_limits<double>::infinity());
  // Edges strictly below cos[allowed] number at most `allowed`.
  return std::max(-1.0, cos[allowed]);
}

DegreePruneResult degree_prune_rtc(const Graph& graph, std::span<const Provenance> provenance, double top_pct,
                                   std::size_t n_edges) {
  if (!(top_pct > 0.0 && top_pct <= 1.0)) throw std::invalid_argument("degree_prune_rtc: top_pct must lie in (0, 1]");
  const auto before = attack::trigger_edges(graph, provenance);
  const std::size_t n = graph.num_nodes();
  std::vector<NodeId> order(n);
  std::iota(order.begin(), order.end(), NodeId{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](NodeId a, NodeId b) { return graph.degree(a) > graph.degree(b); });
  const auto count = std::min(n, static_cast<std::size_t>(std::ceil(top_pct * static_cast<double>(n))));

  std::set<graph::Edge> removed;
  for (std::size_t i = 0; i < count && n_edges > 0; ++i) {
    const NodeId u = order[i];
    std::vector<std::pair<double, NodeId>> incident;
    for (NodeId w : graph.neighbors(u)) incident.emplace_back(cosine(graph.feature(u), graph.feature(w)), w);
    std::sort(incident.begin(), incident.end());
    for (std::size_t k = 0; k < std::min(n_edges, incident.size()); ++k) {
      removed.insert(graph::Edge::canonical(u, incident[k].second));
    }
  }
  std::vector<graph::Edge> kept;
  for (const auto& e : graph.edges()) {
    if (!removed.count(e)) kept.push_back(e);
  }
  DegreePruneResult out;
  out.removed = removed.size();
  out.graph = graph::with_edges(graph, std::move(kept));
  if (!before.empty()) {
    std::size_t surviving = 0;
    for (const auto& e : before) surviving += !removed.count(e);
    out.rtc = static_cast<double>(surviving) / static_cast<double>(before.size());
  }
  return out;
}

std::optional<std::size_t> gm_decision(std::span<const double> scores, double entropy_threshold) {
  double total = 0.0;
  for (double s : scores) {
    if (!(s >= 0.0)) throw std::invalid_argument("gm_decision: negative saliency");
    total += s;
  }
  if (scores.empty() || total <= 0.0) return std::nullopt;
  double entropy = 0.0;
  std::size_t best = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const double q = scores[i] / total;
    if (q > 0.0) entropy -= q * std::log(q);
    if (scores[i] > scores[best]) best = i;
  }
  if (entropy < entropy_threshold) return best;
  return std::nullopt;
}

Graph gradient_mask_defense(const Graph& graph, std::span<const NodeId> labeled, double entropy_threshold,
                            const models::TrainHyper& hyper) {
  const auto victim = models::train_classifier(graph, labeled, hyper);
  std::map<int, std::vector<NodeId>> by_class;
  for (NodeId v : labeled) {
    if (graph.degree(v) > 0) by_class[graph.label(v)].push_back(v);
  }
  std::set<graph::Edge> removed;
  for (const auto& [cls, hosts] : by_class) {
    const auto batch = models::build_view_batch(graph, hosts, 0, models::NeighborScope::kOneHop);
    Tape tape;
    const auto op = models::view_operator(tape, batch, victim.arch, victim.gin_eps, Var{});
    Var x = models::view_features(tape, batch, graph, Var{});
    Var sal = models::view_saliency(tape, batch, op, x, tape.constant(victim.w1), tape.constant(victim.w2), victim.act,
                                    static_cast<std::size_t>(cls));
    const auto& scores = tape.value(sal);
    for (std::size_t v = 0; v < hosts.size(); ++v) {
      std::vector<double> contrib;
      for (std::size_t r : batch.neighbor_rows[v]) contrib.push_back(scores(r, 0));
      if (auto pick = gm_decision(contrib, entropy_threshold)) {
        removed.insert(graph::Edge::canonical(hosts[v], batch.base_ids[batch.neighbor_rows[v][*pick]]));
      }
    }
  }
  std::vector<graph::Edge> kept;
  for (const auto& e : graph.edges()) {
    if (!removed.count(e)) kept.push_back(e);
  }
  return graph::with_edges(graph, std::move(kept));
}

}  // namespace bdlab::shield
