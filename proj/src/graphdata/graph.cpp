#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "bdlab/graph.hpp"

namespace bdlab::graph {

Graph::Graph(std::size_t num_classes, DenseMatrix features, std::vector<int> labels,
             std::vector<Edge> edges)
    : num_classes_(num_classes), features_(std::move(features)), labels_(std::move(labels)) {
  const std::size_t n = features_.rows();
  if (labels_.size() != n) throw std::invalid_argument("Graph: label count differs from node count");
  if (!features_.all_finite()) throw std::invalid_argument("Graph: non-finite feature entry");
  for (std::size_t i = 0; i < n; ++i) {
    const int y = labels_[i];
    if (y != kUnlabeled && (y < 0 || static_cast<std::size_t>(y) >= num_classes_)) {
      throw std::invalid_argument("Graph: label " + std::to_string(y) + " of node " +
                                  std::to_string(i) + " outside [0, " +
                                  std::to_string(num_classes_) + ")");
    }
  }
  for (auto& e : edges) {
    if (e.u == e.v) throw std::invalid_argument("Graph: self-loop at node " + std::to_string(e.u));
    if (e.u >= n || e.v >= n) {
      throw std::invalid_argument("Graph: endpoint " + std::to_string(std::max(e.u, e.v)) +
                                  " out of range");
    }
    e = Edge::canonical(e.u, e.v);
  }
  std::sort(edges.begin(), edges.end());
  if (auto dup = std::adjacent_find(edges.begin(), edges.end()); dup != edges.end()) {
    throw std::invalid_argument("Graph: duplicate edge " + std::to_string(dup->u) + " " +
                                std::to_string(dup->v));
  }
  edges_ = std::move(edges);

  std::vector<std::size_t> deg(n, 0);
  for (const auto& e : edges_) {
    ++deg[e.u];
    ++deg[e.v];
  }
  offsets_.assign(n + 1, 0);
  for (std::size_t i = 0; i < n; ++i) offsets_[i + 1] = offsets_[i] + deg[i];
  adjacency_.resize(offsets_[n]);
  std::vector<std::size_t> cursor(offsets_.begin(), offsets_.end() - 1);
  for (const auto& e : edges_) {
    adjacency_[cursor[e.u]++] = e.v;
    adjacency_[cursor[e.v]++] = e.u;
  }
  for (std::size_t i = 0; i < n; ++i) {
    std::sort(adjacency_.begin() + offsets_[i], adjacency_.begin() + offsets_[i + 1]);
  }
}

bool Graph::has_edge(NodeId a, NodeId b) const {
  auto nb = neighbors(a);
  return std::binary_search(nb.begin(), nb.end(), b);
}

Graph augment(const Graph& base, const DenseMatrix& extra_features,
              std::span<const Edge> extra_edges) {
  if (extra_features.rows() > 0 && extra_features.cols() != base.feature_dim()) {
    throw std::invalid_argument("augment: feature dimension mismatch");
  }
  const std::size_t n = base.num_nodes();
  const std::size_t m = extra_features.rows();
  DenseMatrix features(n + m, base.feature_dim());
  std::copy(base.features().values().begin(), base.features().values().end(),
            features.values().begin());
  std::copy(extra_features.values().begin(), extra_features.values().end(),
            features.values().begin() + static_cast<std::ptrdiff_t>(n * base.feature_dim()));
  std::vector<int> labels = base.labels();
  labels.resize(n + m, kUnlabeled);
  std::vector<Edge> edges = base.edges();
  edges.insert(edges.end(), extra_edges.begin(), extra_edges.end());
  return Graph(base.num_classes(), std::move(features), std::move(labels), std::move(edges));
}

Graph with_edges(const Graph& base, std::vector<Edge> edges) {
  return Graph(base.num_classes(), base.features(), base.labels(), std::move(edges));
}

Subgraph induced_subgraph(const Graph& g, std::span<const NodeId> nodes) {
  std::vector<std::ptrdiff_t> local(g.num_nodes(), -1);
  std::vector<std::size_t> rows;
  rows.reserve(nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (i > 0 && nodes[i] <= nodes[i - 1]) {
      throw std::invalid_argument("induced_subgraph: node list must be strictly ascending");
    }
    local[nodes[i]] = static_cast<std::ptrdiff_t>(i);
    rows.push_back(nodes[i]);
  }
  std::vector<int> labels;
  labels.reserve(nodes.size());
  for (NodeId v : nodes) labels.push_back(g.label(v));
  std::vector<Edge> edges;
  for (const auto& e : g.edges()) {
    if (local[e.u] >= 0 && local[e.v] >= 0) {
      edges.push_back({static_cast<NodeId>(local[e.u]), static_cast<NodeId>(local[e.v])});
    }
  }
  return {Graph(g.num_classes(), gather_rows(g.features(), rows), std::move(labels),
                std::move(edges)),
          std::vector<NodeId>(nodes.begin(), nodes.end())};
}

double edge_homophily(const Graph& graph) {
  if (graph.num_edges() == 0) throw std::invalid_argument("edge_homophily: graph has no edges");
  std::size_t same = 0;
  for (const auto& e : graph.edges()) {
    if (!graph.is_labeled(e.u) || !graph.is_labeled(e.v)) {
      throw std::invalid_argument("edge_homophily: unlabeled endpoint on edge " +
                                  std::to_string(e.u) + " " + std::to_string(e.v));
    }
    if (graph.label(e.u) == graph.label(e.v)) ++same;
  }
  return static_cast<double>(same) / static_cast<double>(graph.num_edges());
}

}  // namespace bdlab::graph
