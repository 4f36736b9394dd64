#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include "bdlab/common.hpp"
#include "bdlab/matrix.hpp"

namespace bdlab::graph {

inline constexpr int kUnlabeled = -1;

/// Undirected edge stored with the smaller endpoint first.
struct Edge {
  NodeId u = 0;
  NodeId v = 0;

  static Edge canonical(NodeId a, NodeId b) { return a < b ? Edge{a, b} : Edge{b, a}; }
  friend auto operator<=>(const Edge&, const Edge&) = default;
};

/// Attributed, labeled, undirected simple graph. Immutable after
/// construction; the constructor enforces every structural invariant.
class Graph {
 public:
  Graph() = default;
  /// Edges may arrive in any order and orientation; they are canonicalized
  /// and sorted. Self-loops, duplicates, out-of-range endpoints, labels
  /// outside [0, num_classes) other than kUnlabeled, and non-finite
  /// features are rejected with std::invalid_argument.
  Graph(std::size_t num_classes, DenseMatrix features, std::vector<int> labels,
        std::vector<Edge> edges);

  std::size_t num_nodes() const { return features_.rows(); }
  std::size_t feature_dim() const { return features_.cols(); }
  std::size_t num_classes() const { return num_classes_; }
  std::size_t num_edges() const { return edges_.size(); }

  const DenseMatrix& features() const { return features_; }
  std::span<const double> feature(NodeId i) const { return features_.row(i); }
  const std::vector<int>& labels() const { return labels_; }
  int label(NodeId i) const { return labels_[i]; }
  bool is_labeled(NodeId i) const { return labels_[i] != kUnlabeled; }
  const std::vector<Edge>& edges() const { return edges_; }

  /// Neighbors in ascending id order.
  std::span<const NodeId> neighbors(NodeId i) const {
    return {adjacency_.data() + offsets_[i], offsets_[i + 1] - offsets_[i]};
  }
  std::size_t degree(NodeId i) const { return offsets_[i + 1] - offsets_[i]; }
  bool has_edge(NodeId a, NodeId b) const;

  friend bool operator==(const Graph& a, const Graph& b) {
    return a.num_classes_ == b.num_classes_ && a.features_ == b.features_ &&
           a.labels_ == b.labels_ && a.edges_ == b.edges_;
  }

 private:
  std::size_t num_classes_ = 0;
  DenseMatrix features_;
  std::vector<int> labels_;
  std::vector<Edge> edges_;
  std::vector<std::size_t> offsets_{0};
  std::vector<NodeId> adjacency_;
};

/// Appends unlabeled nodes with the given feature rows and adds edges
/// (which may reference both old and new ids).
Graph augment(const Graph& base, const DenseMatrix& extra_features,
              std::span<const Edge> extra_edges);

/// Same nodes and features, edge set replaced.
Graph with_edges(const Graph& base, std::vector<Edge> edges);

/// Induced subgraph on `nodes` (ascending). `original_id[local]` maps back.
struct Subgraph {
  Graph graph;
  std::vector<NodeId> original_id;
};
Subgraph induced_subgraph(const Graph& g, std::span<const NodeId> nodes);

/// Inductive split: masked nodes are halved into target and clean test
/// sets; the remainder is the labeled training set. All sets ascending.
struct SplitMask {
  std::vector<NodeId> train_labeled;
  std::vector<NodeId> test_target;
  std::vector<NodeId> test_clean;

  friend bool operator==(const SplitMask&, const SplitMask&) = default;
};

SplitMask inductive_split(const Graph& graph, double mask_fraction, std::uint64_t seed);

/// Symmetric sparse operator in CSR form.
struct SparseOperator {
  std::size_t n = 0;
  bool self_loops = false;
  std::vector<std::size_t> row_ptr{0};
  std::vector<NodeId> cols;
  std::vector<double> values;

  std::size_t nnz() const { return cols.size(); }
  /// Position of entry (r, c) in `cols`/`values`, or -1.
  std::ptrdiff_t find(NodeId r, NodeId c) const;
  DenseMatrix apply(const DenseMatrix& x) const;
  DenseMatrix to_dense() const;
};

/// D^{-1/2}(A[+I])D^{-1/2}. With self-loops the degree counts the loop.
/// An isolated node without self-loops has an empty row.
SparseOperator normalized_adjacency(const Graph& graph, bool add_self_loops);

/// General form over an explicit edge list: node i's degree is
/// (self-loop ? 1 : 0) + extra_degree[i] + #listed edges at i. Used for
/// local computational graphs whose boundary nodes have edges that are not
/// listed.
SparseOperator normalized_adjacency(std::size_t n, std::span<const Edge> edges,
                                    std::span<const double> extra_degree, bool add_self_loops);

/// A + self_weight * I (unnormalized sum aggregation).
SparseOperator sum_adjacency(std::size_t n, std::span<const Edge> edges, double self_weight);

/// Fraction of edges whose endpoints share a label.
double edge_homophily(const Graph& graph);

struct SyntheticSpec {
  std::size_t n = 1000;
  std::size_t num_classes = 2;
  std::size_t dim = 8;
  double homophily = 0.8;
  DenseMatrix class_means;  // num_classes x dim
  double noise_scale = 0.5;
  double feature_bound = 1.0;
  double avg_degree = 4.0;
  std::uint64_t seed = 3407;
};

/// Class means drawn uniformly from [-scale, scale]^dim.
DenseMatrix random_class_means(std::size_t num_classes, std::size_t dim, double scale,
                               std::uint64_t seed);

Graph generate_synthetic(const SyntheticSpec& spec);

/// Generated subgraph payload. `adjacency` is s x s, symmetric, binary,
/// zero diagonal; trigger node `attach_index` is wired to the host.
struct Trigger {
  DenseMatrix features;
  DenseMatrix adjacency;
  std::size_t attach_index = 0;

  std::size_t size() const { return features.rows(); }
  /// Internal edges (a < b) in trigger-local indices, row-major order.
  std::vector<Edge> internal_edges() const;
  void validate(std::size_t feature_dim) const;
};

/// Samples one feature row per trigger node.
using FeatureSampler = std::function<std::vector<double>(Rng&)>;

/// Each candidate internal pair is included independently with probability p.
Trigger erdos_renyi_trigger(std::size_t size, double edge_prob, const FeatureSampler& features,
                            std::uint64_t seed);
Trigger erdos_renyi_trigger(std::size_t size, double edge_prob, const FeatureSampler& features,
                            Rng& rng);

/// Trigger node count used by the random-graph baseline.
inline constexpr std::size_t kBaselineTriggerSize = 3;

/// Sampler drawing rows uniformly from `graph` restricted to `pool`.
FeatureSampler row_sampler(const Graph& graph, std::vector<NodeId> pool);

}  // namespace bdlab::graph
