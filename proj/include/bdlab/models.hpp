#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "bdlab/graph.hpp"
#include "bdlab/tape.hpp"

namespace bdlab::models {

using grad::Activation;
using grad::Tape;
using grad::Var;

enum class Arch { kGcn, kGin };

const char* arch_name(Arch arch);
Arch parse_arch(const std::string& name);

/// Two-layer node classifier: logits = P act(P X W1) W2, where P is the
/// symmetric-normalized adjacency with self loops (GCN) or A + (1+eps)I (GIN).
struct ClassifierParams {
  Arch arch = Arch::kGcn;
  DenseMatrix w1;  // d x H
  DenseMatrix w2;  // H x C
  double gin_eps = 0.0;
  Activation act = Activation::kRelu;

  std::size_t input_dim() const { return w1.rows(); }
  std::size_t hidden_dim() const { return w1.cols(); }
  std::size_t num_classes() const { return w2.cols(); }
  friend bool operator==(const ClassifierParams&, const ClassifierParams&) = default;
};

struct TrainHyper {
  Arch arch = Arch::kGcn;
  std::size_t epochs = 200;
  std::size_t hidden_dim = 32;
  double learning_rate = 1e-2;
  double weight_decay = 5e-3;
  Activation act = Activation::kRelu;
  std::uint64_t seed = 3407;
};

/// Glorot-uniform weights, seeded.
DenseMatrix glorot_uniform(std::size_t rows, std::size_t cols, Rng& rng);
ClassifierParams init_classifier(Arch arch, std::size_t d, std::size_t hidden, std::size_t classes,
                                 Activation act, std::uint64_t seed);

std::shared_ptr<const graph::SparseOperator> propagation_operator(const graph::Graph& graph, Arch arch,
                                                                  double gin_eps = 0.0);

DenseMatrix gcn_forward(const ClassifierParams& params, const graph::SparseOperator& adj,
                        const DenseMatrix& features);
DenseMatrix gin_forward(const ClassifierParams& params, const graph::Graph& graph, const DenseMatrix& features);
/// Dispatches on params.arch using the graph's own features.
DenseMatrix classifier_logits(const ClassifierParams& params, const graph::Graph& graph);

/// Tape form of the two-layer forward over any operator type the tape can apply.
template <typename Op>
Var classifier_forward(Tape& tape, const Op& op, Var x, Var w1, Var w2, Activation act) {
  Var h = tape.activation(tape.spmm(op, tape.matmul(x, w1)), act);
  return tape.spmm(op, tape.matmul(h, w2));
}

/// Full-batch training on mean cross-entropy over `labeled`. When
/// `loss_trace` is given it receives the loss before every step and once
/// more after the last.
ClassifierParams train_classifier(const graph::Graph& graph, std::span<const NodeId> labeled,
                                  const TrainHyper& hyper, std::vector<double>* loss_trace = nullptr);

int argmax_row(std::span<const double> row);
std::vector<int> predict_labels(const DenseMatrix& logits, std::span<const NodeId> nodes);
DenseMatrix softmax_rows(const DenseMatrix& logits);

/// d(logit[center, cls]) / dX for every feature entry.
DenseMatrix input_gradient(const ClassifierParams& params, const graph::Graph& graph, const DenseMatrix& features,
                           NodeId center, std::size_t cls);

/// MLP d -> H_g -> s*d + s(s-1)/2. Outputs are trigger features (row-major
/// s x d) followed by upper-triangular adjacency logits in (0,1), (0,2), ...,
/// (1,2), ... order.
struct GeneratorParams {
  DenseMatrix w1;  // d x H_g
  DenseMatrix b1;  // 1 x H_g
  DenseMatrix w2;  // H_g x out
  DenseMatrix b2;  // 1 x out
  Activation act = Activation::kRelu;
  std::size_t trigger_size = 3;

  std::size_t input_dim() const { return w1.rows(); }
  std::size_t hidden_dim() const { return w1.cols(); }
  friend bool operator==(const GeneratorParams&, const GeneratorParams&) = default;
};

inline constexpr std::size_t kDefaultGeneratorHidden = 64;

std::size_t trigger_pair_count(std::size_t s);
std::size_t generator_output_width(std::size_t s, std::size_t d);
GeneratorParams init_generator(std::size_t d, std::size_t s, std::size_t hidden, Activation act,
                               std::uint64_t seed);

struct GeneratorVars {
  Var w1, b1, w2, b2;
};
GeneratorVars generator_variables(Tape& tape, const GeneratorParams& gen, bool trainable);

/// Batched generator pass over B host feature rows.
struct GeneratorOutput {
  Var features;         // (B*s) x d, trigger a of host b at row b*s + a
  Var adjacency_logits;  // B x s(s-1)/2
  Var adjacency;         // B x s(s-1)/2, binarized with straight-through gradient
};
GeneratorOutput generator_forward(Tape& tape, const GeneratorVars& vars, Var hosts, std::size_t s,
                                  std::size_t d, Activation act);

graph::Trigger generate_trigger(const GeneratorParams& gen, std::span<const double> host_feature);
/// Binarizes and mirrors a row of upper-triangular logits.
DenseMatrix adjacency_from_logits(std::span<const double> logits, std::size_t s);

void save_classifier(const ClassifierParams& params, const std::filesystem::path& path);
ClassifierParams load_classifier(const std::filesystem::path& path);
void save_generator(const GeneratorParams& gen, const std::filesystem::path& path);
GeneratorParams load_generator(const std::filesystem::path& path);

enum class NeighborScope { kOneHop, kTwoHop };

/// Block-diagonal batch of per-host computational graphs. Block v holds the
/// host, its 1- and 2-hop neighbors, and every base edge with an endpoint in
/// the host's closed 1-hop neighborhood; unlisted base edges are accounted
/// for through extra degree so normalized weights match the full graph.
/// When trigger_size > 0 each block also receives s trigger rows (placed
/// after all base rows), a fixed host-trigger edge, and one weight slot per
/// internal pair at slot v*P + p.
struct ViewBatch {
  std::shared_ptr<const grad::EdgeLayout> layout;
  std::vector<NodeId> base_ids;
  std::size_t trigger_size = 0;
  std::vector<std::size_t> host_rows;
  /// Clean neighbors of each host (1-hop or 1-and-2-hop, per scope).
  std::vector<std::vector<std::size_t>> neighbor_rows;
  /// All base rows of each block except the host.
  std::vector<std::vector<std::size_t>> field_rows;
  std::vector<std::size_t> view_of_row;

  std::size_t num_views() const { return host_rows.size(); }
  std::size_t base_rows() const { return base_ids.size(); }
  std::size_t num_rows() const { return base_ids.size() + host_rows.size() * trigger_size; }
  std::size_t trigger_row(std::size_t view, std::size_t a) const {
    return base_ids.size() + view * trigger_size + a;
  }
};

ViewBatch build_view_batch(const graph::Graph& graph, std::span<const NodeId> hosts, std::size_t trigger_size,
                           NeighborScope scope = NeighborScope::kOneHop);

/// Propagation operator of a view batch for the given architecture.
/// `slot_weights` is (B*P) x 1 (or invalid when there are no slots).
grad::SparseVar view_operator(Tape& tape, const ViewBatch& batch, Arch arch, double gin_eps, Var slot_weights);

/// Input features of a view batch: gathered base rows then trigger rows.
Var view_features(Tape& tape, const ViewBatch& batch, const graph::Graph& graph, Var trigger_features);

/// Logit rows of each host (B x C).
Var view_host_logits(Tape& tape, const ViewBatch& batch, const grad::SparseVar& op, Var x, Var w1, Var w2,
                     Activation act);

enum class SaliencyTarget { kLogit, kProbability };

/// Per-row saliency: L2 norm of d(score of class cls at the block's host)/dX,
/// (rows x 1). Built from tape ops, so it is differentiable in x and in the
/// operator weights.
Var view_saliency(Tape& tape, const ViewBatch& batch, const grad::SparseVar& op, Var x, Var w1, Var w2,
                  Activation act, std::size_t cls, SaliencyTarget target = SaliencyTarget::kLogit);

}  // namespace bdlab::models
