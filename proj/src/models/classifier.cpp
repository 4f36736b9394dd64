#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "bdlab/models.hpp"
#include "bdlab/optim.hpp"

namespace bdlab::models {

const char* arch_name(Arch arch) { return arch == Arch::kGcn ? "gcn" : "gin"; }

Arch parse_arch(const std::string& name) {
  if (name == "gcn") return Arch::kGcn;
  if (name == "gin") return Arch::kGin;
  throw std::invalid_argument("unknown architecture '" + name + "'");
}

DenseMatrix glorot_uniform(std::size_t rows, std::size_t cols, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
  DenseMatrix m(rows, cols);
  for (double& v : m.values()) v = rng.uniform(-bound, bound);
  return m;
}

ClassifierParams init_classifier(Arch arch, std::size_t d, std::size_t hidden, std::size_t classes,
                                 Activation act, std::uint64_t seed) {
  if (d == 0 || hidden == 0 || classes == 0) throw std::invalid_argument("init_classifier: zero dimension");
  Rng rng(seed);
  ClassifierParams p;
  p.arch = arch;
  p.act = act;
  p.w1 = glorot_uniform(d, hidden, rng);
  p.w2 = glorot_uniform(hidden, classes, rng);
  return p;
}

std::shared_ptr<const graph::SparseOperator> propagation_operator(const graph::Graph& graph, Arch arch,
                                                                  double gin_eps) {
  if (arch == Arch::kGcn) return std::make_shared<graph::SparseOperator>(graph::normalized_adjacency(graph, true));
  return std::make_shared<graph::SparseOperator>(graph::sum_adjacency(graph.num_nodes(), graph.edges(), 1.0 + gin_eps));
}

namespace {

void check_dims(const ClassifierParams& p, std::size_t n_op, const DenseMatrix& x) {
  if (x.rows() != n_op) throw std::invalid_argument("classifier: operator size does not match feature rows");
  if (x.cols() != p.input_dim()) throw std::invalid_argument("classifier: feature dimension mismatch");
  if (p.w2.rows() != p.hidden_dim()) throw std::invalid_argument("classifier: W1/W2 shapes disagree");
}

DenseMatrix two_layer(const ClassifierParams& p, const graph::SparseOperator& op, const DenseMatrix& x) {
  check_dims(p, op.n, x);
  DenseMatrix h = op.apply(matmul(x, p.w1));
  for (double& v : h.values()) v = grad::activate(v, p.act);
  return op.apply(matmul(h, p.w2));
}

}  // namespace

DenseMatrix gcn_forward(const ClassifierParams& params, const graph::SparseOperator& adj,
                        const DenseMatrix& features) {
  return two_layer(params, adj, features);
}

DenseMatrix gin_forward(const ClassifierParams& params, const graph::Graph& graph, const DenseMatrix& features) {
  return two_layer(params, graph::sum_adjacency(graph.num_nodes(), graph.edges(), 1.0 + params.gin_eps), features);
}

DenseMatrix classifier_logits(const ClassifierParams& params, const graph::Graph& graph) {
  if (params.arch == Arch::kGcn) {
    return gcn_forward(params, graph::normalized_adjacency(graph, true), graph.features());
  }
  return gin_forward(params, graph, graph.features());
}

ClassifierParams train_classifier(const graph::Graph& graph, std::span<const NodeId> labeled,
                                  const TrainHyper& hyper, std::vector<double>* loss_trace) {
  if (labeled.empty()) throw std::invalid_argument("train_classifier: no labeled nodes");
  if (hyper.hidden_dim == 0) throw std::invalid_argument("train_classifier: hidden_dim must be >= 1");
  std::vector<std::size_t> rows;
  std::vector<int> labels;
  for (NodeId v : labeled) {
    if (v >= graph.num_nodes()) throw std::invalid_argument("train_classifier: node out of range");
    if (!graph.is_labeled(v)) throw std::invalid_argument("train_classifier: node " + std::to_string(v) + " is unlabeled");
    rows.push_back(v);
    labels.push_back(graph.label(v));
  }
  ClassifierParams p = init_classifier(hyper.arch, graph.feature_dim(), hyper.hidden_dim, graph.num_classes(),
                                       hyper.act, hyper.seed);
  const auto op = propagation_operator(graph, p.arch, p.gin_eps);
  grad::OptimState state;
  state.lr = hyper.learning_rate;
  state.weight_decay = hyper.weight_decay;
  const double inv = 1.0 / static_cast<double>(rows.size());

  auto loss_of = [&](bool backward, std::vector<DenseMatrix>* grads) {
    Tape tape;
    Var x = tape.constant(graph.features());
    Var w1 = backward ? tape.variable(p.w1) : tape.constant(p.w1);
    Var w2 = backward ? tape.variable(p.w2) : tape.constant(p.w2);
    Var logits = classifier_forward(tape, op, x, w1, w2, p.act);
    Var loss = tape.scale(tape.cross_entropy(logits, rows, labels), inv);
    if (backward) {
      tape.backward(loss);
      grads->push_back(tape.grad(w1));
      grads->push_back(tape.grad(w2));
    }
    return tape.scalar(loss);
  };

  for (std::size_t epoch = 0; epoch < hyper.epochs; ++epoch) {
    std::vector<DenseMatrix> grads;
    const double loss = loss_of(true, &grads);
    if (loss_trace) loss_trace->push_back(loss);
    DenseMatrix* params[] = {&p.w1, &p.w2};
    grad::adam_step(params, grads, state);
  }
  if (loss_trace) loss_trace->push_back(loss_of(false, nullptr));
  return p;
}

int argmax_row(std::span<const double> row) {
  if (row.empty()) throw std::invalid_argument("argmax_row: empty row");
  std::size_t best = 0;
  for (std::size_t j = 1; j < row.size(); ++j) {
    if (row[j] > row[best]) best = j;
  }
  return static_cast<int>(best);
}

std::vector<int> predict_labels(const DenseMatrix& logits, std::span<const NodeId> nodes) {
  std::vector<int> out;
  out.reserve(nodes.size());
  for (NodeId v : nodes) {
    if (v >= logits.rows()) throw std::invalid_argument("predict_labels: node out of range");
    out.push_back(argmax_row(logits.row(v)));
  }
  return out;
}

DenseMatrix softmax_rows(const DenseMatrix& logits) {
  DenseMatrix p = logits;
  for (std::size_t i = 0; i < p.rows(); ++i) {
    auto r = p.row(i);
    const double mx = *std::max_element(r.begin(), r.end());
    double z = 0.0;
    for (double& v : r) z += (v = std::exp(v - mx));
    for (double& v : r) v /= z;
  }
  return p;
}

DenseMatrix input_gradient(const ClassifierParams& params, const graph::Graph& graph, const DenseMatrix& features,
                           NodeId center, std::size_t cls) {
  if (center >= graph.num_nodes()) throw std::invalid_argument("input_gradient: center out of range");
  if (cls >= params.num_classes()) throw std::invalid_argument("input_gradient: class out of range");
  const auto op = propagation_operator(graph, params.arch, params.gin_eps);
  Tape tape;
  Var x = tape.variable(features);
  Var logits = classifier_forward(tape, op, x, tape.constant(params.w1), tape.constant(params.w2), params.act);
  DenseMatrix pick(features.rows(), params.num_classes());
  pick(center, cls) = 1.0;
  Var score = tape.sum(tape.hadamard(logits, tape.constant(std::move(pick))));
  tape.backward(score);
  return tape.grad(x);
}

}  // namespace bdlab::models
