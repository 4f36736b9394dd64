#include <limits>
#include <stdexcept>

#include "bdlab/models.hpp"

namespace bdlab::models {

ViewBatch build_view_batch(const graph::Graph& graph, std::span<const NodeId> hosts, std::size_t trigger_size,
                           NeighborScope scope) {
  constexpr auto kAbsent = std::numeric_limits<std::size_t>::max();
  auto layout = std::make_shared<grad::EdgeLayout>();
  ViewBatch batch;
  batch.trigger_size = trigger_size;
  std::vector<std::size_t> local(graph.num_nodes(), kAbsent);
  std::vector<char> closed(graph.num_nodes(), 0);

  for (std::size_t v = 0; v < hosts.size(); ++v) {
    const NodeId host = hosts[v];
    if (host >= graph.num_nodes()) throw std::invalid_argument("build_view_batch: host out of range");
    const std::size_t offset = batch.base_ids.size();
    std::vector<NodeId> members{host};
    auto enter = [&](NodeId u) {
      if (local[u] != kAbsent) return false;
      local[u] = offset + members.size() - 1;
      return true;
    };
    local[host] = offset;
    closed[host] = 1;
    for (NodeId u : graph.neighbors(host)) {
      members.push_back(u);
      enter(u);
      closed[u] = 1;
    }
    const std::size_t ring1_end = members.size();
    for (std::size_t i = 1; i < ring1_end; ++i) {
      for (NodeId w : graph.neighbors(members[i])) {
        if (local[w] != kAbsent) continue;
        members.push_back(w);
        enter(w);
      }
    }

    std::vector<double> listed(members.size(), 0.0);
    for (std::size_t i = 0; i < ring1_end; ++i) {
      const NodeId u = members[i];
      for (NodeId w : graph.neighbors(u)) {
        if (closed[w] && local[w] < local[u]) continue;  // listed from the other endpoint
        layout->edges.push_back(graph::Edge::canonical(static_cast<NodeId>(local[u]), static_cast<NodeId>(local[w])));
        layout->weight_slot.push_back(-1);
        listed[local[u] - offset] += 1.0;
        listed[local[w] - offset] += 1.0;
      }
    }

    batch.host_rows.push_back(offset);
    std::vector<std::size_t> field;
    for (std::size_t i = 1; i < members.size(); ++i) field.push_back(offset + i);
    batch.neighbor_rows.emplace_back(field.begin(),
                                     scope == NeighborScope::kOneHop ? field.begin() + static_cast<std::ptrdiff_t>(ring1_end - 1)
                                                                     : field.end());
    batch.field_rows.push_back(std::move(field));
    for (std::size_t i = 0; i < members.size(); ++i) {
      batch.base_ids.push_back(members[i]);
      batch.view_of_row.push_back(v);
      layout->extra_degree.push_back(static_cast<double>(graph.degree(members[i])) - listed[i]);
    }
    for (NodeId u : members) {
      local[u] = kAbsent;
      closed[u] = 0;
    }
  }

  const std::size_t pairs = trigger_pair_count(trigger_size);
  for (std::size_t v = 0; v < hosts.size(); ++v) {
    for (std::size_t a = 0; a < trigger_size; ++a) {
      batch.view_of_row.push_back(v);
      layout->extra_degree.push_back(0.0);
    }
    if (trigger_size == 0) continue;
    layout->edges.push_back(graph::Edge::canonical(static_cast<NodeId>(batch.host_rows[v]),
                                                   static_cast<NodeId>(batch.trigger_row(v, 0))));
    layout->weight_slot.push_back(-1);
    std::size_t p = 0;
    for (std::size_t a = 0; a < trigger_size; ++a) {
      for (std::size_t b = a + 1; b < trigger_size; ++b, ++p) {
        layout->edges.push_back(graph::Edge::canonical(static_cast<NodeId>(batch.trigger_row(v, a)),
                                                       static_cast<NodeId>(batch.trigger_row(v, b))));
        layout->weight_slot.push_back(static_cast<std::ptrdiff_t>(v * pairs + p));
      }
    }
  }
  layout->n = batch.num_rows();
  layout->num_slots = hosts.size() * pairs;
  batch.layout = std::move(layout);
  return batch;
}

grad::SparseVar view_operator(Tape& tape, const ViewBatch& batch, Arch arch, double gin_eps, Var slot_weights) {
  if (arch == Arch::kGcn) return tape.propagation(batch.layout, grad::Aggregation::kSymmetricNormalized, 1.0, slot_weights);
  return tape.propagation(batch.layout, grad::Aggregation::kSum, 1.0 + gin_eps, slot_weights);
}

Var view_features(Tape& tape, const ViewBatch& batch, const graph::Graph& graph, Var trigger_features) {
  std::vector<std::size_t> rows(batch.base_ids.begin(), batch.base_ids.end());
  Var base = tape.constant(gather_rows(graph.features(), rows));
  if (batch.trigger_size == 0 || batch.num_views() == 0) return base;
  const Var parts[] = {base, trigger_features};
  return tape.concat_rows(parts);
}

Var view_host_logits(Tape& tape, const ViewBatch& batch, const grad::SparseVar& op, Var x, Var w1, Var w2,
                     Activation act) {
  Var logits = classifier_forward(tape, op, x, w1, w2, act);
  return tape.gather_rows(logits, std::vector<std::ptrdiff_t>(batch.host_rows.begin(), batch.host_rows.end()));
}

Var view_saliency(Tape& tape, const ViewBatch& batch, const grad::SparseVar& op, Var x, Var w1, Var w2,
                  Activation act, std::size_t cls, SaliencyTarget target) {
  const std::size_t views = batch.num_views();
  const std::size_t classes = tape.value(w2).cols();
  if (cls >= classes) throw std::invalid_argument("view_saliency: class out of range");

  // For host h the score gradient is  G = P (diag(a) act'(PXW1) diag(w)) W1^T
  // with a = P[:, h] and w the effective readout column.
  Var pre = tape.spmm(op, tape.matmul(x, w1));
  DenseMatrix indicator(batch.num_rows(), 1);
  for (std::size_t r : batch.host_rows) indicator(r, 0) = 1.0;
  Var a = tape.spmm(op, tape.constant(std::move(indicator)));
  Var m = tape.scale_rows(tape.activation_derivative(pre, act), a);

  DenseMatrix onehot(views, classes);
  for (std::size_t v = 0; v < views; ++v) onehot(v, cls) = 1.0;
  Var coef = tape.constant(onehot);
  if (target == SaliencyTarget::kProbability) {
    Var hidden = tape.activation(pre, act);
    Var logits = tape.spmm(op, tape.matmul(hidden, w2));
    Var probs = tape.row_softmax(
        tape.gather_rows(logits, std::vector<std::ptrdiff_t>(batch.host_rows.begin(), batch.host_rows.end())));
    coef = tape.scale_rows(tape.sub(tape.constant(std::move(onehot)), probs), tape.slice_cols(probs, cls, 1));
  }
  Var readout = tape.matmul(coef, tape.transpose(w2));
  Var per_row = tape.gather_rows(readout, std::vector<std::ptrdiff_t>(batch.view_of_row.begin(), batch.view_of_row.end()));
  Var g = tape.spmm(op, tape.matmul(tape.hadamard(m, per_row), tape.transpose(w1)));
  return tape.row_norms(g);
}

}  // namespace bdlab::models
