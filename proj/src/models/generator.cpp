#include <stdexcept>

#include "bdlab/models.hpp"

namespace bdlab::models {

std::size_t trigger_pair_count(std::size_t s) { return s * (s - (s > 0 ? 1 : 0)) / 2; }

std::size_t generator_output_width(std::size_t s, std::size_t d) { return s * d + trigger_pair_count(s); }

GeneratorParams init_generator(std::size_t d, std::size_t s, std::size_t hidden, Activation act,
                               std::uint64_t seed) {
  if (d == 0 || s == 0 || hidden == 0) throw std::invalid_argument("init_generator: zero dimension");
  Rng rng(seed);
  GeneratorParams g;
  g.act = act;
  g.trigger_size = s;
  g.w1 = glorot_uniform(d, hidden, rng);
  g.b1 = DenseMatrix(1, hidden);
  g.w2 = glorot_uniform(hidden, generator_output_width(s, d), rng);
  g.b2 = DenseMatrix(1, generator_output_width(s, d));
  return g;
}

GeneratorVars generator_variables(Tape& tape, const GeneratorParams& gen, bool trainable) {
  auto make = [&](const DenseMatrix& m) { return trainable ? tape.variable(m) : tape.constant(m); };
  return {make(gen.w1), make(gen.b1), make(gen.w2), make(gen.b2)};
}

GeneratorOutput generator_forward(Tape& tape, const GeneratorVars& vars, Var hosts, std::size_t s,
                                  std::size_t d, Activation act) {
  const std::size_t batch = tape.value(hosts).rows();
  Var h = tape.activation(tape.add_row(tape.matmul(hosts, vars.w1), vars.b1), act);
  Var out = tape.add_row(tape.matmul(h, vars.w2), vars.b2);
  if (tape.value(out).cols() != generator_output_width(s, d)) {
    throw std::invalid_argument("generator_forward: output width does not match s*d + s(s-1)/2");
  }
  GeneratorOutput g;
  g.features = tape.reshape(tape.slice_cols(out, 0, s * d), batch * s, d);
  g.adjacency_logits = tape.slice_cols(out, s * d, trigger_pair_count(s));
  g.adjacency = tape.binarize_ste(g.adjacency_logits);
  return g;
}

DenseMatrix adjacency_from_logits(std::span<const double> logits, std::size_t s) {
  if (logits.size() != trigger_pair_count(s)) throw std::invalid_argument("adjacency_from_logits: wrong length");
  DenseMatrix a(s, s);
  std::size_t k = 0;
  for (std::size_t i = 0; i < s; ++i) {
    for (std::size_t j = i + 1; j < s; ++j, ++k) {
      if (logits[k] > 0.0) a(i, j) = a(j, i) = 1.0;
    }
  }
  return a;
}

graph::Trigger generate_trigger(const GeneratorParams& gen, std::span<const double> host_feature) {
  const std::size_t d = gen.input_dim();
  if (host_feature.size() != d) throw std::invalid_argument("generate_trigger: host feature dimension mismatch");
  Tape tape;
  auto vars = generator_variables(tape, gen, false);
  Var host = tape.constant(DenseMatrix(1, d, std::vector<double>(host_feature.begin(), host_feature.end())));
  auto out = generator_forward(tape, vars, host, gen.trigger_size, d, gen.act);
  graph::Trigger t;
  t.features = tape.value(out.features);
  t.adjacency = adjacency_from_logits(tape.value(out.adjacency_logits).row(0), gen.trigger_size);
  t.attach_index = 0;
  return t;
}

}  // namespace bdlab::models
