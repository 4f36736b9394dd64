#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "bdlab/graph.hpp"

namespace bdlab::graph {

SplitMask inductive_split(const Graph& graph, double mask_fraction, std::uint64_t seed) {
  if (!(mask_fraction > 0.0 && mask_fraction < 1.0)) {
    throw std::invalid_argument("inductive_split: mask_fraction must lie in (0, 1)");
  }
  const std::size_t n = graph.num_nodes();
  const auto masked = static_cast<std::size_t>(std::llround(mask_fraction * static_cast<double>(n)));
  const std::size_t targets = masked / 2;
  const std::size_t cleans = masked - targets;
  const std::size_t train = n - masked;
  if (train == 0 || targets == 0 || cleans == 0) {
    throw std::invalid_argument("inductive_split: fraction leaves an empty partition");
  }

  std::vector<NodeId> order(n);
  std::iota(order.begin(), order.end(), NodeId{0});
  Rng rng(seed);
  rng.shuffle(order);

  SplitMask split;
  split.test_target.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(targets));
  split.test_clean.assign(order.begin() + static_cast<std::ptrdiff_t>(targets),
                          order.begin() + static_cast<std::ptrdiff_t>(masked));
  split.train_labeled.assign(order.begin() + static_cast<std::ptrdiff_t>(masked), order.end());
  for (auto* s : {&split.train_labeled, &split.test_target, &split.test_clean}) {
    std::sort(s->begin(), s->end());
  }
  return split;
}

}  // namespace bdlab::graph
