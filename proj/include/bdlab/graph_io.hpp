#pragma once

#include <filesystem>

#include "bdlab/graph.hpp"

namespace bdlab::graph {

/// Node file: header `n d C`, then `id label f_1 ... f_d` per node in id
/// order (label -1 = unlabeled). Edge file: one `src dst` pair per line.
Graph load_graph(const std::filesystem::path& nodes_path, const std::filesystem::path& edges_path);

/// Features are written with 17 significant digits, which round-trips
/// every double exactly.
void save_graph(const Graph& graph, const std::filesystem::path& nodes_path,
                const std::filesystem::path& edges_path);

/// Three lines `train:`, `target:`, `clean:` each followed by ids.
void save_split(const SplitMask& split, const std::filesystem::path& path);
SplitMask load_split(const std::filesystem::path& path);

}  // namespace bdlab::graph
