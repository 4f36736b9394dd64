#include "bdlab/graph_io.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <unordered_map>

namespace bdlab::graph {

namespace {

std::string where(const std::filesystem::path& path, std::size_t line) {
  return path.string() + ":" + std::to_string(line) + ": ";
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

long long parse_int(const std::string& tok, const std::string& ctx) {
  char* end = nullptr;
  errno = 0;
  const long long v = std::strtoll(tok.c_str(), &end, 10);
  if (errno != 0 || end == tok.c_str() || *end != '\0') {
    throw ParseError(ctx + "expected integer, got '" + tok + "'");
  }
  return v;
}

double parse_real(const std::string& tok, const std::string& ctx) {
  char* end = nullptr;
  const double v = std::strtod(tok.c_str(), &end);
  if (end == tok.c_str() || *end != '\0') {
    throw ParseError(ctx + "expected number, got '" + tok + "'");
  }
  if (!std::isfinite(v)) throw ParseError(ctx + "non-finite feature '" + tok + "'");
  return v;
}

std::vector<std::string> tokens(const std::string& line) {
  std::istringstream ss(line);
  std::vector<std::string> out;
  for (std::string t; ss >> t;) out.push_back(t);
  return out;
}

void write_real(std::ostream& out, double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  out << buf;
}

}  // namespace

Graph load_graph(const std::filesystem::path& nodes_path, const std::filesystem::path& edges_path) {
  auto in = open_in(nodes_path);
  std::string line;
  std::size_t lineno = 0;
  std::vector<std::string> head;
  while (head.empty() && std::getline(in, line)) {
    ++lineno;
    head = tokens(line);
  }
  if (head.size() != 3) throw ParseError(where(nodes_path, lineno) + "header must be `n d C`");
  const auto n = parse_int(head[0], where(nodes_path, lineno));
  const auto d = parse_int(head[1], where(nodes_path, lineno));
  const auto c = parse_int(head[2], where(nodes_path, lineno));
  if (n < 0 || d < 0 || c < 0) throw ParseError(where(nodes_path, lineno) + "negative header value");

  DenseMatrix features(static_cast<std::size_t>(n), static_cast<std::size_t>(d));
  std::vector<int> labels;
  labels.reserve(static_cast<std::size_t>(n));
  std::unordered_map<long long, NodeId> position;
  while (std::getline(in, line)) {
    ++lineno;
    auto tok = tokens(line);
    if (tok.empty()) continue;
    const auto ctx = where(nodes_path, lineno);
    if (labels.size() == static_cast<std::size_t>(n)) throw ParseError(ctx + "more node lines than declared");
    if (tok.size() != static_cast<std::size_t>(d) + 2) {
      throw ParseError(ctx + "expected " + std::to_string(d + 2) + " fields, got " +
                       std::to_string(tok.size()));
    }
    const auto id = parse_int(tok[0], ctx);
    const auto label = parse_int(tok[1], ctx);
    if (label < -1 || label >= c) throw ParseError(ctx + "label " + tok[1] + " out of range");
    if (!position.emplace(id, static_cast<NodeId>(labels.size())).second) {
      throw ParseError(ctx + "duplicate node id " + tok[0]);
    }
    auto row = features.row(labels.size());
    for (long long j = 0; j < d; ++j) row[j] = parse_real(tok[j + 2], ctx);
    labels.push_back(static_cast<int>(label));
  }
  if (labels.size() != static_cast<std::size_t>(n)) {
    throw ParseError(nodes_path.string() + ": declared " + std::to_string(n) + " nodes, found " +
                     std::to_string(labels.size()));
  }

  auto ein = open_in(edges_path);
  std::vector<Edge> edges;
  lineno = 0;
  while (std::getline(ein, line)) {
    ++lineno;
    auto tok = tokens(line);
    if (tok.empty()) continue;
    const auto ctx = where(edges_path, lineno);
    if (tok.size() != 2) throw ParseError(ctx + "expected `src dst`");
    NodeId ends[2];
    for (int k = 0; k < 2; ++k) {
      const auto id = parse_int(tok[k], ctx);
      auto it = position.find(id);
      if (it == position.end()) throw ParseError(ctx + "endpoint " + tok[k] + " out of range");
      ends[k] = it->second;
    }
    if (ends[0] == ends[1]) throw ParseError(ctx + "self-loop on node " + tok[0]);
    edges.push_back(Edge::canonical(ends[0], ends[1]));
  }
  try {
    return Graph(static_cast<std::size_t>(c), std::move(features), std::move(labels), std::move(edges));
  } catch (const std::invalid_argument& e) {
    throw ParseError(edges_path.string() + ": " + e.what());
  }
}

void save_graph(const Graph& graph, const std::filesystem::path& nodes_path,
                const std::filesystem::path& edges_path) {
  auto out = open_out(nodes_path);
  out << graph.num_nodes() << ' ' << graph.feature_dim() << ' ' << graph.num_classes() << '\n';
  for (std::size_t i = 0; i < graph.num_nodes(); ++i) {
    out << i << ' ' << graph.label(static_cast<NodeId>(i));
    for (double v : graph.feature(static_cast<NodeId>(i))) {
      out << ' ';
      write_real(out, v);
    }
    out << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + nodes_path.string());

  auto eout = open_out(edges_path);
  for (const auto& e : graph.edges()) eout << e.u << ' ' << e.v << '\n';
  if (!eout) throw std::runtime_error("write failed: " + edges_path.string());
}

void save_split(const SplitMask& split, const std::filesystem::path& path) {
  auto out = open_out(path);
  auto line = [&](const char* tag, const std::vector<NodeId>& ids) {
    out << tag;
    for (NodeId v : ids) out << ' ' << v;
    out << '\n';
  };
  line("train:", split.train_labeled);
  line("target:", split.test_target);
  line("clean:", split.test_clean);
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

SplitMask load_split(const std::filesystem::path& path) {
  auto in = open_in(path);
  SplitMask split;
  bool seen[3] = {false, false, false};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto tok = tokens(line);
    if (tok.empty()) continue;
    const auto ctx = where(path, lineno);
    std::vector<NodeId>* dst = nullptr;
    int slot = 0;
    if (tok[0] == "train:") {
      dst = &split.train_labeled;
      slot = 0;
    } else if (tok[0] == "target:") {
      dst = &split.test_target;
      slot = 1;
    } else if (tok[0] == "clean:") {
      dst = &split.test_clean;
      slot = 2;
    } else {
      throw ParseError(ctx + "unknown split tag '" + tok[0] + "'");
    }
    if (seen[slot]) throw ParseError(ctx + "repeated tag " + tok[0]);
    seen[slot] = true;
    for (std::size_t i = 1; i < tok.size(); ++i) {
      const auto v = parse_int(tok[i], ctx);
      if (v < 0) throw ParseError(ctx + "negative node id");
      dst->push_back(static_cast<NodeId>(v));
    }
  }
  if (!(seen[0] && seen[1] && seen[2])) throw ParseError(path.string() + ": missing split line");
  return split;
}

}  // namespace bdlab::graph
