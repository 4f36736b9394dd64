#include <cmath>
#include <fstream>
#include <set>

#include <gtest/gtest.h>

#include "bdlab/graph.hpp"
#include "bdlab/graph_io.hpp"
#include "test_util.hpp"

using namespace bdlab;
using namespace bdlab::graph;

namespace {

void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

Graph labeled_path(std::vector<int> labels) {
  const std::size_t n = labels.size();
  std::vector<Edge> edges;
  for (NodeId i = 0; i + 1 < n; ++i) edges.push_back({i, i + 1});
  return Graph(3, DenseMatrix(n, 1, 1.0), std::move(labels), std::move(edges));
}

}  // namespace

TEST(GraphIo, LoadsTwoNodeFile) {
  auto dir = fixture::scratch_dir("io_two");
  write_file(dir / "nodes.txt", "2 2 2\n0 0 1.0 2.0\n1 1 -0.5 0.25\n");
  write_file(dir / "edges.txt", "0 1\n");
  const Graph g = load_graph(dir / "nodes.txt", dir / "edges.txt");
  EXPECT_EQ(g.num_nodes(), 2u);
  EXPECT_EQ(g.feature_dim(), 2u);
  ASSERT_EQ(g.num_edges(), 1u);
  EXPECT_EQ(g.edges()[0], (Edge{0, 1}));
  EXPECT_EQ(g.label(1), 1);
  EXPECT_DOUBLE_EQ(g.features()(1, 1), 0.25);
}

TEST(GraphIo, EdgeEndpointOutOfRange) {
  auto dir = fixture::scratch_dir("io_range");
  write_file(dir / "nodes.txt", "2 1 2\n0 0 1\n1 1 2\n");
  write_file(dir / "edges.txt", "0 9\n");
  try {
    load_graph(dir / "nodes.txt", dir / "edges.txt");
    FAIL() << "expected a parse error";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("endpoint 9 out of range"), std::string::npos) << e.what();
    EXPECT_NE(std::string(e.what()).find(":1"), std::string::npos) << e.what();
  }
}

TEST(GraphIo, RejectsNonFiniteFeature) {
  auto dir = fixture::scratch_dir("io_nan");
  write_file(dir / "nodes.txt", "1 1 1\n0 0 nan\n");
  write_file(dir / "edges.txt", "");
  EXPECT_THROW(load_graph(dir / "nodes.txt", dir / "edges.txt"), ParseError);
}

TEST(GraphIo, RoundTripIsIdentity) {
  auto dir = fixture::scratch_dir("io_round");
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    SyntheticSpec spec;
    spec.n = 120;
    spec.class_means = random_class_means(spec.num_classes, spec.dim, 1.0, seed);
    spec.seed = seed;
    const Graph g = generate_synthetic(spec);
    save_graph(g, dir / "n.txt", dir / "e.txt");
    EXPECT_EQ(load_graph(dir / "n.txt", dir / "e.txt"), g);
  }
  // unlabeled rows survive too
  const Graph u(2, DenseMatrix{{0.1}, {1.0 / 3.0}}, {kUnlabeled, 1}, {{0, 1}});
  save_graph(u, dir / "n.txt", dir / "e.txt");
  EXPECT_EQ(load_graph(dir / "n.txt", dir / "e.txt"), u);
}

TEST(GraphIo, EmptyEdgeGraphWritesEmptyEdgeFile) {
  auto dir = fixture::scratch_dir("io_empty");
  const Graph g(1, DenseMatrix(3, 2, 0.5), {0, 0, 0}, {});
  save_graph(g, dir / "n.txt", dir / "e.txt");
  EXPECT_EQ(std::filesystem::file_size(dir / "e.txt"), 0u);
  EXPECT_EQ(load_graph(dir / "n.txt", dir / "e.txt"), g);
}

TEST(GraphIo, SplitRoundTrip) {
  auto dir = fixture::scratch_dir("io_split");
  const SplitMask s{{0, 3, 4}, {1}, {2, 5}};
  save_split(s, dir / "split.txt");
  EXPECT_EQ(load_split(dir / "split.txt"), s);
}

TEST(Graph, RejectsStructuralViolations) {
  EXPECT_THROW(Graph(2, DenseMatrix(2, 1), {0, 1}, {{0, 0}}), std::invalid_argument);
  EXPECT_THROW(Graph(2, DenseMatrix(2, 1), {0, 1}, {{0, 1}, {1, 0}}), std::invalid_argument);
  EXPECT_THROW(Graph(2, DenseMatrix(2, 1), {0, 2}, {}), std::invalid_argument);
  EXPECT_THROW(Graph(2, DenseMatrix(2, 1), {0, 1}, {{0, 2}}), std::invalid_argument);
}

TEST(Synthetic, HomophilyNearTarget) {
  SyntheticSpec spec;
  spec.n = 1000;
  spec.num_classes = 2;
  spec.homophily = 0.9;
  spec.class_means = random_class_means(2, spec.dim, 1.0, 5);
  const double h = edge_homophily(generate_synthetic(spec));
  EXPECT_GE(h, 0.85);
  EXPECT_LE(h, 0.95);
}

TEST(Synthetic, HomophilyPropertyAcrossSettings) {
  for (double target : {0.2, 0.5, 0.8}) {
    for (std::size_t c : {2u, 5u}) {
      SyntheticSpec spec;
      spec.n = 1500;
      spec.num_classes = c;
      spec.homophily = target;
      spec.class_means = random_class_means(c, spec.dim, 1.0, 9);
      spec.seed = 100 + c;
      EXPECT_NEAR(edge_homophily(generate_synthetic(spec)), target, 0.05) << "h=" << target << " C=" << c;
    }
  }
}

TEST(Synthetic, ZeroNoiseGivesClassMeans) {
  SyntheticSpec spec;
  spec.n = 200;
  spec.num_classes = 3;
  spec.noise_scale = 0.0;
  spec.class_means = random_class_means(3, spec.dim, 0.9, 4);
  const Graph g = generate_synthetic(spec);
  for (NodeId i = 0; i < g.num_nodes(); ++i) {
    auto mu = spec.class_means.row(static_cast<std::size_t>(g.label(i)));
    auto x = g.feature(i);
    for (std::size_t j = 0; j < spec.dim; ++j) ASSERT_EQ(x[j], mu[j]);
  }
}

TEST(Synthetic, FeatureBoundClamps) {
  SyntheticSpec spec;
  spec.n = 300;
  spec.feature_bound = 1.0;
  spec.noise_scale = 3.0;
  spec.class_means = random_class_means(spec.num_classes, spec.dim, 1.0, 2);
  const Graph g = generate_synthetic(spec);
  for (double v : g.features().values()) ASSERT_LE(std::abs(v), 1.0);
}

TEST(Synthetic, EdgeCountAndDeterminism) {
  SyntheticSpec spec;
  spec.n = 500;
  spec.avg_degree = 6.0;
  spec.class_means = random_class_means(spec.num_classes, spec.dim, 1.0, 2);
  const Graph a = generate_synthetic(spec);
  EXPECT_EQ(a.num_edges(), 1500u);
  EXPECT_EQ(generate_synthetic(spec), a);
}

TEST(Synthetic, OneClassNeedsFullHomophily) {
  SyntheticSpec spec;
  spec.num_classes = 1;
  spec.homophily = 0.5;
  spec.class_means = DenseMatrix(1, spec.dim);
  EXPECT_THROW(generate_synthetic(spec), std::invalid_argument);
}

TEST(Homophily, HandCounts) {
  EXPECT_DOUBLE_EQ(edge_homophily(labeled_path({1, 1, 1})), 1.0);
  EXPECT_DOUBLE_EQ(edge_homophily(labeled_path({0, 1, 0, 1})), 0.0);
  EXPECT_NEAR(edge_homophily(labeled_path({2, 2, 2, 0})), 2.0 / 3.0, 1e-15);
  EXPECT_THROW(edge_homophily(Graph(1, DenseMatrix(2, 1), {0, 0}, {})), std::invalid_argument);
  EXPECT_THROW(edge_homophily(Graph(1, DenseMatrix(2, 1), {0, kUnlabeled}, {{0, 1}})), std::invalid_argument);
}

TEST(Split, SizesAndDisjointness) {
  const Graph g = fixture::random_graph(100, 2, 2, 0.05, 1);
  const SplitMask s = inductive_split(g, 0.5, 7);
  EXPECT_EQ(s.train_labeled.size(), 50u);
  EXPECT_EQ(s.test_target.size(), 25u);
  EXPECT_EQ(s.test_clean.size(), 25u);
  EXPECT_EQ(inductive_split(g, 0.5, 7), s);
}

TEST(Split, PartitionPropertyForManyFractions) {
  const Graph g = fixture::random_graph(77, 1, 2, 0.0, 3);
  for (double f : {0.05, 0.2, 0.37, 0.5, 0.8, 0.95}) {
    for (std::uint64_t seed : {1u, 2u}) {
      const SplitMask s = inductive_split(g, f, seed);
      std::set<NodeId> all;
      for (const auto* part : {&s.train_labeled, &s.test_target, &s.test_clean}) {
        EXPECT_TRUE(std::is_sorted(part->begin(), part->end()));
        all.insert(part->begin(), part->end());
      }
      EXPECT_EQ(all.size(), 77u) << f;
      EXPECT_EQ(s.train_labeled.size() + s.test_target.size() + s.test_clean.size(), 77u);
      EXPECT_EQ(inductive_split(g, f, seed), s);
    }
  }
  EXPECT_THROW(inductive_split(g, 0.0, 1), std::invalid_argument);
  EXPECT_THROW(inductive_split(fixture::random_graph(2, 1, 1, 0.0, 1), 0.5, 1), std::invalid_argument);
}

TEST(NormalizedAdjacency, TwoNodesWithLoops) {
  const Graph g(1, DenseMatrix(2, 1), {0, 0}, {{0, 1}});
  const auto dense = normalized_adjacency(g, true).to_dense();
  for (double v : dense.values()) EXPECT_DOUBLE_EQ(v, 0.5);
}

TEST(NormalizedAdjacency, IsolatedNodeWithLoop) {
  const Graph g(1, DenseMatrix(1, 1), {0}, {});
  EXPECT_DOUBLE_EQ(normalized_adjacency(g, true).to_dense()(0, 0), 1.0);
}

TEST(NormalizedAdjacency, NoLoopsDegreesOneAndTwo) {
  const Graph g(1, DenseMatrix(3, 1), {0, 0, 0}, {{0, 1}, {1, 2}});
  const auto a = normalized_adjacency(g, false).to_dense();
  EXPECT_NEAR(a(0, 1), 1.0 / std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(a(0, 1), 0.70711, 1e-5);
  EXPECT_EQ(a(1, 1), 0.0);
}

TEST(NormalizedAdjacency, MatchesDenseFormula) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const std::size_t n = 2 + seed * 3 % 63;
    const Graph g = fixture::random_graph(n, 1, 2, 0.15, seed);
    for (bool loops : {true, false}) {
      const auto ours = normalized_adjacency(g, loops).to_dense();
      const auto oracle = fixture::dense_normalized(g, loops);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) ASSERT_NEAR(ours(i, j), oracle[i][j], 1e-15);
      }
    }
  }
}

TEST(SparseOperator, ApplyEqualsDenseProduct) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const Graph g = fixture::random_graph(5 * seed, 3, 2, 0.2, seed);
    const auto op = normalized_adjacency(g, true);
    const auto got = op.apply(g.features());
    const auto want = matmul(op.to_dense(), g.features());
    for (std::size_t k = 0; k < got.size(); ++k) ASSERT_NEAR(got.values()[k], want.values()[k], 1e-10);
  }
}

TEST(Trigger, ErdosRenyiExtremes) {
  const FeatureSampler ones = [](Rng&) { return std::vector<double>{1.0, 2.0}; };
  const Trigger full = erdos_renyi_trigger(3, 1.0, ones, 1);
  EXPECT_EQ(full.internal_edges().size(), 3u);
  EXPECT_NO_THROW(full.validate(2));
  const Trigger none = erdos_renyi_trigger(3, 0.0, ones, 1);
  EXPECT_TRUE(none.internal_edges().empty());
  EXPECT_EQ(none.size(), kBaselineTriggerSize);
  EXPECT_THROW(full.validate(3), std::invalid_argument);
}

TEST(Trigger, RowSamplerDrawsFromPool) {
  const Graph g(2, DenseMatrix{{1.0}, {2.0}, {3.0}}, {0, 1, 0}, {});
  const auto sampler = row_sampler(g, {0, 2});
  Rng rng(3);
  for (int i = 0; i < 50; ++i) {
    const double v = sampler(rng)[0];
    EXPECT_TRUE(v == 1.0 || v == 3.0);
  }
}

TEST(Graph, AugmentAndInducedSubgraph) {
  const Graph g = fixture::random_graph(10, 2, 2, 0.4, 8);
  const Graph big = augment(g, DenseMatrix(1, 2, 0.5), std::vector<Edge>{{3, 10}});
  EXPECT_EQ(big.num_nodes(), 11u);
  EXPECT_FALSE(big.is_labeled(10));
  EXPECT_TRUE(big.has_edge(10, 3));
  const std::vector<NodeId> keep{1, 4, 5, 9};
  const Subgraph sub = induced_subgraph(g, keep);
  EXPECT_EQ(sub.original_id, keep);
  for (const auto& e : sub.graph.edges()) EXPECT_TRUE(g.has_edge(keep[e.u], keep[e.v]));
  std::size_t expect = 0;
  for (const auto& e : g.edges()) {
    expect += std::count(keep.begin(), keep.end(), e.u) && std::count(keep.begin(), keep.end(), e.v);
  }
  EXPECT_EQ(sub.graph.num_edges(), expect);
}
