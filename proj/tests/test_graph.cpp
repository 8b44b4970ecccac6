#include <gtest/gtest.h>

#include <reccirc/fixtures.hpp>
#include <reccirc/graph.hpp>
#include <reccirc/random.hpp>

using namespace reccirc;

TEST(GraphTuple, EncodeExamples) {
  EXPECT_EQ(encode_graph(LabelledGraph(2, {{0, 1}}, {3, 4})), (GraphTuple{0, 1, 1, 0, 3, 4}));
  EXPECT_EQ(encode_graph(LabelledGraph(1, {}, {7})), (GraphTuple{0, 7}));
}

TEST(GraphTuple, RoundTrip) {
  Rng rng(11);
  for (int t = 0; t < 100; ++t) {
    std::size_t n = 1 + rng.index(8);
    LabelledGraph g;
    g.n = n;
    for (std::size_t i = 0; i < n; ++i) {
      g.labels.push_back(static_cast<double>(rng.integer(-4, 4)));
      for (std::size_t j = i + 1; j < n; ++j)
        if (rng.chance(0.4)) g.edges.emplace_back(i, j);
    }
    EXPECT_EQ(decode_graph(encode_graph(g)), g);
  }
}

TEST(GraphTuple, DecodeErrors) {
  EXPECT_THROW(decode_graph({0, 1, 2}), ArityError);
  EXPECT_THROW(decode_graph({0, 1, 0, 0, 3, 4}), ArityError);
  EXPECT_THROW(decode_graph({0, 2, 2, 0, 3, 4}), ArityError);
  EXPECT_THROW(decode_graph({1, 7}), ArityError);
  EXPECT_THROW(LabelledGraph(2, {{1, 1}}, {0, 0}).validate(), ArityError);
}

TEST(Bipartite, Structure) {
  auto g = bipartite_encode(2, 2, {3, 4});
  EXPECT_EQ(g.n, 4u);
  EXPECT_EQ(g.edges.size(), 4u);
  EXPECT_EQ(g.labels, (std::vector<double>{3, 4, 1, 2}));
  auto deg = bipartite_encode(3, 2, {1, 1, 1}).degrees();
  EXPECT_EQ(deg[3], 3u);
  EXPECT_EQ(deg[4], 3u);
  EXPECT_EQ(bipartite_encode(1, 1, {5}).edges.size(), 1u);
}

class FibEncoding : public ::testing::Test {
 protected:
  RecurrentCircuit rec = fold_iteration_counter(fixtures::fibonacci());
  SymbolicLabelledGraph s = symbolic_encode_circuit(rec);
};

TEST_F(FibEncoding, DegreesIdentifyGates) {
  auto deg = s.structure().degrees();
  std::set<std::size_t> seen;
  for (std::size_t v = 0; v < s.n; ++v) {
    if (s.roles[v].part == Part::Dummy) {
      EXPECT_EQ(deg[v], 1u);
      continue;
    }
    EXPECT_EQ(deg[v], s.roles[v].global_index * s.r_prime);
    EXPECT_TRUE(seen.insert(deg[v]).second);
  }
  EXPECT_EQ(seen.size(), s.gate_vertices);
}

TEST_F(FibEncoding, HaltingOutputCountExcludesCounter) {
  std::size_t outs = 0;
  for (const auto& r : s.roles) outs += r.halting_output;
  EXPECT_EQ(outs, 5u);
}

TEST_F(FibEncoding, UnderlyingEdgesPresent) {
  std::set<Edge> es(s.edges.begin(), s.edges.end());
  for (GateId g = 0; g < rec.underlying.size(); ++g)
    for (GateId p : rec.underlying.gates[g].preds) EXPECT_TRUE(es.count({std::min(p, g), std::max(p, g)}));
}

TEST_F(FibEncoding, Instantiate) {
  auto g = instantiate_encoding(s, rec, {5});
  EXPECT_EQ(g.edges, s.edges);
  const auto& c = rec.underlying;
  EXPECT_EQ(g.labels[c.inputs[0]], 5);
  EXPECT_EQ(g.labels[c.aux_memory[0]], 1);
  EXPECT_EQ(g.labels[c.aux_memory[1]], 0);
  for (std::size_t v = 0; v < g.n; ++v)
    if (s.labels[v].kind == SymLabel::Kind::Literal) EXPECT_EQ(g.labels[v], 1);
  EXPECT_EQ(instantiate_encoding(s, rec, {5}), g);
  EXPECT_THROW(instantiate_encoding(s, rec, {1, 2}), ArityError);
}

TEST(SymbolicEncoding, RequiresFoldedCircuit) {
  EXPECT_THROW(symbolic_encode_circuit(fixtures::fibonacci()), CompileError);
}
