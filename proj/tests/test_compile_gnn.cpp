#include <gtest/gtest.h>

#include <reccirc/compile_gnn.hpp>

using namespace reccirc;

namespace {

LabelledGraph triangle() { return LabelledGraph(3, {{0, 1}, {1, 2}, {0, 2}}, {1, 2, 3}); }

FamilyPtr fib(double beta = 0, double cap = 16) {
  return CircuitFamily::from_template({"fib-capped", {{"cap", cap}, {"beta", beta}}});
}

void expect_agree(const RecCGnn& gnn, const LabelledGraph& g, const RecurrentCircuit& rec) {
  auto want = encode_graph(run_gnn(gnn, g).graph);
  auto got = run(rec, encode_graph(g)).outputs;
  ASSERT_EQ(got.size(), want.size());
  for (std::size_t k = 0; k < got.size(); ++k) EXPECT_NEAR(got[k], want[k], 1e-9) << "entry " << k;
}

}  // namespace

TEST(OuterCompile, TriangleSum) {
  auto gnn = ac_to_cgnn(1, 1, 0, "id", 1, GnnHaltingSpec::fixed_layer(1));
  auto rec = compile_gnn_outer_to_circuit(gnn, triangle());
  EXPECT_TRUE(validate(rec).ok()) << validate(rec).summary();
  EXPECT_EQ(run(rec, GraphTuple{0, 1, 1, 1, 0, 1, 1, 1, 0, 1, 2, 3}).outputs,
            (std::vector<double>{0, 1, 1, 1, 0, 1, 1, 1, 0, 6, 6, 6}));
}

TEST(OuterCompile, IdentityIsIdentity) {
  auto gnn = ac_to_cgnn(1, 0, 0, "id", 1, GnnHaltingSpec::fixed_layer(1));
  auto rec = compile_gnn_outer_to_circuit(gnn, triangle());
  auto x = encode_graph(triangle());
  EXPECT_EQ(run(rec, x).outputs, x);
}

TEST(OuterCompile, PeriodicLayersAndThreshold) {
  std::vector<AcLayer> ls{{1, 1, 0, "id"}, {0, 1, -3, "sign"}, {2, 0, 1, "id"}};
  for (std::size_t k = 1; k <= 7; ++k) {
    auto gnn = ac_to_cgnn(ls, GnnHaltingSpec::fixed_layer(k));
    LabelledGraph path(4, {{0, 1}, {1, 2}, {2, 3}}, {1, -2, 0, 3});
    auto rec = compile_gnn_outer_to_circuit(gnn, path);
    expect_agree(gnn, path, rec);
    EXPECT_EQ(run(rec, encode_graph(path)).iterations, k);
  }
  auto th = ac_to_cgnn(1, 0, 1, "id", 1, GnnHaltingSpec::threshold_count(5, 0));
  auto rec = compile_gnn_outer_to_circuit(th, triangle());
  expect_agree(th, triangle(), rec);
  EXPECT_EQ(rec.underlying.count_activation("sign"), 0u);
}

TEST(OuterCompile, RejectsRecurrentMembers) {
  RecCGnn gnn;
  gnn.layers.push_back({fib(), "id"});
  EXPECT_THROW(compile_gnn_outer_to_circuit(gnn, triangle()), CompileError);
}

TEST(InnerCompile, IsolatedFibonacci) {
  RecCGnn gnn;
  gnn.layers.push_back({fib(), "id"});
  gnn.halting = GnnHaltingSpec::fixed_layer(1);
  LabelledGraph iso(3, {}, {4, 5, 6});
  auto rec = compile_gnn_inner_to_circuit(gnn, iso);
  EXPECT_TRUE(validate(rec).ok()) << validate(rec).summary();
  auto out = run(rec, encode_graph(iso)).outputs;
  EXPECT_EQ(std::vector<double>(out.end() - 3, out.end()), (std::vector<double>{3, 5, 8}));
}

TEST(InnerCompile, EarlyVertexStaysFrozen) {
  RecCGnn gnn;
  gnn.layers.push_back({fib(), "id"});
  gnn.halting = GnnHaltingSpec::fixed_layer(1);
  LabelledGraph two(2, {}, {3, 6});  // halts at inner iterations 2 and 5
  auto rec = compile_gnn_inner_to_circuit(gnn, two);
  auto res = run(rec, encode_graph(two));
  EXPECT_EQ(res.iterations, 5u);
  const auto& recs = res.trace.records;
  for (std::size_t i = 1; i < recs.size(); ++i) EXPECT_EQ(recs[i].outputs[4], 2);
  EXPECT_EQ(res.outputs[5], 8);
}

TEST(InnerCompile, PlainMembersHaltImmediately) {
  auto gnn = ac_to_cgnn(1, 1, 0, "id", 1, GnnHaltingSpec::fixed_layer(1));
  auto rec = compile_gnn_inner_to_circuit(gnn, triangle());
  EXPECT_EQ(run(rec, encode_graph(triangle())).iterations, 1u);
  expect_agree(gnn, triangle(), rec);
}

TEST(InnerCompile, SeveralLayers) {
  RecCGnn gnn;
  gnn.layers.push_back({fib(1, 5), "id"});
  gnn.layers.push_back({CircuitFamily::from_template({"affine", {{"alpha", 1}, {"beta", -1}, {"gamma", 2}}}), "id"});
  gnn.halting = GnnHaltingSpec::fixed_layer(3);
  LabelledGraph path(3, {{0, 1}, {1, 2}}, {3, 1, 4});
  expect_agree(gnn, path, compile_gnn_inner_to_circuit(gnn, path));
  gnn.halting = GnnHaltingSpec::threshold_count(1, 0);
  EXPECT_THROW(compile_gnn_inner_to_circuit(gnn, path), CompileError);
}

TEST(FullCompile, MatchesInterpreter) {
  RecCGnn gnn;
  gnn.layers.push_back({fib(1, 4), "id"});
  gnn.layers.push_back({CircuitFamily::from_template({"affine", {{"alpha", 1}, {"beta", -1}, {"gamma", 0}}}), "sign"});
  LabelledGraph path(3, {{0, 1}, {1, 2}}, {3, 1, 4});
  for (std::size_t k = 1; k <= 4; ++k) {
    gnn.halting = GnnHaltingSpec::fixed_layer(k);
    expect_agree(gnn, path, compile_gnn_full_to_circuit(gnn, path));
  }
  gnn.halting = GnnHaltingSpec::threshold_count(1, 1);
  expect_agree(gnn, path, compile_gnn_full_to_circuit(gnn, path));
}

TEST(FullCompile, DegeneratesToOuter) {
  std::vector<AcLayer> ls{{1, 1, 0, "id"}, {2, -1, 1, "id"}};
  auto gnn = ac_to_cgnn(ls, GnnHaltingSpec::fixed_layer(3));
  auto full = compile_gnn_full_to_circuit(gnn, triangle());
  auto outer = compile_gnn_outer_to_circuit(gnn, triangle());
  auto x = encode_graph(triangle());
  auto a = run(full, x), b = run(outer, x);
  EXPECT_EQ(a.outputs, b.outputs);
  EXPECT_EQ(a.iterations, b.iterations);
}
