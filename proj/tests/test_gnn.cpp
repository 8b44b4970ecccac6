#include <gtest/gtest.h>

#include <reccirc/gnn.hpp>
#include <reccirc/random.hpp>

using namespace reccirc;

namespace {

LabelledGraph triangle() { return LabelledGraph(3, {{0, 1}, {1, 2}, {0, 2}}, {1, 2, 3}); }

RecCGnn sum_gnn(std::size_t k = 1) { return ac_to_cgnn(1, 1, 0, "id", 1, GnnHaltingSpec::fixed_layer(k)); }

}  // namespace

TEST(RunGnn, TriangleSum) {
  auto r = run_gnn(sum_gnn(), triangle());
  EXPECT_EQ(r.graph.labels, (std::vector<double>{6, 6, 6}));
  EXPECT_EQ(r.layers, 1u);
  EXPECT_EQ(r.graph.edges, triangle().edges);
}

TEST(RunGnn, IdentityAndIsolated) {
  auto id = ac_to_cgnn(1, 0, 0, "id", 1, GnnHaltingSpec::fixed_layer(1));
  EXPECT_EQ(run_gnn(id, triangle()).graph, triangle());
  LabelledGraph lone(1, {}, {4});
  EXPECT_EQ(run_gnn(sum_gnn(), lone).graph.labels, (std::vector<double>{4}));
}

TEST(RunGnn, SignStar) {
  auto g = ac_to_cgnn(0, 1, 0, "sign", 1, GnnHaltingSpec::fixed_layer(1));
  LabelledGraph star(4, {{0, 1}, {0, 2}, {0, 3}}, {-5, 1, 2, 3});
  EXPECT_EQ(run_gnn(g, star).graph.labels[0], 1);
}

TEST(RunGnn, Periodicity) {
  std::vector<AcLayer> ls{{1, 0, 1, "id"}, {2, 0, 0, "id"}};
  auto g = ac_to_cgnn(ls, GnnHaltingSpec::fixed_layer(4));
  LabelledGraph one(1, {}, {0});
  auto r = run_gnn(g, one);
  // +1, *2, +1, *2
  std::vector<std::vector<double>> want{{1}, {2}, {3}, {6}};
  EXPECT_EQ(r.trace, want);
}

TEST(RunGnn, BudgetExhausted) {
  auto g = ac_to_cgnn(1, 0, 0, "id", 1, GnnHaltingSpec::threshold_count(99, 0));
  EXPECT_THROW(run_gnn(g, triangle(), 5), GnnNonHalting);
}

TEST(RunGnn, InnerRecurrentFibonacci) {
  RecCGnn g;
  g.layers.push_back({CircuitFamily::from_template({"fib-capped", {{"cap", 16}, {"beta", 0}}}), "id"});
  g.halting = GnnHaltingSpec::fixed_layer(1);
  LabelledGraph iso(3, {}, {4, 5, 6});
  EXPECT_EQ(run_gnn(g, iso).graph.labels, (std::vector<double>{3, 5, 8}));
  g.inner_budget = 2;
  EXPECT_THROW(run_gnn(g, iso), InnerNonHalting);
}

TEST(HltEval, Examples) {
  auto tc = GnnHaltingSpec::threshold_count(2, 4);
  EXPECT_EQ(hlt_eval_gnn(tc, 1, {2, 2, 2, 2, 2, 1}), 1);
  EXPECT_EQ(hlt_eval_gnn(tc, 1, {1, 1, 1, 1, 1, 1}), 0);
  EXPECT_EQ(hlt_eval_gnn(GnnHaltingSpec::fixed_layer(3), 3, {}), 1);
  EXPECT_EQ(hlt_eval_gnn(GnnHaltingSpec::fixed_layer(3), 2, {}), 0);
}

TEST(Family, ArityAndMemo) {
  auto f = CircuitFamily::from_template({"sum", {}});
  EXPECT_EQ(f->member(4).arity(), 4u);
  EXPECT_EQ(&f->get(4), &f->get(4));
  std::map<std::size_t, FamilyMember> tbl;
  tbl[1] = f->member(1);
  auto e = CircuitFamily::from_members(tbl, {});
  EXPECT_NO_THROW(e->get(1));
  EXPECT_THROW(e->get(2), ArityError);
  EXPECT_THROW(CircuitFamily::from_template({"nope", {}})->get(1), ArityError);
}

TEST(RunGnn, PermutationEquivariance) {
  Rng rng(5);
  auto g = ac_to_cgnn(std::vector<AcLayer>{{2, 1, -1, "id"}, {1, -1, 0, "sign"}}, GnnHaltingSpec::fixed_layer(3));
  for (int t = 0; t < 30; ++t) {
    std::size_t n = 1 + rng.index(7);
    LabelledGraph gr;
    gr.n = n;
    for (std::size_t i = 0; i < n; ++i) {
      gr.labels.push_back(static_cast<double>(rng.integer(-4, 4)));
      for (std::size_t j = i + 1; j < n; ++j)
        if (rng.chance(0.5)) gr.edges.emplace_back(i, j);
    }
    auto pi = rng.permutation(n);
    LabelledGraph pg;
    pg.n = n;
    pg.labels.resize(n);
    for (std::size_t i = 0; i < n; ++i) pg.labels[pi[i]] = gr.labels[i];
    for (auto [a, b] : gr.edges) pg.edges.emplace_back(pi[a], pi[b]);
    pg.normalize();
    auto r1 = run_gnn(g, gr).graph.labels, r2 = run_gnn(g, pg).graph.labels;
    for (std::size_t i = 0; i < n; ++i) EXPECT_EQ(r2[pi[i]], r1[i]);
  }
}
