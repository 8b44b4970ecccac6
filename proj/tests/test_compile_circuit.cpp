#include <gtest/gtest.h>

#include <reccirc/compile_circuit.hpp>
#include <reccirc/fixtures.hpp>

using namespace reccirc;

namespace {

struct Simulated {
  std::vector<double> outputs;
  std::size_t layers;
};

Simulated simulate(const OuterGnnArtifact& art, const std::vector<double>& x) {
  GnnRunOptions opt;
  opt.outer_budget = 100000;
  opt.keep_trace = false;
  auto r = run_gnn(art.gnn, art.instantiate(x), opt);
  return {art.outputs_of(r.graph), r.layers};
}

std::uint64_t fib(int k) {
  std::uint64_t a = 0, b = 1;
  for (int i = 0; i < k; ++i) std::tie(a, b) = std::make_pair(b, a + b);
  return a;
}

/// Predecessor-form counter: x held, a counts down from k, output x + a at
/// halt; halting reads only the decremented value.
RecurrentCircuit pf_countdown(double k) {
  RecBuilder rb;
  auto& b = rb.b;
  GateId x = rb.input(), a = rb.aux(k);
  GateId m1 = b.constant(-1.0);
  GateId ix = b.act("id", x), ia = b.act("id", a), im = b.act("id", m1);
  GateId hold = b.add({ix}), dec = b.add({ia, im}), sum = b.add({ix, ia});
  b.output(sum);
  rb.feed(x, hold);
  rb.feed(a, dec);
  rb.halting = {dec};
  CircuitBuilder hb;
  hb.input();
  GateId v = hb.input();
  hb.output(eq_const(hb, v, 0.0));
  return std::move(rb).build(HaltingSpec::circuit_backed(std::move(hb).build()));
}

}  // namespace

TEST(Normalize, PreservesSemantics) {
  auto r0 = fold_iteration_counter(fixtures::fibonacci());
  auto n = normalize_for_gnn(r0);
  EXPECT_TRUE(validate(n).ok()) << validate(n).summary();
  for (double x = 2; x <= 10; ++x) {
    auto a = run(r0, {x}), b = run(n, {x});
    EXPECT_EQ(a.outputs, b.outputs);
    EXPECT_EQ(a.iterations, b.iterations);
  }
}

TEST(OuterGnn, Fibonacci) {
  auto art = compile_circuit_to_outer_gnn(fixtures::fibonacci());
  for (int x = 2; x <= 10; ++x) {
    auto r = run(fixtures::fibonacci(), {double(x)});
    auto s = simulate(art, {double(x)});
    EXPECT_EQ(s.outputs, (std::vector<double>{double(fib(x))})) << "x=" << x;
    EXPECT_EQ(s.layers, r.iterations * art.phase_length);
  }
  EXPECT_EQ(simulate(art, {2}).layers, art.phase_length);
}

TEST(OuterGnn, PureAddPhaseLength) {
  RecBuilder rb;
  auto& b = rb.b;
  GateId x = rb.input();
  GateId s = b.add({b.add({b.add({x})})});
  b.output(s);
  rb.feed(x, s);
  auto rec = std::move(rb).build(HaltingSpec::fixed_iteration(4));
  auto art = compile_circuit_to_outer_gnn(rec);
  auto sim = simulate(art, {5});
  EXPECT_EQ(sim.outputs, (std::vector<double>{5}));
  EXPECT_EQ(sim.layers, 4 * art.phase_length);
  EXPECT_EQ(art.phase_length, depth(art.normalized.underlying) + depth(art.graph.halting_prime) + 1);
}

TEST(OuterGnn, BuiltinHaltingAndMul) {
  auto rec = fixtures::decrement_counter(3);
  auto art = compile_circuit_to_outer_gnn(rec);
  EXPECT_EQ(simulate(art, {-2}).outputs, run(rec, {-2}).outputs);
  RecBuilder rb;
  auto& b = rb.b;
  GateId x = rb.input(), a = rb.aux(1.0);
  GateId p = b.mul({x, a});
  b.output(b.sign(b.add({p, b.constant(-10.0)})));
  rb.feed(x, x);
  rb.feed(a, p);
  rb.halting = {p};
  auto r2 = std::move(rb).build(HaltingSpec::threshold_count(16, 0));
  auto art2 = compile_circuit_to_outer_gnn(r2);
  auto s = simulate(art2, {2});
  auto want = run(r2, {2});
  EXPECT_EQ(s.outputs, want.outputs);
  EXPECT_EQ(s.layers, want.iterations * art2.phase_length);
}

TEST(OuterGnn, DegreeDispatch) {
  auto art = compile_circuit_to_outer_gnn(fixtures::fibonacci());
  const auto& s = art.graph;
  auto deg = s.structure().degrees();
  for (std::size_t i = 0; i < art.gnn.layers.size(); ++i)
    for (std::size_t v = 0; v < s.gate_vertices; ++v) {
      const auto& m = art.gnn.layers[i].family->member(deg[v] + 1).circuit();
      const auto& op = art.ops[i][v];
      if (op.kind == VertexOp::Kind::Prod) EXPECT_EQ(m.count(GateType::Mul), 1u);
      if (op.kind == VertexOp::Kind::Sum || op.kind == VertexOp::Kind::ActSum) {
        EXPECT_EQ(m.count(GateType::Add), 1u);
        if (s.roles[v].part == Part::Underlying) {
          auto t = art.normalized.underlying.gates[s.roles[v].gate].type;
          EXPECT_TRUE(t == GateType::Add || t == GateType::Output || t == GateType::Activation ||
                      is_source(t));
        }
      }
    }
}

TEST(OuterGnn, GlobalActivations) {
  {
    auto rec = pf_countdown(3);
    ASSERT_TRUE(is_predecessor_form(rec));
    auto art = compile_circuit_to_outer_gnn(rec, true);
    for (double x : {-2.0, 0.0, 4.0}) {
      auto want = run(rec, {x});
      auto s = simulate(art, {x});
      EXPECT_EQ(s.outputs, want.outputs);
      EXPECT_EQ(s.layers, want.iterations * art.phase_length);
    }
    EXPECT_EQ(art.phase_length, art.underlying_layers + depth(art.graph.halting_prime) + 1);
  }
  RecBuilder rb;
  GateId x = rb.input();
  rb.b.output(rb.b.sign(x));
  rb.feed(x, x);
  auto bad = std::move(rb).build(HaltingSpec::fixed_iteration(2));
  EXPECT_FALSE(is_predecessor_form(bad));
  EXPECT_THROW(compile_circuit_to_outer_gnn(bad, true), CompileError);
}

TEST(InnerGnn, SumAndProduct) {
  RecBuilder rb;
  auto& b = rb.b;
  GateId x1 = rb.input(), x2 = rb.input();
  b.output(b.add({x1, x2}));
  b.output(b.mul({x1, x2}));
  rb.feed(x1, x1);
  rb.feed(x2, x2);
  auto rec = std::move(rb).build(HaltingSpec::always_halt());
  auto art = compile_symmetric_circuit_to_inner_gnn(rec);
  EXPECT_TRUE(art.padded);
  auto g = art.graph({3, 4});
  auto r = run_gnn(art.gnn, g);
  EXPECT_EQ(art.outputs_of(r.graph), (std::vector<double>{7, 12}));
  EXPECT_EQ(r.graph.labels[0], 3);
  EXPECT_EQ(r.graph.labels[1], 4);
}

TEST(InnerGnn, SingleOutputRecurrent) {
  RecBuilder rb;
  auto& b = rb.b;
  GateId x1 = rb.input(), x2 = rb.input(), x3 = rb.input(), a = rb.aux(3.0);
  GateId dec = b.add({a, b.constant(-1.0)});
  b.output(b.add({x1, x2, x3, dec}));
  for (GateId x : {x1, x2, x3}) rb.feed(x, x);
  rb.feed(a, dec);
  rb.halting = {dec};
  auto rec = std::move(rb).build(HaltingSpec::threshold_count(0, 0));
  auto art = compile_symmetric_circuit_to_inner_gnn(rec);
  EXPECT_FALSE(art.padded);
  auto r = run_gnn(art.gnn, art.graph({1, 2, 3}));
  EXPECT_EQ(art.outputs_of(r.graph), run(rec, {1, 2, 3}).outputs);
}

TEST(InnerGnn, RejectsAsymmetric) {
  RecBuilder rb;
  auto& b = rb.b;
  GateId x1 = rb.input(), x2 = rb.input();
  b.output(b.add({x1, b.neg(x2)}));
  rb.feed(x1, x1);
  rb.feed(x2, x2);
  auto rec = std::move(rb).build(HaltingSpec::always_halt());
  EXPECT_THROW(compile_symmetric_circuit_to_inner_gnn(rec), CompileError);
}

TEST(ExpTower, Growth) {
  auto rep = exp_tower_demo(5);
  EXPECT_NEAR(rep.rows[0].value, std::exp(0.1), 1e-12);
  for (std::size_t k = 1; k < rep.rows.size(); ++k)
    if (!rep.rows[k].overflow) EXPECT_GT(rep.rows[k].value, rep.rows[k - 1].value);
  EXPECT_TRUE(rep.rows.back().overflow);
  EXPECT_EQ(tower(2, 0), 1.0);
  EXPECT_NEAR(tower(2, 1), std::exp(std::exp(1.0)), 1e-9);
}
