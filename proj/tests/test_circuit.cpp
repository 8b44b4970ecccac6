#include <gtest/gtest.h>

#include <reccirc/fixtures.hpp>
#include <reccirc/symmetry.hpp>

using namespace reccirc;

namespace {

ExtendedCircuit wire() {
  CircuitBuilder b;
  b.output(b.input());
  return std::move(b).build();
}

// Longest path recomputed by repeated relaxation, independent of topo_order.
std::vector<std::size_t> relaxed_depths(const ExtendedCircuit& c) {
  std::vector<std::size_t> d(c.size(), 0);
  for (std::size_t round = 0; round < c.size(); ++round)
    for (GateId g = 0; g < c.size(); ++g)
      for (GateId p : c.gates[g].preds) d[g] = std::max(d[g], d[p] + 1);
  return d;
}

}  // namespace

TEST(Validate, MinimalWireIsOk) { EXPECT_TRUE(validate(wire()).ok()); }

TEST(Validate, TwoCycleIsReported) {
  ExtendedCircuit c;
  c.gates.push_back({GateType::Input, 0, 0, {}, {}});
  c.gates.push_back({GateType::Add, 0, 0, {}, {0, 2}});
  c.gates.push_back({GateType::Add, 0, 0, {}, {1}});
  c.gates.push_back({GateType::Output, 0, 0, {}, {2}});
  c.inputs = {0};
  c.outputs = {3};
  auto r = validate(c);
  EXPECT_TRUE(r.has("cycle"));
  EXPECT_FALSE(r.ok());
}

TEST(Validate, OutputWithTwoPredecessors) {
  CircuitBuilder b;
  GateId x = b.input(), y = b.input();
  b.output(x);
  b.circuit().gates.back().preds.push_back(y);
  EXPECT_TRUE(validate(b.circuit()).has("output indegree"));
}

TEST(Validate, FanInZeroForbidden) {
  CircuitBuilder b;
  b.input();
  b.output(b.add({}));
  EXPECT_TRUE(validate(b.circuit()).has("fan-in 0"));
}

TEST(Evaluate, Product) {
  CircuitBuilder b;
  GateId x = b.input(), y = b.input();
  b.output(b.mul({x, y}));
  EXPECT_EQ(evaluate(b.circuit(), {3, 4}).outputs, std::vector<double>{12});
}

TEST(Evaluate, FibonacciOneIteration) {
  auto fib = fixtures::fibonacci();
  auto r = evaluate(fib.underlying, {5}, {1, 0});
  EXPECT_EQ(r.outputs, std::vector<double>{1});
  // new-memory probe values: sources of in1, aux1, aux2
  std::vector<double> probe;
  for (GateId m : fib.memory_gates()) probe.push_back(r.trace[fib.rec_edges.at(m)]);
  EXPECT_EQ(probe, (std::vector<double>{5, 1, 1}));
}

TEST(Evaluate, ChiGadgetAtTwo) {
  auto g = build_chi_A({0, 1, 2}, 1);
  EXPECT_DOUBLE_EQ(evaluate(g.circuit, {2}).outputs[0], 0.0);
}

TEST(Evaluate, ErrorsNameTheGate) {
  CircuitBuilder b;
  GateId x = b.input();
  GateId e = b.act("exp", x);
  GateId e2 = b.act("exp", e);
  b.output(e2);
  try {
    evaluate(b.circuit(), {100});
    FAIL();
  } catch (const EvalError& err) {
    EXPECT_EQ(err.gate, e2);
  }
  EXPECT_THROW(evaluate(b.circuit(), {1, 2}), ArityError);
  CircuitBuilder u;
  u.output(u.act("nope", u.input()));
  EXPECT_THROW(evaluate(u.circuit(), {1}), Error);
}

TEST(Evaluate, TraceReplay) {
  auto c = build_equality_sign().circuit;
  auto r = evaluate(c, {2, 5});
  for (GateId g = 0; g < c.size(); ++g) {
    const Gate& gate = c.gates[g];
    if (gate.type == GateType::Add) {
      double s = 0;
      for (GateId p : gate.preds) s += r.trace[p];
      EXPECT_EQ(r.trace[g], s);
    } else if (gate.type == GateType::Mul) {
      double s = 1;
      for (GateId p : gate.preds) s *= r.trace[p];
      EXPECT_EQ(r.trace[g], s);
    } else if (gate.type == GateType::Activation) {
      EXPECT_EQ(r.trace[g], r.trace[gate.preds[0]] > 0 ? 1.0 : 0.0);
    }
  }
}

TEST(Metrics, WireAndEquality) {
  EXPECT_EQ(depth(wire()), 1u);
  EXPECT_EQ(size(wire()), 2u);
  auto eqc = build_equality_sign().circuit;
  EXPECT_EQ(depth(eqc), 7u);
  EXPECT_EQ(size(eqc), 16u);
  EXPECT_EQ(size(fixtures::fibonacci().underlying), 5u);
  auto d = relaxed_depths(eqc);
  EXPECT_EQ(*std::max_element(d.begin(), d.end()), depth(eqc));
  EXPECT_EQ(gate_depth(eqc, eqc.outputs[0]), 7u);
}

TEST(Balance, AlreadyBalancedUnchanged) {
  auto c = fixtures::fibonacci().underlying;
  EXPECT_TRUE(is_balanced_dag(c));
  EXPECT_EQ(balance(c), c);
}

TEST(Balance, PadsShortEdge) {
  CircuitBuilder b;
  GateId x = b.input(), y = b.input();
  b.output(b.mul({x, b.add({x, y})}));
  auto c = std::move(b).build();
  EXPECT_FALSE(is_balanced_dag(c));
  auto bal = balance(c);
  EXPECT_TRUE(is_balanced_dag(bal));
  EXPECT_EQ(bal.size(), c.size() + 1);
  EXPECT_EQ(evaluate(c, {2, 3}).outputs[0], 10);
  EXPECT_EQ(evaluate(bal, {2, 3}).outputs[0], 10);
  EXPECT_EQ(balance(bal), bal);
}

TEST(Symmetry, Sampling) {
  CircuitBuilder b;
  GateId x = b.input(), y = b.input(), z = b.input();
  b.output(b.add({x, y, z}));
  EXPECT_TRUE(check_symmetric_sampled(b.circuit(), 100, 1).ok);

  CircuitBuilder d;
  GateId p = d.input(), q = d.input();
  d.output(d.sub(p, q));
  auto r = check_symmetric_sampled(d.circuit(), 100, 1);
  EXPECT_FALSE(r.ok);
  ASSERT_TRUE(r.witness.has_value());

  CircuitBuilder t;
  GateId a = t.input(), bb = t.input(), c = t.input();
  t.output(t.mul({a, t.add({bb, c})}));
  EXPECT_EQ(evaluate(t.circuit(), {2, 3, 5}).outputs[0], 16);
  EXPECT_EQ(evaluate(t.circuit(), {3, 2, 5}).outputs[0], 21);
  EXPECT_TRUE(check_tail_symmetric_sampled(t.circuit(), 100, 2).ok);
  EXPECT_FALSE(check_symmetric_sampled(t.circuit(), 100, 2).ok);
}
