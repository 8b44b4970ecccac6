#include <gtest/gtest.h>

#include <reccirc/fixtures.hpp>

using namespace reccirc;

namespace {

double chi_oracle(const std::vector<double>& A, double a, double x) {
  double num = 1, den = 1;
  for (double ai : A)
    if (ai != a) num *= ai - x, den *= ai - a;
  return num / den;
}

// Values the counter memory takes over `iters` iterations.
std::vector<double> counter_values(std::size_t d, std::size_t iters) {
  auto g = build_mod_counter(d);
  auto rec = g.as_recurrent(HaltingSpec::fixed_iteration(iters));
  std::vector<double> v;
  for (auto& r : run(rec, std::vector<double>{}).trace.records) v.push_back(r.memory[0]);
  return v;
}

}  // namespace

TEST(Equality, Values) {
  auto g = build_equality_sign();
  EXPECT_EQ(evaluate(g.circuit, {3, 3}).outputs[0], 1);
  EXPECT_EQ(evaluate(g.circuit, {2, 5}).outputs[0], 0);
  EXPECT_EQ(evaluate(g.circuit, {-1, -1}).outputs[0], 1);
  EXPECT_EQ(g.circuit.count_activation("sign"), 2u);
  EXPECT_EQ(depth(g.circuit), 7u);
  EXPECT_EQ(size(g.circuit), 16u);
}

TEST(Chi, Values) {
  auto g = build_chi_A({0, 1, 2}, 1);
  EXPECT_EQ(evaluate(g.circuit, {1}).outputs[0], 1);
  EXPECT_EQ(evaluate(g.circuit, {0}).outputs[0], 0);
  EXPECT_EQ(evaluate(g.circuit, {2}).outputs[0], 0);
  EXPECT_EQ(g.circuit.count(GateType::Activation), 0u);
  auto single = build_chi_A({4}, 4);
  EXPECT_EQ(evaluate(single.circuit, {123}).outputs[0], 1);
  EXPECT_THROW(build_chi_A({1, 1}, 1), ArityError);
  EXPECT_NEAR(evaluate(build_chi_A({-2, 0, 3}, 0).circuit, {1.5}).outputs[0],
              chi_oracle({-2, 0, 3}, 0, 1.5), 1e-12);
}

TEST(ModCounter, Sequences) {
  EXPECT_EQ(counter_values(3, 5), (std::vector<double>{1, 2, 3, 1, 2}));
  EXPECT_EQ(counter_values(1, 4), (std::vector<double>{1, 1, 1, 1}));
  EXPECT_EQ(build_mod_counter(4).circuit.count(GateType::Activation), 0u);
}

TEST(ModCounter, ExactlyOneChiTermActive) {
  CircuitBuilder b;
  GateId x = b.input();
  auto set = range_1_to(3);
  for (double l : set) b.output(chi(b, x, set, l));
  auto out = evaluate(b.circuit(), {2}).outputs;
  EXPECT_EQ(out, (std::vector<double>{0, 1, 0}));
}

TEST(Switch, SelectsBranch) {
  auto g = build_switch({1, 2});
  EXPECT_EQ(evaluate(g.circuit, {2, 10, 20}).outputs[0], 20);
  EXPECT_EQ(evaluate(g.circuit, {1, 10, 20}).outputs[0], 10);
  EXPECT_EQ(evaluate(build_switch({5}).circuit, {5, 7.25}).outputs[0], 7.25);
  EXPECT_THROW(build_switch({1, 1}), ArityError);
}

TEST(Flag, FiresExactlyOnce) {
  auto fire_at = [](double k, std::size_t iters) {
    // halting circuit: [i == k]
    CircuitBuilder hb;
    GateId i = hb.input();
    hb.output(eq_const(hb, i, k));
    auto flag = build_flag(std::move(hb).build());
    // feed the iteration number through an external counter
    RecBuilder rb;
    GateId c = rb.aux(1.0);
    auto map = embed(rb.b, flag.circuit, {c}, {rb.aux(1.0)});
    rb.feed(c, rb.b.add({c, rb.b.constant(1.0)}));
    rb.feed(map[flag.latches[0]], map[flag.latch_updates[0]]);
    GateId t = map[flag.circuit.outputs[0]], u = map[flag.circuit.outputs[1]];
    rb.b.output(t);
    rb.b.output(u);
    auto rec = std::move(rb).build(HaltingSpec::fixed_iteration(iters));
    std::vector<double> ts;
    Evaluator ev(rec.underlying);
    auto res = run(rec, std::vector<double>{});
    for (auto& r : res.trace.records) {
      ts.push_back(r.outputs[0]);
      EXPECT_EQ(r.outputs[0] + r.outputs[1], 1.0);
    }
    return ts;
  };
  EXPECT_EQ(fire_at(3, 5), (std::vector<double>{0, 0, 1, 0, 0}));
  EXPECT_EQ(fire_at(1, 3), (std::vector<double>{1, 0, 0}));
}

TEST(Guards, Masks) {
  auto mux = build_input_mux(2);
  EXPECT_EQ(evaluate(mux.circuit, {1, 0, 4, 5, 8, 9}).outputs, (std::vector<double>{4, 5}));
  EXPECT_EQ(evaluate(mux.circuit, {0, 1, 4, 5, 8, 9}).outputs, (std::vector<double>{8, 9}));
  auto guard = build_aux_guard(1);
  EXPECT_EQ(evaluate(guard.circuit, {0, 1, 3, 7}).outputs[0], 3);
  EXPECT_EQ(evaluate(guard.circuit, {1, 0, 3, 7}).outputs[0], 7);
}

TEST(Compose, AffineThenDouble) {
  auto fg = compose_recurrent(fixtures::affine_once(1, 1), fixtures::affine_once(2, 0));
  EXPECT_TRUE(validate(fg).ok()) << validate(fg).summary();
  auto r = run(fg, {3});
  EXPECT_EQ(r.outputs[0], 8);
  EXPECT_EQ(r.iterations, 2u);
  EXPECT_GE(fg.halting.circuit.count_activation("sign"), 1u);
}

TEST(Compose, FibonacciThenIdentity) {
  auto fg = compose_recurrent(fixtures::fibonacci(), fixtures::affine_once(1, 0));
  EXPECT_EQ(run(fg, {6}).outputs[0], 8);
}

TEST(Compose, IterationCountsAdd) {
  for (double kf = 1; kf <= 4; ++kf)
    for (double kg = 1; kg <= 4; ++kg) {
      auto f = fixtures::decrement_counter(kf), g = fixtures::decrement_counter(kg);
      auto r = run(compose_recurrent(f, g), {5});
      EXPECT_EQ(r.iterations, run(f, {5}).iterations + run(g, {5}).iterations);
      EXPECT_EQ(r.outputs[0], 5);
    }
}

TEST(Compose, ArityMismatch) {
  RecBuilder rb;
  GateId x = rb.input();
  rb.b.output(x);
  rb.b.output(x);
  rb.feed(x, x);
  auto two = std::move(rb).build(HaltingSpec::always_halt());
  EXPECT_THROW(compose_recurrent(two, fixtures::affine_once(1, 0)), ArityError);
}
