#include <gtest/gtest.h>

#include <reccirc/fixtures.hpp>

using namespace reccirc;

namespace {

double fib(int k) {
  double a = 0, b = 1;
  for (int i = 0; i < k; ++i) {
    double t = a + b;
    a = b;
    b = t;
  }
  return a;
}

}  // namespace

TEST(Run, FibonacciSevenIsThirteenAfterSixIterations) {
  auto r = run(fixtures::fibonacci(), {7});
  EXPECT_EQ(r.outputs, std::vector<double>{13});
  EXPECT_EQ(r.iterations, 6u);
  EXPECT_EQ(r.trace.size(), 6u);
  EXPECT_TRUE(r.trace.records.back().halted);
}

TEST(Run, FibonacciRange) {
  auto f = fixtures::fibonacci();
  for (int x = 2; x <= 10; ++x) EXPECT_EQ(run(f, {double(x)}).outputs[0], fib(x)) << x;
}

TEST(Run, FixedIterationOneIsPlainEvaluation) {
  auto f = fixtures::fibonacci();
  f.halting = HaltingSpec::fixed_iteration(1);
  EXPECT_EQ(run(f, {9}).outputs, evaluate(f.underlying, {9}, {1, 0}).outputs);
}

TEST(Run, DecrementCounterHaltsAtThree) {
  auto r = run(fixtures::decrement_counter(3), {4});
  EXPECT_EQ(r.iterations, 3u);
  EXPECT_EQ(r.outputs[0], 4);
  std::vector<double> aux;
  for (auto& rec : r.trace.records) aux.push_back(rec.memory[1]);
  EXPECT_EQ(aux, (std::vector<double>{3, 2, 1}));
}

TEST(Run, MemoryStepReplays) {
  auto f = fixtures::fibonacci();
  auto r = run(f, {8});
  auto mem = f.memory_gates();
  for (std::size_t i = 0; i + 1 < r.trace.size(); ++i) {
    const auto& cur = r.trace.records[i];
    std::vector<double> x(cur.memory.begin(), cur.memory.begin() + 1), a(cur.memory.begin() + 1, cur.memory.end());
    auto tr = evaluate(f.underlying, x, a).trace;
    for (std::size_t k = 0; k < mem.size(); ++k)
      EXPECT_EQ(r.trace.records[i + 1].memory[k], tr[f.rec_edges.at(mem[k])]);
  }
}

TEST(Run, BudgetExhaustionCarriesTrace) {
  try {
    run(fixtures::never_halts(), {1}, 37);
    FAIL();
  } catch (const NonHalting& e) {
    EXPECT_EQ(e.trace.size(), 37u);
    EXPECT_EQ(e.budget, 37u);
  }
}

TEST(HaltingEval, Examples) {
  EXPECT_EQ(halting_eval(fixtures::fibonacci().halting, 4, {5}), 1);
  EXPECT_EQ(halting_eval(fixtures::fibonacci().halting, 3, {5}), 0);
  EXPECT_EQ(halting_eval(HaltingSpec::fixed_iteration(3), 2, {}), 0);
  EXPECT_EQ(halting_eval(HaltingSpec::fixed_iteration(3), 3, {}), 1);
  EXPECT_EQ(halting_eval(HaltingSpec::threshold_count(2, 4), 1, {1, 1, 1, 1, 1}), 0);
  EXPECT_EQ(halting_eval(HaltingSpec::threshold_count(2, 4), 1, {2, 2, 2, 2, 2, 1}), 1);
  EXPECT_EQ(halting_eval(HaltingSpec::always_halt(), 1, {}), 1);
  EXPECT_THROW(halting_eval(fixtures::fibonacci().halting, 1, {1, 2}), ArityError);
}

TEST(Fold, FibonacciUnchanged) {
  auto f = fixtures::fibonacci();
  auto ff = fold_iteration_counter(f);
  EXPECT_TRUE(validate(ff).ok()) << validate(ff).summary();
  EXPECT_EQ(ff.l(), f.l() + 1);
  EXPECT_TRUE(is_folded(ff));
  EXPECT_FALSE(is_folded(f));
  for (double x = 2; x <= 10; ++x) {
    auto a = run(f, {x}), b = run(ff, {x});
    EXPECT_EQ(a.outputs, b.outputs);
    EXPECT_EQ(a.iterations, b.iterations);
  }
}

TEST(Fold, BuiltinRejected) {
  auto f = fixtures::affine_once(1, 1);
  EXPECT_THROW(fold_iteration_counter(f), Error);
}

TEST(PredecessorForm, Cases) {
  EXPECT_TRUE(is_predecessor_form(fixtures::fibonacci()));

  RecBuilder mixed;
  GateId x = mixed.input(), y = mixed.input();
  GateId s = mixed.b.add({x, y});
  GateId p = mixed.b.mul({x, y});
  mixed.b.output(mixed.b.add({s, p}));
  mixed.feed(x, x);
  mixed.feed(y, y);
  EXPECT_FALSE(is_predecessor_form(std::move(mixed).build(HaltingSpec::always_halt())));

  RecBuilder late;
  GateId a = late.input();
  GateId pad = late.b.add({a});
  GateId sg = late.b.sign(pad);
  late.b.output(sg);
  late.feed(a, a);
  late.halting = {pad};
  EXPECT_FALSE(is_predecessor_form(std::move(late).build(HaltingSpec::always_halt())));
}
