#include <gtest/gtest.h>

#include <reccirc/harness.hpp>
#include <reccirc/symmetry.hpp>

using namespace reccirc;

namespace {

DiffTestConfig small(std::size_t trials, std::uint64_t seed = 7) {
  DiffTestConfig c;
  c.trials = trials;
  c.seed = seed;
  return c;
}

void expect_clean(const DiffReport& r) {
  EXPECT_TRUE(r.ok()) << r.name << ": " << (r.first ? r.first->bundle.dump(2) : std::string{});
  EXPECT_EQ(r.passed, r.trials);
}

}  // namespace

TEST(Generators, SignFreeHaltsWithinBound) {
  Rng rng(3);
  GenConstraints c;
  c.sign_free = true;
  c.halting_within = 5;
  for (int k = 0; k < 20; ++k) {
    auto r = gen_random_circuit(rng, c);
    EXPECT_TRUE(validate(r).ok());
    EXPECT_EQ(r.underlying.count_activation("sign"), 0u);
    EXPECT_LE(r.underlying.size(), c.max_gates);
    for (int t = 0; t < 20; ++t) {
      auto x = draw_values(rng, r.n(), false);
      try {
        EXPECT_LE(run(r, x, 5).iterations, 5u);
      } catch (const IterationError&) {
        // overflow to infinity is an evaluation error, not a halting failure
      }
    }
  }
}

TEST(Generators, SymmetricTemplatesAreSymmetric) {
  Rng rng(4);
  GenConstraints c;
  c.symmetric = true;
  c.inputs = 3;
  for (int k = 0; k < 10; ++k) {
    auto r = gen_random_circuit(rng, c);
    EXPECT_TRUE(check_symmetric_sampled(r.underlying, 200, 11 + k).ok);
    EXPECT_FALSE(find_asymmetry(r, 50, 5).has_value());
  }
}

TEST(Generators, PredecessorForm) {
  Rng rng(5);
  GenConstraints c;
  c.predecessor_form = true;
  for (int k = 0; k < 50; ++k) {
    auto r = gen_random_circuit(rng, c);
    EXPECT_TRUE(is_predecessor_form(r));
    EXPECT_TRUE(is_folded(r));
    auto x = draw_values(rng, r.n(), false);
    EXPECT_LE(run(r, x, c.halting_within).iterations, c.halting_within);
  }
}

TEST(Generators, UnsatisfiableCombinations) {
  Rng rng(1);
  GenConstraints c;
  c.symmetric = c.predecessor_form = true;
  EXPECT_THROW(gen_random_circuit(rng, c), ConstraintError);
  GenConstraints tiny;
  tiny.max_gates = 3;
  EXPECT_THROW(gen_random_circuit(rng, tiny), ConstraintError);
  GenConstraints never;
  never.halting_within = 0;
  EXPECT_THROW(gen_random_circuit(rng, never), ConstraintError);
}

TEST(Generators, Deterministic) {
  Rng a = Rng::for_trial(9, 4), b = Rng::for_trial(9, 4);
  EXPECT_EQ(gen_random_circuit(a, {}), gen_random_circuit(b, {}));
}

TEST(Oracles, BruteForceGnnFixtures) {
  LabelledGraph tri(3, {{0, 1}, {1, 2}, {0, 2}}, {1, 2, 3});
  auto sum = ac_to_cgnn(1, 1, 0, "id", 1, GnnHaltingSpec::fixed_layer(1));
  EXPECT_EQ(brute_force_gnn(sum, tri).labels, (std::vector<double>{6, 6, 6}));
  auto id = ac_to_cgnn(1, 0, 0, "id", 1, GnnHaltingSpec::fixed_layer(1));
  EXPECT_EQ(brute_force_gnn(id, tri), tri);
}

TEST(Oracles, BruteForceAgreesWithRunGnn) {
  Rng rng(21);
  std::size_t compared = 0;
  for (int k = 0; k < 200; ++k) {
    auto g = gen_random_graph(rng, 5, false);
    auto gnn = k % 2 ? gen_outer_gnn(rng, 3, 8) : gen_inner_gnn(rng, 2, 16, true);
    GnnRunResult ref;
    try {
      ref = run_gnn(gnn, g, 8);
    } catch (const Error&) {
      EXPECT_ANY_THROW(brute_force_gnn(gnn, g, 8));
      continue;
    }
    EXPECT_EQ(brute_force_gnn(gnn, g, 8), ref.graph);
    ++compared;
  }
  EXPECT_GT(compared, 100u);
}

TEST(Oracles, NaiveFMemAgreesWithRun) {
  Rng rng(22);
  for (int k = 0; k < 100; ++k) {
    auto r = gen_random_circuit(rng, {});
    auto x = draw_values(rng, r.n(), false);
    auto ref = bounded_run(r, x, 10);
    if (!ref) continue;
    auto naive = naive_f_mem(r, x, 10);
    EXPECT_EQ(naive.outputs, ref->outputs);
    EXPECT_EQ(naive.iterations, ref->iterations);
  }
  EXPECT_THROW(naive_f_mem(fixtures::never_halts(), {1}, 5), NonHalting);
}

TEST(Shrink, BypassKeepsValidity) {
  auto r = fixtures::fibonacci();
  for (GateId g = 0; g < r.underlying.size(); ++g) {
    const auto& gate = r.underlying.gates[g];
    if (is_source(gate.type) || gate.type == GateType::Output) continue;
    EXPECT_TRUE(validate(bypass_gate(r, g)).ok());
  }
}

TEST(Shrink, ReachesMinimalWitness) {
  Rng rng(8);
  GenConstraints c;
  c.sign_free = true;
  auto has_mul = [](const RecurrentCircuit& x) { return x.underlying.count(GateType::Mul) > 0; };
  auto r = gen_random_circuit(rng, c);
  while (!has_mul(r)) r = gen_random_circuit(rng, c);
  auto s = shrink_recurrent(r, has_mul);
  EXPECT_EQ(s.underlying.count(GateType::Mul), 1u);
  EXPECT_LE(s.underlying.size(), r.underlying.size());
  LabelledGraph tri(3, {{0, 1}, {1, 2}, {0, 2}}, {1, 2, 3});
  auto sg = shrink_graph(tri, [](const LabelledGraph& g) { return !g.edges.empty(); });
  EXPECT_EQ(sg.n, 2u);
  EXPECT_EQ(sg.edges.size(), 1u);
}

TEST(DiffTest, ZeroTrialsIsEmptyPass) {
  auto r = difftest_thm4(small(0));
  EXPECT_TRUE(r.ok());
  EXPECT_EQ(r.trials, 0u);
  EXPECT_FALSE(r.first.has_value());
}

TEST(DiffTest, FibonacciOuterFixture) {
  std::vector<std::vector<double>> xs;
  for (double x = 2; x <= 10; ++x) xs.push_back({x});
  auto cfg = small(0);
  cfg.tolerance = 0.0;
  auto r = difftest_thm6_on(fixtures::fibonacci(), xs, Thm6Mode::Embedded, cfg);
  expect_clean(r);
  EXPECT_EQ(r.passed, 9u);
}

TEST(DiffTest, ComposeFixture) {
  auto cfg = small(0);
  cfg.tolerance = 0.0;
  auto f = fixtures::affine_once(1, 1), g = fixtures::affine_once(2, 0);
  EXPECT_EQ(run(compose_recurrent(f, g), {3}).outputs, (std::vector<double>{8}));
  expect_clean(difftest_thm3_on(f, g, {{3}, {-1}, {0.5}}, cfg));
}

TEST(DiffTest, EveryDifftestSmallRun) {
  for (const auto& name : difftest_names()) {
    auto r = difftest(name, small(12));
    expect_clean(r);
    EXPECT_EQ(r.name, name);
  }
}

TEST(DiffTest, DeterministicAcrossThreadCounts) {
  auto a = small(10, 99), b = small(10, 99);
  a.threads = 1;
  b.threads = 4;
  auto ra = difftest_thm6(a), rb = difftest_thm6(b);
  EXPECT_EQ(ra.passed, rb.passed);
  EXPECT_EQ(ra.failed, rb.failed);
}

TEST(DiffTest, FailureBundleReplays) {
  // A deliberately wrong oracle: every trial disagrees, so the first
  // counterexample is trial 0 and replaying it reproduces the message.
  auto cfg = small(5, 3);
  auto trial = [](Rng& rng, std::size_t) {
    auto v = rng.integer(0, 1000);
    return TrialOutcome::fail("value " + std::to_string(v));
  };
  auto r = run_trials("broken", cfg, trial);
  ASSERT_TRUE(r.first.has_value());
  EXPECT_EQ(r.failed, 5u);
  EXPECT_EQ(r.first->trial, 0u);
  cfg.only_trial = r.first->trial;
  auto again = run_trials("broken", cfg, trial);
  ASSERT_TRUE(again.first.has_value());
  EXPECT_EQ(again.first->message, r.first->message);
  EXPECT_NE(r.first->bundle["replay"].get<std::string>().find("--trial 0"), std::string::npos);
}

TEST(DiffTest, ConfigValidation) {
  auto c = small(1);
  c.tolerance = -1;
  EXPECT_THROW(c.validate(), ConstraintError);
  c = small(1);
  c.max_vertices = 0;
  EXPECT_THROW(difftest_thm4(c), ConstraintError);
}
