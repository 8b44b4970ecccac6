#pragma once

// Random instance generators, independent oracles, counterexample shrinking
// and the differential tests that pit every compiler against the semantics
// of its source.

#include <atomic>
#include <chrono>
#include <set>
#include <thread>

#include "compile_circuit.hpp"
#include "compile_gnn.hpp"
#include "fixtures.hpp"
#include "json_io.hpp"
#include "random.hpp"

namespace reccirc {

struct ConstraintError : Error {
  using Error::Error;
};

struct DiffTestConfig {
  std::uint64_t seed = 1;
  std::size_t trials = 100;
  std::size_t max_gates = 15;
  std::size_t max_vertices = 5;
  std::size_t max_iterations = 10;  // recurrent circuits halt within this many iterations
  std::size_t max_layers = 8;       // outer GNNs halt within this many layers
  std::size_t max_period = 3;
  std::size_t inner_budget = 16;
  double tolerance = 1e-9;  // relative, see close()
  bool float_mode = false;
  std::size_t threads = 0;  // 0: one per hardware thread
  std::optional<std::size_t> only_trial;  // replay a single trial index

  void validate() const {
    if (max_gates == 0 || max_vertices == 0 || max_iterations == 0 || max_layers == 0 || max_period == 0 ||
        inner_budget == 0)
      throw ConstraintError("difftest bounds must be positive");
    if (!(tolerance >= 0.0)) throw ConstraintError("tolerance must be non-negative");
  }
};

inline json to_json(const DiffTestConfig& c) {
  return {{"seed", c.seed},
          {"trials", c.trials},
          {"max_gates", c.max_gates},
          {"max_vertices", c.max_vertices},
          {"max_iterations", c.max_iterations},
          {"max_layers", c.max_layers},
          {"max_period", c.max_period},
          {"inner_budget", c.inner_budget},
          {"tolerance", c.tolerance},
          {"float_mode", c.float_mode}};
}

struct GenConstraints {
  bool sign_free = false;
  bool symmetric = false;
  bool predecessor_form = false;
  std::size_t halting_within = 10;
  std::size_t max_gates = 15;
  std::size_t inputs = 0;   // 0: drawn
  std::size_t outputs = 0;  // 0: drawn
};

/// Values beyond this magnitude make an instance ineligible: products of two
/// such values still stay well inside the exactly representable range.
inline constexpr double kValueLimit = 1099511627776.0;  // 2^40

inline double draw_value(Rng& rng, bool float_mode) {
  return float_mode ? rng.real(-4.0, 4.0) : static_cast<double>(rng.integer(-4, 4));
}

inline std::vector<double> draw_values(Rng& rng, std::size_t n, bool float_mode) {
  std::vector<double> v(n);
  for (auto& x : v) x = draw_value(rng, float_mode);
  return v;
}

// ---------------------------------------------------------------- generators

namespace detail {

inline std::vector<GateId> pick_distinct(Rng& rng, const std::vector<GateId>& pool, std::size_t k) {
  auto idx = rng.permutation(pool.size());
  std::vector<GateId> out;
  for (std::size_t i = 0; i < k && i < idx.size(); ++i) out.push_back(pool[idx[i]]);
  return out;
}

/// `dec` takes the values k-1, k-2, ... so every encoding drawn here stops
/// the run at iteration k.
inline HaltingSpec countdown_halting(Rng& rng, std::size_t k, RecBuilder& rb, GateId dec) {
  rb.halting = {dec};
  switch (rng.index(4)) {
    case 0: {
      CircuitBuilder hb;
      hb.input();
      GateId v = hb.input();
      hb.output(eq_const(hb, v, 0.0));
      return HaltingSpec::circuit_backed(std::move(hb).build());
    }
    case 1: return HaltingSpec::fixed_iteration(k);
    case 2: return HaltingSpec::threshold_count(0.0, 0.0);
    default: {
      CircuitBuilder hb;
      GateId i = hb.input();
      hb.input();
      hb.output(eq_const(hb, i, static_cast<double>(k)));
      return HaltingSpec::circuit_backed(std::move(hb).build());
    }
  }
}

inline RecurrentCircuit gen_general(Rng& rng, const GenConstraints& c) {
  const std::size_t n = c.inputs ? c.inputs : 1 + rng.index(3);
  const std::size_t m = c.outputs ? c.outputs : 1 + rng.index(2);
  const std::size_t data_aux = rng.index(2), consts = rng.index(2);
  const std::size_t fixed = n + data_aux + consts + m + 3;  // counter, -1, decrement
  if (c.max_gates < fixed + 1)
    throw ConstraintError("gate bound " + std::to_string(c.max_gates) + " leaves no room for a body (needs " +
                          std::to_string(fixed + 1) + ")");
  const std::size_t k = 1 + rng.index(c.halting_within);

  RecBuilder rb;
  auto& b = rb.b;
  std::vector<GateId> xs, as, pool;
  for (std::size_t j = 0; j < n; ++j) xs.push_back(rb.input());
  for (std::size_t j = 0; j < data_aux; ++j) as.push_back(rb.aux(static_cast<double>(rng.integer(-2, 2))));
  GateId cnt = rb.aux(static_cast<double>(k));
  GateId dec = b.add_const(cnt, -1.0);
  pool = xs;
  pool.insert(pool.end(), as.begin(), as.end());
  pool.push_back(dec);
  for (std::size_t j = 0; j < consts; ++j) pool.push_back(b.constant(static_cast<double>(rng.integer(-3, 3))));

  const std::size_t body = 1 + rng.index(c.max_gates - fixed);
  for (std::size_t t = 0; t < body; ++t) {
    double u = rng.uniform();
    if (!c.sign_free && u < 0.2) {
      pool.push_back(b.sign(rng.pick(pool)));
      continue;
    }
    auto preds = pick_distinct(rng, pool, 1 + rng.index(std::min<std::size_t>(3, pool.size())));
    pool.push_back(u < 0.6 ? b.add(std::move(preds)) : b.mul(std::move(preds)));
  }
  for (std::size_t j = 0; j < m; ++j) b.output(pool[pool.size() - 1 - rng.index(std::min<std::size_t>(4, pool.size()))]);
  for (GateId x : xs) rb.feed(x, rng.chance(0.3) ? x : rng.pick(pool));
  for (GateId a : as) rb.feed(a, rng.pick(pool));
  rb.feed(cnt, dec);
  auto h = countdown_halting(rng, k, rb, dec);
  return std::move(rb).build(std::move(h));
}

/// Power sums, the second elementary symmetric polynomial and the product,
/// offset by an aux accumulator of the input sum.
inline RecurrentCircuit gen_symmetric(Rng& rng, const GenConstraints& c) {
  const std::size_t n = c.inputs ? c.inputs : 1 + rng.index(4);
  const std::size_t m = c.outputs ? c.outputs : 1 + rng.index(3);
  const std::size_t k = 1 + rng.index(c.halting_within);
  RecBuilder rb;
  auto& b = rb.b;
  std::vector<GateId> xs;
  for (std::size_t j = 0; j < n; ++j) xs.push_back(rb.input());
  GateId cnt = rb.aux(static_cast<double>(k)), acc = rb.aux(0.0);
  GateId dec = b.add_const(cnt, -1.0);
  GateId s1 = b.add(xs);
  std::vector<GateId> polys{s1, b.mul(xs)};
  std::vector<GateId> sq, cube;
  for (GateId x : xs) {
    sq.push_back(b.mul({x, b.identity(x)}));
    cube.push_back(b.mul({x, b.identity(x), b.identity(x)}));
  }
  polys.push_back(b.add(sq));
  polys.push_back(b.add(cube));
  if (n >= 2) {
    std::vector<GateId> pairs;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) pairs.push_back(b.mul({xs[i], xs[j]}));
    polys.push_back(b.add(pairs));
  }
  if (m > polys.size()) throw ConstraintError("symmetric generator offers at most " + std::to_string(polys.size()) + " outputs");
  rng.shuffle(polys);
  for (std::size_t j = 0; j < m; ++j) b.output(b.add({polys[j], acc}));
  for (GateId x : xs) rb.feed(x, x);
  rb.feed(cnt, dec);
  rb.feed(acc, b.add({acc, s1}));
  auto h = countdown_halting(rng, k, rb, dec);
  return std::move(rb).build(std::move(h));
}

/// Level 1 applies one activation to every source; later levels are
/// homogeneous Add or Mul levels with an optional second activation level
/// and a final Add level.  A one-hot shift register of k bits times the run:
/// its last bit is the only halting gate, so the halting circuit never reads
/// the iteration number.
inline RecurrentCircuit gen_predecessor_form(Rng& rng, const GenConstraints& c) {
  const std::size_t n = c.inputs ? c.inputs : 1 + rng.index(3);
  const std::size_t m = c.outputs ? c.outputs : 1 + rng.index(2);
  const std::size_t k = 1 + rng.index(c.halting_within);
  auto sigma = [&]() -> std::string { return c.sign_free || rng.chance(0.5) ? "id" : "sign"; };

  RecBuilder rb;
  auto& b = rb.b;
  std::vector<GateId> xs, bits, data, lanes;
  for (std::size_t j = 0; j < n; ++j) xs.push_back(rb.input());
  for (std::size_t j = 0; j < k; ++j) bits.push_back(rb.aux(j == 0 ? 1.0 : 0.0));
  GateId zero = b.constant(0.0);
  std::vector<GateId> consts;
  for (std::size_t j = rng.index(2); j > 0; --j) consts.push_back(b.constant(static_cast<double>(rng.integer(-2, 2))));

  std::string s1 = sigma();
  for (GateId x : xs) data.push_back(b.act(s1, x));
  for (GateId q : consts) data.push_back(b.act(s1, q));
  for (GateId q : bits) lanes.push_back(b.act(s1, q));
  GateId z = b.act(s1, zero);

  const std::size_t levels = 1 + rng.index(3);
  const bool second = levels >= 2 && rng.chance(0.5);
  const std::size_t second_at = second ? 1 + rng.index(levels - 1) : levels;
  for (std::size_t lvl = 0; lvl < levels; ++lvl) {
    if (lvl == second_at) {
      std::string s2 = sigma();
      for (auto& g : data) g = b.act(s2, g);
      for (auto& g : lanes) g = b.act(s2, g);
      z = b.act(s2, z);
    }
    const bool use_add = lvl + 1 == levels || rng.chance(0.5);
    auto op = [&](std::vector<GateId> ps) { return use_add ? b.add(std::move(ps)) : b.mul(std::move(ps)); };
    std::vector<GateId> next;
    for (std::size_t j = 1 + rng.index(3); j > 0; --j)
      next.push_back(op(pick_distinct(rng, data, 1 + rng.index(std::min<std::size_t>(3, data.size())))));
    data = std::move(next);
    for (auto& g : lanes) g = op({g});
    z = op({z});
  }
  for (std::size_t j = 0; j < m; ++j) b.output(rng.pick(data));
  for (GateId x : xs) rb.feed(x, rng.pick(data));
  rb.feed(bits[0], z);
  for (std::size_t j = 1; j < k; ++j) rb.feed(bits[j], lanes[j - 1]);
  rb.halting = {lanes[k - 1]};
  CircuitBuilder hb;
  hb.input();
  hb.output(hb.identity(hb.input()));
  return std::move(rb).build(HaltingSpec::circuit_backed(std::move(hb).build()));
}

}  // namespace detail

/// Random recurrent circuit satisfying `c` by construction; every variant
/// halts at an iteration in [1, c.halting_within] on every input.
inline RecurrentCircuit gen_random_circuit(Rng& rng, const GenConstraints& c) {
  if (c.halting_within == 0) throw ConstraintError("halting-within must be positive");
  if (c.symmetric && c.predecessor_form)
    throw ConstraintError("symmetric templates are not in predecessor form; pick one");
  RecurrentCircuit r = c.symmetric          ? detail::gen_symmetric(rng, c)
                       : c.predecessor_form ? detail::gen_predecessor_form(rng, c)
                                            : detail::gen_general(rng, c);
  require_valid(r);
  return r;
}

inline LabelledGraph gen_random_graph(Rng& rng, std::size_t max_vertices, bool float_mode, double edge_p = 0.5) {
  std::size_t n = 1 + rng.index(max_vertices);
  std::vector<Edge> edges;
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = a + 1; b < n; ++b)
      if (rng.chance(edge_p)) edges.emplace_back(a, b);
  return LabelledGraph(n, std::move(edges), draw_values(rng, n, float_mode));
}

/// Outer-recurrent GNN over sign-free sum, affine and product templates.
inline RecCGnn gen_outer_gnn(Rng& rng, std::size_t max_period, std::size_t max_layers) {
  RecCGnn g;
  const std::size_t d = 1 + rng.index(max_period);
  for (std::size_t l = 0; l < d; ++l) {
    FamilyTemplate t;
    switch (rng.index(3)) {
      case 0: t.name = "sum"; break;
      case 1:
        t.name = "affine";
        t.params = {{"alpha", double(rng.integer(-2, 2))},
                    {"beta", double(rng.integer(-2, 2))},
                    {"gamma", double(rng.integer(-2, 2))}};
        break;
      default: t.name = "product"; break;
    }
    g.layers.push_back({CircuitFamily::from_template(std::move(t)), rng.chance(0.2) ? "sign" : "id"});
  }
  if (rng.chance(0.5))
    g.halting = GnnHaltingSpec::fixed_layer(1 + rng.index(max_layers));
  else
    g.halting = GnnHaltingSpec::threshold_count(double(rng.integer(-1, 2)), double(rng.index(2)));
  return g;
}

/// GNN whose layers run per-vertex Fibonacci circuits (inner recurrence),
/// occasionally mixed with a plain affine layer.
inline RecCGnn gen_inner_gnn(Rng& rng, std::size_t max_period, std::size_t inner_budget, bool threshold_halting) {
  RecCGnn g;
  g.inner_budget = inner_budget;
  const std::size_t d = 1 + rng.index(std::min<std::size_t>(2, max_period));
  for (std::size_t l = 0; l < d; ++l) {
    if (l > 0 && rng.chance(0.3)) {
      g.layers.push_back({CircuitFamily::from_template({"affine", {{"alpha", 1}, {"beta", double(rng.integer(-1, 1))}, {"gamma", 1}}}),
                          "id"});
      continue;
    }
    double cap = double(1 + rng.index(std::min<std::size_t>(inner_budget, 8)));
    double beta = double(rng.index(2));
    g.layers.push_back({CircuitFamily::from_template({"fib-capped", {{"cap", cap}, {"beta", beta}}}),
                        rng.chance(0.2) ? "sign" : "id"});
  }
  if (threshold_halting && rng.chance(0.5))
    g.halting = GnnHaltingSpec::threshold_count(double(rng.integer(0, 3)), 0.0);
  else
    g.halting = GnnHaltingSpec::fixed_layer(1 + rng.index(3));
  return g;
}

// ---------------------------------------------------------------- oracles

namespace detail {

inline std::vector<double> naive_memory(const RecurrentCircuit& r, const std::vector<double>& x, std::size_t i) {
  if (i == 1) {
    std::vector<double> mem = x;
    mem.insert(mem.end(), r.initial_aux.begin(), r.initial_aux.end());
    return mem;
  }
  auto prev = naive_memory(r, x, i - 1);
  std::vector<double> px(prev.begin(), prev.begin() + static_cast<std::ptrdiff_t>(r.n()));
  std::vector<double> pa(prev.begin() + static_cast<std::ptrdiff_t>(r.n()), prev.end());
  auto vals = evaluate(r.underlying, px, pa).trace.gate_values;
  std::vector<double> next;
  for (GateId g : r.memory_gates()) next.push_back(vals[r.rec_edges.at(g)]);
  return next;
}

inline bool naive_halts(const HaltingSpec& s, std::size_t i, const std::vector<double>& v) {
  switch (s.kind) {
    case HaltingSpec::Kind::Circuit: {
      std::vector<double> in{static_cast<double>(i)};
      in.insert(in.end(), v.begin(), v.end());
      return evaluate(s.circuit, in).outputs.at(0) > 0.5;
    }
    case HaltingSpec::Kind::FixedIteration: return i == s.k;
    case HaltingSpec::Kind::ThresholdCount: {
      std::size_t hits = 0;
      for (double y : v) hits += std::fabs(y - s.target) <= kMatchTolerance;
      return static_cast<double>(hits) > s.bound;
    }
    case HaltingSpec::Kind::AlwaysHalt: return true;
  }
  return true;
}

}  // namespace detail

struct NaiveRun {
  std::vector<double> outputs;
  std::size_t iterations = 0;
};

/// Second implementation of the recurrent semantics: the memory state of
/// iteration i is recomputed from scratch by recursion on i, so a run costs
/// O(i^2) circuit evaluations.  Meant for small budgets.
inline NaiveRun naive_f_mem(const RecurrentCircuit& r, const std::vector<double>& x, std::size_t budget = 64) {
  if (x.size() != r.n()) throw ArityError("naive_f_mem: expected " + std::to_string(r.n()) + " inputs");
  for (std::size_t i = 1; i <= budget; ++i) {
    auto mem = detail::naive_memory(r, x, i);
    std::vector<double> px(mem.begin(), mem.begin() + static_cast<std::ptrdiff_t>(r.n()));
    std::vector<double> pa(mem.begin() + static_cast<std::ptrdiff_t>(r.n()), mem.end());
    auto res = evaluate(r.underlying, px, pa);
    std::vector<double> hv;
    for (GateId h : r.halting_gates) hv.push_back(res.trace[h]);
    if (detail::naive_halts(r.halting, i, hv)) return {res.outputs, i};
  }
  throw NonHalting(budget, {});
}

/// Second implementation of the GNN semantics: neighbour multisets are
/// rebuilt from the edge list every layer, members are instantiated afresh
/// for every call and nothing is cached.
inline LabelledGraph brute_force_gnn(const RecCGnn& gnn, const LabelledGraph& g,
                                     std::size_t outer_budget = kDefaultBudget) {
  g.validate();
  if (gnn.layers.empty()) throw ArityError("GNN needs at least one layer");
  auto fresh = [](const FamilyPtr& f, std::size_t arity) {
    if (const auto& t = f->template_spec()) return instantiate_template(*t, arity);
    const auto* tbl = f->explicit_members();
    if (!tbl || !tbl->count(arity)) return f->member(arity);
    return tbl->at(arity);
  };
  auto call = [&](const FamilyMember& mem, const std::vector<double>& args, std::size_t v, std::size_t i) {
    if (!mem.recurrent()) return evaluate(*mem.plain, args).outputs.at(0);
    try {
      return run(*mem.rec, args, gnn.inner_budget).outputs.at(0);
    } catch (const NonHalting&) {
      throw InnerNonHalting(v, i);
    }
  };
  std::vector<double> labels = g.labels;
  for (std::size_t i = 1; i <= outer_budget; ++i) {
    const LayerSpec& L = gnn.layers[(i - 1) % gnn.layers.size()];
    std::vector<double> next(g.n);
    for (std::size_t w = 0; w < g.n; ++w) {
      std::multiset<double> around;
      for (auto [a, b] : g.edges) {
        if (a == w) around.insert(labels[b]);
        if (b == w) around.insert(labels[a]);
      }
      std::vector<double> args{labels[w]};
      args.insert(args.end(), around.begin(), around.end());
      next[w] = ActivationRegistry::builtin().apply(L.activation, call(fresh(L.family, args.size()), args, w, i));
    }
    labels = std::move(next);
    bool halt = false;
    switch (gnn.halting.kind) {
      case GnnHaltingSpec::Kind::FixedLayer: halt = i == gnn.halting.k; break;
      case GnnHaltingSpec::Kind::ThresholdCount: {
        std::size_t hits = 0;
        for (double y : labels) hits += std::fabs(y - gnn.halting.target) <= kMatchTolerance;
        halt = static_cast<double>(hits) > gnn.halting.bound;
        break;
      }
      case GnnHaltingSpec::Kind::Family: {
        std::multiset<double> all(labels.begin(), labels.end());
        std::vector<double> args{static_cast<double>(i)};
        args.insert(args.end(), all.begin(), all.end());
        halt = call(fresh(gnn.halting.family, args.size()), args, 0, i) > 0.5;
        break;
      }
    }
    if (halt) {
      LabelledGraph out = g;
      out.labels = labels;
      return out;
    }
  }
  throw GnnNonHalting(outer_budget);
}

/// Runs `r` and rescans every gate value of every iteration; empty when
/// the run fails, does not halt within `budget`, or leaves [-limit, limit].
inline std::optional<RunResult> bounded_run(const RecurrentCircuit& r, const std::vector<double>& x,
                                            std::size_t budget, double limit = kValueLimit) {
  RunResult res;
  try {
    res = run(r, x, budget);
  } catch (const Error&) {
    return std::nullopt;
  }
  Evaluator ev(r.underlying);
  std::vector<double> vals;
  for (const auto& rec : res.trace.records) {
    std::span<const double> mem(rec.memory);
    ev.run(mem.first(r.n()), mem.subspan(r.n()), vals);
    for (double v : vals)
      if (std::fabs(v) > limit) return std::nullopt;
  }
  return res;
}

inline bool labels_bounded(const std::vector<std::vector<double>>& trace, double limit = kValueLimit) {
  for (const auto& row : trace)
    for (double v : row)
      if (std::fabs(v) > limit) return false;
  return true;
}

// ---------------------------------------------------------------- shrinking

/// Drops every non-source gate that reaches no output, halting gate or
/// recurrent-edge source.
inline RecurrentCircuit prune(const RecurrentCircuit& r) {
  const auto& c = r.underlying;
  std::vector<bool> keep(c.size(), false);
  std::vector<GateId> stack;
  auto mark = [&](GateId g) {
    if (!keep[g]) {
      keep[g] = true;
      stack.push_back(g);
    }
  };
  for (GateId g = 0; g < c.size(); ++g)
    if (c.gates[g].type == GateType::Input || c.gates[g].type == GateType::Aux || c.gates[g].type == GateType::Output)
      mark(g);
  for (GateId h : r.halting_gates) mark(h);
  for (const auto& [m, s] : r.rec_edges) mark(s);
  while (!stack.empty()) {
    GateId g = stack.back();
    stack.pop_back();
    for (GateId p : c.gates[g].preds) mark(p);
  }
  std::vector<GateId> id(c.size(), 0);
  RecurrentCircuit out = r;
  out.underlying.gates.clear();
  for (GateId g = 0; g < c.size(); ++g)
    if (keep[g]) {
      id[g] = out.underlying.gates.size();
      out.underlying.gates.push_back(c.gates[g]);
    }
  for (auto& gate : out.underlying.gates)
    for (auto& p : gate.preds) p = id[p];
  for (auto* v : {&out.underlying.inputs, &out.underlying.aux_memory, &out.underlying.outputs})
    for (auto& g : *v) g = id[g];
  for (auto& h : out.halting_gates) h = id[h];
  out.rec_edges.clear();
  for (const auto& [m, s] : r.rec_edges) out.rec_edges[id[m]] = id[s];
  if (r.counter_gate) out.counter_gate = id[*r.counter_gate];
  return out;
}

/// Replaces every use of gate `g` by its first predecessor, then prunes.
inline RecurrentCircuit bypass_gate(const RecurrentCircuit& r, GateId g) {
  const Gate& gate = r.underlying.gates.at(g);
  if (is_source(gate.type) || gate.type == GateType::Output || gate.preds.empty())
    throw ArityError("only interior gates can be bypassed");
  const GateId to = gate.preds[0];
  RecurrentCircuit out = r;
  for (auto& h : out.underlying.gates) {
    bool hit = false;
    for (auto& p : h.preds)
      if (p == g) p = to, hit = true;
    if (hit) {
      std::vector<GateId> uniq;
      for (GateId p : h.preds)
        if (std::find(uniq.begin(), uniq.end(), p) == uniq.end()) uniq.push_back(p);
      h.preds = std::move(uniq);
    }
  }
  for (auto& [m, s] : out.rec_edges)
    if (s == g) s = to;
  for (auto& h : out.halting_gates)
    if (h == g) h = to;
  return prune(out);
}

/// Greedy gate deletion: keeps bypassing interior gates while the circuit
/// stays valid and `fails` still holds.
template <class Fails>
RecurrentCircuit shrink_recurrent(RecurrentCircuit r, Fails&& fails, std::size_t max_rounds = 64) {
  for (std::size_t round = 0; round < max_rounds; ++round) {
    bool progress = false;
    for (GateId g = 0; g < r.underlying.size() && !progress; ++g) {
      const Gate& gate = r.underlying.gates[g];
      if (is_source(gate.type) || gate.type == GateType::Output) continue;
      RecurrentCircuit cand = bypass_gate(r, g);
      if (!validate(cand).ok()) continue;
      bool still = false;
      try {
        still = fails(cand);
      } catch (const std::exception&) {
      }
      if (still) {
        r = std::move(cand);
        progress = true;
      }
    }
    if (!progress) break;
  }
  return r;
}

inline LabelledGraph remove_vertex(const LabelledGraph& g, std::size_t v) {
  std::vector<Edge> edges;
  for (auto [a, b] : g.edges)
    if (a != v && b != v) edges.emplace_back(a - (a > v), b - (b > v));
  std::vector<double> labels = g.labels;
  labels.erase(labels.begin() + static_cast<std::ptrdiff_t>(v));
  return LabelledGraph(g.n - 1, std::move(edges), std::move(labels));
}

/// Greedy vertex then edge deletion while `fails` still holds.
template <class Fails>
LabelledGraph shrink_graph(LabelledGraph g, Fails&& fails, std::size_t max_rounds = 64) {
  auto holds = [&](const LabelledGraph& c) {
    try {
      return fails(c);
    } catch (const std::exception&) {
      return false;
    }
  };
  for (std::size_t round = 0; round < max_rounds; ++round) {
    bool progress = false;
    for (std::size_t v = 0; v < g.n && g.n > 1 && !progress; ++v) {
      auto c = remove_vertex(g, v);
      if (holds(c)) g = std::move(c), progress = true;
    }
    for (std::size_t e = 0; e < g.edges.size() && !progress; ++e) {
      auto c = g;
      c.edges.erase(c.edges.begin() + static_cast<std::ptrdiff_t>(e));
      if (holds(c)) g = std::move(c), progress = true;
    }
    if (!progress) break;
  }
  return g;
}

// ---------------------------------------------------------------- reports

struct TrialOutcome {
  bool pass = true;
  std::string message;
  json artifacts;

  static TrialOutcome ok() { return {}; }
  static TrialOutcome fail(std::string msg, json artifacts = json::object()) {
    return {false, std::move(msg), std::move(artifacts)};
  }
};

struct Counterexample {
  std::size_t trial = 0;
  std::string message;
  json bundle;
};

struct DiffReport {
  std::string name;
  std::uint64_t seed = 0;
  std::size_t trials = 0, passed = 0, failed = 0;
  std::optional<Counterexample> first;
  double seconds = 0.0;
  bool ok() const { return failed == 0; }
};

inline json to_json(const DiffReport& r) {
  json j{{"difftest", r.name},   {"seed", r.seed},     {"trials", r.trials}, {"passed", r.passed},
         {"failed", r.failed},   {"ok", r.ok()},       {"seconds", r.seconds}};
  if (r.first) j["first_counterexample"] = r.first->bundle;
  return j;
}

inline std::string replay_command(const std::string& name, const DiffTestConfig& c, std::size_t trial) {
  std::ostringstream os;
  os << "reccirc difftest " << name << " --seed " << c.seed << " --trial " << trial << " --max-gates " << c.max_gates
     << " --max-vertices " << c.max_vertices << " --max-iterations " << c.max_iterations << " --max-layers "
     << c.max_layers << " --max-period " << c.max_period << " --inner-budget " << c.inner_budget;
  if (c.float_mode) os << " --float";
  return os.str();
}

/// Runs `trial(rng, t)` for every trial index, concurrently, each with its
/// own Rng::for_trial stream; results merge in trial order, so the report
/// does not depend on the thread count.
template <class Trial>
DiffReport run_trials(const std::string& name, const DiffTestConfig& cfg, Trial&& trial) {
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<std::size_t> indices;
  if (cfg.only_trial)
    indices.push_back(*cfg.only_trial);
  else
    for (std::size_t t = 0; t < cfg.trials; ++t) indices.push_back(t);

  std::vector<TrialOutcome> out(indices.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k; (k = next.fetch_add(1)) < indices.size();) {
      Rng rng = Rng::for_trial(cfg.seed, indices[k]);
      try {
        out[k] = trial(rng, indices[k]);
      } catch (const std::exception& e) {
        out[k] = TrialOutcome::fail(std::string("exception: ") + e.what());
      }
    }
  };
  std::size_t threads = cfg.threads ? cfg.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, indices.size());
  std::vector<std::thread> pool;
  for (std::size_t k = 1; k < threads; ++k) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();

  DiffReport rep;
  rep.name = name;
  rep.seed = cfg.seed;
  rep.trials = indices.size();
  for (std::size_t k = 0; k < out.size(); ++k) {
    if (out[k].pass) {
      ++rep.passed;
      continue;
    }
    ++rep.failed;
    if (!rep.first) {
      Counterexample ce{indices[k], out[k].message, json::object()};
      ce.bundle = {{"difftest", name},
                   {"seed", cfg.seed},
                   {"trial", indices[k]},
                   {"config", to_json(cfg)},
                   {"message", out[k].message},
                   {"replay", replay_command(name, cfg, indices[k])},
                   {"artifacts", out[k].artifacts}};
      rep.first = std::move(ce);
    }
  }
  rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

namespace detail {

inline constexpr std::size_t kMaxDraws = 500;

inline std::string mismatch(const std::vector<double>& want, const std::vector<double>& got) {
  std::ostringstream os;
  os.precision(17);
  if (want.size() != got.size()) {
    os << "length " << got.size() << ", expected " << want.size();
    return os.str();
  }
  for (std::size_t k = 0; k < want.size(); ++k)
    if (!close(want[k], got[k], 0.0)) {
      os << "entry " << k << ": got " << got[k] << ", expected " << want[k];
      break;
    }
  return os.str();
}

inline std::optional<std::string> compare(const std::vector<double>& want, const std::vector<double>& got, double tol) {
  if (close(want, got, tol)) return std::nullopt;
  return mismatch(want, got);
}

}  // namespace detail

// ---------------------------------------------------------------- difftests

/// compose_recurrent(f, g) against run(g, run(f, x)) on fixed circuits.
inline DiffReport difftest_thm3_on(const RecurrentCircuit& f, const RecurrentCircuit& g,
                                   const std::vector<std::vector<double>>& xs, DiffTestConfig cfg = {}) {
  auto fg = compose_recurrent(f, g);
  cfg.trials = xs.size();
  return run_trials("thm3", cfg, [&](Rng&, std::size_t t) {
    auto mid = run(f, xs[t]);
    auto want = run(g, mid.outputs).outputs;
    auto got = run(fg, xs[t]).outputs;
    if (auto m = detail::compare(want, got, cfg.tolerance))
      return TrialOutcome::fail(*m, {{"f", to_json(f)}, {"g", to_json(g)}, {"x", xs[t]}});
    return TrialOutcome::ok();
  });
}

inline DiffReport difftest_thm3(const DiffTestConfig& cfg) {
  return run_trials("thm3", cfg, [&](Rng& rng, std::size_t) {
    for (std::size_t draw = 0; draw < detail::kMaxDraws; ++draw) {
      GenConstraints c;
      c.max_gates = cfg.max_gates;
      c.halting_within = cfg.max_iterations;
      auto f = gen_random_circuit(rng, c);
      c.inputs = f.m();
      auto g = gen_random_circuit(rng, c);
      auto x = draw_values(rng, f.n(), cfg.float_mode);
      auto rf = bounded_run(f, x, cfg.max_iterations);
      if (!rf) continue;
      auto rg = bounded_run(g, rf->outputs, cfg.max_iterations);
      if (!rg) continue;
      auto check = [&](const RecurrentCircuit& F, const RecurrentCircuit& G) -> std::optional<std::string> {
        auto want = run(G, run(F, x).outputs).outputs;
        auto fg = compose_recurrent(F, G);
        if (fg.halting.circuit.count_activation("sign") == 0) return "composed halting circuit has no sign gate";
        return detail::compare(want, run(fg, x).outputs, cfg.tolerance);
      };
      auto msg = check(f, g);
      if (!msg) return TrialOutcome::ok();
      auto fails = [&](const RecurrentCircuit& F, const RecurrentCircuit& G) {
        auto a = bounded_run(F, x, cfg.max_iterations);
        return a && bounded_run(G, a->outputs, cfg.max_iterations) && check(F, G).has_value();
      };
      auto fs = shrink_recurrent(f, [&](const RecurrentCircuit& F) { return fails(F, g); });
      auto gs = shrink_recurrent(g, [&](const RecurrentCircuit& G) { return fails(fs, G); });
      return TrialOutcome::fail(*msg, {{"f", to_json(f)},
                                       {"g", to_json(g)},
                                       {"x", x},
                                       {"shrunk_f", to_json(fs)},
                                       {"shrunk_g", to_json(gs)},
                                       {"composed", to_json(compose_recurrent(f, g))}});
    }
    return TrialOutcome::fail("no admissible instance drawn");
  });
}

inline DiffReport difftest_thm4(const DiffTestConfig& cfg) {
  return run_trials("thm4", cfg, [&](Rng& rng, std::size_t) {
    for (std::size_t draw = 0; draw < detail::kMaxDraws; ++draw) {
      auto g = gen_random_graph(rng, cfg.max_vertices, cfg.float_mode);
      auto gnn = gen_outer_gnn(rng, cfg.max_period, cfg.max_layers);
      GnnRunResult ref;
      try {
        ref = run_gnn(gnn, g, cfg.max_layers);
      } catch (const Error&) {
        continue;
      }
      if (!labels_bounded(ref.trace)) continue;
      bool sign_free = std::all_of(gnn.layers.begin(), gnn.layers.end(), [](const LayerSpec& l) { return l.activation == "id"; });
      auto check = [&](const LabelledGraph& G) -> std::optional<std::string> {
        auto want = run_gnn(gnn, G, cfg.max_layers);
        auto rec = compile_gnn_outer_to_circuit(gnn, G);
        if (sign_free && rec.underlying.count_activation("sign") != 0) return "sign gate in a sign-free compile";
        auto got = run(rec, encode_graph(G), cfg.max_layers + 1);
        if (got.iterations != want.layers)
          return "halted after " + std::to_string(got.iterations) + " iterations, GNN after " +
                 std::to_string(want.layers) + " layers";
        return detail::compare(encode_graph(want.graph), got.outputs, cfg.tolerance);
      };
      auto msg = check(g);
      if (!msg) return TrialOutcome::ok();
      auto small = shrink_graph(g, [&](const LabelledGraph& G) {
        auto r = run_gnn(gnn, G, cfg.max_layers);
        return labels_bounded(r.trace) && check(G).has_value();
      });
      return TrialOutcome::fail(*msg, {{"gnn", to_json(gnn)}, {"graph", to_json(g)}, {"shrunk_graph", to_json(small)}});
    }
    return TrialOutcome::fail("no admissible instance drawn");
  });
}

namespace detail {

template <class Compile>
DiffReport inner_difftest(const std::string& name, const DiffTestConfig& cfg, bool threshold, Compile compile) {
  return run_trials(name, cfg, [&](Rng& rng, std::size_t) {
    for (std::size_t draw = 0; draw < kMaxDraws; ++draw) {
      auto g = gen_random_graph(rng, std::min<std::size_t>(cfg.max_vertices, 4), cfg.float_mode);
      auto gnn = gen_inner_gnn(rng, cfg.max_period, cfg.inner_budget, threshold);
      GnnRunResult ref;
      try {
        ref = run_gnn(gnn, g, cfg.max_layers);
      } catch (const Error&) {
        continue;
      }
      if (!labels_bounded(ref.trace)) continue;
      auto check = [&](const LabelledGraph& G) -> std::optional<std::string> {
        auto want = run_gnn(gnn, G, cfg.max_layers);
        auto rec = compile(gnn, G);
        auto got = run(rec, encode_graph(G));
        return compare(encode_graph(want.graph), got.outputs, cfg.tolerance);
      };
      auto msg = check(g);
      if (!msg) return TrialOutcome::ok();
      auto small = shrink_graph(g, [&](const LabelledGraph& G) {
        auto r = run_gnn(gnn, G, cfg.max_layers);
        return labels_bounded(r.trace) && check(G).has_value();
      });
      return TrialOutcome::fail(*msg, {{"gnn", to_json(gnn)}, {"graph", to_json(g)}, {"shrunk_graph", to_json(small)}});
    }
    return TrialOutcome::fail("no admissible instance drawn");
  });
}

}  // namespace detail

inline DiffReport difftest_thm5(const DiffTestConfig& cfg) {
  return detail::inner_difftest("thm5", cfg, false, [](const RecCGnn& gnn, const LabelledGraph& g) {
    return compile_gnn_inner_to_circuit(gnn, g);
  });
}

inline DiffReport difftest_cor1(const DiffTestConfig& cfg) {
  return detail::inner_difftest("cor1", cfg, true, [](const RecCGnn& gnn, const LabelledGraph& g) {
    return compile_gnn_full_to_circuit(gnn, g);
  });
}

enum class Thm6Mode { Embedded, Global };

namespace detail {

/// Compiles `rec` to an outer GNN, runs it on the encoding of `x` and
/// compares the output-gate vertices and the layer count.
inline std::optional<std::string> check_outer(const RecurrentCircuit& rec, const std::vector<double>& x,
                                              const RunResult& ref, Thm6Mode mode, double tol) {
  auto art = compile_circuit_to_outer_gnn(rec, mode == Thm6Mode::Global);
  const std::size_t expect_layers = ref.iterations * art.phase_length;
  auto res = run_gnn(art.gnn, art.instantiate(x), GnnRunOptions{expect_layers + 1, false});
  if (res.layers != expect_layers)
    return "GNN halted after " + std::to_string(res.layers) + " layers, expected " + std::to_string(ref.iterations) +
           " x " + std::to_string(art.phase_length);
  return compare(ref.outputs, art.outputs_of(res.graph), tol);
}

inline const char* thm6_name(Thm6Mode mode) { return mode == Thm6Mode::Global ? "thm7" : "thm6"; }

}  // namespace detail

/// Outer-GNN compile of one fixed circuit, one trial per input vector.
inline DiffReport difftest_thm6_on(const RecurrentCircuit& rec, const std::vector<std::vector<double>>& xs,
                                   Thm6Mode mode = Thm6Mode::Embedded, DiffTestConfig cfg = {}) {
  cfg.trials = xs.size();
  return run_trials(detail::thm6_name(mode), cfg, [&](Rng&, std::size_t t) {
    auto ref = run(rec, xs[t]);
    if (auto m = detail::check_outer(rec, xs[t], ref, mode, cfg.tolerance))
      return TrialOutcome::fail(*m, {{"circuit", to_json(rec)}, {"x", xs[t]}});
    return TrialOutcome::ok();
  });
}

inline DiffReport difftest_thm6(const DiffTestConfig& cfg, Thm6Mode mode = Thm6Mode::Embedded) {
  return run_trials(detail::thm6_name(mode), cfg, [&](Rng& rng, std::size_t) {
    for (std::size_t draw = 0; draw < detail::kMaxDraws; ++draw) {
      GenConstraints c;
      c.max_gates = cfg.max_gates;
      c.halting_within = cfg.max_iterations;
      c.predecessor_form = mode == Thm6Mode::Global;
      auto rec = gen_random_circuit(rng, c);
      auto x = draw_values(rng, rec.n(), cfg.float_mode);
      auto ref = bounded_run(rec, x, cfg.max_iterations);
      if (!ref) continue;
      auto msg = detail::check_outer(rec, x, *ref, mode, cfg.tolerance);
      if (!msg) return TrialOutcome::ok();
      auto small = shrink_recurrent(rec, [&](const RecurrentCircuit& r) {
        if (mode == Thm6Mode::Global && !is_predecessor_form(r)) return false;
        auto rr = bounded_run(r, x, cfg.max_iterations);
        return rr && detail::check_outer(r, x, *rr, mode, cfg.tolerance).has_value();
      });
      return TrialOutcome::fail(*msg, {{"circuit", to_json(rec)}, {"x", x}, {"shrunk_circuit", to_json(small)}});
    }
    return TrialOutcome::fail("no admissible instance drawn");
  });
}

inline DiffReport difftest_thm8(const DiffTestConfig& cfg) {
  return run_trials("thm8", cfg, [&](Rng& rng, std::size_t t) {
    for (std::size_t draw = 0; draw < detail::kMaxDraws; ++draw) {
      GenConstraints c;
      c.symmetric = true;
      c.halting_within = cfg.max_iterations;
      c.inputs = 1 + rng.index(4);
      c.outputs = 1 + rng.index(3);
      auto rec = gen_random_circuit(rng, c);
      auto x = draw_values(rng, rec.n(), cfg.float_mode);
      auto ref = bounded_run(rec, x, cfg.max_iterations);
      if (!ref) continue;
      auto art = compile_symmetric_circuit_to_inner_gnn(rec, 50, cfg.seed ^ t);
      auto res = run_gnn(art.gnn, art.graph(x));
      auto fail = [&](std::string m) {
        return TrialOutcome::fail(std::move(m), {{"circuit", to_json(rec)}, {"x", x}, {"gnn", to_json(art.gnn)}});
      };
      if (auto m = detail::compare(ref->outputs, art.outputs_of(res.graph), cfg.tolerance)) return fail(*m);
      std::vector<double> input_side(res.graph.labels.begin(), res.graph.labels.begin() + static_cast<std::ptrdiff_t>(art.n));
      if (input_side != x) return fail("input-side labels changed: " + detail::mismatch(x, input_side));
      return TrialOutcome::ok();
    }
    return TrialOutcome::fail("no admissible instance drawn");
  });
}

inline const std::vector<std::string>& difftest_names() {
  static const std::vector<std::string> names{"thm3", "thm4", "thm5", "cor1", "thm6", "thm7", "thm8"};
  return names;
}

inline DiffReport difftest(const std::string& name, const DiffTestConfig& cfg) {
  if (name == "thm3") return difftest_thm3(cfg);
  if (name == "thm4") return difftest_thm4(cfg);
  if (name == "thm5") return difftest_thm5(cfg);
  if (name == "cor1") return difftest_cor1(cfg);
  if (name == "thm6") return difftest_thm6(cfg, Thm6Mode::Embedded);
  if (name == "thm7") return difftest_thm6(cfg, Thm6Mode::Global);
  if (name == "thm8") return difftest_thm8(cfg);
  throw ArityError("unknown difftest '" + name + "'");
}

}  // namespace reccirc
