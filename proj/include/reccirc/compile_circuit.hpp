#pragma once

// Recurrent circuit -> GNN compilers.

#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "gadgets.hpp"
#include "gnn.hpp"
#include "graph.hpp"
#include "report.hpp"

namespace reccirc {

// ---------------------------------------------------------------- normalization

/// Rewrites a folded circuit so that the layer schedule of the outer-GNN
/// simulation never needs a vertex to read and write in the same layer:
///  * every used input, aux or constant gate s gets a relay Add(s) that takes
///    over all of its uses (successors, halting list, recurrent sources);
///  * every memory gate m reads its recurrent value through a relay
///    r_m = Add(source), so memory vertices are never adjacent to each other
///    through a recurrent edge;
///  * an output gate whose predecessor is a source relay gets one more relay.
/// Semantics (outputs, halting values, iteration count) are unchanged.
inline RecurrentCircuit normalize_for_gnn(const RecurrentCircuit& r) {
  const auto& c = r.underlying;
  const std::size_t N = c.size();
  auto succ = successors(c);
  std::set<GateId> halting(r.halting_gates.begin(), r.halting_gates.end()), sources;
  for (const auto& [mem, src] : r.rec_edges) sources.insert(src);

  CircuitBuilder b(c);
  std::vector<GateId> relay(N);
  std::vector<bool> has_relay(N, false);
  for (GateId g = 0; g < N; ++g) {
    relay[g] = g;
    if (is_source(c.gates[g].type) && (!succ[g].empty() || halting.count(g) || sources.count(g))) {
      relay[g] = b.identity(g);
      has_relay[g] = true;
    }
  }
  for (GateId g = 0; g < N; ++g)
    for (auto& p : b.circuit().gates[g].preds) p = relay[p];

  RecurrentCircuit out;
  for (GateId h : r.halting_gates) out.halting_gates.push_back(relay[h]);
  for (GateId o : c.outputs) {
    GateId p = b.circuit().gates[o].preds[0];
    if (p >= N) {
      GateId extra = b.identity(p);
      b.circuit().gates[o].preds[0] = extra;
    }
  }
  for (GateId m : r.memory_gates()) {
    GateId src = r.rec_edges.at(m);
    if (c.gates[src].type == GateType::Output) src = c.gates[src].preds[0];
    out.rec_edges[m] = b.identity(relay[src]);
  }
  out.underlying = std::move(b).build();
  out.initial_aux = r.initial_aux;
  out.halting = r.halting;
  out.counter_gate = r.counter_gate;
  return out;
}

// ---------------------------------------------------------------- outer GNN

/// What a vertex does in one layer.
struct VertexOp {
  enum class Kind { Hold, Reset, Sum, Prod, ActSum };
  Kind kind = Kind::Hold;
  double value = 1.0;      // Reset: the value; Sum/ActSum: the correction q
  std::string activation;  // ActSum
  bool operator==(const VertexOp&) const = default;
};

inline const char* kind_name(VertexOp::Kind k) {
  switch (k) {
    case VertexOp::Kind::Hold: return "hold";
    case VertexOp::Kind::Reset: return "reset";
    case VertexOp::Kind::Sum: return "sum";
    case VertexOp::Kind::Prod: return "prod";
    case VertexOp::Kind::ActSum: return "act";
  }
  return "?";
}

/// Member of arity k implementing `op` on (own, neighbours...).
inline FamilyMember op_member(std::size_t arity, const VertexOp& op) {
  CircuitBuilder b;
  std::vector<GateId> in;
  for (std::size_t k = 0; k < arity; ++k) in.push_back(b.input());
  std::vector<GateId> nb(in.begin() + 1, in.end());
  auto sum = [&] {
    std::vector<GateId> terms = nb;
    if (op.value != 0.0) terms.push_back(b.constant(-op.value));
    return b.add(std::move(terms));
  };
  switch (op.kind) {
    case VertexOp::Kind::Hold: b.output(in[0]); break;
    case VertexOp::Kind::Reset: b.output(b.constant(op.value)); break;
    case VertexOp::Kind::Sum: b.output(sum()); break;
    case VertexOp::Kind::Prod: b.output(b.mul(nb)); break;
    case VertexOp::Kind::ActSum: b.output(b.act(op.activation, sum())); break;
  }
  return FamilyMember::of(std::move(b).build());
}

struct OuterGnnArtifact {
  RecCGnn gnn;
  SymbolicLabelledGraph graph;
  RecurrentCircuit normalized;  // the circuit whose gates the graph encodes
  std::vector<std::size_t> output_vertices;
  std::size_t underlying_layers = 0;  // layers spent on the underlying circuit
  std::size_t phase_length = 0;       // layers per simulated circuit iteration
  std::size_t halt_copies = 0;
  std::size_t max_spurious_twos = 0;  // most non-copy vertices that may read 2 after a layer
  bool global_activations = false;
  std::vector<std::vector<VertexOp>> ops;  // ops[layer-1][gate vertex]

  LabelledGraph instantiate(const std::vector<double>& x) const { return instantiate_encoding(graph, normalized, x); }
  std::vector<double> outputs_of(const LabelledGraph& g) const {
    std::vector<double> v;
    for (std::size_t o : output_vertices) v.push_back(g.labels.at(o));
    return v;
  }
};

namespace detail {

struct VertexPlan {
  enum class Kind { Memory, Constant, Idle, Eval } kind = Kind::Idle;
  VertexOp op;            // Eval: the evaluation; Constant: the reset value
  std::size_t eval = 0;   // layer in which the vertex computes
  std::size_t last = 0;   // layer of its last consumer; held strictly between
  bool copy = false;      // halting output copy
  bool sigma = false;     // global-mode activation vertex
};

struct PhasePlan {
  std::vector<VertexPlan> v;
  std::size_t U = 0, P = 0;
  std::map<std::size_t, std::string> act_layers;  // activation layer -> activation
};

inline PhasePlan plan_phase(const RecurrentCircuit& N, const ExtendedCircuit& hp, bool global,
                            const std::vector<std::size_t>& q) {
  const auto& c = N.underlying;
  const std::size_t Nu = c.size();
  auto dN = gate_depths(c);
  auto dH = gate_depths(hp);
  const std::size_t D = depth(c), Dh = depth(hp);

  std::map<std::size_t, std::string> act_level;
  if (global)
    for (GateId g = 0; g < Nu; ++g)
      if (c.gates[g].type == GateType::Activation) {
        auto [it, fresh] = act_level.emplace(dN[g], c.gates[g].activation);
        if (!fresh && it->second != c.gates[g].activation)
          throw CompileError("activation level " + std::to_string(dN[g]) + " mixes activations");
      }
  auto pos = [&](std::size_t d) {
    std::size_t k = d;
    for (const auto& [a, name] : act_level)
      if (a < d) ++k;
    return k;
  };
  PhasePlan plan;
  plan.U = pos(D) + (act_level.count(D) ? 1 : 0);
  plan.P = plan.U + Dh + 1;
  for (const auto& [a, name] : act_level) plan.act_layers[pos(a)] = name;
  const std::size_t U = plan.U, P = plan.P;

  plan.v.resize(Nu + hp.size());
  auto succ = successors(c);
  std::set<GateId> halting(N.halting_gates.begin(), N.halting_gates.end()), rsrc;
  for (const auto& [m, s] : N.rec_edges) rsrc.insert(s);
  for (GateId g = 0; g < Nu; ++g) {
    const Gate& gate = c.gates[g];
    VertexPlan& p = plan.v[g];
    switch (gate.type) {
      case GateType::Input:
      case GateType::Aux:
        p.kind = VertexPlan::Kind::Memory;
        p.op = {VertexOp::Kind::Sum, double(q[g]), {}};
        p.eval = P;
        continue;
      case GateType::Constant:
        p.kind = VertexPlan::Kind::Constant;
        p.op = {VertexOp::Kind::Reset, gate.value, {}};
        continue;
      case GateType::Add:
      case GateType::Output: p.op = {VertexOp::Kind::Sum, double(q[g]), {}}; break;
      case GateType::Mul: p.op = {VertexOp::Kind::Prod, 0.0, {}}; break;
      case GateType::Activation:
        if (global) {
          p.op = {VertexOp::Kind::Sum, double(q[g]), {}};
          p.sigma = true;
        } else {
          p.op = {VertexOp::Kind::ActSum, double(q[g]), gate.activation};
        }
        break;
    }
    p.kind = VertexPlan::Kind::Eval;
    p.eval = pos(dN[g]);
    p.last = p.eval;
    for (GateId s : succ[g]) p.last = std::max(p.last, pos(dN[s]));
    if (halting.count(g)) p.last = std::max(p.last, U + 1);
    if (rsrc.count(g)) p.last = std::max(p.last, P);
    if (gate.type == GateType::Output) p.last = P + 1;
  }
  auto hsucc = successors(hp);
  for (GateId h = 0; h < hp.size(); ++h) {
    const Gate& gate = hp.gates[h];
    VertexPlan& p = plan.v[Nu + h];
    if (gate.type == GateType::Constant) {
      p.kind = VertexPlan::Kind::Constant;
      p.op = {VertexOp::Kind::Reset, gate.value, {}};
      continue;
    }
    if (gate.type == GateType::Input && gate.index == 0) {
      p.kind = VertexPlan::Kind::Idle;  // folded circuits never read it
      continue;
    }
    p.kind = VertexPlan::Kind::Eval;
    switch (gate.type) {
      case GateType::Mul: p.op = {VertexOp::Kind::Prod, 0.0, {}}; break;
      case GateType::Activation: p.op = {VertexOp::Kind::ActSum, double(q[Nu + h]), gate.activation}; break;
      default: p.op = {VertexOp::Kind::Sum, double(q[Nu + h]), {}}; break;
    }
    p.eval = U + 1 + dH[h];
    p.last = p.eval;
    for (GateId s : hsucc[h]) p.last = std::max(p.last, U + 1 + dH[s]);
    if (gate.type == GateType::Output) {
      p.copy = true;
      p.last = P + 1;
    }
  }
  return plan;
}

inline VertexOp op_at(const VertexPlan& p, std::size_t i, std::size_t P) {
  switch (p.kind) {
    case VertexPlan::Kind::Memory: return i == P ? p.op : VertexOp{VertexOp::Kind::Reset, 1.0, {}};
    case VertexPlan::Kind::Constant: return p.op;
    case VertexPlan::Kind::Idle: return {VertexOp::Kind::Reset, 1.0, {}};
    case VertexPlan::Kind::Eval: break;
  }
  if (i == p.eval) return p.op;
  if (p.eval < i && i < p.last) return {VertexOp::Kind::Hold, 1.0, {}};
  return {VertexOp::Kind::Reset, 1.0, {}};
}

inline bool live_after(const VertexPlan& p, std::size_t i, std::size_t P) {
  if (p.kind == VertexPlan::Kind::Memory) return i == P;
  if (p.kind != VertexPlan::Kind::Eval) return false;
  return i == p.eval || (p.eval < i && i < p.last);
}

/// Largest number of non-copy vertices that may hold the sentinel 2 after
/// any layer.  Also enforces the global-activation restrictions.
inline std::size_t spurious_twos(const PhasePlan& plan, const std::vector<std::string>& names) {
  const auto& reg = ActivationRegistry::builtin();
  std::size_t worst = 0;
  for (std::size_t i = 1; i <= plan.P; ++i) {
    auto act = plan.act_layers.find(i);
    auto follow = plan.act_layers.find(i - 1);
    std::size_t count = 0;
    for (std::size_t v = 0; v < plan.v.size(); ++v) {
      const auto& p = plan.v[v];
      bool live = live_after(p, i, plan.P);
      if (act != plan.act_layers.end() && live && !(p.sigma && p.eval == i))
        throw CompileError("value of " + names[v] + " would pass through the global activation at layer " +
                           std::to_string(i));
      if (follow != plan.act_layers.end() && live && !(p.sigma && p.eval == i - 1))
        throw CompileError("value of " + names[v] + " is live across the global activation at layer " +
                           std::to_string(i - 1));
      if (p.copy) continue;
      if (live) {
        ++count;
      } else if (p.kind == VertexPlan::Kind::Constant) {
        double val = p.op.value;
        if (act != plan.act_layers.end()) val = reg.get(act->second)(val);
        if (val == 2.0) ++count;
      }
    }
    if (act != plan.act_layers.end() && reg.get(act->second)(1.0) == 2.0)
      throw CompileError("activation maps the reset value 1 to the halting sentinel 2");
    worst = std::max(worst, count);
  }
  return worst;
}

}  // namespace detail

/// Outer-recurrent GNN simulating `rec` on its symbolic graph encoding.
/// Each circuit iteration takes `phase_length` layers: one per depth level
/// of the (normalized) circuit, one extra layer per activation level in
/// global-activation mode, then the halting phase, whose last layer also
/// hands the recurrent values to the memory vertices.  The GNN halts once
/// more than `halt_copies - 1` vertices read 2, which happens exactly after
/// the halting phase of the circuit's last iteration.
inline OuterGnnArtifact compile_circuit_to_outer_gnn(const RecurrentCircuit& rec, bool global_activations = false,
                                                     CompileReport* report = nullptr) {
  require_valid(rec);
  if (global_activations && !is_predecessor_form(rec))
    throw CompileError("global-activation mode needs a circuit in predecessor form");
  RecurrentCircuit r0 = lower_halting(rec);
  if (!is_folded(r0)) r0 = fold_iteration_counter(r0);

  OuterGnnArtifact art;
  art.global_activations = global_activations;
  art.normalized = normalize_for_gnn(r0);
  const auto& N = art.normalized;
  const std::size_t Nu = N.underlying.size();

  // The schedule does not depend on the number of halting copies, so a
  // one-copy plan sizes the copy count before the real encoding is built.
  auto names = [&](const ExtendedCircuit& hp) {
    std::vector<std::string> s;
    for (GateId g = 0; g < Nu; ++g) s.push_back("gate " + std::to_string(g));
    for (GateId g = 0; g < hp.size(); ++g) s.push_back("halting gate " + std::to_string(g));
    return s;
  };
  {
    auto hp1 = modified_halting_circuit(N.halting.circuit, 1);
    std::vector<std::size_t> q0(Nu + hp1.size(), 0);
    auto plan1 = detail::plan_phase(N, hp1, global_activations, q0);
    art.max_spurious_twos = detail::spurious_twos(plan1, names(hp1));
  }
  art.halt_copies = std::max(default_halt_copies(N), art.max_spurious_twos + 1);
  art.graph = symbolic_encode_circuit(N, art.halt_copies);
  const auto& s = art.graph;
  std::vector<std::size_t> q(s.gate_vertices);
  for (std::size_t v = 0; v < s.gate_vertices; ++v) q[v] = s.roles[v].q;
  auto plan = detail::plan_phase(N, s.halting_prime, global_activations, q);
  art.underlying_layers = plan.U;
  art.phase_length = plan.P;
  for (GateId o : N.underlying.outputs) art.output_vertices.push_back(o);

  for (std::size_t i = 1; i <= plan.P; ++i) {
    std::map<std::size_t, FamilyMember> members;
    std::vector<VertexOp> ops(s.gate_vertices);
    for (std::size_t v = 0; v < s.gate_vertices; ++v) {
      ops[v] = detail::op_at(plan.v[v], i, plan.P);
      members.emplace((v + 1) * s.r_prime + 1, op_member((v + 1) * s.r_prime + 1, ops[v]));
    }
    bool follow = plan.act_layers.count(i - 1) > 0;
    members.emplace(2, op_member(2, follow ? VertexOp{VertexOp::Kind::Reset, 1.0, {}} : VertexOp{}));
    CircuitFamily::Tags tags;
    tags.sign_free = true;
    for (const auto& [k, m] : members)
      if (m.circuit().count_activation("sign")) tags.sign_free = false;
    auto act = plan.act_layers.find(i);
    art.gnn.layers.push_back(
        {CircuitFamily::from_members(std::move(members), tags), act == plan.act_layers.end() ? "id" : act->second});
    art.ops.push_back(std::move(ops));
  }
  art.gnn.halting = GnnHaltingSpec::threshold_count(2.0, double(art.halt_copies - 1));

  if (report) {
    report->construction = global_activations ? "circ2gnn-outer-global" : "circ2gnn-outer";
    report->source = CompileReport::of(metrics(rec));
    auto structure = s.structure();
    report->target = CompileReport::of(metrics(art.gnn, &structure));
    report->target["phase_length"] = double(art.phase_length);
    report->target["halt_copies"] = double(art.halt_copies);
    report->target["r_prime"] = double(s.r_prime);
    report->gadgets = {{"source_relays", N.underlying.size() - r0.underlying.size()},
                       {"halting_copies", art.halt_copies}};
  }
  return art;
}

// ---------------------------------------------------------------- symmetric circuits

struct InnerGnnArtifact {
  RecCGnn gnn;
  std::size_t n = 0, m = 0;
  bool padded = false;  // extra output-side vertex labelled 0 when n == m

  LabelledGraph graph(const std::vector<double>& x) const {
    LabelledGraph g = bipartite_encode(n, m, x);
    if (padded) {
      g.labels.push_back(0.0);
      for (std::size_t i = 0; i < n; ++i) g.edges.emplace_back(i, n + m);
      g.n += 1;
      g.normalize();
    }
    return g;
  }
  std::vector<double> outputs_of(const LabelledGraph& g) const {
    return {g.labels.begin() + static_cast<std::ptrdiff_t>(n),
            g.labels.begin() + static_cast<std::ptrdiff_t>(n + m)};
  }
};

/// Samples input permutations of full runs; returns a description of the
/// first counterexample, if any.
inline std::optional<std::string> find_asymmetry(const RecurrentCircuit& rec, std::size_t trials,
                                                 std::uint64_t seed, std::size_t budget = 1000) {
  Runner runner(rec);
  Rng rng(seed);
  const std::size_t n = rec.n();
  for (std::size_t t = 0; t < trials; ++t) {
    std::vector<double> x(n), y(n);
    for (auto& v : x) v = static_cast<double>(rng.integer(-4, 4));
    auto perm = rng.permutation(n);
    if (n >= 2 && t == 0) perm = [&] {
      auto p = perm;
      for (std::size_t i = 0; i < n; ++i) p[i] = i;
      std::swap(p[0], p[1]);
      return p;
    }();
    for (std::size_t i = 0; i < n; ++i) y[i] = x[perm[i]];
    std::vector<double> ox, oy;
    try {
      ox = runner(x, budget, false).outputs;
      oy = runner(y, budget, false).outputs;
    } catch (const Error&) {
      continue;
    }
    if (!close(ox, oy)) {
      std::string w = "outputs differ under input permutation; x = (";
      for (std::size_t i = 0; i < n; ++i) w += (i ? ", " : "") + std::to_string(x[i]);
      return w + ")";
    }
  }
  return std::nullopt;
}

/// Single-layer inner-recurrent GNN over the complete bipartite encoding.
/// Output-side vertices run the circuit wrapped so that their own label
/// selects which output they keep; input-side vertices keep their label.
inline InnerGnnArtifact compile_symmetric_circuit_to_inner_gnn(const RecurrentCircuit& rec, std::size_t check_trials = 200,
                                                              std::uint64_t seed = 1,
                                                              std::size_t inner_budget = kDefaultBudget,
                                                              CompileReport* report = nullptr) {
  require_valid(rec);
  if (rec.n() < 1 || rec.m() < 1) throw CompileError("symmetric compiler needs at least one input and output");
  if (auto w = find_asymmetry(rec, check_trials, seed)) throw CompileError("circuit is not symmetric: " + *w);
  InnerGnnArtifact art;
  art.n = rec.n();
  art.m = rec.m();
  art.padded = art.n == art.m;
  const std::size_t out_degree = art.m + (art.padded ? 1 : 0);

  RecBuilder rb;
  CircuitBuilder& b = rb.b;
  GateId head = rb.input();
  std::vector<GateId> xs, auxs;
  for (std::size_t k = 0; k < rec.n(); ++k) xs.push_back(rb.input());
  for (double a0 : rec.initial_aux) auxs.push_back(rb.aux(a0));
  auto map = embed(b, rec.underlying, xs, auxs);
  auto outs = embedded_outputs(rec.underlying, map);
  rb.feed(head, head);
  for (std::size_t k = 0; k < xs.size(); ++k) rb.feed(xs[k], map[rec.rec_edges.at(rec.underlying.inputs[k])]);
  for (std::size_t k = 0; k < auxs.size(); ++k) rb.feed(auxs[k], map[rec.rec_edges.at(rec.underlying.aux_memory[k])]);
  std::vector<double> sel = range_1_to(art.m);
  if (art.padded) {
    sel.insert(sel.begin(), 0.0);
    outs.insert(outs.begin(), b.constant(0.0));
  }
  GateId chosen = outs.size() == 1 ? outs[0] : switch_select(b, head, sel, outs);
  b.output(chosen);
  for (GateId h : rec.halting_gates) rb.halting.push_back(map[h]);
  auto wrapped = std::move(rb).build(rec.halting);

  CircuitBuilder ib;
  GateId own = ib.input();
  for (std::size_t k = 0; k < out_degree; ++k) ib.input();
  ib.output(own);

  std::map<std::size_t, FamilyMember> members;
  members.emplace(art.n + 1, FamilyMember::of(std::move(wrapped)));
  members.emplace(out_degree + 1, FamilyMember::of(std::move(ib).build()));
  CircuitFamily::Tags tags;
  tags.recurrent = true;
  art.gnn.layers.push_back({CircuitFamily::from_members(std::move(members), tags), "id"});
  art.gnn.halting = GnnHaltingSpec::fixed_layer(1);
  art.gnn.inner_budget = inner_budget;
  if (report) {
    report->construction = "circ2gnn-inner";
    report->source = CompileReport::of(metrics(rec));
    auto g = art.graph(std::vector<double>(art.n, 0.0));
    report->target = CompileReport::of(metrics(art.gnn, &g));
    report->gadgets = {{"switch", art.m > 1 || art.padded ? 1 : 0}, {"padding_vertex", art.padded ? 1 : 0}};
  }
  return art;
}

// ---------------------------------------------------------------- exp tower

/// in -> e = exp(in) -> Mul(e) -> out, with e fed back into in and used as
/// the halting gate; fixed-iteration(k) halting.
inline RecurrentCircuit exp_tower_circuit(std::size_t k) {
  RecBuilder rb;
  auto& b = rb.b;
  GateId in = rb.input();
  GateId e = b.act("exp", in);
  b.output(b.mul({e}));
  rb.feed(in, e);
  rb.halting = {e};
  return std::move(rb).build(HaltingSpec::fixed_iteration(k));
}

/// (e^^d)^p with e^^1 = e and e^^(k+1) = e^(e^^k).
inline double tower(std::size_t d, double p) {
  if (p == 0.0) return 1.0;
  double t = 1.0;
  for (std::size_t k = 0; k < d; ++k) t = std::exp(t);
  return std::pow(t, p);
}

struct ExpTowerRow {
  std::size_t iterations = 0;
  double value = 0.0;
  bool overflow = false;
};

struct ExpTowerReport {
  double x = 0.1;
  std::vector<ExpTowerRow> rows;
};

/// Iterated exponentials exp^k(x) for k = 1..depth_bound, computed by the
/// recurrent exp circuit; overflowing rows are flagged instead of thrown.
inline ExpTowerReport exp_tower_demo(std::size_t depth_bound, double x = 0.1) {
  ExpTowerReport r;
  r.x = x;
  for (std::size_t k = 1; k <= depth_bound; ++k) {
    ExpTowerRow row;
    row.iterations = k;
    try {
      row.value = run(exp_tower_circuit(k), {x}).outputs[0];
    } catch (const IterationError&) {
      row.overflow = true;
      row.value = HUGE_VAL;
    }
    r.rows.push_back(row);
  }
  return r;
}

}  // namespace reccirc
