#pragma once

#include <algorithm>
#include <set>
#include <vector>

#include "circuit.hpp"
#include "recurrent.hpp"

namespace reccirc {

/// A standalone circuit fragment plus the interface a host needs to splice it.
struct GadgetHandle {
  ExtendedCircuit circuit;
  // Latches are auxiliary gates of the fragment that expect a recurrent edge
  // from `latch_updates[k]` and start at `latch_init[k]`.
  std::vector<GateId> latches;
  std::vector<GateId> latch_updates;
  std::vector<double> latch_init;

  GateId input(std::size_t k) const { return circuit.inputs.at(k); }
  GateId output(std::size_t k) const { return circuit.outputs.at(k); }

  /// Wraps the fragment as a recurrent circuit whose inputs hold their value.
  RecurrentCircuit as_recurrent(HaltingSpec h, std::vector<GateId> halting_gates = {}) const {
    RecurrentCircuit r;
    r.underlying = circuit;
    for (GateId in : circuit.inputs) r.rec_edges[in] = in;
    for (std::size_t k = 0; k < latches.size(); ++k) r.rec_edges[latches[k]] = latch_updates[k];
    r.initial_aux = latch_init;
    r.halting_gates = std::move(halting_gates);
    r.halting = std::move(h);
    return r;
  }
};

/// Copies `frag` into the host.  Fragment inputs/aux gates are bound to the
/// given host gates; fragment outputs map to the host id of their predecessor.
inline std::vector<GateId> embed(CircuitBuilder& b, const ExtendedCircuit& frag,
                                 const std::vector<GateId>& input_bind,
                                 const std::vector<GateId>& aux_bind = {}) {
  if (input_bind.size() != frag.n())
    throw ArityError("embed: fragment has " + std::to_string(frag.n()) + " inputs, bound " +
                     std::to_string(input_bind.size()));
  if (aux_bind.size() != frag.l()) throw ArityError("embed: aux binding size mismatch");
  auto order = topo_order(frag);
  if (!order) throw ValidationError("embed: fragment has a cycle");
  std::vector<GateId> map(frag.size());
  for (GateId g : *order) {
    const Gate& gate = frag.gates[g];
    std::vector<GateId> preds;
    for (GateId p : gate.preds) preds.push_back(map[p]);
    switch (gate.type) {
      case GateType::Input: map[g] = input_bind[gate.index]; break;
      case GateType::Aux: map[g] = aux_bind[gate.index]; break;
      case GateType::Constant: map[g] = b.constant(gate.value); break;
      case GateType::Add: map[g] = b.add(std::move(preds)); break;
      case GateType::Mul: map[g] = b.mul(std::move(preds)); break;
      case GateType::Activation: map[g] = b.act(gate.activation, preds[0]); break;
      case GateType::Output: map[g] = preds[0]; break;
    }
  }
  return map;
}

/// Host ids of the fragment's output values after `embed`.
inline std::vector<GateId> embedded_outputs(const ExtendedCircuit& frag, const std::vector<GateId>& map) {
  std::vector<GateId> v;
  for (GateId o : frag.outputs) v.push_back(map[o]);
  return v;
}

/// Builds recurrent circuits: a circuit builder plus aux initial values,
/// recurrent edges and halting gates.
class RecBuilder {
 public:
  CircuitBuilder b;
  std::vector<double> init;
  std::map<GateId, GateId> rec;
  std::vector<GateId> halting;

  GateId input() { return b.input(); }
  GateId aux(double init_value) {
    init.push_back(init_value);
    return b.aux();
  }
  void feed(GateId mem, GateId src) { rec[mem] = src; }

  RecurrentCircuit build(HaltingSpec h) && {
    RecurrentCircuit r;
    r.underlying = std::move(b).build();
    r.initial_aux = std::move(init);
    r.rec_edges = std::move(rec);
    r.halting_gates = std::move(halting);
    r.halting = std::move(h);
    return r;
  }
};

// ---------------------------------------------------------------- equality

/// in1, in2, four constants, then
/// ((sign(x1 + x2*(-1)) + sign(x2 + x1*(-1))) * (-1)) + 1.
inline GadgetHandle build_equality_sign() {
  CircuitBuilder b;
  GateId x1 = b.input(), x2 = b.input();
  GateId c1 = b.constant(-1), c2 = b.constant(-1), c3 = b.constant(-1), c4 = b.constant(1);
  GateId m1 = b.mul({x1, c1});
  GateId m2 = b.mul({x2, c2});
  GateId d1 = b.add({x1, m2});
  GateId d2 = b.add({x2, m1});
  GateId s1 = b.sign(d1), s2 = b.sign(d2);
  GateId sum = b.add({s1, s2});
  GateId neg = b.mul({sum, c3});
  GateId res = b.add({neg, c4});
  b.output(res);
  return {std::move(b).build(), {}, {}, {}};
}

/// Host-side equality test: 1 if values equal, 0 otherwise.
inline GateId eq(CircuitBuilder& b, GateId x1, GateId x2) {
  static const GadgetHandle g = build_equality_sign();
  return embedded_outputs(g.circuit, embed(b, g.circuit, {x1, x2}))[0];
}

inline GateId eq_const(CircuitBuilder& b, GateId x, double v) { return eq(b, x, b.constant(v)); }

/// sign(x - 0.5): exact {0,1} version of the "> 0.5" halting threshold.
inline GateId above_half(CircuitBuilder& b, GateId x) { return b.sign(b.add_const(x, -0.5)); }

// ---------------------------------------------------------------- chi_A

inline void check_distinct(const std::vector<double>& A, const char* what) {
  std::vector<double> s = A;
  std::sort(s.begin(), s.end());
  if (std::adjacent_find(s.begin(), s.end()) != s.end())
    throw ArityError(std::string(what) + ": duplicate values");
}

/// Host-side chi_{A,a}(x) = prod_{a_i != a}(a_i - x) / prod_{a_i != a}(a_i - a).
inline GateId chi(CircuitBuilder& b, GateId x, const std::vector<double>& A, double a) {
  check_distinct(A, "chi_A");
  if (std::find(A.begin(), A.end(), a) == A.end()) throw ArityError("chi_A: selected value not in set");
  if (A.size() == 1) return b.constant(1.0);
  GateId negx = b.mul({x, b.constant(-1.0)});
  std::vector<GateId> factors;
  double denom = 1.0;
  for (double ai : A) {
    if (ai == a) continue;
    factors.push_back(b.add({b.constant(ai), negx}));
    denom *= ai - a;
  }
  factors.push_back(b.constant(1.0 / denom));
  return b.mul(std::move(factors));
}

inline GadgetHandle build_chi_A(const std::vector<double>& A, double a) {
  CircuitBuilder b;
  GateId x = b.input();
  b.output(chi(b, x, A, a));
  return {std::move(b).build(), {}, {}, {}};
}

// ---------------------------------------------------------------- counters and switches

inline std::vector<double> range_1_to(std::size_t d) {
  std::vector<double> v(d);
  for (std::size_t i = 0; i < d; ++i) v[i] = static_cast<double>(i + 1);
  return v;
}

/// Host-side successor of a mod-d counter value in [d].
inline GateId mod_next(CircuitBuilder& b, GateId cur, std::size_t d) {
  if (d < 1) throw ArityError("mod counter needs d >= 1");
  auto set = range_1_to(d);
  std::vector<GateId> terms;
  for (std::size_t l = 1; l <= d; ++l) {
    double next = l == d ? 1.0 : static_cast<double>(l + 1);
    terms.push_back(b.mul({b.constant(next), chi(b, cur, set, static_cast<double>(l))}));
  }
  return b.add(std::move(terms));
}

inline GadgetHandle build_mod_counter(std::size_t d) {
  CircuitBuilder b;
  GateId cur = b.aux();
  GateId next = mod_next(b, cur, d);
  b.output(cur);
  return {std::move(b).build(), {cur}, {next}, {1.0}};
}

/// Host-side switch: sum_l branch_l * chi_{S,l}(selector).
inline GateId switch_select(CircuitBuilder& b, GateId selector, const std::vector<double>& selectors,
                            const std::vector<GateId>& branches) {
  if (selectors.size() != branches.size() || selectors.empty())
    throw ArityError("switch: selector/branch count mismatch");
  check_distinct(selectors, "switch");
  std::vector<GateId> terms;
  for (std::size_t k = 0; k < selectors.size(); ++k)
    terms.push_back(b.mul({branches[k], chi(b, selector, selectors, selectors[k])}));
  return b.add(std::move(terms));
}

/// Fragment inputs: (counter, branch_1, ..., branch_k).
inline GadgetHandle build_switch(const std::vector<double>& selectors) {
  CircuitBuilder b;
  GateId sel = b.input();
  std::vector<GateId> br;
  for (std::size_t k = 0; k < selectors.size(); ++k) br.push_back(b.input());
  b.output(switch_select(b, sel, selectors, br));
  return {std::move(b).build(), {}, {}, {}};
}

// ---------------------------------------------------------------- composition pieces

struct FlagGates {
  GateId latch, t, tinv, latch_next;
};

/// Host-side halted flag over an embedded halting circuit.  `halting_inputs`
/// feed the halting circuit as (i, v1..vp).  The latch is created as a host
/// aux gate; the caller records its initial value 1 and recurrent edge.
inline FlagGates flag(CircuitBuilder& b, const ExtendedCircuit& halting_circuit,
                      const std::vector<GateId>& halting_inputs, GateId latch) {
  auto map = embed(b, halting_circuit, halting_inputs);
  GateId h = map[halting_circuit.outputs.at(0)];
  GateId t = b.mul({above_half(b, h), latch});
  GateId tinv = b.one_minus(t);
  GateId next = b.mul({latch, tinv});
  return {latch, t, tinv, next};
}

/// Fragment inputs (i, v1..vp); outputs (t, t^-1); one latch S starting at 1.
inline GadgetHandle build_flag(const ExtendedCircuit& halting_circuit) {
  require_valid(halting_circuit, "halting circuit");
  if (halting_circuit.m() != 1) throw ArityError("flag: halting circuit must have one output");
  CircuitBuilder b;
  std::vector<GateId> ins;
  for (std::size_t k = 0; k < halting_circuit.n(); ++k) ins.push_back(b.input());
  GateId s = b.aux();
  auto f = flag(b, halting_circuit, ins, s);
  b.output(f.t);
  b.output(f.tinv);
  return {std::move(b).build(), {s}, {f.latch_next}, {1.0}};
}

/// a*t + b*u, the convex mask used by both guards.
inline GateId mask(CircuitBuilder& b, GateId a, GateId t, GateId x, GateId u) {
  return b.add({b.mul({a, t}), b.mul({x, u})});
}

/// Fragment inputs (t, t^-1, y1..ym, p1..pm); outputs y_j*t + p_j*t^-1.
inline GadgetHandle build_input_mux(std::size_t m) {
  CircuitBuilder b;
  GateId t = b.input(), u = b.input();
  std::vector<GateId> y, p;
  for (std::size_t j = 0; j < m; ++j) y.push_back(b.input());
  for (std::size_t j = 0; j < m; ++j) p.push_back(b.input());
  for (std::size_t j = 0; j < m; ++j) b.output(mask(b, y[j], t, p[j], u));
  return {std::move(b).build(), {}, {}, {}};
}

/// Fragment inputs (t, t^-1, aux1..auxk, p1..pk); outputs aux_j*t^-1 + p_j*t.
inline GadgetHandle build_aux_guard(std::size_t k) {
  CircuitBuilder b;
  GateId t = b.input(), u = b.input();
  std::vector<GateId> a, p;
  for (std::size_t j = 0; j < k; ++j) a.push_back(b.input());
  for (std::size_t j = 0; j < k; ++j) p.push_back(b.input());
  for (std::size_t j = 0; j < k; ++j) b.output(mask(b, a[j], u, p[j], t));
  return {std::move(b).build(), {}, {}, {}};
}

/// Splices one of the guard fragments and returns the host output ids.
inline std::vector<GateId> splice_guard(CircuitBuilder& b, const GadgetHandle& g, GateId t, GateId u,
                                        const std::vector<GateId>& first, const std::vector<GateId>& second) {
  std::vector<GateId> bind{t, u};
  bind.insert(bind.end(), first.begin(), first.end());
  bind.insert(bind.end(), second.begin(), second.end());
  return embedded_outputs(g.circuit, embed(b, g.circuit, bind));
}

// ---------------------------------------------------------------- halting lowering

/// Circuit with inputs (i, v1..vp) computing the builtin decision exactly in {0,1}.
inline ExtendedCircuit halting_circuit_for(const HaltingSpec& s, std::size_t p) {
  if (s.is_circuit()) return s.circuit;
  CircuitBuilder b;
  GateId i = b.input();
  std::vector<GateId> v;
  for (std::size_t j = 0; j < p; ++j) v.push_back(b.input());
  GateId out = 0;
  switch (s.kind) {
    case HaltingSpec::Kind::FixedIteration: out = eq_const(b, i, static_cast<double>(s.k)); break;
    case HaltingSpec::Kind::ThresholdCount: {
      std::vector<GateId> hits;
      for (GateId x : v) hits.push_back(eq_const(b, x, s.target));
      GateId count = hits.empty() ? b.constant(0.0) : b.add(hits);
      out = b.sign(b.add_const(count, -s.bound));
      break;
    }
    case HaltingSpec::Kind::AlwaysHalt: out = b.constant(1.0); break;
    case HaltingSpec::Kind::Circuit: break;
  }
  b.output(out);
  return std::move(b).build();
}

inline RecurrentCircuit lower_halting(const RecurrentCircuit& r) {
  if (r.halting.is_circuit()) return r;
  RecurrentCircuit out = r;
  out.halting = HaltingSpec::circuit_backed(halting_circuit_for(r.halting, r.p()));
  return out;
}

// ---------------------------------------------------------------- composition

namespace detail {

struct Copied {
  std::vector<GateId> map;
  std::vector<GateId> outputs;  // host ids of the output values
};

inline Copied copy_block(CircuitBuilder& b, const ExtendedCircuit& c, const std::vector<GateId>& ins,
                         const std::vector<GateId>& auxs) {
  Copied r;
  r.map = embed(b, c, ins, auxs);
  r.outputs = embedded_outputs(c, r.map);
  return r;
}

}  // namespace detail

/// One recurrent circuit computing g(f(x)).  f runs until its halting
/// condition fires (latch S drops to 0 and f's memory freezes), the flag t
/// loads f's outputs into g's input registers, and g then runs with its own
/// iteration counter.  Halting: S == 0 and g's condition.
inline RecurrentCircuit compose_recurrent(const RecurrentCircuit& f_in, const RecurrentCircuit& g_in) {
  require_valid(f_in);
  require_valid(g_in);
  if (f_in.m() != g_in.n())
    throw ArityError("compose: f has " + std::to_string(f_in.m()) + " outputs, g has " +
                     std::to_string(g_in.n()) + " inputs");
  const RecurrentCircuit f = lower_halting(f_in);
  const RecurrentCircuit g = lower_halting(g_in);
  static const GadgetHandle mux1 = build_input_mux(1);
  static const GadgetHandle guard1 = build_aux_guard(1);

  RecBuilder rb;
  CircuitBuilder& b = rb.b;

  // f block
  std::vector<GateId> f_ins, f_auxs;
  for (std::size_t k = 0; k < f.n(); ++k) f_ins.push_back(rb.input());
  for (std::size_t k = 0; k < f.l(); ++k) f_auxs.push_back(rb.aux(f.initial_aux[k]));
  auto F = detail::copy_block(b, f.underlying, f_ins, f_auxs);
  GateId cf = rb.aux(1.0);
  GateId cf_inc = b.add({cf, b.constant(1.0)});

  // flag over f's halting condition
  std::vector<GateId> hin{cf};
  for (GateId h : f.halting_gates) hin.push_back(F.map[h]);
  GateId S = rb.aux(1.0);
  FlagGates fl = flag(b, f.halting.circuit, hin, S);
  rb.feed(S, fl.latch_next);
  GateId active = b.one_minus(S);
  GateId keep = b.one_minus(fl.latch_next);

  // f's memory (and its counter) advance while the latch stays up, then freeze
  auto freeze = [&](GateId mem, GateId pred) {
    rb.feed(mem, splice_guard(b, mux1, fl.latch_next, keep, {pred}, {mem})[0]);
  };
  for (std::size_t k = 0; k < f.n(); ++k) freeze(f_ins[k], F.map[f.rec_edges.at(f.underlying.inputs[k])]);
  for (std::size_t k = 0; k < f.l(); ++k) freeze(f_auxs[k], F.map[f.rec_edges.at(f.underlying.aux_memory[k])]);
  freeze(cf, cf_inc);

  // g block: inputs become registers loaded by the flag
  std::vector<GateId> g_ins, g_auxs;
  for (std::size_t k = 0; k < g.n(); ++k) g_ins.push_back(rb.aux(0.0));
  for (std::size_t k = 0; k < g.l(); ++k) g_auxs.push_back(rb.aux(g.initial_aux[k]));
  auto G = detail::copy_block(b, g.underlying, g_ins, g_auxs);
  for (std::size_t k = 0; k < g.n(); ++k) {
    GateId pred = G.map[g.rec_edges.at(g.underlying.inputs[k])];
    rb.feed(g_ins[k], splice_guard(b, mux1, fl.t, active, {F.outputs[k]}, {pred})[0]);
  }
  for (std::size_t k = 0; k < g.l(); ++k) {
    GateId pred = G.map[g.rec_edges.at(g.underlying.aux_memory[k])];
    rb.feed(g_auxs[k], splice_guard(b, guard1, active, S, {g_auxs[k]}, {pred})[0]);
  }
  GateId cg = rb.aux(1.0);
  GateId cg_inc = b.add({cg, b.constant(1.0)});
  rb.feed(cg, splice_guard(b, guard1, active, S, {cg}, {cg_inc})[0]);

  for (GateId o : G.outputs) b.output(o);

  // halting: eq(S, 0) * [g halts at (c_g, v)]
  rb.halting.push_back(S);
  rb.halting.push_back(cg);
  for (GateId h : g.halting_gates) rb.halting.push_back(G.map[h]);
  CircuitBuilder hb;
  hb.input();  // external iteration number, unused
  GateId hs = hb.input(), hc = hb.input();
  std::vector<GateId> gh_in{hc};
  for (std::size_t k = 0; k < g.p(); ++k) gh_in.push_back(hb.input());
  auto ghmap = embed(hb, g.halting.circuit, gh_in);
  GateId gh = above_half(hb, ghmap[g.halting.circuit.outputs[0]]);
  hb.output(hb.mul({eq_const(hb, hs, 0.0), gh}));

  return std::move(rb).build(HaltingSpec::circuit_backed(std::move(hb).build()));
}

}  // namespace reccirc
