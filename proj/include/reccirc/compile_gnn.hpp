#pragma once

// GNN -> recurrent circuit compilers.  All three specialize the emitted
// circuit to one graph structure: the circuit reads a full GraphTuple and
// echoes its adjacency block, but the wiring follows the compile-time shape.

#include <string>
#include <vector>

#include "gadgets.hpp"
#include "gnn.hpp"
#include "graph.hpp"
#include "report.hpp"

namespace reccirc {

namespace detail {

/// A family member as a recurrent circuit with circuit-backed halting.  Plain
/// members hold their inputs and halt at the first iteration.
inline RecurrentCircuit member_as_recurrent(const FamilyMember& m) {
  if (m.rec) return lower_halting(*m.rec);
  RecurrentCircuit r;
  r.underlying = *m.plain;
  for (GateId in : r.underlying.inputs) r.rec_edges[in] = in;
  r.halting = HaltingSpec::circuit_backed(halting_circuit_for(HaltingSpec::always_halt(), 0));
  return r;
}

inline const ExtendedCircuit& plain_member(const FamilyPtr& fam, std::size_t arity, const char* what) {
  const auto& m = fam->member(arity);
  if (m.recurrent())
    throw CompileError(std::string(what) + ": member of arity " + std::to_string(arity) +
                       " is recurrent; use the inner or full compiler");
  return *m.plain;
}

struct TupleInputs {
  std::size_t n = 0;
  std::vector<GateId> gates;
  GateId adj(std::size_t i, std::size_t j) const { return gates[i * n + j]; }
  GateId label(std::size_t v) const { return gates[n * n + v]; }
};

/// Declares the n^2 + n tuple inputs; adjacency inputs hold their value.
inline TupleInputs tuple_inputs(RecBuilder& rb, std::size_t n) {
  TupleInputs t;
  t.n = n;
  for (std::size_t k = 0; k < n * n + n; ++k) t.gates.push_back(rb.input());
  for (std::size_t k = 0; k < n * n; ++k) rb.feed(t.gates[k], t.gates[k]);
  return t;
}

inline void echo_adjacency(CircuitBuilder& b, const TupleInputs& t) {
  for (std::size_t k = 0; k < t.n * t.n; ++k) b.output(t.gates[k]);
}

inline std::vector<GateId> member_inputs(const TupleInputs& t, std::size_t v,
                                         const std::vector<std::size_t>& nbrs) {
  std::vector<GateId> in{t.label(v)};
  for (std::size_t u : nbrs) in.push_back(t.label(u));
  return in;
}

inline GateId apply_activation(CircuitBuilder& b, const std::string& act, GateId x) {
  return act == "id" ? x : b.act(act, x);
}

}  // namespace detail

/// Circuit with inputs (layer, v1..vn) deciding the GNN halting condition in {0,1}.
/// Family-backed halting embeds the arity-(n+1) member directly, so the member
/// must be tail-symmetric (it sees the values in vertex order, not sorted).
inline ExtendedCircuit gnn_halting_circuit(const GnnHaltingSpec& s, std::size_t n) {
  CircuitBuilder b;
  GateId layer = b.input();
  std::vector<GateId> v;
  for (std::size_t k = 0; k < n; ++k) v.push_back(b.input());
  GateId out = 0;
  switch (s.kind) {
    case GnnHaltingSpec::Kind::FixedLayer: out = eq_const(b, layer, static_cast<double>(s.k)); break;
    case GnnHaltingSpec::Kind::ThresholdCount: {
      std::vector<GateId> hits;
      for (GateId x : v) hits.push_back(eq_const(b, x, s.target));
      GateId count = hits.empty() ? b.constant(0.0) : b.add(hits);
      out = b.sign(b.add_const(count, -s.bound));
      break;
    }
    case GnnHaltingSpec::Kind::Family: {
      const auto& m = s.family->member(n + 1);
      if (m.recurrent()) throw CompileError("GNN halting family member must not be recurrent");
      std::vector<GateId> in{layer};
      in.insert(in.end(), v.begin(), v.end());
      out = above_half(b, embedded_outputs(*m.plain, embed(b, *m.plain, in))[0]);
      break;
    }
  }
  b.output(out);
  return std::move(b).build();
}

// ---------------------------------------------------------------- outer recurrence

/// One circuit iteration per GNN layer.  A mod-d counter picks, through a
/// switch, which of the d parallel layer copies feeds the label registers.
inline RecurrentCircuit compile_gnn_outer_to_circuit(const RecCGnn& gnn, const LabelledGraph& shape,
                                                     CompileReport* report = nullptr) {
  shape.validate();
  const std::size_t d = gnn.period(), n = shape.n;
  if (d == 0) throw CompileError("GNN has no layers");
  auto adj = shape.adjacency();
  RecBuilder rb;
  CircuitBuilder& b = rb.b;
  auto t = detail::tuple_inputs(rb, n);
  GateId cnt = rb.aux(1.0);
  rb.feed(cnt, mod_next(b, cnt, d));
  const auto sel = range_1_to(d);

  std::vector<GateId> next(n);
  for (std::size_t v = 0; v < n; ++v) {
    auto in = detail::member_inputs(t, v, adj[v]);
    std::vector<GateId> branches;
    for (std::size_t l = 0; l < d; ++l) {
      const auto& mem = detail::plain_member(gnn.layers[l].family, in.size(), "outer compiler");
      GateId o = embedded_outputs(mem, embed(b, mem, in))[0];
      branches.push_back(detail::apply_activation(b, gnn.layers[l].activation, o));
    }
    next[v] = d == 1 ? branches[0] : switch_select(b, cnt, sel, branches);
    rb.feed(t.label(v), next[v]);
  }
  detail::echo_adjacency(b, t);
  for (GateId g : next) b.output(g);
  rb.halting = next;
  auto rec = std::move(rb).build(HaltingSpec::circuit_backed(gnn_halting_circuit(gnn.halting, n)));
  if (report) {
    report->construction = "gnn2circ";
    report->source = CompileReport::of(metrics(gnn, &shape));
    report->target = CompileReport::of(metrics(rec));
    report->gadgets = {{"mod_counter", 1}, {"switch", d == 1 ? 0 : n}, {"member_copies", n * d}};
  }
  return rec;
}

// ---------------------------------------------------------------- inner recurrence

/// One GNN layer with recurrent members as a recurrent circuit over tuples.
/// Every vertex runs its member with its own iteration counter; when the
/// member's halting condition first fires, the output is latched and the
/// member's memory freezes.  Halts once the product of all latches is 1.
inline RecurrentCircuit compile_inner_layer(const LayerSpec& layer, const LabelledGraph& shape) {
  const std::size_t n = shape.n;
  auto adj = shape.adjacency();
  RecBuilder rb;
  CircuitBuilder& b = rb.b;
  auto t = detail::tuple_inputs(rb, n);
  for (std::size_t v = 0; v < n; ++v) rb.feed(t.label(v), t.label(v));
  GateId first = rb.aux(1.0);
  rb.feed(first, b.constant(0.0));
  GateId later = b.one_minus(first);
  GateId c = rb.aux(1.0);
  rb.feed(c, b.add({c, b.constant(1.0)}));

  std::vector<GateId> labels_out, flags;
  for (std::size_t v = 0; v < n; ++v) {
    auto M = detail::member_as_recurrent(layer.family->member(adj[v].size() + 1));
    auto in = detail::member_inputs(t, v, adj[v]);
    std::vector<GateId> regs, eff, auxs;
    for (GateId lab : in) {
      GateId r = rb.aux(0.0);
      regs.push_back(r);
      eff.push_back(mask(b, lab, first, r, later));
    }
    for (double a0 : M.initial_aux) auxs.push_back(rb.aux(a0));
    auto map = embed(b, M.underlying, eff, auxs);
    GateId out = map[M.underlying.outputs[0]];
    std::vector<GateId> hin{c};
    for (GateId h : M.halting_gates) hin.push_back(map[h]);
    GateId f = above_half(b, embedded_outputs(M.halting.circuit, embed(b, M.halting.circuit, hin))[0]);

    GateId H = rb.aux(0.0), O = rb.aux(0.0);
    GateId fired = b.mul({f, b.one_minus(H)});
    GateId Hn = b.add({H, fired});
    GateId On = b.add({O, b.mul({fired, out})});
    rb.feed(H, Hn);
    rb.feed(O, On);
    GateId run = b.one_minus(Hn);
    for (std::size_t j = 0; j < regs.size(); ++j)
      rb.feed(regs[j], mask(b, map[M.rec_edges.at(M.underlying.inputs[j])], run, eff[j], Hn));
    for (std::size_t k = 0; k < auxs.size(); ++k)
      rb.feed(auxs[k], mask(b, map[M.rec_edges.at(M.underlying.aux_memory[k])], run, auxs[k], Hn));
    labels_out.push_back(detail::apply_activation(b, layer.activation, On));
    flags.push_back(Hn);
  }
  detail::echo_adjacency(b, t);
  for (GateId g : labels_out) b.output(g);
  rb.halting = {flags.size() == 1 ? flags[0] : b.mul(flags)};

  CircuitBuilder hb;
  hb.input();
  hb.output(hb.sign(hb.input()));
  return std::move(rb).build(HaltingSpec::circuit_backed(std::move(hb).build()));
}

/// Fixed-depth GNN with recurrent members: one layer circuit per GNN layer,
/// chained with compose_recurrent.
inline RecurrentCircuit compile_gnn_inner_to_circuit(const RecCGnn& gnn, const LabelledGraph& shape,
                                                     CompileReport* report = nullptr) {
  shape.validate();
  if (gnn.period() == 0) throw CompileError("GNN has no layers");
  if (gnn.halting.kind != GnnHaltingSpec::Kind::FixedLayer)
    throw CompileError("inner compiler needs fixed-layer halting");
  const std::size_t D = gnn.halting.k;
  if (D < 1) throw CompileError("fixed-layer halting needs k >= 1");
  RecurrentCircuit acc = compile_inner_layer(gnn.layer(1), shape);
  for (std::size_t i = 2; i <= D; ++i) acc = compose_recurrent(acc, compile_inner_layer(gnn.layer(i), shape));
  if (report) {
    report->construction = "gnn2circ-inner";
    report->source = CompileReport::of(metrics(gnn, &shape));
    report->target = CompileReport::of(metrics(acc));
    report->gadgets = {{"layer_circuits", D}, {"compositions", D - 1}, {"freeze_latches", D * shape.n}};
  }
  return acc;
}

// ---------------------------------------------------------------- combined recurrence

/// Outer and inner recurrence at once.  All d layer blocks run in parallel;
/// the block selected by the layer counter drives the labels.  A layer ends
/// when every vertex of the active block has latched its output; only then
/// do the labels update, the counter advance and the blocks restart.
inline RecurrentCircuit compile_gnn_full_to_circuit(const RecCGnn& gnn, const LabelledGraph& shape,
                                                    CompileReport* report = nullptr) {
  shape.validate();
  const std::size_t d = gnn.period(), n = shape.n;
  if (d == 0) throw CompileError("GNN has no layers");
  auto adj = shape.adjacency();
  RecBuilder rb;
  CircuitBuilder& b = rb.b;
  auto t = detail::tuple_inputs(rb, n);
  GateId cnt = rb.aux(1.0), L = rb.aux(1.0), F = rb.aux(1.0), c = rb.aux(1.0);
  GateId notF = b.one_minus(F);
  GateId ceff = b.add({F, b.mul({c, notF})});
  const auto sel = range_1_to(d);

  std::vector<std::vector<GateId>> newlab(n);  // per vertex, per layer
  std::vector<GateId> done_l;
  for (std::size_t l = 0; l < d; ++l) {
    GateId active = chi(b, cnt, sel, static_cast<double>(l + 1));
    std::vector<GateId> flags;
    for (std::size_t v = 0; v < n; ++v) {
      auto M = detail::member_as_recurrent(gnn.layers[l].family->member(adj[v].size() + 1));
      auto in = detail::member_inputs(t, v, adj[v]);
      std::vector<GateId> regs, eff, auxs, aeff;
      for (GateId lab : in) {
        GateId r = rb.aux(0.0);
        regs.push_back(r);
        eff.push_back(mask(b, lab, F, r, notF));
      }
      for (double a0 : M.initial_aux) {
        GateId r = rb.aux(a0);
        auxs.push_back(r);
        aeff.push_back(mask(b, b.constant(a0), F, r, notF));
      }
      auto map = embed(b, M.underlying, eff, aeff);
      GateId out = map[M.underlying.outputs[0]];
      std::vector<GateId> hin{ceff};
      for (GateId h : M.halting_gates) hin.push_back(map[h]);
      GateId f = above_half(b, embedded_outputs(M.halting.circuit, embed(b, M.halting.circuit, hin))[0]);

      GateId H = rb.aux(0.0), O = rb.aux(0.0);
      GateId Heff = b.mul({H, notF}), Oeff = b.mul({O, notF});
      GateId fired = b.mul({f, b.one_minus(Heff)});
      GateId Hn = b.add({Heff, fired});
      GateId On = b.add({Oeff, b.mul({fired, out})});
      rb.feed(H, Hn);
      rb.feed(O, On);
      GateId run = b.mul({active, b.one_minus(Hn)});
      GateId stop = b.one_minus(run);
      for (std::size_t j = 0; j < regs.size(); ++j)
        rb.feed(regs[j], mask(b, map[M.rec_edges.at(M.underlying.inputs[j])], run, eff[j], stop));
      for (std::size_t k = 0; k < auxs.size(); ++k)
        rb.feed(auxs[k], mask(b, map[M.rec_edges.at(M.underlying.aux_memory[k])], run, aeff[k], stop));
      newlab[v].push_back(detail::apply_activation(b, gnn.layers[l].activation, On));
      flags.push_back(Hn);
    }
    done_l.push_back(flags.size() == 1 ? flags[0] : b.mul(flags));
  }
  GateId done = d == 1 ? done_l[0] : switch_select(b, cnt, sel, done_l);
  GateId notdone = b.one_minus(done);
  std::vector<GateId> labs;
  for (std::size_t v = 0; v < n; ++v) {
    GateId nl = d == 1 ? newlab[v][0] : switch_select(b, cnt, sel, newlab[v]);
    labs.push_back(nl);
    rb.feed(t.label(v), mask(b, nl, done, t.label(v), notdone));
  }
  rb.feed(cnt, mask(b, mod_next(b, cnt, d), done, cnt, notdone));
  rb.feed(L, b.add({L, done}));
  rb.feed(F, b.identity(done));
  rb.feed(c, b.add({ceff, b.constant(1.0)}));
  detail::echo_adjacency(b, t);
  for (GateId g : labs) b.output(g);

  rb.halting = {done, L};
  rb.halting.insert(rb.halting.end(), labs.begin(), labs.end());
  CircuitBuilder hb;
  hb.input();
  GateId hd = hb.input(), hl = hb.input();
  std::vector<GateId> hin{hl};
  for (std::size_t v = 0; v < n; ++v) hin.push_back(hb.input());
  auto gh = gnn_halting_circuit(gnn.halting, n);
  hb.output(hb.mul({hd, embedded_outputs(gh, embed(hb, gh, hin))[0]}));
  auto rec = std::move(rb).build(HaltingSpec::circuit_backed(std::move(hb).build()));
  if (report) {
    report->construction = "gnn2circ-full";
    report->source = CompileReport::of(metrics(gnn, &shape));
    report->target = CompileReport::of(metrics(rec));
    report->gadgets = {{"mod_counter", 1}, {"switch", d == 1 ? 0 : n + 1}, {"freeze_latches", n * d}};
  }
  return rec;
}

}  // namespace reccirc
