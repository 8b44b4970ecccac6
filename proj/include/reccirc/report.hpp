#pragma once

#include <map>
#include <string>

#include "gnn.hpp"
#include "recurrent.hpp"

namespace reccirc {

struct CircuitMetrics {
  std::size_t size = 0, depth = 0, n = 0, m = 0, l = 0, p = 0;
  std::size_t sign_underlying = 0, sign_halting = 0;
  std::size_t activations_underlying = 0;
};

inline CircuitMetrics metrics(const RecurrentCircuit& r) {
  CircuitMetrics c;
  c.size = size(r.underlying);
  c.depth = depth(r.underlying);
  c.n = r.n();
  c.m = r.m();
  c.l = r.l();
  c.p = r.p();
  c.sign_underlying = r.underlying.count_activation("sign");
  c.activations_underlying = r.underlying.count(GateType::Activation);
  if (r.halting.is_circuit()) c.sign_halting = r.halting.circuit.count_activation("sign");
  return c;
}

struct GnnMetrics {
  std::size_t period = 0;
  std::size_t members = 0;       // explicit members across layers
  std::size_t member_gates = 0;  // total gates over explicit members
  std::size_t sign_gates = 0;    // sign gates over explicit members
  std::size_t vertices = 0, edges = 0;
};

inline GnnMetrics metrics(const RecCGnn& g, const LabelledGraph* graph = nullptr) {
  GnnMetrics m;
  m.period = g.period();
  for (const auto& L : g.layers)
    if (auto* tbl = L.family->explicit_members())
      for (const auto& [k, mem] : *tbl) {
        ++m.members;
        m.member_gates += mem.circuit().size();
        m.sign_gates += mem.circuit().count_activation("sign");
        if (mem.rec && mem.rec->halting.is_circuit())
          m.sign_gates += mem.rec->halting.circuit.count_activation("sign");
      }
  if (graph) {
    m.vertices = graph->n;
    m.edges = graph->edges.size();
  }
  return m;
}

struct CompileReport {
  std::string construction;
  std::map<std::string, double> source;
  std::map<std::string, double> target;
  std::map<std::string, std::size_t> gadgets;
  std::map<std::string, std::string> notes;

  static std::map<std::string, double> of(const CircuitMetrics& c) {
    return {{"size", double(c.size)},
            {"depth", double(c.depth)},
            {"n", double(c.n)},
            {"m", double(c.m)},
            {"l", double(c.l)},
            {"p", double(c.p)},
            {"sign_underlying", double(c.sign_underlying)},
            {"sign_halting", double(c.sign_halting)}};
  }
  static std::map<std::string, double> of(const GnnMetrics& g) {
    return {{"period", double(g.period)},
            {"members", double(g.members)},
            {"member_gates", double(g.member_gates)},
            {"sign_gates", double(g.sign_gates)},
            {"vertices", double(g.vertices)},
            {"edges", double(g.edges)}};
  }
};

}  // namespace reccirc
