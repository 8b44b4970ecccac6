#pragma once

// Graphviz export.  Circuit wires are solid, recurrent edges dashed and
// halting gates drawn with a doubled outline.

#include <set>
#include <sstream>
#include <string>

#include "graph.hpp"
#include "recurrent.hpp"

namespace reccirc {

namespace detail {

inline std::string gate_caption(const Gate& g, GateId id) {
  std::ostringstream os;
  switch (g.type) {
    case GateType::Input: os << "in" << g.index + 1; break;
    case GateType::Aux: os << "aux" << g.index + 1; break;
    case GateType::Output: os << "out" << g.index + 1; break;
    case GateType::Constant: os << g.value; break;
    case GateType::Add: os << "+"; break;
    case GateType::Mul: os << "×"; break;
    case GateType::Activation: os << g.activation; break;
  }
  os << "\\n#" << id;
  return os.str();
}

inline void write_gates(std::ostringstream& os, const ExtendedCircuit& c, const std::set<GateId>& halting) {
  for (GateId g = 0; g < c.size(); ++g) {
    os << "  g" << g << " [label=\"" << gate_caption(c.gates[g], g) << "\"";
    if (is_source(c.gates[g].type)) os << ", shape=box";
    if (halting.count(g)) os << ", peripheries=2";
    os << "];\n";
  }
  for (GateId g = 0; g < c.size(); ++g)
    for (GateId p : c.gates[g].preds) os << "  g" << p << " -> g" << g << ";\n";
}

}  // namespace detail

inline std::string to_dot(const ExtendedCircuit& c) {
  std::ostringstream os;
  os << "digraph circuit {\n  rankdir=BT;\n";
  detail::write_gates(os, c, {});
  os << "}\n";
  return os.str();
}

inline std::string to_dot(const RecurrentCircuit& r) {
  std::ostringstream os;
  os << "digraph recurrent {\n  rankdir=BT;\n";
  detail::write_gates(os, r.underlying, {r.halting_gates.begin(), r.halting_gates.end()});
  for (const auto& [m, s] : r.rec_edges) os << "  g" << s << " -> g" << m << " [style=dashed, constraint=false];\n";
  os << "}\n";
  return os.str();
}

inline std::string to_dot(const LabelledGraph& g) {
  std::ostringstream os;
  os << "graph labelled {\n";
  for (std::size_t v = 0; v < g.n; ++v) os << "  v" << v << " [label=\"" << v << ": " << g.labels[v] << "\"];\n";
  for (auto [a, b] : g.edges) os << "  v" << a << " -- v" << b << ";\n";
  os << "}\n";
  return os.str();
}

inline std::string to_dot(const SymbolicLabelledGraph& s) {
  std::ostringstream os;
  os << "graph symbolic {\n";
  for (std::size_t v = 0; v < s.n; ++v) {
    const auto& r = s.roles[v];
    os << "  v" << v << " [label=\"" << s.labels[v].str() << "\"";
    if (r.part == Part::Dummy) os << ", shape=point";
    if (r.part == Part::Halting) os << ", style=filled, fillcolor=lightgrey";
    if (r.halting_node || r.halting_output) os << ", peripheries=2";
    os << "];\n";
  }
  for (auto [a, b] : s.edges) os << "  v" << a << " -- v" << b << ";\n";
  os << "}\n";
  return os.str();
}

}  // namespace reccirc
