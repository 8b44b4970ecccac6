#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "gadgets.hpp"
#include "recurrent.hpp"

namespace reccirc {

using Edge = std::pair<std::size_t, std::size_t>;

/// Undirected labelled graph with ordered vertices 0..n-1.  Edges are kept
/// normalized (i < j), sorted and unique.
struct LabelledGraph {
  std::size_t n = 0;
  std::vector<Edge> edges;
  std::vector<double> labels;

  LabelledGraph() = default;
  LabelledGraph(std::size_t n_, std::vector<Edge> e, std::vector<double> l)
      : n(n_), edges(std::move(e)), labels(std::move(l)) {
    normalize();
  }

  void normalize() {
    for (auto& [a, b] : edges)
      if (a > b) std::swap(a, b);
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  }

  void validate() const {
    if (labels.size() != n) throw ArityError("graph: label count differs from vertex count");
    for (auto [a, b] : edges) {
      if (a >= n || b >= n) throw ArityError("graph: edge endpoint out of range");
      if (a == b) throw ArityError("graph: self-loop at vertex " + std::to_string(a));
    }
  }

  /// Neighbour lists in ascending vertex order.
  std::vector<std::vector<std::size_t>> adjacency() const {
    std::vector<std::vector<std::size_t>> adj(n);
    for (auto [a, b] : edges) {
      adj[a].push_back(b);
      adj[b].push_back(a);
    }
    for (auto& v : adj) std::sort(v.begin(), v.end());
    return adj;
  }

  std::vector<std::size_t> degrees() const {
    std::vector<std::size_t> d(n, 0);
    for (auto [a, b] : edges) ++d[a], ++d[b];
    return d;
  }

  bool operator==(const LabelledGraph&) const = default;
};

/// Row-major adjacency (n*n entries) followed by the n labels.
using GraphTuple = std::vector<double>;

inline GraphTuple encode_graph(const LabelledGraph& g) {
  g.validate();
  GraphTuple t(g.n * g.n + g.n, 0.0);
  for (auto [a, b] : g.edges) t[a * g.n + b] = t[b * g.n + a] = 1.0;
  std::copy(g.labels.begin(), g.labels.end(), t.begin() + static_cast<std::ptrdiff_t>(g.n * g.n));
  return t;
}

/// Vertex count n with n*n + n == len, if any.
inline std::optional<std::size_t> tuple_vertex_count(std::size_t len) {
  auto n = static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(len))));
  for (std::size_t k = n > 0 ? n - 1 : 0; k <= n + 1; ++k)
    if (k * k + k == len) return k;
  return std::nullopt;
}

inline LabelledGraph decode_graph(const GraphTuple& t) {
  auto nn = tuple_vertex_count(t.size());
  if (!nn) throw ArityError("decode_graph: length " + std::to_string(t.size()) + " is not n^2+n");
  std::size_t n = *nn;
  LabelledGraph g;
  g.n = n;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double v = t[i * n + j];
      if (v != 0.0 && v != 1.0) throw ArityError("decode_graph: adjacency entry not 0/1");
      if (v != t[j * n + i]) throw ArityError("decode_graph: adjacency not symmetric");
      if (i == j && v != 0.0) throw ArityError("decode_graph: nonzero diagonal");
      if (i < j && v == 1.0) g.edges.emplace_back(i, j);
    }
  g.labels.assign(t.begin() + static_cast<std::ptrdiff_t>(n * n), t.end());
  return g;
}

/// Complete bipartite graph: vertices 0..n-1 carry x, n..n+m-1 carry 1..m.
inline LabelledGraph bipartite_encode(std::size_t n, std::size_t m, const std::vector<double>& x) {
  if (n < 1 || m < 1) throw ArityError("bipartite_encode: n and m must be positive");
  if (x.size() != n) throw ArityError("bipartite_encode: expected " + std::to_string(n) + " values");
  LabelledGraph g;
  g.n = n + m;
  g.labels = x;
  for (std::size_t j = 1; j <= m; ++j) g.labels.push_back(static_cast<double>(j));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) g.edges.emplace_back(i, n + j);
  return g;
}

// ---------------------------------------------------------------- symbolic encoding

struct SymLabel {
  enum class Kind { In, Aux, Const, Literal };
  Kind kind = Kind::Literal;
  std::size_t index = 0;
  double literal = 1.0;

  static SymLabel in(std::size_t i) { return {Kind::In, i, 0.0}; }
  static SymLabel aux(std::size_t i) { return {Kind::Aux, i, 0.0}; }
  static SymLabel constant(std::size_t i) { return {Kind::Const, i, 0.0}; }
  static SymLabel lit(double v) { return {Kind::Literal, 0, v}; }

  std::string str() const {
    switch (kind) {
      case Kind::In: return "in_" + std::to_string(index + 1);
      case Kind::Aux: return "aux_" + std::to_string(index + 1);
      case Kind::Const: return "const_" + std::to_string(index + 1);
      case Kind::Literal: break;
    }
    std::ostringstream os;
    os << literal;
    return os.str();
  }
  bool operator==(const SymLabel&) const = default;
};

enum class Part { Underlying, Halting, Dummy };

struct VertexRole {
  Part part = Part::Dummy;
  GateId gate = 0;               // gate id within its circuit (not for dummies)
  std::size_t global_index = 0;  // 1-based over both circuits; owner's index for dummies
  std::size_t q = 0;             // neighbours that are dummies or non-predecessors
  bool halting_node = false;     // underlying gate listed among the halting gates
  bool halting_output = false;   // output copy of the modified halting circuit
  bool operator==(const VertexRole&) const = default;
};

struct SymbolicLabelledGraph {
  std::size_t n = 0;
  std::vector<Edge> edges;
  std::vector<SymLabel> labels;
  std::vector<VertexRole> roles;
  std::vector<double> constants;  // value of const_i
  std::size_t r_prime = 2;
  std::size_t gate_vertices = 0;  // vertices 0..gate_vertices-1 are circuit gates
  std::size_t halt_copies = 0;
  ExtendedCircuit halting_prime;  // C'_halt with its duplicated x2 outputs
  std::size_t inputs = 0, aux = 0;

  /// Vertex of a gate, by circuit part.
  std::size_t vertex_of(Part part, GateId g) const {
    return part == Part::Underlying ? g : underlying_size + g;
  }
  std::size_t underlying_size = 0;

  LabelledGraph structure() const {
    LabelledGraph g;
    g.n = n;
    g.edges = edges;
    g.labels.assign(n, 1.0);
    return g;
  }
  bool operator==(const SymbolicLabelledGraph&) const = default;
};

/// C'_halt: the halting circuit with its output replaced by `copies` outputs
/// of (sign(value - 0.5) * 2), so a firing condition shows up as `copies`
/// vertices at 2 and a non-firing one as 0.
inline ExtendedCircuit modified_halting_circuit(const ExtendedCircuit& hc, std::size_t copies) {
  CircuitBuilder b;
  std::vector<GateId> ins;
  for (std::size_t k = 0; k < hc.n(); ++k) ins.push_back(b.input());
  auto map = embed(b, hc, ins);
  GateId dbl = b.mul({above_half(b, map[hc.outputs.at(0)]), b.constant(2.0)});
  for (std::size_t k = 0; k < copies; ++k) b.output(dbl);
  return std::move(b).build();
}

/// Copy count used by default: n + m + l + 1, with l excluding a folded
/// iteration counter.
inline std::size_t default_halt_copies(const RecurrentCircuit& r) {
  std::size_t l = r.l() - (r.counter_gate ? 1 : 0);
  return r.n() + r.m() + l + 1;
}

/// Graph view of a folded recurrent circuit: undirected union of the
/// underlying circuit (recurrent edges included) and C'_halt, halting nodes
/// linked to the data inputs of C'_halt, and degree-1 dummies so the vertex
/// of the gate with global index i has degree i * r'.
inline SymbolicLabelledGraph symbolic_encode_circuit(const RecurrentCircuit& r,
                                                     std::optional<std::size_t> halt_copies = {}) {
  require_valid(r);
  if (!r.halting.is_circuit() || !is_folded(r))
    throw CompileError("symbolic_encode_circuit needs a folded circuit-backed halting function");
  SymbolicLabelledGraph s;
  const auto& c = r.underlying;
  s.halt_copies = halt_copies.value_or(default_halt_copies(r));
  s.halting_prime = modified_halting_circuit(r.halting.circuit, s.halt_copies);
  const auto& h = s.halting_prime;
  s.underlying_size = c.size();
  s.gate_vertices = c.size() + h.size();
  s.inputs = r.n();
  s.aux = r.l();

  std::set<Edge> es;
  std::vector<std::set<std::size_t>> pred_nbrs(s.gate_vertices);
  auto link = [&](std::size_t a, std::size_t b) {
    if (a == b) return;
    es.insert({std::min(a, b), std::max(a, b)});
  };
  for (GateId g = 0; g < c.size(); ++g)
    for (GateId p : c.gates[g].preds) {
      link(p, g);
      pred_nbrs[g].insert(p);
    }
  for (const auto& [mem, src] : r.rec_edges) {
    link(mem, src);
    if (mem != src) pred_nbrs[mem].insert(src);
  }
  const std::size_t off = c.size();
  for (GateId g = 0; g < h.size(); ++g)
    for (GateId p : h.gates[g].preds) {
      link(off + p, off + g);
      pred_nbrs[off + g].insert(off + p);
    }
  for (std::size_t j = 0; j < r.p(); ++j) {
    std::size_t hv = r.halting_gates[j], iv = off + h.inputs[j + 1];
    link(hv, iv);
    pred_nbrs[iv].insert(hv);
  }

  std::vector<std::size_t> deg(s.gate_vertices, 0);
  for (auto [a, b] : es) ++deg[a], ++deg[b];
  std::size_t maxdeg = deg.empty() ? 0 : *std::max_element(deg.begin(), deg.end());
  s.r_prime = std::max<std::size_t>(maxdeg, 2);

  s.roles.resize(s.gate_vertices);
  s.labels.resize(s.gate_vertices);
  std::set<GateId> halting_set(r.halting_gates.begin(), r.halting_gates.end());
  for (std::size_t v = 0; v < s.gate_vertices; ++v) {
    bool under = v < off;
    const Gate& gate = under ? c.gates[v] : h.gates[v - off];
    VertexRole& role = s.roles[v];
    role.part = under ? Part::Underlying : Part::Halting;
    role.gate = under ? v : v - off;
    role.global_index = v + 1;
    role.halting_node = under && halting_set.count(v);
    role.halting_output = !under && gate.type == GateType::Output;
    if (gate.type == GateType::Constant) {
      s.labels[v] = SymLabel::constant(s.constants.size());
      s.constants.push_back(gate.value);
    } else if (under && gate.type == GateType::Input) {
      s.labels[v] = SymLabel::in(gate.index);
    } else if (under && gate.type == GateType::Aux) {
      s.labels[v] = SymLabel::aux(gate.index);
    } else {
      s.labels[v] = SymLabel::lit(1.0);
    }
  }

  s.edges.assign(es.begin(), es.end());
  std::size_t next = s.gate_vertices;
  for (std::size_t v = 0; v < s.gate_vertices; ++v) {
    std::size_t target = (v + 1) * s.r_prime;
    std::size_t dummies = target - deg[v];
    s.roles[v].q = target - pred_nbrs[v].size();
    for (std::size_t k = 0; k < dummies; ++k) {
      s.edges.emplace_back(v, next++);
      VertexRole d;
      d.part = Part::Dummy;
      d.gate = v;
      d.global_index = v + 1;
      s.roles.push_back(d);
      s.labels.push_back(SymLabel::lit(1.0));
    }
  }
  s.n = next;
  std::sort(s.edges.begin(), s.edges.end());
  return s;
}

/// Same, from the encoding alone plus the initial aux values.
inline LabelledGraph instantiate_encoding(const SymbolicLabelledGraph& s, const std::vector<double>& initial_aux,
                                          const std::vector<double>& x) {
  if (x.size() != s.inputs) throw ArityError("instantiate_encoding: expected " + std::to_string(s.inputs) + " inputs");
  if (initial_aux.size() != s.aux) throw ArityError("instantiate_encoding: expected " + std::to_string(s.aux) + " aux values");
  LabelledGraph g;
  g.n = s.n;
  g.edges = s.edges;
  g.labels.reserve(s.n);
  for (const auto& l : s.labels) {
    switch (l.kind) {
      case SymLabel::Kind::In: g.labels.push_back(x.at(l.index)); break;
      case SymLabel::Kind::Aux: g.labels.push_back(initial_aux.at(l.index)); break;
      case SymLabel::Kind::Const: g.labels.push_back(s.constants.at(l.index)); break;
      case SymLabel::Kind::Literal: g.labels.push_back(l.literal); break;
    }
  }
  return g;
}

inline LabelledGraph instantiate_encoding(const SymbolicLabelledGraph& s, const RecurrentCircuit& r,
                                          const std::vector<double>& x) {
  if (r.n() != s.inputs || r.l() != s.aux) throw ArityError("instantiate_encoding: circuit does not match encoding");
  return instantiate_encoding(s, r.initial_aux, x);
}

}  // namespace reccirc
