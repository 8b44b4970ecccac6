#pragma once

// JSON formats for circuits, recurrent circuits, graphs, GNNs and compile
// reports.  Numbers are written as JSON numbers; the serializer emits the
// shortest representation that parses back to the same double.

#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "compile_circuit.hpp"
#include "gnn.hpp"
#include "graph.hpp"
#include "recurrent.hpp"
#include "report.hpp"

namespace reccirc {

using json = nlohmann::json;

struct FormatError : Error {
  using Error::Error;
};

namespace detail {

inline GateType gate_type_of(const std::string& s) {
  static const std::map<std::string, GateType> m{
      {"input", GateType::Input},   {"aux", GateType::Aux}, {"constant", GateType::Constant}, {"const", GateType::Constant},
      {"add", GateType::Add},       {"mul", GateType::Mul}, {"activation", GateType::Activation},
      {"output", GateType::Output}};
  auto it = m.find(s);
  if (it == m.end()) throw FormatError("unknown gate type '" + s + "'");
  return it->second;
}

inline std::string lower_type(GateType t) { return t == GateType::Constant ? "constant" : type_name(t); }

template <class T>
T field(const json& j, const char* key) {
  if (!j.contains(key)) throw FormatError(std::string("missing field '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw FormatError(std::string("field '") + key + "': " + e.what());
  }
}

inline double finite(double v, const char* what) {
  if (!std::isfinite(v)) throw FormatError(std::string(what) + " is not finite");
  return v;
}

}  // namespace detail

// ---------------------------------------------------------------- circuits

inline json to_json(const ExtendedCircuit& c) {
  json gates = json::array();
  for (GateId g = 0; g < c.size(); ++g) {
    const Gate& gate = c.gates[g];
    json jg{{"id", g}, {"type", detail::lower_type(gate.type)}};
    switch (gate.type) {
      case GateType::Input:
      case GateType::Aux:
      case GateType::Output: jg["index"] = gate.index; break;
      case GateType::Constant: jg["value"] = gate.value; break;
      case GateType::Activation: jg["activation"] = gate.activation; break;
      default: break;
    }
    if (!gate.preds.empty()) jg["preds"] = gate.preds;
    gates.push_back(std::move(jg));
  }
  return {{"format", "circuit"}, {"gates", gates}, {"inputs", c.inputs}, {"aux", c.aux_memory}, {"outputs", c.outputs}};
}

inline ExtendedCircuit circuit_from_json(const json& j) {
  ExtendedCircuit c;
  for (const auto& jg : detail::field<json>(j, "gates")) {
    Gate g;
    g.type = detail::gate_type_of(detail::field<std::string>(jg, "type"));
    if (jg.contains("id") && jg["id"].get<std::size_t>() != c.gates.size())
      throw FormatError("gate ids must be dense and in order");
    g.index = jg.value("index", std::size_t{0});
    if (g.type == GateType::Constant) g.value = detail::finite(detail::field<double>(jg, "value"), "constant");
    if (g.type == GateType::Activation) g.activation = detail::field<std::string>(jg, "activation");
    g.preds = jg.value("preds", std::vector<GateId>{});
    c.gates.push_back(std::move(g));
  }
  c.inputs = detail::field<std::vector<GateId>>(j, "inputs");
  c.aux_memory = j.value("aux", std::vector<GateId>{});
  c.outputs = detail::field<std::vector<GateId>>(j, "outputs");
  return c;
}

inline json to_json(const HaltingSpec& h) {
  switch (h.kind) {
    case HaltingSpec::Kind::Circuit: return {{"kind", "circuit"}, {"circuit", to_json(h.circuit)}};
    case HaltingSpec::Kind::FixedIteration: return {{"kind", "fixed-iteration"}, {"k", h.k}};
    case HaltingSpec::Kind::ThresholdCount:
      return {{"kind", "threshold-count"}, {"target", h.target}, {"bound", h.bound}};
    case HaltingSpec::Kind::AlwaysHalt: return {{"kind", "always-halt"}};
  }
  return {};
}

inline HaltingSpec halting_from_json(const json& j) {
  auto kind = detail::field<std::string>(j, "kind");
  if (kind == "circuit") return HaltingSpec::circuit_backed(circuit_from_json(detail::field<json>(j, "circuit")));
  if (kind == "fixed-iteration") return HaltingSpec::fixed_iteration(detail::field<std::size_t>(j, "k"));
  if (kind == "threshold-count")
    return HaltingSpec::threshold_count(detail::field<double>(j, "target"), detail::field<double>(j, "bound"));
  if (kind == "always-halt") return HaltingSpec::always_halt();
  throw FormatError("unknown halting kind '" + kind + "'");
}

inline json to_json(const RecurrentCircuit& r) {
  json rec = json::array();
  for (const auto& [m, s] : r.rec_edges) rec.push_back({m, s});
  json j{{"format", "recurrent"},
         {"underlying", to_json(r.underlying)},
         {"initial_aux", r.initial_aux},
         {"rec_edges", rec},
         {"halting_gates", r.halting_gates},
         {"halting", to_json(r.halting)}};
  if (r.counter_gate) j["counter_gate"] = *r.counter_gate;
  return j;
}

inline RecurrentCircuit recurrent_from_json(const json& j) {
  RecurrentCircuit r;
  r.underlying = circuit_from_json(detail::field<json>(j, "underlying"));
  r.initial_aux = j.value("initial_aux", std::vector<double>{});
  for (const auto& e : detail::field<json>(j, "rec_edges")) {
    if (!e.is_array() || e.size() != 2) throw FormatError("rec_edges entries are [memory, source] pairs");
    if (!r.rec_edges.emplace(e[0].get<GateId>(), e[1].get<GateId>()).second)
      throw FormatError("memory gate listed twice in rec_edges");
  }
  r.halting_gates = j.value("halting_gates", std::vector<GateId>{});
  r.halting = halting_from_json(detail::field<json>(j, "halting"));
  if (j.contains("counter_gate")) r.counter_gate = j["counter_gate"].get<GateId>();
  return r;
}

inline bool is_recurrent_json(const json& j) { return j.contains("underlying"); }

// ---------------------------------------------------------------- graphs

inline json to_json(const LabelledGraph& g) {
  json e = json::array();
  for (auto [a, b] : g.edges) e.push_back({a, b});
  return {{"format", "graph"}, {"n", g.n}, {"edges", e}, {"labels", g.labels}};
}

/// Labels may be omitted for graph shapes; they default to 0.
inline LabelledGraph graph_from_json(const json& j) {
  if (j.value("symbolic", false)) throw FormatError("expected a concrete graph, got a symbolic one");
  LabelledGraph g;
  g.n = detail::field<std::size_t>(j, "n");
  for (const auto& e : detail::field<json>(j, "edges")) {
    if (!e.is_array() || e.size() != 2) throw FormatError("edges are [i, j] pairs");
    g.edges.emplace_back(e[0].get<std::size_t>(), e[1].get<std::size_t>());
  }
  g.labels = j.value("labels", std::vector<double>(g.n, 0.0));
  g.normalize();
  g.validate();
  return g;
}

inline const char* part_name(Part p) {
  switch (p) {
    case Part::Underlying: return "underlying";
    case Part::Halting: return "halting";
    case Part::Dummy: return "dummy";
  }
  return "?";
}

inline json to_json(const SymLabel& l) {
  switch (l.kind) {
    case SymLabel::Kind::In: return {{"kind", "in"}, {"index", l.index}};
    case SymLabel::Kind::Aux: return {{"kind", "aux"}, {"index", l.index}};
    case SymLabel::Kind::Const: return {{"kind", "const"}, {"index", l.index}};
    case SymLabel::Kind::Literal: return {{"kind", "literal"}, {"value", l.literal}};
  }
  return {};
}

inline SymLabel sym_label_from_json(const json& j) {
  auto k = detail::field<std::string>(j, "kind");
  if (k == "in") return SymLabel::in(detail::field<std::size_t>(j, "index"));
  if (k == "aux") return SymLabel::aux(detail::field<std::size_t>(j, "index"));
  if (k == "const") return SymLabel::constant(detail::field<std::size_t>(j, "index"));
  if (k == "literal") return SymLabel::lit(detail::field<double>(j, "value"));
  throw FormatError("unknown symbolic label kind '" + k + "'");
}

inline json to_json(const SymbolicLabelledGraph& s) {
  json e = json::array(), labels = json::array(), roles = json::array();
  for (auto [a, b] : s.edges) e.push_back({a, b});
  for (const auto& l : s.labels) labels.push_back(to_json(l));
  for (const auto& r : s.roles)
    roles.push_back({{"part", part_name(r.part)},
                     {"gate", r.gate},
                     {"global_index", r.global_index},
                     {"q", r.q},
                     {"halting_node", r.halting_node},
                     {"halting_output", r.halting_output}});
  return {{"format", "symbolic-graph"},
          {"symbolic", true},
          {"n", s.n},
          {"edges", e},
          {"labels", labels},
          {"roles", roles},
          {"constants", s.constants},
          {"r_prime", s.r_prime},
          {"gate_vertices", s.gate_vertices},
          {"halt_copies", s.halt_copies},
          {"halting_prime", to_json(s.halting_prime)},
          {"inputs", s.inputs},
          {"aux", s.aux},
          {"underlying_size", s.underlying_size}};
}

inline SymbolicLabelledGraph symbolic_from_json(const json& j) {
  if (!j.value("symbolic", false)) throw FormatError("expected a symbolic graph");
  SymbolicLabelledGraph s;
  s.n = detail::field<std::size_t>(j, "n");
  for (const auto& e : detail::field<json>(j, "edges")) s.edges.emplace_back(e[0].get<std::size_t>(), e[1].get<std::size_t>());
  for (const auto& l : detail::field<json>(j, "labels")) s.labels.push_back(sym_label_from_json(l));
  static const std::map<std::string, Part> parts{
      {"underlying", Part::Underlying}, {"halting", Part::Halting}, {"dummy", Part::Dummy}};
  for (const auto& r : detail::field<json>(j, "roles")) {
    VertexRole v;
    auto it = parts.find(detail::field<std::string>(r, "part"));
    if (it == parts.end()) throw FormatError("unknown vertex part");
    v.part = it->second;
    v.gate = detail::field<std::size_t>(r, "gate");
    v.global_index = detail::field<std::size_t>(r, "global_index");
    v.q = detail::field<std::size_t>(r, "q");
    v.halting_node = r.value("halting_node", false);
    v.halting_output = r.value("halting_output", false);
    s.roles.push_back(v);
  }
  s.constants = detail::field<std::vector<double>>(j, "constants");
  s.r_prime = detail::field<std::size_t>(j, "r_prime");
  s.gate_vertices = detail::field<std::size_t>(j, "gate_vertices");
  s.halt_copies = detail::field<std::size_t>(j, "halt_copies");
  s.halting_prime = circuit_from_json(detail::field<json>(j, "halting_prime"));
  s.inputs = detail::field<std::size_t>(j, "inputs");
  s.aux = detail::field<std::size_t>(j, "aux");
  s.underlying_size = detail::field<std::size_t>(j, "underlying_size");
  if (s.labels.size() != s.n || s.roles.size() != s.n) throw FormatError("symbolic graph: label/role count differs from n");
  return s;
}

// ---------------------------------------------------------------- GNNs

inline json to_json(const FamilyMember& m) { return m.rec ? to_json(*m.rec) : to_json(*m.plain); }

inline FamilyMember member_from_json(const json& j) {
  return is_recurrent_json(j) ? FamilyMember::of(recurrent_from_json(j)) : FamilyMember::of(circuit_from_json(j));
}

inline json to_json(const CircuitFamily& f) {
  json tags{{"sign_free", f.tags().sign_free},
            {"recurrent", f.tags().recurrent},
            {"tail_symmetric", f.tags().tail_symmetric}};
  if (const auto& t = f.template_spec()) return {{"template", {{"name", t->name}, {"params", t->params}}}, {"tags", tags}};
  json members = json::array();
  if (const auto* tbl = f.explicit_members())
    for (const auto& [k, m] : *tbl) members.push_back({{"arity", k}, {"member", to_json(m)}});
  else
    throw FormatError("family has neither a template nor an explicit member table");
  return {{"members", members}, {"tags", tags}};
}

inline FamilyPtr family_from_json(const json& j) {
  if (j.contains("template")) {
    const auto& t = j["template"];
    return CircuitFamily::from_template(
        {detail::field<std::string>(t, "name"), t.value("params", std::map<std::string, double>{})});
  }
  CircuitFamily::Tags tags;
  if (j.contains("tags")) {
    tags.sign_free = j["tags"].value("sign_free", false);
    tags.recurrent = j["tags"].value("recurrent", false);
    tags.tail_symmetric = j["tags"].value("tail_symmetric", true);
  }
  std::map<std::size_t, FamilyMember> members;
  for (const auto& m : detail::field<json>(j, "members"))
    members.emplace(detail::field<std::size_t>(m, "arity"), member_from_json(detail::field<json>(m, "member")));
  return CircuitFamily::from_members(std::move(members), tags);
}

inline json to_json(const GnnHaltingSpec& h) {
  switch (h.kind) {
    case GnnHaltingSpec::Kind::FixedLayer: return {{"kind", "fixed-layer"}, {"k", h.k}};
    case GnnHaltingSpec::Kind::ThresholdCount:
      return {{"kind", "threshold-count"}, {"target", h.target}, {"bound", h.bound}};
    case GnnHaltingSpec::Kind::Family: return {{"kind", "family"}, {"family", to_json(*h.family)}};
  }
  return {};
}

inline GnnHaltingSpec gnn_halting_from_json(const json& j) {
  auto kind = detail::field<std::string>(j, "kind");
  if (kind == "fixed-layer") return GnnHaltingSpec::fixed_layer(detail::field<std::size_t>(j, "k"));
  if (kind == "threshold-count")
    return GnnHaltingSpec::threshold_count(detail::field<double>(j, "target"), detail::field<double>(j, "bound"));
  if (kind == "family") return GnnHaltingSpec::circuit_family(family_from_json(detail::field<json>(j, "family")));
  throw FormatError("unknown GNN halting kind '" + kind + "'");
}

inline json to_json(const RecCGnn& g) {
  json layers = json::array();
  for (const auto& l : g.layers) layers.push_back({{"activation", l.activation}, {"family", to_json(*l.family)}});
  return {{"format", "gnn"},
          {"period", g.period()},
          {"layers", layers},
          {"halting", to_json(g.halting)},
          {"inner_budget", g.inner_budget}};
}

inline RecCGnn gnn_from_json(const json& j) {
  RecCGnn g;
  for (const auto& l : detail::field<json>(j, "layers")) {
    LayerSpec s{family_from_json(detail::field<json>(l, "family")), l.value("activation", std::string("id"))};
    ActivationRegistry::builtin().get(s.activation);
    g.layers.push_back(std::move(s));
  }
  if (j.contains("period") && j["period"].get<std::size_t>() != g.layers.size())
    throw FormatError("period differs from the number of layers");
  if (g.layers.empty()) throw FormatError("GNN needs at least one layer");
  g.halting = gnn_halting_from_json(detail::field<json>(j, "halting"));
  g.inner_budget = j.value("inner_budget", kDefaultBudget);
  return g;
}

// ---------------------------------------------------------------- reports

inline json to_json(const CompileReport& r) {
  return {{"construction", r.construction},
          {"source", r.source},
          {"target", r.target},
          {"gadgets", r.gadgets},
          {"notes", r.notes}};
}

inline CompileReport report_from_json(const json& j) {
  CompileReport r;
  r.construction = j.value("construction", std::string{});
  r.source = j.value("source", std::map<std::string, double>{});
  r.target = j.value("target", std::map<std::string, double>{});
  r.gadgets = j.value("gadgets", std::map<std::string, std::size_t>{});
  r.notes = j.value("notes", std::map<std::string, std::string>{});
  return r;
}

/// Symbolic graph of an outer-GNN artifact plus what is needed to
/// instantiate it and read the result back.
inline json to_json(const OuterGnnArtifact& a) {
  json j = to_json(a.graph);
  j["initial_aux"] = a.normalized.initial_aux;
  j["output_vertices"] = a.output_vertices;
  j["phase_length"] = a.phase_length;
  return j;
}

/// The graph half of an outer-GNN artifact as read back from JSON.
struct OuterGraphSpec {
  SymbolicLabelledGraph graph;
  std::vector<double> initial_aux;
  std::vector<std::size_t> output_vertices;
  std::size_t phase_length = 0;

  LabelledGraph instantiate(const std::vector<double>& x) const { return instantiate_encoding(graph, initial_aux, x); }
  std::vector<double> outputs_of(const LabelledGraph& g) const {
    std::vector<double> v;
    for (std::size_t o : output_vertices) v.push_back(g.labels.at(o));
    return v;
  }
};

inline bool is_outer_graph_json(const json& j) { return j.value("symbolic", false) && j.contains("output_vertices"); }

inline OuterGraphSpec outer_graph_from_json(const json& j) {
  OuterGraphSpec s;
  s.graph = symbolic_from_json(j);
  s.initial_aux = j.value("initial_aux", std::vector<double>{});
  s.output_vertices = detail::field<std::vector<std::size_t>>(j, "output_vertices");
  s.phase_length = j.value("phase_length", std::size_t{0});
  for (std::size_t o : s.output_vertices)
    if (o >= s.graph.n) throw FormatError("output vertex " + std::to_string(o) + " out of range");
  return s;
}

// ---------------------------------------------------------------- files

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw FormatError("'" + path + "': " + e.what());
  }
}

inline void write_json_file(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write '" + path + "'");
  out << j.dump(2) << '\n';
}

/// Loads either format; a plain circuit becomes a recurrent circuit only if
/// the caller wraps it.
inline RecurrentCircuit load_recurrent(const std::string& path) {
  auto j = read_json_file(path);
  if (!is_recurrent_json(j)) throw FormatError("'" + path + "' holds a plain circuit, expected a recurrent one");
  return recurrent_from_json(j);
}

}  // namespace reccirc
