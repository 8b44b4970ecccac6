#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "errors.hpp"

namespace reccirc {

enum class GateType { Input, Aux, Constant, Add, Mul, Activation, Output };

inline const char* type_name(GateType t) {
  switch (t) {
    case GateType::Input: return "input";
    case GateType::Aux: return "aux";
    case GateType::Constant: return "const";
    case GateType::Add: return "add";
    case GateType::Mul: return "mul";
    case GateType::Activation: return "activation";
    case GateType::Output: return "output";
  }
  return "?";
}

inline bool is_source(GateType t) {
  return t == GateType::Input || t == GateType::Aux || t == GateType::Constant;
}

struct Gate {
  GateType type = GateType::Add;
  std::size_t index = 0;   // Input/Aux/Output ordinal
  double value = 0.0;      // Constant
  std::string activation;  // Activation
  std::vector<GateId> preds;

  bool operator==(const Gate&) const = default;
};

/// A DAG of gates plus the ordered role lists.  Gate ids are dense and
/// follow declaration order.
struct ExtendedCircuit {
  std::vector<Gate> gates;
  std::vector<GateId> inputs;
  std::vector<GateId> aux_memory;
  std::vector<GateId> outputs;

  std::size_t n() const { return inputs.size(); }
  std::size_t l() const { return aux_memory.size(); }
  std::size_t m() const { return outputs.size(); }
  std::size_t size() const { return gates.size(); }

  std::set<std::string> activation_names() const {
    std::set<std::string> s;
    for (const auto& g : gates)
      if (g.type == GateType::Activation) s.insert(g.activation);
    return s;
  }

  std::size_t count(GateType t) const {
    return static_cast<std::size_t>(
        std::count_if(gates.begin(), gates.end(), [t](const Gate& g) { return g.type == t; }));
  }

  std::size_t count_activation(const std::string& name) const {
    return static_cast<std::size_t>(std::count_if(gates.begin(), gates.end(), [&](const Gate& g) {
      return g.type == GateType::Activation && g.activation == name;
    }));
  }

  bool operator==(const ExtendedCircuit&) const = default;
};

// ---------------------------------------------------------------- registry

class ActivationRegistry {
 public:
  using Fn = std::function<double(double)>;

  ActivationRegistry() {
    fns_["sign"] = [](double x) { return x > 0.0 ? 1.0 : 0.0; };
    fns_["exp"] = [](double x) { return std::exp(x); };
    fns_["id"] = [](double x) { return x; };
  }

  void add(const std::string& name, Fn f) { fns_[name] = std::move(f); }
  bool contains(const std::string& name) const { return fns_.count(name) != 0; }

  const Fn& get(const std::string& name) const {
    auto it = fns_.find(name);
    if (it == fns_.end()) throw Error("unregistered activation '" + name + "'");
    return it->second;
  }

  double apply(const std::string& name, double x) const { return get(name)(x); }

  static const ActivationRegistry& builtin() {
    static const ActivationRegistry r;
    return r;
  }

 private:
  std::map<std::string, Fn> fns_;
};

inline double sign(double x) { return x > 0.0 ? 1.0 : 0.0; }

// ---------------------------------------------------------------- builder

/// Incremental construction helper.  Role indices are assigned in call order.
class CircuitBuilder {
 public:
  CircuitBuilder() = default;
  explicit CircuitBuilder(ExtendedCircuit c) : c_(std::move(c)) {}

  GateId input() {
    GateId id = push({GateType::Input, c_.inputs.size(), 0.0, {}, {}});
    c_.inputs.push_back(id);
    return id;
  }
  GateId aux() {
    GateId id = push({GateType::Aux, c_.aux_memory.size(), 0.0, {}, {}});
    c_.aux_memory.push_back(id);
    return id;
  }
  GateId constant(double v) { return push({GateType::Constant, 0, v, {}, {}}); }
  GateId add(std::vector<GateId> preds) { return push({GateType::Add, 0, 0.0, {}, std::move(preds)}); }
  GateId mul(std::vector<GateId> preds) { return push({GateType::Mul, 0, 0.0, {}, std::move(preds)}); }
  GateId act(const std::string& name, GateId p) { return push({GateType::Activation, 0, 0.0, name, {p}}); }
  GateId sign(GateId p) { return act("sign", p); }
  GateId output(GateId p) {
    GateId id = push({GateType::Output, c_.outputs.size(), 0.0, {}, {p}});
    c_.outputs.push_back(id);
    return id;
  }

  // Small arithmetic conveniences.
  GateId neg(GateId p) { return mul({p, constant(-1.0)}); }
  GateId sub(GateId a, GateId b) { return add({a, neg(b)}); }
  GateId add_const(GateId a, double v) { return add({a, constant(v)}); }
  GateId one_minus(GateId p) { return add({neg(p), constant(1.0)}); }
  GateId identity(GateId p) { return add({p}); }

  ExtendedCircuit& circuit() { return c_; }
  const ExtendedCircuit& circuit() const { return c_; }
  ExtendedCircuit build() && { return std::move(c_); }
  ExtendedCircuit build() const& { return c_; }

 private:
  GateId push(Gate g) {
    c_.gates.push_back(std::move(g));
    return c_.gates.size() - 1;
  }
  ExtendedCircuit c_;
};

// ---------------------------------------------------------------- validation

struct Violation {
  GateId gate;
  std::string kind;  // e.g. "cycle", "output indegree"
  std::string detail;
};

struct ValidationReport {
  std::vector<Violation> violations;
  bool ok() const { return violations.empty(); }
  bool has(const std::string& kind) const {
    return std::any_of(violations.begin(), violations.end(),
                       [&](const Violation& v) { return v.kind == kind; });
  }
  std::string summary() const {
    std::string s;
    for (const auto& v : violations) {
      if (!s.empty()) s += "; ";
      s += v.kind + " at gate " + std::to_string(v.gate);
      if (!v.detail.empty()) s += " (" + v.detail + ")";
    }
    return s;
  }
};

/// Kahn topological order.  Returns nullopt on a cycle.  Assumes preds are in range.
inline std::optional<std::vector<GateId>> topo_order(const ExtendedCircuit& c) {
  const std::size_t n = c.gates.size();
  std::vector<std::size_t> indeg(n, 0);
  std::vector<std::vector<GateId>> succ(n);
  for (GateId g = 0; g < n; ++g)
    for (GateId p : c.gates[g].preds) {
      ++indeg[g];
      succ[p].push_back(g);
    }
  std::vector<GateId> order;
  order.reserve(n);
  std::vector<GateId> stack;
  for (GateId g = n; g-- > 0;)
    if (indeg[g] == 0) stack.push_back(g);
  while (!stack.empty()) {
    GateId g = stack.back();
    stack.pop_back();
    order.push_back(g);
    for (auto it = succ[g].rbegin(); it != succ[g].rend(); ++it)
      if (--indeg[*it] == 0) stack.push_back(*it);
  }
  if (order.size() != n) return std::nullopt;
  return order;
}

inline ValidationReport validate(const ExtendedCircuit& c,
                                 const ActivationRegistry& reg = ActivationRegistry::builtin()) {
  ValidationReport r;
  auto bad = [&](GateId g, std::string kind, std::string detail = {}) {
    r.violations.push_back({g, std::move(kind), std::move(detail)});
  };
  const std::size_t n = c.gates.size();
  bool preds_in_range = true;
  for (GateId g = 0; g < n; ++g) {
    const Gate& gate = c.gates[g];
    std::set<GateId> seen;
    for (GateId p : gate.preds) {
      if (p >= n) {
        bad(g, "dangling predecessor", std::to_string(p));
        preds_in_range = false;
        continue;
      }
      if (p == g) bad(g, "cycle", "self loop");
      if (!seen.insert(p).second) bad(g, "duplicate predecessor", std::to_string(p));
      if (c.gates[p].type == GateType::Output) bad(p, "output outdegree");
    }
    const std::size_t k = gate.preds.size();
    switch (gate.type) {
      case GateType::Input:
      case GateType::Aux:
      case GateType::Constant:
        if (k != 0) bad(g, "source indegree");
        if (gate.type == GateType::Constant && !std::isfinite(gate.value)) bad(g, "non-finite constant");
        break;
      case GateType::Add:
      case GateType::Mul:
        if (k == 0) bad(g, "fan-in 0");
        break;
      case GateType::Activation:
        if (k != 1) bad(g, "activation indegree");
        if (!reg.contains(gate.activation)) bad(g, "unknown activation", gate.activation);
        break;
      case GateType::Output:
        if (k != 1) bad(g, "output indegree");
        break;
    }
  }
  auto check_roles = [&](const std::vector<GateId>& ids, GateType t, const char* what) {
    std::size_t declared = 0;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      GateId g = ids[i];
      if (g >= n) {
        bad(g, "role list", std::string(what) + " id out of range");
        continue;
      }
      if (c.gates[g].type != t || c.gates[g].index != i)
        bad(g, "role list", std::string(what) + " entry " + std::to_string(i));
    }
    for (GateId g = 0; g < n; ++g)
      if (c.gates[g].type == t) ++declared;
    if (declared != ids.size()) bad(0, "role list", std::string(what) + " count mismatch");
  };
  check_roles(c.inputs, GateType::Input, "inputs");
  check_roles(c.aux_memory, GateType::Aux, "aux_memory");
  check_roles(c.outputs, GateType::Output, "outputs");

  if (preds_in_range && !topo_order(c)) {
    // Report every gate left with unresolved predecessors.
    std::vector<std::size_t> indeg(n, 0);
    std::vector<std::vector<GateId>> succ(n);
    for (GateId g = 0; g < n; ++g)
      for (GateId p : c.gates[g].preds) ++indeg[g], succ[p].push_back(g);
    std::vector<GateId> st;
    for (GateId g = 0; g < n; ++g)
      if (!indeg[g]) st.push_back(g);
    while (!st.empty()) {
      GateId g = st.back();
      st.pop_back();
      for (GateId s : succ[g])
        if (--indeg[s] == 0) st.push_back(s);
    }
    for (GateId g = 0; g < n; ++g)
      if (indeg[g]) bad(g, "cycle");
  }
  return r;
}

inline void require_valid(const ExtendedCircuit& c, const std::string& what = "circuit") {
  auto r = validate(c);
  if (!r.ok()) throw ValidationError(what + " invalid: " + r.summary());
}

// ---------------------------------------------------------------- evaluation

struct EvalTrace {
  std::vector<double> gate_values;
  double operator[](GateId g) const { return gate_values[g]; }
};

struct EvalResult {
  std::vector<double> outputs;
  EvalTrace trace;
};

/// A circuit prepared for repeated evaluation: the topological order and
/// activation functions are resolved once.
class Evaluator {
 public:
  explicit Evaluator(const ExtendedCircuit& c,
                     const ActivationRegistry& reg = ActivationRegistry::builtin())
      : c_(&c) {
    auto order = topo_order(c);
    if (!order) throw ValidationError("circuit has a cycle");
    order_ = std::move(*order);
    fns_.resize(c.gates.size(), nullptr);
    for (GateId g = 0; g < c.gates.size(); ++g)
      if (c.gates[g].type == GateType::Activation) fns_[g] = &reg.get(c.gates[g].activation);
  }

  const ExtendedCircuit& circuit() const { return *c_; }

  /// Fills `values` (resized to the gate count) and returns nothing; outputs
  /// are readable at the output gate ids.
  void run(std::span<const double> x, std::span<const double> a, std::vector<double>& values) const {
    const ExtendedCircuit& c = *c_;
    if (x.size() != c.inputs.size())
      throw ArityError("expected " + std::to_string(c.inputs.size()) + " inputs, got " +
                       std::to_string(x.size()));
    if (a.size() != c.aux_memory.size())
      throw ArityError("expected " + std::to_string(c.aux_memory.size()) + " aux values, got " +
                       std::to_string(a.size()));
    values.resize(c.gates.size());
    for (GateId g : order_) {
      const Gate& gate = c.gates[g];
      double v = 0.0;
      switch (gate.type) {
        case GateType::Input: v = x[gate.index]; break;
        case GateType::Aux: v = a[gate.index]; break;
        case GateType::Constant: v = gate.value; break;
        case GateType::Add:
          for (GateId p : gate.preds) v += values[p];
          break;
        case GateType::Mul:
          v = 1.0;
          for (GateId p : gate.preds) v *= values[p];
          break;
        case GateType::Activation: v = (*fns_[g])(values[gate.preds[0]]); break;
        case GateType::Output: v = values[gate.preds[0]]; break;
      }
      if (!std::isfinite(v)) throw EvalError(g, "non-finite value (" + std::to_string(v) + ")");
      values[g] = v;
    }
  }

  std::vector<double> outputs_of(const std::vector<double>& values) const {
    std::vector<double> out;
    out.reserve(c_->outputs.size());
    for (GateId o : c_->outputs) out.push_back(values[o]);
    return out;
  }

  EvalResult operator()(std::span<const double> x, std::span<const double> a = {}) const {
    EvalResult r;
    run(x, a, r.trace.gate_values);
    r.outputs = outputs_of(r.trace.gate_values);
    return r;
  }

 private:
  const ExtendedCircuit* c_;
  std::vector<GateId> order_;
  std::vector<const ActivationRegistry::Fn*> fns_;
};

inline EvalResult evaluate(const ExtendedCircuit& c, std::span<const double> x,
                           std::span<const double> a = {},
                           const ActivationRegistry& reg = ActivationRegistry::builtin()) {
  return Evaluator(c, reg)(x, a);
}

inline EvalResult evaluate(const ExtendedCircuit& c, std::initializer_list<double> x,
                           std::initializer_list<double> a = {}) {
  std::vector<double> xv(x), av(a);
  return evaluate(c, xv, av);
}

// ---------------------------------------------------------------- metrics

/// Longest path (in edges) from any source gate to each gate.
inline std::vector<std::size_t> gate_depths(const ExtendedCircuit& c) {
  auto order = topo_order(c);
  if (!order) throw ValidationError("circuit has a cycle");
  std::vector<std::size_t> d(c.gates.size(), 0);
  for (GateId g : *order)
    for (GateId p : c.gates[g].preds) d[g] = std::max(d[g], d[p] + 1);
  return d;
}

inline std::size_t gate_depth(const ExtendedCircuit& c, GateId g) { return gate_depths(c).at(g); }

inline std::size_t depth(const ExtendedCircuit& c) {
  auto d = gate_depths(c);
  return d.empty() ? 0 : *std::max_element(d.begin(), d.end());
}

inline std::size_t size(const ExtendedCircuit& c) { return c.gates.size(); }

inline std::vector<std::vector<GateId>> successors(const ExtendedCircuit& c) {
  std::vector<std::vector<GateId>> s(c.gates.size());
  for (GateId g = 0; g < c.gates.size(); ++g)
    for (GateId p : c.gates[g].preds) s[p].push_back(g);
  return s;
}

// ---------------------------------------------------------------- balancing

inline bool is_balanced_dag(const ExtendedCircuit& c) {
  auto d = gate_depths(c);
  for (GateId g = 0; g < c.gates.size(); ++g)
    for (GateId p : c.gates[g].preds)
      if (d[p] + 1 != d[g]) return false;
  return true;
}

/// Pads short edges with unary Add gates so that every source-to-gate path
/// to a given gate has the same length.  Pads hanging off one predecessor
/// are shared between consumers.
inline ExtendedCircuit balance(const ExtendedCircuit& c) {
  if (is_balanced_dag(c)) return c;
  auto d = gate_depths(c);
  ExtendedCircuit out = c;
  std::map<std::pair<GateId, std::size_t>, GateId> pads;  // (pred, depth) -> gate
  auto pad_at = [&](GateId p, std::size_t want) {
    GateId cur = p;
    for (std::size_t k = d[p] + 1; k <= want; ++k) {
      auto key = std::make_pair(p, k);
      auto it = pads.find(key);
      if (it == pads.end()) {
        out.gates.push_back({GateType::Add, 0, 0.0, {}, {cur}});
        it = pads.emplace(key, out.gates.size() - 1).first;
      }
      cur = it->second;
    }
    return cur;
  };
  for (GateId g = 0; g < c.gates.size(); ++g)
    for (auto& p : out.gates[g].preds)
      if (d[p] + 1 < d[g]) p = pad_at(p, d[g] - 1);
  return out;
}

// ---------------------------------------------------------------- symmetry sampling

inline bool close(double a, double b, double tol = 1e-9) {
  return std::fabs(a - b) <= tol * std::max({1.0, std::fabs(a), std::fabs(b)});
}

inline bool close(const std::vector<double>& a, const std::vector<double>& b, double tol = 1e-9) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (!close(a[i], b[i], tol)) return false;
  return true;
}

}  // namespace reccirc
