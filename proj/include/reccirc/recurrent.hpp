#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "circuit.hpp"

namespace reccirc {

struct HaltingSpec {
  enum class Kind { Circuit, FixedIteration, ThresholdCount, AlwaysHalt };

  Kind kind = Kind::AlwaysHalt;
  ExtendedCircuit circuit;  // Kind::Circuit: inputs (i, v1..vp), one output
  std::size_t k = 1;        // FixedIteration
  double target = 0.0;      // ThresholdCount
  double bound = 0.0;       // ThresholdCount: fires iff matches > bound

  static HaltingSpec circuit_backed(ExtendedCircuit c) {
    HaltingSpec h;
    h.kind = Kind::Circuit;
    h.circuit = std::move(c);
    return h;
  }
  static HaltingSpec fixed_iteration(std::size_t k) {
    HaltingSpec h;
    h.kind = Kind::FixedIteration;
    h.k = k;
    return h;
  }
  static HaltingSpec threshold_count(double target, double bound) {
    HaltingSpec h;
    h.kind = Kind::ThresholdCount;
    h.target = target;
    h.bound = bound;
    return h;
  }
  static HaltingSpec always_halt() { return HaltingSpec{}; }

  bool is_circuit() const { return kind == Kind::Circuit; }
  bool operator==(const HaltingSpec&) const = default;
};

inline constexpr double kMatchTolerance = 1e-9;

/// Builtin halting decisions; shared with the GNN halting specs.
inline bool threshold_count_fires(double target, double bound, std::span<const double> v) {
  std::size_t hits = 0;
  for (double x : v)
    if (std::fabs(x - target) <= kMatchTolerance) ++hits;
  return static_cast<double>(hits) > bound;
}

struct RecurrentCircuit {
  ExtendedCircuit underlying;
  std::vector<double> initial_aux;
  std::map<GateId, GateId> rec_edges;  // memory gate -> source gate
  std::vector<GateId> halting_gates;
  HaltingSpec halting;
  // Set by fold_iteration_counter: the auxiliary gate carrying the iteration number.
  std::optional<GateId> counter_gate;

  std::size_t n() const { return underlying.n(); }
  std::size_t m() const { return underlying.m(); }
  std::size_t l() const { return underlying.l(); }
  std::size_t p() const { return halting_gates.size(); }

  /// Memory gates in the order (inputs..., aux...).
  std::vector<GateId> memory_gates() const {
    std::vector<GateId> v = underlying.inputs;
    v.insert(v.end(), underlying.aux_memory.begin(), underlying.aux_memory.end());
    return v;
  }

  bool operator==(const RecurrentCircuit&) const = default;
};

inline ValidationReport validate(const RecurrentCircuit& r) {
  ValidationReport rep = validate(r.underlying);
  auto bad = [&](GateId g, std::string kind, std::string detail = {}) {
    rep.violations.push_back({g, std::move(kind), std::move(detail)});
  };
  const auto& c = r.underlying;
  if (r.initial_aux.size() != c.l())
    bad(0, "initial aux length", std::to_string(r.initial_aux.size()) + " vs " + std::to_string(c.l()));
  for (GateId g : r.memory_gates()) {
    auto it = r.rec_edges.find(g);
    if (it == r.rec_edges.end())
      bad(g, "missing recurrent edge");
    else if (it->second >= c.size())
      bad(g, "recurrent edge source out of range");
  }
  for (const auto& [mem, src] : r.rec_edges) {
    if (mem >= c.size() || (c.gates[mem].type != GateType::Input && c.gates[mem].type != GateType::Aux))
      bad(mem, "recurrent edge into non-memory gate");
  }
  for (GateId h : r.halting_gates)
    if (h >= c.size()) bad(h, "halting gate out of range");
  if (r.halting.is_circuit()) {
    auto hr = validate(r.halting.circuit);
    for (auto& v : hr.violations) bad(v.gate, "halting circuit: " + v.kind, v.detail);
    if (r.halting.circuit.m() != 1) bad(0, "halting circuit output count");
    if (r.halting.circuit.n() != r.p() + 1) bad(0, "halting circuit arity");
  }
  return rep;
}

inline void require_valid(const RecurrentCircuit& r) {
  auto rep = validate(r);
  if (!rep.ok()) throw ValidationError("recurrent circuit invalid: " + rep.summary());
}

// ---------------------------------------------------------------- halting

class HaltingEvaluator {
 public:
  explicit HaltingEvaluator(const HaltingSpec& s) : spec_(&s) {
    if (s.is_circuit()) ev_.emplace(s.circuit);
  }

  bool operator()(std::size_t i, std::span<const double> v) const {
    const HaltingSpec& s = *spec_;
    switch (s.kind) {
      case HaltingSpec::Kind::Circuit: {
        if (s.circuit.n() != v.size() + 1)
          throw ArityError("halting circuit expects " + std::to_string(s.circuit.n() - 1) +
                           " halting values, got " + std::to_string(v.size()));
        buf_.assign(1, static_cast<double>(i));
        buf_.insert(buf_.end(), v.begin(), v.end());
        ev_->run(buf_, {}, vals_);
        return vals_[s.circuit.outputs[0]] > 0.5;
      }
      case HaltingSpec::Kind::FixedIteration: return i == s.k;
      case HaltingSpec::Kind::ThresholdCount: return threshold_count_fires(s.target, s.bound, v);
      case HaltingSpec::Kind::AlwaysHalt: return true;
    }
    return true;
  }

 private:
  const HaltingSpec* spec_;
  std::optional<Evaluator> ev_;
  mutable std::vector<double> buf_, vals_;
};

inline int halting_eval(const HaltingSpec& s, std::size_t i, std::span<const double> v) {
  if (i < 1) throw ArityError("iteration numbers start at 1");
  return HaltingEvaluator(s)(i, v) ? 1 : 0;
}

inline int halting_eval(const HaltingSpec& s, std::size_t i, std::initializer_list<double> v) {
  std::vector<double> vv(v);
  return halting_eval(s, i, vv);
}

// ---------------------------------------------------------------- run

struct RunRecord {
  std::vector<double> memory;  // (x, a) at iteration start
  std::vector<double> halting_values;
  bool halted = false;
  std::vector<double> outputs;
};

struct RunTrace {
  std::vector<RunRecord> records;
  std::size_t size() const { return records.size(); }
};

struct RunResult {
  std::vector<double> outputs;
  RunTrace trace;
  std::size_t iterations = 0;
};

struct NonHalting : Error {
  std::size_t budget;
  RunTrace trace;
  NonHalting(std::size_t b, RunTrace t)
      : Error("non-halting within budget " + std::to_string(b)), budget(b), trace(std::move(t)) {}
};

struct IterationError : Error {
  std::size_t iteration;
  GateId gate;
  IterationError(std::size_t it, const EvalError& e)
      : Error("iteration " + std::to_string(it) + ", " + e.what()), iteration(it), gate(e.gate) {}
};

inline constexpr std::size_t kDefaultBudget = 10000;

/// Reusable runner: prepares evaluators once.
class Runner {
 public:
  explicit Runner(const RecurrentCircuit& r) : r_(&r), ev_(r.underlying), halt_(r.halting) {
    const auto& c = r.underlying;
    src_in_.reserve(c.n());
    for (GateId g : c.inputs) src_in_.push_back(r.rec_edges.at(g));
    for (GateId g : c.aux_memory) src_aux_.push_back(r.rec_edges.at(g));
  }

  RunResult operator()(std::span<const double> x, std::size_t budget = kDefaultBudget,
                       bool keep_trace = true) const {
    const RecurrentCircuit& r = *r_;
    if (x.size() != r.n())
      throw ArityError("expected " + std::to_string(r.n()) + " inputs, got " + std::to_string(x.size()));
    if (budget < 1) throw ArityError("budget must be at least 1");
    std::vector<double> cx(x.begin(), x.end()), ca = r.initial_aux, vals, hv(r.p());
    RunResult res;
    for (std::size_t i = 1; i <= budget; ++i) {
      try {
        ev_.run(cx, ca, vals);
      } catch (const EvalError& e) {
        throw IterationError(i, e);
      }
      for (std::size_t j = 0; j < hv.size(); ++j) hv[j] = vals[r.halting_gates[j]];
      bool halted;
      try {
        halted = halt_(i, hv);
      } catch (const EvalError& e) {
        throw IterationError(i, e);
      }
      if (keep_trace || halted) {
        RunRecord rec;
        if (keep_trace) {
          rec.memory = cx;
          rec.memory.insert(rec.memory.end(), ca.begin(), ca.end());
          rec.halting_values = hv;
        }
        rec.halted = halted;
        rec.outputs = ev_.outputs_of(vals);
        if (halted) res.outputs = rec.outputs;
        if (keep_trace) res.trace.records.push_back(std::move(rec));
      }
      if (halted) {
        res.iterations = i;
        return res;
      }
      for (std::size_t j = 0; j < cx.size(); ++j) cx[j] = vals[src_in_[j]];
      for (std::size_t j = 0; j < ca.size(); ++j) ca[j] = vals[src_aux_[j]];
    }
    throw NonHalting(budget, std::move(res.trace));
  }

 private:
  const RecurrentCircuit* r_;
  Evaluator ev_;
  HaltingEvaluator halt_;
  std::vector<GateId> src_in_, src_aux_;
};

inline RunResult run(const RecurrentCircuit& r, std::span<const double> x,
                     std::size_t budget = kDefaultBudget) {
  return Runner(r)(x, budget);
}

inline RunResult run(const RecurrentCircuit& r, std::initializer_list<double> x,
                     std::size_t budget = kDefaultBudget) {
  std::vector<double> v(x);
  return run(r, v, budget);
}

// ---------------------------------------------------------------- counter folding

/// True when the halting circuit ignores the external iteration number.
inline bool is_folded(const RecurrentCircuit& r) {
  if (!r.halting.is_circuit()) return false;
  const auto& hc = r.halting.circuit;
  GateId i0 = hc.inputs.at(0);
  for (const auto& g : hc.gates)
    for (GateId p : g.preds)
      if (p == i0) return false;
  return true;
}

inline RecurrentCircuit fold_iteration_counter(const RecurrentCircuit& r) {
  if (!r.halting.is_circuit())
    throw Error("fold_iteration_counter requires circuit-backed halting");
  RecurrentCircuit out = r;
  CircuitBuilder b(std::move(out.underlying));
  GateId c = b.aux();
  GateId inc = b.add({c, b.constant(1.0)});
  out.underlying = std::move(b).build();
  out.initial_aux.push_back(1.0);
  out.rec_edges[c] = inc;
  out.halting_gates.push_back(c);
  out.counter_gate = c;

  CircuitBuilder hb(std::move(out.halting.circuit));
  GateId i0 = hb.circuit().inputs.at(0);
  GateId fresh = hb.input();
  for (GateId g = 0; g < fresh; ++g)
    for (auto& p : hb.circuit().gates[g].preds)
      if (p == i0) p = fresh;
  out.halting.circuit = std::move(hb).build();
  return out;
}

// ---------------------------------------------------------------- predecessor form

/// Balanced DAG, type-homogeneous depth levels (sources and output taps
/// exempt), and every halting gate and memory predecessor strictly deeper
/// than the deepest activation level.
inline bool is_predecessor_form(const RecurrentCircuit& r) {
  const auto& c = r.underlying;
  if (!is_balanced_dag(c)) return false;
  auto d = gate_depths(c);
  std::map<std::size_t, std::pair<GateType, std::string>> level_kind;
  std::optional<std::size_t> last_act;
  for (GateId g = 0; g < c.size(); ++g) {
    const Gate& gate = c.gates[g];
    if (is_source(gate.type) || gate.type == GateType::Output) continue;
    auto key = std::make_pair(gate.type, gate.activation);
    auto [it, fresh] = level_kind.emplace(d[g], key);
    if (!fresh && it->second != key) return false;
    if (gate.type == GateType::Activation) last_act = std::max(last_act.value_or(0), d[g]);
  }
  if (!last_act) return true;
  for (GateId h : r.halting_gates)
    if (d[h] <= *last_act) return false;
  for (const auto& [mem, src] : r.rec_edges)
    if (d[src] <= *last_act) return false;
  return true;
}

}  // namespace reccirc
