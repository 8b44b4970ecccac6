// reccirc: command-line front end over the JSON formats in docs/formats.md.
//
// Exit status: 0 success, 1 domain error (validation, non-halting, failed
// difftest, malformed file), 2 usage error.

#include <CLI11.hpp>

#include <cmath>
#include <iostream>
#include <reccirc/dot.hpp>
#include <reccirc/harness.hpp>
#include <reccirc/json_io.hpp>
#include <reccirc/symmetry.hpp>

using namespace reccirc;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

bool g_json = false;

std::string number(double v) {
  if (std::isfinite(v) && v == std::floor(v) && std::fabs(v) < 1e15) return std::to_string(static_cast<long long>(v));
  return json(v).dump();
}

std::string join(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? " " : "") + number(v[i]);
  return s;
}

void emit(const std::string& path, const json& j) {
  if (path.empty() || path == "-")
    std::cout << j.dump(2) << '\n';
  else
    write_json_file(path, j);
}

void emit_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write '" + path + "'");
  out << text;
}

enum class FileKind { Circuit, Recurrent, Gnn, Graph, Symbolic, Report, Tuple, Unknown };

FileKind kind_of(const json& j) {
  if (j.is_array()) return FileKind::Tuple;
  if (!j.is_object()) return FileKind::Unknown;
  if (j.value("symbolic", false)) return FileKind::Symbolic;
  const std::string f = j.value("format", std::string{});
  if (f == "recurrent" || j.contains("underlying")) return FileKind::Recurrent;
  if (f == "circuit" || j.contains("gates")) return FileKind::Circuit;
  if (f == "gnn" || j.contains("layers")) return FileKind::Gnn;
  if (j.contains("construction")) return FileKind::Report;
  if (f == "graph" || (j.contains("n") && j.contains("edges"))) return FileKind::Graph;
  return FileKind::Unknown;
}

const char* kind_name(FileKind k) {
  switch (k) {
    case FileKind::Circuit: return "circuit";
    case FileKind::Recurrent: return "recurrent";
    case FileKind::Gnn: return "gnn";
    case FileKind::Graph: return "graph";
    case FileKind::Symbolic: return "symbolic-graph";
    case FileKind::Report: return "report";
    case FileKind::Tuple: return "tuple";
    case FileKind::Unknown: break;
  }
  return "unknown";
}

std::string error_kind(const std::exception& e) {
  if (dynamic_cast<const UsageError*>(&e)) return "usage";
  if (dynamic_cast<const NonHalting*>(&e) || dynamic_cast<const GnnNonHalting*>(&e)) return "non-halting";
  if (dynamic_cast<const InnerNonHalting*>(&e)) return "inner-non-halting";
  if (dynamic_cast<const IterationError*>(&e) || dynamic_cast<const EvalError*>(&e)) return "evaluation";
  if (dynamic_cast<const ValidationError*>(&e)) return "validation";
  if (dynamic_cast<const CompileError*>(&e)) return "compile";
  if (dynamic_cast<const FormatError*>(&e) || dynamic_cast<const json::exception*>(&e)) return "format";
  if (dynamic_cast<const ConstraintError*>(&e)) return "constraint";
  if (dynamic_cast<const ArityError*>(&e)) return "arity";
  return "error";
}

int fail(const std::exception& e, int code) {
  if (g_json) {
    json err{{"kind", error_kind(e)}, {"message", e.what()}, {"exit", code}};
    if (auto* nh = dynamic_cast<const NonHalting*>(&e)) {
      err["budget"] = nh->budget;
      err["trace_records"] = nh->trace.size();
    }
    std::cerr << json{{"error", err}}.dump() << '\n';
  } else {
    std::cerr << "reccirc: " << e.what() << '\n';
  }
  return code;
}

// ---------------------------------------------------------------- check

struct CheckResult {
  FileKind kind = FileKind::Unknown;
  std::vector<Violation> violations;
  json notes = json::object();
};

void add_all(CheckResult& res, const ValidationReport& rep, const std::string& prefix = {}) {
  for (const auto& v : rep.violations) res.violations.push_back({v.gate, prefix + v.kind, v.detail});
}

CheckResult check_json(const json& j) {
  CheckResult res;
  res.kind = kind_of(j);
  switch (res.kind) {
    case FileKind::Circuit: {
      auto c = circuit_from_json(j);
      add_all(res, validate(c));
      if (res.violations.empty()) res.notes = {{"size", size(c)}, {"depth", depth(c)}, {"balanced", is_balanced_dag(c)}};
      break;
    }
    case FileKind::Recurrent: {
      auto r = recurrent_from_json(j);
      add_all(res, validate(r));
      if (res.violations.empty())
        res.notes = {{"size", size(r.underlying)},
                     {"depth", depth(r.underlying)},
                     {"folded", is_folded(r)},
                     {"predecessor_form", is_predecessor_form(r)}};
      break;
    }
    case FileKind::Gnn: {
      auto g = gnn_from_json(j);
      std::set<std::size_t> arities;
      for (const auto& l : g.layers) {
        if (const auto* tbl = l.family->explicit_members()) {
          for (const auto& [k, m] : *tbl) {
            arities.insert(k);
            if (m.recurrent())
              add_all(res, validate(*m.rec), "member " + std::to_string(k) + ": ");
            else
              add_all(res, validate(*m.plain), "member " + std::to_string(k) + ": ");
          }
        } else {
          for (std::size_t k = 1; k <= 6; ++k) arities.insert(k);
        }
      }
      std::set<std::size_t> usable;
      for (std::size_t k : arities) {
        bool all = true;
        for (const auto& l : g.layers) {
          const auto* tbl = l.family->explicit_members();
          all = all && (!tbl || tbl->count(k));
        }
        if (all) usable.insert(k);
      }
      if (res.violations.empty())
        for (const auto& w : check_tail_symmetry(g, usable, 100, 7)) res.violations.push_back({0, "tail-symmetry", w});
      res.notes = {{"period", g.period()}, {"checked_arities", usable}};
      break;
    }
    case FileKind::Graph: {
      try {
        graph_from_json(j);
      } catch (const Error& e) {
        res.violations.push_back({0, "graph", e.what()});
      }
      break;
    }
    case FileKind::Symbolic: {
      auto s = symbolic_from_json(j);
      std::vector<std::size_t> deg(s.n, 0);
      for (auto [a, b] : s.edges) {
        if (a >= s.n || b >= s.n) throw FormatError("edge endpoint out of range");
        ++deg[a], ++deg[b];
      }
      std::map<std::size_t, std::size_t> owner;
      for (std::size_t v = 0; v < s.n; ++v) {
        const auto& r = s.roles[v];
        if (r.part == Part::Dummy) {
          if (deg[v] != 1) res.violations.push_back({v, "dummy degree", std::to_string(deg[v])});
          continue;
        }
        if (deg[v] != r.global_index * s.r_prime)
          res.violations.push_back({v, "degree", std::to_string(deg[v]) + " != " + std::to_string(r.global_index) +
                                                     " * " + std::to_string(s.r_prime)});
        auto [it, fresh] = owner.emplace(deg[v], v);
        if (!fresh) res.violations.push_back({v, "degree collision", "shares degree with vertex " + std::to_string(it->second)});
      }
      if (is_outer_graph_json(j)) outer_graph_from_json(j);
      res.notes = {{"vertices", s.n}, {"edges", s.edges.size()}, {"gate_vertices", s.gate_vertices}};
      break;
    }
    case FileKind::Report: report_from_json(j); break;
    case FileKind::Tuple: {
      auto t = j.get<GraphTuple>();
      try {
        decode_graph(t);
      } catch (const Error& e) {
        res.violations.push_back({0, "tuple", e.what()});
      }
      break;
    }
    case FileKind::Unknown: throw FormatError("unrecognised JSON document");
  }
  return res;
}

// ---------------------------------------------------------------- compile

void write_report(const std::string& path, const CompileReport& rep) { emit(path, to_json(rep)); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Recurrent arithmetic circuits and recurrent circuit GNNs: evaluation, compilation, difftesting"};
  app.require_subcommand(1, 1);
  app.fallthrough();
  app.add_flag("--json", g_json, "Machine-readable output; errors go to stderr as JSON");

  // eval
  auto* eval = app.add_subcommand("eval", "Evaluate a circuit once");
  std::string circuit_path;
  std::vector<double> input, aux;
  bool have_aux = false;
  eval->add_option("--circuit", circuit_path, "Circuit or recurrent circuit JSON")->required();
  eval->add_option("--input", input, "Input values")->delimiter(',');
  eval->add_option("--aux", aux, "Aux memory values (defaults to the initial values)")->delimiter(',');

  // run-rec
  auto* run_rec = app.add_subcommand("run-rec", "Run a recurrent circuit until it halts");
  std::size_t budget = kDefaultBudget;
  bool trace = false;
  run_rec->add_option("--circuit", circuit_path, "Recurrent circuit JSON")->required();
  run_rec->add_option("--input", input, "Input values")->delimiter(',');
  run_rec->add_option("--budget", budget, "Iteration budget")->check(CLI::PositiveNumber);
  run_rec->add_flag("--trace", trace, "Print every iteration");

  // run-gnn
  auto* run_g = app.add_subcommand("run-gnn", "Run a recurrent circuit GNN on a graph");
  std::string gnn_path, graph_path;
  run_g->add_option("--gnn", gnn_path, "GNN JSON")->required();
  run_g->add_option("--graph", graph_path, "Graph JSON, or an outer-GNN graph artifact together with --input")
      ->required();
  run_g->add_option("--input", input, "Inputs for an outer-GNN graph artifact")->delimiter(',');
  run_g->add_option("--budget", budget, "Outer layer budget")->check(CLI::PositiveNumber);

  // encode-circuit / encode-graph
  auto* enc_c = app.add_subcommand("encode-circuit", "Symbolic graph encoding of a recurrent circuit");
  std::string out_path;
  std::optional<std::size_t> copies;
  enc_c->add_option("--circuit", circuit_path, "Recurrent circuit JSON")->required();
  enc_c->add_option("--copies", copies, "Copies of the halting output (default: derived)");
  enc_c->add_option("--out", out_path, "Output file (default stdout)");

  auto* enc_g = app.add_subcommand("encode-graph", "Graph to tuple, or tuple to graph with --decode");
  bool decode = false;
  enc_g->add_option("--graph", graph_path, "Graph JSON (or tuple JSON array with --decode)")->required();
  enc_g->add_flag("--decode", decode, "Decode a tuple back into a graph");
  enc_g->add_option("--out", out_path, "Output file (default stdout)");

  // compile
  auto* comp = app.add_subcommand("compile", "Run one of the compilers");
  std::string construction, shape_path, out_gnn, out_graph, report_path;
  bool global_acts = false;
  std::size_t check_trials = 200;
  std::uint64_t seed = 1;
  comp->add_option("construction", construction, "gnn2circ | gnn2circ-inner | gnn2circ-full | circ2gnn-outer | circ2gnn-inner")
      ->required()
      ->check(CLI::IsMember({"gnn2circ", "gnn2circ-inner", "gnn2circ-full", "circ2gnn-outer", "circ2gnn-inner"}));
  comp->add_option("--gnn", gnn_path, "Source GNN (gnn2circ*)");
  comp->add_option("--graph-shape", shape_path, "Graph fixing the structure (gnn2circ*)");
  comp->add_option("--circuit", circuit_path, "Source recurrent circuit (circ2gnn-*)");
  comp->add_option("--out", out_path, "Compiled circuit (gnn2circ*)");
  comp->add_option("--out-gnn", out_gnn, "Compiled GNN (circ2gnn-*)");
  comp->add_option("--out-graph", out_graph, "Graph artifact (circ2gnn-*)");
  comp->add_option("--input", input, "Inputs for the circ2gnn-inner graph (default zeros)")->delimiter(',');
  comp->add_flag("--global-activations", global_acts, "circ2gnn-outer: run activations as whole GNN layers");
  comp->add_option("--check-trials", check_trials, "circ2gnn-inner: sampled symmetry checks");
  comp->add_option("--report", report_path, "Compile report file (default stdout)");
  comp->add_option("--seed", seed, "Seed for sampled checks")->envname("RECCIRC_SEED");

  // compose
  auto* comp_rc = app.add_subcommand("compose", "Sequential composition g after f");
  std::string f_path, g_path;
  comp_rc->add_option("--f", f_path, "First recurrent circuit")->required();
  comp_rc->add_option("--g", g_path, "Second recurrent circuit")->required();
  comp_rc->add_option("--out", out_path, "Output file (default stdout)");

  // difftest
  auto* diff = app.add_subcommand("difftest", "Differential test of one construction");
  std::string dt_name, bundle_path;
  DiffTestConfig cfg;
  std::optional<std::size_t> trial;
  diff->add_option("name", dt_name, "thm3 | thm4 | thm5 | cor1 | thm6 | thm7 | thm8")
      ->required()
      ->check(CLI::IsMember(difftest_names()));
  diff->add_option("--trials", cfg.trials, "Number of trials");
  diff->add_option("--seed", cfg.seed, "Seed")->envname("RECCIRC_SEED");
  diff->add_option("--trial", trial, "Replay a single trial index");
  diff->add_option("--threads", cfg.threads, "Worker threads (0: all cores)");
  diff->add_option("--max-gates", cfg.max_gates, "Gate bound for generated circuits");
  diff->add_option("--max-vertices", cfg.max_vertices, "Vertex bound for generated graphs");
  diff->add_option("--max-iterations", cfg.max_iterations, "Halting bound for generated circuits");
  diff->add_option("--max-layers", cfg.max_layers, "Halting bound for generated GNNs");
  diff->add_option("--max-period", cfg.max_period, "Period bound for generated GNNs");
  diff->add_option("--inner-budget", cfg.inner_budget, "Inner budget for inner-recurrent GNNs");
  diff->add_option("--tolerance", cfg.tolerance, "Relative tolerance");
  diff->add_flag("--float", cfg.float_mode, "Draw real inputs instead of small integers");
  diff->add_option("--bundle", bundle_path, "Write the first counterexample bundle here");

  // check
  auto* chk = app.add_subcommand("check", "Validate an artifact file and scan its invariants");
  std::string any_path;
  chk->add_option("path", any_path, "Any JSON artifact");
  chk->add_option("--circuit,--gnn,--graph,--file", any_path, "Same as the positional argument");

  // export-dot
  auto* dot = app.add_subcommand("export-dot", "Graphviz rendering of a circuit or graph");
  dot->add_option("path", any_path, "Circuit, recurrent circuit, graph or symbolic graph JSON");
  dot->add_option("--circuit,--graph", any_path, "Same as the positional argument");
  dot->add_option("--out", out_path, "Output file (default stdout)");

  // fixture
  auto* fix = app.add_subcommand("fixture", "Write a built-in fixture as JSON");
  std::string fixture_name;
  double k_param = 3, scale = 1, shift = 1;
  fix->add_option("name", fixture_name, "fibonacci | decrement-counter | affine-once | never-halts | triangle | sum-gnn | fib-gnn")
      ->required()
      ->check(CLI::IsMember({"fibonacci", "decrement-counter", "affine-once", "never-halts", "triangle", "sum-gnn", "fib-gnn"}));
  fix->add_option("--k", k_param, "decrement-counter start value");
  fix->add_option("--scale", scale, "affine-once scale");
  fix->add_option("--shift", shift, "affine-once shift");
  fix->add_option("--out", out_path, "Output file (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    if (g_json)
      std::cerr << json{{"error", {{"kind", "usage"}, {"message", e.what()}, {"exit", 2}}}}.dump() << '\n';
    else
      app.exit(e);
    return 2;
  }

  try {
    if (eval->parsed()) {
      auto j = read_json_file(circuit_path);
      ExtendedCircuit c;
      std::vector<double> a = aux;
      if (kind_of(j) == FileKind::Recurrent) {
        auto r = recurrent_from_json(j);
        c = r.underlying;
        if (eval->count("--aux") == 0) a = r.initial_aux;
      } else {
        c = circuit_from_json(j);
      }
      require_valid(c);
      auto out = evaluate(c, input, a).outputs;
      if (g_json)
        std::cout << json{{"outputs", out}}.dump() << '\n';
      else
        std::cout << join(out) << '\n';
      return 0;
    }

    if (run_rec->parsed()) {
      auto r = load_recurrent(circuit_path);
      require_valid(r);
      auto res = Runner(r)(input, budget, true);
      if (g_json) {
        json j{{"outputs", res.outputs}, {"iterations", res.iterations}};
        if (trace) {
          json t = json::array();
          for (const auto& rec : res.trace.records)
            t.push_back({{"memory", rec.memory}, {"halting_values", rec.halting_values}, {"outputs", rec.outputs}});
          j["trace"] = t;
        }
        std::cout << j.dump() << '\n';
      } else {
        if (trace)
          for (std::size_t i = 0; i < res.trace.size(); ++i) {
            const auto& rec = res.trace.records[i];
            std::cout << "iteration " << i + 1 << ": memory [" << join(rec.memory) << "] halting ["
                      << join(rec.halting_values) << "] outputs [" << join(rec.outputs) << "]\n";
          }
        std::cout << join(res.outputs) << '\n';
      }
      return 0;
    }

    if (run_g->parsed()) {
      auto gnn = gnn_from_json(read_json_file(gnn_path));
      auto gj = read_json_file(graph_path);
      std::optional<OuterGraphSpec> outer;
      LabelledGraph g;
      if (is_outer_graph_json(gj)) {
        outer = outer_graph_from_json(gj);
        g = outer->instantiate(input);
      } else {
        if (run_g->count("--input")) throw UsageError("--input applies only to outer-GNN graph artifacts");
        g = graph_from_json(gj);
      }
      auto res = run_gnn(gnn, g, GnnRunOptions{budget, false});
      if (g_json) {
        json j{{"layers", res.layers}, {"graph", to_json(res.graph)}};
        if (outer) j["outputs"] = outer->outputs_of(res.graph);
        std::cout << j.dump() << '\n';
      } else {
        std::cout << join(outer ? outer->outputs_of(res.graph) : res.graph.labels) << '\n';
      }
      return 0;
    }

    if (enc_c->parsed()) {
      auto r = lower_halting(load_recurrent(circuit_path));
      if (!is_folded(r)) r = fold_iteration_counter(r);
      emit(out_path, to_json(symbolic_encode_circuit(r, copies)));
      return 0;
    }

    if (enc_g->parsed()) {
      auto j = read_json_file(graph_path);
      if (decode)
        emit(out_path, to_json(decode_graph(j.get<GraphTuple>())));
      else
        emit(out_path, json(encode_graph(graph_from_json(j))));
      return 0;
    }

    if (comp->parsed()) {
      CompileReport rep;
      if (construction.rfind("gnn2circ", 0) == 0) {
        if (gnn_path.empty() || shape_path.empty() || out_path.empty())
          throw UsageError(construction + " needs --gnn, --graph-shape and --out");
        auto gnn = gnn_from_json(read_json_file(gnn_path));
        auto shape = graph_from_json(read_json_file(shape_path));
        RecurrentCircuit rec = construction == "gnn2circ"         ? compile_gnn_outer_to_circuit(gnn, shape, &rep)
                               : construction == "gnn2circ-inner" ? compile_gnn_inner_to_circuit(gnn, shape, &rep)
                                                                  : compile_gnn_full_to_circuit(gnn, shape, &rep);
        write_json_file(out_path, to_json(rec));
      } else {
        if (circuit_path.empty() || out_gnn.empty()) throw UsageError(construction + " needs --circuit and --out-gnn");
        auto rec = load_recurrent(circuit_path);
        if (construction == "circ2gnn-outer") {
          if (out_graph.empty()) throw UsageError("circ2gnn-outer needs --out-graph");
          auto art = compile_circuit_to_outer_gnn(rec, global_acts, &rep);
          write_json_file(out_gnn, to_json(art.gnn));
          write_json_file(out_graph, to_json(art));
        } else {
          auto art = compile_symmetric_circuit_to_inner_gnn(rec, check_trials, seed, kDefaultBudget, &rep);
          write_json_file(out_gnn, to_json(art.gnn));
          if (!out_graph.empty()) {
            std::vector<double> x = comp->count("--input") ? input : std::vector<double>(art.n, 0.0);
            write_json_file(out_graph, to_json(art.graph(x)));
          }
          rep.notes["output_vertices"] = std::to_string(art.n) + ".." + std::to_string(art.n + art.m - 1);
        }
      }
      write_report(report_path, rep);
      return 0;
    }

    if (comp_rc->parsed()) {
      auto f = load_recurrent(f_path), g = load_recurrent(g_path);
      emit(out_path, to_json(compose_recurrent(f, g)));
      return 0;
    }

    if (diff->parsed()) {
      cfg.only_trial = trial;
      auto rep = difftest(dt_name, cfg);
      if (!bundle_path.empty() && rep.first) write_json_file(bundle_path, rep.first->bundle);
      if (g_json) {
        std::cout << to_json(rep).dump() << '\n';
      } else {
        std::cout << rep.name << ": " << rep.passed << "/" << rep.trials << " passed (seed " << rep.seed << ", "
                  << rep.seconds << " s)\n";
        if (rep.first)
          std::cout << "first counterexample: trial " << rep.first->trial << ": " << rep.first->message << "\n"
                    << "replay: " << rep.first->bundle["replay"].get<std::string>() << '\n';
      }
      return rep.ok() ? 0 : 1;
    }

    if (chk->parsed()) {
      if (any_path.empty()) throw UsageError("check needs a file");
      auto res = check_json(read_json_file(any_path));
      if (g_json) {
        json v = json::array();
        for (const auto& x : res.violations) v.push_back({{"kind", x.kind}, {"gate", x.gate}, {"detail", x.detail}});
        std::cout << json{{"file", any_path}, {"kind", kind_name(res.kind)}, {"ok", res.violations.empty()},
                          {"violations", v}, {"notes", res.notes}}
                         .dump()
                  << '\n';
      } else if (res.violations.empty()) {
        std::cout << "ok (" << kind_name(res.kind) << ")\n";
      } else {
        for (const auto& x : res.violations)
          std::cout << "violation: " << x.kind << " at " << x.gate << (x.detail.empty() ? "" : " (" + x.detail + ")")
                    << '\n';
      }
      return res.violations.empty() ? 0 : 1;
    }

    if (fix->parsed()) {
      json j;
      if (fixture_name == "fibonacci") j = to_json(fixtures::fibonacci());
      if (fixture_name == "decrement-counter") j = to_json(fixtures::decrement_counter(k_param));
      if (fixture_name == "affine-once") j = to_json(fixtures::affine_once(scale, shift));
      if (fixture_name == "never-halts") j = to_json(fixtures::never_halts());
      if (fixture_name == "triangle") j = to_json(LabelledGraph(3, {{0, 1}, {1, 2}, {0, 2}}, {1, 2, 3}));
      if (fixture_name == "sum-gnn") j = to_json(ac_to_cgnn(1, 1, 0, "id", 1, GnnHaltingSpec::fixed_layer(1)));
      if (fixture_name == "fib-gnn") {
        RecCGnn g;
        g.layers.push_back({CircuitFamily::from_template({"fib-capped", {{"cap", 16}, {"beta", 0}}}), "id"});
        g.halting = GnnHaltingSpec::fixed_layer(1);
        j = to_json(g);
      }
      emit(out_path, j);
      return 0;
    }

    if (dot->parsed()) {
      if (any_path.empty()) throw UsageError("export-dot needs a file");
      auto j = read_json_file(any_path);
      switch (kind_of(j)) {
        case FileKind::Circuit: emit_text(out_path, to_dot(circuit_from_json(j))); break;
        case FileKind::Recurrent: emit_text(out_path, to_dot(recurrent_from_json(j))); break;
        case FileKind::Graph: emit_text(out_path, to_dot(graph_from_json(j))); break;
        case FileKind::Symbolic: emit_text(out_path, to_dot(symbolic_from_json(j))); break;
        default: throw FormatError(std::string("cannot render a ") + kind_name(kind_of(j)) + " file");
      }
      return 0;
    }
  } catch (const UsageError& e) {
    return fail(e, 2);
  } catch (const std::exception& e) {
    return fail(e, 1);
  }
  return 2;
}
