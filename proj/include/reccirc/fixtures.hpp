#pragma once

// Small hand-built recurrent circuits used by tests, the CLI and the difftests.

#include "gadgets.hpp"

namespace reccirc::fixtures {

/// Fibonacci circuit: gates in1, aux1 (=1), aux2 (=0), add(aux1, aux2), out.
/// Recurrent edges in1<-in1, aux1<-add, aux2<-aux1; halting gate in1 with
/// C_halt(i, v) = [i == v - 1].  run(x) is the x-th Fibonacci number.
inline RecurrentCircuit fibonacci() {
  RecBuilder rb;
  auto& b = rb.b;
  GateId in1 = rb.input();
  GateId a1 = rb.aux(1.0);
  GateId a2 = rb.aux(0.0);
  GateId s = b.add({a1, a2});
  b.output(s);
  rb.feed(in1, in1);
  rb.feed(a1, s);
  rb.feed(a2, a1);
  rb.halting = {in1};

  CircuitBuilder hb;
  GateId i = hb.input(), v = hb.input();
  hb.output(eq(hb, i, hb.add({v, hb.constant(-1.0)})));
  return std::move(rb).build(HaltingSpec::circuit_backed(std::move(hb).build()));
}

/// The halting circuit of the Fibonacci fixture on its own.
inline ExtendedCircuit fibonacci_halting() { return fibonacci().halting.circuit; }

/// aux starts at k and counts down; halts when the decremented value hits 0,
/// i.e. at iteration k.  Output is in1 + (aux - 1), which equals x at halt.
inline RecurrentCircuit decrement_counter(double k) {
  RecBuilder rb;
  auto& b = rb.b;
  GateId in1 = rb.input();
  GateId a = rb.aux(k);
  GateId dec = b.add({a, b.constant(-1.0)});
  b.output(b.add({in1, dec}));
  rb.feed(in1, in1);
  rb.feed(a, dec);
  rb.halting = {dec};
  CircuitBuilder hb;
  hb.input();
  GateId v = hb.input();
  hb.output(eq_const(hb, v, 0.0));
  return std::move(rb).build(HaltingSpec::circuit_backed(std::move(hb).build()));
}

/// x -> scale * x + shift, halting at the first iteration.
inline RecurrentCircuit affine_once(double scale, double shift) {
  RecBuilder rb;
  auto& b = rb.b;
  GateId in1 = rb.input();
  b.output(b.add({b.mul({in1, b.constant(scale)}), b.constant(shift)}));
  rb.feed(in1, in1);
  return std::move(rb).build(HaltingSpec::fixed_iteration(1));
}

/// aux' = aux and a halting circuit that never fires.
inline RecurrentCircuit never_halts() {
  RecBuilder rb;
  auto& b = rb.b;
  GateId in1 = rb.input();
  GateId a = rb.aux(0.0);
  b.output(b.add({in1, a}));
  rb.feed(in1, in1);
  rb.feed(a, a);
  rb.halting = {a};
  CircuitBuilder hb;
  hb.input();
  hb.input();
  hb.output(hb.constant(0.0));
  return std::move(rb).build(HaltingSpec::circuit_backed(std::move(hb).build()));
}

}  // namespace reccirc::fixtures
