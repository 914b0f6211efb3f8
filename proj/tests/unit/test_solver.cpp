#include <gtest/gtest.h>

#include <thread>

#include "fixtures.hpp"
#include "treeq/encode.hpp"
#include "treeq/error.hpp"
#include "treeq/solver.hpp"

namespace treeq {
namespace {

using namespace std::chrono_literals;
using testing::figure_one;

SmtScript tiny_script() {
  SmtScript s;
  s.text = "(set-logic QF_LRA)\n(declare-fun x () Real)\n(assert (> x 1))\n(check-sat)\n(get-value (x))\n";
  s.declared = {{"x", Sort::Real}};
  return s;
}

SolverOptions slow(const std::string& marker, bool ignore_term = false) {
  SolverOptions o;
  o.command = std::string(ignore_term ? "env IGNORE_TERM=1 " : "") + "sh " + testing::data_path("slow_solver.sh") + " " + marker;
  o.grace = 500ms;
  return o;
}

TEST(SolverOutput, SatWithModel) {
  auto v = parse_solver_output("sat\n((a0_0 (- 1.5)) (a1_0 false) (f_0 (/ 13 2)) (d0 (+ 1 2)))\n");
  EXPECT_EQ(v.status, SolverStatus::Sat);
  EXPECT_EQ(std::get<Rational>(v.model.at("a0_0")), Rational(-3, 2));
  EXPECT_EQ(std::get<bool>(v.model.at("a1_0")), false);
  EXPECT_EQ(std::get<Rational>(v.model.at("f_0")), Rational(13, 2));
  EXPECT_EQ(std::get<Rational>(v.model.at("d0")), Rational(3));
}

TEST(SolverOutput, Verdicts) {
  EXPECT_EQ(parse_solver_output("unsat\n(error \"model is not available\")\n").status, SolverStatus::Unsat);
  EXPECT_EQ(parse_solver_output("unknown\n").status, SolverStatus::Unknown);
  EXPECT_EQ(parse_solver_output("timeout\n").status, SolverStatus::Unknown);
  EXPECT_EQ(parse_solver_output("sat\n", false).status, SolverStatus::Sat);
}

TEST(SolverOutput, ProtocolErrors) {
  EXPECT_THROW(parse_solver_output(""), ProtocolError);
  EXPECT_THROW(parse_solver_output("hello world\n"), ProtocolError);
  EXPECT_THROW(parse_solver_output("sat\n"), ProtocolError);
  EXPECT_THROW(parse_solver_output("sat\n((x (foo 1)))\n"), ProtocolError);
  EXPECT_THROW(parse_solver_output("sat\n((x 1)\n"), ProtocolError);
}

TEST(Decode, WorkedExampleModel) {
  auto t = single_instance_question(figure_one(), {lt(attr(0, 0), 2.0), gt(out(0), 5.0)});
  auto v = parse_solver_output("sat\n((a0_0 0) (a1_0 false) (w0_0 1) (w1_0 5) (f_0 6))");
  DecodedModel m = decode_model(v, t);
  EXPECT_EQ(m.instances[0], (ExactInstance{0, 0}));
  EXPECT_EQ(m.outputs[0], 6);
  EXPECT_FALSE(m.defaulted[0][0]);

  auto partial = parse_solver_output("sat\n((f_0 6))");
  DecodedModel d = decode_model(partial, t);
  EXPECT_TRUE(d.defaulted[0][0]);
  EXPECT_TRUE(d.defaulted[0][1]);
  EXPECT_EQ(d.instances[0], (ExactInstance{0, 0}));

  EXPECT_THROW(decode_model(parse_solver_output("sat\n((a0_0 1))"), t), ProtocolError);
  EXPECT_THROW(decode_model(parse_solver_output("sat\n((a1_0 1) (f_0 2))"), t), ProtocolError);
}

TEST(Decode, AuxIgnoredForInstances) {
  Ensemble flat(std::vector<AttrType>{AttrType::Real}, {Tree{{Node::make_leaf(0)}}});
  AdversarialSpec spec;
  spec.original = {0.0};
  spec.linf = 1.0;
  spec.l1_budget = 0.5;
  auto t = adversarial_task({std::make_shared<const Ensemble>(flat)}, spec);
  DecodedModel m = decode_model(parse_solver_output("sat\n((a0_0 (/ 1 4)) (f_0 0))"), t);
  EXPECT_EQ(m.instances[0][0], Rational(1, 4));
  EXPECT_TRUE(m.aux_real.empty());
}

TEST(Solve, RealSolver) {
  auto v = solve(tiny_script(), 10s, {});
  ASSERT_EQ(v.status, SolverStatus::Sat) << v.diagnostics;
  EXPECT_GT(std::get<Rational>(v.model.at("x")), 1);
  EXPECT_FALSE(v.timed_out);
}

TEST(Solve, ZeroTimeoutIsUnknown) {
  SolverOptions missing;
  missing.command = "/nonexistent/solver";
  auto v = solve(tiny_script(), 0ms, missing);
  EXPECT_EQ(v.status, SolverStatus::Unknown);
  EXPECT_TRUE(v.timed_out);
}

TEST(Solve, MissingBinary) {
  SolverOptions missing;
  missing.command = "/nonexistent/solver -in";
  EXPECT_THROW(solve(tiny_script(), 1s, missing), SolverUnavailable);
}

TEST(Solve, GarbageOutput) {
  SolverOptions garbage;
  garbage.command = "sh -c 'cat >/dev/null; echo garbage'";
  try {
    solve(tiny_script(), 5s, garbage);
    FAIL() << "expected ProtocolError";
  } catch (const ProtocolError& e) {
    EXPECT_NE(e.diagnostics().find("garbage"), std::string::npos);
  }
}

TEST(Solve, SlowSolverIsTerminated) {
  const std::string marker = "41" + std::to_string(::getpid());
  auto start = std::chrono::steady_clock::now();
  auto v = solve(tiny_script(), 100ms, slow(marker));
  auto took = std::chrono::steady_clock::now() - start;
  EXPECT_EQ(v.status, SolverStatus::Unknown);
  EXPECT_TRUE(v.timed_out);
  EXPECT_LT(took, 100ms + 500ms + 400ms);
  EXPECT_EQ(testing::count_processes_with("30." + marker), 0u);
}

TEST(Solve, TermIgnoringSolverIsKilled) {
  const std::string marker = "42" + std::to_string(::getpid());
  auto start = std::chrono::steady_clock::now();
  auto v = solve(tiny_script(), 100ms, slow(marker, true));
  auto took = std::chrono::steady_clock::now() - start;
  EXPECT_EQ(v.status, SolverStatus::Unknown);
  EXPECT_GE(took, 100ms + 500ms);
  EXPECT_LT(took, 100ms + 500ms + 400ms);
  EXPECT_EQ(testing::count_processes_with("30." + marker), 0u);
}

TEST(Solve, StopTokenCancels) {
  const std::string marker = "43" + std::to_string(::getpid());
  std::stop_source source;
  std::jthread stopper([&] {
    std::this_thread::sleep_for(100ms);
    source.request_stop();
  });
  auto start = std::chrono::steady_clock::now();
  auto v = solve(tiny_script(), 20s, slow(marker), source.get_token());
  EXPECT_LT(std::chrono::steady_clock::now() - start, 2s);
  EXPECT_TRUE(v.cancelled);
  EXPECT_EQ(v.status, SolverStatus::Unknown);
  EXPECT_EQ(testing::count_processes_with("30." + marker), 0u);
}

}  // namespace
}  // namespace treeq
