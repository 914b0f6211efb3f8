#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "fixtures.hpp"
#include "treeq/cli.hpp"
#include "treeq/model.hpp"

namespace treeq {
namespace {

using testing::data_path;
using nlohmann::json;

struct Result {
  int code = -1;
  std::string out;
  std::string err;

  std::vector<json> lines() const {
    std::vector<json> v;
    std::istringstream in(out);
    for (std::string line; std::getline(in, line);)
      if (!line.empty() && line[0] == '{') v.push_back(json::parse(line));
    return v;
  }
  json last_of(const std::string& type) const {
    auto v = lines();
    for (auto it = v.rbegin(); it != v.rend(); ++it)
      if ((*it)["type"] == type) return *it;
    return {};
  }
};

Result treeq(std::vector<std::string> args) {
  args.insert(args.begin(), "treeq");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  Result r;
  r.code = cli::main(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::filesystem::path scratch(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("treeq-cli-" + std::to_string(::getpid()));
  std::filesystem::create_directories(dir);
  return dir / name;
}

void write(const std::filesystem::path& p, const std::string& text) { std::ofstream(p) << text; }

TEST(Cli, VerifySat) {
  auto r = treeq({"verify", "--model", data_path("fig1.model.json"), "--question", data_path("fig1_sat.question.json"),
                  "--verify-report"});
  ASSERT_EQ(r.code, cli::kSat) << r.err;
  json s = r.last_of("summary");
  EXPECT_EQ(s["verdict"], "sat");
  EXPECT_EQ(s["witness"]["outputs"][0], 6);
  EXPECT_EQ(s["witness"]["instances"][0][1], false);
  EXPECT_EQ(r.last_of("verification")["ok"], true);
}

TEST(Cli, VerifyUnsat) {
  auto r = treeq({"verify", "--model", data_path("fig1.model.json"), "--question", data_path("fig1_unsat.question.json"),
                  "--stop", "exhaustive", "--presplit-depth", "2", "--verify-report"});
  ASSERT_EQ(r.code, cli::kUnsat) << r.err;
  json v = r.last_of("verification");
  EXPECT_EQ(v["ok"], true);
  EXPECT_GT(v["unsat_checked"].get<int>(), 1);
}

TEST(Cli, MissingSolver) {
  auto r = treeq({"verify", "--model", data_path("fig1.model.json"), "--question", data_path("fig1_sat.question.json"),
                  "--solver-cmd", "/nonexistent/z3 -in"});
  EXPECT_EQ(r.code, cli::kError);
  EXPECT_NE(r.err.find("cannot start solver"), std::string::npos) << r.err;
}

TEST(Cli, BadInputs) {
  EXPECT_EQ(treeq({"verify", "--model", data_path("empty.model.json"), "--question",
                   data_path("fig1_sat.question.json")}).code,
            cli::kError);
  EXPECT_EQ(treeq({"verify", "--model", data_path("fig1.model.json")}).code, cli::kError);
  EXPECT_EQ(treeq({"frobnicate"}).code, cli::kError);
  auto bad = scratch("bad.question.json");
  write(bad, R"({"instances":1,"question":{"cmp":{"lhs":{"out":3},"op":">","rhs":1}}})");
  auto r = treeq({"verify", "--model", data_path("fig1.model.json"), "--question", bad.string()});
  EXPECT_EQ(r.code, cli::kError);
  EXPECT_NE(r.err.find("bad.question.json"), std::string::npos) << r.err;
}

TEST(Cli, AdversarialFlip) {
  // f(1.5, 2.5, 3.5) = -1.75; moving x0 above 2 flips the sign.
  auto r = treeq({"adversarial", "--model", data_path("stumps3.model.json"), "--instance",
                  data_path("stumps3.instance.json"), "--delta", "0.75", "--verify-report"});
  ASSERT_EQ(r.code, cli::kSat) << r.err;
  json w = r.last_of("summary")["witness"];
  EXPECT_GE(w["outputs"][0].get<double>(), 0.0);
  auto small = treeq({"adversarial", "--model", data_path("stumps3.model.json"), "--instance",
                      data_path("stumps3.instance.json"), "--delta", "0.4"});
  EXPECT_EQ(small.code, cli::kUnsat) << small.err;
}

TEST(Cli, AdversarialZeroDelta) {
  auto r = treeq({"adversarial", "--model", data_path("stumps3.model.json"), "--instance",
                  data_path("stumps3.instance.json"), "--delta", "0"});
  EXPECT_EQ(r.code, cli::kUnsat) << r.err;
}

TEST(Cli, AdversarialHybridBudget) {
  auto dump = scratch("hybrid");
  auto r = treeq({"adversarial", "--model", data_path("stumps3.model.json"), "--instance",
                  data_path("stumps3.instance.json"), "--delta", "75", "--l1-budget", "3000", "--dump-smt",
                  dump.string()});
  ASSERT_EQ(r.code, cli::kSat) << r.err;
  std::ifstream f(dump / "sub-0.smt2");
  std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  EXPECT_NE(text.find("(declare-fun d0 () Real)"), std::string::npos);
  EXPECT_NE(text.find("3000"), std::string::npos);
  // a budget too small to reach the threshold
  auto tight = treeq({"adversarial", "--model", data_path("stumps3.model.json"), "--instance",
                      data_path("stumps3.instance.json"), "--delta", "75", "--l1-budget", "0.5"});
  EXPECT_EQ(tight.code, cli::kUnsat) << tight.err;
}

TEST(Cli, Monotone) {
  EXPECT_EQ(treeq({"monotone", "--model", data_path("fig1.model.json"), "--attr", "0"}).code, cli::kUnsat);
  auto r = treeq({"monotone", "--model", data_path("fig1.model.json"), "--attr", "1"});
  ASSERT_EQ(r.code, cli::kSat);
  json w = r.last_of("summary")["witness"];
  EXPECT_GT(w["outputs"][0].get<double>(), w["outputs"][1].get<double>());
  EXPECT_EQ(treeq({"monotone", "--model", data_path("constant.model.json"), "--attr", "0"}).code, cli::kUnsat);
}

TEST(Cli, Stats) {
  auto r = treeq({"stats", "--model", data_path("fig1.model.json")});
  ASSERT_EQ(r.code, 0) << r.err;
  json j = json::parse(r.out);
  EXPECT_EQ(j["leaves"], 5);
  EXPECT_EQ(j["splits"], 3);
  auto q = treeq({"stats", "--model", data_path("fig1.model.json"), "--question", data_path("fig1_sat.question.json")});
  EXPECT_EQ(json::parse(q.out)["leaves_after"], 3);
  EXPECT_EQ(treeq({"stats", "--model", data_path("empty.model.json")}).code, cli::kError);
}

TEST(Cli, BenchTrivial) {
  auto r = treeq({"bench", "--model", data_path("fig1.model.json"), "--question", data_path("fig1_sat.question.json"),
                  "--cap", "20"});
  ASSERT_EQ(r.code, 0) << r.err;
  json j = json::parse(r.out);
  ASSERT_EQ(j["modes"].size(), 3u);
  for (const auto& m : j["modes"]) {
    EXPECT_EQ(m["verdict"], "sat");
    EXPECT_EQ(m["timed_out"], false);
  }
  EXPECT_EQ(j["modes"][0]["leaves_after_root_prune"], 5);
  EXPECT_EQ(j["modes"][1]["leaves_after_root_prune"], 3);
}

TEST(Cli, CheckpointAndResume) {
  auto ck = scratch("ck.json");
  auto first = treeq({"verify", "--model", data_path("fig1.model.json"), "--question",
                      data_path("fig1_unsat.question.json"), "--subproblem-timeout", "0", "--max-depth", "0",
                      "--checkpoint", ck.string()});
  ASSERT_EQ(first.code, cli::kUnknown) << first.err;
  auto second = treeq({"verify", "--model", data_path("fig1.model.json"), "--question",
                       data_path("fig1_unsat.question.json"), "--resume", ck.string(), "--stop", "exhaustive"});
  EXPECT_EQ(second.code, cli::kUnsat) << second.err;
}

TEST(Cli, OutputFile) {
  auto path = scratch("reports.ndjson");
  auto r = treeq({"verify", "--model", data_path("fig1.model.json"), "--question", data_path("fig1_sat.question.json"),
                  "--output", path.string()});
  ASSERT_EQ(r.code, cli::kSat);
  EXPECT_TRUE(r.out.empty());
  std::ifstream f(path);
  std::string first;
  std::getline(f, first);
  EXPECT_EQ(json::parse(first)["type"], "report");
}

TEST(Cli, Convert) {
  auto path = scratch("converted.json");
  auto r = treeq({"convert", "--input", data_path("xgb_dump.json"), "--output", path.string(), "--base-score", "0.5"});
  ASSERT_EQ(r.code, 0) << r.err;
  Ensemble e = load_ensemble_file(path.string());
  EXPECT_EQ(e.num_trees(), 2u);
  EXPECT_EQ(e.num_attributes(), 3u);
  EXPECT_EQ(e.attr_type(AttrId(2)), AttrType::Bool);
  EXPECT_EQ(evaluate(e, Instance{0.0, -2.0, 0.0}), 0.5 - 0.4 + 0.2);
}

}  // namespace
}  // namespace treeq
