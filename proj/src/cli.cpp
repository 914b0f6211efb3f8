#include "treeq/cli.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>

#include "treeq/encode.hpp"
#include "treeq/error.hpp"
#include "treeq/oracle.hpp"
#include "treeq/question.hpp"
#include "treeq/reduce.hpp"
#include "treeq/search.hpp"

namespace treeq::cli {

namespace {

using json = nlohmann::json;
using Models = std::vector<std::shared_ptr<const Ensemble>>;

struct RunOptions {
  std::vector<std::string> models;
  std::string question;
  std::optional<double> timeout;  // seconds, overall
  double subproblem_timeout = 5.0;
  double timeout_growth = 1.0;
  int workers = 1;
  std::string solver_cmd;
  int max_depth = 60;
  std::string stop = "first-sat";
  double budget = 20 * 60;
  std::string dump_smt;
  std::string checkpoint;
  std::string resume;
  bool verify_report = false;
  bool deep_prune = false;
  int presplit_depth = 0;
  std::string output;
};

void add_run_options(CLI::App* cmd, RunOptions& o, bool question) {
  if (question) cmd->add_option("--question", o.question, "Question file (JSON)")->required()->check(CLI::ExistingFile);
  cmd->add_option("--timeout", o.timeout, "Overall wall-clock cap in seconds");
  cmd->add_option("--subproblem-timeout", o.subproblem_timeout, "Per-subproblem solver timeout in seconds")
      ->check(CLI::NonNegativeNumber);
  cmd->add_option("--timeout-growth", o.timeout_growth, "Timeout multiplier per divide step")->check(CLI::Range(1.0, 1e6));
  cmd->add_option("--workers", o.workers, "Parallel solver processes")->check(CLI::PositiveNumber);
  cmd->add_option("--solver-cmd", o.solver_cmd, "Solver command; {timeout_ms} is substituted");
  cmd->add_option("--max-depth", o.max_depth, "Maximum number of divide steps")->check(CLI::NonNegativeNumber);
  cmd->add_option("--stop", o.stop, "first-sat, exhaustive or budget")
      ->check(CLI::IsMember({"first-sat", "exhaustive", "budget"}));
  cmd->add_option("--budget", o.budget, "Total seconds for --stop budget")->check(CLI::PositiveNumber);
  cmd->add_option("--dump-smt", o.dump_smt, "Directory receiving one SMT-LIB2 script per subproblem");
  cmd->add_option("--checkpoint", o.checkpoint, "Write unresolved subdomains here when done");
  cmd->add_option("--resume", o.resume, "Restart only the subdomains of this checkpoint")->check(CLI::ExistingFile);
  cmd->add_flag("--verify-report", o.verify_report, "Re-check witnesses and small unsat subdomains before exiting");
  cmd->add_flag("--deep-prune", o.deep_prune, "Drop branches a short solver call proves irrelevant");
  cmd->add_option("--presplit-depth", o.presplit_depth, "Divide without solving up to this depth")
      ->check(CLI::NonNegativeNumber);
  cmd->add_option("--output", o.output, "Write NDJSON reports here instead of stdout");
}

std::chrono::milliseconds to_ms(double seconds) {
  return std::chrono::milliseconds(static_cast<std::int64_t>(std::llround(seconds * 1000.0)));
}

SearchConfig make_config(const RunOptions& o) {
  SearchConfig cfg;
  cfg.subproblem_timeout = to_ms(o.subproblem_timeout);
  cfg.timeout_growth = o.timeout_growth;
  cfg.max_depth = o.max_depth;
  cfg.workers = o.workers;
  cfg.stop_mode = stop_mode_from_string(o.stop);
  cfg.budget = to_ms(o.budget);
  if (o.timeout) cfg.time_limit = to_ms(*o.timeout);
  cfg.presplit_depth = o.presplit_depth;
  cfg.deep_prune = o.deep_prune;
  if (!o.solver_cmd.empty()) cfg.solver.command = o.solver_cmd;
  cfg.dump_smt = o.dump_smt;
  if (cfg.stop_mode == StopMode::Budget && cfg.budget < cfg.subproblem_timeout) cfg.subproblem_timeout = cfg.budget;
  cfg.validate();
  return cfg;
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& ex) {
    throw ParseError(path + ": " + ex.what());
  }
}

Models load_models(const std::vector<std::string>& paths) {
  if (paths.empty()) throw ValidationError("at least one --model is required");
  Models out;
  for (const std::string& p : paths) out.push_back(std::make_shared<const Ensemble>(load_ensemble_file(p)));
  return out;
}

VerificationTask load_task(const std::string& path, const Models& models) {
  json j = read_json_file(path);
  try {
    return task_from_json(j, models);
  } catch (const Error& ex) {
    throw ValidationError(path + ": " + ex.what());
  }
}

int exit_code(SolverStatus s) {
  switch (s) {
    case SolverStatus::Sat:
      return kSat;
    case SolverStatus::Unsat:
      return kUnsat;
    case SolverStatus::Unknown:
      return kUnknown;
  }
  return kUnknown;
}

bool small_scale(const VerificationTask& task) {
  std::size_t attrs = 0;
  for (const auto& e : task.instances) {
    double product = 1.0;
    for (const Tree& t : e->trees()) product *= static_cast<double>(t.leaf_count());
    if (product > kComboGuard) return false;
    attrs += e->num_attributes();
  }
  return attrs <= 8;
}

/// Independent re-check of emitted reports; returns a verification record.
json verify_reports(const VerificationTask& task, const std::vector<SubproblemReport>& reports, bool& ok) {
  json failures = json::array();
  std::size_t sat = 0, unsat = 0, skipped = 0;
  const bool small = small_scale(task);
  for (const SubproblemReport& r : reports) {
    if (r.status == ReportStatus::Sat) {
      ++sat;
      bool good = witness_holds(task, r);
      for (std::size_t i = 0; good && i < task.num_instances(); ++i)
        good = path_evaluate(task.ensemble(i), r.witnesses[i]) == r.outputs[i];
      if (!good) failures.push_back({{"report", r.id}, {"problem", "witness does not re-evaluate"}});
    } else if (r.status == ReportStatus::Unsat) {
      if (!small) {
        ++skipped;
        continue;
      }
      try {
        GridResult g = grid_check(task, r.boxes, 1);
        ++unsat;
        if (g.found) failures.push_back({{"report", r.id}, {"problem", "grid point satisfies the question"}});
      } catch (const UnsupportedQuestion&) {
        ++skipped;
      }
    }
  }
  ok = failures.empty();
  return {{"type", "verification"},
          {"sat_checked", sat},
          {"unsat_checked", unsat},
          {"skipped", skipped},
          {"ok", ok},
          {"failures", failures}};
}

/// Shared tail of verify / adversarial / monotone.
int execute(const VerificationTask& task, const RunOptions& o, std::ostream& out, std::ostream& err,
            std::stop_token stop) {
  SearchConfig cfg = make_config(o);
  std::optional<Checkpoint> cp;
  if (!o.resume.empty()) cp = checkpoint_from_json(read_json_file(o.resume), task);

  std::ofstream file;
  std::ostream* sink_stream = &out;
  if (!o.output.empty()) {
    file.open(o.output);
    if (!file) throw ValidationError("cannot write '" + o.output + "'");
    sink_stream = &file;
  }
  std::vector<SubproblemReport> kept;
  auto sink = [&](const SubproblemReport& r) {
    *sink_stream << report_to_json(r, task).dump() << '\n' << std::flush;
    if (o.verify_report && r.terminal()) kept.push_back(r);
  };

  Summary s = cp ? resume(*cp, task, cfg, sink, stop) : run(task, cfg, sink, stop);
  *sink_stream << summary_to_json(s, task).dump() << '\n' << std::flush;

  if (!o.checkpoint.empty()) {
    std::ofstream ck(o.checkpoint);
    if (!ck) throw ValidationError("cannot write checkpoint '" + o.checkpoint + "'");
    ck << checkpoint_to_json(make_checkpoint(s)).dump(2) << '\n';
  }
  if (o.verify_report) {
    bool ok = true;
    json v = verify_reports(task, kept, ok);
    *sink_stream << v.dump() << '\n' << std::flush;
    if (!ok) {
      err << "treeq: report verification failed\n";
      return kReportCheckFailed;
    }
  }
  return exit_code(s.verdict);
}

// adversarial ---------------------------------------------------------------------

struct AdversarialOptions {
  std::string instance;
  double delta = 0.0;
  std::optional<double> l1_budget;
  std::optional<double> min_output;
  std::optional<double> max_output;
  std::optional<std::uint32_t> target_class;
  std::optional<double> confidence;
  std::optional<std::uint32_t> source_class;
  std::optional<double> source_max_prob;
};

Formula adversarial_label(const AdversarialOptions& a, const Models& models, const Instance& x) {
  std::vector<Formula> parts;
  const auto C = static_cast<std::uint32_t>(models.size());
  if (a.min_output) parts.push_back(gt(out(0), *a.min_output));
  if (a.max_output) parts.push_back(lt(out(0), *a.max_output));
  if (a.confidence) {
    if (C == 1) {
      parts.push_back(a.target_class.value_or(1) == 1 ? ge(out(0), logit(*a.confidence))
                                                      : le(out(0), -logit(*a.confidence)));
    } else {
      if (!a.target_class) throw ValidationError("--confidence needs --target-class with several models");
      parts.push_back(class_confidence_at_least(*a.target_class, C, *a.confidence));
    }
  }
  if (a.source_class || a.source_max_prob) {
    if (!a.source_class || !a.source_max_prob || !a.target_class || C < 2)
      throw ValidationError("--source-class and --source-max-prob need --target-class and one model per class");
    parts.push_back(class_probability_at_most(*a.source_class, *a.target_class, *a.source_max_prob));
  }
  if (a.target_class && !a.confidence && C > 1) {
    for (std::uint32_t j = 0; j < C; ++j)
      if (j != *a.target_class) parts.push_back(gt(out(*a.target_class), out(j)));
  }
  if (!parts.empty()) return all_of(std::move(parts));

  // Default: a different prediction than the original instance gets.
  if (C == 1) return evaluate(*models[0], x) >= 0.0 ? lt(out(0), 0.0) : ge(out(0), 0.0);
  std::uint32_t pred = 0;
  double best = evaluate(*models[0], x);
  for (std::uint32_t j = 1; j < C; ++j) {
    double f = evaluate(*models[j], x);
    if (f > best) {
      best = f;
      pred = j;
    }
  }
  std::vector<Formula> other;
  for (std::uint32_t j = 0; j < C; ++j)
    if (j != pred) other.push_back(gt(out(j), out(pred)));
  return any_of(std::move(other));
}

// bench / stats -------------------------------------------------------------------

json bench(const VerificationTask& task, const RunOptions& o, const std::vector<std::string>& modes, double cap,
           std::stop_token stop) {
  json rows = json::array();
  for (const std::string& mode : modes) {
    RunOptions mo = o;
    mo.timeout = cap;
    SearchConfig cfg = make_config(mo);
    if (mode == "none") {
      cfg.prune = false;
      cfg.divide = false;
      cfg.subproblem_timeout = to_ms(cap);
    } else if (mode == "prune") {
      cfg.prune = true;
      cfg.divide = false;
      cfg.subproblem_timeout = to_ms(cap);
    } else if (mode == "prune+dc") {
      cfg.prune = true;
      cfg.divide = true;
    } else {
      throw ValidationError("unknown bench mode '" + mode + "' (expected none, prune or prune+dc)");
    }
    std::size_t after = 0;
    for (std::uint32_t i = 0; i < task.num_instances(); ++i) {
      std::optional<DomainBox> b = cfg.prune ? box_approximation(task, i)
                                             : DomainBox::unconstrained(task.ensemble(i).attr_types());
      after += b ? prune(task.ensemble(i), *b).pruned_leaves : 0;
    }
    std::size_t before = 0;
    for (const auto& e : task.instances) before += leaf_count(*e);
    Summary s = run(task, cfg, {}, stop);
    const bool timed_out = s.verdict == SolverStatus::Unknown;
    rows.push_back({{"mode", mode},
                    {"verdict", to_string(s.verdict)},
                    {"seconds", s.elapsed.count()},
                    {"timed_out", timed_out},
                    {"stop_reason", s.stop_reason},
                    {"subproblems", s.sat + s.unsat + s.unknown_split + s.unknown_terminal},
                    {"leaves_before", before},
                    {"leaves_after_root_prune", after}});
    if (stop.stop_requested()) break;
  }
  return {{"type", "bench"}, {"cap_seconds", cap}, {"modes", rows}};
}

json stats(const Ensemble& e, const std::optional<VerificationTask>& task, std::uint32_t instance) {
  json j;
  j["trees"] = e.num_trees();
  j["attributes"] = e.num_attributes();
  j["leaves"] = leaf_count(e);
  j["splits"] = collect_splits(e).size();
  std::optional<DomainBox> box = DomainBox::unconstrained(e.attr_types());
  if (task) {
    if (instance >= task->num_instances()) throw ValidationError("--instance-index out of range");
    box = box_approximation(*task, instance);
  }
  json per_tree = json::array();
  if (!box) {
    j["box"] = "empty";
    j["leaves_after"] = 0;
    j["prune_ratio"] = 1.0;
    for (std::size_t m = 0; m < e.num_trees(); ++m)
      per_tree.push_back({{"tree", m}, {"leaves_before", e.tree(m).leaf_count()}, {"leaves_after", 0}});
  } else {
    PrunedEnsemble p = prune(e, *box);
    j["box"] = trail_to_json(box->trail());
    j["leaves_after"] = p.pruned_leaves;
    j["prune_ratio"] =
        p.original_leaves == 0 ? 0.0 : 1.0 - static_cast<double>(p.pruned_leaves) / static_cast<double>(p.original_leaves);
    for (std::size_t m = 0; m < e.num_trees(); ++m)
      per_tree.push_back({{"tree", m},
                          {"leaves_before", e.tree(m).leaf_count()},
                          {"leaves_after", p.ensemble.tree(m).leaf_count()}});
  }
  j["per_tree"] = std::move(per_tree);
  return j;
}

}  // namespace

int main(int argc, const char* const* argv, std::ostream& out, std::ostream& err, std::stop_token stop) {
  CLI::App app{"Verify questions about additive tree ensembles with an SMT solver"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "treeq 0.1.0");

  RunOptions run_opts;
  auto* verify = app.add_subcommand("verify", "Search for instances satisfying a question");
  verify->add_option("--model", run_opts.models, "Model file (JSON); repeat for one model per instance")
      ->required()
      ->check(CLI::ExistingFile);
  add_run_options(verify, run_opts, true);

  AdversarialOptions adv;
  auto* adversarial = app.add_subcommand("adversarial", "Search for a perturbed instance with a different prediction");
  adversarial->add_option("--model", run_opts.models, "Model file; repeat for one model per class")
      ->required()
      ->check(CLI::ExistingFile);
  adversarial->add_option("--instance", adv.instance, "Original instance (JSON)")->required()->check(CLI::ExistingFile);
  adversarial->add_option("--delta", adv.delta, "Per-attribute bound |x - x'| < delta")
      ->required()
      ->check(CLI::NonNegativeNumber);
  adversarial->add_option("--l1-budget", adv.l1_budget, "Total deviation budget")->check(CLI::NonNegativeNumber);
  adversarial->add_option("--min-output", adv.min_output, "Require output > value");
  adversarial->add_option("--max-output", adv.max_output, "Require output < value");
  adversarial->add_option("--target-class", adv.target_class, "Class the perturbed instance should get");
  adversarial->add_option("--confidence", adv.confidence, "Minimum probability of the target class")
      ->check(CLI::Range(0.0, 1.0));
  adversarial->add_option("--source-class", adv.source_class, "Class whose probability is bounded");
  adversarial->add_option("--source-max-prob", adv.source_max_prob, "Maximum probability of the source class")
      ->check(CLI::Range(0.0, 1.0));
  add_run_options(adversarial, run_opts, false);

  std::uint32_t mono_attr = 0;
  auto* monotone = app.add_subcommand("monotone", "Check that the output never decreases in one attribute");
  monotone->add_option("--model", run_opts.models, "Model file")->required()->check(CLI::ExistingFile);
  monotone->add_option("--attr", mono_attr, "Attribute index")->required();
  add_run_options(monotone, run_opts, false);

  std::vector<std::string> modes{"none", "prune", "prune+dc"};
  double cap = 60.0;
  auto* benchmark = app.add_subcommand("bench", "Time the solving modes against a shared cap");
  benchmark->add_option("--model", run_opts.models, "Model file")->required()->check(CLI::ExistingFile);
  benchmark->add_option("--modes", modes, "Subset of none, prune, prune+dc")->delimiter(',');
  benchmark->add_option("--cap", cap, "Wall-clock cap per mode in seconds")->check(CLI::PositiveNumber);
  add_run_options(benchmark, run_opts, true);

  std::string stats_model, stats_question;
  std::uint32_t stats_instance = 0;
  auto* stats_cmd = app.add_subcommand("stats", "Leaf counts before and after pruning");
  stats_cmd->add_option("--model", stats_model, "Model file")->required()->check(CLI::ExistingFile);
  stats_cmd->add_option("--question", stats_question, "Question whose box is used for pruning")
      ->check(CLI::ExistingFile);
  stats_cmd->add_option("--instance-index", stats_instance, "Which instance's box to use");

  std::string conv_in, conv_out;
  std::vector<std::uint32_t> conv_bool;
  XgboostImportOptions xgb;
  std::optional<std::size_t> conv_attrs;
  auto* convert = app.add_subcommand("convert", "Convert an XGBoost JSON dump into a model file");
  convert->add_option("--input", conv_in, "Output of dump_model(..., dump_format='json')")
      ->required()
      ->check(CLI::ExistingFile);
  convert->add_option("--output", conv_out, "Model file to write (stdout if omitted)");
  convert->add_option("--num-attributes", conv_attrs, "Number of attributes");
  convert->add_option("--bool-attrs", conv_bool, "Indicator attributes")->delimiter(',');
  convert->add_option("--base-score", xgb.base_score, "Base margin added to every prediction");
  convert->add_option("--num-class", xgb.num_class, "Number of classes")->check(CLI::PositiveNumber);
  convert->add_option("--class-index", xgb.class_index, "Class whose trees are extracted");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    std::ostringstream o, er;
    int rc = app.exit(e, o, er);
    out << o.str();
    err << er.str();
    return rc == 0 ? 0 : kError;
  }

  try {
    if (*verify) {
      Models models = load_models(run_opts.models);
      VerificationTask task = load_task(run_opts.question, models);
      return execute(task, run_opts, out, err, stop);
    }
    if (*adversarial) {
      Models models = load_models(run_opts.models);
      Instance x = instance_from_json(read_json_file(adv.instance), *models[0]);
      AdversarialSpec spec;
      spec.original = x;
      spec.linf = adv.delta;
      spec.l1_budget = adv.l1_budget;
      spec.label = adversarial_label(adv, models, x);
      VerificationTask task = adversarial_task(models, spec);
      return execute(task, run_opts, out, err, stop);
    }
    if (*monotone) {
      Models models = load_models(run_opts.models);
      VerificationTask task = monotonicity_task(models[0], AttrId(mono_attr));
      return execute(task, run_opts, out, err, stop);
    }
    if (*benchmark) {
      Models models = load_models(run_opts.models);
      VerificationTask task = load_task(run_opts.question, models);
      out << bench(task, run_opts, modes, cap, stop).dump() << '\n';
      return 0;
    }
    if (*stats_cmd) {
      auto e = std::make_shared<const Ensemble>(load_ensemble_file(stats_model));
      std::optional<VerificationTask> task;
      if (!stats_question.empty()) task = load_task(stats_question, {e});
      out << stats(*e, task, stats_instance).dump() << '\n';
      return 0;
    }
    if (*convert) {
      xgb.num_attributes = conv_attrs;
      xgb.bool_attributes = conv_bool;
      Ensemble e = import_xgboost_dump(read_json_file(conv_in), xgb);
      if (conv_out.empty()) {
        out << save_ensemble(e) << '\n';
      } else {
        std::ofstream f(conv_out);
        if (!f) throw ValidationError("cannot write '" + conv_out + "'");
        f << ensemble_to_json(e).dump(2) << '\n';
      }
      return 0;
    }
  } catch (const SolverUnavailable& ex) {
    err << "treeq: solver unavailable: " << ex.what() << '\n';
    return kError;
  } catch (const ProtocolError& ex) {
    err << "treeq: solver protocol error: " << ex.what() << '\n' << ex.diagnostics() << '\n';
    return kError;
  } catch (const Error& ex) {
    err << "treeq: " << ex.what() << '\n';
    return kError;
  } catch (const std::exception& ex) {
    err << "treeq: " << ex.what() << '\n';
    return kError;
  }
  return kError;
}

}  // namespace treeq::cli
