#include "treeq/search.hpp"

#include <cmath>
#include <condition_variable>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <thread>

#include "treeq/encode.hpp"
#include "treeq/error.hpp"

namespace treeq {

using json = nlohmann::json;
using clock_type = std::chrono::steady_clock;

const char* to_string(StopMode m) {
  switch (m) {
    case StopMode::FirstSat:
      return "first-sat";
    case StopMode::Exhaustive:
      return "exhaustive";
    case StopMode::Budget:
      return "budget";
  }
  return "first-sat";
}

StopMode stop_mode_from_string(const std::string& s) {
  if (s == "first-sat") return StopMode::FirstSat;
  if (s == "exhaustive") return StopMode::Exhaustive;
  if (s == "budget") return StopMode::Budget;
  throw ValidationError("unknown stop mode '" + s + "' (expected first-sat, exhaustive or budget)");
}

const char* to_string(ReportStatus s) {
  switch (s) {
    case ReportStatus::Sat:
      return "sat";
    case ReportStatus::Unsat:
      return "unsat";
    case ReportStatus::UnknownSplit:
      return "unknown-split";
    case ReportStatus::UnknownTerminal:
      return "unknown-terminal";
  }
  return "unknown-terminal";
}

void SearchConfig::validate() const {
  if (subproblem_timeout.count() < 0) throw ValidationError("subproblem timeout must be >= 0");
  if (!(timeout_growth >= 1.0) || !std::isfinite(timeout_growth)) throw ValidationError("timeout growth must be >= 1");
  if (max_depth < 0) throw ValidationError("max depth must be >= 0");
  if (workers < 1) throw ValidationError("workers must be >= 1");
  if (presplit_depth < 0) throw ValidationError("presplit depth must be >= 0");
  if (stop_mode == StopMode::Budget && budget < subproblem_timeout)
    throw ValidationError("budget must be at least the subproblem timeout");
  if (time_limit && time_limit->count() <= 0) throw ValidationError("time limit must be positive");
  if (solver.grace.count() < 0) throw ValidationError("solver grace must be >= 0");
}

bool witness_holds(const VerificationTask& task, const SubproblemReport& r) {
  const std::size_t n = task.num_instances();
  if (r.status != ReportStatus::Sat || r.witnesses.size() != n || r.outputs.size() != n) return false;
  for (std::size_t i = 0; i < n; ++i) {
    const Ensemble& e = task.ensemble(i);
    const ExactInstance& x = r.witnesses[i];
    if (x.size() != e.num_attributes()) return false;
    for (std::size_t k = 0; k < x.size(); ++k)
      if (e.attr_type(AttrId(static_cast<std::uint32_t>(k))) == AttrType::Bool && x[k] != 0 && x[k] != 1) return false;
    if (evaluate_exact(e, std::span<const Rational>(x)) != r.outputs[i]) return false;
    if (i < r.boxes.size() && !r.boxes[i].contains(std::span<const Rational>(x))) return false;
  }
  Assignment a{r.witnesses, r.outputs, r.aux_real, r.aux_bool};
  return holds(task.question, a) && holds(task.background, a);
}

namespace {

struct Outcome {
  SubproblemReport report;
  std::vector<Subproblem> children;
  bool sat = false;
  bool deadline = false;     // not attempted: time ran out before solving
  bool unresolved = false;   // terminal unknown
};

SubproblemReport base_report(const Subproblem& s) {
  SubproblemReport r;
  r.id = s.id;
  r.parent = s.parent;
  r.depth = s.depth;
  r.boxes = s.boxes;
  for (const DomainBox& b : s.boxes) r.trails.push_back(b.trail());
  return r;
}

class Engine {
 public:
  Engine(const VerificationTask& task, const SearchConfig& cfg, const ReportSink& sink)
      : task_(task), cfg_(cfg), sink_(sink), start_(clock_type::now()) {
    std::optional<std::chrono::milliseconds> cap = cfg.time_limit;
    if (cfg.stop_mode == StopMode::Budget) {
      if (!cap || cfg.budget < *cap) {
        cap = cfg.budget;
        cap_reason_ = "budget";
      }
    }
    if (cap) {
      deadline_ = start_ + *cap;
      if (cap_reason_.empty()) cap_reason_ = "time-limit";
    }
    for (std::size_t i = 0; i < task.num_instances(); ++i) original_leaves_ += leaf_count(task.ensemble(i));
  }

  std::size_t allocate_id() { return next_id_++; }

  /// Emits a report decided before the loop (vacuous boxes).
  void emit_direct(const SubproblemReport& r) { record(r); }

  Summary run(std::vector<Subproblem> initial, std::stop_token external) {
    // Push in reverse so the first subproblem is popped first.
    for (auto it = initial.rbegin(); it != initial.rend(); ++it) stack_.push_back(std::move(*it));
    std::stop_callback on_external(external, [this] { halt("cancelled"); });

    const int n = std::max(1, cfg_.workers);
    if (n == 1) {
      work();
    } else {
      std::vector<std::jthread> pool;
      for (int w = 0; w < n; ++w) pool.emplace_back([this] { work(); });
    }
    if (fatal_) std::rethrow_exception(fatal_);

    for (Subproblem& s : stack_) summary_.unresolved.push_back(std::move(s));
    stack_.clear();
    if (summary_.stop_reason.empty()) summary_.stop_reason = "exhausted";
    if (summary_.sat > 0) {
      summary_.verdict = SolverStatus::Sat;
    } else if (summary_.unresolved.empty()) {
      summary_.verdict = SolverStatus::Unsat;
    } else {
      summary_.verdict = SolverStatus::Unknown;
    }
    summary_.elapsed = clock_type::now() - start_;
    return std::move(summary_);
  }

 private:
  void halt(const std::string& reason) {
    {
      std::lock_guard lk(mu_);
      if (!stopping_) {
        stopping_ = true;
        summary_.stop_reason = reason;
      }
    }
    source_.request_stop();
    cv_.notify_all();
  }

  void work() {
    std::unique_lock lk(mu_);
    while (true) {
      cv_.wait(lk, [&] { return stopping_ || !stack_.empty() || inflight_ == 0; });
      if (stopping_ || stack_.empty()) break;
      Subproblem item = std::move(stack_.back());
      stack_.pop_back();
      ++inflight_;
      lk.unlock();

      std::optional<Outcome> out;
      std::exception_ptr err;
      try {
        out = process(item);
      } catch (...) {
        err = std::current_exception();
      }

      lk.lock();
      --inflight_;
      if (err) {
        if (!fatal_) fatal_ = err;
        summary_.unresolved.push_back(std::move(item));
        stopping_ = true;
        if (summary_.stop_reason.empty()) summary_.stop_reason = "error";
        source_.request_stop();
      } else if (out->deadline) {
        summary_.unresolved.push_back(std::move(item));
        if (!stopping_) {
          stopping_ = true;
          summary_.stop_reason = cap_reason_;
        }
        source_.request_stop();
      } else {
        record(out->report);
        if (out->unresolved) summary_.unresolved.push_back(std::move(item));
        // Left child ends up on top.
        for (auto it = out->children.rbegin(); it != out->children.rend(); ++it) stack_.push_back(std::move(*it));
        if (out->sat && cfg_.stop_mode == StopMode::FirstSat && !stopping_) {
          stopping_ = true;
          summary_.stop_reason = "first-sat";
          source_.request_stop();
        }
      }
      cv_.notify_all();
    }
  }

  /// Caller holds the lock (or runs before the workers start).
  void record(const SubproblemReport& r) {
    switch (r.status) {
      case ReportStatus::Sat:
        ++summary_.sat;
        if (!summary_.witness) summary_.witness = r;
        break;
      case ReportStatus::Unsat:
        ++summary_.unsat;
        break;
      case ReportStatus::UnknownSplit:
        ++summary_.unknown_split;
        break;
      case ReportStatus::UnknownTerminal:
        ++summary_.unknown_terminal;
        break;
    }
    if (sink_) sink_(r);
  }

  std::chrono::milliseconds timeout_for(int depth) const {
    double ms = static_cast<double>(cfg_.subproblem_timeout.count()) * std::pow(cfg_.timeout_growth, depth);
    ms = std::min(ms, 1e12);
    auto t = std::chrono::milliseconds(static_cast<std::int64_t>(ms));
    if (deadline_) {
      auto left = std::chrono::duration_cast<std::chrono::milliseconds>(*deadline_ - clock_type::now());
      t = std::min(t, left);
    }
    return t;
  }

  void dump(const SmtScript& script, std::size_t id) const {
    if (cfg_.dump_smt.empty()) return;
    std::filesystem::create_directories(cfg_.dump_smt);
    std::ofstream f(std::filesystem::path(cfg_.dump_smt) / ("sub-" + std::to_string(id) + ".smt2"));
    f << script.text;
  }

  BranchFeasible deep_prune_for(const Subproblem& s, std::uint32_t instance) const {
    if (!cfg_.deep_prune) return {};
    return [this, &s, instance](const DomainBox& refined) {
      std::vector<DomainBox> boxes = s.boxes;
      boxes[instance] = refined;
      SmtScript script = build_feasibility_script(task_, boxes);
      try {
        return solve(script, cfg_.deep_prune_timeout, cfg_.solver, source_.get_token()).status != SolverStatus::Unsat;
      } catch (const ProtocolError&) {
        return true;
      }
    };
  }

  Outcome process(const Subproblem& s) {
    Outcome o;
    o.report = base_report(s);
    const std::size_t n = task_.num_instances();

    std::vector<PrunedEnsemble> pruned;
    std::vector<const Ensemble*> live;
    pruned.reserve(n);
    for (std::uint32_t i = 0; i < n; ++i) {
      if (cfg_.prune) {
        pruned.push_back(prune(task_.ensemble(i), s.boxes[i], deep_prune_for(s, i)));
      } else {
        const std::size_t lc = leaf_count(task_.ensemble(i));
        pruned.push_back({task_.ensemble(i), lc, lc});
      }
    }
    for (const PrunedEnsemble& p : pruned) {
      live.push_back(&p.ensemble);
      o.report.leaves_after += p.pruned_leaves;
    }
    o.report.leaves_before = original_leaves_;

    const bool presplit = cfg_.divide && s.depth < cfg_.presplit_depth && s.depth < cfg_.max_depth;
    if (presplit && divide(s, pruned, o, "presplit")) return o;

    const auto timeout = timeout_for(s.depth);
    if (deadline_ && clock_type::now() >= *deadline_) {
      o.deadline = true;
      return o;
    }
    SolverVerdict v;
    if (timeout.count() > 0) {
      SmtScript script = build_script(task_, s.boxes, live);
      dump(script, s.id);
      try {
        v = solve(script, timeout, cfg_.solver, source_.get_token());
      } catch (const ProtocolError& ex) {
        o.report.status = ReportStatus::UnknownTerminal;
        o.report.reason = std::string("protocol: ") + ex.what();
        o.unresolved = true;
        return o;
      }
    } else {
      v.cancelled = source_.stop_requested();
    }
    o.report.solve_time = v.wall_time;

    if (v.status == SolverStatus::Sat) {
      DecodedModel m;
      try {
        m = decode_model(v, task_);
      } catch (const ProtocolError& ex) {
        o.report.status = ReportStatus::UnknownTerminal;
        o.report.reason = std::string("protocol: ") + ex.what();
        o.unresolved = true;
        return o;
      }
      o.report.status = ReportStatus::Sat;
      o.report.witnesses = std::move(m.instances);
      o.report.outputs = std::move(m.outputs);
      o.report.aux_real = std::move(m.aux_real);
      o.report.aux_bool = std::move(m.aux_bool);
      if (!witness_holds(task_, o.report)) {
        o.report.status = ReportStatus::UnknownTerminal;
        o.report.reason = "witness-rejected";
        o.report.witnesses.clear();
        o.report.outputs.clear();
        o.unresolved = true;
        return o;
      }
      o.sat = true;
      return o;
    }
    if (v.status == SolverStatus::Unsat) {
      o.report.status = ReportStatus::Unsat;
      return o;
    }
    if (v.cancelled) return terminal(o, "cancelled");
    if (!cfg_.divide) return terminal(o, "timeout");
    if (s.depth >= cfg_.max_depth) return terminal(o, "max-depth");
    if (divide(s, pruned, o, "")) return o;
    return terminal(o, "no-split");
  }

  static Outcome& terminal(Outcome& o, const char* reason) {
    o.report.status = ReportStatus::UnknownTerminal;
    o.report.reason = reason;
    o.unresolved = true;
    return o;
  }

  /// Splits on the instance chosen round-robin by depth, falling back to the
  /// others when it has no useful split.
  bool divide(const Subproblem& s, const std::vector<PrunedEnsemble>& pruned, Outcome& o, const char* reason) {
    const std::size_t n = task_.num_instances();
    for (std::size_t step = 0; step < n; ++step) {
      const auto i = static_cast<std::uint32_t>((static_cast<std::size_t>(s.depth) + step) % n);
      std::optional<SplitChoice> choice = best_split(pruned[i].ensemble, s.boxes[i]);
      if (!choice) continue;
      o.report.status = ReportStatus::UnknownSplit;
      o.report.split = choice->cond;
      o.report.split_instance = i;
      o.report.split_counts = choice->counts;
      o.report.reason = reason;
      for (bool pol : {true, false}) {
        Subproblem child;
        child.boxes = s.boxes;
        child.boxes[i] = *s.boxes[i].refine(choice->cond, pol);
        child.depth = s.depth + 1;
        child.parent = s.id;
        {
          std::lock_guard lk(id_mu_);
          child.id = next_id_++;
        }
        o.children.push_back(std::move(child));
      }
      return true;
    }
    return false;
  }

  const VerificationTask& task_;
  const SearchConfig& cfg_;
  const ReportSink& sink_;
  const clock_type::time_point start_;
  std::optional<clock_type::time_point> deadline_;
  std::string cap_reason_;
  std::size_t original_leaves_ = 0;

  std::mutex mu_;
  std::condition_variable cv_;
  std::vector<Subproblem> stack_;
  int inflight_ = 0;
  bool stopping_ = false;
  std::exception_ptr fatal_;
  std::stop_source source_;
  Summary summary_;

  std::mutex id_mu_;
  std::size_t next_id_ = 0;
};

/// Box approximation of every instance, or nullopt if one is empty.
std::optional<std::vector<DomainBox>> root_boxes(const VerificationTask& task, bool use_approximation) {
  std::vector<DomainBox> boxes;
  for (std::uint32_t i = 0; i < task.num_instances(); ++i) {
    if (!use_approximation) {
      boxes.push_back(DomainBox::unconstrained(task.ensemble(i).attr_types()));
      continue;
    }
    std::optional<DomainBox> b = box_approximation(task, i);
    if (!b) return std::nullopt;
    boxes.push_back(std::move(*b));
  }
  return boxes;
}

SubproblemReport vacuous_report(std::vector<DomainBox> boxes, std::size_t id, int depth) {
  Subproblem s;
  s.boxes = std::move(boxes);
  s.id = id;
  s.depth = depth;
  SubproblemReport r = base_report(s);
  r.status = ReportStatus::Unsat;
  r.reason = "vacuous";
  return r;
}

}  // namespace

Summary run(const VerificationTask& task, const SearchConfig& cfg, const ReportSink& sink, std::stop_token stop) {
  cfg.validate();
  Engine engine(task, cfg, sink);
  std::vector<Subproblem> initial;
  std::optional<std::vector<DomainBox>> boxes = root_boxes(task, cfg.prune);
  if (!boxes) {
    std::vector<DomainBox> whole;
    for (const auto& e : task.instances) whole.push_back(DomainBox::unconstrained(e->attr_types()));
    engine.emit_direct(vacuous_report(std::move(whole), engine.allocate_id(), 0));
  } else {
    Subproblem root;
    root.boxes = std::move(*boxes);
    root.id = engine.allocate_id();
    initial.push_back(std::move(root));
  }
  return engine.run(std::move(initial), stop);
}

Checkpoint make_checkpoint(const Summary& s) { return {s.verdict, s.unresolved}; }

Summary resume(const Checkpoint& cp, const VerificationTask& task, const SearchConfig& cfg, const ReportSink& sink,
               std::stop_token stop) {
  cfg.validate();
  if (cp.unresolved.empty()) {
    Summary s;
    s.verdict = cp.prior_verdict;
    s.stop_reason = "exhausted";
    return s;
  }
  Engine engine(task, cfg, sink);
  std::optional<std::vector<DomainBox>> approx = root_boxes(task, cfg.prune);
  std::vector<Subproblem> initial;
  for (const Subproblem& old : cp.unresolved) {
    if (old.boxes.size() != task.num_instances())
      throw ValidationError("checkpoint subproblem has " + std::to_string(old.boxes.size()) + " boxes, task has " +
                            std::to_string(task.num_instances()) + " instances");
    Subproblem s;
    s.depth = old.depth;
    s.id = engine.allocate_id();
    bool empty = !approx.has_value();
    for (std::uint32_t i = 0; i < task.num_instances(); ++i) {
      std::optional<DomainBox> b = replay(task.ensemble(i).attr_types(), old.boxes[i].trail());
      if (!b) throw ValidationError("checkpoint trail of instance " + std::to_string(i) + " is empty");
      if (approx) {
        for (const TrailLiteral& lit : (*approx)[i].trail()) {
          if (!b) break;
          Relation r = b->relation(lit.cond);
          if (r == (lit.polarity ? Relation::AlwaysTrue : Relation::AlwaysFalse)) continue;
          b = b->refine(lit.cond, lit.polarity);
        }
      }
      if (!b) {
        empty = true;
        b = replay(task.ensemble(i).attr_types(), old.boxes[i].trail());
      }
      s.boxes.push_back(std::move(*b));
    }
    if (empty) {
      engine.emit_direct(vacuous_report(std::move(s.boxes), s.id, s.depth));
    } else {
      initial.push_back(std::move(s));
    }
  }
  Summary s = engine.run(std::move(initial), stop);
  if (cp.prior_verdict == SolverStatus::Sat) s.verdict = SolverStatus::Sat;
  return s;
}

// JSON ----------------------------------------------------------------------------

namespace {

json rational_to_json(const Rational& v) {
  double d = v.get_d();
  if (std::isfinite(d) && to_rational(d) == v) return d;
  return to_string(v);
}

json boxes_to_json(const std::vector<DomainBox>& boxes) {
  json out = json::array();
  for (const DomainBox& b : boxes) out.push_back(trail_to_json(b.trail()));
  return out;
}

json witness_to_json(const SubproblemReport& r, const VerificationTask& task) {
  json w;
  json inst = json::array();
  for (std::size_t i = 0; i < r.witnesses.size(); ++i)
    inst.push_back(instance_to_json(r.witnesses[i], task.ensemble(i).attr_types()));
  w["instances"] = std::move(inst);
  json outs = json::array();
  for (const Rational& f : r.outputs) outs.push_back(rational_to_json(f));
  w["outputs"] = std::move(outs);
  if (!r.aux_real.empty() || !r.aux_bool.empty()) {
    json aux = json::object();
    for (const auto& [k, v] : r.aux_real) aux[k] = rational_to_json(v);
    for (const auto& [k, v] : r.aux_bool) aux[k] = v;
    w["aux"] = std::move(aux);
  }
  return w;
}

}  // namespace

json report_to_json(const SubproblemReport& r, const VerificationTask& task) {
  json j;
  j["type"] = "report";
  j["id"] = r.id;
  j["parent"] = r.parent ? json(*r.parent) : json(nullptr);
  j["depth"] = r.depth;
  j["status"] = to_string(r.status);
  j["boxes"] = boxes_to_json(r.boxes);
  if (r.status == ReportStatus::Sat) j["witness"] = witness_to_json(r, task);
  if (r.split) {
    j["split"] = {{"instance", r.split_instance},
                  {"condition", split_to_json(*r.split)},
                  {"unreachable_left", r.split_counts.left},
                  {"unreachable_right", r.split_counts.right}};
  }
  if (!r.reason.empty()) j["reason"] = r.reason;
  j["solve_time"] = r.solve_time.count();
  j["leaves_before"] = r.leaves_before;
  j["leaves_after"] = r.leaves_after;
  return j;
}

json summary_to_json(const Summary& s, const VerificationTask& task) {
  json j;
  j["type"] = "summary";
  j["verdict"] = to_string(s.verdict);
  j["reports"] = {{"sat", s.sat},
                  {"unsat", s.unsat},
                  {"unknown_split", s.unknown_split},
                  {"unknown_terminal", s.unknown_terminal}};
  if (s.witness) {
    j["witness"] = witness_to_json(*s.witness, task);
    j["witness_report"] = s.witness->id;
  }
  json un = json::array();
  for (const Subproblem& p : s.unresolved) un.push_back({{"boxes", boxes_to_json(p.boxes)}, {"depth", p.depth}});
  j["unresolved"] = std::move(un);
  j["elapsed"] = s.elapsed.count();
  j["stop_reason"] = s.stop_reason;
  return j;
}

json checkpoint_to_json(const Checkpoint& cp) {
  json un = json::array();
  for (const Subproblem& p : cp.unresolved) un.push_back({{"boxes", boxes_to_json(p.boxes)}, {"depth", p.depth}});
  return {{"prior_verdict", to_string(cp.prior_verdict)}, {"unresolved", std::move(un)}};
}

Checkpoint checkpoint_from_json(const json& j, const VerificationTask& task) {
  if (!j.is_object()) throw ParseError("checkpoint must be a JSON object");
  Checkpoint cp;
  const std::string prior = j.value("prior_verdict", std::string("unknown"));
  if (prior == "sat") {
    cp.prior_verdict = SolverStatus::Sat;
  } else if (prior == "unsat") {
    cp.prior_verdict = SolverStatus::Unsat;
  } else if (prior == "unknown") {
    cp.prior_verdict = SolverStatus::Unknown;
  } else {
    throw ParseError("checkpoint: unknown prior_verdict '" + prior + "'");
  }
  auto un = j.find("unresolved");
  if (un == j.end() || !un->is_array()) throw ParseError("checkpoint: 'unresolved' must be an array");
  for (const json& item : *un) {
    if (!item.is_object() || !item.contains("boxes") || !item["boxes"].is_array())
      throw ParseError("checkpoint: each unresolved entry needs 'boxes'");
    const json& boxes = item["boxes"];
    if (boxes.size() != task.num_instances())
      throw ValidationError("checkpoint entry has " + std::to_string(boxes.size()) + " boxes, task has " +
                            std::to_string(task.num_instances()) + " instances");
    Subproblem s;
    s.depth = item.value("depth", 0);
    for (std::uint32_t i = 0; i < boxes.size(); ++i) {
      std::vector<TrailLiteral> trail = trail_from_json(boxes[i]);
      std::optional<DomainBox> b = replay(task.ensemble(i).attr_types(), trail);
      if (!b) throw ValidationError("checkpoint trail of instance " + std::to_string(i) + " is empty");
      s.boxes.push_back(std::move(*b));
    }
    cp.unresolved.push_back(std::move(s));
  }
  return cp;
}

}  // namespace treeq
