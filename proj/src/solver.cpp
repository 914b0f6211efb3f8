#include "treeq/solver.hpp"

#include <fcntl.h>
#include <poll.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <csignal>
#include <cstdlib>
#include <cstring>
#include <memory>
#include <optional>

#include "treeq/error.hpp"

extern char** environ;

namespace treeq {

const char* to_string(SolverStatus s) {
  switch (s) {
    case SolverStatus::Sat:
      return "sat";
    case SolverStatus::Unsat:
      return "unsat";
    case SolverStatus::Unknown:
      return "unknown";
  }
  return "unknown";
}

std::string SolverOptions::default_command() {
  if (const char* env = std::getenv("TREEQ_SOLVER_CMD"); env != nullptr && *env != '\0') return env;
  return "z3 -in -t:{timeout_ms}";
}

// S-expressions ----------------------------------------------------------------

namespace {

struct SExpr {
  std::string atom;
  std::vector<SExpr> items;
  bool is_list = false;
};

class SExprReader {
 public:
  explicit SExprReader(std::string_view text) : text_(text) {}

  std::vector<SExpr> read_all() {
    std::vector<SExpr> out;
    while (skip_space()) out.push_back(read());
    return out;
  }

 private:
  bool skip_space() {
    while (pos_ < text_.size()) {
      char c = text_[pos_];
      if (c == ';') {
        while (pos_ < text_.size() && text_[pos_] != '\n') ++pos_;
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos_;
      } else {
        return true;
      }
    }
    return false;
  }

  SExpr read() {
    char c = text_[pos_];
    if (c == '(') {
      ++pos_;
      SExpr list;
      list.is_list = true;
      while (true) {
        if (!skip_space()) throw ProtocolError("unterminated list in solver output", std::string(text_));
        if (text_[pos_] == ')') {
          ++pos_;
          return list;
        }
        list.items.push_back(read());
      }
    }
    if (c == ')') throw ProtocolError("unbalanced ')' in solver output", std::string(text_));
    SExpr a;
    if (c == '"') {
      std::size_t end = pos_ + 1;
      while (end < text_.size() && text_[end] != '"') ++end;
      a.atom = std::string(text_.substr(pos_, end + 1 - pos_));
      pos_ = std::min(end + 1, text_.size());
      return a;
    }
    if (c == '|') {
      std::size_t end = text_.find('|', pos_ + 1);
      if (end == std::string_view::npos) throw ProtocolError("unterminated quoted symbol", std::string(text_));
      a.atom = std::string(text_.substr(pos_ + 1, end - pos_ - 1));
      pos_ = end + 1;
      return a;
    }
    std::size_t start = pos_;
    while (pos_ < text_.size() && !std::isspace(static_cast<unsigned char>(text_[pos_])) && text_[pos_] != '(' &&
           text_[pos_] != ')')
      ++pos_;
    a.atom = std::string(text_.substr(start, pos_ - start));
    return a;
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

ModelValue eval_value(const SExpr& e) {
  if (!e.is_list) {
    if (e.atom == "true") return true;
    if (e.atom == "false") return false;
    return parse_rational(e.atom);
  }
  if (e.items.empty() || e.items[0].is_list) throw ParseError("malformed model value");
  const std::string& head = e.items[0].atom;
  std::vector<Rational> args;
  for (std::size_t i = 1; i < e.items.size(); ++i) {
    ModelValue v = eval_value(e.items[i]);
    if (!std::holds_alternative<Rational>(v)) throw ParseError("boolean inside arithmetic model value");
    args.push_back(std::get<Rational>(v));
  }
  if (head == "-" && args.size() == 1) return Rational(-args[0]);
  if (head == "-" && args.size() == 2) return Rational(args[0] - args[1]);
  if (head == "/" && args.size() == 2) {
    if (args[1] == 0) throw ParseError("division by zero in model value");
    return Rational(args[0] / args[1]);
  }
  if (head == "+") {
    Rational s = 0;
    for (const Rational& a : args) s += a;
    return s;
  }
  if (head == "*") {
    Rational s = 1;
    for (const Rational& a : args) s *= a;
    return s;
  }
  throw ParseError("unsupported model value operator '" + head + "'");
}

std::string tail(std::string_view s, std::size_t n = 2000) {
  return std::string(s.size() > n ? s.substr(s.size() - n) : s);
}

}  // namespace

SolverVerdict parse_solver_output(std::string_view output, bool expect_model) {
  std::vector<SExpr> items;
  try {
    items = SExprReader(output).read_all();
  } catch (const ProtocolError& ex) {
    throw ProtocolError(ex.what(), tail(output));
  }
  SolverVerdict v;
  bool have_status = false;
  bool have_model = false;
  std::string errors;
  for (const SExpr& item : items) {
    if (!item.is_list) {
      if (have_status) continue;
      if (item.atom == "sat") {
        v.status = SolverStatus::Sat;
      } else if (item.atom == "unsat") {
        v.status = SolverStatus::Unsat;
      } else if (item.atom == "unknown" || item.atom == "timeout") {
        v.status = SolverStatus::Unknown;
      } else {
        continue;
      }
      have_status = true;
      continue;
    }
    if (!item.items.empty() && !item.items[0].is_list && item.items[0].atom == "error") {
      errors += (item.items.size() > 1 ? item.items[1].atom : std::string("error")) + "\n";
      continue;
    }
    if (!have_status || have_model) continue;
    bool pairs = !item.items.empty();
    for (const SExpr& p : item.items) pairs = pairs && p.is_list && p.items.size() == 2 && !p.items[0].is_list;
    if (!pairs) continue;
    try {
      for (const SExpr& p : item.items) v.model[p.items[0].atom] = eval_value(p.items[1]);
    } catch (const ParseError& ex) {
      throw ProtocolError(std::string("cannot read model value: ") + ex.what(), tail(output));
    }
    have_model = true;
  }
  if (!have_status) throw ProtocolError("solver printed no verdict", tail(output));
  if (v.status == SolverStatus::Sat && !have_model && expect_model)
    throw ProtocolError("solver answered sat without a model" + (errors.empty() ? "" : ": " + errors), tail(output));
  if (v.status != SolverStatus::Sat) v.model.clear();
  if (!errors.empty() && v.status == SolverStatus::Sat) v.diagnostics = errors;
  return v;
}

// Process driver ---------------------------------------------------------------

namespace {

std::vector<std::string> split_command(const std::string& command) {
  std::vector<std::string> words;
  std::string cur;
  bool in_word = false;
  char quote = 0;
  for (char c : command) {
    if (quote != 0) {
      if (c == quote) {
        quote = 0;
      } else {
        cur.push_back(c);
      }
    } else if (c == '\'' || c == '"') {
      quote = c;
      in_word = true;
    } else if (std::isspace(static_cast<unsigned char>(c))) {
      if (in_word) words.push_back(std::move(cur));
      cur.clear();
      in_word = false;
    } else {
      cur.push_back(c);
      in_word = true;
    }
  }
  if (in_word) words.push_back(std::move(cur));
  return words;
}

void replace_all(std::string& s, const std::string& from, const std::string& to) {
  for (std::size_t pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size()))
    s.replace(pos, from.size(), to);
}

void ignore_sigpipe() {
  static const bool once = [] {
    std::signal(SIGPIPE, SIG_IGN);
    return true;
  }();
  (void)once;
}

struct Fd {
  int fd = -1;
  Fd() = default;
  explicit Fd(int f) : fd(f) {}
  Fd(const Fd&) = delete;
  Fd& operator=(const Fd&) = delete;
  ~Fd() { reset(); }
  void reset() {
    if (fd >= 0) ::close(fd);
    fd = -1;
  }
};

void make_pipe(Fd& read_end, Fd& write_end) {
  int p[2];
  if (::pipe2(p, O_CLOEXEC) != 0) throw SolverUnavailable(std::string("pipe: ") + std::strerror(errno));
  read_end.fd = p[0];
  write_end.fd = p[1];
}

void set_nonblocking(int fd) { ::fcntl(fd, F_SETFL, ::fcntl(fd, F_GETFL) | O_NONBLOCK); }

/// Owns a spawned process group; on destruction the group is killed and the
/// leader reaped, so no solver outlives its call.
class ChildGroup {
 public:
  explicit ChildGroup(pid_t pid) : pid_(pid) {}
  ChildGroup(const ChildGroup&) = delete;
  ChildGroup& operator=(const ChildGroup&) = delete;
  ~ChildGroup() {
    if (reaped_) return;
    ::kill(-pid_, SIGKILL);
    int status = 0;
    while (::waitpid(pid_, &status, 0) < 0 && errno == EINTR) {
    }
  }

  void signal(int sig) const {
    if (!reaped_) ::kill(-pid_, sig);
  }

  /// Non-blocking: once the leader has exited, kill any stragglers still in
  /// its group, then reap it.
  bool try_reap() {
    if (reaped_) return true;
    siginfo_t info{};
    if (::waitid(P_PID, static_cast<id_t>(pid_), &info, WEXITED | WNOHANG | WNOWAIT) != 0 || info.si_pid == 0) return false;
    ::kill(-pid_, SIGKILL);
    int status = 0;
    while (::waitpid(pid_, &status, 0) < 0 && errno == EINTR) {
    }
    reaped_ = true;
    return true;
  }

 private:
  pid_t pid_;
  bool reaped_ = false;
};

}  // namespace

SolverVerdict solve(const SmtScript& script, std::chrono::milliseconds timeout, const SolverOptions& options,
                    std::stop_token stop) {
  using clock = std::chrono::steady_clock;
  const auto start = clock::now();
  if (timeout.count() <= 0 || stop.stop_requested()) {
    SolverVerdict v;
    v.timed_out = true;
    v.cancelled = stop.stop_requested();
    return v;
  }
  ignore_sigpipe();

  const bool cooperative = options.command.find("{timeout_ms}") != std::string::npos;
  std::vector<std::string> words = split_command(options.command);
  if (words.empty()) throw SolverUnavailable("empty solver command");
  for (std::string& w : words) replace_all(w, "{timeout_ms}", std::to_string(timeout.count()));
  std::vector<char*> argv;
  for (std::string& w : words) argv.push_back(w.data());
  argv.push_back(nullptr);

  Fd in_r, in_w, out_r, out_w, err_r, err_w;
  make_pipe(in_r, in_w);
  make_pipe(out_r, out_w);
  make_pipe(err_r, err_w);

  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  posix_spawn_file_actions_adddup2(&actions, in_r.fd, 0);
  posix_spawn_file_actions_adddup2(&actions, out_w.fd, 1);
  posix_spawn_file_actions_adddup2(&actions, err_w.fd, 2);
  posix_spawnattr_t attr;
  posix_spawnattr_init(&attr);
  sigset_t defaults;
  sigemptyset(&defaults);
  sigaddset(&defaults, SIGPIPE);
  sigaddset(&defaults, SIGTERM);
  sigaddset(&defaults, SIGINT);
  sigset_t empty;
  sigemptyset(&empty);
  posix_spawnattr_setsigdefault(&attr, &defaults);
  posix_spawnattr_setsigmask(&attr, &empty);
  posix_spawnattr_setpgroup(&attr, 0);
  posix_spawnattr_setflags(&attr, POSIX_SPAWN_SETPGROUP | POSIX_SPAWN_SETSIGDEF | POSIX_SPAWN_SETSIGMASK);

  pid_t pid = 0;
  int rc = ::posix_spawnp(&pid, argv[0], &actions, &attr, argv.data(), environ);
  posix_spawn_file_actions_destroy(&actions);
  posix_spawnattr_destroy(&attr);
  if (rc != 0) throw SolverUnavailable("cannot start solver '" + words[0] + "': " + std::strerror(rc));

  ChildGroup child(pid);
  in_r.reset();
  out_w.reset();
  err_w.reset();
  set_nonblocking(in_w.fd);
  set_nonblocking(out_r.fd);
  set_nonblocking(err_r.fd);

  const auto soft_deadline = start + timeout;
  const auto hard_deadline = soft_deadline + options.grace;
  std::string out, err;
  std::size_t written = 0;
  bool term_sent = false;
  bool killed = false;
  bool cancelled = false;
  bool exited = false;

  while (!(exited && out_r.fd < 0 && err_r.fd < 0)) {
    const auto now = clock::now();
    if (!killed && stop.stop_requested()) {
      child.signal(SIGKILL);
      killed = cancelled = true;
    }
    if (!killed && !term_sent && !cooperative && now >= soft_deadline) {
      child.signal(SIGTERM);
      term_sent = true;
    }
    if (!killed && now >= hard_deadline) {
      child.signal(SIGKILL);
      killed = true;
    }

    pollfd fds[3];
    nfds_t nfds = 0;
    if (in_w.fd >= 0) fds[nfds++] = {in_w.fd, POLLOUT, 0};
    if (out_r.fd >= 0) fds[nfds++] = {out_r.fd, POLLIN, 0};
    if (err_r.fd >= 0) fds[nfds++] = {err_r.fd, POLLIN, 0};
    if (nfds > 0) {
      ::poll(fds, nfds, 10);
    } else {
      ::usleep(2000);
    }

    if (in_w.fd >= 0) {
      while (written < script.text.size()) {
        ssize_t n = ::write(in_w.fd, script.text.data() + written, script.text.size() - written);
        if (n > 0) {
          written += static_cast<std::size_t>(n);
        } else {
          if (n < 0 && errno == EAGAIN) break;
          written = script.text.size();  // reader went away
        }
      }
      if (written >= script.text.size()) in_w.reset();
    }
    char buf[65536];
    for (auto [fd, sink] : {std::pair{&out_r, &out}, std::pair{&err_r, &err}}) {
      while (fd->fd >= 0) {
        ssize_t n = ::read(fd->fd, buf, sizeof buf);
        if (n > 0) {
          sink->append(buf, static_cast<std::size_t>(n));
        } else if (n == 0 || errno != EAGAIN) {
          fd->reset();
        } else {
          break;
        }
      }
    }
    if (!exited) exited = child.try_reap();
    // a process that left the group may still hold our pipes
    if (exited && clock::now() >= hard_deadline) {
      out_r.reset();
      err_r.reset();
    }
  }

  const bool stopped = killed || term_sent;
  SolverVerdict v;
  try {
    v = parse_solver_output(out, script.requests_model);
  } catch (const ProtocolError& ex) {
    if (!stopped) throw ProtocolError(ex.what(), tail(out + err));
    v = SolverVerdict{};
  }
  if (stopped && v.status == SolverStatus::Sat && v.model.empty() && script.requests_model) v.status = SolverStatus::Unknown;
  v.timed_out = stopped || (v.status == SolverStatus::Unknown && clock::now() >= soft_deadline);
  v.cancelled = cancelled;
  v.wall_time = clock::now() - start;
  if (v.status == SolverStatus::Unknown && !stopped && !err.empty()) v.diagnostics = tail(err);
  return v;
}

DecodedModel decode_model(const SolverVerdict& verdict, const VerificationTask& task) {
  if (verdict.status != SolverStatus::Sat) throw ContractViolation("decode_model: verdict is not sat");
  DecodedModel m;
  for (std::uint32_t i = 0; i < task.num_instances(); ++i) {
    const Ensemble& e = task.ensemble(i);
    ExactInstance x(e.num_attributes());
    std::vector<bool> defaulted(e.num_attributes(), false);
    for (std::uint32_t k = 0; k < e.num_attributes(); ++k) {
      auto it = verdict.model.find(EncodingContext::attr_name(i, AttrId(k)));
      if (it == verdict.model.end()) {
        defaulted[k] = true;
        x[k] = 0;
        continue;
      }
      const bool want_bool = e.attr_type(AttrId(k)) == AttrType::Bool;
      if (want_bool != std::holds_alternative<bool>(it->second))
        throw ProtocolError("model value for " + it->first + " has the wrong sort", "");
      x[k] = want_bool ? Rational(std::get<bool>(it->second) ? 1 : 0) : std::get<Rational>(it->second);
    }
    auto f = verdict.model.find(EncodingContext::output_name(i));
    if (f == verdict.model.end() || !std::holds_alternative<Rational>(f->second))
      throw ProtocolError("model lacks output variable " + EncodingContext::output_name(i), "");
    m.instances.push_back(std::move(x));
    m.defaulted.push_back(std::move(defaulted));
    m.outputs.push_back(std::get<Rational>(f->second));
  }
  for (const AuxVar& a : collect_aux(task)) {
    auto it = verdict.model.find(a.name);
    if (it == verdict.model.end()) continue;
    if (a.sort == Sort::Bool && std::holds_alternative<bool>(it->second)) {
      m.aux_bool[a.name] = std::get<bool>(it->second);
    } else if (a.sort == Sort::Real && std::holds_alternative<Rational>(it->second)) {
      m.aux_real[a.name] = std::get<Rational>(it->second);
    }
  }
  return m;
}

}  // namespace treeq
