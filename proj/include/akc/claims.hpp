#pragma once

#include "execution.hpp"

namespace akc {

struct ClaimEvalOptions {
  bool strict_commit_order = false;
};

inline bool eval_secrecy(const State& s, const ClaimInstance& ci) {
  return !s.knowledge.derives(ci.payload);
}

// Commit holds when some thread ran the paired running claim with swapped
// agents and the same ground payload, and that thread sent a message carrying
// the payload in the clear or under encryption (plain subterm).
inline bool eval_commit(const State& s, const ClaimInstance& ci,
                        const ClaimEvalOptions& opts = {}) {
  if (ci.pair_id.empty()) return false;
  const TraceEntry& ce = s.trace[ci.trace_pos];
  for (const auto& cj : s.claims) {
    if (cj.kind != ClaimKind::Running || cj.pair_id != ci.pair_id) continue;
    const TraceEntry& re = s.trace[cj.trace_pos];
    if (re.agent_a != ce.agent_b || re.agent_b != ce.agent_a) continue;
    if (cj.payload != ci.payload) continue;
    for (std::size_t j = 0; j < s.trace.size(); ++j) {
      const TraceEntry& e = s.trace[j];
      if (e.t != TraceEntry::T::Send || e.tid != cj.tid) continue;
      if (opts.strict_commit_order && j >= ci.trace_pos) continue;
      if (subterm(cj.payload, e.content, SubtermMode::Plain)) return true;
    }
  }
  return false;
}

// Non-injective synchronisation: every prior receive of the claiming thread
// on a label before the claim must be preceded by an identical send (same
// claimed agents, same content) from a thread playing the label's sender role.
inline bool eval_nisynch(const State& s, const Execution& ex,
                         const ClaimInstance& ci) {
  const ProtocolSpec& spec = ex.spec();
  std::set<std::string> prec = prec_set(spec, ci.role, ci.label);
  for (std::size_t k = 0; k < ci.trace_pos; ++k) {
    const TraceEntry& r = s.trace[k];
    if (r.t != TraceEntry::T::Recv || r.tid != ci.tid) continue;
    if (!prec.count(r.label)) continue;
    const std::string sender_role = comm_roles(spec, r.label).first;
    bool matched = false;
    for (std::size_t j = 0; j < k && !matched; ++j) {
      const TraceEntry& e = s.trace[j];
      if (e.t != TraceEntry::T::Send || e.label != r.label) continue;
      const ThreadState* th = s.thread(e.tid);
      if (!th || th->role != sender_role) continue;
      if (e.agent_a == r.agent_a && e.agent_b == r.agent_b &&
          e.content == r.content)
        matched = true;
    }
    if (!matched) return false;
  }
  return true;
}

inline bool eval_claim(const State& s, const Execution& ex,
                       const ClaimInstance& ci,
                       const ClaimEvalOptions& opts = {}) {
  switch (ci.kind) {
    case ClaimKind::Secret:
      return eval_secrecy(s, ci);
    case ClaimKind::Commit:
      return eval_commit(s, ci, opts);
    case ClaimKind::Running:
      return true;  // running is an assertion, not a checked property
    case ClaimKind::Nisynch:
      return eval_nisynch(s, ex, ci);
  }
  return true;
}

struct ClaimVerdict {
  std::string label;
  ClaimKind kind = ClaimKind::Secret;
  std::string role;
  bool holds = true;
  long instances = 0;
  long failures = 0;
  bool has_witness = false;
  State witness;  // first failing leaf
  ClaimInstance witness_claim;
};

struct CheckResult {
  std::vector<ClaimVerdict> verdicts;
  Execution::ExploreStats stats;

  bool all_hold() const {
    for (const auto& v : verdicts)
      if (!v.holds) return false;
    return true;
  }
  const ClaimVerdict* verdict(const std::string& label) const {
    for (const auto& v : verdicts)
      if (v.label == label) return &v;
    return nullptr;
  }
};

// Evaluates every test-thread claim at every reachable leaf. A claim fails
// if any leaf falsifies it; the first falsifying leaf is kept as witness.
inline CheckResult akcs_check(const Execution& ex,
                              const ClaimEvalOptions& opts = {}) {
  CheckResult res;
  for (const auto& ev : ex.sequence(ex.config().test_role)) {
    if (ev.type != EventType::Claim || ev.claim == ClaimKind::Running) continue;
    ClaimVerdict v;
    v.label = ev.label;
    v.kind = ev.claim;
    v.role = ex.config().test_role;
    res.verdicts.push_back(std::move(v));
  }
  auto find = [&res](const std::string& label) -> ClaimVerdict* {
    for (auto& v : res.verdicts)
      if (v.label == label) return &v;
    return nullptr;
  };
  res.stats = ex.explore([&](const State& s) {
    for (const auto& ci : s.claims) {
      if (ci.tid != kTestTid) continue;
      ClaimVerdict* v = find(ci.label);
      if (!v) continue;
      v->instances++;
      if (!eval_claim(s, ex, ci, opts)) {
        v->failures++;
        if (v->holds) {
          v->holds = false;
          v->witness = s;
          v->witness_claim = ci;
          v->has_witness = true;
        }
      }
    }
  });
  return res;
}

}  // namespace akc
