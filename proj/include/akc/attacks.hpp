#pragma once

#include <optional>

#include "claims.hpp"
#include "execution.hpp"

namespace akc {

enum class AttackKind : uint8_t { Secrecy, Substitution, RoleMixup, Parallel };

inline const char* attack_kind_name(AttackKind k) {
  switch (k) {
    case AttackKind::Secrecy: return "secrecy";
    case AttackKind::Substitution: return "substitution";
    case AttackKind::RoleMixup: return "roleMixup";
    case AttackKind::Parallel: return "parallel";
  }
  return "?";
}

struct SwapWitness {
  std::string label;
  TermPtr sent, received;
};

struct AttackReport {
  AttackKind kind = AttackKind::Secrecy;
  std::string protocol;
  std::string claim_label;  // secrecy
  TermPtr target;           // secrecy payload
  SwapWitness swap;         // substitution / replace branches
  std::string detail;       // which branch or label fired
  int victim_tid = -1;
  std::map<std::string, std::string> test_assignment;
  std::vector<TraceEntry> trace;
};

inline std::vector<int> tidinst(const State& s, const std::string& role) {
  std::vector<int> out;
  for (const auto& th : s.threads)
    if (th.role == role) out.push_back(th.tid);
  return out;
}

// Both threads agree on some pair of roles mapped to the claimed agents.
inline bool match_threads(const State& s, const TermPtr& a, int tid1,
                          const TermPtr& b, int tid2) {
  const ThreadState* t1 = s.thread(tid1);
  const ThreadState* t2 = s.thread(tid2);
  if (!t1 || !t2 || !a || !b) return false;
  for (const auto& [r, v1] : t1->inst.roles) {
    auto it = t2->inst.roles.find(r);
    if (it == t2->inst.roles.end() || v1 != a || it->second != a) continue;
    for (const auto& [rp, w1] : t1->inst.roles) {
      auto jt = t2->inst.roles.find(rp);
      if (jt == t2->inst.roles.end()) continue;
      if (w1 == b && jt->second == b) return true;
    }
  }
  return false;
}

inline bool finished(const Execution& ex, const ThreadState& th) {
  return th.next_event >= ex.sequence(th.role).size();
}

// Attacks on a thread count only while its peers are uncompromised; the
// thread's own agent may be. Impersonating a peer whose key was revealed
// is not a protocol failure.
inline bool victim_trusted(const State& s, int tid) {
  const ThreadState* th = s.thread(tid);
  if (!th) return false;
  for (const auto& [r, a] : th->inst.roles)
    if (r != th->role && a && s.lkr_agents.count(a->name)) return false;
  return true;
}

// Structural diff: walks matching constructors, records mismatching leaves.
inline void collect_diffs(const TermPtr& sent, const TermPtr& recvd,
                          std::vector<std::pair<TermPtr, TermPtr>>& out) {
  if (sent == recvd) return;
  if (sent->kind == recvd->kind) {
    switch (sent->kind) {
      case Kind::Pair:
      case Kind::Enc:
        collect_diffs(sent->args[0], recvd->args[0], out);
        collect_diffs(sent->args[1], recvd->args[1], out);
        return;
      case Kind::Apply:
        if (sent->name == recvd->name &&
            sent->args.size() == recvd->args.size()) {
          for (std::size_t i = 0; i < sent->args.size(); ++i)
            collect_diffs(sent->args[i], recvd->args[i], out);
          return;
        }
        break;
      case Kind::Pk:
      case Kind::Sk:
        collect_diffs(sent->args[0], recvd->args[0], out);
        return;
      default:
        break;
    }
  }
  out.emplace_back(sent, recvd);
}

// The two terms differ in exactly one value substituted uniformly.
inline std::optional<std::pair<TermPtr, TermPtr>> single_swap(
    const TermPtr& sent, const TermPtr& recvd) {
  std::vector<std::pair<TermPtr, TermPtr>> diffs;
  collect_diffs(sent, recvd, diffs);
  if (diffs.empty()) return std::nullopt;
  for (const auto& d : diffs)
    if (d != diffs.front()) return std::nullopt;
  return diffs.front();
}

inline bool contains_adv_fresh(const TermPtr& t) {
  TermSet subs;
  collect_subterms(t, subs);
  for (const auto& x : subs)
    if (x->kind == Kind::BoundFresh && x->tid == kAdversaryTid) return true;
  return false;
}

inline bool honest_value(const TermPtr& t) {
  if (t->kind == Kind::BoundFresh) return t->tid != kAdversaryTid;
  if (t->kind == Kind::Apply) return !contains_adv_fresh(t);
  return false;
}

inline bool adversarial_value(const TermPtr& t) { return contains_adv_fresh(t); }

inline bool value_accessible(const TermPtr& x, const TermPtr& in) {
  return occurs_open(x, in) || subterm(x, in, SubtermMode::KeyPosition);
}

// ---------------------------------------------------------------------------

inline std::vector<AttackReport> detect_secrecy(const State& s,
                                                const Execution& ex) {
  std::vector<AttackReport> out;
  for (const auto& ci : s.claims) {
    if (ci.tid != kTestTid || ci.kind != ClaimKind::Secret) continue;
    if (!s.knowledge.derives(ci.payload)) continue;
    AttackReport r;
    r.kind = AttackKind::Secrecy;
    r.protocol = ex.spec().name;
    r.claim_label = ci.label;
    r.target = ci.payload;
    r.victim_tid = ci.tid;
    r.test_assignment = s.test_assignment;
    r.trace = s.trace;
    out.push_back(std::move(r));
  }
  return out;
}

// A finished thread accepted a message that agrees with a matched peer's
// send except for one honest value replaced by adversary material.
inline std::vector<AttackReport> detect_substitution(const State& s,
                                                     const Execution& ex) {
  std::vector<AttackReport> out;
  for (const auto& th : s.threads) {
    if (!finished(ex, th) || !victim_trusted(s, th.tid)) continue;
    for (std::size_t k = 0; k < s.trace.size(); ++k) {
      const TraceEntry& r = s.trace[k];
      if (r.t != TraceEntry::T::Recv || r.tid != th.tid) continue;
      const std::string srole = comm_roles(ex.spec(), r.label).first;
      for (std::size_t j = 0; j < k; ++j) {
        const TraceEntry& e = s.trace[j];
        if (e.t != TraceEntry::T::Send || e.label != r.label) continue;
        const ThreadState* sth = s.thread(e.tid);
        if (!sth || sth->role != srole) continue;
        if (e.agent_a != r.agent_a || e.agent_b != r.agent_b) continue;
        if (!match_threads(s, r.agent_a, e.tid, r.agent_b, th.tid)) continue;
        auto swap = single_swap(e.content, r.content);
        if (!swap) continue;
        const auto& [x, y] = *swap;
        if (!honest_value(x) || !adversarial_value(y)) continue;
        if (!value_accessible(x, e.content)) continue;
        AttackReport rep;
        rep.kind = AttackKind::Substitution;
        rep.protocol = ex.spec().name;
        rep.swap = {r.label, x, y};
        rep.victim_tid = th.tid;
        rep.test_assignment = s.test_assignment;
        rep.trace = s.trace;
        out.push_back(std::move(rep));
      }
    }
  }
  return out;
}

// Labels whose step content mentions a role name outside hashes and keys.
inline std::set<std::string> role_bearing_labels(const ProtocolSpec& spec) {
  std::set<std::string> out;
  for (const Step* st : spec.steps()) {
    for (const auto& role : spec.roles) {
      if (occurs_open(mk_role(role), st->content)) {
        out.insert(st->label);
        break;
      }
    }
  }
  return out;
}

struct ReplaceHit {
  std::string label;
  TermPtr x, y;
};

// Matched peer sent the same message up to one in-domain value swapped for
// another in-domain value at an accessible position.
template <typename DomainPred, typename AccessPred>
inline std::optional<ReplaceHit> find_replace(const State& s, const Execution& ex,
                                              int tid, DomainPred in_domain,
                                              AccessPred accessible,
                                              const std::set<std::string>& labels) {
  for (std::size_t k = 0; k < s.trace.size(); ++k) {
    const TraceEntry& r = s.trace[k];
    if (r.t != TraceEntry::T::Recv || r.tid != tid) continue;
    if (!labels.count(r.label)) continue;
    const std::string srole = comm_roles(ex.spec(), r.label).first;
    for (std::size_t j = 0; j < k; ++j) {
      const TraceEntry& e = s.trace[j];
      if (e.t != TraceEntry::T::Send || e.label != r.label) continue;
      const ThreadState* sth = s.thread(e.tid);
      if (!sth || sth->role != srole) continue;
      if (e.agent_a != r.agent_a || e.agent_b != r.agent_b) continue;
      if (!match_threads(s, r.agent_a, e.tid, r.agent_b, tid)) continue;
      auto swap = single_swap(e.content, r.content);
      if (!swap) continue;
      const auto& [x, y] = *swap;
      if (!in_domain(x) || !in_domain(y)) continue;
      if (!accessible(x, e.content)) continue;
      return ReplaceHit{r.label, x, y};
    }
  }
  return std::nullopt;
}

// No matched peer sent the role-bearing message this thread accepted.
inline std::optional<std::string> find_termin(const State& s, const Execution& ex,
                                              int tid,
                                              const std::set<std::string>& labels) {
  for (std::size_t k = 0; k < s.trace.size(); ++k) {
    const TraceEntry& r = s.trace[k];
    if (r.t != TraceEntry::T::Recv || r.tid != tid) continue;
    if (!labels.count(r.label)) continue;
    const std::string srole = comm_roles(ex.spec(), r.label).first;
    bool sender_found = false;
    for (int peer : tidinst(s, srole)) {
      if (!match_threads(s, r.agent_a, peer, r.agent_b, tid)) continue;
      for (std::size_t j = 0; j < k && !sender_found; ++j) {
        const TraceEntry& e = s.trace[j];
        if (e.t == TraceEntry::T::Send && e.tid == peer && e.label == r.label &&
            e.agent_a == r.agent_a && e.agent_b == r.agent_b)
          sender_found = true;
      }
      if (sender_found) break;
    }
    if (!sender_found) return r.label;
  }
  return std::nullopt;
}

inline std::vector<AttackReport> detect_role_mixup(const State& s,
                                                   const Execution& ex) {
  std::vector<AttackReport> out;
  const std::set<std::string> rb = role_bearing_labels(ex.spec());
  std::set<std::string> all_labels;
  for (const Step* st : ex.spec().steps()) all_labels.insert(st->label);
  auto agent_domain = [](const TermPtr& t) { return t->kind == Kind::Agent; };
  auto key_domain = [](const TermPtr& t) {
    return t->kind == Kind::Pk || t->kind == Kind::Sk;
  };
  auto open_access = [](const TermPtr& x, const TermPtr& in) {
    return occurs_open(x, in);
  };
  auto key_access = [](const TermPtr& x, const TermPtr& in) {
    return subterm(x, in, SubtermMode::KeyPosition);
  };
  for (const auto& th : s.threads) {
    if (!finished(ex, th) || !victim_trusted(s, th.tid)) continue;
    AttackReport rep;
    rep.kind = AttackKind::RoleMixup;
    rep.protocol = ex.spec().name;
    rep.victim_tid = th.tid;
    rep.test_assignment = s.test_assignment;
    rep.trace = s.trace;
    if (auto hit = find_replace(s, ex, th.tid, agent_domain, open_access, rb)) {
      rep.swap = {hit->label, hit->x, hit->y};
      rep.detail = "agent-replace";
      out.push_back(rep);
      continue;
    }
    if (auto label = find_termin(s, ex, th.tid, rb)) {
      rep.detail = "unmatched-accept:" + *label;
      out.push_back(rep);
      continue;
    }
    if (auto hit = find_replace(s, ex, th.tid, key_domain, key_access, all_labels)) {
      rep.swap = {hit->label, hit->x, hit->y};
      rep.detail = "key-replace";
      out.push_back(rep);
    }
  }
  return out;
}

// Someone sent this exact message on this label, but no sender matches the
// agents the receiver believes it is talking to.
inline std::vector<AttackReport> detect_parallel(const State& s,
                                                 const Execution& ex) {
  std::vector<AttackReport> out;
  for (std::size_t k = 0; k < s.trace.size(); ++k) {
    const TraceEntry& r = s.trace[k];
    if (r.t != TraceEntry::T::Recv) continue;
    if (!victim_trusted(s, r.tid)) continue;
    const std::string srole = comm_roles(ex.spec(), r.label).first;
    bool any_sender = false;
    bool any_match = false;
    for (std::size_t j = 0; j < k; ++j) {
      const TraceEntry& e = s.trace[j];
      if (e.t != TraceEntry::T::Send || e.label != r.label) continue;
      if (e.content != r.content) continue;
      const ThreadState* sth = s.thread(e.tid);
      if (!sth || sth->role != srole) continue;
      any_sender = true;
      if (match_threads(s, r.agent_a, e.tid, r.agent_b, r.tid)) any_match = true;
    }
    if (any_sender && !any_match) {
      AttackReport rep;
      rep.kind = AttackKind::Parallel;
      rep.protocol = ex.spec().name;
      rep.detail = "label:" + r.label;
      rep.victim_tid = r.tid;
      rep.test_assignment = s.test_assignment;
      rep.trace = s.trace;
      out.push_back(std::move(rep));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

inline std::string attack_fingerprint(const AttackReport& r) {
  std::string fp = attack_kind_name(r.kind);
  fp += "|" + r.claim_label;
  if (r.target) fp += "|t:" + to_string(r.target);
  if (r.swap.sent)
    fp += "|s:" + r.swap.label + ":" + to_string(r.swap.sent) + ">" +
          to_string(r.swap.received);
  fp += "|" + r.detail;
  for (const auto& [role, agent] : r.test_assignment)
    fp += "|" + role + "=" + agent;
  return fp;
}

inline std::vector<Transition> transitions_of_trace(
    const std::vector<TraceEntry>& trace) {
  std::vector<Transition> out;
  for (const auto& e : trace) {
    Transition t;
    switch (e.t) {
      case TraceEntry::T::Create:
        t.t = Transition::T::Create;
        t.role = e.role;
        for (const auto& [r, a] : e.assignment) t.assignment[r] = a->name;
        break;
      case TraceEntry::T::Lkr:
        t.t = e.lkr_actor ? Transition::T::LkrActor : Transition::T::LkrOthers;
        t.agent = e.agent_a->name;
        break;
      case TraceEntry::T::Send:
        t.t = Transition::T::Send;
        t.tid = e.tid;
        break;
      case TraceEntry::T::Recv:
        t.t = Transition::T::Recv;
        t.tid = e.tid;
        t.recv_bindings = e.recv_bindings;
        break;
      case TraceEntry::T::Claim:
        t.t = Transition::T::Claim;
        t.tid = e.tid;
        break;
    }
    out.push_back(std::move(t));
  }
  return out;
}

inline std::vector<AttackReport> rerun_detectors(const State& s,
                                                 const Execution& ex,
                                                 AttackKind kind) {
  switch (kind) {
    case AttackKind::Secrecy: return detect_secrecy(s, ex);
    case AttackKind::Substitution: return detect_substitution(s, ex);
    case AttackKind::RoleMixup: return detect_role_mixup(s, ex);
    case AttackKind::Parallel: return detect_parallel(s, ex);
  }
  return {};
}

// Replays the witness trace transition by transition and re-runs the
// detector on the resulting state.
inline bool replay_verifies(const Execution& ex, const AttackReport& rep) {
  try {
    State s = ex.initial_state(rep.test_assignment);
    for (const auto& t : transitions_of_trace(rep.trace))
      s = ex.apply_transition(s, t);
    const std::string fp = attack_fingerprint(rep);
    for (const auto& again : rerun_detectors(s, ex, rep.kind))
      if (attack_fingerprint(again) == fp) return true;
    return false;
  } catch (const AkcError&) {
    return false;
  }
}

struct AttackScanResult {
  std::vector<AttackReport> attacks;
  Execution::ExploreStats stats;

  bool found(AttackKind k) const {
    for (const auto& a : attacks)
      if (a.kind == k) return true;
    return false;
  }
};

inline AttackScanResult scan_attacks(const Execution& ex,
                                     const std::set<AttackKind>& kinds) {
  AttackScanResult res;
  std::set<std::string> seen;
  res.stats = ex.explore([&](const State& s) {
    for (AttackKind kind : kinds) {
      for (auto& rep : rerun_detectors(s, ex, kind)) {
        if (!seen.insert(attack_fingerprint(rep)).second) continue;
        if (replay_verifies(ex, rep)) res.attacks.push_back(std::move(rep));
      }
    }
  });
  return res;
}

}  // namespace akc
