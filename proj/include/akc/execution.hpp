#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "errors.hpp"
#include "instantiate.hpp"
#include "knowledge.hpp"
#include "protocol.hpp"

namespace akc {

constexpr int kAdversaryTid = 0;
constexpr int kTestTid = 1;

struct VerifyConfig {
  std::string test_role;
  std::vector<std::string> pool = {"alice", "bob", "charlie"};
  bool lkr_actor = false;
  bool lkr_others = false;
  std::string actor_role;  // defaults to test_role
  int max_runs = 2;
  int max_adv_fresh = 2;
  bool distinct_agents = false;
  // Strict commit checks read a claim's global trace position, which forbids
  // the eager-claim reduction in the explorer.
  bool strict_commit_order = false;
  long states_cap = 1000000;

  std::string effective_actor_role() const {
    return actor_role.empty() ? test_role : actor_role;
  }
};

struct ThreadState {
  int tid = -1;
  std::string role;
  Instantiation inst;
  std::size_t next_event = 0;  // index into role_sequence(spec, role)
};

struct TraceEntry {
  enum class T : uint8_t { Create, Lkr, Send, Recv, Claim } t = T::Send;
  int tid = -1;
  std::string label;
  TermPtr agent_a, agent_b;  // send/recv: claimed from/to; lkr: agent in agent_a
  bool lkr_actor = false;
  TermPtr content;           // ground payload
  std::string role;          // create/claim: executing role
  std::map<std::string, TermPtr> assignment;  // create
  ClaimKind claim = ClaimKind::Secret;
  std::string peer_role;  // claim
  std::string pair_id;    // claim
  std::vector<std::pair<TermPtr, TermPtr>> recv_bindings;  // recv: var -> value
};

struct ClaimInstance {
  int tid = -1;
  std::string label;
  ClaimKind kind = ClaimKind::Secret;
  std::string role, peer;
  TermPtr payload;  // ground; null for nisynch
  std::string pair_id;
  std::size_t trace_pos = 0;
};

struct State {
  std::vector<ThreadState> threads;  // threads[0] is Test (tid 1)
  std::map<std::string, std::string> test_assignment;
  Knowledge knowledge;
  std::vector<TraceEntry> trace;
  std::vector<ClaimInstance> claims;
  int next_tid = 2;
  int runs_created = 0;
  std::set<std::string> lkr_agents;

  const ThreadState* thread(int tid) const {
    for (const auto& th : threads)
      if (th.tid == tid) return &th;
    return nullptr;
  }
  ThreadState* thread(int tid) {
    for (auto& th : threads)
      if (th.tid == tid) return &th;
    return nullptr;
  }
};

struct Transition {
  // Spawn creates a thread and fires its first event in one step; the
  // explorer uses it instead of bare Create, so no state ever carries a
  // thread that has done nothing. Create stays for trace replay.
  enum class T : uint8_t { Create, Spawn, LkrActor, LkrOthers, Send, Recv, Claim } t =
      T::Send;
  std::string role;                              // create/spawn
  std::map<std::string, std::string> assignment;  // create/spawn
  std::string agent;                             // lkr
  int tid = -1;                                  // send/recv/claim
  std::vector<std::pair<TermPtr, TermPtr>> recv_bindings;
};

// ---------------------------------------------------------------------------

class Execution {
 public:
  Execution(const ProtocolSpec& spec, const VerifyConfig& cfg)
      : spec_(spec), cfg_(cfg) {
    if (!spec.has_role(cfg.test_role))
      throw AkcError("UnknownRole", "test role " + cfg.test_role);
    for (const auto& role : spec_.roles)
      sequences_[role] = role_sequence(spec_, role);
  }

  const ProtocolSpec& spec() const { return spec_; }
  const VerifyConfig& config() const { return cfg_; }
  const std::vector<Event>& sequence(const std::string& role) const {
    return sequences_.at(role);
  }

  // All total test-role assignments with the test agent fixed to pool[0];
  // peers range over the pool, coincidences allowed unless distinct_agents.
  std::vector<std::map<std::string, std::string>> test_assignments() const {
    std::vector<std::string> others;
    for (const auto& r : spec_.roles)
      if (r != cfg_.test_role) others.push_back(r);
    std::vector<std::map<std::string, std::string>> out;
    std::map<std::string, std::string> cur;
    cur[cfg_.test_role] = cfg_.pool.front();
    enumerate_assignments(others, 0, cur, out);
    return out;
  }

  State initial_state(const std::map<std::string, std::string>& test_assignment) const {
    State s;
    s.test_assignment = test_assignment;
    ThreadState test;
    test.tid = kTestTid;
    test.role = cfg_.test_role;
    test.inst.tid = kTestTid;
    for (const auto& [role, agent] : test_assignment)
      test.inst.roles[role] = mk_agent(agent);
    s.threads.push_back(std::move(test));
    s.runs_created = 1;  // the test thread counts against the run bound
    for (const auto& a : cfg_.pool) s.knowledge.add(mk_agent(a));
    for (const auto& a : cfg_.pool) s.knowledge.add(mk_pk(mk_agent(a)));
    for (int i = 1; i <= cfg_.max_adv_fresh; ++i)
      s.knowledge.add(mk_bound_fresh("adv" + std::to_string(i), kAdversaryTid));
    return s;
  }

  // Deterministic order: create < lkr < send < recv < claim, then by tid and
  // lexicographic parameters.
  std::vector<Transition> enabled_transitions(const State& s) const {
    std::vector<Transition> out;
    if (s.runs_created < cfg_.max_runs) {
      for (const auto& role : spec_.roles) {
        const auto& seq = sequences_.at(role);
        if (seq.empty()) continue;
        for (const auto& asg : all_assignments()) {
          if (seq.front().type == EventType::Recv) {
            ThreadState th = hypothetical_thread(s, role, asg);
            for (const auto& bindings : recv_binding_choices(s, th, seq.front())) {
              Transition t;
              t.t = Transition::T::Spawn;
              t.role = role;
              t.assignment = asg;
              t.recv_bindings = bindings;
              out.push_back(std::move(t));
            }
          } else {
            Transition t;
            t.t = Transition::T::Spawn;
            t.role = role;
            t.assignment = asg;
            out.push_back(std::move(t));
          }
        }
      }
    }
    const ThreadState& test = s.threads.front();
    if (cfg_.lkr_actor) {
      const std::string actor_role = cfg_.effective_actor_role();
      TermPtr a = test.inst.agent_for(actor_role);
      if (a && !s.lkr_agents.count(a->name) && actor_premise_holds(test, actor_role)) {
        Transition t;
        t.t = Transition::T::LkrActor;
        t.agent = a->name;
        out.push_back(std::move(t));
      }
    }
    if (cfg_.lkr_others) {
      std::set<std::string> test_agents;
      for (const auto& [_, ag] : test.inst.roles) test_agents.insert(ag->name);
      for (const auto& a : cfg_.pool) {
        if (test_agents.count(a) || s.lkr_agents.count(a)) continue;
        Transition t;
        t.t = Transition::T::LkrOthers;
        t.agent = a;
        out.push_back(std::move(t));
      }
    }
    std::vector<Transition> recvs, claims;
    for (const auto& th : s.threads) {
      const auto& seq = sequences_.at(th.role);
      if (th.next_event >= seq.size()) continue;
      const Event& ev = seq[th.next_event];
      if (ev.type == EventType::Send) {
        Transition t;
        t.t = Transition::T::Send;
        t.tid = th.tid;
        out.push_back(std::move(t));
      } else if (ev.type == EventType::Claim) {
        Transition t;
        t.t = Transition::T::Claim;
        t.tid = th.tid;
        claims.push_back(std::move(t));
      } else {
        for (const auto& bindings : recv_binding_choices(s, th, ev)) {
          Transition t;
          t.t = Transition::T::Recv;
          t.tid = th.tid;
          t.recv_bindings = bindings;
          recvs.push_back(std::move(t));
        }
      }
    }
    // A pending claim reads nothing and commutes with every other
    // transition, so fire one alone and keep the rest of the frontier for
    // the next step. Strict commit order pins claims to trace positions and
    // keeps the full interleaving.
    if (!cfg_.strict_commit_order && !claims.empty()) return {std::move(claims.front())};
    for (auto& t : recvs) out.push_back(std::move(t));
    for (auto& t : claims) out.push_back(std::move(t));
    return out;
  }

  State apply_transition(const State& s, const Transition& tr) const {
    State ns = s;
    switch (tr.t) {
      case Transition::T::Create: {
        apply_create(ns, tr);
        break;
      }
      case Transition::T::Spawn: {
        int tid = apply_create(ns, tr);
        ThreadState* th = ns.thread(tid);
        switch (sequences_.at(tr.role).front().type) {
          case EventType::Send:
            apply_send(ns, *th);
            break;
          case EventType::Recv:
            apply_recv(ns, *th, tr.recv_bindings);
            break;
          case EventType::Claim:
            apply_claim(ns, *th);
            break;
        }
        break;
      }
      case Transition::T::LkrActor:
      case Transition::T::LkrOthers: {
        const ThreadState& test = ns.threads.front();
        if (tr.t == Transition::T::LkrActor) {
          const std::string actor_role = cfg_.effective_actor_role();
          TermPtr a = test.inst.agent_for(actor_role);
          if (!a || a->name != tr.agent || !actor_premise_holds(test, actor_role))
            throw AkcError("IllegalTransition", "lkr-actor premise fails");
        } else {
          for (const auto& [_, ag] : test.inst.roles)
            if (ag->name == tr.agent)
              throw AkcError("IllegalTransition",
                             "lkr-others targets a test agent");
        }
        if (ns.lkr_agents.count(tr.agent))
          throw AkcError("IllegalTransition", "key already revealed");
        ns.lkr_agents.insert(tr.agent);
        ns.knowledge.add(mk_sk(mk_agent(tr.agent)));
        TraceEntry e;
        e.t = TraceEntry::T::Lkr;
        e.tid = kAdversaryTid;
        e.agent_a = mk_agent(tr.agent);
        e.lkr_actor = (tr.t == Transition::T::LkrActor);
        ns.trace.push_back(std::move(e));
        break;
      }
      case Transition::T::Send: {
        ThreadState* th = ns.thread(tr.tid);
        if (!th) throw AkcError("IllegalTransition", "no such thread");
        apply_send(ns, *th);
        break;
      }
      case Transition::T::Recv: {
        ThreadState* th = ns.thread(tr.tid);
        if (!th) throw AkcError("IllegalTransition", "no such thread");
        apply_recv(ns, *th, tr.recv_bindings);
        break;
      }
      case Transition::T::Claim: {
        ThreadState* th = ns.thread(tr.tid);
        if (!th) throw AkcError("IllegalTransition", "no such thread");
        apply_claim(ns, *th);
        break;
      }
    }
    return ns;
  }

  struct ExploreStats {
    long states = 0;
    long leaves = 0;
    long dedup_hits = 0;
  };

  // Depth-first over every test-assignment root with memoized state dedup.
  // on_leaf fires at states with no enabled transition.
  ExploreStats explore(const std::function<void(const State&)>& on_leaf) const {
    ExploreStats stats;
    std::set<StateHash> seen;
    std::vector<std::map<std::string, std::string>> roots = test_assignments();
    for (std::size_t ri = 0; ri < roots.size(); ++ri) {
      State init = initial_state(roots[ri]);
      dfs(init, ri, seen, stats, on_leaf);
    }
    return stats;
  }

  using StateHash = std::pair<std::uint64_t, std::uint64_t>;

  // 128-bit structural hash standing in for an exact state key. Terms are
  // interned, so a pointer identifies a term; the basis is combined
  // order-independently, everything else in visit order. Create and Lkr
  // trace entries are skipped: their effects live in threads and knowledge.
  StateHash state_hash(const State& s, std::size_t root) const {
    detail::Mixer m;
    m.u(root);
    for (const auto& th : s.threads) {
      m.str(th.role);
      m.u(static_cast<std::uint64_t>(th.tid));
      m.u(th.next_event);
      for (const auto& [r, a] : th.inst.roles) {
        m.str(r);
        m.term(a);
      }
      for (const auto& [v, val] : th.inst.bindings) {
        m.term(v);
        m.term(val);
      }
      m.u(0x7eadULL);
    }
    auto [ksum1, ksum2] = s.knowledge.basis_fingerprint();
    m.u(ksum1);
    m.u(ksum2);
    for (const auto& e : s.trace) {
      if (e.t == TraceEntry::T::Create || e.t == TraceEntry::T::Lkr) continue;
      m.u(static_cast<std::uint64_t>(e.tid));
      m.str(e.label);
      m.term(e.content);
    }
    return {m.h1, m.h2};
  }

 private:
  int apply_create(State& ns, const Transition& tr) const {
    if (ns.runs_created >= cfg_.max_runs)
      throw AkcError("IllegalTransition", "run bound reached");
    if (!spec_.has_role(tr.role)) throw AkcError("UnknownRole", tr.role);
    ThreadState th;
    th.tid = ns.next_tid++;
    th.role = tr.role;
    th.inst.tid = th.tid;
    for (const auto& role : spec_.roles) {
      auto it = tr.assignment.find(role);
      if (it == tr.assignment.end())
        throw AkcError("IllegalTransition",
                       "create assignment not total on roles");
      th.inst.roles[role] = mk_agent(it->second);
    }
    ns.runs_created++;
    TraceEntry e;
    e.t = TraceEntry::T::Create;
    e.tid = th.tid;
    e.role = tr.role;
    e.agent_a = th.inst.roles.at(tr.role);
    for (const auto& [r, a] : tr.assignment) e.assignment[r] = mk_agent(a);
    ns.trace.push_back(std::move(e));
    ns.threads.push_back(std::move(th));
    return ns.threads.back().tid;
  }

  void apply_send(State& ns, ThreadState& th) const {
    const Event& ev = next_event_of(th, EventType::Send);
    TermPtr content = th.inst.apply(ev.content);
    ns.knowledge.add(content);
    TraceEntry e;
    e.t = TraceEntry::T::Send;
    e.tid = th.tid;
    e.label = ev.label;
    e.agent_a = th.inst.agent_for(ev.from);
    e.agent_b = th.inst.agent_for(ev.to);
    e.content = content;
    ns.trace.push_back(std::move(e));
    th.next_event++;
  }

  void apply_recv(State& ns, ThreadState& th,
                  const std::vector<std::pair<TermPtr, TermPtr>>& bindings) const {
    const Event& ev = next_event_of(th, EventType::Recv);
    for (const auto& [v, val] : bindings) th.inst.bindings[v] = val;
    TermPtr content = th.inst.apply(ev.content);
    if (!th.inst.is_ground(content) || !ns.knowledge.derives(content))
      throw AkcError("IllegalTransition",
                     "recv content not derivable: " + to_string(content));
    TraceEntry e;
    e.t = TraceEntry::T::Recv;
    e.tid = th.tid;
    e.label = ev.label;
    e.agent_a = th.inst.agent_for(ev.from);
    e.agent_b = th.inst.agent_for(ev.to);
    e.content = content;
    e.recv_bindings = bindings;
    ns.trace.push_back(std::move(e));
    th.next_event++;
  }

  void apply_claim(State& ns, ThreadState& th) const {
    const Event& ev = next_event_of(th, EventType::Claim);
    TermPtr payload = ev.content ? th.inst.apply(ev.content) : nullptr;
    TraceEntry e;
    e.t = TraceEntry::T::Claim;
    e.tid = th.tid;
    e.label = ev.label;
    e.role = ev.from;
    e.peer_role = ev.to;
    e.claim = ev.claim;
    e.pair_id = ev.pair_id;
    e.content = payload;
    e.agent_a = th.inst.agent_for(ev.from);
    if (!ev.to.empty()) e.agent_b = th.inst.agent_for(ev.to);
    ns.trace.push_back(std::move(e));
    ClaimInstance ci;
    ci.tid = th.tid;
    ci.label = ev.label;
    ci.kind = ev.claim;
    ci.role = ev.from;
    ci.peer = ev.to;
    ci.payload = payload;
    ci.pair_id = ev.pair_id;
    ci.trace_pos = ns.trace.size() - 1;
    ns.claims.push_back(std::move(ci));
    th.next_event++;
  }

  ThreadState hypothetical_thread(const State& s, const std::string& role,
                                  const std::map<std::string, std::string>& asg) const {
    ThreadState th;
    th.tid = s.next_tid;
    th.role = role;
    th.inst.tid = th.tid;
    for (const auto& [r, a] : asg) th.inst.roles[r] = mk_agent(a);
    return th;
  }

  void dfs(const State& s, std::size_t root, std::set<StateHash>& seen,
           ExploreStats& stats, const std::function<void(const State&)>& on_leaf) const {
    if (!seen.insert(state_hash(s, root)).second) {
      stats.dedup_hits++;
      return;
    }
    if (++stats.states > cfg_.states_cap)
      throw AkcError("BudgetExceeded",
                     "state cap " + std::to_string(cfg_.states_cap) + " reached");
    std::vector<Transition> ts = enabled_transitions(s);
    if (ts.empty()) {
      stats.leaves++;
      on_leaf(s);
      return;
    }
    for (const auto& t : ts) dfs(apply_transition(s, t), root, seen, stats, on_leaf);
  }

  const Event& next_event_of(const ThreadState& th, EventType expect) const {
    const auto& seq = sequences_.at(th.role);
    if (th.next_event >= seq.size())
      throw AkcError("IllegalTransition", "thread finished");
    const Event& ev = seq[th.next_event];
    if (ev.type != expect)
      throw AkcError("IllegalTransition", "event type mismatch");
    return ev;
  }

  bool actor_premise_holds(const ThreadState& test,
                           const std::string& actor_role) const {
    TermPtr a = test.inst.agent_for(actor_role);
    if (!a) return false;
    for (const auto& [role, agent] : test.inst.roles)
      if (role != actor_role && agent->name == a->name) return false;
    return true;
  }

  void enumerate_assignments(const std::vector<std::string>& roles,
                             std::size_t i, std::map<std::string, std::string>& cur,
                             std::vector<std::map<std::string, std::string>>& out) const {
    if (i == roles.size()) {
      if (cfg_.distinct_agents) {
        std::set<std::string> used;
        for (const auto& [_, a] : cur)
          if (!used.insert(a).second) return;
      }
      out.push_back(cur);
      return;
    }
    for (const auto& a : cfg_.pool) {
      cur[roles[i]] = a;
      enumerate_assignments(roles, i + 1, cur, out);
    }
    cur.erase(roles[i]);
  }

  const std::vector<std::map<std::string, std::string>>& all_assignments() const {
    if (all_assignments_.empty()) {
      std::vector<std::map<std::string, std::string>> out;
      std::map<std::string, std::string> cur;
      enumerate_assignments(spec_.roles, 0, cur, out);
      all_assignments_ = out;
    }
    return all_assignments_;
  }

  // The binding set for a recv is a function of the knowledge basis, the
  // instantiated pattern, and the receiving role's variable types. The key
  // holds the pattern term, pinning its address for the entry's lifetime.
  struct ChoiceKey {
    std::uint64_t f1, f2;
    TermPtr pattern;
    std::string role;

    bool operator==(const ChoiceKey& o) const {
      return f1 == o.f1 && f2 == o.f2 && pattern.get() == o.pattern.get() &&
             role == o.role;
    }
  };
  struct ChoiceKeyHash {
    std::size_t operator()(const ChoiceKey& k) const {
      detail::Mixer m;
      m.u(k.f1);
      m.u(k.f2);
      m.u(k.pattern->hash);
      m.str(k.role);
      return static_cast<std::size_t>(m.h1);
    }
  };
  using ChoiceList = std::vector<std::vector<std::pair<TermPtr, TermPtr>>>;

  // Derivation-directed enumeration of recv bindings: walk the ways the
  // adversary can produce the pattern — replay of a basis term, or synthesis
  // from producible parts — binding variables as positions are crossed.
  // Variable values stay inside the subterm closure of the knowledge, which
  // bounds the search; the exact derives gate judges every result.
  const ChoiceList& recv_binding_choices(const State& s, const ThreadState& th,
                                         const Event& ev) const {
    TermPtr pattern = th.inst.apply(ev.content);
    auto [f1, f2] = s.knowledge.basis_fingerprint();
    ChoiceKey ck{f1, f2, pattern, th.role};
    if (auto hit = choice_cache_.find(ck); hit != choice_cache_.end())
      return hit->second;
    std::vector<TermPtr> vars;
    unbound_vars(pattern, vars);
    ChoiceList out;
    std::set<std::vector<const Term*>> seen;
    for (const auto& sg : produce(s, th, pattern, Sigma{})) {
      std::vector<std::pair<TermPtr, TermPtr>> bind;
      std::vector<const Term*> key;
      bool total = true;
      for (const auto& v : vars) {
        auto it = sg.find(v);
        if (it == sg.end()) {
          total = false;
          break;
        }
        bind.emplace_back(v, it->second);
        key.push_back(it->second.get());
      }
      if (!total || !seen.insert(std::move(key)).second) continue;
      if (!s.knowledge.derives(substitute(pattern, sg))) continue;
      out.push_back(std::move(bind));
    }
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
      for (std::size_t i = 0; i < a.size() && i < b.size(); ++i)
        if (int c = term_cmp(a[i].second, b[i].second); c != 0) return c < 0;
      return a.size() < b.size();
    });
    return choice_cache_.emplace(std::move(ck), std::move(out)).first->second;
  }

  using Sigma = std::map<TermPtr, TermPtr, TermLess>;

  bool value_fits(const TermPtr& val, const TypeDesc& td) const {
    switch (td.k) {
      case TypeDesc::K::Any:
        return true;
      case TypeDesc::K::Nonce:
        return val->kind == Kind::BoundFresh;
      case TypeDesc::K::AgentName:
        return val->kind == Kind::Agent;
      case TypeDesc::K::Hash:
        return val->kind == Kind::Apply && (td.fn.empty() || val->name == td.fn);
    }
    return false;
  }

  // Bound variables resolve through sg during descent; new bindings go on
  // the trail so the caller can unwind a failed or finished attempt.
  bool unify_ground(const ThreadState& th, const TermPtr& p, const TermPtr& g,
                    Sigma& sg, std::vector<TermPtr>& trail) const {
    if (p->kind == Kind::BoundVar) {
      auto it = sg.find(p);
      if (it != sg.end()) return it->second.get() == g.get();
      if (!value_fits(g, spec_.var_type(th.role, p->name))) return false;
      sg[p] = g;
      trail.push_back(p);
      return true;
    }
    if (p.get() == g.get()) return true;
    if (p->kind != g->kind || p->name != g->name || p->tid != g->tid ||
        p->args.size() != g->args.size())
      return false;
    for (std::size_t i = 0; i < p->args.size(); ++i)
      if (!unify_ground(th, p->args[i], g->args[i], sg, trail)) return false;
    return true;
  }

  bool sigma_ground(const TermPtr& p, const Sigma& sg) const {
    if (p->kind == Kind::BoundVar) return sg.count(p) != 0;
    for (const auto& a : p->args)
      if (!sigma_ground(a, sg)) return false;
    return true;
  }

  // All closure-bounded substitutions under which the adversary can produce
  // the pattern. Over-generation is harmless (the caller's derives gate is
  // exact); the constructor cases mirror synthesis, so nothing producible is
  // missed. Sk never synthesizes, it only arrives whole via the basis.
  std::vector<Sigma> produce(const State& s, const ThreadState& th,
                             const TermPtr& p, const Sigma& sg) const {
    std::vector<Sigma> out;
    if (sigma_ground(p, sg)) {
      if (s.knowledge.derives(substitute(p, sg))) out.push_back(sg);
      return out;
    }
    if (p->kind == Kind::BoundVar) {
      const TypeDesc td = spec_.var_type(th.role, p->name);
      for (const auto& cand : s.knowledge.subterm_closure()) {
        if (!value_fits(cand, td) || !s.knowledge.derives(cand)) continue;
        Sigma ext = sg;
        ext[p] = cand;
        out.push_back(std::move(ext));
      }
      return out;
    }
    {
      Sigma work = sg;
      std::vector<TermPtr> trail;
      for (const auto& b : s.knowledge.basis_set()) {
        if (b->kind != p->kind) continue;
        if (unify_ground(th, p, b, work, trail)) out.push_back(work);
        while (!trail.empty()) {
          work.erase(trail.back());
          trail.pop_back();
        }
      }
    }
    switch (p->kind) {
      case Kind::Pair:
      case Kind::Enc:
      case Kind::Pk:
      case Kind::Apply: {
        // Ground args first: each is a single derives test, and a failing
        // one zeroes the product before any variable enumeration. The
        // result set does not depend on the order.
        std::vector<TermPtr> ordered(p->args.begin(), p->args.end());
        std::stable_partition(ordered.begin(), ordered.end(),
                              [&](const TermPtr& a) { return sigma_ground(a, sg); });
        std::vector<Sigma> acc = {sg};
        for (const auto& a : ordered) {
          std::vector<Sigma> next;
          for (const auto& cur : acc) {
            std::vector<Sigma> sub = produce(s, th, a, cur);
            next.insert(next.end(), std::make_move_iterator(sub.begin()),
                        std::make_move_iterator(sub.end()));
          }
          acc = std::move(next);
          if (acc.empty()) break;
        }
        out.insert(out.end(), std::make_move_iterator(acc.begin()),
                   std::make_move_iterator(acc.end()));
        break;
      }
      default:
        break;
    }
    return out;
  }

  const ProtocolSpec& spec_;
  VerifyConfig cfg_;
  std::map<std::string, std::vector<Event>> sequences_;
  mutable std::vector<std::map<std::string, std::string>> all_assignments_;
  mutable std::unordered_map<ChoiceKey, ChoiceList, ChoiceKeyHash> choice_cache_;
};

}  // namespace akc
