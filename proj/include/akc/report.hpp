#pragma once

#include <json.hpp>

#include "attacks.hpp"
#include "claims.hpp"

namespace akc {

using ordered_json = nlohmann::ordered_json;

inline std::string adversary_string(const VerifyConfig& cfg) {
  if (cfg.lkr_actor && cfg.lkr_others) return "both";
  if (cfg.lkr_actor)
    return cfg.actor_role.empty() ? "lkr-actor" : "lkr-actor:" + cfg.actor_role;
  if (cfg.lkr_others) return "lkr-others";
  return "none";
}

inline std::string trace_event_string(const TraceEntry& e) {
  switch (e.t) {
    case TraceEntry::T::Create: {
      std::string s = "create " + e.role + " #" + std::to_string(e.tid) + " (";
      bool first = true;
      for (const auto& [r, a] : e.assignment) {
        if (!first) s += ",";
        s += r + "=" + a->name;
        first = false;
      }
      return s + ")";
    }
    case TraceEntry::T::Lkr:
      return std::string("lkr ") + e.agent_a->name +
             (e.lkr_actor ? " (actor)" : " (others)");
    case TraceEntry::T::Send:
      return "send " + e.label + " " + e.agent_a->name + "->" +
             e.agent_b->name + ": " + to_string(e.content);
    case TraceEntry::T::Recv:
      return "recv " + e.label + " " + e.agent_a->name + "->" +
             e.agent_b->name + ": " + to_string(e.content);
    case TraceEntry::T::Claim: {
      std::string s = "claim " + e.label + " " + claim_kind_name(e.claim) +
                      " by " + e.role;
      if (e.content) s += ": " + to_string(e.content);
      return s;
    }
  }
  return "?";
}

inline ordered_json trace_json(const std::vector<TraceEntry>& trace) {
  ordered_json arr = ordered_json::array();
  for (std::size_t i = 0; i < trace.size(); ++i) {
    const TraceEntry& e = trace[i];
    ordered_json ev;
    ev["step"] = i;
    ev["tid"] = e.tid;
    ev["event"] = trace_event_string(e);
    std::string delta;
    if (e.t == TraceEntry::T::Send)
      delta = to_string(e.content);
    else if (e.t == TraceEntry::T::Lkr)
      delta = "sk(" + e.agent_a->name + ")";
    ev["knowledgeDelta"] = delta;
    arr.push_back(std::move(ev));
  }
  return arr;
}

inline ordered_json assignment_json(const std::map<std::string, std::string>& a) {
  ordered_json o;
  for (const auto& [r, ag] : a) o[r] = ag;
  return o;
}

inline ordered_json attack_json(const AttackReport& r, const VerifyConfig& cfg) {
  ordered_json o;
  o["kind"] = attack_kind_name(r.kind);
  o["protocol"] = r.protocol;
  if (!r.claim_label.empty()) o["claim"] = r.claim_label;
  if (r.target) o["targetTerm"] = to_string(r.target);
  if (r.swap.sent) {
    ordered_json sw;
    sw["label"] = r.swap.label;
    sw["sent"] = to_string(r.swap.sent);
    sw["received"] = to_string(r.swap.received);
    o["swap"] = std::move(sw);
  }
  if (!r.detail.empty()) o["detail"] = r.detail;
  o["victimTid"] = r.victim_tid;
  o["bound"] = cfg.max_runs;
  o["adversary"] = adversary_string(cfg);
  o["testAssignment"] = assignment_json(r.test_assignment);
  o["trace"] = trace_json(r.trace);
  return o;
}

inline ordered_json claim_json(const ClaimVerdict& v, bool include_witness) {
  ordered_json o;
  o["label"] = v.label;
  o["kind"] = claim_kind_name(v.kind);
  o["role"] = v.role;
  o["holds"] = v.holds;
  o["instances"] = v.instances;
  o["failures"] = v.failures;
  if (!v.holds && v.has_witness && include_witness) {
    ordered_json w;
    w["testAssignment"] = assignment_json(v.witness.test_assignment);
    if (v.witness_claim.payload)
      w["payload"] = to_string(v.witness_claim.payload);
    w["trace"] = trace_json(v.witness.trace);
    o["witness"] = std::move(w);
  }
  return o;
}

struct VerifyOutcome {
  CheckResult check;
  AttackScanResult attacks;
  bool checks_run = false;
  bool attacks_run = false;
};

inline ordered_json verify_report(const ProtocolSpec& spec,
                                  const VerifyConfig& cfg,
                                  const VerifyOutcome& out,
                                  bool include_witness = true) {
  ordered_json o;
  o["schemaVersion"] = "1";
  o["protocol"] = spec.name;
  o["test"] = cfg.test_role;
  o["adversary"] = adversary_string(cfg);
  ordered_json bounds;
  bounds["maxRuns"] = cfg.max_runs;
  bounds["maxAdvFresh"] = cfg.max_adv_fresh;
  bounds["distinctAgents"] = cfg.distinct_agents;
  o["bounds"] = std::move(bounds);
  if (out.checks_run) {
    ordered_json claims = ordered_json::array();
    for (const auto& v : out.check.verdicts)
      claims.push_back(claim_json(v, include_witness));
    o["claims"] = std::move(claims);
    ordered_json stats;
    stats["states"] = out.check.stats.states;
    stats["leaves"] = out.check.stats.leaves;
    o["stats"] = std::move(stats);
  }
  if (out.attacks_run) {
    ordered_json arr = ordered_json::array();
    for (const auto& a : out.attacks.attacks)
      arr.push_back(attack_json(a, cfg));
    o["attacks"] = std::move(arr);
  }
  bool ok = true;
  if (out.checks_run) ok &= out.check.all_hold();
  if (out.attacks_run) ok &= out.attacks.attacks.empty();
  o["ok"] = ok;
  return o;
}

inline std::string verify_text(const ordered_json& report) {
  std::string s;
  s += "protocol " + report["protocol"].get<std::string>() + " test=" +
       report["test"].get<std::string>() + " adversary=" +
       report["adversary"].get<std::string>() + "\n";
  if (report.contains("claims")) {
    for (const auto& c : report["claims"]) {
      s += "  claim " + c["label"].get<std::string>() + " (" +
           c["kind"].get<std::string>() + "): " +
           (c["holds"].get<bool>() ? "holds" : "FAILS") + " [" +
           std::to_string(c["instances"].get<long>()) + " instances, " +
           std::to_string(c["failures"].get<long>()) + " failing]\n";
      if (c.contains("witness")) {
        for (const auto& ev : c["witness"]["trace"])
          s += "      " + ev["event"].get<std::string>() + "\n";
      }
    }
  }
  if (report.contains("attacks")) {
    if (report["attacks"].empty()) {
      s += "  no attacks found\n";
    } else {
      for (const auto& a : report["attacks"]) {
        s += "  attack " + a["kind"].get<std::string>();
        if (a.contains("targetTerm"))
          s += " on " + a["targetTerm"].get<std::string>();
        if (a.contains("swap"))
          s += " swap " + a["swap"]["sent"].get<std::string>() + " -> " +
               a["swap"]["received"].get<std::string>() + " at " +
               a["swap"]["label"].get<std::string>();
        if (a.contains("detail")) s += " (" + a["detail"].get<std::string>() + ")";
        s += "\n";
        for (const auto& ev : a["trace"])
          s += "      " + ev["event"].get<std::string>() + "\n";
      }
    }
  }
  s += report["ok"].get<bool>() ? "ok\n" : "NOT ok\n";
  return s;
}

}  // namespace akc
