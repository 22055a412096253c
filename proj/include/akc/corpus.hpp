#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "parse.hpp"
#include "report.hpp"

namespace akc {

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw AkcError("ValidationError", "cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::string corpus_dir_from_env() {
  const char* d = std::getenv("AKC_CORPUS_DIR");
  return d ? d : "corpus";
}

inline VerifyConfig config_from_json(const ordered_json& run,
                                     const ProtocolSpec& spec) {
  VerifyConfig cfg;
  cfg.test_role = run.at("test").get<std::string>();
  std::string adv = run.value("adversary", "none");
  if (adv == "none") {
  } else if (adv == "lkr-others") {
    cfg.lkr_others = true;
  } else if (adv == "both") {
    cfg.lkr_actor = cfg.lkr_others = true;
  } else if (adv.rfind("lkr-actor", 0) == 0) {
    cfg.lkr_actor = true;
    if (adv.size() > 9 && adv[9] == ':') cfg.actor_role = adv.substr(10);
  } else {
    throw AkcError("ValidationError", "unknown adversary " + adv);
  }
  cfg.max_runs = run.value("maxRuns", 2);
  cfg.max_adv_fresh = run.value("maxAdvFresh", 2);
  int agents = run.value("agents", 3);
  if (agents < 2 || agents > 6)
    throw AkcError("ValidationError", "agents out of range");
  static const std::vector<std::string> names = {"alice", "bob",  "charlie",
                                                 "dave",  "erin", "frank"};
  cfg.pool = {names.begin(), names.begin() + agents};
  cfg.distinct_agents = run.value("distinctAgents", false);
  cfg.strict_commit_order = run.value("strictCommitOrder", false);
  cfg.states_cap = run.value("statesCap", 1000000L);
  (void)spec;
  return cfg;
}

inline std::set<AttackKind> attack_kinds_from_json(const ordered_json& run) {
  std::set<AttackKind> kinds;
  if (!run.contains("attacks")) return kinds;
  for (const auto& k : run["attacks"]) {
    std::string s = k.get<std::string>();
    if (s == "secrecy")
      kinds.insert(AttackKind::Secrecy);
    else if (s == "substitution")
      kinds.insert(AttackKind::Substitution);
    else if (s == "roleMixup")
      kinds.insert(AttackKind::RoleMixup);
    else if (s == "parallel")
      kinds.insert(AttackKind::Parallel);
    else
      throw AkcError("ValidationError", "unknown attack kind " + s);
  }
  return kinds;
}

// Observed behaviour of one pinned run: claim verdicts plus the set of
// attack kinds found.
inline ordered_json run_observation(const ProtocolSpec& spec,
                                    const ordered_json& run) {
  VerifyConfig cfg = config_from_json(run, spec);
  Execution ex(spec, cfg);
  ordered_json obs;
  bool checks = run.value("checks", true);
  if (checks) {
    ClaimEvalOptions opts;
    opts.strict_commit_order = cfg.strict_commit_order;
    CheckResult res = akcs_check(ex, opts);
    ordered_json claims;
    for (const auto& v : res.verdicts) claims[v.label] = v.holds;
    obs["claims"] = std::move(claims);
  }
  std::set<AttackKind> kinds = attack_kinds_from_json(run);
  if (!kinds.empty()) {
    AttackScanResult res = scan_attacks(ex, kinds);
    std::set<std::string> found;
    for (const auto& a : res.attacks) found.insert(attack_kind_name(a.kind));
    ordered_json arr = ordered_json::array();
    for (const auto& f : found) arr.push_back(f);
    obs["attacks"] = std::move(arr);
  }
  return obs;
}

struct CorpusResult {
  bool ok = true;
  ordered_json report;
};

// Runs every corpus entry against its pinned expectations. With update set,
// rewrites the expectation file from observed behaviour instead.
inline CorpusResult run_corpus(const std::string& dir, bool update = false) {
  namespace fs = std::filesystem;
  CorpusResult out;
  const std::string expected_path = dir + "/expected.json";
  ordered_json expected;
  {
    std::ifstream in(expected_path);
    if (!in)
      throw AkcError("ValidationError", "missing " + expected_path);
    in >> expected;
  }
  ordered_json report;
  report["schemaVersion"] = "1";
  ordered_json entries = ordered_json::array();
  for (auto& entry : expected["entries"]) {
    const std::string file = entry.at("file").get<std::string>();
    ordered_json erep;
    erep["file"] = file;
    ProtocolSpec spec = parse_protocol(read_file(dir + "/" + file));
    check_wellformed(spec);
    erep["protocol"] = spec.name;
    ordered_json runs = ordered_json::array();
    for (auto& run : entry["runs"]) {
      ordered_json rrep;
      rrep["name"] = run.value("name", "");
      ordered_json obs = run_observation(spec, run);
      rrep["observed"] = obs;
      if (update) {
        run["expect"] = obs;
        rrep["status"] = "updated";
      } else if (!run.contains("expect")) {
        rrep["status"] = "unpinned";
        out.ok = false;
      } else if (run["expect"] == obs) {
        rrep["status"] = "match";
      } else {
        rrep["status"] = "mismatch";
        rrep["expected"] = run["expect"];
        out.ok = false;
      }
      runs.push_back(std::move(rrep));
    }
    erep["runs"] = std::move(runs);
    entries.push_back(std::move(erep));
  }
  report["entries"] = std::move(entries);
  report["ok"] = out.ok;
  out.report = std::move(report);
  if (update) {
    std::ofstream o(expected_path);
    o << expected.dump(2) << "\n";
  }
  if (!out.ok && !update)
    throw AkcError("RegressionMismatch", out.report.dump(2));
  return out;
}

}  // namespace akc
