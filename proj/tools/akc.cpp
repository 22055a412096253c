#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include <akc/akc.hpp>

using namespace akc;

namespace {

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else if (!isspace(static_cast<unsigned char>(c))) {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

std::set<AttackKind> parse_attack_list(const std::string& s) {
  std::set<AttackKind> kinds;
  for (const auto& k : split_list(s)) {
    if (k == "all") {
      kinds = {AttackKind::Secrecy, AttackKind::Substitution,
               AttackKind::RoleMixup, AttackKind::Parallel};
    } else if (k == "secrecy") {
      kinds.insert(AttackKind::Secrecy);
    } else if (k == "substitution") {
      kinds.insert(AttackKind::Substitution);
    } else if (k == "roleMixup") {
      kinds.insert(AttackKind::RoleMixup);
    } else if (k == "parallel") {
      kinds.insert(AttackKind::Parallel);
    } else {
      throw AkcError("ValidationError", "unknown attack kind " + k);
    }
  }
  return kinds;
}

std::vector<std::string> agent_pool(int n) {
  static const std::vector<std::string> names = {"alice", "bob",  "charlie",
                                                 "dave",  "erin", "frank"};
  return {names.begin(), names.begin() + n};
}

void parse_adversary(const std::string& adv, VerifyConfig& cfg) {
  if (adv == "none") return;
  if (adv == "lkr-others") {
    cfg.lkr_others = true;
  } else if (adv == "both") {
    cfg.lkr_actor = cfg.lkr_others = true;
  } else if (adv.rfind("lkr-actor", 0) == 0) {
    cfg.lkr_actor = true;
    if (adv.size() > 9 && adv[9] == ':') cfg.actor_role = adv.substr(10);
  } else {
    throw AkcError("ValidationError", "unknown adversary " + adv);
  }
}

// Payload syntax for the command line: a name or a comma list of names,
// resolved against the given role's declarations.
TermPtr parse_payload(const ProtocolSpec& spec, const std::string& role,
                      const std::string& text) {
  std::string s = text;
  if (!s.empty() && s.front() == '(' && s.back() == ')')
    s = s.substr(1, s.size() - 2);
  std::vector<TermPtr> parts;
  for (const auto& name : split_list(s)) {
    const std::string* owner = spec.fresh_owner(name);
    if (owner && *owner == role)
      parts.push_back(mk_fresh(name));
    else if (spec.has_var(role, name))
      parts.push_back(mk_var(name));
    else if (spec.has_role(name))
      parts.push_back(mk_role(name));
    else
      parts.push_back(mk_const(name));
  }
  if (parts.empty())
    throw AkcError("ValidationError", "empty payload");
  return mk_tuple(parts);
}

int exit_code_for(const AkcError& e) {
  if (e.code == "BudgetExceeded") return 3;
  if (e.code == "RegressionMismatch") return 1;
  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"bounded verifier and hardening compiler for security protocols"};
  app.require_subcommand(1);

  // verify
  auto* verify = app.add_subcommand("verify", "explore a protocol and check claims");
  std::string v_file, v_test, v_adv = "none", v_checks = "all", v_attacks,
              v_format = "text";
  int v_runs = 2, v_fresh = 2, v_agents = 3;
  long v_cap = 1000000;
  bool v_distinct = false, v_det = false, v_strict = false;
  verify->add_option("file", v_file, "protocol file")->required();
  verify->add_option("--test", v_test, "role under test")->required();
  verify->add_option("--adversary", v_adv,
                     "none | lkr-actor[:<role>] | lkr-others | both");
  verify->add_option("--max-runs", v_runs, "created thread bound");
  verify->add_option("--max-adv-fresh", v_fresh, "adversary nonce bound");
  verify->add_option("--agents", v_agents, "agent pool size (2..6)")
      ->check(CLI::Range(2, 6));
  verify->add_flag("--distinct-agents", v_distinct,
                   "test assignments use pairwise distinct agents");
  verify->add_option("--checks", v_checks, "all | none | comma list of claim labels");
  verify->add_option("--attacks", v_attacks,
                     "comma list of secrecy,substitution,roleMixup,parallel or all");
  verify->add_option("--format", v_format, "text | json");
  verify->add_flag("--deterministic", v_det,
                   "kept for compatibility; output is always deterministic");
  verify->add_option("--states-cap", v_cap, "abort after this many states");
  verify->add_flag("--strict-commit-order", v_strict,
                   "commit requires the witnessing send before the claim");

  // transform
  auto* transform = app.add_subcommand("transform", "apply a hardening transformation");
  std::string t_file, t_op, t_r, t_rp, t_payload;
  int t_parties = 0;
  transform->add_option("file", t_file, "protocol file");
  transform->add_option("--op", t_op, "ts | ta | tr | tm")->required();
  transform->add_option("--initiator", t_r, "kernel initiator role");
  transform->add_option("--responder", t_rp, "kernel responder role");
  transform->add_option("--payload", t_payload,
                        "payload (name or comma list, initiator view)");
  transform->add_option("--parties", t_parties, "party count for tm");

  // harden
  auto* harden = app.add_subcommand("harden", "run the hardening algorithms");
  std::string h_file, h_algo = "both";
  harden->add_option("file", h_file, "protocol file")->required();
  harden->add_option("--algo", h_algo, "secrecy | commit | both");

  // corpus
  auto* corpus = app.add_subcommand("corpus", "run the regression corpus");
  std::string c_dir;
  bool c_update = false;
  corpus->add_option("--dir", c_dir, "corpus directory (default AKC_CORPUS_DIR)");
  corpus->add_flag("--update", c_update, "rewrite pinned expectations");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*verify) {
      ProtocolSpec spec = parse_protocol(read_file(v_file));
      check_wellformed(spec);
      VerifyConfig cfg;
      cfg.test_role = v_test;
      parse_adversary(v_adv, cfg);
      cfg.max_runs = v_runs;
      cfg.max_adv_fresh = v_fresh;
      cfg.pool = agent_pool(v_agents);
      cfg.distinct_agents = v_distinct;
      cfg.strict_commit_order = v_strict;
      cfg.states_cap = v_cap;
      (void)v_det;
      Execution ex(spec, cfg);
      VerifyOutcome out;
      if (v_checks != "none") {
        ClaimEvalOptions opts;
        opts.strict_commit_order = v_strict;
        out.check = akcs_check(ex, opts);
        out.checks_run = true;
        if (v_checks != "all") {
          std::vector<std::string> keep = split_list(v_checks);
          std::vector<ClaimVerdict> filtered;
          for (auto& v : out.check.verdicts) {
            for (const auto& k : keep)
              if (v.label == k) filtered.push_back(std::move(v));
          }
          out.check.verdicts = std::move(filtered);
        }
      }
      if (!v_attacks.empty()) {
        out.attacks = scan_attacks(ex, parse_attack_list(v_attacks));
        out.attacks_run = true;
      }
      ordered_json report = verify_report(spec, cfg, out);
      if (v_format == "json")
        std::cout << report.dump(2) << "\n";
      else
        std::cout << verify_text(report);
      return report["ok"].get<bool>() ? 0 : 1;
    }

    if (*transform) {
      if (t_op == "tm") {
        if (t_parties < 2) throw AkcError("InvalidPartyCount", std::to_string(t_parties));
        std::cout << print_protocol(tm_build(t_parties));
        return 0;
      }
      if (t_file.empty())
        throw AkcError("ValidationError", "transform needs a protocol file");
      ProtocolSpec spec = parse_protocol(read_file(t_file));
      check_wellformed(spec);
      TransformResult res;
      if (t_op == "tr") {
        res = tr_transform(spec);
      } else if (t_op == "ts") {
        if (t_r.empty() || t_rp.empty())
          throw AkcError("ValidationError", "ts needs --initiator and --responder");
        TermPtr m = t_payload.empty() ? nullptr : parse_payload(spec, t_r, t_payload);
        res = ts_transform(spec, t_r, t_rp, m);
      } else if (t_op == "ta") {
        if (t_r.empty() || t_rp.empty() || t_payload.empty())
          throw AkcError("ValidationError",
                         "ta needs --initiator, --responder and --payload");
        res = ta_transform(spec, t_r, t_rp, parse_payload(spec, t_r, t_payload));
      } else {
        throw AkcError("ValidationError", "unknown op " + t_op);
      }
      for (const auto& w : res.warnings) std::cerr << "warning: " << w << "\n";
      std::cout << print_protocol(res.spec);
      return 0;
    }

    if (*harden) {
      ProtocolSpec spec = parse_protocol(read_file(h_file));
      check_wellformed(spec);
      std::vector<std::string> warnings;
      if (h_algo == "secrecy" || h_algo == "both") {
        TransformResult r = algo1_secrecy(spec);
        spec = std::move(r.spec);
        for (auto& w : r.warnings) warnings.push_back(std::move(w));
      }
      if (h_algo == "commit" || h_algo == "both") {
        TransformResult r = algo2_commit(spec);
        spec = std::move(r.spec);
        for (auto& w : r.warnings) warnings.push_back(std::move(w));
      }
      if (h_algo != "secrecy" && h_algo != "commit" && h_algo != "both")
        throw AkcError("ValidationError", "unknown algo " + h_algo);
      for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
      std::cout << print_protocol(spec);
      return 0;
    }

    if (*corpus) {
      std::string dir = c_dir.empty() ? corpus_dir_from_env() : c_dir;
      CorpusResult res = run_corpus(dir, c_update);
      std::cout << res.report.dump(2) << "\n";
      return res.ok ? 0 : 1;
    }
  } catch (const AkcError& e) {
    std::cerr << "error[" << e.code << "]: " << e.detail << "\n";
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
