#pragma once

#include "tagging.hpp"

namespace akc {

inline std::set<std::string> used_names(const ProtocolSpec& spec) {
  auto declared = spec.declared_symbols();
  std::set<std::string> out(declared.begin(), declared.end());
  for (const auto& item : spec.items) {
    TermSet subs;
    if (item.is_step) {
      collect_subterms(item.step.content, subs);
    } else if (item.claim.payload) {
      collect_subterms(item.claim.payload, subs);
    }
    for (const auto& t : subs)
      if (t->kind == Kind::Const || t->kind == Kind::Apply ||
          t->kind == Kind::Fresh || t->kind == Kind::Var)
        out.insert(t->name);
  }
  return out;
}

inline std::set<std::string> used_labels(const ProtocolSpec& spec) {
  std::set<std::string> out;
  for (const auto& item : spec.items)
    out.insert(item.is_step ? item.step.label : item.claim.label);
  return out;
}

inline std::string pick_name(const std::string& base, std::set<std::string>& taken) {
  std::string name = base;
  while (taken.count(name)) name += "x";
  taken.insert(name);
  return name;
}

// Index of each role's trailing-claim suffix within the item list.
inline std::set<std::size_t> trailing_claim_positions(const ProtocolSpec& spec,
                                                      const std::string& role) {
  std::set<std::size_t> out;
  for (std::size_t i = spec.items.size(); i-- > 0;) {
    const Item& item = spec.items[i];
    if (item.is_step) {
      if (item.step.from == role || item.step.to == role) break;
      continue;
    }
    if (item.claim.role == role) out.insert(i);
  }
  return out;
}

struct TransformResult {
  ProtocolSpec spec;
  std::vector<std::string> warnings;
};

// ---------------------------------------------------------------------------
// Secrecy kernel: a fresh transport key from responder to initiator carries
// the target payload back under that key, with existing look-alike
// ciphertexts disambiguated by a tag constant.

inline TransformResult ts_transform(const ProtocolSpec& in, const std::string& R,
                                    const std::string& Rp, TermPtr m = nullptr) {
  if (!in.has_role(R)) throw AkcError("UnknownRole", R);
  if (!in.has_role(Rp)) throw AkcError("UnknownRole", Rp);
  if (R == Rp) throw AkcError("ValidationError", "kernel roles must differ");
  TransformResult res;
  ProtocolSpec spec = in;
  std::set<std::string> names = used_names(in);
  std::set<std::string> labels = used_labels(in);

  const std::string c1 = pick_name("c1", names);
  const std::string c2 = pick_name("c2", names);
  const std::string c3 = pick_name("c3", names);
  const std::string kname = pick_name("__k", names);

  // Premise: the payload must contain a fresh value of R that appears
  // nowhere else; otherwise extend it with a new one.
  bool premise_ok = false;
  if (m) {
    TermSet subs;
    collect_subterms(m, subs);
    for (const auto& t : subs) {
      if (t->kind != Kind::Fresh || !subterm(t, m, SubtermMode::Accessible))
        continue;
      const std::string* owner = in.fresh_owner(t->name);
      if (!owner || *owner != R) continue;
      bool elsewhere = false;
      for (const auto& item : in.items) {
        TermPtr body = item.is_step ? item.step.content : item.claim.payload;
        if (body && subterm(t, body, SubtermMode::Plain)) elsewhere = true;
      }
      if (!elsewhere) premise_ok = true;
    }
  }
  std::string nname;
  if (!m) {
    nname = pick_name("__n", names);
    m = mk_fresh(nname);
  } else if (!premise_ok) {
    nname = pick_name("__n", names);
    m = mk_pair(m, mk_fresh(nname));
    res.warnings.push_back(
        "PremiseUnchecked: payload extended with fresh " + nname +
        " to guarantee an unused fresh component");
  }
  if (!nname.empty()) {
    spec.fresh[R].push_back(nname);
    spec.vars[Rp].emplace_back(nname, TypeDesc{TypeDesc::K::Nonce, ""});
  }
  spec.fresh[Rp].push_back(kname);
  spec.vars[R].emplace_back(kname, TypeDesc{TypeDesc::K::Nonce, ""});

  const std::string l1 = pick_name("__ts1", labels);
  const std::string l2 = pick_name("__ts2", labels);
  const std::string l3 = pick_name("__ts3", labels);
  const std::string l4 = pick_name("__ts4", labels);
  const std::string l5 = pick_name("__ts5", labels);

  TermPtr c1t = mk_const(c1);
  TermPtr M = mk_enc(mk_tuple({mk_fresh(kname), mk_const(c2)}),
                     mk_pk(mk_role(R)));
  TermPtr N_inner = mk_enc(mk_tuple({m, mk_const(c3)}), mk_var(kname));
  TermPtr N = mk_enc(N_inner, mk_pk(mk_role(Rp)));

  TermSet S = kernel_conflict_set(in, {M, N, N_inner});

  // Tag the original protocol, leave the kernel untagged.
  std::vector<Item> tagged;
  std::set<std::size_t> moved = trailing_claim_positions(in, R);
  for (std::size_t i : trailing_claim_positions(in, Rp)) moved.insert(i);
  std::vector<Item> moved_items;
  for (std::size_t i = 0; i < spec.items.size(); ++i) {
    Item item = spec.items[i];
    if (item.is_step) {
      item.step.content = tag_term(c1t, item.step.content, &S);
    } else if (item.claim.payload) {
      item.claim.payload = tag_term(c1t, item.claim.payload, &S);
    }
    if (moved.count(i))
      moved_items.push_back(std::move(item));
    else
      tagged.push_back(std::move(item));
  }

  Item s1;
  s1.is_step = true;
  s1.step = {l1, R, Rp, mk_const("Request")};
  Item s2;
  s2.is_step = true;
  s2.step = {l2, Rp, R, M};
  Item s3;
  s3.is_step = true;
  s3.step = {l3, R, Rp, N};
  Item cl4;
  cl4.is_step = false;
  cl4.claim = {l4, R, ClaimKind::Secret, "", m, ""};
  spec.items = std::move(tagged);
  spec.items.push_back(std::move(s1));
  spec.items.push_back(std::move(s2));
  spec.items.push_back(std::move(s3));
  spec.items.push_back(std::move(cl4));
  Item cl5;
  cl5.is_step = false;
  cl5.claim = {l5, Rp, ClaimKind::Secret, "", view_as(spec, m, Rp), ""};
  spec.items.push_back(std::move(cl5));
  for (auto& item : moved_items) spec.items.push_back(std::move(item));

  check_wellformed(spec);
  res.spec = std::move(spec);
  return res;
}

// ---------------------------------------------------------------------------
// Commit kernel: a hash challenge binding a shared payload to a fresh nonce,
// answered by the peer hashing the nonce back, with running/commit claims on
// both exchanges.

inline TransformResult ta_transform(const ProtocolSpec& in, const std::string& R,
                                    const std::string& Rp, TermPtr m) {
  if (!in.has_role(R)) throw AkcError("UnknownRole", R);
  if (!in.has_role(Rp)) throw AkcError("UnknownRole", Rp);
  if (R == Rp) throw AkcError("ValidationError", "kernel roles must differ");
  if (!m) throw AkcError("ValidationError", "commit kernel needs a payload");
  TransformResult res;
  ProtocolSpec spec = in;
  std::set<std::string> names = used_names(in);
  std::set<std::string> labels = used_labels(in);

  const std::string c2 = pick_name("c2", names);
  const std::string c3 = pick_name("c3", names);
  const std::string nname = pick_name("__n", names);
  spec.fresh[Rp].push_back(nname);
  spec.vars[R].emplace_back(nname, TypeDesc{TypeDesc::K::Nonce, ""});

  const std::string l2 = pick_name("__ta2", labels);
  const std::string l4 = pick_name("__ta4", labels);
  const std::string lc1 = pick_name("__ta1c", labels);
  const std::string lr1 = pick_name("__ta1r", labels);
  const std::string lc3 = pick_name("__ta3c", labels);
  const std::string lr3 = pick_name("__ta3r", labels);
  std::set<std::string> pair_ids;
  for (const auto& item : in.items)
    if (!item.is_step && !item.claim.pair_id.empty())
      pair_ids.insert(item.claim.pair_id);
  const std::string pair1 = pick_name("tapair1", pair_ids);
  const std::string pair3 = pick_name("tapair3", pair_ids);

  TermPtr m_r = view_as(spec, m, R);
  TermPtr m_rp = view_as(spec, m, Rp);
  TermPtr M = mk_enc(mk_tuple({mk_apply("h", {m_rp, mk_fresh(nname)}),
                               mk_fresh(nname), mk_const(c2)}),
                     mk_pk(mk_role(R)));
  TermPtr N = mk_enc(mk_tuple({mk_apply("h", {mk_var(nname)}), mk_const(c3)}),
                     mk_pk(mk_role(Rp)));

  std::set<std::size_t> moved = trailing_claim_positions(in, R);
  for (std::size_t i : trailing_claim_positions(in, Rp)) moved.insert(i);
  std::vector<Item> kept, moved_items;
  for (std::size_t i = 0; i < spec.items.size(); ++i) {
    if (moved.count(i))
      moved_items.push_back(spec.items[i]);
    else
      kept.push_back(spec.items[i]);
  }
  spec.items = std::move(kept);

  Item running_rp;
  running_rp.is_step = false;
  running_rp.claim = {lr1, Rp, ClaimKind::Running, R, mk_fresh(nname), pair1};
  Item step2;
  step2.is_step = true;
  step2.step = {l2, Rp, R, M};
  Item commit_r;
  commit_r.is_step = false;
  commit_r.claim = {lc1, R, ClaimKind::Commit, Rp, mk_var(nname), pair1};
  Item running_r;
  running_r.is_step = false;
  running_r.claim = {lr3, R, ClaimKind::Running, Rp, mk_var(nname), pair3};
  Item step4;
  step4.is_step = true;
  step4.step = {l4, R, Rp, N};
  Item commit_rp;
  commit_rp.is_step = false;
  commit_rp.claim = {lc3, Rp, ClaimKind::Commit, R, mk_fresh(nname), pair3};
  spec.items.push_back(std::move(running_rp));
  spec.items.push_back(std::move(step2));
  spec.items.push_back(std::move(commit_r));
  spec.items.push_back(std::move(running_r));
  spec.items.push_back(std::move(step4));
  spec.items.push_back(std::move(commit_rp));
  for (auto& item : moved_items) spec.items.push_back(std::move(item));

  check_wellformed(spec);
  res.spec = std::move(spec);
  (void)m_r;
  return res;
}

// ---------------------------------------------------------------------------
// Role tagging: every message component is stamped with the sender's signed
// declaration of who it believes plays the other roles.

inline TransformResult tr_transform(const ProtocolSpec& in) {
  for (const auto& role : in.roles) {
    bool has_send = false, has_recv = false;
    for (const Step* st : in.steps()) {
      if (st->from == role) has_send = true;
      if (st->to == role) has_recv = true;
    }
    if (!has_send || !has_recv)
      throw AkcError("AssumptionViolated", "unansweredSend: role " + role);
  }
  for (const Step* st : in.steps())
    if (st->content->kind != Kind::Pair && st->content->kind != Kind::Enc)
      throw AkcError("AssumptionViolated",
                     "atomicMessage: step " + st->label);
  TransformResult res;
  ProtocolSpec spec = in;
  for (auto& item : spec.items)
    if (item.is_step)
      item.step.content = role_tag(spec, item.step.from, item.step.content);
  check_wellformed(spec);
  res.spec = std::move(spec);
  return res;
}

// ---------------------------------------------------------------------------
// Multiparty ring builder: p parties chain their nonces forward under
// signature and encryption, then a hash round confirms the full vector.

inline ProtocolSpec tm_build(int p, const std::string& name = "") {
  if (p < 2) throw AkcError("InvalidPartyCount", std::to_string(p));
  ProtocolSpec spec;
  spec.name = name.empty() ? "multi-p" + std::to_string(p) : name;
  for (int i = 0; i < p; ++i) spec.roles.push_back("R" + std::to_string(i));
  auto nfresh = [](int i) { return "__n" + std::to_string(i); };
  for (int i = 0; i < p; ++i) {
    spec.fresh[spec.roles[i]].push_back(nfresh(i));
    for (int j = 0; j < p; ++j)
      if (j != i)
        spec.vars[spec.roles[i]].emplace_back(nfresh(j),
                                              TypeDesc{TypeDesc::K::Nonce, ""});
  }
  auto role = [&](int i) { return mk_role(spec.roles[i]); };
  auto nonce_seq = [&](int owner, int lo, int hi, bool as_own_view) {
    // Sender-view terms: own nonce is fresh, others are vars.
    std::vector<TermPtr> out;
    for (int j = lo; j <= hi; ++j)
      out.push_back(j == owner && as_own_view ? TermPtr(mk_fresh(nfresh(j)))
                                              : TermPtr(mk_var(nfresh(j))));
    return out;
  };
  auto add_step = [&](int idx, int from, int to, TermPtr content) {
    Item item;
    item.is_step = true;
    item.step = {"__l" + std::to_string(idx), spec.roles[from], spec.roles[to],
                 content};
    spec.items.push_back(std::move(item));
  };

  // Round 1: forward chain, each hop signed then encrypted for the next.
  for (int i = 0; i <= p - 2; ++i) {
    std::vector<TermPtr> parts = nonce_seq(i, 0, i, true);
    parts.push_back(assumed_roles_tag(spec, spec.roles[i]));
    TermPtr inner = mk_enc(mk_tuple(parts), mk_sk(role(i)));
    add_step(i, i, i + 1, mk_enc(inner, mk_pk(role(i + 1))));
  }
  // Closing message to R0 carries the full hash over nonces and roles.
  {
    std::vector<TermPtr> hargs = nonce_seq(p - 1, 0, p - 1, true);
    for (int j = 0; j < p; ++j) hargs.push_back(role(j));
    std::vector<TermPtr> parts{mk_apply("h", hargs)};
    for (auto& t : nonce_seq(p - 1, 1, p - 1, true)) parts.push_back(t);
    add_step(p - 1, p - 1, 0, mk_enc(mk_tuple(parts), mk_pk(role(0))));
  }
  // Round 2: confirmation hashes travel back down the chain.
  for (int j = 1; j <= p - 1; ++j) {
    int sender = j - 1;
    std::vector<TermPtr> hargs = nonce_seq(sender, j, p - 1, true);
    std::vector<TermPtr> parts{mk_apply("h", hargs)};
    for (auto& t : nonce_seq(sender, j + 1, p - 1, true)) parts.push_back(t);
    add_step(p - 1 + j, sender, j, mk_enc(mk_tuple(parts), mk_pk(role(j))));
  }
  for (int i = 0; i < p; ++i) {
    Item item;
    item.is_step = false;
    item.claim = {"__lc" + std::to_string(i), spec.roles[i], ClaimKind::Nisynch,
                  "", nullptr, ""};
    spec.items.push_back(std::move(item));
  }
  check_wellformed(spec);
  return spec;
}

}  // namespace akc
