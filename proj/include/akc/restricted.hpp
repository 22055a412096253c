#pragma once

#include <functional>

#include "transform.hpp"

namespace akc {

// Restricted shape: two roles, atoms and hashes under encryptions whose keys
// are single nonces, pk(role), or sk(role), nested at most pairwise.

inline bool restricted_key(const ProtocolSpec& spec, const TermPtr& key) {
  switch (key->kind) {
    case Kind::Fresh:
      return true;
    case Kind::Var:
      return true;
    case Kind::Pk:
    case Kind::Sk:
      return key->args[0]->kind == Kind::Role;
    default:
      return false;
  }
}

inline bool restricted_term(const ProtocolSpec& spec, const TermPtr& t) {
  switch (t->kind) {
    case Kind::Role:
    case Kind::Agent:
    case Kind::Const:
    case Kind::Fresh:
    case Kind::Var:
      return true;
    case Kind::Pk:
    case Kind::Sk:
      // A long-term key travelling as data, e.g. a certificate request.
      return t->args[0]->kind == Kind::Role;
    case Kind::Pair:
      return restricted_term(spec, t->args[0]) &&
             restricted_term(spec, t->args[1]);
    case Kind::Apply:
      for (const auto& a : t->args)
        if (!restricted_term(spec, a)) return false;
      return true;
    case Kind::Enc:
      return restricted_term(spec, t->args[0]) &&
             restricted_key(spec, t->args[1]);
    default:
      return false;
  }
}

struct RestrictedCheck {
  bool ok = true;
  std::string reason;
};

inline RestrictedCheck check_restricted(const ProtocolSpec& spec) {
  RestrictedCheck rc;
  if (spec.roles.size() != 2) {
    rc.ok = false;
    rc.reason = "needs exactly two roles";
    return rc;
  }
  for (const Step* st : spec.steps()) {
    if (!restricted_term(spec, st->content)) {
      rc.ok = false;
      rc.reason = "step " + st->label + " outside restricted shape";
      return rc;
    }
  }
  for (const auto& item : spec.items) {
    if (item.is_step) continue;
    const ClaimSpec& c = item.claim;
    switch (c.kind) {
      case ClaimKind::Secret:
      case ClaimKind::Commit:
      case ClaimKind::Running:
        if (!c.payload || (c.payload->kind != Kind::Fresh &&
                           c.payload->kind != Kind::Var)) {
          rc.ok = false;
          rc.reason = "claim " + c.label + " payload must be a single nonce";
          return rc;
        }
        break;
      case ClaimKind::Nisynch:
        break;
    }
  }
  return rc;
}

// ---------------------------------------------------------------------------
// Rewriting that follows only open positions: pair components and
// encryption bodies, never keys or hash arguments.

inline TermPtr rewrite_open(const TermPtr& t,
                            const std::function<TermPtr(const TermPtr&)>& f) {
  TermPtr r = f(t);
  if (r != t) return r;
  switch (t->kind) {
    case Kind::Pair:
      return mk_pair(rewrite_open(t->args[0], f), rewrite_open(t->args[1], f));
    case Kind::Enc:
      return mk_enc(rewrite_open(t->args[0], f), t->args[1]);
    default:
      return t;
  }
}

// Names of fresh values carried at open positions, in first-occurrence order.
inline void open_fresh_names(const TermPtr& t, std::vector<std::string>& out) {
  switch (t->kind) {
    case Kind::Fresh:
    case Kind::Var:
      for (const auto& n : out)
        if (n == t->name) return;
      out.push_back(t->name);
      return;
    case Kind::Pair:
      open_fresh_names(t->args[0], out);
      open_fresh_names(t->args[1], out);
      return;
    case Kind::Enc:
      open_fresh_names(t->args[0], out);
      return;
    default:
      return;
  }
}

inline std::vector<std::string> cn_op(const TermPtr& mess) {
  std::vector<std::string> out;
  open_fresh_names(mess, out);
  return out;
}

// Nonce names appearing inside hash applications.
inline void hashed_fresh_names(const TermPtr& t, bool in_hash,
                               std::vector<std::string>& out) {
  switch (t->kind) {
    case Kind::Fresh:
    case Kind::Var:
      if (in_hash) {
        for (const auto& n : out)
          if (n == t->name) return;
        out.push_back(t->name);
      }
      return;
    case Kind::Apply:
      for (const auto& a : t->args) hashed_fresh_names(a, true, out);
      return;
    case Kind::Pair:
    case Kind::Enc:
      hashed_fresh_names(t->args[0], in_hash, out);
      hashed_fresh_names(t->args[1], in_hash, out);
      return;
    default:
      return;
  }
}

inline std::vector<std::string> chn_op(const TermPtr& mess) {
  std::vector<std::string> out;
  hashed_fresh_names(mess, false, out);
  return out;
}

inline std::vector<std::string> cs_op(const ProtocolSpec& spec,
                                      const std::string& role) {
  std::vector<std::string> out;
  for (const auto& item : spec.items) {
    if (item.is_step || item.claim.role != role) continue;
    if (item.claim.kind != ClaimKind::Secret || !item.claim.payload) continue;
    const std::string& n = item.claim.payload->name;
    bool dup = false;
    for (const auto& e : out) dup |= (e == n);
    if (!dup) out.push_back(n);
  }
  return out;
}

inline std::vector<std::string> cc_op(const ProtocolSpec& spec,
                                      const std::string& role,
                                      const std::string& peer) {
  std::vector<std::string> out;
  for (const auto& item : spec.items) {
    if (item.is_step || item.claim.role != role) continue;
    if (item.claim.kind != ClaimKind::Commit || item.claim.peer != peer)
      continue;
    if (!item.claim.payload) continue;
    const std::string& n = item.claim.payload->name;
    bool dup = false;
    for (const auto& e : out) dup |= (e == n);
    if (!dup) out.push_back(n);
  }
  return out;
}

// Flavor of the protection around the first open occurrence of f: sk, pk,
// ps ({{.}pk}sk), sp ({{.}sk}pk), or NULL when it occurs bare.
enum class EncFlavor : uint8_t { Null, Pk, Sk, Ps, Sp };

inline bool fen_search(const TermPtr& t, const std::string& f,
                       std::vector<Kind>& enc_stack, EncFlavor& out) {
  if ((t->kind == Kind::Fresh || t->kind == Kind::Var) && t->name == f) {
    out = EncFlavor::Null;
    std::vector<Kind> keys;
    for (Kind k : enc_stack) keys.push_back(k);
    if (!keys.empty()) {
      Kind inner = keys.back();
      Kind outer = keys.size() >= 2 ? keys[keys.size() - 2] : inner;
      if (keys.size() == 1) {
        out = inner == Kind::Pk ? EncFlavor::Pk
              : inner == Kind::Sk ? EncFlavor::Sk
                                  : EncFlavor::Null;
      } else {
        if (inner == Kind::Pk && outer == Kind::Sk)
          out = EncFlavor::Ps;
        else if (inner == Kind::Sk && outer == Kind::Pk)
          out = EncFlavor::Sp;
        else if (inner == Kind::Pk)
          out = EncFlavor::Pk;
        else if (inner == Kind::Sk)
          out = EncFlavor::Sk;
      }
    }
    return true;
  }
  switch (t->kind) {
    case Kind::Pair:
      return fen_search(t->args[0], f, enc_stack, out) ||
             fen_search(t->args[1], f, enc_stack, out);
    case Kind::Enc: {
      enc_stack.push_back(t->args[1]->kind);
      bool hit = fen_search(t->args[0], f, enc_stack, out);
      enc_stack.pop_back();
      return hit;
    }
    default:
      return false;
  }
}

inline EncFlavor fen_op(const std::string& f, const TermPtr& mess) {
  EncFlavor out = EncFlavor::Null;
  std::vector<Kind> stack;
  fen_search(mess, f, stack, out);
  return out;
}

// Wrap every open occurrence of f under the given key unless the message
// already protects f with that flavor or a signed-then-encrypted variant.
inline TermPtr enc_op(const std::string& f, const TermPtr& key,
                      const TermPtr& mess) {
  EncFlavor have = fen_op(f, mess);
  EncFlavor want = key->kind == Kind::Pk ? EncFlavor::Pk : EncFlavor::Sk;
  if (have == want || have == EncFlavor::Ps || have == EncFlavor::Sp)
    return mess;
  return rewrite_open(mess, [&](const TermPtr& t) -> TermPtr {
    if ((t->kind == Kind::Fresh || t->kind == Kind::Var) && t->name == f)
      return mk_enc(t, key);
    return t;
  });
}

// Append a hash over F unless some application already covers all of F.
inline TermPtr eha_op(const std::vector<TermPtr>& F, const TermPtr& mess) {
  TermSet subs;
  collect_subterms(mess, subs);
  for (const auto& t : subs) {
    if (t->kind != Kind::Apply) continue;
    bool all = true;
    for (const auto& x : F) {
      bool found = false;
      for (const auto& a : t->args) found |= (a == x);
      all &= found;
    }
    if (all && !F.empty()) return mess;
  }
  return mk_pair(mess, mk_apply("h", F));
}

// ---------------------------------------------------------------------------

namespace detail {

struct SecretInfo {
  std::string name;
  std::string owner;
};

inline std::string other_role(const ProtocolSpec& spec, const std::string& r) {
  for (const auto& x : spec.roles)
    if (x != r) return x;
  return r;
}

inline bool name_open_in(const TermPtr& t, const std::string& name) {
  std::vector<std::string> names;
  open_fresh_names(t, names);
  for (const auto& n : names)
    if (n == name) return true;
  return false;
}

// Whether the occurrence of name sits under an encryption keyed pk(reader).
inline bool protected_for(const TermPtr& t, const std::string& name,
                          const TermPtr& reader_pk, bool under) {
  switch (t->kind) {
    case Kind::Fresh:
    case Kind::Var:
      return t->name == name ? under : true;
    case Kind::Pair:
      return protected_for(t->args[0], name, reader_pk, under) &&
             protected_for(t->args[1], name, reader_pk, under);
    case Kind::Enc:
      return protected_for(t->args[0], name, reader_pk,
                           under || t->args[1] == reader_pk);
    default:
      return true;
  }
}

inline std::set<std::string> key_position_names(const ProtocolSpec& spec) {
  std::set<std::string> out;
  for (const Step* st : spec.steps()) {
    TermSet subs;
    collect_subterms(st->content, subs);
    for (const auto& t : subs) {
      if (t->kind != Kind::Enc) continue;
      const TermPtr& k = t->args[1];
      if (k->kind == Kind::Fresh || k->kind == Kind::Var) out.insert(k->name);
    }
  }
  return out;
}

inline bool owns_fresh(const ProtocolSpec& spec, const std::string& role,
                       const std::string& name) {
  const std::string* owner = spec.fresh_owner(name);
  return owner && *owner == role;
}

inline TermPtr view_of_name(const ProtocolSpec& spec, const std::string& role,
                            const std::string& name) {
  if (owns_fresh(spec, role, name)) return mk_fresh(name);
  return mk_var(name);
}

}  // namespace detail

// Secrecy hardening: per direction, a transport nonce generated by the
// direction's receiver reaches the sender under the sender's public key,
// and every open occurrence of a claimed secret is wrapped under it.
inline TransformResult algo1_secrecy(const ProtocolSpec& in) {
  RestrictedCheck rc = check_restricted(in);
  if (!rc.ok) throw AkcError("NotRestricted", rc.reason);
  TransformResult res;
  ProtocolSpec spec = in;

  std::vector<detail::SecretInfo> secrets;
  std::set<std::string> secret_names;
  for (const auto& item : in.items) {
    if (item.is_step || item.claim.kind != ClaimKind::Secret) continue;
    const std::string& n = item.claim.payload->name;
    const std::string* owner = in.fresh_owner(n);
    if (!owner)
      throw AkcError("ValidationError",
                     "secret " + n + " is not a declared fresh value");
    if (secret_names.insert(n).second) secrets.push_back({n, *owner});
  }
  if (secrets.empty()) throw AkcError("NoClaims", "no secrecy claims");

  std::set<std::string> names = used_names(in);
  std::set<std::string> labels = used_labels(in);
  std::map<std::string, std::string> key_for_owner;  // owner role -> key name

  for (const auto& si : secrets) {
    if (key_for_owner.count(si.owner)) continue;
    const std::string x = si.owner;
    const std::string y = detail::other_role(spec, x);
    TermPtr pk_x = mk_pk(mk_role(x));

    // The key must reach x no later than the first open occurrence of any
    // of x's secrets; later return steps cannot carry it.
    std::size_t secret_cutoff = spec.items.size();
    for (std::size_t i = 0; i < spec.items.size(); ++i) {
      if (!spec.items[i].is_step) continue;
      bool hit = false;
      for (const auto& sj : secrets) {
        if (sj.owner != x) continue;
        if (occurs_open(mk_fresh(sj.name), spec.items[i].step.content) ||
            occurs_open(mk_var(sj.name), spec.items[i].step.content)) {
          hit = true;
          break;
        }
      }
      if (hit) {
        secret_cutoff = i;
        break;
      }
    }

    // Tier 1: reuse the newest open nonce of the key generator already
    // travelling towards x.
    std::string key_name;
    for (std::size_t i = 0; i <= secret_cutoff && i < spec.items.size(); ++i) {
      Item& item = spec.items[i];
      if (!item.is_step || item.step.from != y || item.step.to != x) continue;
      std::vector<std::string> carried;
      open_fresh_names(item.step.content, carried);
      for (auto it = carried.rbegin(); it != carried.rend(); ++it) {
        if (secret_names.count(*it)) continue;
        if (!detail::owns_fresh(spec, y, *it)) continue;
        key_name = *it;
        break;
      }
      if (key_name.empty()) break;
      if (!detail::protected_for(item.step.content, key_name, pk_x, false)) {
        item.step.content =
            rewrite_open(item.step.content, [&](const TermPtr& t) -> TermPtr {
              if (t->kind == Kind::Fresh && t->name == key_name)
                return mk_enc(t, pk_x);
              return t;
            });
      }
      break;
    }

    if (key_name.empty()) {
      // Tier 2 inserts a minted nonce into an existing return message;
      // tier 3 bootstraps a request/response exchange when none exists.
      key_name = pick_name("__g", names);
      spec.fresh[y].push_back(key_name);
      spec.vars[x].emplace_back(key_name, TypeDesc{TypeDesc::K::Nonce, ""});
      bool placed = false;
      for (std::size_t i = 0; i <= secret_cutoff && i < spec.items.size(); ++i) {
        Item& item = spec.items[i];
        if (!item.is_step || item.step.from != y || item.step.to != x) continue;
        TermPtr g = mk_fresh(key_name);
        bool inserted = false;
        std::function<TermPtr(const TermPtr&)> insert_into_pk =
            [&](const TermPtr& t) -> TermPtr {
          if (inserted) return t;
          if (t->kind == Kind::Enc && t->args[1] == pk_x) {
            inserted = true;
            std::vector<TermPtr> parts = tuple_components(t->args[0]);
            parts.push_back(g);
            return mk_enc(mk_tuple(parts), t->args[1]);
          }
          if (t->kind == Kind::Pair) {
            TermPtr a = insert_into_pk(t->args[0]);
            TermPtr b = insert_into_pk(t->args[1]);
            return mk_pair(a, b);
          }
          if (t->kind == Kind::Enc)
            return mk_enc(insert_into_pk(t->args[0]), t->args[1]);
          return t;
        };
        TermPtr content = insert_into_pk(item.step.content);
        if (!inserted) content = mk_pair(content, mk_enc(g, pk_x));
        bool merged = false;
        std::function<TermPtr(const TermPtr&)> merge_hash =
            [&](const TermPtr& t) -> TermPtr {
          if (merged) return t;
          if (t->kind == Kind::Apply) {
            merged = true;
            std::vector<TermPtr> args = t->args;
            args.push_back(g);
            return mk_apply(t->name, args);
          }
          if (t->kind == Kind::Pair) {
            TermPtr a = merge_hash(t->args[0]);
            TermPtr b = merge_hash(t->args[1]);
            return mk_pair(a, b);
          }
          if (t->kind == Kind::Enc)
            return mk_enc(merge_hash(t->args[0]), t->args[1]);
          return t;
        };
        content = merge_hash(content);
        if (!merged) content = mk_pair(content, mk_apply("h", {g}));
        item.step.content = content;
        placed = true;
        break;
      }
      if (!placed) {
        Item req;
        req.is_step = true;
        req.step = {pick_name("__rq", labels), x, y, mk_const("Request")};
        Item rsp;
        rsp.is_step = true;
        rsp.step = {pick_name("__rp", labels), y, x,
                    mk_enc(mk_fresh(key_name), pk_x)};
        std::vector<Item> items;
        items.push_back(std::move(req));
        items.push_back(std::move(rsp));
        for (auto& it2 : spec.items) items.push_back(std::move(it2));
        spec.items = std::move(items);
      }
    }
    key_for_owner[x] = key_name;
  }

  // Wrap each open secret occurrence under its direction key.
  for (auto& item : spec.items) {
    if (!item.is_step) continue;
    const std::string& sender = item.step.from;
    for (const auto& si : secrets) {
      auto kit = key_for_owner.find(si.owner);
      if (kit == key_for_owner.end()) continue;
      TermPtr key = detail::view_of_name(spec, sender, kit->second);
      item.step.content =
          rewrite_open(item.step.content, [&](const TermPtr& t) -> TermPtr {
            if ((t->kind == Kind::Fresh || t->kind == Kind::Var) &&
                t->name == si.name)
              return mk_enc(t, key);
            return t;
          });
    }
  }

  check_wellformed(spec);
  res.spec = std::move(spec);
  return res;
}

// ---------------------------------------------------------------------------
// Commitment hardening. Acknowledgement: a committed nonce is echoed inside
// the replying message's nonce-keyed component, its hash, and the signed
// container gains the recipient's name. Confirmation: a bare signed echo at
// the end becomes a hash over everything both sides contributed. Chaining:
// later messages of synchronising protocols accumulate a running hash of
// all nonces transported so far.

inline TransformResult algo2_commit(const ProtocolSpec& in) {
  RestrictedCheck rc = check_restricted(in);
  if (!rc.ok) throw AkcError("NotRestricted", rc.reason);
  TransformResult res;

  std::vector<const ClaimSpec*> commits;
  bool has_nisynch = false;
  for (const auto& item : in.items) {
    if (item.is_step) continue;
    if (item.claim.kind == ClaimKind::Commit) commits.push_back(&item.claim);
    if (item.claim.kind == ClaimKind::Nisynch) has_nisynch = true;
  }
  if (commits.empty()) {
    res.warnings.push_back("NoClaims: commit set empty, protocol unchanged");
    res.spec = in;
    return res;
  }

  ProtocolSpec spec = in;
  std::set<std::string> key_names = detail::key_position_names(spec);
  std::set<std::size_t> touched;

  // Acknowledgement rule.
  for (const ClaimSpec* c : commits) {
    const std::string& A = c->role;
    const std::string& B = c->peer;
    const std::string f = c->payload->name;
    std::size_t recv_pos = spec.items.size();
    for (std::size_t i = 0; i < spec.items.size(); ++i) {
      const Item& item = spec.items[i];
      if (!item.is_step || item.step.to != A) continue;
      if (detail::name_open_in(item.step.content, f)) {
        recv_pos = i;
        break;
      }
    }
    if (recv_pos == spec.items.size()) continue;
    for (std::size_t i = recv_pos + 1; i < spec.items.size(); ++i) {
      Item& item = spec.items[i];
      if (!item.is_step || item.step.from != A) continue;
      // An open echo of the committed value is already an acknowledgement.
      if (detail::name_open_in(item.step.content, f)) break;
      TermPtr fv = detail::view_of_name(spec, A, f);
      // The echo rides a component sealed under the sender's own session
      // nonce, not a key-transport wrapper keyed by a received value.
      bool has_nonce_keyed = false;
      {
        TermSet subs;
        collect_subterms(item.step.content, subs);
        for (const auto& t : subs)
          if (t->kind == Kind::Enc && t->args[1]->kind == Kind::Fresh)
            has_nonce_keyed = true;
      }
      if (!has_nonce_keyed) break;
      bool done_nonce = false;
      std::function<TermPtr(const TermPtr&)> into_nonce_keyed =
          [&](const TermPtr& t) -> TermPtr {
        if (done_nonce) return t;
        if (t->kind == Kind::Enc && t->args[1]->kind == Kind::Fresh) {
          done_nonce = true;
          std::vector<TermPtr> parts = tuple_components(t->args[0]);
          parts.insert(parts.begin() + (parts.empty() ? 0 : 1), fv);
          return mk_enc(mk_tuple(parts), t->args[1]);
        }
        if (t->kind == Kind::Pair) {
          TermPtr a = into_nonce_keyed(t->args[0]);
          TermPtr b = into_nonce_keyed(t->args[1]);
          return mk_pair(a, b);
        }
        if (t->kind == Kind::Enc)
          return mk_enc(into_nonce_keyed(t->args[0]), t->args[1]);
        return t;
      };
      TermPtr content = into_nonce_keyed(item.step.content);
      bool done_hash = false;
      std::function<TermPtr(const TermPtr&)> into_hash =
          [&](const TermPtr& t) -> TermPtr {
        if (done_hash) return t;
        if (t->kind == Kind::Apply) {
          done_hash = true;
          std::vector<TermPtr> args = t->args;
          args.insert(args.empty() ? args.begin() : args.end() - 1, fv);
          return mk_apply(t->name, args);
        }
        if (t->kind == Kind::Pair) {
          TermPtr a = into_hash(t->args[0]);
          TermPtr b = into_hash(t->args[1]);
          return mk_pair(a, b);
        }
        if (t->kind == Kind::Enc)
          return mk_enc(into_hash(t->args[0]), t->args[1]);
        return t;
      };
      content = into_hash(content);
      bool done_signed = false;
      std::function<TermPtr(const TermPtr&)> into_signed =
          [&](const TermPtr& t) -> TermPtr {
        if (done_signed) return t;
        if (t->kind == Kind::Enc && t->args[1]->kind == Kind::Sk) {
          done_signed = true;
          std::vector<TermPtr> parts = tuple_components(t->args[0]);
          parts.insert(parts.empty() ? parts.begin() : parts.end() - 1,
                       mk_role(B));
          return mk_enc(mk_tuple(parts), t->args[1]);
        }
        if (t->kind == Kind::Pair) {
          TermPtr a = into_signed(t->args[0]);
          TermPtr b = into_signed(t->args[1]);
          return mk_pair(a, b);
        }
        if (t->kind == Kind::Enc)
          return mk_enc(into_signed(t->args[0]), t->args[1]);
        return t;
      };
      content = into_signed(content);
      item.step.content = content;
      touched.insert(i);
      break;
    }
  }

  // Confirmation rule.
  {
    std::size_t last_step = spec.items.size();
    for (std::size_t i = spec.items.size(); i-- > 0;)
      if (spec.items[i].is_step) {
        last_step = i;
        break;
      }
    if (last_step < spec.items.size() && !touched.count(last_step)) {
      Step& st = spec.items[last_step].step;
      TermPtr content = st.content;
      if (content->kind == Kind::Enc && content->args[1]->kind == Kind::Sk) {
        std::vector<TermPtr> body = tuple_components(content->args[0]);
        bool bare = true;
        for (const auto& b : body)
          bare &= (b->kind == Kind::Fresh || b->kind == Kind::Var);
        if (bare) {
          std::vector<TermPtr> hargs = body;
          std::set<std::string> have;
          for (const auto& b : body) have.insert(b->name);
          for (std::size_t i = 0; i < last_step; ++i) {
            const Item& item = spec.items[i];
            if (!item.is_step || item.step.from != st.from) continue;
            std::vector<std::string> carried;
            open_fresh_names(item.step.content, carried);
            for (const auto& n : carried) {
              if (have.count(n) || key_names.count(n)) continue;
              if (!detail::owns_fresh(spec, st.from, n)) continue;
              have.insert(n);
              hargs.push_back(mk_fresh(n));
            }
          }
          for (const auto& item : spec.items) {
            if (item.is_step || item.claim.kind != ClaimKind::Secret) continue;
            const std::string n = item.claim.payload->name;
            if (have.count(n) || key_names.count(n)) continue;
            bool knowable =
                detail::owns_fresh(spec, st.from, n) || spec.has_var(st.from, n);
            if (!knowable) continue;
            have.insert(n);
            hargs.push_back(detail::view_of_name(spec, st.from, n));
          }
          st.content = mk_enc(mk_apply("h", hargs), content->args[1]);
          touched.insert(last_step);
        }
      }
    }
  }

  // Chaining rule.
  if (has_nisynch) {
    std::vector<std::string> accumulated;
    std::size_t step_idx = 0;
    for (std::size_t i = 0; i < spec.items.size(); ++i) {
      Item& item = spec.items[i];
      if (!item.is_step) continue;
      std::vector<std::string> carried;
      open_fresh_names(item.step.content, carried);
      for (const auto& n : carried) {
        if (key_names.count(n) || !spec.fresh_owner(n)) continue;
        bool dup = false;
        for (const auto& e : accumulated) dup |= (e == n);
        if (!dup) accumulated.push_back(n);
      }
      bool has_keyed = false;
      {
        TermSet subs;
        collect_subterms(item.step.content, subs);
        for (const auto& t : subs)
          if (t->kind == Kind::Enc && (t->args[1]->kind == Kind::Pk ||
                                       t->args[1]->kind == Kind::Sk))
            has_keyed = true;
      }
      if (step_idx >= 2 && !touched.count(i) && has_keyed) {
        // Only values the sender can compute by now take part.
        std::set<std::string> bound;
        for (std::size_t j = 0; j < i; ++j) {
          const Item& pr = spec.items[j];
          if (!pr.is_step || pr.step.to != item.step.from) continue;
          std::vector<std::string> names;
          open_fresh_names(pr.step.content, names);
          for (const auto& n : names) bound.insert(n);
        }
        std::vector<TermPtr> hargs;
        for (const auto& n : accumulated) {
          bool own = detail::owns_fresh(spec, item.step.from, n);
          bool carried_here = false;
          for (const auto& cn : carried) carried_here |= (cn == n);
          if (!own && !bound.count(n) && !carried_here) continue;
          hargs.push_back(detail::view_of_name(spec, item.step.from, n));
        }
        if (!hargs.empty()) {
          bool merged = false;
          std::function<TermPtr(const TermPtr&)> merge_hash =
              [&](const TermPtr& t) -> TermPtr {
            if (merged) return t;
            if (t->kind == Kind::Apply) {
              merged = true;
              std::vector<TermPtr> args = t->args;
              for (const auto& h : hargs) {
                bool dup = false;
                for (const auto& a : args) dup |= (a == h);
                if (!dup) args.push_back(h);
              }
              return mk_apply(t->name, args);
            }
            if (t->kind == Kind::Pair) {
              TermPtr a = merge_hash(t->args[0]);
              TermPtr b = merge_hash(t->args[1]);
              return mk_pair(a, b);
            }
            if (t->kind == Kind::Enc)
              return mk_enc(merge_hash(t->args[0]), t->args[1]);
            return t;
          };
          TermPtr content = merge_hash(item.step.content);
          if (!merged) content = mk_pair(content, mk_apply("h", hargs));
          item.step.content = content;
        }
      }
      step_idx++;
    }
  }

  check_wellformed(spec);
  res.spec = std::move(spec);
  return res;
}

}  // namespace akc
