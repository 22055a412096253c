#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "errors.hpp"
#include "term.hpp"

namespace akc {

enum class ClaimKind : uint8_t { Secret, Commit, Running, Nisynch };

inline const char* claim_kind_name(ClaimKind k) {
  switch (k) {
    case ClaimKind::Secret: return "secret";
    case ClaimKind::Commit: return "commit";
    case ClaimKind::Running: return "running";
    case ClaimKind::Nisynch: return "nisynch";
  }
  return "?";
}

struct TypeDesc {
  enum class K : uint8_t { Any, Nonce, AgentName, Hash } k = K::Any;
  std::string fn;  // Hash only; empty = any function

  bool operator==(const TypeDesc& o) const { return k == o.k && fn == o.fn; }
};

// One message of the protocol; content is stored in the sender's view
// (the sender's own values appear as Fresh, previously received ones as Var).
struct Step {
  std::string label;
  std::string from, to;
  TermPtr content;
};

struct ClaimSpec {
  std::string label;
  std::string role;
  ClaimKind kind = ClaimKind::Secret;
  std::string peer;   // commit/running
  TermPtr payload;    // claiming role's view; null for nisynch
  std::string pair_id;  // links commit with its running counterpart
};

// Steps and claims in source order; a claim's position here fixes its
// position in the claiming role's event sequence.
struct Item {
  bool is_step = true;
  Step step;
  ClaimSpec claim;
};

struct ProtocolSpec {
  std::string name;
  std::vector<std::string> roles;
  std::map<std::string, std::vector<std::string>> fresh;          // role -> names
  std::map<std::string, std::vector<std::pair<std::string, TypeDesc>>> vars;
  std::vector<Item> items;

  bool has_role(const std::string& r) const {
    return std::find(roles.begin(), roles.end(), r) != roles.end();
  }

  const std::string* fresh_owner(const std::string& name) const {
    for (const auto& [role, names] : fresh)
      for (const auto& n : names)
        if (n == name) return &role;
    return nullptr;
  }

  bool has_var(const std::string& role, const std::string& name) const {
    auto it = vars.find(role);
    if (it == vars.end()) return false;
    for (const auto& [n, _] : it->second)
      if (n == name) return true;
    return false;
  }

  TypeDesc var_type(const std::string& role, const std::string& name) const {
    auto it = vars.find(role);
    if (it != vars.end())
      for (const auto& [n, t] : it->second)
        if (n == name) return t;
    return TypeDesc{};
  }

  std::unordered_set<std::string> declared_symbols() const {
    std::unordered_set<std::string> s(roles.begin(), roles.end());
    for (const auto& [_, names] : fresh) s.insert(names.begin(), names.end());
    for (const auto& [_, vs] : vars)
      for (const auto& [n, _t] : vs) s.insert(n);
    return s;
  }

  std::vector<const Step*> steps() const {
    std::vector<const Step*> out;
    for (const auto& it : items)
      if (it.is_step) out.push_back(&it.step);
    return out;
  }

  const Step* step_by_label(const std::string& label) const {
    for (const auto& it : items)
      if (it.is_step && it.step.label == label) return &it.step;
    return nullptr;
  }
};

// Re-resolves a content term for another role of the same protocol: value
// leaves swap between Fresh and Var by ownership; everything else is fixed.
inline TermPtr view_as(const ProtocolSpec& spec, const TermPtr& t,
                       const std::string& viewer) {
  switch (t->kind) {
    case Kind::Fresh:
    case Kind::Var: {
      const std::string* owner = spec.fresh_owner(t->name);
      if (owner && *owner == viewer) return mk_fresh(t->name);
      if (spec.has_var(viewer, t->name)) return mk_var(t->name);
      if (owner)
        throw AkcError("UnboundSymbol",
                       "role " + viewer + " uses " + t->name + " owned by " +
                           *owner + " without declaring a matching var");
      throw AkcError("UnboundSymbol",
                     "role " + viewer + " has no declaration for " + t->name);
    }
    case Kind::Apply: {
      std::vector<TermPtr> args;
      args.reserve(t->args.size());
      for (const auto& a : t->args) args.push_back(view_as(spec, a, viewer));
      return mk_apply(t->name, std::move(args));
    }
    case Kind::Pair:
      return mk_pair(view_as(spec, t->args[0], viewer),
                     view_as(spec, t->args[1], viewer));
    case Kind::Enc:
      return mk_enc(view_as(spec, t->args[0], viewer),
                    view_as(spec, t->args[1], viewer));
    case Kind::Pk:
      return mk_pk(view_as(spec, t->args[0], viewer));
    case Kind::Sk:
      return mk_sk(view_as(spec, t->args[0], viewer));
    default:
      return t;
  }
}

// The leaf for a protocol value name as seen by a given role.
inline TermPtr value_leaf(const ProtocolSpec& spec, const std::string& name,
                          const std::string& viewer) {
  const std::string* owner = spec.fresh_owner(name);
  if (owner && *owner == viewer) return mk_fresh(name);
  return mk_var(name);
}

enum class EventType : uint8_t { Send, Recv, Claim };

struct Event {
  EventType type = EventType::Send;
  std::string label;
  std::string from, to;  // roles; for Claim: from = claiming role, to = peer
  TermPtr content;       // executing role's view; null for nisynch
  ClaimKind claim = ClaimKind::Secret;
  std::string pair_id;
};

inline std::vector<Event> role_sequence(const ProtocolSpec& spec,
                                        const std::string& role) {
  if (!spec.has_role(role)) throw AkcError("UnknownRole", role);
  std::vector<Event> out;
  for (const auto& item : spec.items) {
    if (item.is_step) {
      const Step& s = item.step;
      if (s.from == role) {
        out.push_back({EventType::Send, s.label, s.from, s.to, s.content,
                       ClaimKind::Secret, ""});
      } else if (s.to == role) {
        out.push_back({EventType::Recv, s.label, s.from, s.to,
                       view_as(spec, s.content, role), ClaimKind::Secret, ""});
      }
    } else {
      const ClaimSpec& c = item.claim;
      if (c.role == role) {
        out.push_back({EventType::Claim, c.label, c.role, c.peer, c.payload,
                       c.kind, c.pair_id});
      }
    }
  }
  return out;
}

inline std::pair<std::string, std::string> comm_roles(const ProtocolSpec& spec,
                                                      const std::string& label) {
  const Step* s = spec.step_by_label(label);
  if (!s) throw AkcError("UnknownLabel", label);
  return {s->from, s->to};
}

// ---------------------------------------------------------------------------
// Wellformedness

namespace detail {

// Material a role can synthesize while parsing a received message: public
// names, its own freshes, its own signing key, previously bound variables.
inline bool receiver_derivable(const TermPtr& t, const std::string& role,
                               const std::set<std::string>& bound) {
  switch (t->kind) {
    case Kind::Const:
    case Kind::Agent:
    case Kind::Role:
      return true;
    case Kind::Fresh:
      return true;  // receiver view: Fresh leaves are the viewer's own
    case Kind::Var:
      return bound.count(t->name) != 0;
    case Kind::Pk:
      return true;
    case Kind::Sk:
      return t->args[0]->kind == Kind::Role && t->args[0]->name == role;
    case Kind::Apply:
    case Kind::Pair:
    case Kind::Enc:
      for (const auto& a : t->args)
        if (!receiver_derivable(a, role, bound)) return false;
      return true;
    default:
      return false;
  }
}

// Positions of a recv pattern the receiver can actually read, under the
// current bound set: pair components always, encryption bodies when the key
// is its own public key, any signing key, or synthesizable material.
inline void readable_positions(const TermPtr& t, const std::string& role,
                               const std::set<std::string>& bound,
                               std::vector<TermPtr>& out) {
  out.push_back(t);
  if (t->kind == Kind::Pair) {
    readable_positions(t->args[0], role, bound, out);
    readable_positions(t->args[1], role, bound, out);
  } else if (t->kind == Kind::Enc) {
    const TermPtr& key = t->args[1];
    bool open = false;
    if (key->kind == Kind::Pk && key->args[0]->kind == Kind::Role &&
        key->args[0]->name == role)
      open = true;
    else if (key->kind == Kind::Sk)
      open = true;
    else if (receiver_derivable(key, role, bound))
      open = true;
    if (open) readable_positions(t->args[0], role, bound, out);
  }
}

inline void collect_var_names(const TermPtr& t, std::set<std::string>& out) {
  if (t->kind == Kind::Var) out.insert(t->name);
  for (const auto& a : t->args) collect_var_names(a, out);
}

inline void collect_open_positions(const TermPtr& t, std::vector<TermPtr>& out) {
  out.push_back(t);
  if (t->kind == Kind::Pair) {
    collect_open_positions(t->args[0], out);
    collect_open_positions(t->args[1], out);
  } else if (t->kind == Kind::Enc) {
    collect_open_positions(t->args[0], out);
  }
}

}  // namespace detail

// Variables of a recv pattern the receiver can bind, given already-bound
// names; iterates to a fixpoint so a key bound by one component can open a
// sibling component of the same message.
inline std::set<std::string> bindable_vars(const TermPtr& pattern,
                                           const std::string& role,
                                           std::set<std::string> bound) {
  std::set<std::string> newly;
  bool changed = true;
  while (changed) {
    changed = false;
    std::vector<TermPtr> readable;
    detail::readable_positions(pattern, role, bound, readable);
    for (const auto& pos : readable) {
      if (pos->kind == Kind::Var && !bound.count(pos->name)) {
        bound.insert(pos->name);
        newly.insert(pos->name);
        changed = true;
      }
    }
  }
  return newly;
}

// Structural sanity of a protocol: declarations consistent, labels unique,
// variables bound before use through the receiver-openability fixpoint, no
// secret key readable in any sent message.
inline void check_wellformed(const ProtocolSpec& spec) {
  if (spec.roles.empty()) throw AkcError("ValidationError", "noRoles");
  {
    std::set<std::string> seen;
    for (const auto& r : spec.roles)
      if (!seen.insert(r).second)
        throw AkcError("ValidationError", "duplicateRole:" + r);
  }
  std::set<std::string> fresh_names;
  for (const auto& [role, names] : spec.fresh) {
    if (!spec.has_role(role)) throw AkcError("UnknownRole", role);
    for (const auto& n : names) {
      if (!fresh_names.insert(n).second)
        throw AkcError("ValidationError", "duplicateFresh:" + n);
      if (spec.has_role(n))
        throw AkcError("ValidationError", "symbolCollidesWithRole:" + n);
    }
  }
  for (const auto& [role, vs] : spec.vars) {
    if (!spec.has_role(role)) throw AkcError("UnknownRole", role);
    std::set<std::string> seen;
    for (const auto& [n, _t] : vs) {
      if (!seen.insert(n).second)
        throw AkcError("ValidationError", "duplicateVar:" + role + ":" + n);
      if (spec.has_role(n))
        throw AkcError("ValidationError", "symbolCollidesWithRole:" + n);
      const std::string* owner = spec.fresh_owner(n);
      if (owner && *owner == role)
        throw AkcError("ValidationError", "varShadowsOwnFresh:" + role + ":" + n);
    }
  }
  {
    std::set<std::string> labels;
    for (const auto* s : spec.steps()) {
      if (!labels.insert(s->label).second)
        throw AkcError("ValidationError", "duplicateLabel:" + s->label);
      if (!spec.has_role(s->from)) throw AkcError("UnknownRole", s->from);
      if (!spec.has_role(s->to)) throw AkcError("UnknownRole", s->to);
      if (s->from == s->to)
        throw AkcError("ValidationError", "selfStep:" + s->label);
    }
  }
  for (const auto& item : spec.items) {
    if (item.is_step) continue;
    const ClaimSpec& c = item.claim;
    if (!spec.has_role(c.role)) throw AkcError("UnknownRole", c.role);
    if ((c.kind == ClaimKind::Commit || c.kind == ClaimKind::Running) &&
        !spec.has_role(c.peer))
      throw AkcError("UnknownRole", c.peer);
  }

  for (const auto& role : spec.roles) {
    std::vector<Event> seq = role_sequence(spec, role);
    if (seq.empty()) throw AkcError("ValidationError", "emptyRole:" + role);
    std::set<std::string> bound;
    for (const auto& ev : seq) {
      if (ev.type == EventType::Recv) {
        std::set<std::string> in_pattern;
        detail::collect_var_names(ev.content, in_pattern);
        std::set<std::string> newly = bindable_vars(ev.content, role, bound);
        for (const auto& n : newly) bound.insert(n);
        for (const auto& n : in_pattern)
          if (!bound.count(n))
            throw AkcError("ValidationError",
                           "unbindableVar:" + role + ":" + n + "@" + ev.label);
      } else if (ev.content) {
        std::set<std::string> used;
        detail::collect_var_names(ev.content, used);
        for (const auto& n : used)
          if (!bound.count(n))
            throw AkcError("ValidationError",
                           "unboundVar:" + role + ":" + n + "@" + ev.label);
      }
      if (ev.type == EventType::Send) {
        std::vector<TermPtr> open;
        detail::collect_open_positions(ev.content, open);
        for (const auto& pos : open)
          if (pos->kind == Kind::Sk)
            throw AkcError("ValidationError",
                           "accessibleSecretKey@" + ev.label);
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Orders

// Node identity inside the protocol order: role plus position in its sequence.
struct EventNode {
  std::string role;
  std::size_t index = 0;

  bool operator<(const EventNode& o) const {
    if (role != o.role) return role < o.role;
    return index < o.index;
  }
  bool operator==(const EventNode& o) const {
    return role == o.role && index == o.index;
  }
};

// Reflexive-transitive closure of role-sequence order plus send-before-recv
// per label.
struct ProtocolOrder {
  std::vector<EventNode> nodes;
  std::vector<Event> events;  // parallel to nodes
  std::vector<std::vector<bool>> reach;
  std::map<EventNode, std::size_t> index;

  bool precedes(const EventNode& a, const EventNode& b) const {
    auto ia = index.find(a), ib = index.find(b);
    if (ia == index.end() || ib == index.end())
      throw AkcError("UnknownLabel", "event node outside protocol");
    return reach[ia->second][ib->second];
  }
};

inline ProtocolOrder protocol_order(const ProtocolSpec& spec) {
  ProtocolOrder po;
  std::map<std::string, std::size_t> send_at, recv_at;
  for (const auto& role : spec.roles) {
    std::vector<Event> seq = role_sequence(spec, role);
    for (std::size_t i = 0; i < seq.size(); ++i) {
      EventNode n{role, i};
      po.index[n] = po.nodes.size();
      po.nodes.push_back(n);
      po.events.push_back(seq[i]);
      if (seq[i].type == EventType::Send) send_at[seq[i].label] = po.nodes.size() - 1;
      if (seq[i].type == EventType::Recv) recv_at[seq[i].label] = po.nodes.size() - 1;
    }
  }
  std::size_t n = po.nodes.size();
  po.reach.assign(n, std::vector<bool>(n, false));
  for (std::size_t i = 0; i < n; ++i) po.reach[i][i] = true;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    if (po.nodes[i].role == po.nodes[i + 1].role)
      po.reach[i][i + 1] = true;
  }
  for (const auto& [label, si] : send_at) {
    auto it = recv_at.find(label);
    if (it != recv_at.end()) po.reach[si][it->second] = true;
  }
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t i = 0; i < n; ++i) {
      if (!po.reach[i][k]) continue;
      for (std::size_t j = 0; j < n; ++j)
        if (po.reach[k][j]) po.reach[i][j] = true;
    }
  return po;
}

// Labels of the claiming role's own receives strictly before the claim in its
// sequence; these are the messages whose authenticity the claim depends on.
inline std::set<std::string> prec_set(const ProtocolSpec& spec,
                                      const std::string& role,
                                      const std::string& claim_label) {
  std::vector<Event> seq = role_sequence(spec, role);
  std::set<std::string> out;
  for (const auto& ev : seq) {
    if (ev.type == EventType::Claim && ev.label == claim_label) return out;
    if (ev.type == EventType::Recv) out.insert(ev.label);
  }
  throw AkcError("UnknownLabel", claim_label);
}

}  // namespace akc
