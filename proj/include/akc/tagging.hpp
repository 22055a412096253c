#pragma once

#include "protocol.hpp"

namespace akc {

// Constant tagging: every encryption body and every function application
// gets the tag constant appended. Under a restriction set only the listed
// encryption nodes are tagged and applications are left bare; recursion
// still descends either way. Keys are rewritten recursively as well.
inline TermPtr tag_term(const TermPtr& c, const TermPtr& t,
                        const TermSet* restrict_to = nullptr) {
  switch (t->kind) {
    case Kind::Pair:
      return mk_pair(tag_term(c, t->args[0], restrict_to),
                     tag_term(c, t->args[1], restrict_to));
    case Kind::Enc: {
      TermPtr body = tag_term(c, t->args[0], restrict_to);
      TermPtr key = tag_term(c, t->args[1], restrict_to);
      if (restrict_to && !restrict_to->count(t)) return mk_enc(body, key);
      return mk_enc(mk_pair(body, c), key);
    }
    case Kind::Apply: {
      std::vector<TermPtr> args;
      for (const auto& a : t->args) args.push_back(tag_term(c, a, restrict_to));
      TermPtr ap = mk_apply(t->name, args);
      if (restrict_to) return ap;
      return mk_pair(ap, c);
    }
    default:
      return t;
  }
}

// ---------------------------------------------------------------------------

struct TypeCtx {
  const ProtocolSpec* spec = nullptr;
  std::string role;
};

inline TypeDesc ctx_var_type(const TypeCtx& ctx, const std::string& name) {
  if (!ctx.spec) return TypeDesc{};
  return ctx.spec->var_type(ctx.role, name);
}

inline bool desc_matches_term(const TypeDesc& d, const TermPtr& t,
                              const TypeCtx& tc);

// Whether two message shapes can be confused by a receiver that checks
// structure and variable type hints only.
inline bool type_compat(const TermPtr& a, const TypeCtx& ca, const TermPtr& b,
                        const TypeCtx& cb) {
  if (a->kind == Kind::Var) return desc_matches_term(ctx_var_type(ca, a->name), b, cb);
  if (b->kind == Kind::Var) return desc_matches_term(ctx_var_type(cb, b->name), a, ca);
  switch (a->kind) {
    case Kind::Fresh:
    case Kind::BoundFresh:
      return (b->kind == Kind::Fresh || b->kind == Kind::BoundFresh) &&
             a->name == b->name;
    case Kind::Role:
    case Kind::Agent:
      return b->kind == Kind::Role || b->kind == Kind::Agent;
    case Kind::Const:
      return b->kind == Kind::Const && a->name == b->name;
    case Kind::Pk:
      return b->kind == Kind::Pk && type_compat(a->args[0], ca, b->args[0], cb);
    case Kind::Sk:
      return b->kind == Kind::Sk && type_compat(a->args[0], ca, b->args[0], cb);
    case Kind::Pair: {
      if (b->kind != Kind::Pair) return false;
      std::vector<TermPtr> xs = tuple_components(a);
      std::vector<TermPtr> ys = tuple_components(b);
      if (xs.size() != ys.size()) return false;
      for (std::size_t i = 0; i < xs.size(); ++i)
        if (!type_compat(xs[i], ca, ys[i], cb)) return false;
      return true;
    }
    case Kind::Enc:
      return b->kind == Kind::Enc &&
             type_compat(a->args[0], ca, b->args[0], cb) &&
             type_compat(a->args[1], ca, b->args[1], cb);
    case Kind::Apply: {
      if (b->kind != Kind::Apply || a->name != b->name ||
          a->args.size() != b->args.size())
        return false;
      for (std::size_t i = 0; i < a->args.size(); ++i)
        if (!type_compat(a->args[i], ca, b->args[i], cb)) return false;
      return true;
    }
    default:
      return a->kind == b->kind;
  }
}

inline bool desc_matches_term(const TypeDesc& d, const TermPtr& t,
                              const TypeCtx& tc) {
  if (t->kind == Kind::Var) {
    TypeDesc e = ctx_var_type(tc, t->name);
    if (d.k == TypeDesc::K::Any || e.k == TypeDesc::K::Any) return true;
    if (d.k != e.k) return false;
    if (d.k == TypeDesc::K::Hash)
      return d.fn.empty() || e.fn.empty() || d.fn == e.fn;
    return true;
  }
  switch (d.k) {
    case TypeDesc::K::Any:
      return true;
    case TypeDesc::K::Nonce:
      return t->kind == Kind::Fresh || t->kind == Kind::BoundFresh;
    case TypeDesc::K::AgentName:
      return t->kind == Kind::Agent || t->kind == Kind::Role;
    case TypeDesc::K::Hash:
      return t->kind == Kind::Apply && (d.fn.empty() || t->name == d.fn);
  }
  return false;
}

// Encryption subterms of every step content, tagged with the sender role
// whose variable declarations type them.
inline std::vector<std::pair<TermPtr, std::string>> enc_subterms_with_ctx(
    const ProtocolSpec& spec) {
  std::vector<std::pair<TermPtr, std::string>> out;
  for (const Step* st : spec.steps()) {
    TermSet subs;
    collect_subterms(st->content, subs);
    for (const auto& t : subs)
      if (t->kind == Kind::Enc) out.emplace_back(t, st->from);
  }
  return out;
}

// Existing ciphertexts a receiver could mistake for one of the given kernel
// messages; these are the ones that need a distinguishing tag.
inline TermSet kernel_conflict_set(const ProtocolSpec& spec,
                                   const std::vector<TermPtr>& kernel_terms) {
  TermSet out;
  TypeCtx kernel_ctx;
  for (const auto& [e, role] : enc_subterms_with_ctx(spec)) {
    TypeCtx ec{&spec, role};
    for (const auto& k : kernel_terms) {
      if (type_compat(e, ec, k, kernel_ctx)) {
        out.insert(e);
        break;
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

// Signed declaration of the sender's assumed peer roles. Role names appear
// as plain constants so the declaration survives instantiation verbatim.
inline TermPtr assumed_roles_tag(const ProtocolSpec& spec,
                                 const std::string& sender) {
  std::vector<TermPtr> parts;
  for (const auto& r : spec.roles)
    if (r != sender) parts.push_back(mk_const(r));
  if (parts.empty()) parts.push_back(mk_const(sender));
  return mk_enc(mk_tuple(parts), mk_sk(mk_role(sender)));
}

// Role tagging of one message: every tuple gains the sender's assumed-roles
// declaration as a trailing component and every encryption body carries it
// too. Keys and applications are left untouched.
inline TermPtr role_tag(const ProtocolSpec& spec, const std::string& sender,
                        const TermPtr& t) {
  TermPtr ar = assumed_roles_tag(spec, sender);
  switch (t->kind) {
    case Kind::Pair: {
      TermPtr a = role_tag(spec, sender, t->args[0]);
      TermPtr b = role_tag(spec, sender, t->args[1]);
      return mk_pair(a, mk_pair(b, ar));
    }
    case Kind::Enc: {
      TermPtr body = role_tag(spec, sender, t->args[0]);
      return mk_enc(mk_pair(body, ar), t->args[1]);
    }
    default:
      return t;
  }
}

}  // namespace akc
