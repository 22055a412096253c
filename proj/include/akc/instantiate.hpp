#pragma once

#include <map>
#include <string>

#include "term.hpp"

namespace akc {

// A thread's view of the protocol: roles are assigned agents at creation,
// the thread's own Fresh/Var atoms are stamped with its tid, and received
// values accumulate as ground bindings for the stamped variables.
struct Instantiation {
  int tid = -1;
  std::map<std::string, TermPtr> roles;           // role name -> agent
  std::map<TermPtr, TermPtr, TermLess> bindings;  // BoundVar -> ground term

  TermPtr agent_for(const std::string& role) const {
    auto it = roles.find(role);
    return it == roles.end() ? nullptr : it->second;
  }

  // RoleTerm -> RunTerm: total on roles, stamps fresh/var atoms, applies
  // accumulated bindings. Unbound stamped variables stay symbolic.
  TermPtr apply(const TermPtr& t) const {
    switch (t->kind) {
      case Kind::Role: {
        auto it = roles.find(t->name);
        return it == roles.end() ? t : it->second;
      }
      case Kind::Fresh:
        return resolve(mk_bound_fresh(t->name, tid));
      case Kind::Var:
        return resolve(mk_bound_var(t->name, tid));
      case Kind::BoundFresh:
      case Kind::BoundVar:
        return resolve(t);
      case Kind::Apply: {
        std::vector<TermPtr> args;
        args.reserve(t->args.size());
        for (const auto& a : t->args) args.push_back(apply(a));
        return mk_apply(t->name, std::move(args));
      }
      case Kind::Pair:
        return mk_pair(apply(t->args[0]), apply(t->args[1]));
      case Kind::Enc:
        return mk_enc(apply(t->args[0]), apply(t->args[1]));
      case Kind::Pk:
        return mk_pk(apply(t->args[0]));
      case Kind::Sk:
        return mk_sk(apply(t->args[0]));
      default:
        return t;  // Agent, Const
    }
  }

  TermPtr resolve(const TermPtr& t) const {
    auto it = bindings.find(t);
    if (it == bindings.end()) return t;
    return it->second;
  }

  bool is_ground(const TermPtr& t) const {
    switch (t->kind) {
      case Kind::Role:
      case Kind::Fresh:
      case Kind::Var:
      case Kind::BoundVar:
        return t->kind == Kind::BoundVar ? bindings.count(t) != 0 : false;
      default:
        for (const auto& a : t->args)
          if (!is_ground(a)) return false;
        return true;
    }
  }
};

// Collects the unbound stamped variables of an instantiated pattern, in
// first-occurrence order.
inline void unbound_vars(const TermPtr& t, std::vector<TermPtr>& out) {
  if (t->kind == Kind::BoundVar) {
    for (const auto& v : out)
      if (v.get() == t.get()) return;
    out.push_back(t);
    return;
  }
  for (const auto& a : t->args) unbound_vars(a, out);
}

// Replaces every occurrence of a BoundVar by its binding.
inline TermPtr substitute(const TermPtr& t,
                          const std::map<TermPtr, TermPtr, TermLess>& sigma) {
  auto it = sigma.find(t);
  if (it != sigma.end()) return it->second;
  if (t->args.empty()) return t;
  std::vector<TermPtr> args;
  args.reserve(t->args.size());
  bool changed = false;
  for (const auto& a : t->args) {
    TermPtr na = substitute(a, sigma);
    changed = changed || na.get() != a.get();
    args.push_back(std::move(na));
  }
  if (!changed) return t;
  return mk(t->kind, t->name, t->tid, std::move(args));
}

}  // namespace akc
