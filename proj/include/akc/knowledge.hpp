#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "term.hpp"

namespace akc {

// Adversary knowledge: a raw list of received terms plus an analyzed basis.
// The basis is saturated under pair projection and decryption with derivable
// inverse keys; queries run a memoized synthesis over it. Adding a term
// re-saturates, so earlier negative answers can flip, and the memo is cleared.
//
// Invariant: analyzing the raw list from scratch yields the same basis as the
// incremental adds (checked by tests).
class Knowledge {
 public:
  void add(const TermPtr& t) {
    raw_.push_back(t);
    // Detach rather than clear: copies made before this add share the old
    // memo and closure, which stay valid for their unchanged basis.
    memo_ = std::make_shared<Memo>();
    subs_ = nullptr;
    analyze_add(t);
    saturate();
  }

  const std::vector<TermPtr>& raw_terms() const { return raw_; }

  // Canonically ordered analyzed basis.
  std::vector<TermPtr> basis() const {
    std::vector<TermPtr> out(basis_.begin(), basis_.end());
    std::sort(out.begin(), out.end(), TermLess{});
    return out;
  }

  // Unordered view for callers that combine order-independently.
  const TermSet& basis_set() const { return basis_; }

  // Order-independent 128-bit digest of the basis, maintained incrementally.
  // Equal bases give equal digests regardless of add order.
  std::pair<std::uint64_t, std::uint64_t> basis_fingerprint() const {
    return {fp1_, fp2_};
  }

  // Every subterm of every basis element, sealed positions included.
  // Spans candidate pools; callers still gate exactly with derives.
  const TermSet& subterm_closure() const {
    if (!subs_) {
      auto subs = std::make_shared<TermSet>();
      for (const auto& t : basis_) collect_subterms(t, *subs);
      subs_ = std::move(subs);
    }
    return *subs_;
  }

  bool member(const TermPtr& t) const { return basis_.count(t) != 0; }

  bool derives(const TermPtr& t) const {
    auto it = memo_->find(t);
    if (it != memo_->end()) return it->second;
    // Seed false to cut cycles (a term never helps synthesize itself).
    (*memo_)[t] = false;
    bool r = synth(t);
    (*memo_)[t] = r;
    return r;
  }

  std::string fingerprint() const {
    std::string s;
    for (const auto& t : basis()) {
      s += to_string(t);
      s += ';';
    }
    return s;
  }

 private:
  bool synth(const TermPtr& t) const {
    if (basis_.count(t)) return true;
    switch (t->kind) {
      case Kind::Const:
      case Kind::Agent:
        return true;  // public names
      case Kind::Pair:
        return derives(t->args[0]) && derives(t->args[1]);
      case Kind::Enc:
        return derives(t->args[0]) && derives(t->args[1]);
      case Kind::Pk:
        return derives(t->args[0]);
      case Kind::Apply: {
        for (const auto& a : t->args)
          if (!derives(a)) return false;
        return true;
      }
      default:
        return false;  // Fresh, BoundFresh, Var, BoundVar, Sk, Role
    }
  }

  void analyze_add(const TermPtr& t) {
    if (t->kind == Kind::Pair) {
      analyze_add(t->args[0]);
      analyze_add(t->args[1]);
      return;
    }
    // Enc kept even when opened; everything else is atomic here.
    if (basis_.insert(t).second) {
      detail::Mixer e;
      e.term(t);
      fp1_ += e.h1;
      fp2_ += e.h2;
    }
  }

  void saturate() {
    bool changed = true;
    while (changed) {
      changed = false;
      std::vector<TermPtr> to_open;
      for (const auto& t : basis_) {
        if (t->kind != Kind::Enc) continue;
        if (opened_.count(t)) continue;
        if (derives(invert(t->args[1]))) to_open.push_back(t);
      }
      for (const auto& t : to_open) {
        opened_.insert(t);
        std::size_t before = basis_.size();
        analyze_add(t->args[0]);
        if (basis_.size() != before) changed = true;
      }
      if (changed) memo_->clear();
    }
  }

  using Memo = std::unordered_map<TermPtr, bool, TermPtrHash, TermPtrEq>;

  std::vector<TermPtr> raw_;
  TermSet basis_;
  TermSet opened_;
  std::uint64_t fp1_ = 0, fp2_ = 0;
  mutable std::shared_ptr<Memo> memo_ = std::make_shared<Memo>();
  mutable std::shared_ptr<TermSet> subs_;
};

}  // namespace akc
