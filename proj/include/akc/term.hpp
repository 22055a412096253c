#pragma once

#include <cstdint>
#include <memory>
#include <mutex>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace akc {

enum class Kind : uint8_t {
  Agent,
  Role,
  Fresh,
  Var,
  BoundFresh,
  BoundVar,
  Const,
  Apply,
  Pair,
  Enc,
  Pk,
  Sk,
};

struct Term;
using TermPtr = std::shared_ptr<const Term>;

// Immutable, globally interned. Pointer equality coincides with structural
// equality for all terms built through the mk_* constructors.
struct Term {
  Kind kind;
  std::string name;  // Agent/Role/Fresh/Var/BoundFresh/BoundVar/Const/Apply
  int tid = -1;      // BoundFresh/BoundVar only
  std::vector<TermPtr> args;  // Apply: args; Pair: {fst,snd}; Enc: {body,key}; Pk/Sk: {owner}
  std::size_t hash = 0;

  Term(Kind k, std::string n, int t, std::vector<TermPtr> a)
      : kind(k), name(std::move(n)), tid(t), args(std::move(a)) {}
};

namespace detail {

inline std::size_t hash_combine(std::size_t seed, std::size_t v) {
  return seed ^ (v + 0x9e3779b97f4a7c15ull + (seed << 6) + (seed >> 2));
}

// Two independently seeded splitmix64 walks over the same field stream,
// used pairwise as a 128-bit key. Terms contribute their structural hash,
// not their address: an address can be reused after its term dies.
struct Mixer {
  std::uint64_t h1 = 0x9e3779b97f4a7c15ULL;
  std::uint64_t h2 = 0xc2b2ae3d27d4eb4fULL;

  static std::uint64_t fin(std::uint64_t x) {
    x ^= x >> 30;
    x *= 0xbf58476d1ce4e5b9ULL;
    x ^= x >> 27;
    x *= 0x94d049bb133111ebULL;
    x ^= x >> 31;
    return x;
  }
  void u(std::uint64_t v) {
    h1 = fin(h1 ^ v);
    h2 = fin(h2 ^ (v * 0x9e3779b97f4a7c15ULL + 1));
  }
  void term(const TermPtr& t) { u(t ? t->hash : 0); }
  void str(const std::string& s) {
    std::uint64_t a = 1469598103934665603ULL;
    for (unsigned char c : s) {
      a ^= c;
      a *= 1099511628211ULL;
    }
    u(a);
    u(s.size());
  }
};

struct InternKey {
  Kind kind;
  std::string name;
  int tid;
  std::vector<const Term*> args;

  bool operator==(const InternKey& o) const {
    return kind == o.kind && tid == o.tid && name == o.name && args == o.args;
  }
};

struct InternKeyHash {
  std::size_t operator()(const InternKey& k) const {
    std::size_t h = static_cast<std::size_t>(k.kind);
    h = hash_combine(h, std::hash<std::string>{}(k.name));
    h = hash_combine(h, static_cast<std::size_t>(k.tid + 1));
    for (const Term* a : k.args) h = hash_combine(h, a->hash);
    return h;
  }
};

struct InternTable {
  std::unordered_map<InternKey, std::weak_ptr<const Term>, InternKeyHash> map;
  std::mutex mu;

  // Leaked on purpose: term deleters may run during static destruction.
  static InternTable& instance() {
    static InternTable* t = new InternTable;
    return *t;
  }

  static InternKey key_of(const Term& t) {
    InternKey key{t.kind, t.name, t.tid, {}};
    key.args.reserve(t.args.size());
    for (const auto& a : t.args) key.args.push_back(a.get());
    return key;
  }

  // Runs from the term's deleter, before its args are released. An entry is
  // only erased while still expired; a concurrent re-intern of the same key
  // keeps its fresh entry.
  void drop(const Term& t) {
    std::lock_guard<std::mutex> lock(mu);
    auto it = map.find(key_of(t));
    if (it != map.end() && it->second.expired()) map.erase(it);
  }

  TermPtr get(Kind kind, std::string name, int tid, std::vector<TermPtr> args) {
    InternKey key{kind, name, tid, {}};
    key.args.reserve(args.size());
    for (auto& a : args) key.args.push_back(a.get());
    std::lock_guard<std::mutex> lock(mu);
    auto it = map.find(key);
    if (it != map.end()) {
      if (auto sp = it->second.lock()) return sp;
    }
    // Dead entries leave with their term: a key holds raw arg pointers, and a
    // stale one would pile up behind re-interned copies of the same structure.
    TermPtr t(new Term(kind, std::move(name), tid, std::move(args)),
              [](const Term* p) {
                instance().drop(*p);
                delete p;
              });
    const_cast<Term&>(*t).hash = InternKeyHash{}(key);
    map[key] = t;
    return t;
  }
};

}  // namespace detail

inline TermPtr mk(Kind kind, std::string name, int tid, std::vector<TermPtr> args) {
  return detail::InternTable::instance().get(kind, std::move(name), tid, std::move(args));
}

inline TermPtr mk_agent(const std::string& n) { return mk(Kind::Agent, n, -1, {}); }
inline TermPtr mk_role(const std::string& n) { return mk(Kind::Role, n, -1, {}); }
inline TermPtr mk_fresh(const std::string& n) { return mk(Kind::Fresh, n, -1, {}); }
inline TermPtr mk_var(const std::string& n) { return mk(Kind::Var, n, -1, {}); }
inline TermPtr mk_bound_fresh(const std::string& n, int tid) { return mk(Kind::BoundFresh, n, tid, {}); }
inline TermPtr mk_bound_var(const std::string& n, int tid) { return mk(Kind::BoundVar, n, tid, {}); }
inline TermPtr mk_const(const std::string& n) { return mk(Kind::Const, n, -1, {}); }
inline TermPtr mk_apply(const std::string& fn, std::vector<TermPtr> args) {
  return mk(Kind::Apply, fn, -1, std::move(args));
}
inline TermPtr mk_pair(TermPtr a, TermPtr b) {
  return mk(Kind::Pair, "", -1, {std::move(a), std::move(b)});
}
inline TermPtr mk_enc(TermPtr body, TermPtr key) {
  return mk(Kind::Enc, "", -1, {std::move(body), std::move(key)});
}
inline TermPtr mk_pk(TermPtr owner) { return mk(Kind::Pk, "", -1, {std::move(owner)}); }
inline TermPtr mk_sk(TermPtr owner) { return mk(Kind::Sk, "", -1, {std::move(owner)}); }

// Right-nested tuple: (a,b,c) = Pair(a, Pair(b, c)). Empty input is invalid.
inline TermPtr mk_tuple(const std::vector<TermPtr>& parts) {
  TermPtr t = parts.back();
  for (std::size_t i = parts.size() - 1; i-- > 0;) t = mk_pair(parts[i], t);
  return t;
}

// Flattens the right spine of nested pairs.
inline void tuple_components(const TermPtr& t, std::vector<TermPtr>& out) {
  if (t->kind == Kind::Pair) {
    out.push_back(t->args[0]);
    tuple_components(t->args[1], out);
  } else {
    out.push_back(t);
  }
}

inline std::vector<TermPtr> tuple_components(const TermPtr& t) {
  std::vector<TermPtr> out;
  tuple_components(t, out);
  return out;
}

// Deterministic structural order: kind rank, then name, tid, then args.
inline int term_cmp(const TermPtr& a, const TermPtr& b) {
  if (a.get() == b.get()) return 0;
  if (a->kind != b->kind) return a->kind < b->kind ? -1 : 1;
  if (int c = a->name.compare(b->name); c != 0) return c < 0 ? -1 : 1;
  if (a->tid != b->tid) return a->tid < b->tid ? -1 : 1;
  if (a->args.size() != b->args.size()) return a->args.size() < b->args.size() ? -1 : 1;
  for (std::size_t i = 0; i < a->args.size(); ++i) {
    if (int c = term_cmp(a->args[i], b->args[i]); c != 0) return c;
  }
  return 0;
}

struct TermLess {
  bool operator()(const TermPtr& a, const TermPtr& b) const { return term_cmp(a, b) < 0; }
};

struct TermPtrHash {
  std::size_t operator()(const TermPtr& t) const { return t->hash; }
};

struct TermPtrEq {
  bool operator()(const TermPtr& a, const TermPtr& b) const { return a.get() == b.get(); }
};

using TermSet = std::unordered_set<TermPtr, TermPtrHash, TermPtrEq>;

// pk(a) <-> sk(a); identity on everything else (hashes have no inverse).
inline TermPtr invert(const TermPtr& t) {
  if (t->kind == Kind::Pk) return mk_sk(t->args[0]);
  if (t->kind == Kind::Sk) return mk_pk(t->args[0]);
  return t;
}

enum class SubtermMode : uint8_t {
  Plain,        // through every constructor
  Accessible,   // through pairs only
  KeyPosition,  // through pairs, and into encryption keys only
};

inline bool subterm(const TermPtr& x, const TermPtr& t, SubtermMode mode) {
  if (x.get() == t.get()) return true;
  switch (t->kind) {
    case Kind::Pair:
      return subterm(x, t->args[0], mode) || subterm(x, t->args[1], mode);
    case Kind::Enc:
      if (mode == SubtermMode::Plain)
        return subterm(x, t->args[0], mode) || subterm(x, t->args[1], mode);
      if (mode == SubtermMode::KeyPosition) return subterm(x, t->args[1], mode);
      return false;
    case Kind::Apply:
    case Kind::Pk:
    case Kind::Sk:
      if (mode == SubtermMode::Plain) {
        for (const auto& a : t->args)
          if (subterm(x, a, mode)) return true;
      }
      return false;
    default:
      return false;
  }
}

// Openly readable positions: pair components and encryption bodies, not keys,
// not hash arguments. This is what a principal (or the adversary, given the
// keys) can actually reach by projection and decryption.
inline bool occurs_open(const TermPtr& x, const TermPtr& t) {
  if (x.get() == t.get()) return true;
  if (t->kind == Kind::Pair)
    return occurs_open(x, t->args[0]) || occurs_open(x, t->args[1]);
  if (t->kind == Kind::Enc) return occurs_open(x, t->args[0]);
  return false;
}

inline void collect_subterms(const TermPtr& t, TermSet& out) {
  if (!out.insert(t).second) return;
  for (const auto& a : t->args) collect_subterms(a, out);
}

namespace detail {
// A Const parses bare; quoting is only needed when the name collides with a
// declared symbol, which the printer cannot know in isolation. Printing
// policy: quote when the name is flagged by the active symbol table.
inline const std::unordered_set<std::string>*& quoted_const_filter() {
  thread_local const std::unordered_set<std::string>* filter = nullptr;
  return filter;
}
}  // namespace detail

struct QuotedConstScope {
  const std::unordered_set<std::string>* prev;
  explicit QuotedConstScope(const std::unordered_set<std::string>* names) {
    prev = detail::quoted_const_filter();
    detail::quoted_const_filter() = names;
  }
  ~QuotedConstScope() { detail::quoted_const_filter() = prev; }
};

inline void print_term(const TermPtr& t, std::ostream& os) {
  switch (t->kind) {
    case Kind::Agent:
    case Kind::Role:
    case Kind::Fresh:
    case Kind::Var:
      os << t->name;
      break;
    case Kind::BoundFresh:
    case Kind::BoundVar:
      os << t->name << '#' << t->tid;
      break;
    case Kind::Const: {
      const auto* filter = detail::quoted_const_filter();
      if (filter && filter->count(t->name))
        os << '\'' << t->name << '\'';
      else
        os << t->name;
      break;
    }
    case Kind::Apply: {
      os << t->name << '(';
      for (std::size_t i = 0; i < t->args.size(); ++i) {
        if (i) os << ',';
        print_term(t->args[i], os);
      }
      os << ')';
      break;
    }
    case Kind::Pair: {
      os << '(';
      std::vector<TermPtr> parts = tuple_components(t);
      for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) os << ',';
        print_term(parts[i], os);
      }
      os << ')';
      break;
    }
    case Kind::Enc: {
      os << '{';
      // A pair body prints flattened without its own parentheses: {a,b}k.
      if (t->args[0]->kind == Kind::Pair) {
        std::vector<TermPtr> parts = tuple_components(t->args[0]);
        for (std::size_t i = 0; i < parts.size(); ++i) {
          if (i) os << ',';
          print_term(parts[i], os);
        }
      } else {
        print_term(t->args[0], os);
      }
      os << '}';
      print_term(t->args[1], os);
      break;
    }
    case Kind::Pk:
      os << "pk(";
      print_term(t->args[0], os);
      os << ')';
      break;
    case Kind::Sk:
      os << "sk(";
      print_term(t->args[0], os);
      os << ')';
      break;
  }
}

inline std::string to_string(const TermPtr& t) {
  std::ostringstream os;
  print_term(t, os);
  return os.str();
}

}  // namespace akc
