#pragma once

#include <cctype>
#include <sstream>
#include <string>
#include <vector>

#include "errors.hpp"
#include "protocol.hpp"
#include "term.hpp"

namespace akc {

namespace detail {

struct Token {
  enum class T { Ident, Number, Quoted, Punct, Arrow, End } t = T::End;
  std::string text;
  int line = 1;
};

class Lexer {
 public:
  explicit Lexer(const std::string& src) : src_(src) { advance(); }

  const Token& peek() const { return tok_; }

  Token next() {
    Token t = tok_;
    advance();
    return t;
  }

 private:
  void advance() {
    skip_ws();
    tok_ = Token{};
    tok_.line = line_;
    if (pos_ >= src_.size()) {
      tok_.t = Token::T::End;
      return;
    }
    char c = src_[pos_];
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t start = pos_;
      while (pos_ < src_.size() &&
             (std::isalnum(static_cast<unsigned char>(src_[pos_])) ||
              src_[pos_] == '_'))
        ++pos_;
      tok_.t = Token::T::Ident;
      tok_.text = src_.substr(start, pos_ - start);
      return;
    }
    if (std::isdigit(static_cast<unsigned char>(c))) {
      std::size_t start = pos_;
      while (pos_ < src_.size() &&
             std::isdigit(static_cast<unsigned char>(src_[pos_])))
        ++pos_;
      tok_.t = Token::T::Number;
      tok_.text = src_.substr(start, pos_ - start);
      return;
    }
    if (c == '\'') {
      std::size_t start = ++pos_;
      while (pos_ < src_.size() && src_[pos_] != '\'') ++pos_;
      if (pos_ >= src_.size())
        throw AkcError("SyntaxError",
                       "line " + std::to_string(line_) + ": unterminated quote");
      tok_.t = Token::T::Quoted;
      tok_.text = src_.substr(start, pos_ - start);
      ++pos_;
      return;
    }
    if (c == '-' && pos_ + 1 < src_.size() && src_[pos_ + 1] == '>') {
      pos_ += 2;
      tok_.t = Token::T::Arrow;
      tok_.text = "->";
      return;
    }
    tok_.t = Token::T::Punct;
    tok_.text = std::string(1, c);
    ++pos_;
  }

  void skip_ws() {
    while (pos_ < src_.size()) {
      char c = src_[pos_];
      if (c == '\n') {
        ++line_;
        ++pos_;
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos_;
      } else if (c == '/' && pos_ + 1 < src_.size() && src_[pos_ + 1] == '/') {
        while (pos_ < src_.size() && src_[pos_] != '\n') ++pos_;
      } else if (c == '/' && pos_ + 1 < src_.size() && src_[pos_ + 1] == '*') {
        pos_ += 2;
        while (pos_ + 1 < src_.size() &&
               !(src_[pos_] == '*' && src_[pos_ + 1] == '/')) {
          if (src_[pos_] == '\n') ++line_;
          ++pos_;
        }
        if (pos_ + 1 >= src_.size())
          throw AkcError("SyntaxError", "line " + std::to_string(line_) +
                                            ": unterminated comment");
        pos_ += 2;
      } else {
        break;
      }
    }
  }

  const std::string& src_;
  std::size_t pos_ = 0;
  int line_ = 1;
  Token tok_;
};

class Parser {
 public:
  explicit Parser(const std::string& src) : lex_(src) {}

  ProtocolSpec parse_protocol() {
    expect_ident("protocol");
    spec_.name = expect(Token::T::Ident, "protocol name").text;
    expect_punct("{");
    // Declarations first, then steps and claims.
    while (peek_is_ident("roles") || peek_is_ident("fresh") ||
           peek_is_ident("var"))
      parse_decl();
    while (!peek_is_punct("}")) parse_item();
    expect_punct("}");
    if (lex_.peek().t != Token::T::End)
      err("end of input after protocol body");
    assign_claim_labels();
    pair_claims();
    return spec_;
  }

 private:
  void parse_decl() {
    Token kw = lex_.next();
    if (kw.text == "roles") {
      spec_.roles.push_back(expect(Token::T::Ident, "role name").text);
      while (peek_is_punct(",")) {
        lex_.next();
        spec_.roles.push_back(expect(Token::T::Ident, "role name").text);
      }
      expect_punct(";");
    } else if (kw.text == "fresh") {
      std::string role = expect(Token::T::Ident, "role name").text;
      require_role(role, kw.line);
      expect_punct(":");
      spec_.fresh[role].push_back(expect(Token::T::Ident, "fresh name").text);
      while (peek_is_punct(",")) {
        lex_.next();
        spec_.fresh[role].push_back(expect(Token::T::Ident, "fresh name").text);
      }
      expect_punct(";");
    } else {  // var
      std::string role = expect(Token::T::Ident, "role name").text;
      require_role(role, kw.line);
      expect_punct(":");
      parse_var_decl(role);
      while (peek_is_punct(",")) {
        lex_.next();
        parse_var_decl(role);
      }
      expect_punct(";");
    }
  }

  void parse_var_decl(const std::string& role) {
    std::string name = expect(Token::T::Ident, "var name").text;
    TypeDesc td;
    if (peek_is_punct(":")) {
      lex_.next();
      Token ty = expect(Token::T::Ident, "type");
      if (ty.text == "nonce") {
        td.k = TypeDesc::K::Nonce;
      } else if (ty.text == "agent") {
        td.k = TypeDesc::K::AgentName;
      } else if (ty.text == "hash") {
        td.k = TypeDesc::K::Hash;
        if (peek_is_punct("(")) {
          lex_.next();
          td.fn = expect(Token::T::Ident, "function name").text;
          expect_punct(")");
        }
      } else if (ty.text == "any") {
        td.k = TypeDesc::K::Any;
      } else {
        err("type (nonce, agent, hash, any)", ty.line);
      }
    }
    spec_.vars[role].emplace_back(name, td);
  }

  void parse_item() {
    if (peek_is_ident("claim")) {
      lex_.next();
      ClaimSpec c;
      c.role = expect(Token::T::Ident, "role name").text;
      require_role(c.role, lex_.peek().line);
      expect_punct(":");
      Token kw = expect(Token::T::Ident, "claim kind");
      if (kw.text == "secret") {
        c.kind = ClaimKind::Secret;
        c.payload = parse_term(c.role);
      } else if (kw.text == "commit" || kw.text == "running") {
        c.kind = kw.text == "commit" ? ClaimKind::Commit : ClaimKind::Running;
        c.peer = expect(Token::T::Ident, "peer role").text;
        require_role(c.peer, kw.line);
        c.payload = parse_term(c.role);
      } else if (kw.text == "nisynch") {
        c.kind = ClaimKind::Nisynch;
      } else {
        err("claim kind (secret, commit, running, nisynch)", kw.line);
      }
      expect_punct(";");
      Item item;
      item.is_step = false;
      item.claim = std::move(c);
      spec_.items.push_back(std::move(item));
      return;
    }
    // step: LABEL . FROM -> TO : term ;
    Token lab = lex_.next();
    if (lab.t != Token::T::Ident && lab.t != Token::T::Number)
      err("step label or claim", lab.line);
    Step s;
    s.label = lab.text;
    expect_punct(".");
    s.from = expect(Token::T::Ident, "sending role").text;
    require_role(s.from, lab.line);
    if (lex_.peek().t != Token::T::Arrow) err("->");
    lex_.next();
    s.to = expect(Token::T::Ident, "receiving role").text;
    require_role(s.to, lab.line);
    expect_punct(":");
    std::vector<TermPtr> parts;
    parts.push_back(parse_term(s.from));
    while (peek_is_punct(",")) {
      lex_.next();
      parts.push_back(parse_term(s.from));
    }
    s.content = mk_tuple(parts);
    expect_punct(";");
    Item item;
    item.is_step = true;
    item.step = std::move(s);
    spec_.items.push_back(std::move(item));
  }

  // Terms are parsed in the viewer's resolution: own fresh names become
  // Fresh, declared vars become Var, roles stay symbolic, quoted and
  // undeclared bare identifiers become Const. A fresh owned by another role
  // without a matching var declaration is an error.
  TermPtr parse_term(const std::string& viewer) {
    Token t = lex_.peek();
    if (t.t == Token::T::Punct && t.text == "(") {
      lex_.next();
      std::vector<TermPtr> parts;
      parts.push_back(parse_term(viewer));
      while (peek_is_punct(",")) {
        lex_.next();
        parts.push_back(parse_term(viewer));
      }
      expect_punct(")");
      return mk_tuple(parts);
    }
    if (t.t == Token::T::Punct && t.text == "{") {
      lex_.next();
      std::vector<TermPtr> parts;
      parts.push_back(parse_term(viewer));
      while (peek_is_punct(",")) {
        lex_.next();
        parts.push_back(parse_term(viewer));
      }
      expect_punct("}");
      TermPtr key = parse_term(viewer);
      return mk_enc(mk_tuple(parts), key);
    }
    if (t.t == Token::T::Quoted) {
      lex_.next();
      return mk_const(t.text);
    }
    if (t.t == Token::T::Ident || t.t == Token::T::Number) {
      lex_.next();
      if (peek_is_punct("(")) {
        lex_.next();
        if (t.text == "pk" || t.text == "sk") {
          TermPtr owner = parse_term(viewer);
          expect_punct(")");
          return t.text == "pk" ? mk_pk(owner) : mk_sk(owner);
        }
        std::vector<TermPtr> args;
        args.push_back(parse_term(viewer));
        while (peek_is_punct(",")) {
          lex_.next();
          args.push_back(parse_term(viewer));
        }
        expect_punct(")");
        return mk_apply(t.text, std::move(args));
      }
      if (t.t == Token::T::Number) return mk_const(t.text);
      return resolve_ident(t.text, viewer, t.line);
    }
    err("term", t.line);
    return nullptr;
  }

  TermPtr resolve_ident(const std::string& name, const std::string& viewer,
                        int line) {
    const std::string* owner = spec_.fresh_owner(name);
    if (owner && *owner == viewer) return mk_fresh(name);
    if (spec_.has_var(viewer, name)) return mk_var(name);
    if (spec_.has_role(name)) return mk_role(name);
    if (owner)
      throw AkcError("UnboundSymbol",
                     "line " + std::to_string(line) + ": " + name +
                         " is a fresh value of role " + *owner + "; role " +
                         viewer + " must declare a var to receive it");
    return mk_const(name);
  }

  void assign_claim_labels() {
    std::map<std::string, int> counters;
    std::set<std::string> step_labels;
    for (const auto& it : spec_.items)
      if (it.is_step) step_labels.insert(it.step.label);
    for (auto& it : spec_.items) {
      if (it.is_step) continue;
      if (!it.claim.label.empty()) continue;
      std::string base = claim_kind_name(it.claim.kind);
      std::string label;
      do {
        label = base + std::to_string(++counters[base]);
      } while (step_labels.count(label));
      it.claim.label = label;
    }
  }

  // Commit/running pairs share a pair id: mutual roles and payloads equal up
  // to the view swap (leaf names equal).
  void pair_claims() {
    int next_pair = 0;
    for (auto& a : spec_.items) {
      if (a.is_step || a.claim.kind != ClaimKind::Commit) continue;
      if (!a.claim.pair_id.empty()) continue;
      for (auto& b : spec_.items) {
        if (b.is_step || b.claim.kind != ClaimKind::Running) continue;
        if (!b.claim.pair_id.empty()) continue;
        if (b.claim.role != a.claim.peer || b.claim.peer != a.claim.role)
          continue;
        if (!name_shape_equal(a.claim.payload, b.claim.payload)) continue;
        std::string id = "pair" + std::to_string(++next_pair);
        a.claim.pair_id = id;
        b.claim.pair_id = id;
        break;
      }
    }
  }

  static bool name_shape_equal(const TermPtr& a, const TermPtr& b) {
    if (!a || !b) return !a && !b;
    Kind ka = a->kind == Kind::Var ? Kind::Fresh : a->kind;
    Kind kb = b->kind == Kind::Var ? Kind::Fresh : b->kind;
    if (ka != kb || a->name != b->name || a->args.size() != b->args.size())
      return false;
    for (std::size_t i = 0; i < a->args.size(); ++i)
      if (!name_shape_equal(a->args[i], b->args[i])) return false;
    return true;
  }

  void require_role(const std::string& r, int line) {
    if (!spec_.has_role(r))
      throw AkcError("UnknownRole",
                     "line " + std::to_string(line) + ": " + r);
  }

  bool peek_is_ident(const std::string& s) {
    return lex_.peek().t == Token::T::Ident && lex_.peek().text == s;
  }
  bool peek_is_punct(const std::string& s) {
    return lex_.peek().t == Token::T::Punct && lex_.peek().text == s;
  }
  Token expect(Token::T t, const std::string& what) {
    Token tok = lex_.next();
    if (tok.t != t) err(what, tok.line);
    return tok;
  }
  void expect_ident(const std::string& s) {
    Token tok = lex_.next();
    if (tok.t != Token::T::Ident || tok.text != s) err("'" + s + "'", tok.line);
  }
  void expect_punct(const std::string& s) {
    Token tok = lex_.next();
    if (tok.t != Token::T::Punct || tok.text != s) err("'" + s + "'", tok.line);
  }
  [[noreturn]] void err(const std::string& expected, int line = -1) {
    if (line < 0) line = lex_.peek().line;
    throw AkcError("SyntaxError",
                   "line " + std::to_string(line) + ": expected " + expected);
  }

  Lexer lex_;
  ProtocolSpec spec_;
};

}  // namespace detail

inline ProtocolSpec parse_protocol(const std::string& text) {
  detail::Parser p(text);
  return p.parse_protocol();
}

// ---------------------------------------------------------------------------
// Printer: inverse of the parser up to whitespace. parse(print(s)) is
// structurally identical to s for wellformed specs.

namespace detail {

inline void print_step_term(const ProtocolSpec& spec, const TermPtr& t,
                            std::ostream& os) {
  // Top-level tuples print as a bare comma list.
  std::vector<TermPtr> parts = tuple_components(t);
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) os << ", ";
    print_term(parts[i], os);
  }
}

}  // namespace detail

inline std::string print_protocol(const ProtocolSpec& spec) {
  std::unordered_set<std::string> declared = spec.declared_symbols();
  QuotedConstScope scope(&declared);
  std::ostringstream os;
  os << "protocol " << spec.name << " {\n";
  os << "  roles ";
  for (std::size_t i = 0; i < spec.roles.size(); ++i) {
    if (i) os << ", ";
    os << spec.roles[i];
  }
  os << ";\n";
  for (const auto& role : spec.roles) {
    auto it = spec.fresh.find(role);
    if (it == spec.fresh.end() || it->second.empty()) continue;
    os << "  fresh " << role << ": ";
    for (std::size_t i = 0; i < it->second.size(); ++i) {
      if (i) os << ", ";
      os << it->second[i];
    }
    os << ";\n";
  }
  for (const auto& role : spec.roles) {
    auto it = spec.vars.find(role);
    if (it == spec.vars.end() || it->second.empty()) continue;
    os << "  var " << role << ": ";
    for (std::size_t i = 0; i < it->second.size(); ++i) {
      if (i) os << ", ";
      os << it->second[i].first;
      const TypeDesc& td = it->second[i].second;
      switch (td.k) {
        case TypeDesc::K::Any:
          break;
        case TypeDesc::K::Nonce:
          os << ": nonce";
          break;
        case TypeDesc::K::AgentName:
          os << ": agent";
          break;
        case TypeDesc::K::Hash:
          os << ": hash";
          if (!td.fn.empty()) os << "(" << td.fn << ")";
          break;
      }
    }
    os << ";\n";
  }
  for (const auto& item : spec.items) {
    if (item.is_step) {
      const Step& s = item.step;
      os << "  " << s.label << ". " << s.from << " -> " << s.to << " : ";
      detail::print_step_term(spec, s.content, os);
      os << ";\n";
    } else {
      const ClaimSpec& c = item.claim;
      os << "  claim " << c.role << " : " << claim_kind_name(c.kind);
      if (c.kind == ClaimKind::Commit || c.kind == ClaimKind::Running)
        os << " " << c.peer;
      if (c.payload) {
        os << " ";
        print_term(c.payload, os);
      }
      os << ";\n";
    }
  }
  os << "}\n";
  return os.str();
}

}  // namespace akc
