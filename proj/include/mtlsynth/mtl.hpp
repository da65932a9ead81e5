#pragma once

// Metric temporal logic formulas: AST, concrete-syntax parser, negation normal
// form, horizon bound and safe/unsafe occurrence classification.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mtlsynth/error.hpp"

namespace mtlsynth {

enum class Op { Pred, Not, And, Or, Implies, Globally, Eventually, Until };

/// Closed time interval [lo, hi] in seconds; hi = +inf means unbounded.
struct Interval {
  double lo = 0.0;
  double hi = std::numeric_limits<double>::infinity();

  bool bounded() const { return std::isfinite(hi); }
  static Interval unbounded() { return {}; }
  friend bool operator==(const Interval&, const Interval&) = default;
};

struct SourceSpan {
  int line = 0;
  int column = 0;
};

/// MTL formula tree. Leaves carry the predicate name; after to_nnf() every
/// leaf also carries its occurrence id (left-to-right leaf order).
struct Formula {
  Op op = Op::Pred;
  std::string name;
  Interval interval;
  std::vector<Formula> args;
  int occurrence = -1;
  SourceSpan span;

  static Formula pred(std::string name) {
    Formula f;
    f.op = Op::Pred;
    f.name = std::move(name);
    return f;
  }
  static Formula negate(Formula child) { return unary(Op::Not, {}, std::move(child)); }
  static Formula conj(std::vector<Formula> children) { return nary(Op::And, std::move(children)); }
  static Formula disj(std::vector<Formula> children) { return nary(Op::Or, std::move(children)); }
  static Formula implies(Formula lhs, Formula rhs) {
    Formula f;
    f.op = Op::Implies;
    f.args = {std::move(lhs), std::move(rhs)};
    return f;
  }
  static Formula globally(Interval i, Formula child) { return unary(Op::Globally, i, std::move(child)); }
  static Formula eventually(Interval i, Formula child) { return unary(Op::Eventually, i, std::move(child)); }
  static Formula until(Interval i, Formula lhs, Formula rhs) {
    Formula f;
    f.op = Op::Until;
    f.interval = i;
    f.args = {std::move(lhs), std::move(rhs)};
    return f;
  }

  bool is_temporal() const { return op == Op::Globally || op == Op::Eventually || op == Op::Until; }

  /// Structural equality; source spans are ignored.
  friend bool operator==(const Formula& a, const Formula& b) {
    if (a.op != b.op || a.name != b.name || a.occurrence != b.occurrence) return false;
    if (a.is_temporal() && !(a.interval == b.interval)) return false;
    return a.args == b.args;
  }

private:
  static Formula unary(Op op, Interval i, Formula child) {
    Formula f;
    f.op = op;
    f.interval = i;
    f.args.push_back(std::move(child));
    return f;
  }
  static Formula nary(Op op, std::vector<Formula> children) {
    Formula f;
    f.op = op;
    f.args = std::move(children);
    return f;
  }
};

enum class Polarity { Safe, Unsafe };

struct PredicateOccurrence {
  std::string predicate;
  Polarity polarity = Polarity::Safe;
  int id = -1;
  friend bool operator==(const PredicateOccurrence&, const PredicateOccurrence&) = default;
};

namespace detail {

inline std::string format_number(double v) {
  std::ostringstream os;
  os.precision(15);
  os << v;
  return os.str();
}

inline std::string format_interval(const Interval& i) {
  if (!i.bounded() && i.lo == 0.0) return "";
  if (!i.bounded()) throw UnsupportedFragment("unbounded interval with nonzero start cannot be printed");
  return "[" + format_number(i.lo) + "," + format_number(i.hi) + "]";
}

enum class Tok { Ident, Number, Not, And, Or, Arrow, LParen, RParen, LBracket, RBracket, Comma, G, F, U, End };

struct Token {
  Tok kind;
  std::string text;
  int line;
  int column;
};

class Lexer {
public:
  explicit Lexer(std::string_view text) : text_(text) {}

  std::vector<Token> run() {
    std::vector<Token> out;
    for (;;) {
      skip_space();
      if (pos_ >= text_.size()) {
        out.push_back({Tok::End, "", line_, col_});
        return out;
      }
      const int line = line_;
      const int col = col_;
      const char c = text_[pos_];
      if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
        std::string id;
        while (pos_ < text_.size() &&
               (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) {
          id += advance();
        }
        Tok kind = Tok::Ident;
        if (id == "G") kind = Tok::G;
        else if (id == "F") kind = Tok::F;
        else if (id == "U") kind = Tok::U;
        out.push_back({kind, id, line, col});
      } else if (std::isdigit(static_cast<unsigned char>(c)) || c == '.' ||
                 ((c == '-' || c == '+') && pos_ + 1 < text_.size() &&
                  (std::isdigit(static_cast<unsigned char>(text_[pos_ + 1])) || text_[pos_ + 1] == '.'))) {
        std::string num;
        num += advance();
        while (pos_ < text_.size() &&
               (std::isdigit(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '.' ||
                text_[pos_] == 'e' || text_[pos_] == 'E' ||
                ((text_[pos_] == '-' || text_[pos_] == '+') && (num.back() == 'e' || num.back() == 'E')))) {
          num += advance();
        }
        out.push_back({Tok::Number, num, line, col});
      } else if (c == '-' && pos_ + 1 < text_.size() && text_[pos_ + 1] == '>') {
        advance();
        advance();
        out.push_back({Tok::Arrow, "->", line, col});
      } else {
        Tok kind;
        switch (c) {
          case '!': kind = Tok::Not; break;
          case '&': kind = Tok::And; break;
          case '|': kind = Tok::Or; break;
          case '(': kind = Tok::LParen; break;
          case ')': kind = Tok::RParen; break;
          case '[': kind = Tok::LBracket; break;
          case ']': kind = Tok::RBracket; break;
          case ',': kind = Tok::Comma; break;
          default: throw ParseError(std::string("unexpected character '") + c + "'", line, col);
        }
        advance();
        out.push_back({kind, std::string(1, c), line, col});
      }
    }
  }

private:
  char advance() {
    const char c = text_[pos_++];
    if (c == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    return c;
  }
  void skip_space() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) advance();
  }

  std::string_view text_;
  std::size_t pos_ = 0;
  int line_ = 1;
  int col_ = 1;
};

class Parser {
public:
  explicit Parser(std::vector<Token> tokens) : toks_(std::move(tokens)) {}

  Formula parse() {
    Formula f = implies();
    if (peek().kind != Tok::End) fail("unexpected '" + peek().text + "' after formula");
    return f;
  }

private:
  const Token& peek() const { return toks_[pos_]; }
  const Token& take() { return toks_[pos_++]; }
  bool accept(Tok k) {
    if (peek().kind != k) return false;
    ++pos_;
    return true;
  }
  [[noreturn]] void fail(const std::string& msg) const {
    const Token& t = peek();
    throw ParseError(t.kind == Tok::End ? msg + " (at end of input)" : msg, t.line, t.column);
  }
  void expect(Tok k, const char* what) {
    if (!accept(k)) fail(std::string("expected ") + what);
  }
  static SourceSpan span_of(const Token& t) { return {t.line, t.column}; }

  Formula implies() {
    const SourceSpan at = span_of(peek());
    Formula lhs = disjunction();
    if (accept(Tok::Arrow)) {
      Formula f = Formula::implies(std::move(lhs), implies());
      f.span = at;
      return f;
    }
    return lhs;
  }

  Formula disjunction() {
    const SourceSpan at = span_of(peek());
    std::vector<Formula> parts;
    parts.push_back(conjunction());
    while (accept(Tok::Or)) parts.push_back(conjunction());
    if (parts.size() == 1) return std::move(parts.front());
    Formula f = Formula::disj(std::move(parts));
    f.span = at;
    return f;
  }

  Formula conjunction() {
    const SourceSpan at = span_of(peek());
    std::vector<Formula> parts;
    parts.push_back(unary());
    while (accept(Tok::And)) parts.push_back(unary());
    if (parts.size() == 1) return std::move(parts.front());
    Formula f = Formula::conj(std::move(parts));
    f.span = at;
    return f;
  }

  Formula unary() {
    const Token& t = peek();
    const SourceSpan at = span_of(t);
    Formula f;
    switch (t.kind) {
      case Tok::Not:
        take();
        f = Formula::negate(unary());
        break;
      case Tok::G:
      case Tok::F: {
        const bool always = t.kind == Tok::G;
        take();
        Interval i = peek().kind == Tok::LBracket ? interval() : Interval::unbounded();
        f = always ? Formula::globally(i, unary()) : Formula::eventually(i, unary());
        break;
      }
      case Tok::LParen: {
        take();
        Formula inner = implies();
        if (accept(Tok::U)) {
          if (peek().kind != Tok::LBracket) fail("until requires an interval");
          Interval i = interval();
          Formula rhs = implies();
          inner = Formula::until(i, std::move(inner), std::move(rhs));
          inner.span = at;
        }
        expect(Tok::RParen, "')'");
        return inner;
      }
      case Tok::Ident:
        take();
        f = Formula::pred(t.text);
        break;
      default:
        fail(t.kind == Tok::End ? "expected a formula" : "unexpected '" + t.text + "'");
    }
    f.span = at;
    return f;
  }

  Interval interval() {
    const Token& open = peek();
    expect(Tok::LBracket, "'['");
    const double lo = number();
    expect(Tok::Comma, "','");
    const double hi = number();
    expect(Tok::RBracket, "']'");
    if (lo < 0.0 || hi < 0.0) throw ParseError("interval bounds must be non-negative", open.line, open.column);
    if (lo > hi) throw ParseError("interval lower bound exceeds upper bound", open.line, open.column);
    return {lo, hi};
  }

  double number() {
    if (peek().kind != Tok::Number) fail("expected a number");
    const Token& t = take();
    char* end = nullptr;
    const double v = std::strtod(t.text.c_str(), &end);
    if (end != t.text.c_str() + t.text.size() || !std::isfinite(v)) {
      throw ParseError("malformed number '" + t.text + "'", t.line, t.column);
    }
    return v;
  }

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
};

inline Formula push_negation(const Formula& f, bool negated) {
  Formula out;
  out.span = f.span;
  switch (f.op) {
    case Op::Pred: {
      Formula leaf = Formula::pred(f.name);
      leaf.span = f.span;
      if (!negated) return leaf;
      out = Formula::negate(std::move(leaf));
      out.span = f.span;
      return out;
    }
    case Op::Not:
      return push_negation(f.args[0], !negated);
    case Op::And:
    case Op::Or: {
      std::vector<Formula> children;
      children.reserve(f.args.size());
      for (const auto& a : f.args) children.push_back(push_negation(a, negated));
      const bool conj = (f.op == Op::And) != negated;
      out = conj ? Formula::conj(std::move(children)) : Formula::disj(std::move(children));
      break;
    }
    case Op::Implies:
      if (negated) {
        out = Formula::conj({push_negation(f.args[0], false), push_negation(f.args[1], true)});
      } else {
        out = Formula::disj({push_negation(f.args[0], true), push_negation(f.args[1], false)});
      }
      break;
    case Op::Globally:
    case Op::Eventually: {
      const bool always = (f.op == Op::Globally) != negated;
      Formula child = push_negation(f.args[0], negated);
      out = always ? Formula::globally(f.interval, std::move(child))
                   : Formula::eventually(f.interval, std::move(child));
      break;
    }
    case Op::Until:
      if (negated) {
        throw UnsupportedFragment("negated until has no equivalent without a release operator");
      }
      out = Formula::until(f.interval, push_negation(f.args[0], false), push_negation(f.args[1], false));
      break;
  }
  out.span = f.span;
  return out;
}

inline void number_leaves(Formula& f, int& next) {
  if (f.op == Op::Pred) {
    f.occurrence = next++;
    return;
  }
  f.occurrence = -1;
  for (auto& a : f.args) number_leaves(a, next);
}

inline double horizon_seconds(const Formula& f) {
  switch (f.op) {
    case Op::Pred:
      return 0.0;
    case Op::Not:
      return horizon_seconds(f.args[0]);
    case Op::And:
    case Op::Or:
    case Op::Implies: {
      double h = 0.0;
      for (const auto& a : f.args) h = std::max(h, horizon_seconds(a));
      return h;
    }
    case Op::Globally:
      // Unbounded always spans the whole plan and adds nothing to the bound.
      return (f.interval.bounded() ? f.interval.hi : 0.0) + horizon_seconds(f.args[0]);
    case Op::Eventually:
      if (!f.interval.bounded()) throw UnsupportedFragment("unbounded eventually has no finite horizon");
      return f.interval.hi + horizon_seconds(f.args[0]);
    case Op::Until:
      if (!f.interval.bounded()) throw UnsupportedFragment("unbounded until has no finite horizon");
      return f.interval.hi + std::max(horizon_seconds(f.args[0]), horizon_seconds(f.args[1]));
  }
  return 0.0;
}

inline void collect_occurrences(const Formula& f, std::vector<PredicateOccurrence>& out) {
  if (f.op == Op::Pred) {
    out.push_back({f.name, Polarity::Safe, f.occurrence});
    return;
  }
  if (f.op == Op::Not) {
    if (f.args[0].op != Op::Pred) throw UnsupportedFragment("formula is not in negation normal form");
    out.push_back({f.args[0].name, Polarity::Unsafe, f.args[0].occurrence});
    return;
  }
  if (f.op == Op::Implies) throw UnsupportedFragment("formula is not in negation normal form");
  for (const auto& a : f.args) collect_occurrences(a, out);
}

}  // namespace detail

/// Parses the ASCII concrete syntax (`!`, `&`, `|`, `->`, `G`, `F`, `U`).
inline Formula parse(std::string_view text) {
  return detail::Parser(detail::Lexer(text).run()).parse();
}

/// Pushes negations to the leaves and numbers the leaves left to right.
inline Formula to_nnf(const Formula& f) {
  Formula out = detail::push_negation(f, false);
  int next = 0;
  detail::number_leaves(out, next);
  return out;
}

inline bool is_nnf(const Formula& f) {
  if (f.op == Op::Implies) return false;
  if (f.op == Op::Not) return f.args[0].op == Op::Pred;
  return std::all_of(f.args.begin(), f.args.end(), [](const Formula& a) { return is_nnf(a); });
}

inline constexpr double kIndexSlack = 1e-9;

/// Number of sample steps N = ceil(H / dt) implied by the formula.
inline int horizon(const Formula& f, double dt) {
  if (!(dt > 0.0)) throw Error("sample time must be positive");
  return static_cast<int>(std::ceil(detail::horizon_seconds(f) / dt - kIndexSlack));
}

/// One entry per leaf of an NNF formula; unsafe iff the leaf is negated.
inline std::vector<PredicateOccurrence> classify_occurrences(const Formula& nnf) {
  std::vector<PredicateOccurrence> out;
  detail::collect_occurrences(nnf, out);
  return out;
}

/// True when the formula only uses conjunction, always and (negated) predicates.
inline bool is_conjunctive_globally(const Formula& f) {
  switch (f.op) {
    case Op::Pred: return true;
    case Op::Not: return f.args[0].op == Op::Pred;
    case Op::And:
    case Op::Globally:
      return std::all_of(f.args.begin(), f.args.end(), [](const Formula& a) { return is_conjunctive_globally(a); });
    default: return false;
  }
}

inline int depth(const Formula& f) {
  int d = 0;
  for (const auto& a : f.args) d = std::max(d, depth(a));
  return d + 1;
}

inline std::string to_string(const Formula& f) {
  switch (f.op) {
    case Op::Pred: return f.name;
    case Op::Not: return "!" + to_string(f.args[0]);
    case Op::And:
    case Op::Or: {
      std::string s = "(";
      for (std::size_t i = 0; i < f.args.size(); ++i) {
        if (i) s += f.op == Op::And ? " & " : " | ";
        s += to_string(f.args[i]);
      }
      return s + ")";
    }
    case Op::Implies: return "(" + to_string(f.args[0]) + " -> " + to_string(f.args[1]) + ")";
    case Op::Globally: return "G" + detail::format_interval(f.interval) + " " + to_string(f.args[0]);
    case Op::Eventually: return "F" + detail::format_interval(f.interval) + " " + to_string(f.args[0]);
    case Op::Until:
      return "(" + to_string(f.args[0]) + " U" + detail::format_interval(f.interval) + " " +
             to_string(f.args[1]) + ")";
  }
  return {};
}

}  // namespace mtlsynth
