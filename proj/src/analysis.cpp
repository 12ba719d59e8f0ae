#include "tcp/analysis.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <optional>
#include <tuple>

#include <fmt/format.h>

namespace tcp {

const std::array<std::string_view, kComplexityMetricCount>& complexity_metric_names() {
  static const std::array<std::string_view, kComplexityMetricCount> names = {
      "CountDeclFunction",        "CountLine",                "CountLineBlank",
      "CountLineCode",            "CountLineCodeDecl",        "CountLineCodeExe",
      "CountLineComment",         "CountStmt",                "CountStmtDecl",
      "CountStmtExe",             "RatioCommentToCode",       "MaxCyclomatic",
      "MaxCyclomaticModified",    "MaxCyclomaticStrict",      "MaxEssential",
      "MaxNesting",               "SumCyclomatic",            "SumCyclomaticModified",
      "SumCyclomaticStrict",      "SumEssential",             "CountDeclClass",
      "CountDeclClassMethod",     "CountDeclClassVariable",   "CountDeclExecutableUnit",
      "CountDeclInstanceMethod",  "CountDeclInstanceVariable", "CountDeclMethod",
      "CountDeclMethodDefault",   "CountDeclMethodPrivate",   "CountDeclMethodProtected",
      "CountDeclMethodPublic",
  };
  return names;
}

const std::array<std::string_view, kProcessMetricCount>& process_metric_names() {
  static const std::array<std::string_view, kProcessMetricCount> names = {
      "CommitCount",           "DistinctDevCount", "OwnersContribution",
      "MinorContributorCount", "OwnersExperience", "AllCommitersExperience",
  };
  return names;
}

const std::array<std::string_view, kChangeMetricCount>& change_metric_names() {
  static const std::array<std::string_view, kChangeMetricCount> names = {
      "LinesAdded",   "LinesDeleted",      "AddedChangeScattering", "DeletedChangeScattering",
      "DMMUnitSize", "DMMUnitComplexity", "DMMUnitInterfacing",
  };
  return names;
}

bool UnitSpan::low_risk(DmmProperty p, const RiskThresholds& t) const noexcept {
  switch (p) {
    case DmmProperty::UnitSize: return size <= t.unit_size;
    case DmmProperty::UnitComplexity: return complexity <= t.unit_complexity;
    case DmmProperty::UnitInterfacing: return interfacing <= t.unit_interfacing;
  }
  return true;
}

namespace {

// ---------------------------------------------------------------------------
// Lexer

enum class Tok { Ident, Number, String, Op };

struct Token {
  Tok kind;
  std::string text;
  int line;
};

struct Lexed {
  std::vector<Token> tokens;
  std::vector<char> code;     // per line, 1-based
  std::vector<char> comment;  // per line, 1-based
  int lines = 0;
};

bool ident_start(unsigned char c) { return std::isalpha(c) || c == '_' || c == '$' || c >= 0x80; }
bool ident_char(unsigned char c) { return std::isalnum(c) || c == '_' || c == '$' || c >= 0x80; }
bool space(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\f' || c == '\v'; }

Lexed lex(std::string_view s) {
  Lexed out;
  if (!s.empty()) {
    out.lines = static_cast<int>(std::count(s.begin(), s.end(), '\n'));
    if (s.back() != '\n') ++out.lines;
  }
  out.code.assign(static_cast<std::size_t>(out.lines) + 2, 0);
  out.comment.assign(static_cast<std::size_t>(out.lines) + 2, 0);

  static constexpr std::string_view two_char[] = {"&&", "||", "->", "::", "==", "!=", "<=", ">=", "+=",
                                                  "-=", "*=", "/=", "%=", "&=", "|=", "^=", "++", "--"};
  const std::size_t n = s.size();
  int line = 1;
  std::size_t i = 0;
  auto push = [&](Tok kind, std::size_t begin, std::size_t end, int at) {
    out.tokens.push_back({kind, std::string(s.substr(begin, end - begin)), at});
    out.code[static_cast<std::size_t>(at)] = 1;
  };

  while (i < n) {
    const char c = s[i];
    const char next = i + 1 < n ? s[i + 1] : '\0';
    if (c == '\n') {
      ++line;
      ++i;
    } else if (space(c)) {
      ++i;
    } else if (c == '/' && next == '/') {
      out.comment[static_cast<std::size_t>(line)] = 1;
      while (i < n && s[i] != '\n') ++i;
    } else if (c == '/' && next == '*') {
      out.comment[static_cast<std::size_t>(line)] = 1;
      i += 2;
      while (i < n && !(s[i] == '*' && i + 1 < n && s[i + 1] == '/')) {
        if (s[i] == '\n')
          ++line;
        else if (!space(s[i]))
          out.comment[static_cast<std::size_t>(line)] = 1;
        ++i;
      }
      if (i < n) {
        out.comment[static_cast<std::size_t>(line)] = 1;
        i += 2;
      }
    } else if (s.substr(i, 3) == "\"\"\"") {
      const int first = line;
      const std::size_t begin = i;
      i += 3;
      while (i < n && s.substr(i, 3) != "\"\"\"") {
        if (s[i] == '\\' && i + 1 < n) ++i;
        if (s[i] == '\n') ++line;
        ++i;
      }
      i = std::min(n, i + 3);
      for (int l = first; l <= line; ++l) out.code[static_cast<std::size_t>(l)] = 1;
      out.tokens.push_back({Tok::String, std::string(s.substr(begin, i - begin)), first});
    } else if (c == '"' || c == '\'') {
      const std::size_t begin = i++;
      while (i < n && s[i] != c && s[i] != '\n') {
        if (s[i] == '\\' && i + 1 < n && s[i + 1] != '\n') ++i;
        ++i;
      }
      if (i < n && s[i] == c) ++i;
      push(Tok::String, begin, i, line);
    } else if (ident_start(static_cast<unsigned char>(c))) {
      const std::size_t begin = i;
      while (i < n && ident_char(static_cast<unsigned char>(s[i]))) ++i;
      push(Tok::Ident, begin, i, line);
    } else if (std::isdigit(static_cast<unsigned char>(c)) ||
               (c == '.' && std::isdigit(static_cast<unsigned char>(next)))) {
      const std::size_t begin = i;
      while (i < n) {
        const char d = s[i];
        if (std::isalnum(static_cast<unsigned char>(d)) || d == '_' || d == '.') {
          ++i;
        } else if ((d == '+' || d == '-') && (s[i - 1] == 'e' || s[i - 1] == 'E' || s[i - 1] == 'p' ||
                                              s[i - 1] == 'P')) {
          ++i;
        } else {
          break;
        }
      }
      push(Tok::Number, begin, i, line);
    } else {
      std::size_t len = 1;
      for (auto op : two_char)
        if (s.substr(i, 2) == op) len = 2;
      push(Tok::Op, i, i + len, line);
      i += len;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Structural pass

enum class Ctx { File, Class, Function, Block, ArrayInit };

struct Context {
  Ctx kind = Ctx::File;
  std::vector<std::size_t> prefix;  // tokens of the current statement
  int paren = 0;
  bool continues_statement = false;
  bool is_enum = false;
  bool enum_constants_done = false;
  bool is_interface = false;
  bool is_do_block = false;
  int function = -1;
};

struct FunctionInfo {
  bool initializer = false;
  int begin_line = 0;
  int end_line = 0;
  int cyclomatic = 1;
  int modified = 1;
  int strict = 1;
  int essential = 1;
  int nesting = 0;
  int params = 0;
  std::size_t last_statement = std::numeric_limits<std::size_t>::max();
};

bool is_control_keyword(std::string_view s) {
  static constexpr std::string_view kw[] = {"if",     "for",  "while", "switch", "catch", "synchronized",
                                            "return", "new",  "throw", "else",   "try",   "do",
                                            "case",   "assert", "super", "this"};
  return std::find(std::begin(kw), std::end(kw), s) != std::end(kw);
}

class Analyzer {
 public:
  explicit Analyzer(std::string_view source) : lx_(lex(source)) {
    decl_line_.assign(lx_.code.size(), 0);
    exe_line_.assign(lx_.code.size(), 0);
  }

  FileFacts run() {
    stack_.push_back(Context{});
    const auto& toks = lx_.tokens;
    for (std::size_t t = 0; t < toks.size(); ++t) {
      const Token& tok = toks[t];
      const auto line = static_cast<std::size_t>(tok.line);
      (in_exec() ? exe_line_ : decl_line_)[line] = 1;
      const bool after_do = after_do_block_;
      after_do_block_ = false;

      if (tok.kind == Tok::Op && tok.text == "{") {
        open_brace(t);
        continue;
      }
      if (tok.kind == Tok::Op && tok.text == "}") {
        close_brace(t);
        continue;
      }
      Context& cur = stack_.back();
      if (tok.kind == Tok::Op && tok.text == ";" && cur.paren == 0) {
        semicolon(t);
        continue;
      }
      if (cur.prefix.empty() && cur.kind == Ctx::Function)
        functions_[static_cast<std::size_t>(cur.function)].last_statement = t;
      if (tok.kind == Tok::Op && tok.text == "(") ++cur.paren;
      if (tok.kind == Tok::Op && tok.text == ")") cur.paren = std::max(0, cur.paren - 1);
      if (in_exec()) count_exec_token(t, after_do);
      if (tok.kind == Tok::Ident && std::isupper(static_cast<unsigned char>(tok.text[0])) &&
          !in_import_statement())
        facts_.referenced_types.insert(tok.text);
      cur.prefix.push_back(t);
    }
    while (stack_.size() > 1) {
      if (stack_.back().kind == Ctx::Function) finish_function(stack_.back(), lx_.lines);
      stack_.pop_back();
    }
    summarize();
    return std::move(facts_);
  }

 private:
  using M = ComplexityMetric;

  const std::string& text(std::size_t t) const { return lx_.tokens[t].text; }
  double& metric(M m) { return facts_.metrics[m]; }

  bool in_exec() const {
    for (auto it = stack_.rbegin(); it != stack_.rend(); ++it) {
      if (it->kind == Ctx::Function || it->kind == Ctx::Block) return true;
      if (it->kind == Ctx::Class || it->kind == Ctx::File) return false;
    }
    return false;
  }

  // Innermost enclosing function body not separated by a class body.
  FunctionInfo* current_function() {
    for (auto it = stack_.rbegin(); it != stack_.rend(); ++it) {
      if (it->kind == Ctx::Function) return &functions_[static_cast<std::size_t>(it->function)];
      if (it->kind == Ctx::Class || it->kind == Ctx::File) return nullptr;
    }
    return nullptr;
  }

  bool in_import_statement() const {
    const Context& cur = stack_.back();
    if (cur.kind != Ctx::File || cur.prefix.empty()) return false;
    const auto& first = text(cur.prefix.front());
    return first == "import" || first == "package";
  }

  bool ternary(std::size_t t) const {
    const auto& toks = lx_.tokens;
    if (t > 0 && (toks[t - 1].text == "<" || toks[t - 1].text == ",")) return false;
    if (t + 1 < toks.size()) {
      const auto& n = toks[t + 1].text;
      if (n == "extends" || n == "super" || n == ">" || n == ",") return false;
    }
    return true;
  }

  void count_exec_token(std::size_t t, bool after_do) {
    const Token& tok = lx_.tokens[t];
    const std::string& s = tok.text;
    if (tok.kind == Tok::Ident) {
      if (s == "if" || s == "for" || s == "switch" || s == "try" || (s == "while" && !after_do))
        metric(M::CountStmtExe) += 1;
    }
    FunctionInfo* fn = current_function();
    if (!fn || fn->initializer) return;
    if (tok.kind == Tok::Ident) {
      if (s == "if" || s == "for" || s == "while" || s == "catch") {
        ++fn->cyclomatic;
        ++fn->modified;
        ++fn->strict;
      } else if (s == "case") {
        ++fn->cyclomatic;
        ++fn->strict;
      } else if (s == "switch") {
        ++fn->modified;
      } else if (s == "break" || s == "continue" || s == "return") {
        ++fn->essential;
      }
    } else if (tok.kind == Tok::Op) {
      if (s == "&&" || s == "||" || (s == "?" && ternary(t))) ++fn->strict;
    }
  }

  // Position of a type-declaring keyword at depth 0 of the prefix.
  std::optional<std::size_t> type_keyword(const std::vector<std::size_t>& p) const {
    int depth = 0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      const auto& s = text(p[i]);
      if (s == "(" || s == "<") ++depth;
      if (s == ")" || s == ">") --depth;
      if (depth != 0 || lx_.tokens[p[i]].kind != Tok::Ident) continue;
      if (i > 0 && text(p[i - 1]) == ".") continue;
      if (s == "class" || s == "interface" || s == "enum") return i;
      if (s == "record" && i + 2 < p.size() && lx_.tokens[p[i + 1]].kind == Tok::Ident &&
          (text(p[i + 2]) == "(" || text(p[i + 2]) == "<"))
        return i;
    }
    return std::nullopt;
  }

  bool has_depth0(const std::vector<std::size_t>& p, std::string_view what, std::size_t end) const {
    int depth = 0;
    for (std::size_t i = 0; i < end && i < p.size(); ++i) {
      const auto& s = text(p[i]);
      if (s == "(") ++depth;
      if (s == ")") --depth;
      if (depth == 0 && s == what) return true;
    }
    return false;
  }

  // `new Type<...>(...)` immediately before the brace.
  bool anonymous_class(const std::vector<std::size_t>& p) const {
    if (p.empty() || text(p.back()) != ")") return false;
    std::size_t i = p.size() - 1;
    int depth = 0;
    for (;; --i) {
      if (text(p[i]) == ")") ++depth;
      if (text(p[i]) == "(") --depth;
      if (depth == 0) break;
      if (i == 0) return false;
    }
    while (i > 0) {
      --i;
      const Token& tok = lx_.tokens[p[i]];
      if (tok.text == "new") return true;
      if (tok.kind == Tok::Ident || tok.text == "." || tok.text == "<" || tok.text == ">" ||
          tok.text == "," || tok.text == "?")
        continue;
      return false;
    }
    return false;
  }

  struct MethodShape {
    std::size_t name = 0;  // index into the prefix
    int params = 0;
    bool is_static = false;
    bool is_public = false;
    bool is_private = false;
    bool is_protected = false;
  };

  // `mods Type name(params) [throws X] [default v]` at class level.
  std::optional<MethodShape> method_shape(const std::vector<std::size_t>& p) const {
    std::size_t end = p.size();
    int depth = 0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      const auto& s = text(p[i]);
      if (s == "(") ++depth;
      if (s == ")") --depth;
      if (depth == 0 && (s == "throws" || s == "default") && i > 0 && text(p[i - 1]) == ")") {
        end = i;
        break;
      }
    }
    if (end < 3 || text(p[end - 1]) != ")") return std::nullopt;
    std::size_t open = end - 1;
    depth = 0;
    for (;; --open) {
      if (text(p[open]) == ")") ++depth;
      if (text(p[open]) == "(") --depth;
      if (depth == 0) break;
      if (open == 0) return std::nullopt;
    }
    if (open == 0) return std::nullopt;
    const Token& name = lx_.tokens[p[open - 1]];
    if (name.kind != Tok::Ident || is_control_keyword(name.text)) return std::nullopt;
    if (open >= 2 && text(p[open - 2]) == "@") return std::nullopt;
    if (has_depth0(p, "=", open)) return std::nullopt;

    MethodShape shape;
    shape.name = open - 1;
    int angle = 0;
    int paren = 0;
    bool any = false;
    for (std::size_t i = open + 1; i + 1 < end; ++i) {
      const auto& s = text(p[i]);
      any = true;
      if (s == "<") ++angle;
      if (s == ">") --angle;
      if (s == "(") ++paren;
      if (s == ")") --paren;
      if (s == "," && angle == 0 && paren == 0) ++shape.params;
    }
    if (any) ++shape.params;
    depth = 0;
    for (std::size_t i = 0; i + 1 < open; ++i) {
      const auto& s = text(p[i]);
      if (s == "(") ++depth;
      if (s == ")") --depth;
      if (depth != 0) continue;
      shape.is_static |= s == "static";
      shape.is_public |= s == "public";
      shape.is_private |= s == "private";
      shape.is_protected |= s == "protected";
    }
    return shape;
  }

  void count_method(const MethodShape& m) {
    metric(M::CountDeclMethod) += 1;
    metric(m.is_static ? M::CountDeclClassMethod : M::CountDeclInstanceMethod) += 1;
    if (m.is_public)
      metric(M::CountDeclMethodPublic) += 1;
    else if (m.is_private)
      metric(M::CountDeclMethodPrivate) += 1;
    else if (m.is_protected)
      metric(M::CountDeclMethodProtected) += 1;
    else
      metric(M::CountDeclMethodDefault) += 1;
  }

  int block_depth() const {
    int depth = 0;
    for (auto it = stack_.rbegin(); it != stack_.rend(); ++it) {
      if (it->kind == Ctx::Block) ++depth;
      if (it->kind == Ctx::Function) return depth;
      if (it->kind == Ctx::Class) return 0;
    }
    return 0;
  }

  void open_brace(std::size_t t) {
    Context& cur = stack_.back();
    const auto& p = cur.prefix;
    const std::string prev = p.empty() ? std::string() : text(p.back());
    Context next;
    next.kind = Ctx::Block;

    if ((cur.kind == Ctx::File || cur.kind == Ctx::Class) && cur.paren == 0) {
      auto kw = type_keyword(p);
      if (cur.kind == Ctx::Class && cur.is_enum && !cur.enum_constants_done && !kw) {
        next.kind = Ctx::Class;
        next.continues_statement = true;
      } else if (kw) {
        next.kind = Ctx::Class;
        const auto& keyword = text(p[*kw]);
        next.is_enum = keyword == "enum";
        next.is_interface = keyword == "interface";
        if (*kw + 1 < p.size()) facts_.declared_types.push_back(text(p[*kw + 1]));
        metric(M::CountDeclClass) += 1;
        metric(M::CountStmtDecl) += 1;
      } else if (prev == "->") {
        next.continues_statement = true;
      } else if (has_depth0(p, "=", p.size())) {
        next.kind = anonymous_class(p) ? Ctx::Class : Ctx::ArrayInit;
        next.continues_statement = true;
      } else if (auto m = method_shape(p)) {
        next.kind = Ctx::Function;
        FunctionInfo fn;
        fn.begin_line = lx_.tokens[p[m->name]].line;
        fn.params = m->params;
        next.function = static_cast<int>(functions_.size());
        functions_.push_back(fn);
        count_method(*m);
        metric(M::CountStmtDecl) += 1;
      } else if (p.empty() || (p.size() == 1 && prev == "static")) {
        next.kind = Ctx::Function;
        FunctionInfo fn;
        fn.initializer = true;
        fn.begin_line = lx_.tokens[t].line;
        next.function = static_cast<int>(functions_.size());
        functions_.push_back(fn);
      }
    } else if (cur.kind == Ctx::ArrayInit) {
      next.kind = Ctx::ArrayInit;
      next.continues_statement = true;
    } else if (prev == "->") {
      next.continues_statement = true;
    } else if (anonymous_class(p)) {
      next.kind = Ctx::Class;
      next.continues_statement = true;
    } else if (prev == "=" || prev == "]") {
      next.kind = Ctx::ArrayInit;
      next.continues_statement = true;
    } else if (cur.paren == 0 && type_keyword(p)) {
      auto kw = type_keyword(p);
      next.kind = Ctx::Class;
      next.is_enum = text(p[*kw]) == "enum";
      next.is_interface = text(p[*kw]) == "interface";
      if (*kw + 1 < p.size()) facts_.declared_types.push_back(text(p[*kw + 1]));
      metric(M::CountDeclClass) += 1;
    } else {
      next.continues_statement = cur.paren > 0;
      next.is_do_block = prev == "do";
    }

    if (next.kind == Ctx::Block) {
      if (FunctionInfo* fn = current_function()) fn->nesting = std::max(fn->nesting, block_depth() + 1);
    }
    if (!next.continues_statement) cur.prefix.clear();
    stack_.push_back(std::move(next));
  }

  void close_brace(std::size_t t) {
    if (stack_.size() == 1) return;
    Context done = std::move(stack_.back());
    stack_.pop_back();
    if (done.kind == Ctx::Function) finish_function(done, lx_.tokens[t].line);
    after_do_block_ = done.is_do_block;
    Context& parent = stack_.back();
    if (done.continues_statement)
      parent.prefix.push_back(t);
    else
      parent.prefix.clear();
  }

  void finish_function(const Context& ctx, int end_line) {
    FunctionInfo& fn = functions_[static_cast<std::size_t>(ctx.function)];
    fn.end_line = end_line;
    if (fn.last_statement < lx_.tokens.size() && text(fn.last_statement) == "return")
      fn.essential = std::max(1, fn.essential - 1);
  }

  std::string dotted(const std::vector<std::size_t>& p, std::size_t from) const {
    std::string out;
    for (std::size_t i = from; i < p.size(); ++i) out += text(p[i]);
    return out;
  }

  void semicolon(std::size_t t) {
    (void)t;
    Context& cur = stack_.back();
    auto& p = cur.prefix;
    if (cur.kind == Ctx::File || cur.kind == Ctx::Class) {
      if (p.empty()) {
      } else if (cur.kind == Ctx::Class && cur.is_enum && !cur.enum_constants_done) {
        cur.enum_constants_done = true;
      } else if (text(p.front()) == "package") {
        facts_.package = dotted(p, 1);
        metric(M::CountStmtDecl) += 1;
      } else if (text(p.front()) == "import") {
        ImportDecl imp;
        std::size_t from = 1;
        if (p.size() > 1 && text(p[1]) == "static") {
          imp.is_static = true;
          from = 2;
        }
        imp.name = dotted(p, from);
        if (imp.name.size() >= 2 && imp.name.ends_with(".*")) {
          imp.wildcard = true;
          imp.name.resize(imp.name.size() - 2);
        }
        facts_.imports.push_back(std::move(imp));
        metric(M::CountStmtDecl) += 1;
      } else if (auto m = method_shape(p)) {
        count_method(*m);
        metric(M::CountStmtDecl) += 1;
      } else {
        bool is_static = cur.is_interface;
        for (auto i : p) is_static |= text(i) == "static";
        metric(is_static ? M::CountDeclClassVariable : M::CountDeclInstanceVariable) += 1;
        metric(M::CountStmtDecl) += 1;
      }
    } else if (cur.kind != Ctx::ArrayInit) {
      metric(M::CountStmtExe) += 1;
    }
    p.clear();
  }

  void summarize() {
    int blank = 0, code = 0, comment = 0, decl = 0, exe = 0;
    for (int l = 1; l <= lx_.lines; ++l) {
      const auto i = static_cast<std::size_t>(l);
      if (lx_.code[i]) {
        ++code;
        decl += decl_line_[i];
        exe += exe_line_[i];
      } else if (lx_.comment[i]) {
        ++comment;
      } else {
        ++blank;
      }
    }
    metric(M::CountLine) = lx_.lines;
    metric(M::CountLineBlank) = blank;
    metric(M::CountLineCode) = code;
    metric(M::CountLineComment) = comment;
    metric(M::CountLineCodeDecl) = decl;
    metric(M::CountLineCodeExe) = exe;
    metric(M::RatioCommentToCode) = code > 0 ? static_cast<double>(comment) / code : 0.0;
    metric(M::CountStmt) = metric(M::CountStmtDecl) + metric(M::CountStmtExe);

    for (const auto& fn : functions_) {
      UnitSpan span;
      span.begin_line = fn.begin_line;
      span.end_line = fn.end_line;
      for (int l = fn.begin_line; l <= fn.end_line && l <= lx_.lines; ++l)
        span.size += lx_.code[static_cast<std::size_t>(l)];
      span.complexity = fn.cyclomatic;
      span.interfacing = fn.params;
      facts_.units.push_back(span);

      metric(M::CountDeclExecutableUnit) += 1;
      if (fn.initializer) continue;
      metric(M::CountDeclFunction) += 1;
      metric(M::SumCyclomatic) += fn.cyclomatic;
      metric(M::SumCyclomaticModified) += fn.modified;
      metric(M::SumCyclomaticStrict) += fn.strict;
      metric(M::SumEssential) += fn.essential;
      metric(M::MaxCyclomatic) = std::max<double>(metric(M::MaxCyclomatic), fn.cyclomatic);
      metric(M::MaxCyclomaticModified) = std::max<double>(metric(M::MaxCyclomaticModified), fn.modified);
      metric(M::MaxCyclomaticStrict) = std::max<double>(metric(M::MaxCyclomaticStrict), fn.strict);
      metric(M::MaxEssential) = std::max<double>(metric(M::MaxEssential), fn.essential);
      metric(M::MaxNesting) = std::max<double>(metric(M::MaxNesting), fn.nesting);
    }
    std::sort(facts_.units.begin(), facts_.units.end(),
              [](const UnitSpan& a, const UnitSpan& b) {
                return std::tie(a.begin_line, a.end_line) < std::tie(b.begin_line, b.end_line);
              });
  }

  Lexed lx_;
  std::vector<char> decl_line_;
  std::vector<char> exe_line_;
  std::vector<Context> stack_;
  std::vector<FunctionInfo> functions_;
  FileFacts facts_;
  bool after_do_block_ = false;
};

std::string_view file_name(std::string_view path) {
  auto slash = path.rfind('/');
  return slash == std::string_view::npos ? path : path.substr(slash + 1);
}

std::string_view package_of(std::string_view qualified) {
  auto dot = qualified.rfind('.');
  return dot == std::string_view::npos ? std::string_view() : qualified.substr(0, dot);
}

}  // namespace

FileFacts analyze_source(std::string_view source) { return Analyzer(source).run(); }

bool is_test_path(std::string_view path) {
  if (path.starts_with("test/") || path.find("/test/") != std::string_view::npos) return true;
  auto name = file_name(path);
  return name.ends_with(".java") && (name.ends_with("Test.java") || name.starts_with("Test"));
}

bool AnalyzerOptions::accepts(std::string_view path) const {
  auto name = file_name(path);
  auto dot = name.rfind('.');
  return dot != std::string_view::npos && extensions.contains(std::string(name.substr(dot)));
}

void RepoIndex::clear() { *this = RepoIndex(); }

void RepoIndex::add(const std::string& path, const FileFacts& facts) {
  files_.insert(path);
  by_package_[facts.package].insert(path);
  for (const auto& type : facts.declared_types) {
    qualified_[facts.package.empty() ? type : facts.package + "." + type].insert(path);
    by_type_[type].insert(path);
    types_of_file_[path].insert(type);
  }
}

std::vector<std::string> RepoIndex::lookup_qualified(std::string_view name) const {
  // Longest prefix naming a declared type handles nested-type imports.
  std::string_view probe = name;
  while (!probe.empty()) {
    auto it = qualified_.find(probe);
    if (it != qualified_.end()) return {it->second.begin(), it->second.end()};
    probe = package_of(probe);
  }
  // Files without a package declaration: match the path suffix.
  std::string suffix(name);
  std::replace(suffix.begin(), suffix.end(), '.', '/');
  suffix += ".java";
  std::vector<std::string> hits;
  for (const auto& f : files_)
    if (f == suffix || f.ends_with("/" + suffix)) hits.push_back(f);
  if (hits.size() > 1) hits.clear();
  return hits;
}

SourceEntity RepoIndex::resolve(const std::string& path, const FileFacts& facts) const {
  SourceEntity e;
  e.path = path;
  e.kind = is_test_path(path) ? FileKind::TestFile : FileKind::SutFile;
  for (const auto& imp : facts.imports) {
    if (imp.wildcard && !imp.is_static) {
      auto pkg = by_package_.find(imp.name);
      if (pkg == by_package_.end()) continue;
      for (const auto& f : pkg->second) {
        auto types = types_of_file_.find(f);
        if (types == types_of_file_.end()) continue;
        for (const auto& t : types->second)
          if (facts.referenced_types.contains(t)) e.import_targets.insert(f);
      }
      continue;
    }
    for (auto& f : lookup_qualified(imp.name)) e.import_targets.insert(std::move(f));
  }
  std::set<std::string_view> own(facts.declared_types.begin(), facts.declared_types.end());
  for (const auto& t : facts.referenced_types) {
    if (own.contains(t)) continue;
    auto it = by_type_.find(t);
    if (it != by_type_.end() && it->second.size() == 1) e.call_targets.insert(*it->second.begin());
  }
  e.import_targets.erase(path);
  e.call_targets.erase(path);
  return e;
}

std::pair<ComplexityMetrics, SourceEntity> analyze_file(std::string_view source, const std::string& path,
                                                        const RepoIndex& index) {
  FileFacts facts = analyze_source(source);
  return {facts.metrics, index.resolve(path, facts)};
}

// ---------------------------------------------------------------------------
// Change metrics

std::vector<UnitChange> unit_changes(const std::vector<UnitSpan>& old_units,
                                     const std::vector<UnitSpan>& new_units,
                                     const std::vector<HunkRange>& deleted,
                                     const std::vector<HunkRange>& added,
                                     const RiskThresholds& thresholds) {
  auto innermost = [](const std::vector<UnitSpan>& units, int line) -> int {
    int best = -1;
    for (std::size_t i = 0; i < units.size(); ++i) {
      const auto& u = units[i];
      if (line < u.begin_line || line > u.end_line) continue;
      if (best < 0 || u.end_line - u.begin_line <
                          units[static_cast<std::size_t>(best)].end_line -
                              units[static_cast<std::size_t>(best)].begin_line)
        best = static_cast<int>(i);
    }
    return best;
  };
  auto tally = [&](const std::vector<UnitSpan>& units, const std::vector<HunkRange>& ranges) {
    std::map<int, int> per_unit;
    for (const auto& r : ranges)
      for (int l = r.start; l < r.start + r.count; ++l)
        if (int u = innermost(units, l); u >= 0) ++per_unit[u];
    return per_unit;
  };
  auto flags = [&](const UnitSpan& u, UnitChange& c) {
    for (int p = 0; p < kDmmProperties; ++p) c.low_risk[p] = u.low_risk(static_cast<DmmProperty>(p), thresholds);
  };

  std::vector<UnitChange> out;
  for (auto [u, count] : tally(new_units, added)) {
    UnitChange c;
    flags(new_units[static_cast<std::size_t>(u)], c);
    c.added = count;
    out.push_back(c);
  }
  for (auto [u, count] : tally(old_units, deleted)) {
    UnitChange c;
    flags(old_units[static_cast<std::size_t>(u)], c);
    c.deleted = count;
    out.push_back(c);
  }
  return out;
}

double change_scattering(std::vector<int> chunk_lines) {
  const std::size_t n = chunk_lines.size();
  if (n < 2) return 0.0;
  std::sort(chunk_lines.begin(), chunk_lines.end());
  double pair_sum = 0.0;
  double prefix = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    pair_sum += static_cast<double>(chunk_lines[j]) * static_cast<double>(j) - prefix;
    prefix += chunk_lines[j];
  }
  const double pairs = static_cast<double>(n) * static_cast<double>(n - 1) / 2.0;
  return static_cast<double>(n) / pairs * pair_sum;
}

double dmm(const std::vector<UnitChange>& changes, DmmProperty property) {
  const auto p = static_cast<std::size_t>(property);
  double low = 0.0;
  double high = 0.0;
  for (const auto& c : changes) (c.low_risk[p] ? low : high) += c.added + c.deleted;
  if (low + high == 0.0) return -1.0;
  return low / (low + high);
}

ChangeMetrics compute_change_metrics(const std::string& path, const std::vector<FileChange>& build_changes) {
  ChangeMetrics m;
  std::vector<int> added_chunks;
  std::vector<int> deleted_chunks;
  std::vector<UnitChange> units;
  for (const auto& fc : build_changes) {
    if (fc.path != path) continue;
    m[ChangeMetric::LinesAdded] += fc.lines_added;
    m[ChangeMetric::LinesDeleted] += fc.lines_deleted;
    added_chunks.insert(added_chunks.end(), fc.added_chunks.begin(), fc.added_chunks.end());
    deleted_chunks.insert(deleted_chunks.end(), fc.deleted_chunks.begin(), fc.deleted_chunks.end());
    units.insert(units.end(), fc.unit_changes.begin(), fc.unit_changes.end());
  }
  m[ChangeMetric::AddedChangeScattering] = change_scattering(std::move(added_chunks));
  m[ChangeMetric::DeletedChangeScattering] = change_scattering(std::move(deleted_chunks));
  m[ChangeMetric::DMMUnitSize] = dmm(units, DmmProperty::UnitSize);
  m[ChangeMetric::DMMUnitComplexity] = dmm(units, DmmProperty::UnitComplexity);
  m[ChangeMetric::DMMUnitInterfacing] = dmm(units, DmmProperty::UnitInterfacing);
  return m;
}

// ---------------------------------------------------------------------------
// Process metrics

void ProcessIndex::add(const Commit& commit) {
  ++commits_;
  for (const auto& fc : commit.file_changes) {
    const double lines = fc.lines_added + fc.lines_deleted;
    FileStats& s = files_[fc.path];
    ++s.commits;
    s.authors.insert(commit.author);
    s.authored[commit.author] += lines;
    project_authored_[commit.author] += lines;
    project_total_ += lines;
  }
}

ProcessMetrics ProcessIndex::metrics(const std::string& path) const {
  ProcessMetrics m;
  auto it = files_.find(path);
  if (it == files_.end()) return m;
  const FileStats& s = it->second;
  m[ProcessMetric::CommitCount] = s.commits;
  m[ProcessMetric::DistinctDevCount] = static_cast<double>(s.authors.size());

  auto experience = [this](const std::string& author) {
    if (project_total_ <= 0.0) return 0.0;
    auto a = project_authored_.find(author);
    return a == project_authored_.end() ? 0.0 : 100.0 * a->second / project_total_;
  };

  double total = 0.0;
  const std::string* owner = nullptr;
  double owner_lines = -1.0;
  for (const auto& [author, lines] : s.authored) {
    total += lines;
    if (lines > owner_lines) {
      owner_lines = lines;
      owner = &author;
    }
  }
  // A file only ever touched without line changes has no owner.
  if (total > 0.0) {
    m[ProcessMetric::OwnersContribution] = 100.0 * owner_lines / total;
    int minor = 0;
    for (const auto& [author, lines] : s.authored)
      if (100.0 * lines / total < 5.0) ++minor;
    m[ProcessMetric::MinorContributorCount] = minor;
    m[ProcessMetric::OwnersExperience] = experience(*owner);
  }

  double log_sum = 0.0;
  bool zero = false;
  for (const auto& author : s.authors) {
    double e = experience(author);
    if (e <= 0.0) {
      zero = true;
      break;
    }
    log_sum += std::log(e);
  }
  if (!zero && !s.authors.empty())
    m[ProcessMetric::AllCommitersExperience] = std::exp(log_sum / static_cast<double>(s.authors.size()));
  return m;
}

ProcessMetrics compute_process_metrics(const std::string& path, const std::vector<Commit>& history,
                                       const CommitId& as_of) {
  auto end = std::find_if(history.begin(), history.end(), [&](const Commit& c) { return c.id == as_of; });
  if (end == history.end())
    throw Error(Errc::UnresolvableRef, fmt::format("commit {} is not in the history", as_of));
  ProcessIndex index;
  for (auto it = history.begin(); it <= end; ++it) index.add(*it);
  return index.metrics(path);
}

}  // namespace tcp
