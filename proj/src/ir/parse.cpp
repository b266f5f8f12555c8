#include <cctype>
#include <set>

#include "compart/ir.hpp"

namespace compart::ir {
namespace {

struct Token {
  enum class Kind { Ident, Int, Str, Sym, End };
  Kind kind = Kind::End;
  std::string text;
  std::int64_t value = 0;
  SourcePos pos;
};

class Lexer {
 public:
  explicit Lexer(std::string_view text) : text_(text) {}

  std::vector<Token> run() {
    std::vector<Token> out;
    for (;;) {
      skip_space();
      Token t;
      t.pos = {line_, col_};
      if (i_ >= text_.size()) {
        out.push_back(t);
        return out;
      }
      char c = text_[i_];
      if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
        t.kind = Token::Kind::Ident;
        while (i_ < text_.size() &&
               (std::isalnum(static_cast<unsigned char>(text_[i_])) || text_[i_] == '_'))
          t.text += advance();
      } else if (std::isdigit(static_cast<unsigned char>(c))) {
        t.kind = Token::Kind::Int;
        while (i_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[i_])))
          t.text += advance();
        if (t.text.size() > 18) throw ParseError(t.pos, "integer literal too large");
        t.value = std::stoll(t.text);
      } else if (c == '"') {
        t.kind = Token::Kind::Str;
        advance();
        for (;;) {
          if (i_ >= text_.size()) throw ParseError(t.pos, "unterminated string literal");
          char d = advance();
          if (d == '"') break;
          if (d == '\\') {
            if (i_ >= text_.size()) throw ParseError(t.pos, "unterminated string literal");
            char e = advance();
            t.text += (e == 'n') ? '\n' : e;
          } else {
            t.text += d;
          }
        }
      } else {
        t.kind = Token::Kind::Sym;
        std::string_view rest = text_.substr(i_);
        if (rest.starts_with("::") || rest.starts_with("->")) {
          t.text += advance();
          t.text += advance();
        } else if (std::string_view("{}()<>[],;:=&*.+-").find(c) != std::string_view::npos) {
          t.text += advance();
        } else {
          throw ParseError(t.pos, std::string("unexpected character '") + c + "'");
        }
      }
      out.push_back(std::move(t));
    }
  }

 private:
  char advance() {
    char c = text_[i_++];
    if (c == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    return c;
  }

  void skip_space() {
    while (i_ < text_.size()) {
      char c = text_[i_];
      if (std::isspace(static_cast<unsigned char>(c))) {
        advance();
      } else if (c == '/' && i_ + 1 < text_.size() && text_[i_ + 1] == '/') {
        while (i_ < text_.size() && text_[i_] != '\n') advance();
      } else {
        break;
      }
    }
  }

  std::string_view text_;
  std::size_t i_ = 0;
  std::size_t line_ = 1;
  std::size_t col_ = 1;
};

const std::set<std::string, std::less<>> kKeywords = {
    "crate", "struct", "impl", "fn", "pub", "let", "entry", "call", "alloc", "syscall",
    "branch", "goto", "return", "rawstore", "rawload", "len", "add", "sub", "mul",
    "eq", "lt", "in", "shared", "true", "false", "mut", "bool", "i32", "rawptr", "vec"};

constexpr std::string_view kImplicitCrate = "app";

std::optional<LocalIndex> local_index(const std::string& ident) {
  if (ident.size() < 2 || ident[0] != 'v') return std::nullopt;
  for (std::size_t i = 1; i < ident.size(); ++i)
    if (!std::isdigit(static_cast<unsigned char>(ident[i]))) return std::nullopt;
  if (ident.size() > 2 && ident[1] == '0') return std::nullopt;
  if (ident.size() > 10) return std::nullopt;
  return static_cast<LocalIndex>(std::stoul(ident.substr(1)));
}

class Parser {
 public:
  explicit Parser(std::vector<Token> tokens) : toks_(std::move(tokens)) { prescan(); }

  Program run() {
    Program p;
    std::optional<SourcePos> entry_pos;
    while (!at_end()) {
      if (is_ident("entry")) {
        entry_pos = peek().pos;
        next();
        p.entry = parse_qpath();
        expect(";");
      } else if (is_ident("crate")) {
        next();
        std::string name = expect_ident("crate name");
        Crate& c = crate_named(p, name, peek().pos);
        expect("{");
        while (!is_sym("}")) {
          if (at_end()) fail("'}' closing crate " + name);
          parse_crate_item(c);
        }
        next();
      } else {
        Crate& c = crate_named(p, std::string(kImplicitCrate), peek().pos, /*allow_existing=*/true);
        parse_crate_item(c);
      }
    }
    if (p.entry.empty()) {
      std::vector<std::string> mains;
      for (const auto* f : p.functions())
        if (f->path.ends_with("::main")) mains.push_back(f->path);
      if (mains.size() == 1) p.entry = mains.front();
      else throw ParseError(peek().pos, "missing 'entry' declaration and no unique main function");
    }
    if (FunctionDef* f = p.find_function(p.entry)) {
      // The entry point is callable by the runtime regardless of its declared visibility.
      f->visibility = Visibility::Public;
    } else {
      throw ParseError(entry_pos.value_or(SourcePos{}), "unresolved entry function " + p.entry);
    }
    for (const auto& [callee, pos] : callees_)
      if (!p.find_function(callee)) throw ParseError(pos, "unresolved function path " + callee);
    return p;
  }

 private:
  // Collects every struct name per crate so types can be resolved in one pass.
  void prescan() {
    std::string crate(kImplicitCrate);
    int depth = 0;
    int crate_depth = -1;
    for (std::size_t i = 0; i < toks_.size(); ++i) {
      const Token& t = toks_[i];
      if (t.kind == Token::Kind::Sym && t.text == "{") ++depth;
      if (t.kind == Token::Kind::Sym && t.text == "}") {
        --depth;
        if (depth == crate_depth) {
          crate = kImplicitCrate;
          crate_depth = -1;
        }
      }
      if (t.kind != Token::Kind::Ident) continue;
      if (t.text == "crate" && depth == 0 && i + 1 < toks_.size() &&
          toks_[i + 1].kind == Token::Kind::Ident) {
        crate = toks_[i + 1].text;
        crate_depth = depth;
      } else if (t.text == "struct") {
        std::string name;
        std::size_t j = i + 1;
        while (j < toks_.size() && toks_[j].kind == Token::Kind::Ident) {
          name += toks_[j].text;
          if (j + 1 < toks_.size() && toks_[j + 1].kind == Token::Kind::Sym &&
              toks_[j + 1].text == "::") {
            name += "::";
            j += 2;
          } else {
            break;
          }
        }
        if (!name.empty()) aggregates_.insert(crate + "::" + name);
      }
    }
  }

  const Token& peek(std::size_t ahead = 0) const {
    return toks_[std::min(pos_ + ahead, toks_.size() - 1)];
  }
  const Token& next() {
    const Token& t = toks_[pos_];
    if (pos_ + 1 < toks_.size()) ++pos_;
    return t;
  }
  bool at_end() const { return peek().kind == Token::Kind::End; }
  bool is_sym(std::string_view s, std::size_t ahead = 0) const {
    return peek(ahead).kind == Token::Kind::Sym && peek(ahead).text == s;
  }
  bool is_ident(std::string_view s, std::size_t ahead = 0) const {
    return peek(ahead).kind == Token::Kind::Ident && peek(ahead).text == s;
  }

  [[noreturn]] void fail(const std::string& expected) const {
    const Token& t = peek();
    std::string found = t.kind == Token::Kind::End ? "end of input" : "'" + t.text + "'";
    throw ParseError(t.pos, "expected " + expected + ", found " + found);
  }

  void expect(std::string_view sym) {
    if (!is_sym(sym)) fail("'" + std::string(sym) + "'");
    next();
  }
  void expect_keyword(std::string_view kw) {
    if (!is_ident(kw)) fail("'" + std::string(kw) + "'");
    next();
  }
  std::string expect_ident(const std::string& what) {
    if (peek().kind != Token::Kind::Ident) fail(what);
    return next().text;
  }
  std::int64_t expect_int(const std::string& what) {
    if (peek().kind != Token::Kind::Int) fail(what);
    return next().value;
  }

  std::string parse_qpath() {
    std::string path = expect_ident("path");
    while (is_sym("::")) {
      next();
      path += "::" + expect_ident("path segment");
    }
    return path;
  }

  Crate& crate_named(Program& p, const std::string& name, SourcePos pos,
                     bool allow_existing = false) {
    for (auto& c : p.crates)
      if (c.name == name) {
        if (!allow_existing && !(name == kImplicitCrate && implicit_used_)) {
          throw ParseError(pos, "duplicate crate " + name);
        }
        return c;
      }
    if (allow_existing) implicit_used_ = true;
    p.crates.push_back(Crate{name, {}, {}});
    return p.crates.back();
  }

  void parse_crate_item(Crate& c) {
    if (is_ident("struct")) {
      parse_struct(c);
    } else if (is_ident("impl")) {
      next();
      std::string rel = parse_qpath();
      std::string owner = c.name + "::" + rel;
      expect("{");
      while (!is_sym("}")) {
        if (at_end()) fail("'}' closing impl");
        parse_function(c, owner);
      }
      next();
    } else if (is_ident("pub") || is_ident("fn")) {
      parse_function(c, std::nullopt);
    } else {
      fail("'struct', 'impl' or 'fn'");
    }
  }

  void parse_struct(Crate& c) {
    expect_keyword("struct");
    AggregateDef agg;
    agg.name = c.name + "::" + parse_qpath();
    expect("{");
    while (!is_sym("}")) {
      std::string field = expect_ident("field name");
      expect(":");
      agg.fields.emplace_back(field, parse_type(c.name));
      if (!is_sym(",")) break;
      next();
    }
    expect("}");
    c.aggregates.push_back(std::move(agg));
  }

  TypeExpr parse_type(const std::string& crate) {
    if (is_sym("&")) {
      next();
      bool mut = false;
      if (is_ident("mut")) {
        next();
        mut = true;
      }
      return TypeExpr::ref(parse_type(crate), mut);
    }
    if (peek().kind != Token::Kind::Ident) fail("type");
    SourcePos pos = peek().pos;
    if (is_ident("bool")) return next(), TypeExpr::boolean();
    if (is_ident("i32")) return next(), TypeExpr::i32();
    if (is_ident("rawptr")) return next(), TypeExpr::rawptr();
    if (is_ident("vec")) {
      next();
      expect("<");
      TypeExpr elem = parse_type(crate);
      expect(">");
      return TypeExpr::vec(std::move(elem));
    }
    std::string name = parse_qpath();
    if (aggregates_.count(crate + "::" + name)) return TypeExpr::aggregate(crate + "::" + name);
    if (aggregates_.count(name)) return TypeExpr::aggregate(name);
    throw ParseError(pos, "unresolved aggregate name " + name);
  }

  LocalIndex expect_local() {
    if (peek().kind != Token::Kind::Ident) fail("local (vN)");
    auto idx = local_index(peek().text);
    if (!idx) fail("local (vN)");
    next();
    return *idx;
  }

  void parse_function(Crate& c, const std::optional<std::string>& owner) {
    FunctionDef f;
    f.crate = c.name;
    current_crate_ = c.name;
    f.owner_type = owner;
    if (is_ident("pub")) {
      next();
      f.visibility = Visibility::Public;
    }
    expect_keyword("fn");
    SourcePos name_pos = peek().pos;
    std::string rel = parse_qpath();
    f.path = (owner ? *owner : c.name) + "::" + rel;
    for (const auto& other : c.functions)
      if (other.path == f.path) throw ParseError(name_pos, "duplicate function " + f.path);
    f.locals.push_back(TypeExpr::i32());
    expect("(");
    while (!is_sym(")")) {
      SourcePos pos = peek().pos;
      LocalIndex idx = expect_local();
      if (idx != f.locals.size())
        throw ParseError(pos, "expected parameter v" + std::to_string(f.locals.size()));
      expect(":");
      f.locals.push_back(parse_type(c.name));
      ++f.param_count;
      if (!is_sym(",")) break;
      next();
    }
    expect(")");
    if (is_sym("->")) {
      next();
      f.locals[0] = parse_type(c.name);
    }
    expect("{");
    while (is_ident("let")) {
      next();
      SourcePos pos = peek().pos;
      LocalIndex idx = expect_local();
      if (idx != f.locals.size())
        throw ParseError(pos, "expected local v" + std::to_string(f.locals.size()));
      expect(":");
      f.locals.push_back(parse_type(c.name));
      expect(";");
    }
    std::set<std::string> labels;
    while (!is_sym("}")) {
      if (at_end()) fail("'}' closing function " + f.path);
      if (peek().kind == Token::Kind::Ident && !kKeywords.count(peek().text) &&
          !local_index(peek().text) && is_sym(":", 1)) {
        SourcePos pos = peek().pos;
        std::string label = next().text;
        next();
        if (!labels.insert(label).second) throw ParseError(pos, "duplicate label " + label);
        f.blocks.push_back(Block{label, {}});
        continue;
      }
      if (f.blocks.empty()) {
        f.blocks.push_back(Block{"bb0", {}});
        labels.insert("bb0");
      }
      f.blocks.back().statements.push_back(parse_statement());
    }
    next();
    if (f.blocks.empty()) f.blocks.push_back(Block{"bb0", {}});
    c.functions.push_back(std::move(f));
  }

  Place parse_place() {
    if (is_sym("*")) {
      next();
      Place inner = parse_place();
      inner.projections.push_back(Projection::deref());
      return inner;
    }
    Place p;
    if (is_sym("(")) {
      next();
      p = parse_place();
      expect(")");
    } else {
      p.local = expect_local();
    }
    for (;;) {
      if (is_sym(".")) {
        next();
        p.projections.push_back(Projection::make_field(expect_ident("field name")));
      } else if (is_sym("[")) {
        next();
        if (peek().kind == Token::Kind::Int) {
          p.projections.push_back(Projection::make_index(next().value));
        } else {
          p.projections.push_back(Projection::make_index_local(expect_local()));
        }
        expect("]");
      } else {
        return p;
      }
    }
  }

  bool at_place() const {
    if (is_sym("*") || is_sym("(")) return true;
    return peek().kind == Token::Kind::Ident && local_index(peek().text).has_value();
  }

  Operand parse_operand() {
    if (at_place()) return Operand::copy(parse_place());
    if (is_sym("-")) {
      next();
      return Operand::integer(-expect_int("integer"));
    }
    if (peek().kind == Token::Kind::Int) return Operand::integer(next().value);
    if (is_ident("true")) return next(), Operand::boolean(true);
    if (is_ident("false")) return next(), Operand::boolean(false);
    if (peek().kind == Token::Kind::Str) return Operand::string(next().text);
    fail("operand");
  }

  RawAddress parse_raw_address() {
    RawAddress a;
    if (is_sym("&")) {
      next();
      a.location_of = true;
    }
    a.base = parse_place();
    bool negative = false;
    if (is_sym("-")) {
      negative = true;
    } else if (!is_sym("+")) {
      fail("'+' or '-' offset");
    }
    next();
    a.offset = expect_int("byte offset");
    if (negative) a.offset = -a.offset;
    return a;
  }

  std::vector<Operand> parse_sys_args() {
    std::vector<Operand> args;
    expect("(");
    while (!is_sym(")")) {
      args.push_back(parse_operand());
      if (!is_sym(",")) break;
      next();
    }
    expect(")");
    return args;
  }

  Statement parse_statement() {
    Statement s;
    if (is_ident("return")) {
      next();
      s.kind = Statement::Kind::Return;
    } else if (is_ident("goto")) {
      next();
      s.kind = Statement::Kind::Goto;
      s.targets.push_back(expect_ident("label"));
    } else if (is_ident("branch")) {
      next();
      s.kind = Statement::Kind::Branch;
      s.targets.push_back(expect_ident("label"));
      expect(",");
      s.targets.push_back(expect_ident("label"));
    } else if (is_ident("rawstore")) {
      next();
      s.kind = Statement::Kind::RawStore;
      s.raw = parse_raw_address();
      expect(",");
      s.src = parse_operand();
    } else if (is_ident("syscall")) {
      next();
      s.kind = Statement::Kind::Syscall;
      s.syscall = expect_ident("syscall name");
      s.sys_args = parse_sys_args();
    } else if (at_place()) {
      s.dst = parse_place();
      expect("=");
      parse_rhs(s);
    } else {
      fail("statement");
    }
    expect(";");
    return s;
  }

  void parse_rhs(Statement& s) {
    static const std::vector<std::pair<std::string_view, BinOp>> kOps = {
        {"add", BinOp::Add}, {"sub", BinOp::Sub}, {"mul", BinOp::Mul},
        {"eq", BinOp::Eq},   {"lt", BinOp::Lt}};
    if (is_ident("call")) {
      next();
      s.kind = Statement::Kind::Call;
      SourcePos pos = peek().pos;
      s.callee = parse_qpath();
      callees_.emplace_back(s.callee, pos);
      expect("(");
      while (!is_sym(")")) {
        s.args.push_back(parse_place());
        if (!is_sym(",")) break;
        next();
      }
      expect(")");
      return;
    }
    if (is_ident("alloc")) {
      next();
      s.kind = Statement::Kind::Alloc;
      s.container = expect_ident("container kind");
      expect("<");
      s.elem = parse_type(current_crate_for_types());
      expect(">");
      expect(",");
      s.length = expect_int("element count");
      if (is_ident("in")) {
        next();
        expect_keyword("shared");
        s.shared_domain = static_cast<std::uint32_t>(expect_int("shared domain id"));
      }
      return;
    }
    if (is_ident("syscall")) {
      next();
      s.kind = Statement::Kind::Syscall;
      s.syscall = expect_ident("syscall name");
      s.sys_args = parse_sys_args();
      return;
    }
    if (is_ident("rawload")) {
      next();
      s.kind = Statement::Kind::RawLoad;
      s.raw = parse_raw_address();
      return;
    }
    s.kind = Statement::Kind::Assign;
    if (is_ident("len")) {
      next();
      s.rvalue.kind = Rvalue::Kind::Len;
      s.rvalue.place = parse_place();
      return;
    }
    for (const auto& [name, op] : kOps) {
      if (is_ident(name)) {
        next();
        s.rvalue.kind = Rvalue::Kind::Binary;
        s.rvalue.op = op;
        s.rvalue.lhs = parse_operand();
        expect(",");
        s.rvalue.rhs = parse_operand();
        return;
      }
    }
    if (is_sym("&")) {
      next();
      s.rvalue.kind = Rvalue::Kind::AddrOf;
      if (is_ident("mut")) {
        next();
        s.rvalue.mut = true;
      }
      s.rvalue.place = parse_place();
      return;
    }
    s.rvalue.kind = Rvalue::Kind::Use;
    s.rvalue.lhs = parse_operand();
  }

  std::string current_crate_for_types() const { return current_crate_; }

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
  std::set<std::string> aggregates_;
  std::vector<std::pair<std::string, SourcePos>> callees_;
  std::string current_crate_{kImplicitCrate};
  bool implicit_used_ = false;
};

}  // namespace

Program parse_syntax(std::string_view text) {
  Parser parser(Lexer(text).run());
  return parser.run();
}

Program parse_program(std::string_view text) {
  Program p = parse_syntax(text);
  auto diags = validate_program(p);
  if (!diags.empty()) {
    std::string msg = diags.front().to_string();
    if (diags.size() > 1) msg += " (and " + std::to_string(diags.size() - 1) + " more)";
    throw ParseError(SourcePos{}, msg);
  }
  return p;
}

}  // namespace compart::ir
