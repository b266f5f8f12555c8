#include "compart/ir.hpp"

#include <algorithm>
#include <sstream>

namespace compart::ir {

TypeExpr TypeExpr::vec(TypeExpr elem) {
  TypeExpr t(Kind::Vec);
  t.inner_ = std::make_shared<const TypeExpr>(std::move(elem));
  return t;
}

TypeExpr TypeExpr::ref(TypeExpr target, bool mut) {
  TypeExpr t(mut ? Kind::RefMut : Kind::Ref);
  t.inner_ = std::make_shared<const TypeExpr>(std::move(target));
  return t;
}

TypeExpr TypeExpr::aggregate(std::string qualified_name) {
  TypeExpr t(Kind::Aggregate);
  t.name_ = std::move(qualified_name);
  return t;
}

const TypeExpr& TypeExpr::inner() const {
  if (!inner_) throw std::logic_error("type " + to_string() + " has no inner type");
  return *inner_;
}

std::string TypeExpr::to_string() const {
  switch (kind_) {
    case Kind::Bool: return "bool";
    case Kind::I32: return "i32";
    case Kind::RawPtr: return "rawptr";
    case Kind::Vec: return "vec<" + inner_->to_string() + ">";
    case Kind::Ref: return "&" + inner_->to_string();
    case Kind::RefMut: return "&mut " + inner_->to_string();
    case Kind::Aggregate: return name_;
  }
  return "?";
}

bool operator==(const TypeExpr& a, const TypeExpr& b) {
  if (a.kind_ != b.kind_) return false;
  switch (a.kind_) {
    case TypeExpr::Kind::Vec:
    case TypeExpr::Kind::Ref:
    case TypeExpr::Kind::RefMut: return *a.inner_ == *b.inner_;
    case TypeExpr::Kind::Aggregate: return a.name_ == b.name_;
    default: return true;
  }
}

const TypeExpr* AggregateDef::field_type(std::string_view field) const {
  for (const auto& [name, type] : fields)
    if (name == field) return &type;
  return nullptr;
}

std::optional<std::size_t> AggregateDef::field_index(std::string_view field) const {
  for (std::size_t i = 0; i < fields.size(); ++i)
    if (fields[i].first == field) return i;
  return std::nullopt;
}

bool Place::has_deref() const {
  return std::any_of(projections.begin(), projections.end(),
                     [](const Projection& p) { return p.kind == Projection::Kind::Deref; });
}

bool Place::has_index() const {
  return std::any_of(projections.begin(), projections.end(),
                     [](const Projection& p) { return p.kind == Projection::Kind::Index; });
}

std::string Place::to_string() const {
  std::string cur = "v" + std::to_string(local);
  for (std::size_t i = 0; i < projections.size(); ++i) {
    const auto& proj = projections[i];
    switch (proj.kind) {
      case Projection::Kind::Deref:
        cur = (i + 1 == projections.size()) ? "*" + cur : "(*" + cur + ")";
        break;
      case Projection::Kind::Field: cur += "." + proj.field; break;
      case Projection::Kind::Index:
        cur += "[" +
               (proj.index_local ? "v" + std::to_string(*proj.index_local)
                                 : std::to_string(proj.index_const)) +
               "]";
        break;
    }
  }
  return cur;
}

namespace {

std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    if (c == '\n') {
      out += "\\n";
      continue;
    }
    out += c;
  }
  return out + "\"";
}

}  // namespace

std::string Operand::to_string() const {
  switch (kind) {
    case Kind::Copy: return place.to_string();
    case Kind::Int: return std::to_string(int_value);
    case Kind::Bool: return bool_value ? "true" : "false";
    case Kind::Str: return quote(str_value);
  }
  return "?";
}

std::string_view binop_name(BinOp op) {
  switch (op) {
    case BinOp::Add: return "add";
    case BinOp::Sub: return "sub";
    case BinOp::Mul: return "mul";
    case BinOp::Eq: return "eq";
    case BinOp::Lt: return "lt";
  }
  return "?";
}

std::string Rvalue::to_string() const {
  switch (kind) {
    case Kind::Use: return lhs.to_string();
    case Kind::AddrOf: return (mut ? "&mut " : "&") + place.to_string();
    case Kind::Binary:
      return std::string(binop_name(op)) + " " + lhs.to_string() + ", " + rhs.to_string();
    case Kind::Len: return "len " + place.to_string();
  }
  return "?";
}

std::string RawAddress::to_string() const {
  std::string s = (location_of ? "&" : "") + base.to_string();
  if (offset < 0) return s + " - " + std::to_string(-offset);
  return s + " + " + std::to_string(offset);
}

std::size_t FunctionDef::statement_count() const {
  std::size_t n = 0;
  for (const auto& b : blocks) n += b.statements.size();
  return n;
}

const Statement& FunctionDef::statement(std::size_t flat_index) const {
  return const_cast<FunctionDef*>(this)->statement(flat_index);
}

Statement& FunctionDef::statement(std::size_t flat_index) {
  std::size_t i = flat_index;
  for (auto& b : blocks) {
    if (i < b.statements.size()) return b.statements[i];
    i -= b.statements.size();
  }
  throw std::out_of_range(path + ": no statement " + std::to_string(flat_index));
}

std::optional<std::size_t> FunctionDef::block_start(std::string_view label) const {
  std::size_t n = 0;
  for (const auto& b : blocks) {
    if (b.label == label) return n;
    n += b.statements.size();
  }
  return std::nullopt;
}

const FunctionDef* Program::find_function(std::string_view path) const {
  return const_cast<Program*>(this)->find_function(path);
}

FunctionDef* Program::find_function(std::string_view path) {
  for (auto& c : crates)
    for (auto& f : c.functions)
      if (f.path == path) return &f;
  return nullptr;
}

const AggregateDef* Program::find_aggregate(std::string_view name) const {
  for (const auto& c : crates)
    for (const auto& a : c.aggregates)
      if (a.name == name) return &a;
  return nullptr;
}

const Crate* Program::find_crate(std::string_view name) const {
  for (const auto& c : crates)
    if (c.name == name) return &c;
  return nullptr;
}

std::vector<const FunctionDef*> Program::functions() const {
  std::vector<const FunctionDef*> out;
  for (const auto& c : crates)
    for (const auto& f : c.functions) out.push_back(&f);
  return out;
}

std::vector<const AggregateDef*> Program::aggregates() const {
  std::vector<const AggregateDef*> out;
  for (const auto& c : crates)
    for (const auto& a : c.aggregates) out.push_back(&a);
  return out;
}

ParseError::ParseError(SourcePos pos, const std::string& message)
    : std::runtime_error(pos.line ? std::to_string(pos.line) + ":" + std::to_string(pos.column) +
                                        ": " + message
                                  : message),
      pos_(pos) {}

std::string Diagnostic::to_string() const {
  std::string where = function.empty() ? "program" : function;
  if (statement) where += "#" + std::to_string(*statement);
  return where + ": " + message;
}

std::optional<TypeExpr> type_of_place(const Program& p, const FunctionDef& f, const Place& place) {
  if (place.local >= f.locals.size()) return std::nullopt;
  TypeExpr t = f.locals[place.local];
  for (const auto& proj : place.projections) {
    switch (proj.kind) {
      case Projection::Kind::Deref:
        if (!t.is_ref()) return std::nullopt;
        t = t.inner();
        break;
      case Projection::Kind::Field: {
        if (t.kind() != TypeExpr::Kind::Aggregate) return std::nullopt;
        const AggregateDef* agg = p.find_aggregate(t.name());
        if (!agg) return std::nullopt;
        const TypeExpr* ft = agg->field_type(proj.field);
        if (!ft) return std::nullopt;
        t = *ft;
        break;
      }
      case Projection::Kind::Index:
        if (t.kind() != TypeExpr::Kind::Vec) return std::nullopt;
        if (proj.index_local) {
          if (*proj.index_local >= f.locals.size() ||
              f.locals[*proj.index_local].kind() != TypeExpr::Kind::I32)
            return std::nullopt;
        }
        t = t.inner();
        break;
    }
  }
  return t;
}

namespace {

std::uint32_t type_size_rec(const Program& p, const TypeExpr& t, int depth) {
  if (depth > 64) throw std::logic_error("aggregate nesting too deep in " + t.to_string());
  switch (t.kind()) {
    case TypeExpr::Kind::Vec: return 2 * kCellSize;
    case TypeExpr::Kind::Aggregate: {
      const AggregateDef* agg = p.find_aggregate(t.name());
      if (!agg) throw std::logic_error("unknown aggregate " + t.name());
      std::uint32_t total = 0;
      for (const auto& [name, ft] : agg->fields) total += type_size_rec(p, ft, depth + 1);
      return total;
    }
    default: return kCellSize;
  }
}

}  // namespace

std::uint32_t type_size(const Program& p, const TypeExpr& t) { return type_size_rec(p, t, 0); }

std::uint32_t field_offset(const Program& p, const AggregateDef& agg, std::string_view field) {
  std::uint32_t off = 0;
  for (const auto& [name, ft] : agg.fields) {
    if (name == field) return off;
    off += type_size(p, ft);
  }
  throw std::logic_error("aggregate " + agg.name + " has no field " + std::string(field));
}

std::string_view crate_of(std::string_view path) {
  auto pos = path.find("::");
  return pos == std::string_view::npos ? path : path.substr(0, pos);
}

const std::vector<std::string>& known_syscalls() {
  static const std::vector<std::string> names = {
      "write", "read", "open", "openat", "close", "getpid",
      "mmap", "mprotect", "pkey_alloc", "pkey_free", "pkey_mprotect",
  };
  return names;
}

}  // namespace compart::ir
