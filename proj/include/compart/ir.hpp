// MiniMIR: the small mid-level IR every compart pass operates on.
//
// A program is a set of crates. Crates hold aggregate (struct) definitions and
// functions; functions hold typed locals (v0 is the return slot, v1..vm the
// parameters) and a body of labeled blocks. Places are a local followed by a
// chain of deref / field / index projections.
//
// The textual format is documented in docs/minimir.md.
#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace compart::ir {

class TypeExpr {
 public:
  enum class Kind { Bool, I32, RawPtr, Vec, Ref, RefMut, Aggregate };

  TypeExpr() : kind_(Kind::I32) {}

  static TypeExpr boolean() { return TypeExpr(Kind::Bool); }
  static TypeExpr i32() { return TypeExpr(Kind::I32); }
  static TypeExpr rawptr() { return TypeExpr(Kind::RawPtr); }
  static TypeExpr vec(TypeExpr elem);
  static TypeExpr ref(TypeExpr target, bool mut = false);
  static TypeExpr aggregate(std::string qualified_name);

  Kind kind() const { return kind_; }
  bool is_ref() const { return kind_ == Kind::Ref || kind_ == Kind::RefMut; }
  bool is_scalar() const {
    return kind_ == Kind::Bool || kind_ == Kind::I32 || kind_ == Kind::RawPtr;
  }
  /// Element type of a vec or target of a reference.
  const TypeExpr& inner() const;
  /// Qualified name of an aggregate type.
  const std::string& name() const { return name_; }

  std::string to_string() const;

  friend bool operator==(const TypeExpr& a, const TypeExpr& b);
  friend bool operator!=(const TypeExpr& a, const TypeExpr& b) { return !(a == b); }

 private:
  explicit TypeExpr(Kind k) : kind_(k) {}

  Kind kind_;
  std::shared_ptr<const TypeExpr> inner_;
  std::string name_;
};

struct AggregateDef {
  std::string name;  // qualified: crate::[module::]Name
  std::vector<std::pair<std::string, TypeExpr>> fields;

  const TypeExpr* field_type(std::string_view field) const;
  std::optional<std::size_t> field_index(std::string_view field) const;

  friend bool operator==(const AggregateDef&, const AggregateDef&) = default;
};

using LocalIndex = std::uint32_t;

struct Projection {
  enum class Kind { Deref, Field, Index };
  Kind kind = Kind::Deref;
  std::string field;                        // Field
  std::optional<LocalIndex> index_local;    // Index by local
  std::int64_t index_const = 0;             // Index by constant

  static Projection deref() { return {}; }
  static Projection make_field(std::string name) {
    Projection p;
    p.kind = Kind::Field;
    p.field = std::move(name);
    return p;
  }
  static Projection make_index(std::int64_t value) {
    Projection p;
    p.kind = Kind::Index;
    p.index_const = value;
    return p;
  }
  static Projection make_index_local(LocalIndex local) {
    Projection p;
    p.kind = Kind::Index;
    p.index_local = local;
    return p;
  }

  friend bool operator==(const Projection&, const Projection&) = default;
};

struct Place {
  LocalIndex local = 0;
  std::vector<Projection> projections;

  bool has_deref() const;
  bool has_index() const;
  std::string to_string() const;

  friend bool operator==(const Place&, const Place&) = default;
};

struct Operand {
  enum class Kind { Copy, Int, Bool, Str };
  Kind kind = Kind::Int;
  Place place;
  std::int64_t int_value = 0;
  bool bool_value = false;
  std::string str_value;  // syscall arguments only

  static Operand copy(Place p) {
    Operand o;
    o.kind = Kind::Copy;
    o.place = std::move(p);
    return o;
  }
  static Operand integer(std::int64_t v) {
    Operand o;
    o.int_value = v;
    return o;
  }
  static Operand boolean(bool v) {
    Operand o;
    o.kind = Kind::Bool;
    o.bool_value = v;
    return o;
  }
  static Operand string(std::string s) {
    Operand o;
    o.kind = Kind::Str;
    o.str_value = std::move(s);
    return o;
  }

  std::string to_string() const;
  friend bool operator==(const Operand&, const Operand&) = default;
};

enum class BinOp { Add, Sub, Mul, Eq, Lt };

std::string_view binop_name(BinOp op);

struct Rvalue {
  enum class Kind { Use, AddrOf, Binary, Len };
  Kind kind = Kind::Use;
  Operand lhs;          // Use, Binary
  Operand rhs;          // Binary
  Place place;          // AddrOf, Len
  bool mut = false;     // AddrOf
  BinOp op = BinOp::Add;

  std::string to_string() const;
  friend bool operator==(const Rvalue&, const Rvalue&) = default;
};

/// Address expression of a raw access: either the location of `base`
/// (`&place + off`) or the pointer held in `base` (`place + off`).
struct RawAddress {
  Place base;
  bool location_of = false;
  std::int64_t offset = 0;

  std::string to_string() const;
  friend bool operator==(const RawAddress&, const RawAddress&) = default;
};

struct Statement {
  enum class Kind { Assign, Call, Alloc, Syscall, Branch, Goto, Return, RawStore, RawLoad };
  Kind kind = Kind::Return;

  std::optional<Place> dst;       // Assign, Call, Alloc, RawLoad; optional for Syscall
  Rvalue rvalue;                  // Assign
  std::string callee;             // Call
  std::vector<Place> args;        // Call
  std::string container;          // Alloc: container kind ("vec", ...)
  TypeExpr elem;                  // Alloc: element type
  std::int64_t length = 0;        // Alloc
  std::optional<std::uint32_t> shared_domain;  // Alloc, set by instrumentation
  std::string syscall;            // Syscall
  std::vector<Operand> sys_args;  // Syscall
  std::vector<std::string> targets;  // Branch (2), Goto (1)
  RawAddress raw;                 // RawStore, RawLoad
  Operand src;                    // RawStore

  friend bool operator==(const Statement&, const Statement&) = default;
};

struct Block {
  std::string label;
  std::vector<Statement> statements;

  friend bool operator==(const Block&, const Block&) = default;
};

enum class Visibility { Public, Private };

struct FunctionDef {
  std::string path;   // crate::[module::][Type::]name
  std::string crate;
  Visibility visibility = Visibility::Private;
  std::optional<std::string> owner_type;  // qualified aggregate name for methods
  std::uint32_t param_count = 0;
  std::vector<TypeExpr> locals;  // locals[0] is the return slot
  std::vector<Block> blocks;

  const TypeExpr& return_type() const { return locals.at(0); }
  std::size_t statement_count() const;
  /// Statement by flat index across blocks, in textual order.
  const Statement& statement(std::size_t flat_index) const;
  Statement& statement(std::size_t flat_index);
  /// Flat index of the first statement of a block, or nullopt for unknown labels.
  std::optional<std::size_t> block_start(std::string_view label) const;

  friend bool operator==(const FunctionDef&, const FunctionDef&) = default;
};

struct Crate {
  std::string name;
  std::vector<AggregateDef> aggregates;
  std::vector<FunctionDef> functions;

  friend bool operator==(const Crate&, const Crate&) = default;
};

/// Location of a statement: function path plus flat statement index.
struct StmtRef {
  std::string function;
  std::size_t index = 0;

  std::string to_string() const { return function + "#" + std::to_string(index); }
  friend auto operator<=>(const StmtRef&, const StmtRef&) = default;
};

class Program {
 public:
  std::vector<Crate> crates;
  std::string entry;

  const FunctionDef* find_function(std::string_view path) const;
  FunctionDef* find_function(std::string_view path);
  const AggregateDef* find_aggregate(std::string_view name) const;
  const Crate* find_crate(std::string_view name) const;

  /// All functions in declaration order.
  std::vector<const FunctionDef*> functions() const;
  std::vector<const AggregateDef*> aggregates() const;

  friend bool operator==(const Program& a, const Program& b) {
    return a.crates == b.crates && a.entry == b.entry;
  }
};

// ---------------------------------------------------------------------------
// Errors and diagnostics

struct SourcePos {
  std::size_t line = 0;
  std::size_t column = 0;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(SourcePos pos, const std::string& message);
  SourcePos pos() const { return pos_; }

 private:
  SourcePos pos_;
};

struct Diagnostic {
  std::string function;  // empty for program-level diagnostics
  std::optional<std::size_t> statement;
  std::string message;

  std::string to_string() const;
};

// ---------------------------------------------------------------------------
// Operations

/// Parses the textual format without semantic checks.
Program parse_syntax(std::string_view text);
/// Parses and validates; throws ParseError when any diagnostic is produced.
Program parse_program(std::string_view text);
std::vector<Diagnostic> validate_program(const Program& p);
std::string format_program(const Program& p);

// ---------------------------------------------------------------------------
// Typing and layout helpers shared by analysis, instrumentation and the
// interpreter.

/// Type of a place, or nullopt if the projection chain is ill-typed.
std::optional<TypeExpr> type_of_place(const Program& p, const FunctionDef& f, const Place& place);

/// Size in bytes of a value of type `t` (8-byte cells; vec handles take two).
std::uint32_t type_size(const Program& p, const TypeExpr& t);
inline constexpr std::uint32_t kCellSize = 8;

/// Byte offset of `field` inside aggregate `agg`.
std::uint32_t field_offset(const Program& p, const AggregateDef& agg, std::string_view field);

std::string_view crate_of(std::string_view path);

/// Names of the simulator's syscalls, in table order.
const std::vector<std::string>& known_syscalls();

/// Crate reserved for generated boundary wrappers.
inline constexpr std::string_view kWrapperCrate = "__compart";

}  // namespace compart::ir
