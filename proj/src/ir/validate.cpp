#include <algorithm>
#include <functional>
#include <set>

#include "compart/ir.hpp"

namespace compart::ir {
namespace {

bool single_cell(const TypeExpr& t) { return t.is_scalar() || t.is_ref(); }

class Validator {
 public:
  explicit Validator(const Program& p) : p_(p) {}

  std::vector<Diagnostic> run() {
    check_aggregates();
    check_entry();
    for (const auto& c : p_.crates)
      for (const auto& f : c.functions) check_function(c, f);
    return std::move(diags_);
  }

 private:
  void report(const FunctionDef* f, std::optional<std::size_t> stmt, std::string msg) {
    diags_.push_back(Diagnostic{f ? f->path : "", stmt, std::move(msg)});
  }

  bool type_resolves(const TypeExpr& t) const {
    switch (t.kind()) {
      case TypeExpr::Kind::Vec:
      case TypeExpr::Kind::Ref:
      case TypeExpr::Kind::RefMut: return type_resolves(t.inner());
      case TypeExpr::Kind::Aggregate: return p_.find_aggregate(t.name()) != nullptr;
      default: return true;
    }
  }

  void check_aggregates() {
    std::set<std::string> names;
    for (const auto* a : p_.aggregates()) {
      if (!names.insert(a->name).second) report(nullptr, {}, "duplicate aggregate " + a->name);
      std::set<std::string> fields;
      for (const auto& [fname, ft] : a->fields) {
        if (!fields.insert(fname).second)
          report(nullptr, {}, "duplicate field " + fname + " in " + a->name);
        if (!type_resolves(ft))
          report(nullptr, {}, "unresolved aggregate in field " + a->name + "." + fname);
      }
    }
    // Value-field recursion would make the type infinitely large.
    std::map<std::string, int> state;
    std::function<bool(const std::string&)> cyclic = [&](const std::string& name) {
      int& st = state[name];
      if (st == 1) return true;
      if (st == 2) return false;
      st = 1;
      if (const auto* a = p_.find_aggregate(name)) {
        for (const auto& [fname, ft] : a->fields)
          if (ft.kind() == TypeExpr::Kind::Aggregate && cyclic(ft.name())) {
            st = 2;
            return true;
          }
      }
      st = 2;
      return false;
    };
    for (const auto* a : p_.aggregates()) {
      state.clear();
      if (cyclic(a->name)) report(nullptr, {}, "aggregate " + a->name + " contains itself by value");
    }
  }

  void check_entry() {
    const FunctionDef* f = p_.find_function(p_.entry);
    if (!f) {
      report(nullptr, {}, "entry function " + p_.entry + " does not exist");
      return;
    }
    if (f->visibility != Visibility::Public) report(f, {}, "entry function must be public");
    if (f->param_count != 0) report(f, {}, "entry function must take no parameters");
  }

  std::optional<TypeExpr> place_type(const FunctionDef& f, std::size_t i, const Place& place) {
    if (place.local >= f.locals.size()) {
      report(&f, i, "undeclared local v" + std::to_string(place.local));
      return std::nullopt;
    }
    for (const auto& proj : place.projections)
      if (proj.kind == Projection::Kind::Index && proj.index_local &&
          *proj.index_local >= f.locals.size()) {
        report(&f, i, "undeclared local v" + std::to_string(*proj.index_local));
        return std::nullopt;
      }
    auto t = type_of_place(p_, f, place);
    if (!t) report(&f, i, "ill-typed projection in " + place.to_string());
    return t;
  }

  std::optional<TypeExpr> operand_type(const FunctionDef& f, std::size_t i, const Operand& o,
                                       bool allow_string = false) {
    switch (o.kind) {
      case Operand::Kind::Copy: return place_type(f, i, o.place);
      case Operand::Kind::Int:
        if (o.int_value < INT32_MIN || o.int_value > INT32_MAX)
          report(&f, i, "integer literal out of i32 range");
        return TypeExpr::i32();
      case Operand::Kind::Bool: return TypeExpr::boolean();
      case Operand::Kind::Str:
        if (!allow_string) report(&f, i, "string literal outside a syscall");
        return std::nullopt;
    }
    return std::nullopt;
  }

  void expect_type(const FunctionDef& f, std::size_t i, const std::optional<TypeExpr>& got,
                   const TypeExpr& want, const std::string& what) {
    if (got && *got != want)
      report(&f, i, what + " has type " + got->to_string() + ", expected " + want.to_string());
  }

  void check_rvalue(const FunctionDef& f, std::size_t i, const TypeExpr& dst, const Rvalue& rv) {
    switch (rv.kind) {
      case Rvalue::Kind::Use: expect_type(f, i, operand_type(f, i, rv.lhs), dst, "assigned value"); break;
      case Rvalue::Kind::AddrOf: {
        auto t = place_type(f, i, rv.place);
        if (t) expect_type(f, i, TypeExpr::ref(*t, rv.mut), dst, "borrow");
        break;
      }
      case Rvalue::Kind::Len: {
        auto t = place_type(f, i, rv.place);
        if (t && t->kind() != TypeExpr::Kind::Vec)
          report(&f, i, "len of non-vec " + rv.place.to_string());
        expect_type(f, i, TypeExpr::i32(), dst, "len");
        break;
      }
      case Rvalue::Kind::Binary: {
        auto a = operand_type(f, i, rv.lhs);
        auto b = operand_type(f, i, rv.rhs);
        if (rv.op == BinOp::Eq) {
          if (a && b && (*a != *b || !(a->kind() == TypeExpr::Kind::I32 ||
                                       a->kind() == TypeExpr::Kind::Bool)))
            report(&f, i, "eq needs two i32 or two bool operands");
          expect_type(f, i, TypeExpr::boolean(), dst, "comparison");
        } else {
          expect_type(f, i, a, TypeExpr::i32(), "left operand");
          expect_type(f, i, b, TypeExpr::i32(), "right operand");
          expect_type(f, i, rv.op == BinOp::Lt ? TypeExpr::boolean() : TypeExpr::i32(), dst,
                      std::string(binop_name(rv.op)));
        }
        break;
      }
    }
  }

  void check_raw(const FunctionDef& f, std::size_t i, const RawAddress& raw) {
    auto t = place_type(f, i, raw.base);
    if (!t || raw.location_of) return;
    if (!(t->is_ref() || t->kind() == TypeExpr::Kind::Vec || t->kind() == TypeExpr::Kind::RawPtr))
      report(&f, i, "raw access base " + raw.base.to_string() + " does not hold an address");
  }

  void check_function(const Crate& c, const FunctionDef& f) {
    if (f.locals.empty() || f.param_count + 1 > f.locals.size()) {
      report(&f, {}, "function must declare a return slot and its parameters");
      return;
    }
    for (std::size_t l = 0; l < f.locals.size(); ++l)
      if (!type_resolves(f.locals[l]))
        report(&f, {}, "unresolved aggregate in type of v" + std::to_string(l));
    if (f.owner_type && !p_.find_aggregate(*f.owner_type))
      report(&f, {}, "method of unknown type " + *f.owner_type);
    std::set<std::string> labels;
    for (const auto& b : f.blocks)
      if (!labels.insert(b.label).second) report(&f, {}, "duplicate label " + b.label);

    for (std::size_t i = 0; i < f.statement_count(); ++i) {
      const Statement& s = f.statement(i);
      std::optional<TypeExpr> dst;
      if (s.dst) dst = place_type(f, i, *s.dst);
      switch (s.kind) {
        case Statement::Kind::Assign:
          if (dst) check_rvalue(f, i, *dst, s.rvalue);
          break;
        case Statement::Kind::Call: {
          const FunctionDef* callee = p_.find_function(s.callee);
          if (!callee) {
            report(&f, i, "unresolved function path " + s.callee);
            break;
          }
          if (callee->visibility == Visibility::Private && callee->crate != c.name &&
              c.name != kWrapperCrate)
            report(&f, i, "call to private function " + s.callee + " across crates");
          if (s.args.size() != callee->param_count) {
            report(&f, i, s.callee + " takes " + std::to_string(callee->param_count) +
                              " arguments, got " + std::to_string(s.args.size()));
            break;
          }
          for (std::size_t a = 0; a < s.args.size(); ++a)
            expect_type(f, i, place_type(f, i, s.args[a]), callee->locals[a + 1],
                        "argument " + std::to_string(a + 1));
          if (dst) expect_type(f, i, callee->return_type(), *dst, "call result");
          break;
        }
        case Statement::Kind::Alloc:
          if (s.container.empty()) report(&f, i, "alloc without container kind");
          if (s.length < 0 || s.length > (1 << 24)) report(&f, i, "alloc length out of range");
          if (!type_resolves(s.elem)) report(&f, i, "unresolved aggregate in alloc element");
          if (dst) expect_type(f, i, TypeExpr::vec(s.elem), *dst, "alloc destination");
          break;
        case Statement::Kind::Syscall: {
          const auto& known = known_syscalls();
          if (std::find(known.begin(), known.end(), s.syscall) == known.end())
            report(&f, i, "unknown syscall " + s.syscall);
          for (const auto& a : s.sys_args) {
            auto t = operand_type(f, i, a, /*allow_string=*/true);
            if (t && !single_cell(*t))
              report(&f, i, "syscall argument " + a.to_string() + " is not a scalar");
          }
          if (dst) expect_type(f, i, dst, TypeExpr::i32(), "syscall result");
          break;
        }
        case Statement::Kind::Branch:
        case Statement::Kind::Goto:
          for (const auto& t : s.targets)
            if (!labels.count(t)) report(&f, i, "unknown label " + t);
          if (s.targets.size() != (s.kind == Statement::Kind::Branch ? 2u : 1u))
            report(&f, i, "wrong number of branch targets");
          break;
        case Statement::Kind::Return: break;
        case Statement::Kind::RawStore: {
          check_raw(f, i, s.raw);
          auto t = operand_type(f, i, s.src);
          if (t && !single_cell(*t)) report(&f, i, "rawstore source must be a single cell");
          break;
        }
        case Statement::Kind::RawLoad:
          check_raw(f, i, s.raw);
          if (dst && !single_cell(*dst)) report(&f, i, "rawload destination must be a single cell");
          break;
      }
      if ((s.kind == Statement::Kind::Assign || s.kind == Statement::Kind::Call ||
           s.kind == Statement::Kind::Alloc || s.kind == Statement::Kind::RawLoad) &&
          !s.dst)
        report(&f, i, "statement needs a destination");
    }
  }

  const Program& p_;
  std::vector<Diagnostic> diags_;
};

}  // namespace

std::vector<Diagnostic> validate_program(const Program& p) { return Validator(p).run(); }

}  // namespace compart::ir
