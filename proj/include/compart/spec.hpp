// Sandbox specification: which functions, types and crates run isolated.
//
//   containers = ["vec"]            // optional, heap container kinds
//   [functions]
//   foo = { transient = true }
//   bar = { transient = false, syscalls = ["write"] }
//   [types]
//   [crates]
//
// See docs/spec-format.md for the full grammar.
#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "compart/ir.hpp"

namespace compart {

/// Identifies a sandbox unit. Units are numbered from 1 in declaration
/// order; 0 stands for the root (trusted) domain.
using UnitId = std::uint32_t;
inline constexpr UnitId kRootUnit = 0;

std::string unit_label(UnitId id);

}  // namespace compart

namespace compart::spec {

enum class UnitKind { Function, Type, Crate };

std::string_view unit_kind_name(UnitKind k);

struct UnitDecl {
  UnitKind kind = UnitKind::Function;
  std::string path;
  bool transient = false;
  std::vector<std::string> syscalls;
  std::size_t line = 0;

  friend bool operator==(const UnitDecl& a, const UnitDecl& b) {
    return a.kind == b.kind && a.path == b.path && a.transient == b.transient &&
           a.syscalls == b.syscalls;
  }
};

struct SandboxSpec {
  std::vector<UnitDecl> units;
  std::vector<std::string> containers{"vec"};

  std::map<std::string, std::vector<std::string>> syscall_allow() const;
};

struct SandboxUnit {
  UnitId id = kRootUnit;
  UnitDecl decl;
  /// The unit's public interface; calls from other domains must target these.
  std::set<std::string> entry_functions;
  /// Functions syntactically inside the unit. Disjoint across units.
  std::set<std::string> declared_members;
  /// Functions outside every unit that only this unit's code can reach; each
  /// unit executes its own logical copy.
  std::set<std::string> cloned_helpers;

  std::set<std::string> member_functions() const;
};

class SpecError : public std::runtime_error {
 public:
  SpecError(std::size_t line, const std::string& message);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

SandboxSpec parse_spec(std::string_view text);
std::string format_spec(const SandboxSpec& spec);

std::vector<SandboxUnit> resolve_units(const SandboxSpec& spec, const ir::Program& p);

/// Unit whose declared members contain `function`, or kRootUnit.
UnitId declared_unit_of(const std::vector<SandboxUnit>& units, std::string_view function);

}  // namespace compart::spec
