// Boundary instrumentation.
//
// Every call that crosses into a sandbox unit is redirected to a generated
// wrapper in the reserved `__compart` crate. The wrapper body is a plain call
// to the target; what the wrapper does around that call (domain resolution,
// enter/exit, argument and return copies) is described by the sidecar table,
// which the interpreter executes with monitor privileges.
//
// In share mode, allocation sites the analysis found to cross a boundary are
// tagged with the static id of their shared domain (`alloc ... in shared N`).
#pragma once

#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "compart/analysis.hpp"
#include "compart/callgraph.hpp"
#include "compart/ir.hpp"
#include "compart/spec.hpp"

namespace compart::instrument {

enum class Mode { Copy, Share };
std::string_view mode_name(Mode m);
std::optional<Mode> parse_mode(std::string_view s);

/// How one value crosses a boundary.
struct CopyNode {
  enum class Action { Bitwise, Aggregate, CopyReferent, PassShared };
  Action action = Action::Bitwise;
  ir::TypeExpr type;
  /// Aggregate: one plan per field, in declaration order.
  std::vector<std::pair<std::string, CopyNode>> fields;
  /// CopyReferent: plan for the pointee (refs) or for each element (vecs).
  std::vector<CopyNode> referent;
  /// The type recurs through itself here; expand again from `type` lazily.
  bool recursive = false;
  /// Share mode flag the plan was built with, for lazy re-expansion.
  bool covered = false;

  std::string to_string() const;
  friend bool operator==(const CopyNode&, const CopyNode&) = default;
};

std::string_view action_name(CopyNode::Action a);

class InstrumentError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// `covered` says whether every alloc site that may feed this slot has a
/// shared domain. Throws InstrumentError for rawptr values in copy mode.
CopyNode copy_plan_for_type(const ir::Program& p, const ir::TypeExpr& t, Mode mode, bool covered,
                            std::vector<std::string>* warnings = nullptr);

/// Overload following the operation's full input list: coverage is derived
/// from the plan and the origin sites.
CopyNode copy_plan_for_type(const ir::Program& p, const ir::TypeExpr& t, Mode mode,
                            const analysis::SharedDomainPlan& plan,
                            const std::vector<analysis::AllocSite>& origins,
                            std::vector<std::string>* warnings = nullptr);

struct WrapperInfo {
  std::string name;    // fully qualified, inside kWrapperCrate
  std::string target;  // the unit entry function
  UnitId caller_unit = kRootUnit;
  UnitId callee_unit = kRootUnit;
  bool transient = false;
  std::vector<CopyNode> args;
  CopyNode ret;
  std::vector<std::string> ops;
};

struct InstrumentedProgram {
  ir::Program program;
  Mode mode = Mode::Copy;
  std::vector<spec::SandboxUnit> units;
  std::vector<std::string> containers{"vec"};
  analysis::SharedDomainPlan plan;
  std::vector<WrapperInfo> wrappers;
  std::vector<std::string> warnings;

  const WrapperInfo* find_wrapper(std::string_view name) const;
  /// Wrapper to run when code executing in `caller_unit` calls `target`.
  const WrapperInfo* find_variant(std::string_view target, UnitId caller_unit) const;
};

/// Operation sequence every wrapper performs, in order.
const std::vector<std::string>& wrapper_ops();

InstrumentedProgram instrument(const ir::Program& p, const std::vector<spec::SandboxUnit>& units,
                               const std::vector<callgraph::BoundarySite>& boundary,
                               const analysis::ReachSet& reach,
                               const analysis::SharedDomainPlan& plan, Mode mode,
                               const std::vector<std::string>& containers = {"vec"});

inline constexpr std::string_view kSidecarSchema = "compart.sidecar/1";

std::string write_sidecar(const InstrumentedProgram& ip);
/// Rebuilds an InstrumentedProgram from its textual program and sidecar.
InstrumentedProgram read_sidecar(const ir::Program& program, std::string_view sidecar_json);

}  // namespace compart::instrument
