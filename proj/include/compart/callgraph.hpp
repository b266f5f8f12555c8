#pragma once

#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "compart/ir.hpp"
#include "compart/spec.hpp"

namespace compart::callgraph {

struct CallEdge {
  std::string caller;
  std::size_t stmt = 0;
  std::string callee;

  friend auto operator<=>(const CallEdge&, const CallEdge&) = default;
};

/// Whole-program call graph. MiniMIR calls are direct, so edges are exactly
/// the `call` statements, in function then statement order.
struct CallGraph {
  std::string entry;
  std::vector<std::string> nodes;
  std::vector<CallEdge> edges;
};

enum class Direction { RootToUnit, UnitToUnit };

struct BoundarySite {
  std::size_t edge = 0;  // index into CallGraph::edges
  CallEdge call;
  UnitId caller_unit = kRootUnit;
  UnitId callee_unit = kRootUnit;
  Direction direction = Direction::RootToUnit;
};

enum class EdgeClass { InternalRoot, InternalUnit, Boundary };

/// A call from outside a unit into one of its non-entry members.
class VisibilityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

CallGraph build_call_graph(const ir::Program& p);

/// Domains each function may execute in. Unit members run in their unit;
/// every other function runs in the domain of whoever calls it, so a helper
/// shared by several units gets one entry per unit.
std::map<std::string, std::set<UnitId>> execution_contexts(
    const CallGraph& cg, const std::vector<spec::SandboxUnit>& units);

std::vector<BoundarySite> boundary_call_sites(const CallGraph& cg,
                                              const std::vector<spec::SandboxUnit>& units);

/// One class per edge of `cg`, given the sites boundary_call_sites returned.
std::vector<EdgeClass> classify_edges(const CallGraph& cg,
                                      const std::vector<spec::SandboxUnit>& units,
                                      const std::vector<BoundarySite>& sites);

std::string to_edge_list(const CallGraph& cg);
std::string to_dot(const CallGraph& cg, const std::vector<spec::SandboxUnit>& units,
                   const std::vector<BoundarySite>& sites);

}  // namespace compart::callgraph
