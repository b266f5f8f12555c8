#include "compart/callgraph.hpp"

#include <deque>
#include <sstream>

namespace compart::callgraph {

CallGraph build_call_graph(const ir::Program& p) {
  CallGraph cg;
  cg.entry = p.entry;
  for (const auto* f : p.functions()) {
    cg.nodes.push_back(f->path);
    for (std::size_t i = 0; i < f->statement_count(); ++i) {
      const auto& s = f->statement(i);
      if (s.kind == ir::Statement::Kind::Call) cg.edges.push_back(CallEdge{f->path, i, s.callee});
    }
  }
  return cg;
}

std::map<std::string, std::set<UnitId>> execution_contexts(
    const CallGraph& cg, const std::vector<spec::SandboxUnit>& units) {
  std::map<std::string, std::set<UnitId>> ctx;
  std::map<std::string, std::vector<std::string>> succ;
  for (const auto& e : cg.edges) succ[e.caller].push_back(e.callee);
  for (const auto& n : cg.nodes) {
    UnitId u = spec::declared_unit_of(units, n);
    ctx[n];
    if (u != kRootUnit) ctx[n].insert(u);
  }
  ctx[cg.entry].insert(kRootUnit);

  auto propagate = [&] {
    std::deque<std::string> work;
    for (const auto& n : cg.nodes)
      if (!ctx[n].empty()) work.push_back(n);
    while (!work.empty()) {
      std::string f = work.front();
      work.pop_front();
      for (const auto& callee : succ[f]) {
        if (spec::declared_unit_of(units, callee) != kRootUnit) continue;
        auto& target = ctx[callee];
        std::size_t before = target.size();
        target.insert(ctx[f].begin(), ctx[f].end());
        if (target.size() != before) work.push_back(callee);
      }
    }
  };
  propagate();
  // Functions nobody reaches are owned by the root.
  for (;;) {
    bool seeded = false;
    for (const auto& n : cg.nodes)
      if (ctx[n].empty()) {
        ctx[n].insert(kRootUnit);
        seeded = true;
        break;
      }
    if (!seeded) break;
    propagate();
  }
  return ctx;
}

std::vector<BoundarySite> boundary_call_sites(const CallGraph& cg,
                                              const std::vector<spec::SandboxUnit>& units) {
  std::vector<BoundarySite> sites;
  if (units.empty()) return sites;
  auto ctx = execution_contexts(cg, units);
  for (std::size_t i = 0; i < cg.edges.size(); ++i) {
    const auto& e = cg.edges[i];
    UnitId callee_unit = spec::declared_unit_of(units, e.callee);
    if (callee_unit == kRootUnit) continue;
    const auto& unit = units.at(callee_unit - 1);
    for (UnitId caller_unit : ctx[e.caller]) {
      if (caller_unit == callee_unit) continue;
      if (!unit.entry_functions.count(e.callee))
        throw VisibilityError(e.caller + "#" + std::to_string(e.stmt) + " calls " + e.callee +
                              ", which is private to unit " + unit.decl.path);
      sites.push_back(BoundarySite{i, e, caller_unit, callee_unit,
                                   caller_unit == kRootUnit ? Direction::RootToUnit
                                                            : Direction::UnitToUnit});
    }
  }
  return sites;
}

std::vector<EdgeClass> classify_edges(const CallGraph& cg,
                                      const std::vector<spec::SandboxUnit>& units,
                                      const std::vector<BoundarySite>& sites) {
  auto ctx = execution_contexts(cg, units);
  std::vector<EdgeClass> out(cg.edges.size(), EdgeClass::InternalRoot);
  for (std::size_t i = 0; i < cg.edges.size(); ++i) {
    const auto& e = cg.edges[i];
    bool root_only = ctx[e.caller] == std::set<UnitId>{kRootUnit} &&
                     spec::declared_unit_of(units, e.callee) == kRootUnit;
    out[i] = root_only ? EdgeClass::InternalRoot : EdgeClass::InternalUnit;
  }
  for (const auto& s : sites) out[s.edge] = EdgeClass::Boundary;
  return out;
}

std::string to_edge_list(const CallGraph& cg) {
  std::ostringstream os;
  for (const auto& e : cg.edges) os << e.caller << "#" << e.stmt << " -> " << e.callee << "\n";
  return os.str();
}

std::string to_dot(const CallGraph& cg, const std::vector<spec::SandboxUnit>& units,
                   const std::vector<BoundarySite>& sites) {
  std::set<std::size_t> boundary;
  for (const auto& s : sites) boundary.insert(s.edge);
  std::ostringstream os;
  os << "digraph callgraph {\n";
  for (const auto& n : cg.nodes) {
    UnitId u = spec::declared_unit_of(units, n);
    os << "  \"" << n << "\" [label=\"" << n << "\\n" << unit_label(u) << "\"];\n";
  }
  for (std::size_t i = 0; i < cg.edges.size(); ++i) {
    const auto& e = cg.edges[i];
    os << "  \"" << e.caller << "\" -> \"" << e.callee << "\" [label=\"#" << e.stmt << "\""
       << (boundary.count(i) ? ", style=bold, color=red" : "") << "];\n";
  }
  os << "}\n";
  return os.str();
}

}  // namespace compart::callgraph
