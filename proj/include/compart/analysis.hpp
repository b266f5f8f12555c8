// Backward-reachability analysis for cross-boundary heap data.
//
// Starting from the arguments (and return slots) of every boundary call, the
// analysis closes a set of places under the value-flow relations induced by
// assignments, borrows, dereferences and parameter passing until a fixed
// point. Allocation statements whose destination lands in the set are the
// sites that may allocate data crossing a sandbox boundary; those sites are
// then grouped by the set of domains that share the data.
//
// Places are field-sensitive. Dereferences are collapsed ((*p).f and p.f are
// the same node) and all elements of a vec are summarized by one `[*]` node.
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "compart/callgraph.hpp"
#include "compart/ir.hpp"
#include "compart/spec.hpp"

namespace compart::analysis {

struct PlaceKey {
  std::string function;
  ir::LocalIndex local = 0;
  std::string path;  // normalized projection string: ".field" and "[*]" tokens

  std::string to_string() const;
  friend auto operator<=>(const PlaceKey&, const PlaceKey&) = default;
};

enum class Rule {
  SeedArgument,
  SeedReturn,
  Assign,
  AddrOf,
  DerefLoad,
  DerefStore,
  AddrOfDeref,
  InteriorBorrow,
  CallParam,
  CallReturn,
};

std::string_view rule_name(Rule r);

/// Which boundary crossing a seed belongs to: boundary site index plus the
/// argument slot (0-based) or kReturnSlot for the callee's return value.
struct SeedLabel {
  static constexpr int kReturnSlot = -1;
  std::uint32_t site = 0;
  int slot = 0;

  friend auto operator<=>(const SeedLabel&, const SeedLabel&) = default;
};

/// A value-flow relation of the working statement set, expanded over every
/// projection suffix of the transferred type.
struct Relation {
  Rule rule = Rule::Assign;
  ir::StmtRef stmt;
  std::vector<std::pair<PlaceKey, PlaceKey>> pairs;  // (lhs.eta, rhs.eta)
  /// For parameter/return relations: index of the call site and whether the
  /// lhs (true) or rhs (false) lives in the callee.
  std::optional<std::uint32_t> call_site;
  bool lhs_in_callee = false;
};

struct Provenance {
  Rule rule = Rule::SeedArgument;
  ir::StmtRef stmt;
  std::optional<PlaceKey> from;
};

struct ReachSet {
  /// Members of the set and the seed labels that reach each one.
  std::map<PlaceKey, std::set<std::uint32_t>> members;
  std::vector<SeedLabel> labels;
  std::set<PlaceKey> seeds;
  std::map<PlaceKey, std::set<std::uint32_t>> seed_labels;
  std::map<PlaceKey, Provenance> provenance;
  std::vector<Relation> statements;
  std::vector<ir::StmtRef> call_sites;

  std::size_t iterations = 0;
  std::size_t universe_size = 0;
  bool context_filtered = false;
  /// Set when the context filter hit its state budget and returned its input.
  bool filter_degraded = false;

  static constexpr std::size_t kRuleCount = 7;

  bool contains(const PlaceKey& k) const { return members.count(k) != 0; }
  /// Key of an IR place with derefs collapsed and indices summarized.
  static PlaceKey key_of(const ir::Program& p, const ir::FunctionDef& f, const ir::Place& place);
};

struct AllocSite {
  ir::StmtRef stmt;
  std::string container;
  PlaceKey dst;
  std::set<std::uint32_t> labels;
  std::set<std::uint32_t> boundary_sites;
  /// Domains the allocating function may execute in.
  std::set<UnitId> contexts;

  friend bool operator==(const AllocSite& a, const AllocSite& b) {
    return a.stmt == b.stmt && a.container == b.container && a.dst == b.dst;
  }
};

struct SharedDomain {
  std::uint32_t id = 0;
  std::set<UnitId> participants;
};

struct SharedDomainPlan {
  static constexpr std::uint32_t kBaseId = 0x10000;

  std::vector<SharedDomain> domains;
  std::map<ir::StmtRef, std::uint32_t> site_domain;

  const SharedDomain* find(std::uint32_t id) const;
};

ReachSet compute_reach(const ir::Program& p, const std::vector<spec::SandboxUnit>& units,
                       const std::vector<callgraph::BoundarySite>& sites);

/// Drops members all of whose derivations enter a callee through one call
/// site and leave it through another. Seeds are never removed. Recursive
/// cycles fall back to the unfiltered result on the affected paths.
ReachSet filter_context(const ReachSet& reach, std::size_t state_budget = 200000);

std::vector<AllocSite> find_alloc_sites(const ReachSet& reach, const ir::Program& p,
                                        const std::vector<std::string>& containers);

/// Every alloc statement whose destination carries at least one seed label,
/// regardless of container kind.
std::vector<AllocSite> alloc_origins(const ReachSet& reach, const ir::Program& p);

SharedDomainPlan plan_shared_domains(
    const std::vector<AllocSite>& sites, const std::vector<callgraph::BoundarySite>& boundary,
    const std::map<std::string, std::set<UnitId>>* contexts = nullptr);

/// Canonical keys of every place in the program (the analysis universe).
std::set<PlaceKey> place_universe(const ir::Program& p);

}  // namespace compart::analysis
