// End-to-end analysis driver shared by the CLI and the tests.
#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "compart/analysis.hpp"
#include "compart/callgraph.hpp"
#include "compart/instrument.hpp"
#include "compart/interp.hpp"
#include "compart/ir.hpp"
#include "compart/spec.hpp"

namespace compart {

struct PipelineOptions {
  bool context_sensitive = false;
  /// Overrides the spec's container list when set.
  std::optional<std::vector<std::string>> containers;
};

struct Analysis {
  ir::Program program;
  spec::SandboxSpec spec;
  std::vector<spec::SandboxUnit> units;
  callgraph::CallGraph graph;
  std::map<std::string, std::set<UnitId>> contexts;
  std::vector<callgraph::BoundarySite> boundary;
  analysis::ReachSet reach;
  std::vector<analysis::AllocSite> sites;
  analysis::SharedDomainPlan plan;
  std::vector<std::string> containers;
};

/// Throws spec::SpecError / callgraph::VisibilityError on bad input.
Analysis analyze(ir::Program program, spec::SandboxSpec spec, const PipelineOptions& opt = {});

instrument::InstrumentedProgram instrument_program(const Analysis& a, instrument::Mode mode);

inline constexpr std::string_view kReportSchema = "compart.report/1";

std::string report_text(const Analysis& a);
/// One JSON record per line, each carrying the schema version.
std::string report_json(const Analysis& a);

struct CheckResult {
  enum class Verdict { Pass, Fail, Inconclusive };
  Verdict verdict = Verdict::Pass;
  interp::OracleReport oracle;
  /// Oracle crossing sites missing from the static result, with a seed that
  /// exhibits each one.
  std::vector<std::pair<ir::StmtRef, std::uint64_t>> counterexamples;
};

std::string_view verdict_name(CheckResult::Verdict v);

CheckResult check(const Analysis& a, const std::vector<std::uint64_t>& seeds,
                  std::uint64_t step_budget = 1'000'000);

std::string outcome_text(const interp::Outcome& o);

}  // namespace compart
