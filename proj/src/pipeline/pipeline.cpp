#include "compart/pipeline.hpp"

#include <algorithm>
#include <nlohmann/json.hpp>
#include <sstream>

namespace compart {

using json = nlohmann::ordered_json;

Analysis analyze(ir::Program program, spec::SandboxSpec sp, const PipelineOptions& opt) {
  Analysis a;
  a.program = std::move(program);
  a.spec = std::move(sp);
  a.containers = opt.containers ? *opt.containers : a.spec.containers;
  a.units = spec::resolve_units(a.spec, a.program);
  a.graph = callgraph::build_call_graph(a.program);
  a.contexts = callgraph::execution_contexts(a.graph, a.units);
  a.boundary = callgraph::boundary_call_sites(a.graph, a.units);
  a.reach = analysis::compute_reach(a.program, a.units, a.boundary);
  if (opt.context_sensitive) a.reach = analysis::filter_context(a.reach);
  a.sites = analysis::find_alloc_sites(a.reach, a.program, a.containers);
  for (auto& s : a.sites) s.contexts = a.contexts.at(s.stmt.function);
  a.plan = analysis::plan_shared_domains(a.sites, a.boundary, &a.contexts);
  return a;
}

instrument::InstrumentedProgram instrument_program(const Analysis& a, instrument::Mode mode) {
  return instrument::instrument(a.program, a.units, a.boundary, a.reach, a.plan, mode, a.containers);
}

namespace {

std::string units_of(const std::set<UnitId>& us) {
  std::string s;
  for (auto u : us) s += (s.empty() ? "" : ",") + unit_label(u);
  return "{" + s + "}";
}

std::string join(const std::set<std::string>& xs) {
  std::string s;
  for (const auto& x : xs) s += (s.empty() ? "" : ", ") + x;
  return "[" + s + "]";
}

std::string direction(const callgraph::BoundarySite& b) {
  return b.direction == callgraph::Direction::RootToUnit ? "root->unit" : "unit->unit";
}

std::size_t iteration_bound(const analysis::ReachSet& r) {
  return r.universe_size * analysis::ReachSet::kRuleCount;
}

}  // namespace

std::string report_text(const Analysis& a) {
  std::ostringstream os;
  os << "program: " << a.program.functions().size() << " functions, "
     << a.program.aggregates().size() << " aggregates, entry " << a.program.entry << "\n";
  os << "units: " << a.units.size() << "\n";
  for (const auto& u : a.units) {
    os << "  " << unit_label(u.id) << " " << spec::unit_kind_name(u.decl.kind) << " " << u.decl.path
       << " transient=" << (u.decl.transient ? "true" : "false") << "\n"
       << "    entries " << join(u.entry_functions) << "\n"
       << "    members " << join(u.declared_members) << "\n";
    if (!u.cloned_helpers.empty()) os << "    helpers " << join(u.cloned_helpers) << "\n";
  }
  os << "call graph: " << a.graph.nodes.size() << " functions, " << a.graph.edges.size()
     << " call edges\n";
  os << "boundary sites: " << a.boundary.size() << "\n";
  for (std::size_t i = 0; i < a.boundary.size(); ++i) {
    const auto& b = a.boundary[i];
    os << "  #" << i << " " << b.call.caller << "#" << b.call.stmt << " -> " << b.call.callee << " "
       << unit_label(b.caller_unit) << "->" << unit_label(b.callee_unit) << " (" << direction(b)
       << ")\n";
  }
  os << "reach: " << a.reach.members.size() << " places (universe " << a.reach.universe_size
     << ", " << a.reach.iterations << " iterations, bound " << iteration_bound(a.reach) << ")"
     << (a.reach.context_filtered ? " context-filtered" : "")
     << (a.reach.filter_degraded ? " (filter degraded)" : "") << "\n";
  for (const auto& [k, labels] : a.reach.members) {
    const auto& why = a.reach.provenance.at(k);
    os << "  " << k.to_string() << "  " << analysis::rule_name(why.rule) << " @ "
       << why.stmt.to_string();
    if (why.from) os << " from " << why.from->to_string();
    os << "\n";
  }
  os << "alloc sites: " << a.sites.size() << "\n";
  for (const auto& s : a.sites) {
    os << "  " << s.stmt.to_string() << " " << s.container << " dst=" << s.dst.to_string();
    auto d = a.plan.site_domain.find(s.stmt);
    if (d != a.plan.site_domain.end()) os << " shared=" << d->second;
    os << "\n";
  }
  os << "shared domains: " << a.plan.domains.size() << "\n";
  for (const auto& d : a.plan.domains) os << "  " << d.id << " " << units_of(d.participants) << "\n";
  return os.str();
}

std::string report_json(const Analysis& a) {
  std::string out;
  auto emit = [&](json j) {
    json rec;
    rec["schema"] = kReportSchema;
    for (auto& [k, v] : j.items()) rec[k] = v;
    out += rec.dump() + "\n";
  };
  emit({{"record", "summary"},
        {"functions", a.program.functions().size()},
        {"aggregates", a.program.aggregates().size()},
        {"entry", a.program.entry},
        {"units", a.units.size()},
        {"call_edges", a.graph.edges.size()},
        {"boundary_sites", a.boundary.size()},
        {"reach_size", a.reach.members.size()},
        {"universe", a.reach.universe_size},
        {"iterations", a.reach.iterations},
        {"iteration_bound", iteration_bound(a.reach)},
        {"context_filtered", a.reach.context_filtered},
        {"alloc_sites", a.sites.size()},
        {"shared_domains", a.plan.domains.size()}});
  for (const auto& u : a.units)
    emit({{"record", "unit"},
          {"id", u.id},
          {"kind", spec::unit_kind_name(u.decl.kind)},
          {"path", u.decl.path},
          {"transient", u.decl.transient},
          {"entries", u.entry_functions},
          {"members", u.declared_members},
          {"helpers", u.cloned_helpers}});
  for (std::size_t i = 0; i < a.boundary.size(); ++i) {
    const auto& b = a.boundary[i];
    emit({{"record", "boundary"},
          {"index", i},
          {"caller", b.call.caller},
          {"stmt", b.call.stmt},
          {"callee", b.call.callee},
          {"caller_unit", b.caller_unit},
          {"callee_unit", b.callee_unit},
          {"direction", direction(b)}});
  }
  for (const auto& [k, labels] : a.reach.members) {
    const auto& why = a.reach.provenance.at(k);
    json j{{"record", "reach"},
           {"place", k.to_string()},
           {"rule", analysis::rule_name(why.rule)},
           {"stmt", why.stmt.to_string()}};
    if (why.from) j["from"] = why.from->to_string();
    emit(j);
  }
  for (const auto& s : a.sites) {
    json j{{"record", "alloc_site"},
           {"stmt", s.stmt.to_string()},
           {"container", s.container},
           {"dst", s.dst.to_string()}};
    auto d = a.plan.site_domain.find(s.stmt);
    if (d != a.plan.site_domain.end()) j["shared_domain"] = d->second;
    emit(j);
  }
  for (const auto& d : a.plan.domains)
    emit({{"record", "shared_domain"}, {"id", d.id}, {"participants", d.participants}});
  return out;
}

std::string_view verdict_name(CheckResult::Verdict v) {
  switch (v) {
    case CheckResult::Verdict::Pass: return "PASS";
    case CheckResult::Verdict::Fail: return "FAIL";
    case CheckResult::Verdict::Inconclusive: return "INCONCLUSIVE";
  }
  return "?";
}

CheckResult check(const Analysis& a, const std::vector<std::uint64_t>& seeds,
                  std::uint64_t step_budget) {
  CheckResult r;
  r.oracle = interp::run_oracle(a.program, a.units, seeds, step_budget);
  std::set<ir::StmtRef> found;
  for (const auto& s : a.sites) found.insert(s.stmt);
  for (const auto& run : r.oracle.runs)
    for (const auto& [site, _] : run.crossing)
      if (!found.count(site) &&
          std::none_of(r.counterexamples.begin(), r.counterexamples.end(),
                       [&](const auto& c) { return c.first == site; }))
        r.counterexamples.emplace_back(site, run.seed);
  if (!r.counterexamples.empty()) r.verdict = CheckResult::Verdict::Fail;
  else if (r.oracle.inconclusive()) r.verdict = CheckResult::Verdict::Inconclusive;
  return r;
}

std::string outcome_text(const interp::Outcome& o) {
  std::ostringstream os;
  os << "status: " << interp::status_name(o.status) << "\n";
  if (o.return_value) os << "return: " << *o.return_value << "\n";
  if (o.violation) os << "violation: " << o.violation->to_string() << "\n";
  if (!o.message.empty()) os << "message: " << o.message << "\n";
  for (const auto& line : o.stdout_lines) os << "stdout: " << line << "\n";
  os << "steps: " << o.steps << "\n";
  os << "stats: " << o.stats.to_string() << "\n";
  return os.str();
}

}  // namespace compart
