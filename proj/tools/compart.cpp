// compart: command-line driver.
//
//   compart analyze    PROGRAM --spec SPEC [--format text|json] [--graph edges|dot]
//   compart instrument PROGRAM --spec SPEC --mode copy|share [-o OUT] [--sidecar FILE]
//   compart run        PROGRAM [--spec SPEC --mode M | --sidecar FILE] [--seed N] [--trace]
//   compart check      PROGRAM|DIR --spec SPEC [--seeds A..B]
//
// Exit codes: 0 success, 1 invalid input, 2 violation or FAIL, 3 panic,
// step budget or INCONCLUSIVE, 4 internal error.
#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "compart/pipeline.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

enum Exit { kOk = 0, kInvalid = 1, kViolated = 2, kInconclusive = 3, kInternal = 4 };

struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void spill(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path);
  out << text;
}

compart::ir::Program load_program(const std::string& path) {
  try {
    return compart::ir::parse_program(slurp(path));
  } catch (const compart::ir::ParseError& e) {
    auto pos = e.pos();
    throw InputError(pos.line ? path + ":" + std::to_string(pos.line) + ":" +
                                    std::to_string(pos.column) + ": " + e.what()
                              : path + ": " + e.what());
  }
}

compart::spec::SandboxSpec load_spec(const std::string& path) {
  if (path.empty()) return {};
  try {
    return compart::spec::parse_spec(slurp(path));
  } catch (const compart::spec::SpecError& e) {
    throw InputError(path + ": " + e.what());
  }
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

std::vector<std::uint64_t> parse_seeds(const std::string& range, std::uint64_t single, bool has_single) {
  if (range.empty()) {
    if (has_single) return {single};
    std::vector<std::uint64_t> all;
    for (std::uint64_t s = 0; s < 64; ++s) all.push_back(s);
    return all;
  }
  auto dots = range.find("..");
  try {
    if (dots == std::string::npos) return {std::stoull(range)};
    std::uint64_t a = std::stoull(range.substr(0, dots)), b = std::stoull(range.substr(dots + 2));
    if (b < a || b - a > 1'000'000) throw InputError("bad seed range " + range);
    std::vector<std::uint64_t> out;
    for (auto s = a; s <= b; ++s) out.push_back(s);
    return out;
  } catch (const std::logic_error&) {
    throw InputError("bad seed range " + range);
  }
}

struct Options {
  std::string program;
  std::string spec;
  std::string format = "text";
  std::string containers;
  bool context_sensitive = false;
  std::string graph;
  std::string mode;
  std::string output;
  std::string sidecar;
  std::uint64_t seed = 0;
  std::string seeds;
  std::uint64_t step_budget = 1'000'000;
  bool trace = false;
  bool trace_access = false;
  bool seed_given = false;
};

compart::PipelineOptions pipeline_options(const Options& o) {
  compart::PipelineOptions p;
  p.context_sensitive = o.context_sensitive;
  if (!o.containers.empty()) p.containers = split_list(o.containers);
  return p;
}

compart::Analysis analyze_files(const Options& o, const std::string& program,
                                const std::string& spec) {
  auto p = load_program(program);
  auto s = load_spec(spec);
  try {
    return compart::analyze(std::move(p), std::move(s), pipeline_options(o));
  } catch (const compart::spec::SpecError& e) {
    throw InputError(spec + ": " + e.what());
  } catch (const compart::callgraph::VisibilityError& e) {
    throw InputError(std::string("visibility error: ") + e.what());
  }
}

compart::instrument::Mode require_mode(const std::string& m) {
  auto mode = compart::instrument::parse_mode(m);
  if (!mode) throw InputError("--mode must be copy or share");
  return *mode;
}

int cmd_analyze(const Options& o) {
  auto a = analyze_files(o, o.program, o.spec);
  if (o.graph == "edges") {
    std::cout << compart::callgraph::to_edge_list(a.graph);
    return kOk;
  }
  if (o.graph == "dot") {
    std::cout << compart::callgraph::to_dot(a.graph, a.units, a.boundary);
    return kOk;
  }
  std::cout << (o.format == "json" ? compart::report_json(a) : compart::report_text(a));
  return kOk;
}

int cmd_instrument(const Options& o) {
  auto a = analyze_files(o, o.program, o.spec);
  auto mode = require_mode(o.mode);
  compart::instrument::InstrumentedProgram ip;
  try {
    ip = compart::instrument_program(a, mode);
  } catch (const compart::instrument::InstrumentError& e) {
    throw InputError(e.what());
  }
  for (const auto& w : ip.warnings) std::cerr << "warning: " << w << "\n";
  std::string text = compart::ir::format_program(ip.program);
  std::string sidecar = compart::instrument::write_sidecar(ip);
  if (o.output.empty() || o.output == "-") {
    std::cout << text;
  } else {
    spill(o.output, text);
  }
  std::string sidecar_path = o.sidecar;
  if (sidecar_path.empty() && !o.output.empty() && o.output != "-")
    sidecar_path = o.output + ".sidecar.json";
  if (!sidecar_path.empty()) spill(sidecar_path, sidecar);
  return kOk;
}

int exit_for(compart::interp::Status s) {
  switch (s) {
    case compart::interp::Status::Completed: return kOk;
    case compart::interp::Status::Violated: return kViolated;
    default: return kInconclusive;
  }
}

int cmd_run(const Options& o) {
  auto program = load_program(o.program);
  bool instrumented = program.find_crate(compart::ir::kWrapperCrate) != nullptr;
  compart::interp::RunOptions ro;
  ro.seed = o.seed;
  ro.step_budget = o.step_budget;
  ro.trace_access = o.trace_access;
  compart::interp::Outcome out;
  if (instrumented || !o.sidecar.empty()) {
    std::string sidecar = o.sidecar;
    if (sidecar.empty()) throw InputError("instrumented program needs --sidecar");
    compart::instrument::InstrumentedProgram ip;
    try {
      ip = compart::instrument::read_sidecar(program, slurp(sidecar));
    } catch (const compart::instrument::InstrumentError& e) {
      throw InputError(sidecar + ": " + e.what());
    }
    out = compart::interp::run(ip, ro);
  } else if (!o.mode.empty()) {
    auto a = analyze_files(o, o.program, o.spec);
    compart::instrument::InstrumentedProgram ip;
    try {
      ip = compart::instrument_program(a, require_mode(o.mode));
    } catch (const compart::instrument::InstrumentError& e) {
      throw InputError(e.what());
    }
    out = compart::interp::run(ip, ro);
  } else {
    std::cerr << "warning: running uninstrumented program; no isolation is enforced\n";
    auto s = load_spec(o.spec);
    std::vector<compart::spec::SandboxUnit> units;
    try {
      units = compart::spec::resolve_units(s, program);
    } catch (const compart::spec::SpecError& e) {
      throw InputError(o.spec + ": " + e.what());
    }
    out = compart::interp::run(program, units, ro);
  }
  if (o.format == "json") {
    json j{{"schema", compart::kReportSchema},
           {"record", "outcome"},
           {"seed", o.seed},
           {"status", compart::interp::status_name(out.status)}};
    if (out.return_value) j["return"] = *out.return_value;
    if (out.violation) {
      j["violation"] = {{"kind", compart::runtime::violation_kind_name(out.violation->kind)},
                        {"domain", out.violation->context},
                        {"location", out.violation->location},
                        {"detail", out.violation->detail}};
      if (out.violation->address) j["violation"]["address"] = *out.violation->address;
      if (!out.violation->syscall.empty()) j["violation"]["syscall"] = out.violation->syscall;
    }
    if (!out.message.empty()) j["message"] = out.message;
    j["stdout"] = out.stdout_lines;
    j["steps"] = out.steps;
    j["stats"] = {{"copies", out.stats.copies},
                  {"bytes_copied", out.stats.bytes_copied},
                  {"heap_object_copies", out.stats.heap_object_copies},
                  {"restores", out.stats.restores},
                  {"domain_switches", out.stats.domain_switches}};
    json allocs = json::object();
    for (const auto& [d, n] : out.stats.allocations) allocs[std::to_string(d)] = n;
    j["stats"]["allocations"] = allocs;
    std::cout << j.dump() << "\n";
    if (o.trace)
      for (const auto& e : out.trace)
        std::cout << json{{"schema", compart::kReportSchema},
                          {"record", "event"},
                          {"kind", compart::interp::event_kind_name(e.kind)},
                          {"domain", e.domain},
                          {"detail", e.detail}}
                         .dump()
                  << "\n";
  } else {
    std::cout << compart::outcome_text(out);
    if (o.trace) std::cout << "trace:\n" << out.trace_text();
  }
  return exit_for(out.status);
}

int cmd_check(const Options& o) {
  std::vector<std::pair<std::string, std::string>> jobs;  // program, spec
  if (fs::is_directory(o.program)) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(o.program))
      if (e.path().extension() == ".mmir") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      auto spec = fs::path(f).replace_extension(".spec");
      jobs.emplace_back(f.string(), fs::exists(spec) ? spec.string() : o.spec);
    }
    if (jobs.empty()) throw InputError("no .mmir programs in " + o.program);
  } else {
    jobs.emplace_back(o.program, o.spec);
  }
  auto seeds = parse_seeds(o.seeds, o.seed, o.seed_given);
  int worst = kOk;
  std::size_t passed = 0;
  for (const auto& [program, spec] : jobs) {
    auto a = analyze_files(o, program, spec);
    auto r = compart::check(a, seeds, o.step_budget);
    int code = r.verdict == compart::CheckResult::Verdict::Pass   ? kOk
               : r.verdict == compart::CheckResult::Verdict::Fail ? kViolated
                                                                   : kInconclusive;
    if (code == kOk) ++passed;
    if (code == kViolated || (code == kInconclusive && worst == kOk)) worst = code;
    if (o.format == "json") {
      for (const auto& run : r.oracle.runs) {
        json j{{"schema", compart::kReportSchema},
               {"record", "seed"},
               {"program", program},
               {"seed", run.seed},
               {"status", compart::interp::status_name(run.status)},
               {"crossing", json::array()}};
        for (const auto& [site, who] : run.crossing) j["crossing"].push_back(site.to_string());
        std::cout << j.dump() << "\n";
      }
      json v{{"schema", compart::kReportSchema},
             {"record", "verdict"},
             {"program", program},
             {"verdict", compart::verdict_name(r.verdict)},
             {"static_sites", a.sites.size()},
             {"oracle_sites", r.oracle.crossing.size()},
             {"counterexamples", json::array()}};
      for (const auto& [site, seed] : r.counterexamples)
        v["counterexamples"].push_back({{"site", site.to_string()}, {"seed", seed}});
      std::cout << v.dump() << "\n";
    } else {
      std::cout << program << ": " << compart::verdict_name(r.verdict) << " (static "
                << a.sites.size() << " sites, oracle " << r.oracle.crossing.size()
                << " crossing sites, " << seeds.size() << " seeds)\n";
      for (const auto& [site, seed] : r.counterexamples)
        std::cout << "  counterexample: " << site.to_string() << " crosses under seed " << seed
                  << " but is not a static alloc site\n";
      for (const auto& run : r.oracle.runs)
        if (run.status != compart::interp::Status::Completed)
          std::cout << "  seed " << run.seed << ": " << compart::interp::status_name(run.status)
                    << " (" << run.message << ")\n";
    }
  }
  if (jobs.size() > 1 && o.format != "json")
    std::cout << passed << "/" << jobs.size() << " programs PASS\n";
  return worst;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"compart: sandbox specification, analysis, instrumentation and simulated runtime"};
  app.require_subcommand(1);
  Options o;

  auto common = [&](CLI::App* sub, bool spec_required) {
    sub->add_option("program", o.program, "MiniMIR program (or a directory for check)")->required();
    auto* spec = sub->add_option("--spec", o.spec, "sandbox specification file");
    if (spec_required) spec->required();
    sub->add_option("--format", o.format, "output format")->check(CLI::IsMember({"text", "json"}));
    sub->add_option("--containers", o.containers, "comma-separated heap container kinds");
    sub->add_flag("--context-sensitive", o.context_sensitive, "filter mismatched call/return paths");
    sub->add_option("--step-budget", o.step_budget, "statement budget per run");
  };

  auto* analyze = app.add_subcommand("analyze", "report boundary sites, reach set and alloc sites");
  common(analyze, true);
  analyze->add_option("--graph", o.graph, "print the call graph instead")
      ->check(CLI::IsMember({"edges", "dot"}));

  auto* instr = app.add_subcommand("instrument", "insert boundary wrappers");
  common(instr, true);
  instr->add_option("--mode", o.mode, "copy or share")->required()->check(CLI::IsMember({"copy", "share"}));
  instr->add_option("-o,--output", o.output, "instrumented program path (default stdout)");
  instr->add_option("--sidecar", o.sidecar, "sidecar path (default OUTPUT.sidecar.json)");

  auto* run = app.add_subcommand("run", "execute a program on the simulated runtime");
  common(run, false);
  run->add_option("--mode", o.mode, "instrument in memory with this mode before running")
      ->check(CLI::IsMember({"copy", "share"}));
  run->add_option("--sidecar", o.sidecar, "sidecar of an instrumented program");
  run->add_option("--seed", o.seed, "branch decision seed");
  run->add_flag("--trace", o.trace, "print the event trace");
  run->add_flag("--trace-access", o.trace_access, "include memory accesses in the trace");

  auto* chk = app.add_subcommand("check", "compare the dynamic oracle with the static result");
  common(chk, false);
  chk->add_option("--seed", o.seed, "single seed");
  chk->add_option("--seeds", o.seeds, "seed range A..B (default 0..63)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kInvalid;
  }

  o.seed_given = chk->count("--seed") > 0;
  try {
    if (*analyze) return cmd_analyze(o);
    if (*instr) return cmd_instrument(o);
    if (*run) return cmd_run(o);
    if (*chk) return cmd_check(o);
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInvalid;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kInternal;
  }
  return kInternal;
}
