// MiniMIR interpreter over the simulated runtime, plus the dynamic oracle.
//
// Every local lives in a stack frame inside some domain's stack region and
// every vec buffer in some domain's heap, so each guest memory access goes
// through DomainTable::check_access. Branches are resolved from the seed:
// the i-th branch executed takes its second target iff bit i of the seed is
// set (decisions past the 64th take the first target).
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "compart/instrument.hpp"
#include "compart/ir.hpp"
#include "compart/runtime.hpp"
#include "compart/spec.hpp"

namespace compart::interp {

enum class Status { Completed, Violated, Panicked, BudgetExceeded };
std::string_view status_name(Status s);

enum class EventKind { Create, Enter, Exit, Destroy, Alloc, Free, Copy, Syscall, Stdout, Violation, Access };
std::string_view event_kind_name(EventKind k);

struct Event {
  EventKind kind = EventKind::Enter;
  runtime::DomainId domain = runtime::kRootDomain;
  std::string detail;

  std::string to_string() const;
  friend bool operator==(const Event&, const Event&) = default;
};

struct Stats {
  std::uint64_t copies = 0;              // every transferred object, heap or stack
  std::uint64_t bytes_copied = 0;
  std::uint64_t heap_object_copies = 0;  // vec buffers duplicated across a boundary
  std::uint64_t restores = 0;
  std::uint64_t domain_switches = 0;
  std::map<runtime::DomainId, std::uint64_t> allocations;

  std::string to_string() const;
};

struct Outcome {
  Status status = Status::Completed;
  std::optional<std::int64_t> return_value;
  std::optional<runtime::Violation> violation;
  std::string message;  // panic / budget detail
  std::vector<Event> trace;
  std::vector<std::string> stdout_lines;
  Stats stats;
  std::uint64_t steps = 0;
  std::vector<bool> decisions;
  /// Domain table as it stood when the run ended (regions, instances, liveness).
  std::vector<runtime::Domain> domains;

  /// Trace, one event per line.
  std::string trace_text() const;
};

struct RunOptions {
  std::uint64_t seed = 0;
  std::uint64_t step_budget = 1'000'000;
  bool trace_access = false;
  std::size_t max_call_depth = 256;
  runtime::RuntimeConfig config;
};

/// Uninstrumented run: everything executes in the root domain.
Outcome run(const ir::Program& p, const std::vector<spec::SandboxUnit>& units,
            const RunOptions& options = {});

/// Instrumented run: wrappers drive the domain lifecycle.
Outcome run(const instrument::InstrumentedProgram& ip, const RunOptions& options = {});

struct OracleRun {
  std::uint64_t seed = 0;
  Status status = Status::Completed;
  std::string message;
  std::vector<bool> decisions;
  std::map<ir::StmtRef, std::set<UnitId>> crossing;
};

struct OracleReport {
  /// Union over all completed seeds: alloc site -> units that touched an
  /// object allocated there, for objects touched by at least two units.
  std::map<ir::StmtRef, std::set<UnitId>> crossing;
  std::vector<OracleRun> runs;

  bool inconclusive() const;
};

/// Observe-only execution: nothing is blocked, every touch of a heap object
/// is attributed to the unit whose code performs it (allocation included).
OracleReport run_oracle(const ir::Program& p, const std::vector<spec::SandboxUnit>& units,
                        const std::vector<std::uint64_t>& seeds,
                        std::uint64_t step_budget = 1'000'000);

}  // namespace compart::interp
