// Random MiniMIR programs plus matching specs for property tests.
//
// Generated programs are built so that no run can panic: control flow only
// goes forward, calls form a DAG, every vec has at least one element, and a
// place is only read once every path to the read has initialized it.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace compart::testkit {

struct GenConfig {
  int max_functions = 4;   // main included
  int max_statements = 12; // per function, labels not counted
  int max_branches = 6;    // per program
  int max_decisions = 8;   // dynamic branch decisions along any run
  bool allow_crates = true;
};

struct GeneratedCase {
  std::uint64_t seed = 0;
  std::string program;
  std::string spec;
  int functions = 0;
  int branches = 0;
  int max_statements = 0;
  /// Upper bound on branch decisions in one run; seeds 0..2^n-1 cover every path.
  int decisions = 0;

  std::vector<std::uint64_t> exhaustive_seeds() const;
};

GeneratedCase generate_case(std::uint64_t seed, const GenConfig& cfg = {});

}  // namespace compart::testkit
