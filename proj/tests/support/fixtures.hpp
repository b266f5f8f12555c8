// Fixture files and programs the tests build on the fly.
#pragma once

#include <cstdint>
#include <string>

#include "compart/pipeline.hpp"

namespace compart::testkit {

std::string fixture_path(const std::string& name);
std::string read_file(const std::string& path);

/// Parses fixtures/<name>.mmir with the spec fixtures/<spec>.spec.
Analysis analyze_fixture(const std::string& name, const std::string& spec,
                         const PipelineOptions& opt = {});
Analysis analyze_text(const std::string& program, const std::string& spec,
                      const PipelineOptions& opt = {});

/// main allocates one vec of `elements` and hands it by reference to a
/// sandboxed function `calls` times; the callee bumps element 0 and main
/// prints every result.
std::string vec_pass_program(int elements, int calls);
inline constexpr const char* kVecPassSpec = "[functions]\nbump = { transient = true }\n";

/// main shares one vec with a persistent sandbox that stores 7 at the
/// absolute address `target`. A second, root-private vec is never passed.
std::string confinement_program(std::uint64_t target);
inline constexpr const char* kConfinementSpec = "[functions]\npoke = { transient = false }\n";

/// A sandboxed `probe` whose body is the single given statement (plus return).
std::string syscall_program(const std::string& statement);
inline constexpr const char* kProbeSpec =
    "[functions]\nprobe = { transient = true, syscalls = [\"write\"] }\n";

}  // namespace compart::testkit
