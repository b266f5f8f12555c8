#include "fixtures.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace compart::testkit {

std::string fixture_path(const std::string& name) { return std::string(COMPART_FIXTURES) + "/" + name; }

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Analysis analyze_text(const std::string& program, const std::string& spec,
                      const PipelineOptions& opt) {
  return analyze(ir::parse_program(program), spec::parse_spec(spec), opt);
}

Analysis analyze_fixture(const std::string& name, const std::string& spec,
                         const PipelineOptions& opt) {
  return analyze_text(read_file(fixture_path(name + ".mmir")),
                      read_file(fixture_path(spec + ".spec")), opt);
}

std::string vec_pass_program(int elements, int calls) {
  std::ostringstream os;
  os << "pub fn bump(v1: &mut vec<i32>) -> i32 {\n"
     << "  (*v1)[0] = add (*v1)[0], 1;\n"
     << "  v0 = (*v1)[0];\n"
     << "  return;\n"
     << "}\n\n"
     << "fn main() -> i32 {\n"
     << "  let v1: vec<i32>;\n"
     << "  let v2: &mut vec<i32>;\n"
     << "  let v3: i32;\n"
     << "  v1 = alloc vec<i32>, " << elements << ";\n"
     << "  v2 = &mut v1;\n";
  for (int i = 0; i < calls; ++i)
    os << "  v3 = call app::bump(v2);\n"
       << "  syscall write(1, v3);\n";
  os << "  v0 = v1[0];\n"
     << "  return;\n"
     << "}\n";
  return os.str();
}

std::string confinement_program(std::uint64_t target) {
  std::ostringstream os;
  os << "pub fn poke(v1: &vec<i32>, v2: i32) -> i32 {\n"
     << "  let v3: rawptr;\n"
     << "  v0 = (*v1)[0];\n"
     << "  rawstore &v3 + 0, v2;\n"
     << "  rawstore v3 + 0, 7;\n"
     << "  return;\n"
     << "}\n\n"
     << "fn main() -> i32 {\n"
     << "  let v1: vec<i32>;\n"
     << "  let v2: vec<i32>;\n"
     << "  let v3: &vec<i32>;\n"
     << "  let v4: i32;\n"
     << "  v1 = alloc vec<i32>, 4;\n"
     << "  v2 = alloc vec<i32>, 4;\n"
     << "  v3 = &v1;\n"
     << "  v4 = " << target << ";\n"
     << "  v0 = call app::poke(v3, v4);\n"
     << "  return;\n"
     << "}\n";
  return os.str();
}

std::string syscall_program(const std::string& statement) {
  return "pub fn probe() -> i32 {\n  " + statement +
         "\n  return;\n}\n\nfn main() -> i32 {\n  v0 = call app::probe();\n  return;\n}\n";
}

}  // namespace compart::testkit
