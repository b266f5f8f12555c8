#include <gtest/gtest.h>

#include "compart/ir.hpp"
#include "compart/spec.hpp"
#include "fixtures.hpp"

using namespace compart;
using compart::testkit::fixture_path;
using compart::testkit::read_file;

namespace {

std::string spec_error(const std::string& text) {
  try {
    spec::parse_spec(text);
  } catch (const spec::SpecError& e) {
    return e.what();
  }
  return "";
}

std::string resolve_error(const std::string& spec_text, const std::string& program) {
  try {
    spec::resolve_units(spec::parse_spec(spec_text), ir::parse_program(program));
  } catch (const spec::SpecError& e) {
    return e.what();
  }
  return "";
}

const char* kLibProgram = R"(
struct Parser { n: i32, }
crate lib {
  pub fn api(v1: i32) -> i32 { v0 = call lib::inner(v1); return; }
  fn inner(v1: i32) -> i32 { v0 = call app::helper(v1); return; }
}
impl Parser {
  pub fn parse(v1: i32) -> i32 { v0 = v1; return; }
  fn step(v1: i32) -> i32 { v0 = v1; return; }
}
pub fn helper(v1: i32) -> i32 { v0 = v1; return; }
pub fn shared(v1: i32) -> i32 { v0 = v1; return; }
fn main() -> i32 {
  v0 = 1;
  v0 = call lib::api(v0);
  v0 = call app::Parser::parse(v0);
  v0 = call app::shared(v0);
  return;
}
)";

}  // namespace

TEST(SpecFormat, TwoFunctionGolden) {
  auto s = spec::parse_spec(read_file(fixture_path("two_functions.spec")));
  ASSERT_EQ(s.units.size(), 2u);
  EXPECT_EQ(s.units[0].kind, spec::UnitKind::Function);
  EXPECT_EQ(s.units[0].path, "foo");
  EXPECT_TRUE(s.units[0].transient);
  EXPECT_EQ(s.units[1].kind, spec::UnitKind::Function);
  EXPECT_EQ(s.units[1].path, "bar");
  EXPECT_FALSE(s.units[1].transient);
  EXPECT_EQ(s.containers, std::vector<std::string>{"vec"});
}

TEST(SpecFormat, SyscallsContainersAndRoundTrip) {
  const std::string text =
      "containers = [\"vec\", \"string\"]\n"
      "[functions]\n"
      "foo = { transient = true, syscalls = [\"write\", \"getpid\"] }\n"
      "[types]\n"
      "Parser = { transient = false }\n"
      "[crates]\n"
      "lib = { transient = false }\n";
  auto s = spec::parse_spec(text);
  ASSERT_EQ(s.units.size(), 3u);
  EXPECT_EQ(s.units[0].syscalls, (std::vector<std::string>{"write", "getpid"}));
  EXPECT_EQ(s.units[1].kind, spec::UnitKind::Type);
  EXPECT_EQ(s.units[2].kind, spec::UnitKind::Crate);
  EXPECT_EQ(s.containers, (std::vector<std::string>{"vec", "string"}));
  EXPECT_EQ(spec::format_spec(s), text);
  auto again = spec::parse_spec(spec::format_spec(s));
  EXPECT_EQ(again.units, s.units);
  EXPECT_EQ(s.syscall_allow().at("foo"), s.units[0].syscalls);
}

TEST(SpecFormat, Errors) {
  EXPECT_NE(spec_error("[functions]\nfoo = { }\n").find("transient"), std::string::npos);
  EXPECT_NE(spec_error("[modules]\n").find("malformed section"), std::string::npos);
  EXPECT_NE(spec_error("foo = { transient = true }\n").find("outside a section"), std::string::npos);
  EXPECT_NE(spec_error("[functions]\nfoo = { transient = true }\nfoo = { transient = false }\n")
                .find("duplicate unit"),
            std::string::npos);
  EXPECT_NE(spec_error("[crates]\nlib = { transient = true }\nlib::m = { transient = true }\n")
                .find("overlap"),
            std::string::npos);
  EXPECT_NE(spec_error("[functions]\nfoo = { transient = maybe }\n").find("true or false"),
            std::string::npos);
  EXPECT_NE(spec_error("[functions]\nfoo = { transient = true, color = 1 }\n").find("unknown unit field"),
            std::string::npos);
  auto e = spec_error("[functions]\n\nfoo = { transient = yes }\n");
  EXPECT_EQ(e.rfind("line 3:", 0), 0u) << e;
}

TEST(Resolve, UnitKinds) {
  auto units = spec::resolve_units(
      spec::parse_spec("[crates]\nlib = { transient = false }\n[types]\nParser = { transient = true }\n"),
      ir::parse_program(kLibProgram));
  ASSERT_EQ(units.size(), 2u);
  EXPECT_EQ(units[0].id, 1u);
  EXPECT_EQ(units[0].declared_members, (std::set<std::string>{"lib::api", "lib::inner"}));
  EXPECT_EQ(units[0].entry_functions, (std::set<std::string>{"lib::api"}));
  // helper is reachable only through lib, so lib runs its own copy.
  EXPECT_EQ(units[0].cloned_helpers, (std::set<std::string>{"app::helper"}));
  EXPECT_EQ(units[1].declared_members,
            (std::set<std::string>{"app::Parser::parse", "app::Parser::step"}));
  EXPECT_EQ(units[1].entry_functions, (std::set<std::string>{"app::Parser::parse"}));
  EXPECT_TRUE(units[1].cloned_helpers.empty());
  EXPECT_EQ(spec::declared_unit_of(units, "lib::inner"), 1u);
  EXPECT_EQ(spec::declared_unit_of(units, "app::helper"), kRootUnit);
  EXPECT_EQ(spec::declared_unit_of(units, "app::main"), kRootUnit);
}

TEST(Resolve, FunctionNamesMatchBySuffix) {
  auto units = spec::resolve_units(spec::parse_spec("[functions]\nshared = { transient = true }\n"),
                                   ir::parse_program(kLibProgram));
  ASSERT_EQ(units.size(), 1u);
  EXPECT_EQ(units[0].entry_functions, (std::set<std::string>{"app::shared"}));
  EXPECT_TRUE(units[0].decl.transient);
}

TEST(Resolve, Errors) {
  EXPECT_NE(resolve_error("[functions]\nmissing = { transient = true }\n", kLibProgram).find("unresolved"),
            std::string::npos);
  EXPECT_NE(resolve_error("[functions]\nmain = { transient = true }\n", kLibProgram).find("entry"),
            std::string::npos);
  EXPECT_NE(resolve_error("[crates]\nlib = { transient = true }\n[functions]\nlib::api = { transient = true }\n",
                          kLibProgram)
                .find("overlap"),
            std::string::npos);
  const char* twins = "crate a { pub fn f() -> i32 { return; } }\ncrate b { pub fn f() -> i32 { return; } }\n"
                      "fn main() -> i32 { v0 = call a::f(); v0 = call b::f(); return; }";
  EXPECT_NE(resolve_error("[functions]\nf = { transient = true }\n", twins).find("ambiguous"),
            std::string::npos);
  EXPECT_EQ(resolve_error("[functions]\na::f = { transient = true }\n", twins), "");
}
