#include <gtest/gtest.h>

#include "compart/ir.hpp"
#include "fixtures.hpp"
#include "progen.hpp"

using namespace compart;
using compart::testkit::fixture_path;
using compart::testkit::read_file;

namespace {

ir::Program worked_example() { return ir::parse_program(read_file(fixture_path("worked_example.mmir"))); }

std::size_t count_kind(const ir::Program& p, ir::Statement::Kind k) {
  std::size_t n = 0;
  for (const auto* f : p.functions())
    for (std::size_t i = 0; i < f->statement_count(); ++i) n += f->statement(i).kind == k;
  return n;
}

std::string errors_of(const std::string& text) {
  try {
    ir::parse_program(text);
  } catch (const ir::ParseError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(Parse, WorkedExampleShape) {
  auto p = worked_example();
  EXPECT_EQ(p.aggregates().size(), 1u);
  EXPECT_EQ(count_kind(p, ir::Statement::Kind::Alloc), 2u);
  EXPECT_EQ(count_kind(p, ir::Statement::Kind::Branch), 1u);
  EXPECT_EQ(count_kind(p, ir::Statement::Kind::Call), 1u);
  EXPECT_EQ(p.entry, "app::main");
  const auto* s = p.find_aggregate("app::S");
  ASSERT_NE(s, nullptr);
  ASSERT_EQ(s->fields.size(), 1u);
  EXPECT_EQ(s->fields[0].first, "s");
  EXPECT_EQ(s->fields[0].second, ir::TypeExpr::vec(ir::TypeExpr::i32()));
}

TEST(Parse, WorkedExampleIsWellFormed) {
  auto p = ir::parse_syntax(read_file(fixture_path("worked_example.mmir")));
  EXPECT_TRUE(ir::validate_program(p).empty());
}

TEST(Parse, PlacesAndProjections) {
  auto p = worked_example();
  const auto* main = p.find_function("app::main");
  ASSERT_NE(main, nullptr);
  const auto& first = main->statement(0);
  ASSERT_TRUE(first.dst.has_value());
  EXPECT_EQ(first.dst->local, 1u);
  ASSERT_EQ(first.dst->projections.size(), 1u);
  EXPECT_EQ(first.dst->projections[0].kind, ir::Projection::Kind::Field);
  const auto& call = main->statement(*main->block_start("bb3"));
  EXPECT_EQ(call.kind, ir::Statement::Kind::Call);
  ASSERT_EQ(call.args.size(), 1u);
  EXPECT_TRUE(call.args[0].has_deref());
}

TEST(Parse, EntryIsForcedPublic) {
  auto p = ir::parse_program("fn main() -> i32 { v0 = 1; return; }");
  EXPECT_EQ(p.find_function("app::main")->visibility, ir::Visibility::Public);
}

TEST(Parse, RejectsMalformedInput) {
  EXPECT_NE(errors_of("fn main() -> i32 { bb0: v0 = 1; bb0: return; }").find("duplicate label"),
            std::string::npos);
  EXPECT_NE(errors_of("fn main() -> i32 { v0 = call app::nope(); return; }").find("unresolved"),
            std::string::npos);
  EXPECT_NE(errors_of("fn main() -> i32 { let v2: i32; return; }").find("expected local v1"),
            std::string::npos);
  EXPECT_NE(errors_of("fn f() -> i32 { return; }").find("entry"), std::string::npos);
  EXPECT_NE(errors_of("fn main() -> i32 { v0 = 1 return; }").find("expected"), std::string::npos);
}

TEST(Validate, ReportsTypeErrors) {
  auto p = ir::parse_syntax("fn main() -> i32 { let v1: vec<i32>; v0 = v1; return; }");
  auto d = ir::validate_program(p);
  ASSERT_EQ(d.size(), 1u);
  EXPECT_NE(d[0].message.find("expected i32"), std::string::npos);

  p = ir::parse_syntax("fn main() -> i32 { goto nowhere; }");
  d = ir::validate_program(p);
  ASSERT_EQ(d.size(), 1u);
  EXPECT_NE(d[0].message.find("unknown label"), std::string::npos);

  p = ir::parse_syntax("fn main() -> i32 { let v1: i32; rawstore v1 + 0, 1; return; }");
  d = ir::validate_program(p);
  ASSERT_EQ(d.size(), 1u);
  EXPECT_NE(d[0].message.find("does not hold an address"), std::string::npos);

  p = ir::parse_syntax("struct L { next: L, }\nfn main() -> i32 { return; }");
  d = ir::validate_program(p);
  ASSERT_FALSE(d.empty());
  EXPECT_NE(d[0].message.find("contains itself"), std::string::npos);
}

TEST(Validate, PrivateFunctionsStayInTheirCrate) {
  auto p = ir::parse_syntax(
      "crate lib { fn hidden() -> i32 { return; } }\n"
      "fn main() -> i32 { v0 = call lib::hidden(); return; }");
  auto d = ir::validate_program(p);
  ASSERT_EQ(d.size(), 1u);
  EXPECT_NE(d[0].message.find("private"), std::string::npos);
}

TEST(Layout, SizesAndOffsets) {
  auto p = ir::parse_program(
      "struct P { a: i32, v: vec<i32>, r: &i32, }\n"
      "fn main() -> i32 { return; }");
  const auto* agg = p.find_aggregate("app::P");
  // One cell per scalar or reference, two for a vec handle.
  EXPECT_EQ(ir::type_size(p, ir::TypeExpr::aggregate("app::P")), 8u + 16u + 8u);
  EXPECT_EQ(ir::field_offset(p, *agg, "a"), 0u);
  EXPECT_EQ(ir::field_offset(p, *agg, "v"), 8u);
  EXPECT_EQ(ir::field_offset(p, *agg, "r"), 24u);
}

TEST(Format, WorkedExampleRoundTrips) {
  auto p = worked_example();
  auto again = ir::parse_program(ir::format_program(p));
  EXPECT_EQ(again, p);
  EXPECT_EQ(ir::format_program(again), ir::format_program(p));
}

TEST(Format, GeneratedProgramsRoundTrip) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    auto gc = compart::testkit::generate_case(seed);
    auto p = ir::parse_program(gc.program);
    auto text = ir::format_program(p);
    EXPECT_EQ(ir::parse_program(text), p) << "seed " << seed;
  }
}

TEST(Format, FallThroughBlocksKeepTheirOrder) {
  auto p = ir::parse_program(
      "fn main() -> i32 { bb0: v0 = 1; bb1: v0 = add v0, 1; bb2: return; }");
  const auto* f = p.find_function("app::main");
  EXPECT_EQ(f->block_start("bb1"), std::optional<std::size_t>(1));
  EXPECT_EQ(f->block_start("bb2"), std::optional<std::size_t>(2));
  EXPECT_EQ(f->block_start("bb9"), std::nullopt);
}
