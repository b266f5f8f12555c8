// Whole-pipeline properties over generated programs.
#include <gtest/gtest.h>

#include <chrono>

#include "compart/pipeline.hpp"
#include "fixtures.hpp"
#include "progen.hpp"

using namespace compart;
using instrument::Mode;
using interp::Status;

namespace {

constexpr std::uint64_t kCorpus = 250;

Analysis analyze_case(const testkit::GeneratedCase& c, bool filtered = false) {
  PipelineOptions opt;
  opt.context_sensitive = filtered;
  return testkit::analyze_text(c.program, c.spec, opt);
}

}  // namespace

TEST(Generator, RespectsShapeLimits) {
  for (std::uint64_t s = 0; s < kCorpus; ++s) {
    auto c = testkit::generate_case(s);
    EXPECT_LE(c.functions, 4);
    EXPECT_LE(c.max_statements, 12);
    EXPECT_LE(c.branches, 6);
    EXPECT_LE(c.decisions, 8);
    EXPECT_EQ(c.program, testkit::generate_case(s).program);
  }
}

TEST(Soundness, OracleCrossingsAreStaticSites) {
  auto start = std::chrono::steady_clock::now();
  std::size_t crossing = 0, runs = 0;
  for (std::uint64_t s = 0; s < kCorpus; ++s) {
    auto c = testkit::generate_case(s);
    SCOPED_TRACE("case " + std::to_string(s) + "\n" + c.program + c.spec);
    for (bool filtered : {false, true}) {
      auto a = analyze_case(c, filtered);
      auto r = check(a, c.exhaustive_seeds());
      ASSERT_EQ(r.verdict, CheckResult::Verdict::Pass)
          << (r.counterexamples.empty() ? "inconclusive"
                                        : r.counterexamples[0].first.to_string());
      runs += r.oracle.runs.size();
      if (!filtered) crossing += r.oracle.crossing.size();
    }
  }
  double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  EXPECT_LT(secs, 300.0);
  // The corpus has to actually exercise sharing for the property to mean anything.
  EXPECT_GE(crossing, kCorpus / 5);  // about 0.3 crossing sites per program
  EXPECT_GE(runs, 2 * kCorpus);
}

TEST(Soundness, DroppingACrossingSiteIsCaught) {
  std::size_t mutated = 0;
  for (std::uint64_t s = 0; s < kCorpus && mutated < 40; ++s) {
    auto c = testkit::generate_case(s);
    auto a = analyze_case(c);
    auto seeds = c.exhaustive_seeds();
    auto r = check(a, seeds);
    for (const auto& [site, _] : r.oracle.crossing) {
      auto m = a;
      std::erase_if(m.sites, [&](const auto& x) { return x.stmt == site; });
      auto bad = check(m, seeds);
      EXPECT_EQ(bad.verdict, CheckResult::Verdict::Fail) << "case " << s;
      ASSERT_FALSE(bad.counterexamples.empty());
      EXPECT_EQ(bad.counterexamples[0].first, site);
      ++mutated;
    }
  }
  EXPECT_GE(mutated, 20u);
}

TEST(Soundness, FilteredSitesAreASubset) {
  for (std::uint64_t s = 0; s < kCorpus; ++s) {
    auto c = testkit::generate_case(s);
    auto full = analyze_case(c, false), narrow = analyze_case(c, true);
    std::set<ir::StmtRef> all;
    for (const auto& x : full.sites) all.insert(x.stmt);
    for (const auto& x : narrow.sites) EXPECT_TRUE(all.count(x.stmt)) << "case " << s;
  }
}

TEST(Equivalence, PlainCopyAndShareAgree) {
  std::size_t compared = 0, boundary_runs = 0;
  for (std::uint64_t s = 0; s < kCorpus; ++s) {
    auto c = testkit::generate_case(s);
    auto a = analyze_case(c);
    auto copy = instrument_program(a, Mode::Copy);
    auto share = instrument_program(a, Mode::Share);
    for (auto seed : c.exhaustive_seeds()) {
      SCOPED_TRACE("case " + std::to_string(s) + " seed " + std::to_string(seed) + "\n" + c.program);
      interp::RunOptions o;
      o.seed = seed;
      auto p = interp::run(a.program, a.units, o);
      auto x = interp::run(copy, o);
      auto y = interp::run(share, o);
      ASSERT_EQ(p.status, Status::Completed) << p.message;
      ASSERT_EQ(x.status, Status::Completed) << outcome_text(x);
      ASSERT_EQ(y.status, Status::Completed) << outcome_text(y);
      EXPECT_EQ(p.return_value, x.return_value);
      EXPECT_EQ(p.return_value, y.return_value);
      EXPECT_EQ(p.stdout_lines, x.stdout_lines);
      EXPECT_EQ(p.stdout_lines, y.stdout_lines);
      ++compared;
      boundary_runs += y.stats.domain_switches > 0;
    }
  }
  EXPECT_GE(compared, kCorpus);
  EXPECT_GE(boundary_runs, compared / 4);
}

TEST(Determinism, AnalysisIsStableAndBounded) {
  for (std::uint64_t s = 0; s < kCorpus; ++s) {
    auto c = testkit::generate_case(s);
    auto a = analyze_case(c), b = analyze_case(c);
    EXPECT_EQ(report_text(a), report_text(b));
    EXPECT_EQ(report_json(a), report_json(b));
    EXPECT_LE(a.reach.iterations, a.reach.universe_size * analysis::ReachSet::kRuleCount);
  }
}
