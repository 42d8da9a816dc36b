#include "coderefine/testing_pool.hpp"

#include "properties.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

using namespace coderefine;
using namespace testsupport;

namespace {

TestOutcome outcome(const std::string& fp, TestStatus status, std::optional<std::string> type = std::nullopt) {
    TestOutcome o;
    o.test_fingerprint = fp;
    o.status = status;
    o.error_type = std::move(type);
    o.message = "details";
    return o;
}

}  // namespace

TEST(Pool, AddSkipsKnownFingerprints) {
    LexicalNormalizer n;
    TestingPool pool;
    const std::vector<TestCase> first = {make_test("assert f(1) == 1", n), make_test("assert f(2) == 2", n)};
    EXPECT_EQ(pool.add_tests(first), 2u);
    const std::vector<TestCase> second = {make_test("assert  f(1)==1", n), make_test("assert f(3) == 3", n)};
    EXPECT_EQ(pool.add_tests(second), 1u);
    ASSERT_EQ(pool.size(), 3u);
    EXPECT_EQ(pool.tests()[0].source, "assert f(1) == 1");
    EXPECT_EQ(pool.tests()[2].source, "assert f(3) == 3");
}

TEST(Pool, EmptyBatchIsNoOp) {
    TestingPool pool;
    EXPECT_EQ(pool.add_tests(std::vector<TestCase>{}), 0u);
    EXPECT_TRUE(pool.empty());
}

TEST(Pool, MissingFingerprintRejected) {
    TestingPool pool;
    TestCase t;
    t.source = "assert True";
    EXPECT_THROW(pool.add_tests(std::vector<TestCase>{t}), ContractViolation);
}

TEST(Pool, ReportCache) {
    TestingPool pool;
    EXPECT_EQ(pool.report_for("x"), nullptr);
    pool.record_report(ExecutionReport::from_outcomes("x", {outcome("a", TestStatus::pass)}));
    ASSERT_NE(pool.report_for("x"), nullptr);
    EXPECT_EQ(pool.report_for("x")->pass_count, 1);
}

TEST(Pool, SnapshotJsonl) {
    LexicalNormalizer n;
    TestingPool pool;
    pool.add_tests(std::vector<TestCase>{make_test("assert f(1) == 1", n, TestCategory::boundary)});
    const auto rows = parse_jsonl(pool.snapshot_jsonl(), "snapshot");
    ASSERT_EQ(rows.size(), 1u);
    EXPECT_EQ(rows[0]["category"], "boundary");
    EXPECT_EQ(rows[0]["source"], "assert f(1) == 1");
}

TEST(Dedup, KeepsFirstOccurrence) {
    LexicalNormalizer n;
    std::vector<TestCase> raw(3);
    raw[0].source = "assert f(1) == 1";
    raw[1].source = "assert f(1)==1  # again";
    raw[2].source = "assert f(2) == 2";
    raw[1].sample_index = 1;
    const auto out = dedup_tests(raw, n);
    ASSERT_EQ(out.size(), 2u);
    EXPECT_EQ(out[0].source, raw[0].source);
    EXPECT_FALSE(out[0].fingerprint.empty());
}

TEST(SamplePassing, EmptyWithoutReport) {
    TestingPool pool;
    Rng rng(1);
    EXPECT_TRUE(sample_passing_tests(pool, nullptr, 3, rng).empty());
}

TEST(SamplePassing, ReturnsAllWhenFewerThanM) {
    LexicalNormalizer n;
    TestingPool pool;
    const std::vector<TestCase> tests = {make_test("assert a", n), make_test("assert b", n), make_test("assert c", n)};
    pool.add_tests(tests);
    const auto report = ExecutionReport::from_outcomes(
        "s", {outcome(tests[0].fingerprint, TestStatus::pass), outcome(tests[1].fingerprint, TestStatus::fail, "x"),
              outcome(tests[2].fingerprint, TestStatus::pass)});
    Rng rng(3);
    const auto picked = sample_passing_tests(pool, &report, 5, rng);
    ASSERT_EQ(picked.size(), 2u);
    EXPECT_EQ(picked[0].source, "assert a");
    EXPECT_EQ(picked[1].source, "assert c");
}

TEST(ErrorTarget, NoneWhenEverythingPasses) {
    LexicalNormalizer n;
    TestingPool pool;
    const std::vector<TestCase> tests = {make_test("assert a", n)};
    pool.add_tests(tests);
    const auto report = ExecutionReport::from_outcomes("s", {outcome(tests[0].fingerprint, TestStatus::pass)});
    std::set<std::string> seen;
    Rng rng(3);
    EXPECT_FALSE(next_error_target(pool, &report, seen, rng).has_value());
    EXPECT_FALSE(next_error_target(pool, nullptr, seen, rng).has_value());
}

TEST(ErrorTarget, CyclesThroughTypesThenResets) {
    LexicalNormalizer n;
    TestingPool pool;
    const std::vector<TestCase> tests = {make_test("assert a", n), make_test("assert b", n)};
    pool.add_tests(tests);
    const auto report = ExecutionReport::from_outcomes(
        "s", {outcome(tests[0].fingerprint, TestStatus::fail, "assertion-failure"),
              outcome(tests[1].fingerprint, TestStatus::error, "type-error")});
    std::set<std::string> seen;
    Rng rng(11);
    const auto first = next_error_target(pool, &report, seen, rng);
    const auto second = next_error_target(pool, &report, seen, rng);
    ASSERT_TRUE(first && second);
    EXPECT_NE(first->error_type, second->error_type);
    EXPECT_EQ(seen.size(), 2u);
    const auto third = next_error_target(pool, &report, seen, rng);
    ASSERT_TRUE(third);
    EXPECT_EQ(seen.size(), 1u);
}

TEST(ErrorTarget, FeedbackFormat) {
    const auto o = outcome("fp", TestStatus::fail, "assertion-failure");
    EXPECT_EQ(format_feedback(o), "Error type: assertion-failure\ndetails");
}

TEST(PoolProperties, UniquenessAndIdempotence) {
    EXPECT_EQ(properties::pool_uniqueness_and_idempotence(1000, 101), 0);
}

TEST(PoolProperties, SamplePassingSubset) {
    EXPECT_EQ(properties::sample_passing_subset(1000, 202), 0);
}

TEST(PoolProperties, ErrorTargetMembership) {
    EXPECT_EQ(properties::error_target_membership(1000, 303), 0);
}

TEST(PoolProperties, MergeIffStrictImprovement) {
    EXPECT_EQ(properties::merge_iff_strict_improvement(1000, 404), 0);
}
