#include <gtest/gtest.h>

#include <set>
#include <sstream>

#include "walkoff/base_out.hpp"
#include "walkoff/csv.hpp"
#include "walkoff/kv_config.hpp"
#include "walkoff/rng.hpp"

using namespace walkoff;

TEST(Rng, DerivedSeedsAreDistinctAndStable)
{
    std::set<std::uint64_t> seen;
    for (std::uint64_t i = 0; i < 10000; ++i)
        seen.insert(derive_seed(42, i));
    EXPECT_EQ(seen.size(), 10000u);
    static_assert(derive_seed(1, 2) == derive_seed(1, 2));
    EXPECT_NE(derive_seed(1, 2), derive_seed(2, 1));
}

TEST(Rng, SplitMixReproducesAndUniformStaysInRange)
{
    SplitMix64 a(7), b(7);
    double sum = 0;
    for (int i = 0; i < 100000; ++i) {
        double u = uniform01(a);
        ASSERT_EQ(u, uniform01(b));
        ASSERT_GE(u, 0.0);
        ASSERT_LT(u, 1.0);
        sum += u;
    }
    EXPECT_NEAR(sum / 100000, 0.5, 0.005);
}

TEST(Csv, QuotedFieldsAndEscapes)
{
    auto f = csv::split_line(R"(start,ap1,"Smith, ""Al""",0,0,1)");
    ASSERT_EQ(f.size(), 6u);
    EXPECT_EQ(f[2], R"(Smith, "Al")");
    EXPECT_EQ(csv::escape("plain"), "plain");
    EXPECT_EQ(csv::split_line(csv::escape(f[2]))[0], f[2]);
}

TEST(Csv, TableReportsMissingColumnAndBadRows)
{
    std::istringstream ok("\xEF\xBB\xBF" "a,b\r\n1,2\n\n3,4\n");
    auto t = csv::read_table(ok);
    EXPECT_EQ(t.header[0], "a");
    ASSERT_EQ(t.rows.size(), 2u);
    EXPECT_EQ(t.row_lines[1], 4u);
    try {
        (void)t.column("zz");
        FAIL();
    } catch (const SchemaError& e) {
        EXPECT_NE(std::string(e.what()).find("'zz'"), std::string::npos);
    }
    std::istringstream bad("a,b\n1,2\n1,2,3\n");
    try {
        csv::read_table(bad);
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line, 3u);
    }
}

TEST(KeyValue, ParsesCommentsAndRejectsDuplicates)
{
    std::istringstream in("# model\nout = 0.7  # trailing\n\nsingle=0.3\n");
    auto cfg = KeyValueConfig::parse(in);
    EXPECT_DOUBLE_EQ(cfg.get_double("out", 0), 0.7);
    EXPECT_DOUBLE_EQ(cfg.get_double("walk", 0.25), 0.25);
    EXPECT_NO_THROW(cfg.require_known({"out", "single"}));
    EXPECT_THROW(cfg.require_known({"out"}), ValidationError);

    std::istringstream dup("a=1\na=2\n");
    try {
        KeyValueConfig::parse(dup);
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line, 2u);
    }
    std::istringstream nokey("just words\n");
    EXPECT_THROW(KeyValueConfig::parse(nokey), ParseError);
    std::istringstream nan("x = abc\n");
    EXPECT_THROW(KeyValueConfig::parse(nan).get_double("x", 0), ValidationError);
}

TEST(KeyValue, ExactRoundTripsDoubles)
{
    for (double v : {0.1, 1.0 / 3.0, 2.1381e-7, -4.5})
        EXPECT_EQ(*parse_double(exact(v)), v);
    EXPECT_EQ(fixed(2.13756, 2), "2.14");
}

TEST(BaseOut, IndexRoundTripsOverAllLiveStates)
{
    std::set<int> seen;
    for (int i = 0; i < kLiveStates; ++i) {
        auto s = BaseOutState::from_index(i);
        EXPECT_EQ(s.index(), i);
        EXPECT_LE(s.outs, 2);
        seen.insert(s.index());
    }
    EXPECT_EQ(seen.size(), 24u);
    EXPECT_EQ((BaseOutState{true, false, true, 1}).label(), "1_3 1 out");
}
