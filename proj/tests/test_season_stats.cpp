#include <gtest/gtest.h>

#include <algorithm>
#include <fstream>
#include <random>
#include <sstream>

#include "walkoff/season_stats.hpp"

using namespace walkoff;
using namespace walkoff::stats;

namespace {

const std::string kFixtures = WALKOFF_FIXTURE_DIR;

BattingSeason season(long ab, long h, long d, long t, long hr, long bb, long hbp, long sf, long sh = 0)
{
    BattingSeason b;
    b.player_id = "x";
    b.season = 2021;
    b.ab = ab, b.h = h, b.doubles = d, b.triples = t, b.hr = hr, b.bb = bb, b.hbp = hbp, b.sf = sf, b.sh = sh;
    return b;
}

const char* kHeader = "playerID,yearID,stint,AB,H,2B,3B,HR,BB,HBP,SF,SH\n";

} // namespace

TEST(Batting, StintsAreSummed)
{
    std::istringstream in(std::string(kHeader) + "p,2021,1,100,30,,,,,,,\np,2021,2,50,10,,,,,,,\n");
    auto m = load_batting(in);
    ASSERT_EQ(m.size(), 1u);
    const auto& b = m.at({"p", 2021});
    EXPECT_EQ(b.ab, 150);
    EXPECT_EQ(b.h, 40);
}

TEST(Batting, HeaderOnlyGivesEmptyMap)
{
    std::istringstream in(kHeader);
    EXPECT_TRUE(load_batting(in).empty());
}

TEST(Batting, MissingColumnIsNamed)
{
    std::istringstream in("playerID,yearID,stint,AB,H,2B,3B,HR,BB,HBP,SF\np,2021,1,1,1,0,0,0,0,0,0\n");
    try {
        load_batting(in);
        FAIL();
    } catch (const SchemaError& e) {
        EXPECT_NE(std::string(e.what()).find("'SH'"), std::string::npos);
    }
}

TEST(Batting, NegativeCountRejectedWithLine)
{
    std::istringstream in(std::string(kHeader) + "p,2021,1,10,-1,0,0,0,0,0,0,0\n");
    try {
        load_batting(in);
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line, 2u);
    }
}

TEST(Batting, FixtureTotalsMatchHandSums)
{
    std::ifstream in(kFixtures + "/Batting.csv");
    auto m = load_batting(in);
    // h01 2021: stints (300,81,15,2,8,30,4,3,0) + (100,24,6,0,2,10,1,1,0)
    const auto& b = m.at({"h01", 2021});
    EXPECT_EQ(b, (BattingSeason{"h01", 2021, 400, 105, 21, 2, 10, 40, 5, 4, 0}));
    EXPECT_EQ(m.at({"h01", 2020}).ab, 180);
    EXPECT_EQ(m.count({"h10", 2021}), 0u);
    EXPECT_EQ(m.size(), 10u);
}

TEST(Batting, CrosswalkRenamesIds)
{
    std::istringstream people("playerID,nameFirst,retroID\nlahm01,Al,retr001\nnoretro,Bo,\n");
    auto cw = load_crosswalk(people);
    std::istringstream in(std::string(kHeader) + "lahm01,2021,1,10,3,0,0,0,0,0,0,0\nnoretro,2021,1,5,1,0,0,0,0,0,0,0\n");
    auto m = load_batting(in, &cw);
    EXPECT_EQ(m.count({"retr001", 2021}), 1u);
    EXPECT_EQ(m.count({"noretro", 2021}), 1u);
}

TEST(Batting, AggregationIsOrderIndependent)
{
    std::ifstream in(kFixtures + "/Batting.csv");
    std::string header, line;
    std::getline(in, header);
    std::vector<std::string> rows;
    while (std::getline(in, line))
        rows.push_back(line);
    auto build = [&](const std::vector<std::string>& rs) {
        std::string text = header + "\n";
        for (const auto& r : rs)
            text += r + "\n";
        std::istringstream s(text);
        return load_batting(s);
    };
    const auto reference = build(rows);
    std::mt19937 rng(3);
    for (int i = 0; i < 20; ++i) {
        std::shuffle(rows.begin(), rows.end(), rng);
        EXPECT_EQ(build(rows), reference);
    }
}

TEST(Pitching, StintsSummedAndEraFromOuts)
{
    std::ifstream in(kFixtures + "/Pitching.csv");
    auto m = load_pitching(in);
    const auto& p = m.at({"ap1", 2021});
    EXPECT_EQ(p.earned_runs, 63);
    EXPECT_EQ(p.outs_recorded, 480);
    EXPECT_NEAR(*compute_era(p), 9.0 * 63 / 160.0, 1e-12);
    EXPECT_FALSE(compute_era(m.at({"ap2", 2021})).has_value());
}

TEST(Ops, HandComputedExample)
{
    auto b = season(400, 100, 20, 2, 10, 40, 5, 5);
    EXPECT_NEAR(*compute_obp(b), 145.0 / 450.0, 1e-15);
    EXPECT_EQ(total_bases(b), 154);
    EXPECT_NEAR(*compute_slg(b), 0.385, 1e-15);
    EXPECT_NEAR(*compute_ops(b), 0.7072222222222222, 1e-12);
}

TEST(Ops, ZeroHitterAndUndefinedDenominators)
{
    EXPECT_EQ(*compute_ops(season(1, 0, 0, 0, 0, 0, 0, 0)), 0.0);
    EXPECT_FALSE(compute_ops(season(0, 0, 0, 0, 0, 3, 0, 0)).has_value());
    EXPECT_FALSE(compute_ops(season(0, 0, 0, 0, 0, 0, 0, 0)).has_value());
}

TEST(SacRate, DirectRatio)
{
    auto b = season(480, 100, 0, 0, 0, 10, 2, 3, 5);
    EXPECT_EQ(plate_appearances(b), 500);
    EXPECT_DOUBLE_EQ(*compute_sac_rate(b), 1.0);
    EXPECT_EQ(*compute_sac_rate(season(100, 20, 0, 0, 0, 0, 0, 0, 0)), 0.0);
    EXPECT_FALSE(compute_sac_rate(season(0, 0, 0, 0, 0, 0, 0, 0, 0)).has_value());
}

TEST(Era, DirectFormula)
{
    EXPECT_DOUBLE_EQ(*compute_era({"p", 2021, 50, 450}), 3.0);
    EXPECT_EQ(*compute_era({"p", 2021, 0, 30}), 0.0);
    EXPECT_FALSE(compute_era({"p", 2021, 3, 0}).has_value());
}

TEST(Properties, OpsMonotoneInHitsAndRatesBounded)
{
    std::mt19937 rng(11);
    for (int i = 0; i < 5000; ++i) {
        long ab = 1 + long(rng() % 600);
        long hr = long(rng() % (ab / 4 + 1));
        long t = long(rng() % 5);
        long d = long(rng() % 40);
        long h = std::min(ab, hr + t + d + long(rng() % 150));
        if (h < hr + t + d)
            continue;
        auto b = season(ab, h, d, t, hr, long(rng() % 80), long(rng() % 15), long(rng() % 10), long(rng() % 15));
        EXPECT_GE(*compute_obp(b), 0.0);
        EXPECT_LE(*compute_obp(b), 1.0);
        EXPECT_LE(*compute_slg(b), 4.0);
        EXPECT_GE(*compute_sac_rate(b), 0.0);
        EXPECT_LE(*compute_sac_rate(b), 100.0);
        if (h < ab) {
            auto more = b;
            ++more.h;
            EXPECT_GE(*compute_ops(more), *compute_ops(b));
        }
    }
}

TEST(CovariateCsv, NaForUndefined)
{
    BattingMap bm;
    bm[{"b", 2021}] = season(400, 100, 20, 2, 10, 40, 5, 5);
    PitchingMap pm;
    pm[{"p", 2021}] = {"p", 2021, 1, 0};
    std::ostringstream os;
    write_covariate_csv(os, bm, pm);
    EXPECT_EQ(os.str(), "player_id,season,ops,sac_rate,era\n"
                        "b,2021,0.707222,0.000000,NA\n"
                        "p,2021,NA,NA,NA\n");
}
