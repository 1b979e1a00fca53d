#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <sys/wait.h>
#include <unistd.h>

#include "walkoff/causal.hpp"
#include "walkoff/synth.hpp"

namespace fs = std::filesystem;
using namespace walkoff;

namespace {

const std::string kCli = WALKOFF_CLI_PATH;
const std::string kFixtures = WALKOFF_FIXTURE_DIR;
const std::string kConfigs = WALKOFF_CONFIG_DIR;

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

struct CliRun {
    int code = -1;
    std::string out, err;
};

class CliTest : public ::testing::Test {
protected:
    void SetUp() override
    {
        const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
        dir_ = fs::temp_directory_path() /
               ("walkoff_cli_" + std::string(info->name()) + "_" + std::to_string(::getpid()));
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }

    void TearDown() override { fs::remove_all(dir_); }

    CliRun run(const std::string& args, const std::string& env = "env -u WALKOFF_SEED")
    {
        const auto out = dir_ / "stdout.txt", err = dir_ / "stderr.txt";
        const std::string cmd = env + " '" + kCli + "' " + args + " >'" + out.string() + "' 2>'" + err.string() + "'";
        const int status = std::system(cmd.c_str());
        CliRun r;
        r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
        r.out = slurp(out);
        r.err = slurp(err);
        return r;
    }

    fs::path write_cohort(const synth::SynthSpec& spec, std::size_t n, std::uint64_t seed)
    {
        auto p = dir_ / "cohort.csv";
        std::ofstream os(p);
        cohort::write_cohort_csv(os, synth::to_cohort(synth::generate(spec, n, seed)));
        return p;
    }

    fs::path write_text(const std::string& name, const std::string& text)
    {
        auto p = dir_ / name;
        std::ofstream(p) << text;
        return p;
    }

    static std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

    fs::path dir_;
};

} // namespace

TEST_F(CliTest, ParseEmptyDirectory)
{
    auto r = run("parse " + q(kFixtures + "/empty_dir"));
    EXPECT_EQ(r.code, 0);
    EXPECT_NE(r.out.find("parsed 0 games"), std::string::npos);
}

TEST_F(CliTest, ParseTwoGames)
{
    auto r = run("parse " + q(kFixtures + "/two_games") + " --out " + q(dir_ / "p"));
    EXPECT_EQ(r.code, 0);
    EXPECT_NE(r.out.find("parsed 2 games"), std::string::npos);
    EXPECT_NE(r.out.find("0 replay inconsistencies"), std::string::npos);
    auto contexts = slurp(dir_ / "p" / "contexts.csv");
    EXPECT_EQ(contexts.substr(0, 16), "game_id,play_ind");
    EXPECT_NE(slurp(dir_ / "p" / "parse_report.txt").find("sha256="), std::string::npos);
}

TEST_F(CliTest, ParseFullFixtureSuiteIsConsistent)
{
    auto r = run("parse " + q(kFixtures + "/events"));
    EXPECT_EQ(r.code, 0);
    EXPECT_NE(r.out.find("parsed 13 games"), std::string::npos);
    EXPECT_NE(r.out.find(" 0 replay inconsistencies"), std::string::npos);
}

TEST_F(CliTest, CorruptFilesReportLineNumbers)
{
    const std::pair<const char*, const char*> cases[] = {
        {"short_play.EVN", "line 6"}, {"play_before_id.EVN", "line 3"}, {"phantom_runner.EVN", "line 6"},
        {"four_outs.EVN", "line 7"},  {"bad_inning.EVN", "line 3"},
    };
    for (const auto& [file, line] : cases) {
        auto r = run("parse " + q(kFixtures + "/corrupt/" + file));
        EXPECT_NE(r.code, 0) << file;
        EXPECT_NE(r.err.find(line), std::string::npos) << file << ": " << r.err;
        EXPECT_NE(r.err.find(file), std::string::npos) << file;
    }
}

TEST_F(CliTest, UnreadablePath)
{
    auto r = run("parse " + q(dir_ / "missing"));
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("cannot read"), std::string::npos);
}

TEST_F(CliTest, CohortMatchesHandCount)
{
    const std::string args = "cohort " + q(kFixtures + "/events") + " " + q(kFixtures + "/Batting.csv") + " " +
                             q(kFixtures + "/Pitching.csv") + " --seasons 2021 --out ";
    auto r = run(args + q(dir_ / "a" / "cohort.csv"));
    ASSERT_EQ(r.code, 0) << r.err;
    std::istringstream in(slurp(dir_ / "a" / "cohort.csv"));
    auto rows = cohort::read_cohort_csv(in);
    EXPECT_EQ(rows.size(), 8u);
    int bunts = 0;
    for (const auto& row : rows)
        bunts += row.treatment;
    EXPECT_EQ(bunts, 4);
    EXPECT_NE(r.out.find("1 missing batter"), std::string::npos);
    EXPECT_NE(r.out.find("1 undefined covariate"), std::string::npos);
    EXPECT_TRUE(fs::exists(dir_ / "a" / "cohort_summary.txt"));
    EXPECT_TRUE(fs::exists(dir_ / "a" / "cohort_summary.csv"));

    run(args + q(dir_ / "b" / "cohort.csv"));
    EXPECT_EQ(slurp(dir_ / "a" / "cohort.csv"), slurp(dir_ / "b" / "cohort.csv"));
    EXPECT_EQ(slurp(dir_ / "a" / "cohort_summary.txt"), slurp(dir_ / "b" / "cohort_summary.txt"));
}

TEST_F(CliTest, CohortRejectsPreRuleSeasons)
{
    auto r = run("cohort " + q(kFixtures + "/events") + " " + q(kFixtures + "/Batting.csv") + " " +
                 q(kFixtures + "/Pitching.csv") + " --seasons 2019 --out " + q(dir_ / "c.csv"));
    EXPECT_NE(r.code, 0);
    EXPECT_NE(r.err.find("2019"), std::string::npos);
    EXPECT_FALSE(fs::exists(dir_ / "c.csv"));
}

TEST_F(CliTest, CohortWithNoSituationsFails)
{
    auto r = run("cohort " + q(kFixtures + "/empty_dir") + " " + q(kFixtures + "/Batting.csv") + " " +
                 q(kFixtures + "/Pitching.csv") + " --out " + q(dir_ / "c.csv"));
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find("no qualifying situations"), std::string::npos);
}

TEST_F(CliTest, EstimateIsByteIdenticalAcrossRunsAndThreads)
{
    auto cohort = write_cohort(synth::confounded_default_spec(), 600, 21);
    const std::string base = "--seed 5 estimate " + q(cohort) + " --boot 300 --out ";
    auto a = run("--threads 1 " + base + q(dir_ / "a"));
    auto b = run("--threads 1 " + base + q(dir_ / "b"));
    auto c = run("--threads 4 " + base + q(dir_ / "c"));
    ASSERT_EQ(a.code, 0) << a.err;
    EXPECT_EQ(b.code, 0);
    EXPECT_EQ(c.code, 0);
    EXPECT_EQ(a.out, b.out);
    EXPECT_EQ(a.out, c.out);
    for (const char* f : {"effects.txt", "effects.csv", "balance.csv", "propensity_histogram.csv"}) {
        const auto bytes = slurp(dir_ / "a" / f);
        EXPECT_FALSE(bytes.empty()) << f;
        EXPECT_EQ(bytes, slurp(dir_ / "b" / f)) << f;
        EXPECT_EQ(bytes, slurp(dir_ / "c" / f)) << f;
    }
    EXPECT_NE(a.out.find("# seed: 5"), std::string::npos);
    EXPECT_NE(a.out.find("sha256="), std::string::npos);
    EXPECT_NE(a.err.find("wall clock"), std::string::npos);
    EXPECT_EQ(a.out.find("wall clock"), std::string::npos);
}

TEST_F(CliTest, SeedFallsBackToEnvironment)
{
    auto cohort = write_cohort(synth::confounded_default_spec(), 400, 22);
    auto flag = run("--seed 9 estimate " + q(cohort) + " --boot 200 --out " + q(dir_ / "flag"));
    auto env = run("estimate " + q(cohort) + " --boot 200 --out " + q(dir_ / "env"), "env WALKOFF_SEED=9");
    auto other = run("estimate " + q(cohort) + " --boot 200 --out " + q(dir_ / "other"), "env WALKOFF_SEED=10");
    ASSERT_EQ(flag.code, 0) << flag.err;
    EXPECT_EQ(slurp(dir_ / "flag" / "effects.csv"), slurp(dir_ / "env" / "effects.csv"));
    EXPECT_NE(slurp(dir_ / "flag" / "effects.csv"), slurp(dir_ / "other" / "effects.csv"));
}

TEST_F(CliTest, EstimateNullCohortGivesUnitOddsRatios)
{
    auto spec = synth::unconfounded_spec();
    spec.beta_a = 0;
    auto cohort = write_cohort(spec, 20000, 23);
    auto r = run("estimate " + q(cohort) + " --ci wald --out " + q(dir_));
    ASSERT_EQ(r.code, 0) << r.err;
    std::istringstream in(slurp(dir_ / "effects.csv"));
    std::string line;
    std::getline(in, line);
    int rows = 0;
    while (std::getline(in, line)) {
        const double odds = std::stod(line.substr(line.find(',') + 1));
        EXPECT_NEAR(odds, 1.0, 0.1) << line;
        ++rows;
    }
    EXPECT_EQ(rows, 2);
}

TEST_F(CliTest, EstimateConfigFileAndErrors)
{
    auto cohort = write_cohort(synth::confounded_default_spec(), 400, 24);
    auto cfg = write_text("p.cfg", "ci_method = wald\ntrim_lo = 0.05\ntrim_hi = 0.95\n");
    auto r = run("estimate " + q(cohort) + " --config " + q(cfg));
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("# config: trim_lo = 0.05"), std::string::npos);
    EXPECT_EQ(r.out.find("bootstrap:"), std::string::npos);

    auto bad = write_text("bad.cfg", "ci_method = jackknife\n");
    r = run("estimate " + q(cohort) + " --config " + q(bad));
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("ci_method"), std::string::npos);

    auto broken = write_text("broken.csv", "game_id,season\nX,2021\n");
    r = run("estimate " + q(broken));
    EXPECT_EQ(r.code, 2);
}

TEST_F(CliTest, SimulateGameLengthAndTable)
{
    auto r = run("simulate " + q(kConfigs + "/default_model.cfg") + " --r 0.72 --trials 200000 --seed 4");
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("P(12 innings or more) = 0.078400"), std::string::npos);
    EXPECT_NE(r.out.find("P(decided within the first two extra innings) = 0.921600"), std::string::npos);
    EXPECT_NE(r.out.find("_2_ 0 outs"), std::string::npos);
    auto pos = r.out.find("max |exact - monte carlo| = ");
    ASSERT_NE(pos, std::string::npos);
    EXPECT_LT(std::stod(r.out.substr(pos + 28)), 0.005);
}

TEST_F(CliTest, SimulateAllOutsModel)
{
    auto cfg = write_text("outs.cfg", "out = 1\n");
    auto r = run("simulate " + q(cfg) + " --trials 0");
    ASSERT_EQ(r.code, 0) << r.err;
    std::istringstream in(r.out);
    int rows = 0;
    for (std::string line; std::getline(in, line);)
        if (line.find(" outs ") != std::string::npos || line.find(" out ") != std::string::npos) {
            std::istringstream fields(line);
            std::string bases, outs, unit;
            double exact = -1;
            if (fields >> bases >> outs >> unit >> exact) {
                EXPECT_EQ(exact, 0.0) << line;
                ++rows;
            }
        }
    EXPECT_EQ(rows, 24);
}

TEST_F(CliTest, SimulateRejectsInvalidModel)
{
    auto cfg = write_text("bad.cfg", "out = 0.5\nsingle = 0.2\n");
    auto r = run("simulate " + q(cfg));
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("sum"), std::string::npos);
}

TEST_F(CliTest, SynthValidateDeterministicAcrossThreads)
{
    const std::string args = "synth-validate --n 2000 --reps 12 --population 50000 --null-n 5000 --out ";
    auto a = run("--seed 3 --threads 1 " + args + q(dir_ / "a"));
    auto b = run("--seed 3 --threads 3 " + args + q(dir_ / "b"));
    EXPECT_EQ(a.code, b.code);
    EXPECT_EQ(a.out, b.out);
    EXPECT_EQ(slurp(dir_ / "a" / "synth_report.txt"), slurp(dir_ / "b" / "synth_report.txt"));
    EXPECT_EQ(slurp(dir_ / "a" / "repetitions.csv"), slurp(dir_ / "b" / "repetitions.csv"));
    EXPECT_NE(a.out.find("truth (g-computation)"), std::string::npos);
}

TEST_F(CliTest, SynthValidateZeroConfoundingSpec)
{
    std::ostringstream spec;
    synth::write_spec(spec, synth::unconfounded_spec());
    auto path = write_text("plain.cfg", spec.str());
    auto r = run("--seed 1 synth-validate --spec " + q(path) + " --n 3000 --reps 10 --population 50000 --null-n 5000");
    EXPECT_EQ(r.code, 0) << r.out << r.err;
    EXPECT_NE(r.out.find("PASS  crude ~ IPW without confounding"), std::string::npos);
}

TEST_F(CliTest, SynthValidateBadSpecNamesField)
{
    auto path = write_text("bad.cfg", "era_sd = -2\n");
    auto r = run("synth-validate --spec " + q(path));
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("era_sd"), std::string::npos);
}

TEST_F(CliTest, VersionAndUsage)
{
    auto r = run("--version");
    EXPECT_EQ(r.code, 0);
    EXPECT_NE(r.out.find("1.0.0"), std::string::npos);
    EXPECT_NE(run("").code, 0);
    EXPECT_NE(run("frobnicate").code, 0);
}
