#include <gtest/gtest.h>

#include <cmath>
#include <sstream>
#include <thread>

#include "walkoff/causal.hpp"
#include "walkoff/synth.hpp"

using namespace walkoff;
using namespace walkoff::causal;

namespace {

CohortRecord rec(int a, int y, double ops = 0.7, double sac = 0.5, double era = 4.0)
{
    CohortRecord r;
    r.game_id = "G";
    r.season = 2021;
    r.inning = 10;
    r.treatment = a;
    r.outcome = y;
    r.covariates = {ops, sac, era};
    return r;
}

std::vector<CohortRecord> table(int a1y1, int a1y0, int a0y1, int a0y0)
{
    std::vector<CohortRecord> rs;
    for (int i = 0; i < a1y1; ++i) rs.push_back(rec(1, 1));
    for (int i = 0; i < a1y0; ++i) rs.push_back(rec(1, 0));
    for (int i = 0; i < a0y1; ++i) rs.push_back(rec(0, 1));
    for (int i = 0; i < a0y0; ++i) rs.push_back(rec(0, 0));
    return rs;
}

// Every (A, Y) cell holds the same multiset of four covariate triples, so in
// sample the covariates carry no information about A or about Y given A.
std::vector<CohortRecord> balanced_cells(int a1y1, int a1y0, int a0y1, int a0y0)
{
    const stats::CovariateTriple s[4] = {{0.6, 0.0, 3.0}, {0.8, 1.0, 4.5}, {0.7, 0.2, 5.0}, {0.9, 0.5, 2.5}};
    std::vector<CohortRecord> rs;
    auto fill = [&](int count, int a, int y) {
        for (int i = 0; i < count; ++i)
            rs.push_back(rec(a, y, s[i % 4].ops, s[i % 4].sac_rate, s[i % 4].era));
    };
    fill(a1y1, 1, 1);
    fill(a1y0, 1, 0);
    fill(a0y1, 0, 1);
    fill(a0y0, 0, 0);
    return rs;
}

std::vector<CohortRecord> synthetic(const synth::SynthSpec& spec, std::size_t n, std::uint64_t seed)
{
    return synth::to_cohort(synth::generate(spec, n, seed));
}

PipelineConfig wald_config()
{
    PipelineConfig c;
    c.ci_method = CiMethod::wald;
    return c;
}

} // namespace

TEST(Crude, TableOneReconstruction)
{
    auto e = crude_or(table(39, 14, 111, 85));
    EXPECT_NEAR(e.odds_ratio, 2.13, 0.02);
    EXPECT_NEAR(e.odds_ratio, 3315.0 / 1554.0, 1e-12);
    EXPECT_NEAR(*e.se_log_or, 0.3433, 1e-4);
    EXPECT_NEAR(e.ci.lo, 1.09, 0.005);
    EXPECT_NEAR(e.ci.hi, 4.18, 0.01);
    EXPECT_NEAR(std::exp(e.log_or), e.odds_ratio, 1e-12);
    EXPECT_LE(e.ci.lo, e.odds_ratio);
    EXPECT_GE(e.ci.hi, e.odds_ratio);
    EXPECT_EQ(e.n_used, 249u);
}

TEST(Crude, SymmetryAndNull)
{
    auto swapped = crude_or(table(111, 85, 39, 14));
    EXPECT_NEAR(swapped.odds_ratio, 1554.0 / 3315.0, 1e-12);
    EXPECT_NEAR(crude_or(table(10, 20, 15, 30)).odds_ratio, 1.0, 1e-12);
}

TEST(Crude, ZeroCellRefusesSilentCorrection)
{
    try {
        crude_or(table(10, 0, 5, 5));
        FAIL();
    } catch (const PipelineError& e) {
        EXPECT_NE(std::string(e.what()).find("zero cell"), std::string::npos);
    }
}

TEST(Crude, EqualsUnweightedLogisticOnTreatment)
{
    auto rs = synthetic(synth::confounded_default_spec(), 2000, 3);
    auto design = covariate_design(rs, {}, true);
    auto m = glm::fit_logistic(design, outcome_vector(rs));
    EXPECT_NEAR(std::exp(m.coefficient("A")), crude_or(rs).odds_ratio, 1e-8);
}

TEST(Trim, ClosedIntervalRule)
{
    PipelineConfig c;
    std::vector<CohortRecord> rs;
    for (double p : {0.05, 0.1, 0.9, 0.95}) {
        rs.push_back(rec(1, 1));
        rs.back().propensity = p;
    }
    auto t = trim(rs, c);
    ASSERT_EQ(t.kept.size(), 2u);
    EXPECT_EQ(*t.kept[0].propensity, 0.1);
    EXPECT_EQ(*t.kept[1].propensity, 0.9);
    EXPECT_EQ(t.n_trimmed, 2u);

    for (auto& r : rs)
        r.propensity = 0.5;
    EXPECT_EQ(trim(rs, c).n_trimmed, 0u);
    for (auto& r : rs)
        r.propensity = 0.99;
    EXPECT_THROW(trim(rs, c), PipelineError);
}

TEST(Trim, HeavyTailedCohortMatchesDirectCount)
{
    auto spec = synth::confounded_default_spec();
    spec.alpha_sac = 4.0;
    spec.alpha_ops = -15;
    spec.alpha0 = 9;
    auto sr = synth::generate(spec, 5000, 12);
    auto rs = synth::to_cohort(sr);
    std::size_t expect_kept = 0;
    for (std::size_t i = 0; i < rs.size(); ++i) {
        rs[i].propensity = sr[i].true_propensity;
        expect_kept += sr[i].true_propensity >= 0.1 && sr[i].true_propensity <= 0.9;
    }
    PipelineConfig c;
    auto t = trim(rs, c);
    EXPECT_EQ(t.kept.size(), expect_kept);
    EXPECT_GT(t.n_trimmed, 500u);
    double lo = 1, hi = 0;
    for (const auto& r : t.kept) {
        lo = std::min(lo, *r.propensity);
        hi = std::max(hi, *r.propensity);
    }
    EXPECT_GE(lo, c.trim_lo);
    EXPECT_LE(hi, c.trim_hi);
}

TEST(Weights, DirectFormula)
{
    std::vector<CohortRecord> rs = {rec(1, 0), rec(0, 0), rec(1, 0), rec(0, 0)};
    rs[0].propensity = rs[1].propensity = 0.5;
    rs[2].propensity = rs[3].propensity = 0.25;
    auto w = ipw_weights(rs);
    EXPECT_EQ(*w[0].weight, 2.0);
    EXPECT_EQ(*w[1].weight, 2.0);
    EXPECT_EQ(*w[2].weight, 4.0);
    EXPECT_DOUBLE_EQ(*w[3].weight, 4.0 / 3.0);
    auto lit = ipw_weights(rs, WeightScheme::propensity_inverse);
    EXPECT_EQ(*lit[3].weight, 4.0);
    for (const auto& r : w)
        EXPECT_GT(*r.weight, 1.0);

    rs[0].propensity = 1.0;
    EXPECT_THROW(ipw_weights(rs), PipelineError);
    rs[0].propensity.reset();
    EXPECT_THROW(ipw_weights(rs), PipelineError);
}

TEST(Weights, SumIsAboutTwoN)
{
    const std::size_t n = 10000;
    auto sr = synth::generate(synth::confounded_default_spec(), n, 77);
    auto rs = synth::to_cohort(sr);
    for (std::size_t i = 0; i < n; ++i)
        rs[i].propensity = sr[i].true_propensity;
    double sum = 0;
    for (const auto& r : ipw_weights(rs))
        sum += *r.weight;
    EXPECT_NEAR(sum / (2.0 * n), 1.0, 0.05);
}

TEST(Propensity, IndependentTreatmentGivesMarginalRate)
{
    auto rs = synthetic(synth::unconfounded_spec(), 5000, 8);
    double rate = 0;
    for (const auto& r : rs)
        rate += r.treatment;
    rate /= double(rs.size());
    auto ps = estimate_propensity(rs, PipelineConfig{});
    double mean = 0;
    for (const auto& r : ps.records)
        mean += *r.propensity;
    EXPECT_NEAR(mean / double(rs.size()), rate, 1e-8);
    for (const char* name : {"ops", "sac_rate", "era"})
        EXPECT_LT(std::abs(ps.model.coefficient(name)), 3 * ps.model.std_error(name)) << name;
}

TEST(Propensity, RecoversKnownCoefficients)
{
    auto spec = synth::confounded_default_spec();
    auto ps = estimate_propensity(synthetic(spec, 10000, 31), PipelineConfig{});
    const auto& m = ps.model;
    EXPECT_LT(std::abs(m.coefficient(glm::kIntercept) - spec.alpha0), 3 * m.std_error(glm::kIntercept));
    EXPECT_LT(std::abs(m.coefficient("ops") - spec.alpha_ops), 3 * m.std_error("ops"));
    EXPECT_LT(std::abs(m.coefficient("sac_rate") - spec.alpha_sac), 3 * m.std_error("sac_rate"));
    EXPECT_LT(std::abs(m.coefficient("era") - spec.alpha_era), 3 * m.std_error("era"));
}

TEST(Propensity, NeedsTwoPerArm)
{
    auto rs = table(1, 0, 5, 5);
    EXPECT_THROW(estimate_propensity(rs, PipelineConfig{}), PipelineError);
}

TEST(IpwEffect, CollapsesToCrudeWithoutConfounding)
{
    auto rs = balanced_cells(40, 16, 112, 84);
    auto config = wald_config();
    auto ps = estimate_propensity(rs, config);
    for (const auto& r : ps.records)
        EXPECT_NEAR(*r.propensity, 56.0 / 252.0, 1e-9);
    auto tr = trim(ps.records, config);
    auto fit = ipw_effect(ipw_weights(tr.kept), config, tr.n_trimmed);
    EXPECT_NEAR(fit.estimate.odds_ratio, crude_or(rs).odds_ratio, 1e-6);
}

TEST(IpwEffect, MarginalTargetOnSaturatedDesignEqualsWeightedCellOr)
{
    auto rs = balanced_cells(40, 16, 112, 84);
    auto config = wald_config();
    config.outcome_covariates.clear();
    config.target = EffectTarget::marginal;
    auto ps = estimate_propensity(rs, config);
    auto fit = ipw_effect(ipw_weights(trim(ps.records, config).kept), config);
    EXPECT_NEAR(fit.estimate.odds_ratio, crude_or(rs).odds_ratio, 1e-8);
    EXPECT_NEAR(*fit.estimate.se_log_or, fit.model.std_error("A"), 1e-6);
}

TEST(IpwEffect, EmptyArmAfterTrimming)
{
    std::vector<CohortRecord> rs = {rec(1, 1), rec(1, 0)};
    for (auto& r : rs)
        r.weight = 2.0;
    EXPECT_THROW(ipw_effect(rs, wald_config()), PipelineError);
}

TEST(Bootstrap, SameSeedBitIdenticalAcrossThreadCounts)
{
    auto rs = synthetic(synth::confounded_default_spec(), 400, 5);
    PipelineConfig c;
    c.bootstrap_replicates = 200;
    c.seed = 2024;
    auto a = bootstrap_ci(rs, c);
    auto b = bootstrap_ci(rs, c);
    c.threads = 4;
    auto d = bootstrap_ci(rs, c);
    EXPECT_EQ(a.estimates, b.estimates);
    EXPECT_EQ(a.estimates, d.estimates);
    EXPECT_EQ(a.ci.lo, d.ci.lo);
    EXPECT_EQ(a.ci.hi, d.ci.hi);
    EXPECT_LT(a.ci.lo, a.ci.hi);
    c.seed = 2025;
    EXPECT_NE(bootstrap_ci(rs, c).estimates, a.estimates);
}

TEST(Bootstrap, IdenticalRecordsGiveZeroWidthInterval)
{
    std::vector<double> data(50, 0.4);
    auto mean_stat = [](const std::vector<double>& s) {
        double m = 0;
        for (double v : s)
            m += v;
        return m / double(s.size());
    };
    auto r = bootstrap_percentile(data, mean_stat, 500, 1, 0.95);
    EXPECT_DOUBLE_EQ(r.ci.lo, std::exp(0.4));
    EXPECT_DOUBLE_EQ(r.ci.hi, std::exp(0.4));
    EXPECT_EQ(r.failed, 0);
}

TEST(Bootstrap, FailedReplicatesAreCountedAndFlagged)
{
    std::vector<int> data(20);
    for (int i = 0; i < 20; ++i)
        data[std::size_t(i)] = i;
    auto picky = [](const std::vector<int>& s) {
        if (s[0] < 6)
            throw PipelineError("first draw too small");
        return 0.0;
    };
    auto r = bootstrap_percentile(data, picky, 400, 3, 0.95, 3);
    EXPECT_GT(r.failed, 40);
    EXPECT_FALSE(r.valid);
    EXPECT_FALSE(r.failure_reasons.empty());
    EXPECT_EQ(std::size_t(r.failed) + r.estimates.size(), 400u);
}

TEST(Bootstrap, QuantileType7)
{
    std::vector<double> v = {1, 2, 3, 4};
    EXPECT_DOUBLE_EQ(quantile_sorted(v, 0.0), 1);
    EXPECT_DOUBLE_EQ(quantile_sorted(v, 1.0), 4);
    EXPECT_DOUBLE_EQ(quantile_sorted(v, 0.5), 2.5);
    EXPECT_DOUBLE_EQ(quantile_sorted(v, 0.25), 1.75);
}

TEST(Bootstrap, NullCoverageNearNominal)
{
    // 100 outer repetitions of a 2000-replicate interval on null cohorts.
    auto spec = synth::confounded_default_spec();
    spec.beta_a = 0;
    PipelineConfig c;
    c.bootstrap_replicates = 2000;
    c.threads = std::max(1u, std::thread::hardware_concurrency());
    int covered = 0;
    const int outer = 100;
    for (int rep = 0; rep < outer; ++rep) {
        auto rs = synthetic(spec, 300, derive_seed(555, std::uint64_t(rep)));
        c.seed = derive_seed(556, std::uint64_t(rep));
        auto b = bootstrap_ci(rs, c);
        covered += b.ci.lo <= 1.0 && 1.0 <= b.ci.hi;
    }
    // Binomial(100, 0.95) lies in [88, 100] with probability > 0.998.
    EXPECT_GE(covered, 88);
}

TEST(Balance, IdenticalDistributionsGiveZeroSmd)
{
    auto rs = balanced_cells(8, 8, 8, 8);
    for (auto& r : rs)
        r.weight = 1.0 + r.treatment;
    auto b = balance_diagnostics(rs);
    for (const auto& c : b.covariates) {
        EXPECT_NEAR(c.unweighted.value, 0.0, 1e-12);
        EXPECT_NEAR(c.weighted.value, 0.0, 1e-12);
    }
    EXPECT_NEAR(b.ess_treated, 16.0, 1e-9);
}

TEST(Balance, ZeroSpreadIsZeroOrIncomparable)
{
    std::vector<CohortRecord> rs = {rec(1, 0, 0.7, 0, 4), rec(1, 1, 0.7, 0, 4), rec(0, 0, 0.7, 1, 4),
                                    rec(0, 1, 0.7, 1, 4)};
    for (auto& r : rs)
        r.weight = 1.0;
    auto b = balance_diagnostics(rs);
    EXPECT_TRUE(b.covariates[0].unweighted.comparable);
    EXPECT_EQ(b.covariates[0].unweighted.value, 0.0);
    EXPECT_FALSE(b.covariates[1].unweighted.comparable);
    std::ostringstream os;
    write_balance_csv(os, b);
    EXPECT_NE(os.str().find("incomparable"), std::string::npos);
}

TEST(Balance, WeightingShrinksConfounderImbalance)
{
    auto rs = synthetic(synth::confounded_default_spec(), 20000, 41);
    auto config = wald_config();
    auto ps = estimate_propensity(rs, config);
    auto tr = trim(ps.records, config);
    auto w = ipw_weights(tr.kept);
    auto b = balance_diagnostics(w);
    for (const auto& c : b.covariates) {
        if (c.covariate == Covariate::era)
            continue;
        EXPECT_LT(std::abs(c.weighted.value), std::abs(c.unweighted.value)) << name_of(c.covariate);
    }
    EXPECT_LE(b.ess_treated, double(b.n_treated));
    EXPECT_LE(b.ess_control, double(b.n_control));
}

TEST(Histogram, TwentyBinsCoverEverything)
{
    std::vector<CohortRecord> rs;
    for (double p : {0.0, 0.049, 0.05, 0.5, 0.999, 1.0}) {
        rs.push_back(rec(rs.size() % 2 == 0, 0));
        rs.back().propensity = p;
    }
    auto h = propensity_histogram(rs);
    ASSERT_EQ(h.size(), 20u);
    EXPECT_EQ(h[0].count_bunt + h[0].count_swing, 2u);
    EXPECT_EQ(h[1].count_bunt + h[1].count_swing, 1u);
    EXPECT_EQ(h[19].count_bunt + h[19].count_swing, 2u);
    std::size_t total = 0;
    for (const auto& b : h)
        total += b.count_bunt + b.count_swing;
    EXPECT_EQ(total, rs.size());
    std::ostringstream os;
    write_histogram_csv(os, h);
    EXPECT_EQ(os.str().substr(0, 36), "bin_lo,bin_hi,count_bunt,count_swing");
}

TEST(Pipeline, DeterministicReportBytes)
{
    auto rs = synthetic(synth::confounded_default_spec(), 500, 9);
    PipelineConfig c;
    c.bootstrap_replicates = 200;
    c.seed = 7;
    auto render = [&](unsigned threads) {
        c.threads = threads;
        auto a = run_pipeline(rs, c);
        std::ostringstream os;
        write_effects_csv(os, a);
        write_effects_text(os, a, c.ci_level);
        return os.str();
    };
    auto one = render(1);
    EXPECT_EQ(one, render(1));
    EXPECT_EQ(one, render(3));
    EXPECT_EQ(one.substr(0, one.find('\n')), "method,odds_ratio,ci_lo,ci_hi,ci_method,n_used,n_trimmed");
    EXPECT_NE(one.find("ipw,"), std::string::npos);
    EXPECT_NE(one.find(",wald,"), std::string::npos);
    EXPECT_NE(one.find(",bootstrap,"), std::string::npos);
}

TEST(Pipeline, EstimateInvariants)
{
    auto rs = synthetic(synth::confounded_default_spec(), 2000, 10);
    auto a = run_pipeline(rs, wald_config());
    for (const auto* e : {&a.crude, &a.ipw}) {
        EXPECT_NEAR(std::exp(e->log_or), e->odds_ratio, 1e-12 * e->odds_ratio);
        EXPECT_LE(e->ci.lo, e->odds_ratio);
        EXPECT_GE(e->ci.hi, e->odds_ratio);
    }
    EXPECT_EQ(a.ipw.n_used + a.ipw.n_trimmed, rs.size());
    EXPECT_GT(a.propensity_model.coefficient("sac_rate"), 0);
    EXPECT_LT(a.propensity_model.coefficient("ops"), 0);
}

TEST(Config, Validation)
{
    PipelineConfig c;
    c.trim_lo = 0.9;
    c.trim_hi = 0.1;
    EXPECT_THROW(c.validate(), ValidationError);
    c = PipelineConfig{};
    c.bootstrap_replicates = 50;
    EXPECT_THROW(c.validate(), ValidationError);
    c.ci_method = CiMethod::wald;
    EXPECT_NO_THROW(c.validate());
}
