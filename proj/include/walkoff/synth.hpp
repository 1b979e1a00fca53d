#pragma once

// Synthetic cohorts with known assignment and outcome mechanisms, and the
// brute-force g-computation truth they imply.

#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ostream>
#include <random>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "walkoff/causal.hpp"
#include "walkoff/cohort.hpp"
#include "walkoff/error.hpp"
#include "walkoff/glm.hpp"
#include "walkoff/kv_config.hpp"
#include "walkoff/rng.hpp"

namespace walkoff::synth {

using stats::CovariateTriple;

/// Covariate distributions plus logit-scale treatment (alpha) and outcome
/// (beta) coefficients. ops and era are normals truncated at zero; sac_rate
/// is zero with probability `sac_zero_prob`, otherwise exponential.
struct SynthSpec {
    double ops_mean = 0.735, ops_sd = 0.115;
    double sac_zero_prob = 0.62, sac_mean = 0.55;
    double era_mean = 3.9, era_sd = 2.2;

    double alpha0 = 0, alpha_ops = 0, alpha_sac = 0, alpha_era = 0;
    double beta0 = 0, beta_a = 0, beta_ops = 0, beta_sac = 0, beta_era = 0;

    void validate() const
    {
        auto fail = [](const char* field, const char* why) {
            throw ValidationError(std::string("field '") + field + "': " + why);
        };
        if (!(ops_sd > 0)) fail("ops_sd", "must be positive");
        if (!(era_sd > 0)) fail("era_sd", "must be positive");
        if (!(sac_mean > 0)) fail("sac_mean", "must be positive");
        if (!(sac_zero_prob >= 0 && sac_zero_prob <= 1)) fail("sac_zero_prob", "must lie in [0,1]");
        // Truncation at zero needs non-negligible mass above zero.
        if (!(ops_mean > -3 * ops_sd)) fail("ops_mean", "distribution has almost no mass above zero");
        if (!(era_mean > -3 * era_sd)) fail("era_mean", "distribution has almost no mass above zero");
        const double all[] = {ops_mean, ops_sd, sac_zero_prob, sac_mean, era_mean, era_sd, alpha0, alpha_ops,
                              alpha_sac, alpha_era, beta0, beta_a, beta_ops, beta_sac, beta_era};
        for (double v : all)
            if (!std::isfinite(v))
                throw ValidationError("synthetic spec: non-finite value");
    }

    double treatment_logit(const CovariateTriple& x) const
    {
        return alpha0 + alpha_ops * x.ops + alpha_sac * x.sac_rate + alpha_era * x.era;
    }

    double outcome_logit(const CovariateTriple& x, int a) const
    {
        return beta0 + beta_a * a + beta_ops * x.ops + beta_sac * x.sac_rate + beta_era * x.era;
    }
};

namespace detail {

struct Field {
    const char* key;
    double SynthSpec::*member;
};

inline constexpr Field kFields[] = {
    {"ops_mean", &SynthSpec::ops_mean},   {"ops_sd", &SynthSpec::ops_sd},
    {"sac_zero_prob", &SynthSpec::sac_zero_prob}, {"sac_mean", &SynthSpec::sac_mean},
    {"era_mean", &SynthSpec::era_mean},   {"era_sd", &SynthSpec::era_sd},
    {"alpha0", &SynthSpec::alpha0},       {"alpha_ops", &SynthSpec::alpha_ops},
    {"alpha_sac", &SynthSpec::alpha_sac}, {"alpha_era", &SynthSpec::alpha_era},
    {"beta0", &SynthSpec::beta0},         {"beta_a", &SynthSpec::beta_a},
    {"beta_ops", &SynthSpec::beta_ops},   {"beta_sac", &SynthSpec::beta_sac},
    {"beta_era", &SynthSpec::beta_era},
};

} // namespace detail

/// Reads a flat key=value spec; absent keys keep the values of `base`.
inline SynthSpec spec_from_config(const KeyValueConfig& cfg, SynthSpec base = {})
{
    std::set<std::string> known;
    for (const auto& f : detail::kFields)
        known.insert(f.key);
    cfg.require_known(known);
    for (const auto& f : detail::kFields)
        base.*f.member = cfg.get_double(f.key, base.*f.member);
    base.validate();
    return base;
}

inline void write_spec(std::ostream& os, const SynthSpec& s)
{
    for (const auto& f : detail::kFields)
        os << f.key << " = " << exact(s.*f.member) << '\n';
}

/// Sac rate raises and OPS lowers the bunt probability; OPS raises the win
/// probability. Magnitudes are tuned to a ~21% bunt rate, bunter OPS below
/// nonbunter OPS, a ~57% control win rate and a true marginal OR near 1.86.
inline SynthSpec confounded_default_spec()
{
    SynthSpec s;
    s.alpha0 = 3.85;
    s.alpha_ops = -8.0;
    s.alpha_sac = 1.8;
    s.alpha_era = 0.0;
    s.beta0 = -2.3;
    s.beta_a = 0.64;
    s.beta_ops = 3.2;
    s.beta_sac = 0.0;
    s.beta_era = 0.05;
    return s;
}

/// The default spec with every treatment slope zeroed.
inline SynthSpec unconfounded_spec(SynthSpec s = confounded_default_spec())
{
    s.alpha_ops = s.alpha_sac = s.alpha_era = 0;
    s.alpha0 = std::log(0.212 / 0.788);
    return s;
}

struct SynthRecord {
    CovariateTriple covariates;
    double true_propensity = 0;
    int a = 0;
    int y1 = 0, y0 = 0;  // potential outcomes
    int y = 0;           // observed

    friend bool operator==(const SynthRecord&, const SynthRecord&) = default;
};

namespace detail {

template <class Rng>
double truncated_normal(Rng& rng, double mean, double sd)
{
    std::normal_distribution<double> d(mean, sd);
    for (;;) {
        double v = d(rng);
        if (v >= 0)
            return v;
    }
}

template <class Rng>
CovariateTriple draw_covariates(const SynthSpec& s, Rng& rng)
{
    CovariateTriple x;
    x.ops = truncated_normal(rng, s.ops_mean, s.ops_sd);
    x.sac_rate = uniform01(rng) < s.sac_zero_prob ? 0.0 : std::exponential_distribution<double>(1.0 / s.sac_mean)(rng);
    x.era = truncated_normal(rng, s.era_mean, s.era_sd);
    return x;
}

} // namespace detail

/// Record i is drawn from its own stream derive_seed(seed, i).
inline std::vector<SynthRecord> generate(const SynthSpec& spec, std::size_t n, std::uint64_t seed)
{
    spec.validate();
    if (n == 0)
        throw ValidationError("generate: n must be at least 1");
    std::vector<SynthRecord> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        SplitMix64 rng(derive_seed(seed, i));
        auto& r = out[i];
        r.covariates = detail::draw_covariates(spec, rng);
        r.true_propensity = glm::logistic(spec.treatment_logit(r.covariates));
        r.a = uniform01(rng) < r.true_propensity ? 1 : 0;
        r.y1 = uniform01(rng) < glm::logistic(spec.outcome_logit(r.covariates, 1)) ? 1 : 0;
        r.y0 = uniform01(rng) < glm::logistic(spec.outcome_logit(r.covariates, 0)) ? 1 : 0;
        r.y = r.a * r.y1 + (1 - r.a) * r.y0;
    }
    return out;
}

/// Projection onto the cohort schema so the causal pipeline runs unchanged.
inline std::vector<cohort::CohortRecord> to_cohort(const std::vector<SynthRecord>& rs)
{
    std::vector<cohort::CohortRecord> out;
    out.reserve(rs.size());
    char id[32];
    for (std::size_t i = 0; i < rs.size(); ++i) {
        cohort::CohortRecord c;
        std::snprintf(id, sizeof id, "SYN%09zu", i);
        c.game_id = id;
        c.season = 2021;
        c.inning = 10;
        std::snprintf(id, sizeof id, "synb%07zu", i);
        c.batter_id = id;
        std::snprintf(id, sizeof id, "synp%07zu", i);
        c.pitcher_id = id;
        c.treatment = rs[i].a;
        c.outcome = rs[i].y;
        c.covariates = rs[i].covariates;
        out.push_back(std::move(c));
    }
    return out;
}

struct MarginalTruth {
    double odds_ratio = 1;
    double log_or = 0;
    double mean_y1 = 0, mean_y0 = 0;
    double se_log_or = 0;  // Monte Carlo standard error
};

/// g-computation by brute force: average the outcome probabilities under
/// A=1 and A=0 over sampled covariates, then take the odds ratio of the means.
inline MarginalTruth true_marginal_or(const SynthSpec& spec, std::size_t n_population = 1'000'000,
                                      std::uint64_t seed = 0)
{
    spec.validate();
    std::vector<double> p1(n_population), p0(n_population);
    double s1 = 0, s0 = 0;
    for (std::size_t i = 0; i < n_population; ++i) {
        SplitMix64 rng(derive_seed(seed, i));
        auto x = detail::draw_covariates(spec, rng);
        p1[i] = glm::logistic(spec.outcome_logit(x, 1));
        p0[i] = glm::logistic(spec.outcome_logit(x, 0));
        s1 += p1[i];
        s0 += p0[i];
    }
    const double n = double(n_population);
    MarginalTruth t;
    t.mean_y1 = s1 / n;
    t.mean_y0 = s0 / n;
    t.log_or = std::log(t.mean_y1 / (1 - t.mean_y1)) - std::log(t.mean_y0 / (1 - t.mean_y0));
    t.odds_ratio = std::exp(t.log_or);
    // Delta method on the paired per-draw influence values.
    const double d1 = t.mean_y1 * (1 - t.mean_y1), d0 = t.mean_y0 * (1 - t.mean_y0);
    double sum = 0, sum2 = 0;
    for (std::size_t i = 0; i < n_population; ++i) {
        double v = p1[i] / d1 - p0[i] / d0;
        sum += v;
        sum2 += v * v;
    }
    const double var = n_population > 1 ? (sum2 - sum * sum / n) / (n - 1) : 0;
    t.se_log_or = std::sqrt(std::max(0.0, var) / n);
    return t;
}

// ---------------------------------------------------------------------------
// Estimator recovery

struct RepetitionResult {
    double crude_log_or = 0;
    double ipw_log_or = 0;
    bool ok = false;
    std::string error;
};

struct RecoveryReport {
    MarginalTruth truth;
    std::vector<RepetitionResult> reps;
    std::size_t ipw_closer = 0;
    std::size_t failed = 0;

    double closer_fraction() const { return reps.empty() ? 0 : double(ipw_closer) / double(reps.size()); }
};

/// Pipeline settings for recovery runs: marginal target, Wald interval only.
inline causal::PipelineConfig recovery_config(causal::PipelineConfig c = {})
{
    c.target = causal::EffectTarget::marginal;
    c.ci_method = causal::CiMethod::wald;
    return c;
}

/// Repetition r generates a cohort from derive_seed(seed, r) and compares the
/// crude and IPW log odds ratios against the g-computation truth.
inline RecoveryReport run_recovery(const SynthSpec& spec, std::size_t n, int reps, std::uint64_t seed,
                                   const causal::PipelineConfig& config, std::size_t n_population = 1'000'000,
                                   unsigned threads = 1)
{
    RecoveryReport rep;
    rep.truth = true_marginal_or(spec, n_population, derive_seed(seed, 0xffffffffULL));
    rep.reps.resize(std::size_t(reps));
    std::atomic<int> next{0};
    auto worker = [&] {
        for (int r; (r = next.fetch_add(1)) < reps;) {
            auto& out = rep.reps[std::size_t(r)];
            try {
                auto cohort = to_cohort(generate(spec, n, derive_seed(seed, std::uint64_t(r))));
                out.crude_log_or = causal::crude_or(cohort).log_or;
                out.ipw_log_or = causal::ipw_log_or(std::move(cohort), config);
                out.ok = true;
            } catch (const Error& e) {
                out.error = e.what();
            }
        }
    };
    std::vector<std::thread> pool;
    for (unsigned t = 1; t < threads; ++t)
        pool.emplace_back(worker);
    worker();
    for (auto& t : pool)
        t.join();

    for (const auto& r : rep.reps) {
        if (!r.ok) {
            ++rep.failed;
            continue;
        }
        if (std::abs(r.ipw_log_or - rep.truth.log_or) < std::abs(r.crude_log_or - rep.truth.log_or))
            ++rep.ipw_closer;
    }
    return rep;
}

} // namespace walkoff::synth
