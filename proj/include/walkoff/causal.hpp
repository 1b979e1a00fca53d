#pragma once

// Propensity scores, trimming, inverse probability weights, crude and
// weighted odds ratios, bootstrap intervals and balance diagnostics.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "walkoff/cohort.hpp"
#include "walkoff/error.hpp"
#include "walkoff/glm.hpp"
#include "walkoff/kv_config.hpp"
#include "walkoff/rng.hpp"

namespace walkoff::causal {

using cohort::CohortRecord;
using glm::Interval;

enum class Covariate { ops, sac_rate, era };

inline constexpr std::string_view name_of(Covariate c) noexcept
{
    switch (c) {
    case Covariate::ops: return "ops";
    case Covariate::sac_rate: return "sac_rate";
    case Covariate::era: return "era";
    }
    return "?";
}

inline double value_of(const CohortRecord& r, Covariate c) noexcept
{
    switch (c) {
    case Covariate::ops: return r.covariates.ops;
    case Covariate::sac_rate: return r.covariates.sac_rate;
    case Covariate::era: return r.covariates.era;
    }
    return 0;
}

enum class WeightScheme {
    treatment_inverse,   // 1/e for treated, 1/(1-e) for controls
    propensity_inverse,  // 1/e for everyone (literal reading, sensitivity only)
};

enum class EffectTarget {
    conditional,  // exp(coefficient of A) in the covariate-adjusted weighted model
    marginal,     // standardized over the kept records from the same model
};

enum class CiMethod { wald, bootstrap };

inline constexpr std::string_view name_of(CiMethod m) noexcept { return m == CiMethod::wald ? "wald" : "bootstrap"; }

struct PipelineConfig {
    double trim_lo = 0.1;
    double trim_hi = 0.9;
    std::vector<Covariate> propensity_covariates{Covariate::ops, Covariate::sac_rate, Covariate::era};
    std::vector<Covariate> outcome_covariates{Covariate::ops, Covariate::sac_rate, Covariate::era};
    int bootstrap_replicates = 2000;
    std::uint64_t seed = 0;
    double ci_level = 0.95;
    CiMethod ci_method = CiMethod::bootstrap;
    WeightScheme weights = WeightScheme::treatment_inverse;
    EffectTarget target = EffectTarget::conditional;
    unsigned threads = 1;
    glm::FitOptions fit;

    void validate() const
    {
        if (!(trim_lo >= 0 && trim_lo < trim_hi && trim_hi <= 1))
            throw ValidationError("trim bounds must satisfy 0 <= lo < hi <= 1");
        if (!(ci_level > 0 && ci_level < 1))
            throw ValidationError("ci_level must lie in (0,1)");
        if (ci_method == CiMethod::bootstrap && bootstrap_replicates < 100)
            throw ValidationError("bootstrap needs at least 100 replicates");
        if (threads == 0)
            throw ValidationError("threads must be at least 1");
    }
};

namespace detail {

inline std::vector<Covariate> parse_covariate_list(const std::string& key, const std::string& text)
{
    std::vector<Covariate> out;
    std::string_view rest = text;
    while (!rest.empty()) {
        auto comma = rest.find(',');
        auto item = walkoff::trim(rest.substr(0, comma));
        rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
        if (item.empty() || item == "none")
            continue;
        bool found = false;
        for (auto c : {Covariate::ops, Covariate::sac_rate, Covariate::era})
            if (item == name_of(c)) {
                if (std::find(out.begin(), out.end(), c) != out.end())
                    throw ValidationError("field '" + key + "': duplicate covariate '" + std::string(item) + "'");
                out.push_back(c);
                found = true;
            }
        if (!found)
            throw ValidationError("field '" + key + "': unknown covariate '" + std::string(item) + "'");
    }
    return out;
}

inline std::string covariate_list(const std::vector<Covariate>& cs)
{
    if (cs.empty())
        return "none";
    std::string s;
    for (auto c : cs) {
        if (!s.empty())
            s += ',';
        s += name_of(c);
    }
    return s;
}

} // namespace detail

/// Flat key=value pipeline settings; absent keys keep the values of `base`.
/// The seed and thread count come from the command line, not the file.
inline PipelineConfig pipeline_config_from_config(const KeyValueConfig& cfg, PipelineConfig base = {})
{
    cfg.require_known({"trim_lo", "trim_hi", "bootstrap_replicates", "ci_level", "ci_method", "weights", "target",
                       "propensity_covariates", "outcome_covariates"});
    base.trim_lo = cfg.get_double("trim_lo", base.trim_lo);
    base.trim_hi = cfg.get_double("trim_hi", base.trim_hi);
    base.ci_level = cfg.get_double("ci_level", base.ci_level);
    const double reps = cfg.get_double("bootstrap_replicates", base.bootstrap_replicates);
    if (reps != std::floor(reps) || reps < 0 || reps > 1e7)
        throw ValidationError("field 'bootstrap_replicates': must be a non-negative integer");
    base.bootstrap_replicates = int(reps);
    auto choose = [&](const char* key, auto& member, auto first, const char* first_name, auto second,
                      const char* second_name) {
        auto v = cfg.get_string(key);
        if (!v)
            return;
        if (*v == first_name)
            member = first;
        else if (*v == second_name)
            member = second;
        else
            throw ValidationError(std::string("field '") + key + "': expected " + first_name + " or " + second_name);
    };
    choose("ci_method", base.ci_method, CiMethod::wald, "wald", CiMethod::bootstrap, "bootstrap");
    choose("weights", base.weights, WeightScheme::treatment_inverse, "treatment_inverse",
           WeightScheme::propensity_inverse, "propensity_inverse");
    choose("target", base.target, EffectTarget::conditional, "conditional", EffectTarget::marginal, "marginal");
    if (auto v = cfg.get_string("propensity_covariates"))
        base.propensity_covariates = detail::parse_covariate_list("propensity_covariates", *v);
    if (auto v = cfg.get_string("outcome_covariates"))
        base.outcome_covariates = detail::parse_covariate_list("outcome_covariates", *v);
    base.validate();
    return base;
}

inline void write_pipeline_config(std::ostream& os, const PipelineConfig& c)
{
    os << "trim_lo = " << exact(c.trim_lo) << '\n'
       << "trim_hi = " << exact(c.trim_hi) << '\n'
       << "bootstrap_replicates = " << c.bootstrap_replicates << '\n'
       << "ci_level = " << exact(c.ci_level) << '\n'
       << "ci_method = " << name_of(c.ci_method) << '\n'
       << "weights = " << (c.weights == WeightScheme::treatment_inverse ? "treatment_inverse" : "propensity_inverse")
       << '\n'
       << "target = " << (c.target == EffectTarget::conditional ? "conditional" : "marginal") << '\n'
       << "propensity_covariates = " << detail::covariate_list(c.propensity_covariates) << '\n'
       << "outcome_covariates = " << detail::covariate_list(c.outcome_covariates) << '\n';
}

struct EffectEstimate {
    std::string method;  // "crude" or "ipw"
    double odds_ratio = 1;
    double log_or = 0;
    std::optional<double> se_log_or;
    Interval ci;
    CiMethod ci_method = CiMethod::wald;
    std::size_t n_used = 0;
    std::size_t n_trimmed = 0;
    std::vector<std::string> warnings;
};

// ---------------------------------------------------------------------------
// Design helpers

inline glm::DesignMatrix covariate_design(const std::vector<CohortRecord>& rs, const std::vector<Covariate>& covs,
                                          bool with_treatment)
{
    std::vector<std::string> names;
    if (with_treatment)
        names.emplace_back("A");
    for (auto c : covs)
        names.emplace_back(name_of(c));
    Eigen::MatrixXd m(Eigen::Index(rs.size()), Eigen::Index(names.size()));
    for (std::size_t i = 0; i < rs.size(); ++i) {
        Eigen::Index j = 0;
        if (with_treatment)
            m(Eigen::Index(i), j++) = rs[i].treatment;
        for (auto c : covs)
            m(Eigen::Index(i), j++) = value_of(rs[i], c);
    }
    return glm::DesignMatrix::with_intercept(std::move(names), m);
}

inline Eigen::VectorXd treatment_vector(const std::vector<CohortRecord>& rs)
{
    Eigen::VectorXd v(Eigen::Index(rs.size()));
    for (std::size_t i = 0; i < rs.size(); ++i)
        v(Eigen::Index(i)) = rs[i].treatment;
    return v;
}

inline Eigen::VectorXd outcome_vector(const std::vector<CohortRecord>& rs)
{
    Eigen::VectorXd v(Eigen::Index(rs.size()));
    for (std::size_t i = 0; i < rs.size(); ++i)
        v(Eigen::Index(i)) = rs[i].outcome;
    return v;
}

inline void require_converged(const glm::LogisticModel& m, const char* what)
{
    if (!m.converged)
        throw ConvergenceError(std::string(what) + ": " + m.diagnostics);
}

// ---------------------------------------------------------------------------
// Pipeline stages

struct PropensityFit {
    std::vector<CohortRecord> records;
    glm::LogisticModel model;
};

/// Fits A ~ covariates and stores each record's fitted probability.
inline PropensityFit estimate_propensity(std::vector<CohortRecord> records, const PipelineConfig& config)
{
    std::size_t treated = 0;
    for (const auto& r : records)
        treated += r.treatment;
    if (treated < 2 || records.size() - treated < 2)
        throw PipelineError("propensity model needs at least 2 records per arm (have " + std::to_string(treated) +
                            " bunts, " + std::to_string(records.size() - treated) + " swings)");
    auto design = covariate_design(records, config.propensity_covariates, false);
    auto model = glm::fit_logistic(design, treatment_vector(records), config.fit);
    require_converged(model, "propensity model");
    Eigen::VectorXd eta = design.values * model.coefficients;
    for (std::size_t i = 0; i < records.size(); ++i)
        records[i].propensity = glm::logistic(eta(Eigen::Index(i)));
    return {std::move(records), std::move(model)};
}

struct TrimResult {
    std::vector<CohortRecord> kept;
    std::size_t n_trimmed = 0;
};

/// Keeps trim_lo <= propensity <= trim_hi, preserving order.
inline TrimResult trim(std::vector<CohortRecord> records, const PipelineConfig& config)
{
    TrimResult out;
    for (auto& r : records) {
        if (!r.propensity)
            throw PipelineError("trim: record without a propensity score");
        if (*r.propensity >= config.trim_lo && *r.propensity <= config.trim_hi)
            out.kept.push_back(std::move(r));
        else
            ++out.n_trimmed;
    }
    if (out.kept.empty())
        throw PipelineError("all observations trimmed");
    return out;
}

inline std::vector<CohortRecord> ipw_weights(std::vector<CohortRecord> records,
                                             WeightScheme scheme = WeightScheme::treatment_inverse)
{
    for (auto& r : records) {
        if (!r.propensity || !(*r.propensity > 0 && *r.propensity < 1))
            throw PipelineError("ipw_weights: propensity outside (0,1); trim first");
        const double e = *r.propensity;
        if (scheme == WeightScheme::propensity_inverse || r.treatment == 1)
            r.weight = 1.0 / e;
        else
            r.weight = 1.0 / (1.0 - e);
    }
    return records;
}

struct TwoByTwo {
    std::size_t treated_wins = 0, treated_losses = 0;
    std::size_t control_wins = 0, control_losses = 0;
};

inline TwoByTwo tabulate(const std::vector<CohortRecord>& rs)
{
    TwoByTwo t;
    for (const auto& r : rs) {
        if (r.treatment == 1)
            ++(r.outcome ? t.treated_wins : t.treated_losses);
        else
            ++(r.outcome ? t.control_wins : t.control_losses);
    }
    return t;
}

/// Odds ratio from the A-by-Y table with a Woolf (log-scale Wald) interval.
inline EffectEstimate crude_or(const std::vector<CohortRecord>& records, double level = 0.95)
{
    auto t = tabulate(records);
    if (t.treated_wins == 0 || t.treated_losses == 0 || t.control_wins == 0 || t.control_losses == 0)
        throw PipelineError("crude odds ratio: zero cell in the 2x2 table; use a bootstrap or an explicit "
                            "continuity correction");
    EffectEstimate e;
    e.method = "crude";
    e.log_or = std::log(double(t.treated_wins)) - std::log(double(t.treated_losses)) -
               std::log(double(t.control_wins)) + std::log(double(t.control_losses));
    e.odds_ratio = std::exp(e.log_or);
    e.se_log_or = std::sqrt(1.0 / double(t.treated_wins) + 1.0 / double(t.treated_losses) +
                            1.0 / double(t.control_wins) + 1.0 / double(t.control_losses));
    const double z = glm::normal_quantile(0.5 + level / 2);
    e.ci = {std::exp(e.log_or - z * *e.se_log_or), std::exp(e.log_or + z * *e.se_log_or)};
    e.ci_method = CiMethod::wald;
    e.n_used = records.size();
    return e;
}

struct OutcomeFit {
    EffectEstimate estimate;  // Wald interval from the model covariance
    glm::LogisticModel model;
};

/// Weighted outcome model Y ~ A + covariates over trimmed, weighted records.
inline OutcomeFit ipw_effect(const std::vector<CohortRecord>& weighted, const PipelineConfig& config,
                             std::size_t n_trimmed = 0)
{
    Eigen::VectorXd w(Eigen::Index(weighted.size()));
    for (std::size_t i = 0; i < weighted.size(); ++i) {
        if (!weighted[i].weight)
            throw PipelineError("ipw_effect: record without a weight");
        w(Eigen::Index(i)) = *weighted[i].weight;
    }
    std::size_t treated = 0;
    for (const auto& r : weighted)
        treated += r.treatment;
    if (treated == 0 || treated == weighted.size())
        throw PipelineError("ipw_effect: one treatment arm is empty after trimming");

    auto design = covariate_design(weighted, config.outcome_covariates, true);
    auto model = glm::fit_logistic(design, outcome_vector(weighted), w, config.fit);
    require_converged(model, "outcome model");

    EffectEstimate e;
    e.method = "ipw";
    e.ci_method = CiMethod::wald;
    e.n_used = weighted.size();
    e.n_trimmed = n_trimmed;
    const double z = glm::normal_quantile(0.5 + config.ci_level / 2);

    if (config.target == EffectTarget::conditional) {
        e.log_or = model.coefficient("A");
        e.se_log_or = model.std_error("A");
    } else {
        // Average predictions with A set to 1 and to 0 over the kept records;
        // delta-method standard error from the model covariance.
        const Eigen::Index k = design.cols();
        Eigen::MatrixXd x1 = design.values, x0 = design.values;
        x1.col(1).setOnes();
        x0.col(1).setZero();
        Eigen::VectorXd eta1 = x1 * model.coefficients, eta0 = x0 * model.coefficients;
        double m1 = 0, m0 = 0;
        Eigen::VectorXd g1 = Eigen::VectorXd::Zero(k), g0 = Eigen::VectorXd::Zero(k);
        const double n = double(weighted.size());
        for (Eigen::Index i = 0; i < eta1.size(); ++i) {
            double p1 = glm::logistic(eta1(i)), p0 = glm::logistic(eta0(i));
            m1 += p1 / n;
            m0 += p0 / n;
            g1 += (p1 * (1 - p1) / n) * x1.row(i).transpose();
            g0 += (p0 * (1 - p0) / n) * x0.row(i).transpose();
        }
        e.log_or = std::log(m1 / (1 - m1)) - std::log(m0 / (1 - m0));
        Eigen::VectorXd grad = g1 / (m1 * (1 - m1)) - g0 / (m0 * (1 - m0));
        e.se_log_or = std::sqrt(std::max(0.0, grad.dot(model.covariance * grad)));
    }
    e.odds_ratio = std::exp(e.log_or);
    e.ci = {std::exp(e.log_or - z * *e.se_log_or), std::exp(e.log_or + z * *e.se_log_or)};
    return {std::move(e), std::move(model)};
}

/// Propensity -> trim -> weights -> outcome model; returns the log odds ratio.
inline double ipw_log_or(std::vector<CohortRecord> records, const PipelineConfig& config)
{
    auto ps = estimate_propensity(std::move(records), config);
    auto tr = trim(std::move(ps.records), config);
    auto weighted = ipw_weights(std::move(tr.kept), config.weights);
    return ipw_effect(weighted, config, tr.n_trimmed).estimate.log_or;
}

// ---------------------------------------------------------------------------
// Bootstrap

struct BootstrapResult {
    Interval ci;               // on the exponentiated scale
    int replicates = 0;
    int failed = 0;
    bool valid = true;         // false when more than 10% of replicates failed
    std::vector<double> estimates;  // successful replicate statistics, replicate order
    std::vector<std::string> failure_reasons;  // first few, for the report
};

/// Linear-interpolation quantile of sorted data (R type 7).
inline double quantile_sorted(const std::vector<double>& sorted, double q)
{
    if (sorted.empty())
        throw PipelineError("quantile of an empty sample");
    const double h = (double(sorted.size()) - 1.0) * q;
    const auto lo = std::size_t(std::floor(h));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - double(lo)) * (sorted[hi] - sorted[lo]);
}

/// Nonparametric percentile bootstrap of a log-scale statistic. Replicate b
/// draws its resample from derive_seed(seed, b), so the result does not depend
/// on `threads`. Statistics that throw walkoff::Error count as failures.
template <class Record, class Statistic>
BootstrapResult bootstrap_percentile(const std::vector<Record>& data, Statistic&& statistic, int replicates,
                                     std::uint64_t seed, double level, unsigned threads = 1)
{
    if (data.empty())
        throw PipelineError("bootstrap of an empty sample");
    std::vector<std::optional<double>> values(static_cast<std::size_t>(replicates));
    std::vector<std::string> errors(static_cast<std::size_t>(replicates));
    std::atomic<int> next{0};

    auto worker = [&] {
        std::vector<Record> sample;
        sample.reserve(data.size());
        for (int b; (b = next.fetch_add(1)) < replicates;) {
            std::mt19937_64 rng(derive_seed(seed, std::uint64_t(b)));
            std::uniform_int_distribution<std::size_t> pick(0, data.size() - 1);
            sample.clear();
            for (std::size_t i = 0; i < data.size(); ++i)
                sample.push_back(data[pick(rng)]);
            try {
                values[std::size_t(b)] = statistic(sample);
            } catch (const Error& e) {
                errors[std::size_t(b)] = e.what();
            }
        }
    };
    std::vector<std::thread> pool;
    for (unsigned t = 1; t < threads; ++t)
        pool.emplace_back(worker);
    worker();
    for (auto& t : pool)
        t.join();

    BootstrapResult r;
    r.replicates = replicates;
    for (std::size_t b = 0; b < values.size(); ++b) {
        if (values[b]) {
            r.estimates.push_back(*values[b]);
        } else {
            ++r.failed;
            if (r.failure_reasons.size() < 5)
                r.failure_reasons.push_back("replicate " + std::to_string(b) + ": " + errors[b]);
        }
    }
    if (r.estimates.empty())
        throw PipelineError("every bootstrap replicate failed");
    r.valid = double(r.failed) <= 0.1 * double(replicates);
    auto sorted = r.estimates;
    std::sort(sorted.begin(), sorted.end());
    const double alpha = 1.0 - level;
    r.ci = {std::exp(quantile_sorted(sorted, alpha / 2)), std::exp(quantile_sorted(sorted, 1 - alpha / 2))};
    return r;
}

/// Resamples cohort records and reruns the whole weighted pipeline, refitting
/// the propensity model inside every replicate.
inline BootstrapResult bootstrap_ci(const std::vector<CohortRecord>& cohort, const PipelineConfig& config)
{
    config.validate();
    return bootstrap_percentile(
        cohort, [&](const std::vector<CohortRecord>& s) { return ipw_log_or(s, config); },
        config.bootstrap_replicates, config.seed, config.ci_level, config.threads);
}

// ---------------------------------------------------------------------------
// Balance

struct Smd {
    double value = 0;
    bool comparable = true;  // false when pooled sd is 0 but means differ
};

struct CovariateBalance {
    Covariate covariate;
    double mean_treated = 0, mean_control = 0;
    double weighted_mean_treated = 0, weighted_mean_control = 0;
    Smd unweighted;
    Smd weighted;
};

struct BalanceReport {
    std::vector<CovariateBalance> covariates;
    std::size_t n_treated = 0, n_control = 0;
    double ess_treated = 0, ess_control = 0;  // (sum w)^2 / sum w^2
};

namespace detail {

inline Smd make_smd(double m1, double m0, double pooled_sd)
{
    if (pooled_sd > 0)
        return {(m1 - m0) / pooled_sd, true};
    return {0.0, m1 == m0};
}

} // namespace detail

/// Standardized mean differences (mean1 - mean0) / sqrt((var1 + var0) / 2),
/// before and after weighting. Records must carry weights.
inline BalanceReport balance_diagnostics(const std::vector<CohortRecord>& records,
                                         const std::vector<Covariate>& covariates = {
                                             Covariate::ops, Covariate::sac_rate, Covariate::era})
{
    BalanceReport rep;
    double sw[2] = {0, 0}, sw2[2] = {0, 0};
    for (const auto& r : records) {
        if (!r.weight)
            throw PipelineError("balance: record without a weight");
        const int a = r.treatment;
        (a ? rep.n_treated : rep.n_control)++;
        sw[a] += *r.weight;
        sw2[a] += *r.weight * *r.weight;
    }
    rep.ess_treated = sw2[1] > 0 ? sw[1] * sw[1] / sw2[1] : 0;
    rep.ess_control = sw2[0] > 0 ? sw[0] * sw[0] / sw2[0] : 0;

    for (auto c : covariates) {
        double s[2] = {0, 0}, ws[2] = {0, 0};
        std::size_t n[2] = {rep.n_control, rep.n_treated};
        for (const auto& r : records) {
            s[r.treatment] += value_of(r, c);
            ws[r.treatment] += *r.weight * value_of(r, c);
        }
        double m[2], wm[2];
        for (int a = 0; a < 2; ++a) {
            m[a] = n[a] ? s[a] / double(n[a]) : 0;
            wm[a] = sw[a] > 0 ? ws[a] / sw[a] : 0;
        }
        double ss[2] = {0, 0}, wss[2] = {0, 0};
        for (const auto& r : records) {
            const int a = r.treatment;
            const double x = value_of(r, c);
            ss[a] += (x - m[a]) * (x - m[a]);
            wss[a] += *r.weight * (x - wm[a]) * (x - wm[a]);
        }
        double v[2], wv[2];
        for (int a = 0; a < 2; ++a) {
            v[a] = n[a] > 1 ? ss[a] / double(n[a] - 1) : 0;
            wv[a] = sw[a] > 0 ? wss[a] / sw[a] : 0;
        }
        CovariateBalance b;
        b.covariate = c;
        b.mean_treated = m[1];
        b.mean_control = m[0];
        b.weighted_mean_treated = wm[1];
        b.weighted_mean_control = wm[0];
        b.unweighted = detail::make_smd(m[1], m[0], std::sqrt((v[1] + v[0]) / 2));
        b.weighted = detail::make_smd(wm[1], wm[0], std::sqrt((wv[1] + wv[0]) / 2));
        rep.covariates.push_back(b);
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Propensity histogram

struct HistogramBin {
    double lo = 0, hi = 0;
    std::size_t count_bunt = 0, count_swing = 0;
};

/// Equal-width bins on [0,1]; the last bin is closed on the right.
inline std::vector<HistogramBin> propensity_histogram(const std::vector<CohortRecord>& records, int bins = 20)
{
    std::vector<HistogramBin> h(static_cast<std::size_t>(bins));
    for (int i = 0; i < bins; ++i)
        h[std::size_t(i)] = {double(i) / bins, double(i + 1) / bins, 0, 0};
    for (const auto& r : records) {
        if (!r.propensity)
            continue;
        int b = std::min(bins - 1, int(std::floor(*r.propensity * bins)));
        b = std::max(b, 0);
        ++(r.treatment ? h[std::size_t(b)].count_bunt : h[std::size_t(b)].count_swing);
    }
    return h;
}

// ---------------------------------------------------------------------------
// End to end

struct Analysis {
    EffectEstimate crude;
    EffectEstimate ipw;                       // interval per config.ci_method
    std::optional<EffectEstimate> ipw_wald;   // labelled Wald companion when ipw uses the bootstrap
    std::optional<BootstrapResult> bootstrap;
    glm::LogisticModel propensity_model;
    glm::LogisticModel outcome_model;
    BalanceReport balance;
    std::vector<HistogramBin> histogram;
};

inline Analysis run_pipeline(const std::vector<CohortRecord>& cohort, const PipelineConfig& config)
{
    config.validate();
    Analysis a;
    a.crude = crude_or(cohort, config.ci_level);
    auto ps = estimate_propensity(cohort, config);
    a.propensity_model = ps.model;
    a.histogram = propensity_histogram(ps.records);
    auto tr = trim(std::move(ps.records), config);
    auto weighted = ipw_weights(std::move(tr.kept), config.weights);
    a.balance = balance_diagnostics(weighted);
    auto fit = ipw_effect(weighted, config, tr.n_trimmed);
    a.outcome_model = fit.model;
    a.ipw = fit.estimate;
    if (config.ci_method == CiMethod::bootstrap) {
        a.ipw_wald = fit.estimate;
        a.bootstrap = bootstrap_ci(cohort, config);
        a.ipw.ci = a.bootstrap->ci;
        a.ipw.ci_method = CiMethod::bootstrap;
        if (!a.bootstrap->valid)
            a.ipw.warnings.push_back(std::to_string(a.bootstrap->failed) + " of " +
                                     std::to_string(a.bootstrap->replicates) +
                                     " bootstrap replicates failed; interval may be unreliable");
        if (a.ipw.odds_ratio < a.ipw.ci.lo || a.ipw.odds_ratio > a.ipw.ci.hi)
            a.ipw.warnings.push_back("point estimate lies outside the percentile interval");
    }
    return a;
}

// ---------------------------------------------------------------------------
// Reports

/// method,odds_ratio,ci_lo,ci_hi,ci_method,n_used,n_trimmed
inline void write_effects_csv(std::ostream& os, const Analysis& a)
{
    os << "method,odds_ratio,ci_lo,ci_hi,ci_method,n_used,n_trimmed\n";
    auto row = [&](const EffectEstimate& e) {
        os << e.method << ',' << fixed(e.odds_ratio, 6) << ',' << fixed(e.ci.lo, 6) << ',' << fixed(e.ci.hi, 6)
           << ',' << name_of(e.ci_method) << ',' << e.n_used << ',' << e.n_trimmed << '\n';
    };
    row(a.crude);
    row(a.ipw);
    if (a.ipw_wald)
        row(*a.ipw_wald);
}

inline void write_effects_text(std::ostream& os, const Analysis& a, double level)
{
    const std::string pct = fixed(100 * level, 0) + "% CI";
    char head[160];
    std::snprintf(head, sizeof head, "%-12s %10s   %-20s %-11s %6s  %9s\n", "Model", "Odds ratio", pct.c_str(),
                  "Method", "n used", "n trimmed");
    os << head;
    auto row = [&](const char* label, const EffectEstimate& e) {
        const std::string ci = "(" + fixed(e.ci.lo, 2) + ", " + fixed(e.ci.hi, 2) + ")";
        char buf[160];
        std::snprintf(buf, sizeof buf, "%-12s %10.2f   %-20s %-11s %6zu  %9zu\n", label, e.odds_ratio, ci.c_str(),
                      std::string(name_of(e.ci_method)).c_str(), e.n_used, e.n_trimmed);
        os << buf;
    };
    row("Unadjusted", a.crude);
    row("IPW", a.ipw);
    if (a.ipw_wald)
        row("IPW (Wald)", *a.ipw_wald);
    for (const auto& w : a.ipw.warnings)
        os << "warning: " << w << '\n';
    if (a.bootstrap)
        os << "bootstrap: " << a.bootstrap->replicates << " replicates, " << a.bootstrap->failed << " failed\n";
}

/// covariate,mean_bunt,mean_swing,smd_unweighted,wmean_bunt,wmean_swing,smd_weighted
inline void write_balance_csv(std::ostream& os, const BalanceReport& b)
{
    auto smd = [](const Smd& s) { return s.comparable ? fixed(s.value, 6) : std::string("incomparable"); };
    os << "covariate,mean_bunt,mean_swing,smd_unweighted,wmean_bunt,wmean_swing,smd_weighted\n";
    for (const auto& c : b.covariates)
        os << name_of(c.covariate) << ',' << fixed(c.mean_treated, 6) << ',' << fixed(c.mean_control, 6) << ','
           << smd(c.unweighted) << ',' << fixed(c.weighted_mean_treated, 6) << ','
           << fixed(c.weighted_mean_control, 6) << ',' << smd(c.weighted) << '\n';
    os << "ess_bunt," << fixed(b.ess_treated, 3) << ",n_bunt," << b.n_treated << ",,,\n";
    os << "ess_swing," << fixed(b.ess_control, 3) << ",n_swing," << b.n_control << ",,,\n";
}

/// bin_lo,bin_hi,count_bunt,count_swing
inline void write_histogram_csv(std::ostream& os, const std::vector<HistogramBin>& h)
{
    os << "bin_lo,bin_hi,count_bunt,count_swing\n";
    for (const auto& b : h)
        os << fixed(b.lo, 2) << ',' << fixed(b.hi, 2) << ',' << b.count_bunt << ',' << b.count_swing << '\n';
}

} // namespace walkoff::causal
