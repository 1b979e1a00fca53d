#pragma once

// Weighted logistic regression fitted by iteratively reweighted least squares,
// with Wald inference.
//
// Convergence is declared on the Euclidean norm of the weighted score
// X' W (y - p), which certifies stationarity directly. Covariates are used in
// their raw units. Separation is reported, never silently penalized; the
// ridge option exists for diagnostics only.

#include <algorithm>
#include <cmath>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/distributions/normal.hpp>

#include "walkoff/error.hpp"
#include "walkoff/kv_config.hpp"

namespace walkoff::glm {

inline constexpr std::string_view kIntercept = "(Intercept)";

/// Linear predictors beyond this magnitude saturate; keeps p strictly in (0,1).
inline constexpr double kEtaClamp = 35.0;

/// Fitted |eta| beyond this marks probabilities numerically 0 or 1.
inline constexpr double kSeparationEta = 30.0;

inline double logistic(double eta) noexcept
{
    eta = std::clamp(eta, -kEtaClamp, kEtaClamp);
    if (eta >= 0)
        return 1.0 / (1.0 + std::exp(-eta));
    double e = std::exp(eta);
    return e / (1.0 + e);
}

/// log(1 + exp(x)) without overflow.
inline double softplus(double x) noexcept
{
    return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

struct DesignMatrix {
    std::vector<std::string> names;  // names[0] is the intercept
    Eigen::MatrixXd values;

    /// Prepends a column of ones to `covariates`.
    static DesignMatrix with_intercept(std::vector<std::string> covariate_names, const Eigen::MatrixXd& covariates)
    {
        if (Eigen::Index(covariate_names.size()) != covariates.cols())
            throw ValidationError("design: column names do not match covariate columns");
        DesignMatrix d;
        d.names.reserve(covariate_names.size() + 1);
        d.names.emplace_back(kIntercept);
        for (auto& n : covariate_names)
            d.names.push_back(std::move(n));
        d.values.resize(covariates.rows(), covariates.cols() + 1);
        d.values.col(0).setOnes();
        d.values.rightCols(covariates.cols()) = covariates;
        return d;
    }

    Eigen::Index rows() const { return values.rows(); }
    Eigen::Index cols() const { return values.cols(); }

    void validate() const
    {
        if (Eigen::Index(names.size()) != values.cols())
            throw ValidationError("design: " + std::to_string(names.size()) + " names for " +
                                  std::to_string(values.cols()) + " columns");
        if (values.cols() == 0 || names[0] != kIntercept || !(values.col(0).array() == 1.0).all())
            throw ValidationError("design: first column must be a constant-1 intercept");
        std::unordered_set<std::string> seen;
        for (const auto& n : names)
            if (!seen.insert(n).second)
                throw ValidationError("design: duplicate column '" + n + "'");
        if (!values.allFinite())
            throw ValidationError("design: non-finite entry");
    }
};

struct FitOptions {
    double tolerance = 1e-8;
    int max_iterations = 50;
    double ridge = 0.0;  // L2 penalty on slopes; 1e-6 is the usual diagnostic value
};

struct LogisticModel {
    std::vector<std::string> names;
    Eigen::VectorXd coefficients;
    Eigen::MatrixXd covariance;
    int iterations = 0;
    bool converged = false;
    double score_norm = 0;
    double log_likelihood = 0;  // weighted
    std::string diagnostics;    // non-empty when something needs the analyst's attention

    Eigen::Index index_of(std::string_view name) const
    {
        for (std::size_t i = 0; i < names.size(); ++i)
            if (names[i] == name)
                return Eigen::Index(i);
        throw ValidationError("model has no coefficient '" + std::string(name) + "'");
    }

    double coefficient(std::string_view name) const { return coefficients(index_of(name)); }

    double std_error(std::string_view name) const
    {
        auto i = index_of(name);
        return std::sqrt(std::max(0.0, covariance(i, i)));
    }
};

namespace detail {

/// Columns that add nothing to the span of the columns before them.
inline std::vector<std::string> collinear_columns(const DesignMatrix& x)
{
    std::vector<std::string> bad;
    Eigen::MatrixXd scaled = x.values;
    for (Eigen::Index j = 0; j < scaled.cols(); ++j) {
        double n = scaled.col(j).norm();
        if (n > 0)
            scaled.col(j) /= n;
    }
    std::vector<Eigen::Index> kept;
    for (Eigen::Index j = 0; j < scaled.cols(); ++j) {
        Eigen::MatrixXd trial(scaled.rows(), Eigen::Index(kept.size()) + 1);
        for (std::size_t k = 0; k < kept.size(); ++k)
            trial.col(Eigen::Index(k)) = scaled.col(kept[k]);
        trial.col(Eigen::Index(kept.size())) = scaled.col(j);
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(trial);
        qr.setThreshold(1e-10);
        if (qr.rank() == trial.cols())
            kept.push_back(j);
        else
            bad.push_back(x.names[std::size_t(j)]);
    }
    return bad;
}

inline std::string join(const std::vector<std::string>& xs)
{
    std::string s;
    for (const auto& x : xs) {
        if (!s.empty())
            s += ", ";
        s += x;
    }
    return s;
}

} // namespace detail

/// Maximizes sum_i w_i [y_i log p_i + (1 - y_i) log(1 - p_i)], logit link.
/// Non-convergence and separation come back as converged == false with
/// diagnostics; a rank-deficient design throws SingularMatrixError.
inline LogisticModel fit_logistic(const DesignMatrix& x, const Eigen::VectorXd& y, const Eigen::VectorXd& w,
                                  const FitOptions& opts = {})
{
    x.validate();
    const Eigen::Index n = x.rows();
    const Eigen::Index k = x.cols();
    if (y.size() != n || w.size() != n)
        throw ValidationError("fit: outcome/weight length does not match design rows");
    if (n == 0)
        throw ValidationError("fit: no observations");
    if (!(opts.tolerance > 0) || opts.max_iterations < 1 || opts.ridge < 0)
        throw ValidationError("fit: invalid options");
    for (Eigen::Index i = 0; i < n; ++i) {
        if (y(i) != 0.0 && y(i) != 1.0)
            throw ValidationError("fit: outcome must be 0 or 1");
        if (!(w(i) > 0) || !std::isfinite(w(i)))
            throw ValidationError("fit: weights must be positive and finite");
    }
    if (auto bad = detail::collinear_columns(x); !bad.empty())
        throw SingularMatrixError("singular information matrix; collinear columns: " + detail::join(bad));

    const auto& X = x.values;
    Eigen::VectorXd penalty = Eigen::VectorXd::Constant(k, opts.ridge);
    penalty(0) = 0;

    auto objective = [&](const Eigen::VectorXd& beta) {
        Eigen::VectorXd eta = X * beta;
        double ll = 0;
        for (Eigen::Index i = 0; i < n; ++i) {
            double e = std::clamp(eta(i), -kEtaClamp, kEtaClamp);
            ll += w(i) * (y(i) * e - softplus(e));
        }
        return ll - 0.5 * (penalty.array() * beta.array().square()).sum();
    };

    LogisticModel m;
    m.names = x.names;
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(k);
    Eigen::VectorXd p(n), iw(n), score(k);
    Eigen::MatrixXd info(k, k);
    double ll = objective(beta);

    auto evaluate = [&] {
        Eigen::VectorXd eta = X * beta;
        for (Eigen::Index i = 0; i < n; ++i) {
            p(i) = logistic(eta(i));
            iw(i) = w(i) * p(i) * (1.0 - p(i));
        }
        score = X.transpose() * (w.array() * (y - p).array()).matrix() - (penalty.array() * beta.array()).matrix();
        info = X.transpose() * (X.array().colwise() * iw.array()).matrix();
        info.diagonal() += penalty;
    };

    evaluate();
    for (;;) {
        m.score_norm = score.norm();
        if (m.score_norm <= opts.tolerance) {
            m.converged = true;
            // One more full Newton step: quadratic convergence takes the fit
            // from the stopping tolerance to rounding level.
            Eigen::LLT<Eigen::MatrixXd> llt(info);
            if (llt.info() == Eigen::Success) {
                const Eigen::VectorXd previous = beta;
                beta += llt.solve(score);
                evaluate();
                if (score.norm() <= m.score_norm) {
                    m.score_norm = score.norm();
                    ll = objective(beta);
                } else {
                    beta = previous;
                    evaluate();
                }
            }
            break;
        }
        if (m.iterations >= opts.max_iterations)
            break;
        Eigen::LLT<Eigen::MatrixXd> llt(info);
        if (llt.info() != Eigen::Success)
            throw SingularMatrixError("information matrix is not positive definite at iteration " +
                                      std::to_string(m.iterations));
        Eigen::VectorXd step = llt.solve(score);
        // Step halving guards against overshoot from poor starting values.
        double t = 1.0;
        Eigen::VectorXd next = beta + step;
        double ll_next = objective(next);
        for (int h = 0; h < 30 && ll_next < ll - 1e-12 * (1.0 + std::abs(ll)); ++h) {
            t *= 0.5;
            next = beta + t * step;
            ll_next = objective(next);
        }
        beta = next;
        ll = ll_next;
        ++m.iterations;
        evaluate();
    }

    m.coefficients = beta;
    m.log_likelihood = ll;
    Eigen::LLT<Eigen::MatrixXd> llt(info);
    if (llt.info() != Eigen::Success)
        throw SingularMatrixError("information matrix is not positive definite at the optimum");
    m.covariance = llt.solve(Eigen::MatrixXd::Identity(k, k));
    m.covariance = 0.5 * (m.covariance + m.covariance.transpose());

    Eigen::VectorXd eta = X * beta;
    const auto saturated = (eta.array().abs() > kSeparationEta).count();
    std::ostringstream diag;
    if (!m.converged)
        diag << "no convergence after " << m.iterations << " iterations (score norm " << m.score_norm << ")";
    if (saturated > 0) {
        if (!diag.str().empty())
            diag << "; ";
        diag << saturated << " fitted probabilities numerically 0 or 1, max |coefficient| "
             << beta.cwiseAbs().maxCoeff() << " (separation)";
        m.converged = false;
    }
    m.diagnostics = diag.str();
    return m;
}

/// Unit-weight convenience overload.
inline LogisticModel fit_logistic(const DesignMatrix& x, const Eigen::VectorXd& y, const FitOptions& opts = {})
{
    return fit_logistic(x, y, Eigen::VectorXd::Ones(y.size()), opts);
}

/// logistic(x' beta). `row` includes the leading intercept entry.
inline double predict_prob(const LogisticModel& m, std::span<const double> row)
{
    if (Eigen::Index(row.size()) != m.coefficients.size())
        throw ValidationError("predict: row has " + std::to_string(row.size()) + " entries, model has " +
                              std::to_string(m.coefficients.size()) + " columns");
    double eta = 0;
    for (std::size_t i = 0; i < row.size(); ++i)
        eta += row[i] * m.coefficients(Eigen::Index(i));
    return logistic(eta);
}

inline double normal_quantile(double p)
{
    return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

struct Interval {
    double lo = 0;
    double hi = 0;
};

/// exp(beta +/- z * se) for one coefficient.
inline Interval wald_ci(const LogisticModel& m, std::string_view coefficient, double level = 0.95)
{
    if (!m.converged)
        throw ConvergenceError("Wald interval refused for a non-converged model: " + m.diagnostics);
    if (!(level > 0 && level < 1))
        throw ValidationError("confidence level must lie in (0,1)");
    const double z = normal_quantile(0.5 + level / 2);
    const double b = m.coefficient(coefficient);
    const double se = m.std_error(coefficient);
    return {std::exp(b - z * se), std::exp(b + z * se)};
}

/// term,estimate,std_error,z,odds_ratio,or_ci_lo,or_ci_hi
inline void write_model_csv(std::ostream& os, const LogisticModel& m, double level = 0.95)
{
    const double z = normal_quantile(0.5 + level / 2);
    os << "term,estimate,std_error,z,odds_ratio,or_ci_lo,or_ci_hi\n";
    for (std::size_t i = 0; i < m.names.size(); ++i) {
        const double b = m.coefficients(Eigen::Index(i));
        const double se = m.std_error(m.names[i]);
        os << m.names[i] << ',' << fixed(b, 8) << ',' << fixed(se, 8) << ','
           << (se > 0 ? fixed(b / se, 6) : std::string("NA")) << ',' << fixed(std::exp(b), 8) << ','
           << fixed(std::exp(b - z * se), 8) << ',' << fixed(std::exp(b + z * se), 8) << '\n';
    }
}

} // namespace walkoff::glm
