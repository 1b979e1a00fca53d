#pragma once

// Base-out Markov model of a walk-off half-inning, a geometric model of
// extra-inning game length and the season-level win conversion.
//
// Only the first run matters: any run ends a tied home half, so the chain is
// solved for the Boolean event "a run scores before the third out".

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <set>
#include <string>
#include <string_view>
#include <thread>
#include <atomic>
#include <vector>

#include <Eigen/Dense>

#include "walkoff/base_out.hpp"
#include "walkoff/error.hpp"
#include "walkoff/kv_config.hpp"
#include "walkoff/rng.hpp"

namespace walkoff::sim {

enum class Outcome { out, walk, single, double_, triple, home_run, sac_success, sac_failure };

inline constexpr std::array<Outcome, 8> kOutcomes = {Outcome::out,    Outcome::walk,     Outcome::single,
                                                     Outcome::double_, Outcome::triple,  Outcome::home_run,
                                                     Outcome::sac_success, Outcome::sac_failure};

inline constexpr std::string_view name_of(Outcome o) noexcept
{
    switch (o) {
    case Outcome::out: return "out";
    case Outcome::walk: return "walk";
    case Outcome::single: return "single";
    case Outcome::double_: return "double";
    case Outcome::triple: return "triple";
    case Outcome::home_run: return "home_run";
    case Outcome::sac_success: return "sac_success";
    case Outcome::sac_failure: return "sac_failure";
    }
    return "?";
}

/// Plate-appearance outcome distribution plus the advancement parameters.
///
/// Defaults: a single scores the runner from third always and the runner from
/// second with probability 0.6 (otherwise he stops at third); a double scores
/// runners from second and third and the runner from first with probability
/// 0.4; a failed sacrifice retires the batter while runners hold.
struct EventModel {
    std::array<double, 8> prob{0.691, 0.090, 0.140, 0.045, 0.004, 0.030, 0.0, 0.0};
    double single_scores_from_second = 0.6;
    double double_scores_from_first = 0.4;
    bool failed_sac_lead_runner_out = false;  // else: batter out, runners hold

    double& p(Outcome o) { return prob[std::size_t(o)]; }
    double p(Outcome o) const { return prob[std::size_t(o)]; }

    void validate() const
    {
        double sum = 0;
        for (auto o : kOutcomes) {
            double v = p(o);
            if (!(v >= 0 && v <= 1))
                throw ValidationError("field '" + std::string(name_of(o)) + "': probability outside [0,1]");
            sum += v;
        }
        if (std::abs(sum - 1.0) > 1e-12)
            throw ValidationError("outcome probabilities sum to " + exact(sum) + ", not 1");
        if (!(single_scores_from_second >= 0 && single_scores_from_second <= 1))
            throw ValidationError("field 'single_scores_from_second': probability outside [0,1]");
        if (!(double_scores_from_first >= 0 && double_scores_from_first <= 1))
            throw ValidationError("field 'double_scores_from_first': probability outside [0,1]");
    }
};

/// Reads `out = 0.7` style keys; unspecified outcomes default to 0 once any
/// outcome is given, so a file fully determines its distribution.
inline EventModel model_from_config(const KeyValueConfig& cfg)
{
    std::set<std::string> known{"single_scores_from_second", "double_scores_from_first",
                                "failed_sac_lead_runner_out"};
    for (auto o : kOutcomes)
        known.insert(std::string(name_of(o)));
    cfg.require_known(known);

    EventModel m;
    bool any = false;
    for (auto o : kOutcomes)
        any = any || cfg.contains(std::string(name_of(o)));
    if (any)
        for (auto o : kOutcomes)
            m.p(o) = cfg.get_double(std::string(name_of(o)), 0.0);
    m.single_scores_from_second = cfg.get_double("single_scores_from_second", m.single_scores_from_second);
    m.double_scores_from_first = cfg.get_double("double_scores_from_first", m.double_scores_from_first);
    const double lead = cfg.get_double("failed_sac_lead_runner_out", 0.0);
    if (lead != 0.0 && lead != 1.0)
        throw ValidationError("field 'failed_sac_lead_runner_out': must be 0 or 1");
    m.failed_sac_lead_runner_out = lead == 1.0;
    m.validate();
    return m;
}

inline void write_model(std::ostream& os, const EventModel& m)
{
    for (auto o : kOutcomes)
        os << name_of(o) << " = " << exact(m.p(o)) << '\n';
    os << "single_scores_from_second = " << exact(m.single_scores_from_second) << '\n';
    os << "double_scores_from_first = " << exact(m.double_scores_from_first) << '\n';
    os << "failed_sac_lead_runner_out = " << int(m.failed_sac_lead_runner_out) << '\n';
}

struct Step {
    bool scored = false;
    bool inning_over = false;  // third out, no run
    BaseOutState next;
};

/// Deterministic advancement once the random choices are fixed:
/// `from_second` decides a single's runner from second, `from_first` a
/// double's runner from first.
inline Step advance(BaseOutState s, Outcome o, const EventModel& m, bool from_second, bool from_first)
{
    Step r;
    auto retire_batter = [&]() {
        ++s.outs;
        if (s.outs >= 3) {
            r.inning_over = true;
            return true;
        }
        return false;
    };
    switch (o) {
    case Outcome::out:
        if (retire_batter())
            return r;
        break;
    case Outcome::walk:
        if (s.first && s.second && s.third) {
            r.scored = true;
            return r;
        }
        if (s.first && s.second)
            s.third = true;
        if (s.first)
            s.second = true;
        s.first = true;
        break;
    case Outcome::single:
        if (s.third || (s.second && from_second)) {
            r.scored = true;
            return r;
        }
        s.third = s.second;
        s.second = s.first;
        s.first = true;
        break;
    case Outcome::double_:
        if (s.second || s.third || (s.first && from_first)) {
            r.scored = true;
            return r;
        }
        s.third = s.first;
        s.second = true;
        s.first = false;
        break;
    case Outcome::triple:
        if (s.runners() > 0) {
            r.scored = true;
            return r;
        }
        s.third = true;
        break;
    case Outcome::home_run:
        r.scored = true;
        return r;
    case Outcome::sac_success:
        // Batter retired first: a third out cancels the run.
        if (retire_batter())
            return r;
        if (s.third) {
            r.scored = true;
            return r;
        }
        s.third = s.second;
        s.second = s.first;
        s.first = false;
        break;
    case Outcome::sac_failure:
        if (retire_batter())
            return r;
        if (m.failed_sac_lead_runner_out && s.runners() > 0) {
            // Lead runner retired instead of the batter, who reaches first.
            if (s.third) s.third = false;
            else if (s.second) s.second = false;
            else s.first = false;
            if (s.first && s.second) s.third = true;
            if (s.first) s.second = true;
            s.first = true;
        }
        break;
    }
    r.next = s;
    return r;
}

struct Branch {
    double prob = 0;
    Step step;
};

/// Every (outcome, random choice) branch out of a live state.
inline std::vector<Branch> branches(const BaseOutState& s, const EventModel& m)
{
    std::vector<Branch> out;
    for (auto o : kOutcomes) {
        const double po = m.p(o);
        if (po == 0)
            continue;
        if (o == Outcome::single && s.second && !s.third) {
            const double q = m.single_scores_from_second;
            out.push_back({po * q, advance(s, o, m, true, false)});
            out.push_back({po * (1 - q), advance(s, o, m, false, false)});
        } else if (o == Outcome::double_ && s.first && !s.second && !s.third) {
            const double q = m.double_scores_from_first;
            out.push_back({po * q, advance(s, o, m, false, true)});
            out.push_back({po * (1 - q), advance(s, o, m, false, false)});
        } else {
            out.push_back({po, advance(s, o, m, false, false)});
        }
    }
    return out;
}

using ScoreTable = std::array<double, kLiveStates>;

/// Exact P(at least one run before the third out) for all 24 live states,
/// from the absorbing-chain system (I - Q) v = r.
inline ScoreTable score_prob_table(const EventModel& m)
{
    m.validate();
    Eigen::MatrixXd a = Eigen::MatrixXd::Identity(kLiveStates, kLiveStates);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(kLiveStates);
    for (int i = 0; i < kLiveStates; ++i) {
        for (const auto& b : branches(BaseOutState::from_index(i), m)) {
            if (b.step.scored)
                rhs(i) += b.prob;
            else if (!b.step.inning_over)
                a(i, b.step.next.index()) -= b.prob;
        }
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
    if (!lu.isInvertible())
        throw SingularMatrixError("score probability system is singular");
    Eigen::VectorXd v = lu.solve(rhs);
    ScoreTable t;
    for (int i = 0; i < kLiveStates; ++i)
        t[std::size_t(i)] = std::clamp(v(i), 0.0, 1.0);
    return t;
}

inline double score_prob(const BaseOutState& s, const EventModel& m)
{
    if (s.outs < 0 || s.outs > 2)
        throw ValidationError("score_prob: outs must be 0, 1 or 2");
    return score_prob_table(m)[std::size_t(s.index())];
}

// ---------------------------------------------------------------------------
// Monte Carlo

struct TrajectoryStep {
    BaseOutState state;
    Outcome outcome;
};

struct HalfInning {
    bool scored = false;
    std::vector<TrajectoryStep> trajectory;
};

template <class Rng>
Outcome sample_outcome(const EventModel& m, Rng& rng)
{
    double u = uniform01(rng);
    double acc = 0;
    for (auto o : kOutcomes) {
        acc += m.p(o);
        if (u < acc)
            return o;
    }
    // Rounding left u above the cumulative sum: last outcome with mass.
    for (auto it = kOutcomes.rbegin(); it != kOutcomes.rend(); ++it)
        if (m.p(*it) > 0)
            return *it;
    return Outcome::out;
}

/// One sampled half-inning from `start` until a run scores or three are out.
template <class Rng>
HalfInning simulate_half_inning(BaseOutState start, const EventModel& m, Rng& rng)
{
    HalfInning h;
    BaseOutState s = start;
    for (;;) {
        auto o = sample_outcome(m, rng);
        h.trajectory.push_back({s, o});
        bool from_second = false, from_first = false;
        if (o == Outcome::single && s.second)
            from_second = uniform01(rng) < m.single_scores_from_second;
        if (o == Outcome::double_ && s.first)
            from_first = uniform01(rng) < m.double_scores_from_first;
        auto step = advance(s, o, m, from_second, from_first);
        if (step.scored) {
            h.scored = true;
            return h;
        }
        if (step.inning_over)
            return h;
        s = step.next;
    }
}

struct MonteCarloEstimate {
    double frequency = 0;
    double std_error = 0;
    std::size_t trials = 0;
};

/// Trial t uses SplitMix64(derive_seed(seed, t)); counts do not depend on threads.
inline MonteCarloEstimate monte_carlo_score_prob(const BaseOutState& start, const EventModel& m, std::size_t trials,
                                                 std::uint64_t seed, unsigned threads = 1)
{
    m.validate();
    threads = std::max(1u, threads);
    std::vector<std::size_t> counts(threads, 0);
    auto worker = [&](unsigned t) {
        std::size_t hits = 0;
        for (std::size_t i = t; i < trials; i += threads) {
            SplitMix64 rng(derive_seed(seed, i));
            hits += simulate_half_inning(start, m, rng).scored;
        }
        counts[t] = hits;
    };
    std::vector<std::thread> pool;
    for (unsigned t = 1; t < threads; ++t)
        pool.emplace_back(worker, t);
    worker(0);
    for (auto& th : pool)
        th.join();
    std::size_t hits = 0;
    for (auto c : counts)
        hits += c;
    MonteCarloEstimate e;
    e.trials = trials;
    e.frequency = trials ? double(hits) / double(trials) : 0;
    e.std_error = trials ? std::sqrt(e.frequency * (1 - e.frequency) / double(trials)) : 0;
    return e;
}

// ---------------------------------------------------------------------------
// Policy and game length

struct PolicyValue {
    double bunt = 0;   // win probability in the inning when the first batter bunts
    double swing = 0;  // when he swings away
};

/// The state a failed sacrifice leaves behind from runner-on-second, 0 outs.
inline BaseOutState failed_sacrifice_state(const EventModel& m)
{
    auto step = advance({false, true, false, 0}, Outcome::sac_failure, m, false, false);
    return step.next;
}

inline PolicyValue bunt_policy_value(const EventModel& m, double p_sac_success)
{
    if (!(p_sac_success >= 0 && p_sac_success <= 1))
        throw ValidationError("p_sac_success must lie in [0,1]");
    auto table = score_prob_table(m);
    auto at = [&](BaseOutState s) { return table[std::size_t(s.index())]; };
    PolicyValue v;
    v.swing = at({false, true, false, 0});
    v.bunt = p_sac_success * at({false, false, true, 1}) + (1 - p_sac_success) * at(failed_sacrifice_state(m));
    return v;
}

struct GeometricGameModel {
    double r = 0.72;  // probability a given extra inning decides the game

    void validate() const
    {
        if (!(r > 0 && r <= 1))
            throw ValidationError("r must lie in (0,1]");
    }
};

/// P(the game lasts at least k extra innings) = (1 - r)^(k - 1).
inline double game_length_distribution(const GeometricGameModel& g, int k)
{
    g.validate();
    if (k < 1)
        throw ValidationError("k must be at least 1");
    return std::pow(1.0 - g.r, k - 1);
}

/// Expected extra wins per season from bunting in every qualifying inning.
/// `p_continue_win` is the eventual win probability after a scoreless inning.
inline double season_uplift(double n_situations_per_season, double p_bunt, double p_swing, double p_continue_win)
{
    for (double p : {p_bunt, p_swing, p_continue_win})
        if (!(p >= 0 && p <= 1))
            throw ValidationError("season_uplift: probabilities must lie in [0,1]");
    if (!(n_situations_per_season >= 0))
        throw ValidationError("season_uplift: situation count must be non-negative");
    return n_situations_per_season * (p_bunt - p_swing) * (1 - p_continue_win);
}

} // namespace walkoff::sim
