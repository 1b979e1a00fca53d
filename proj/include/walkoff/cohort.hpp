#pragma once

// Analysis cohort: the first plate appearance in the home half of a tied
// extra inning, with treatment (bunt), outcome (walk-off in that inning),
// covariates and descriptive summaries.

#include <algorithm>
#include <array>
#include <cmath>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "walkoff/csv.hpp"
#include "walkoff/error.hpp"
#include "walkoff/kv_config.hpp"
#include "walkoff/retrosheet.hpp"
#include "walkoff/rng.hpp"
#include "walkoff/season_stats.hpp"

namespace walkoff::cohort {

using stats::CovariateTriple;

enum class ResultCategory {
    run_scores,
    first_and_third_no_outs,
    first_and_second_no_outs,
    third_one_out,
    other,
};

inline constexpr std::array<ResultCategory, 5> kAllCategories = {
    ResultCategory::run_scores, ResultCategory::first_and_third_no_outs, ResultCategory::first_and_second_no_outs,
    ResultCategory::third_one_out, ResultCategory::other};

constexpr bool favorable(ResultCategory c) noexcept { return c != ResultCategory::other; }

constexpr std::string_view to_string(ResultCategory c) noexcept
{
    switch (c) {
    case ResultCategory::run_scores: return "RUN_SCORES";
    case ResultCategory::first_and_third_no_outs: return "FIRST_AND_THIRD_NO_OUTS";
    case ResultCategory::first_and_second_no_outs: return "FIRST_AND_SECOND_NO_OUTS";
    case ResultCategory::third_one_out: return "THIRD_ONE_OUT";
    case ResultCategory::other: return "OTHER";
    }
    return "OTHER";
}

inline std::optional<ResultCategory> parse_result_category(std::string_view s)
{
    for (auto c : kAllCategories)
        if (to_string(c) == s)
            return c;
    return std::nullopt;
}

struct CohortRecord {
    std::string game_id;
    int season = 0;
    int inning = 0;
    std::string batter_id;
    std::string pitcher_id;
    int treatment = 0;  // 1 bunt, 0 swing away
    int outcome = 0;    // 1 home team wins in this inning
    CovariateTriple covariates;
    ResultCategory result_category = ResultCategory::other;
    std::optional<double> propensity;
    std::optional<double> weight;
    std::string pitches;  // first plate appearance; not carried in the CSV

    friend bool operator==(const CohortRecord&, const CohortRecord&) = default;
};

/// RUN_SCORES wins over any base state.
inline ResultCategory classify_result(int runs, const BaseOutState& after)
{
    if (runs > 0)
        return ResultCategory::run_scores;
    const int bases = after.base_code();
    if (after.outs == 0 && bases == 0b101)
        return ResultCategory::first_and_third_no_outs;
    if (after.outs == 0 && bases == 0b011)
        return ResultCategory::first_and_second_no_outs;
    if (after.outs == 1 && bases == 0b100)
        return ResultCategory::third_one_out;
    return ResultCategory::other;
}

inline ResultCategory classify_result(const retrosheet::PlayContext& ctx)
{
    return classify_result(ctx.runs_on_play, ctx.state_after);
}

// ---------------------------------------------------------------------------
// Extraction

struct ExtractionResult {
    std::vector<CohortRecord> records;
    std::vector<std::string> skipped;  // one message per skipped game or half-inning
    std::size_t games_considered = 0;
};

inline void validate_seasons(const std::set<int>& seasons)
{
    for (int s : seasons)
        if (s < 2020)
            throw ValidationError("season " + std::to_string(s) +
                                  " predates the extra-inning runner rule (2020 and later only)");
}

/// One record per bottom half past regulation that starts tied with only a
/// runner on second and nobody out. Output is sorted by (game_id, inning).
inline ExtractionResult extract_situations(const std::vector<retrosheet::GameAccount>& games,
                                           const std::set<int>& seasons)
{
    using retrosheet::Half;
    validate_seasons(seasons);
    ExtractionResult out;

    for (const auto& game : games) {
        if (!seasons.count(game.season))
            continue;
        if (auto type = game.info_value("gametype"); !type.empty() && type != "regular")
            continue;
        ++out.games_considered;

        std::vector<retrosheet::PlayContext> ctx;
        try {
            ctx = retrosheet::replay_game(game);
        } catch (const ReplayError& e) {
            out.skipped.push_back(std::string("replay: ") + e.what());
            continue;
        }

        const int regulation = game.scheduled_innings();
        std::size_t i = 0;
        while (i < ctx.size()) {
            std::size_t end = i;
            while (end < ctx.size() && ctx[end].inning == ctx[i].inning && ctx[end].half == ctx[i].half)
                ++end;
            const auto& start = ctx[i];
            const BaseOutState ghost{false, true, false, 0};
            if (start.half == Half::bottom && start.inning > regulation && start.state_before == ghost &&
                start.score_home == start.score_away) {
                std::optional<std::size_t> first_pa;
                int runs_through_pa = 0;
                int runs_in_half = 0;
                for (std::size_t k = i; k < end; ++k) {
                    runs_in_half += ctx[k].runs_on_play;
                    if (!first_pa) {
                        runs_through_pa += ctx[k].runs_on_play;
                        if (ctx[k].is_plate_appearance_end)
                            first_pa = k;
                    }
                }
                if (!first_pa) {
                    out.skipped.push_back(game.game_id + " inning " + std::to_string(start.inning) +
                                          ": half ended before the first plate appearance completed");
                } else {
                    const auto& pa = ctx[*first_pa];
                    const auto& play = game.plays[pa.play_index];
                    CohortRecord r;
                    r.game_id = game.game_id;
                    r.season = game.season;
                    r.inning = start.inning;
                    r.batter_id = play.batter_id;
                    r.pitcher_id = play.pitcher_id;
                    r.treatment = pa.bunt_flag ? 1 : 0;
                    r.outcome = runs_in_half > 0 ? 1 : 0;
                    r.result_category = classify_result(runs_through_pa, pa.state_after);
                    r.pitches = play.pitches;
                    out.records.push_back(std::move(r));
                }
            }
            i = end;
        }
    }
    std::stable_sort(out.records.begin(), out.records.end(), [](const CohortRecord& a, const CohortRecord& b) {
        return std::tie(a.game_id, a.inning) < std::tie(b.game_id, b.inning);
    });
    return out;
}

// ---------------------------------------------------------------------------
// Covariate join

struct JoinReport {
    std::size_t input = 0;
    std::size_t joined = 0;
    std::size_t missing_batter = 0;
    std::size_t missing_pitcher = 0;
    std::size_t undefined_covariate = 0;  // present but zero PA / AB / outs

    std::size_t excluded() const { return input - joined; }
};

struct JoinResult {
    std::vector<CohortRecord> records;
    JoinReport report;
};

/// Attaches same-season covariates. Records with any missing or undefined
/// covariate are dropped; each drop is counted under its first cause.
inline JoinResult join_covariates(std::vector<CohortRecord> records, const stats::BattingMap& batting,
                                  const stats::PitchingMap& pitching)
{
    JoinResult out;
    out.report.input = records.size();
    for (auto& r : records) {
        auto b = batting.find({r.batter_id, r.season});
        if (b == batting.end()) {
            ++out.report.missing_batter;
            continue;
        }
        auto p = pitching.find({r.pitcher_id, r.season});
        if (p == pitching.end()) {
            ++out.report.missing_pitcher;
            continue;
        }
        auto ops = stats::compute_ops(b->second);
        auto sac = stats::compute_sac_rate(b->second);
        auto era = stats::compute_era(p->second);
        if (!ops || !sac || !era) {
            ++out.report.undefined_covariate;
            continue;
        }
        r.covariates = {*ops, *sac, *era};
        out.records.push_back(std::move(r));
    }
    out.report.joined = out.records.size();
    return out;
}

// ---------------------------------------------------------------------------
// Summaries

struct MeanSd {
    double mean = std::numeric_limits<double>::quiet_NaN();
    double sd = std::numeric_limits<double>::quiet_NaN();  // sample sd, n-1
};

inline MeanSd mean_sd(const std::vector<double>& xs)
{
    MeanSd m;
    if (xs.empty())
        return m;
    double sum = 0;
    for (double x : xs)
        sum += x;
    m.mean = sum / double(xs.size());
    if (xs.size() < 2)
        return m;
    double ss = 0;
    for (double x : xs)
        ss += (x - m.mean) * (x - m.mean);
    m.sd = std::sqrt(ss / double(xs.size() - 1));
    return m;
}

struct GroupSummary {
    bool present = false;
    std::size_t n = 0;
    double win_rate = std::numeric_limits<double>::quiet_NaN();
    MeanSd ops, sac_rate, era;
    std::array<double, 5> category_pct{};  // indexed like kAllCategories
};

struct CohortSummary {
    GroupSummary bunt;   // treatment = 1
    GroupSummary swing;  // treatment = 0
};

inline GroupSummary summarize_group(const std::vector<CohortRecord>& records, int treatment)
{
    GroupSummary g;
    std::vector<double> ops, sac, era;
    std::size_t wins = 0;
    std::array<std::size_t, 5> cats{};
    for (const auto& r : records) {
        if (r.treatment != treatment)
            continue;
        ++g.n;
        wins += r.outcome;
        ops.push_back(r.covariates.ops);
        sac.push_back(r.covariates.sac_rate);
        era.push_back(r.covariates.era);
        ++cats[std::size_t(r.result_category)];
    }
    if (g.n == 0)
        return g;
    g.present = true;
    g.win_rate = double(wins) / double(g.n);
    g.ops = mean_sd(ops);
    g.sac_rate = mean_sd(sac);
    g.era = mean_sd(era);
    for (std::size_t c = 0; c < cats.size(); ++c)
        g.category_pct[c] = 100.0 * double(cats[c]) / double(g.n);
    return g;
}

inline CohortSummary summarize_cohort(const std::vector<CohortRecord>& records)
{
    return {summarize_group(records, 1), summarize_group(records, 0)};
}

/// Two aligned tables: group comparison and first-PA result distribution.
inline void write_summary_text(std::ostream& os, const CohortSummary& s)
{
    auto na = [](double v, int p) { return std::isnan(v) ? std::string("NA") : fixed(v, p); };
    auto ms = [&](const MeanSd& m, int p) { return na(m.mean, p) + " +/- " + na(m.sd, p); };
    auto pad = [](std::string cell, std::size_t w) {
        if (cell.size() < w)
            cell.append(w - cell.size(), ' ');
        return cell;
    };
    const std::string b_head = "Bunt (A=1), n=" + std::to_string(s.bunt.n);
    const std::string s_head = "Swing away (A=0), n=" + std::to_string(s.swing.n);
    os << "Comparison of bunters and nonbunters\n";
    os << pad("", 34) << pad(b_head, 26) << s_head << '\n';
    auto row = [&](const std::string& label, const std::string& a, const std::string& b) {
        os << pad(label, 34) << pad(a, 26) << b << '\n';
    };
    row("Home team wins (Y=1)", s.bunt.present ? na(100 * s.bunt.win_rate, 1) + "%" : "absent",
        s.swing.present ? na(100 * s.swing.win_rate, 1) + "%" : "absent");
    row("Batter OPS", ms(s.bunt.ops, 3), ms(s.swing.ops, 3));
    row("Batter sacrifice rate per 100 PA", ms(s.bunt.sac_rate, 2), ms(s.swing.sac_rate, 2));
    row("Pitcher ERA", ms(s.bunt.era, 2), ms(s.swing.era, 2));
    os << "\nFirst plate appearance result\n";
    os << pad("", 20);
    for (auto c : kAllCategories)
        os << pad(std::string(to_string(c)), 26);
    os << '\n';
    auto cat_row = [&](const char* label, const GroupSummary& g) {
        os << pad(label, 20);
        for (double pct : g.category_pct)
            os << pad(g.present ? fixed(pct, 1) + "%" : "absent", 26);
        os << '\n';
    };
    cat_row("Bunts", s.bunt);
    cat_row("Swings away", s.swing);
    os << "(favorable: all categories except OTHER)\n";
}

/// group,n,win_rate,ops_mean,ops_sd,sac_rate_mean,sac_rate_sd,era_mean,era_sd,<category percentages>
inline void write_summary_csv(std::ostream& os, const CohortSummary& s)
{
    auto na = [](double v) { return std::isnan(v) ? std::string("NA") : fixed(v, 6); };
    os << "group,n,win_rate,ops_mean,ops_sd,sac_rate_mean,sac_rate_sd,era_mean,era_sd";
    for (auto c : kAllCategories)
        os << ",pct_" << to_string(c);
    os << '\n';
    auto row = [&](const char* name, const GroupSummary& g) {
        os << name << ',' << g.n << ',' << na(g.win_rate) << ',' << na(g.ops.mean) << ',' << na(g.ops.sd) << ','
           << na(g.sac_rate.mean) << ',' << na(g.sac_rate.sd) << ',' << na(g.era.mean) << ',' << na(g.era.sd);
        for (double p : g.category_pct)
            os << ',' << (g.present ? fixed(p, 6) : std::string("NA"));
        os << '\n';
    };
    row("bunt", s.bunt);
    row("swing", s.swing);
}

// ---------------------------------------------------------------------------
// Strategy-switching audit

struct ArmAudit {
    std::size_t sampled = 0;
    std::size_t unknown = 0;   // no pitch data; excluded from the fraction
    std::size_t switched = 0;
    std::vector<std::size_t> sample;  // indices into the input records

    double switched_fraction() const
    {
        std::size_t known = sampled - unknown;
        return known == 0 ? std::numeric_limits<double>::quiet_NaN() : double(switched) / double(known);
    }
};

struct AuditReport {
    ArmAudit bunt;
    ArmAudit swing;
};

/// Samples `n_per_group` records from each arm without replacement and
/// profiles their pitch sequences. Reproducible for a fixed seed.
inline AuditReport audit_strategy_switching(const std::vector<CohortRecord>& records, std::size_t n_per_group,
                                            std::uint64_t seed)
{
    AuditReport rep;
    for (int arm = 0; arm <= 1; ++arm) {
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < records.size(); ++i)
            if (records[i].treatment == arm)
                idx.push_back(i);
        if (n_per_group > idx.size())
            throw ValidationError("audit sample of " + std::to_string(n_per_group) + " exceeds arm size " +
                                  std::to_string(idx.size()));
        auto& a = arm == 1 ? rep.bunt : rep.swing;
        std::mt19937_64 rng(derive_seed(seed, std::uint64_t(arm)));
        std::sample(idx.begin(), idx.end(), std::back_inserter(a.sample), n_per_group, rng);
        a.sampled = a.sample.size();
        for (auto i : a.sample) {
            auto prof = retrosheet::pitch_profile(records[i].pitches, records[i].treatment == 1);
            if (prof.unknown)
                ++a.unknown;
            else if (prof.switched_strategy)
                ++a.switched;
        }
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Cohort CSV

inline constexpr std::string_view kCohortHeader =
    "game_id,season,inning,batter_id,pitcher_id,A,Y,ops,sac_rate,era,result_category";

inline void write_cohort_csv(std::ostream& os, const std::vector<CohortRecord>& records)
{
    os << kCohortHeader << '\n';
    for (const auto& r : records) {
        os << csv::escape(r.game_id) << ',' << r.season << ',' << r.inning << ',' << csv::escape(r.batter_id) << ','
           << csv::escape(r.pitcher_id) << ',' << r.treatment << ',' << r.outcome << ',' << exact(r.covariates.ops)
           << ',' << exact(r.covariates.sac_rate) << ',' << exact(r.covariates.era) << ','
           << to_string(r.result_category) << '\n';
    }
}

inline std::vector<CohortRecord> read_cohort_csv(std::istream& in)
{
    auto t = csv::read_table(in);
    const char* names[] = {"game_id", "season", "inning", "batter_id", "pitcher_id", "A",
                           "Y",       "ops",    "sac_rate", "era",     "result_category"};
    std::size_t col[11];
    for (int i = 0; i < 11; ++i)
        col[i] = t.column(names[i]);

    std::vector<CohortRecord> out;
    out.reserve(t.rows.size());
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto& row = t.rows[r];
        const auto line = t.row_lines[r];
        auto num = [&](int i) {
            auto v = parse_double(row[col[i]]);
            if (!v || !std::isfinite(*v))
                throw ParseError(line, std::string("column '") + names[i] + "': bad number '" + row[col[i]] + "'");
            return *v;
        };
        auto binary = [&](int i) {
            double v = num(i);
            if (v != 0 && v != 1)
                throw ParseError(line, std::string("column '") + names[i] + "' must be 0 or 1");
            return int(v);
        };
        CohortRecord rec;
        rec.game_id = row[col[0]];
        rec.season = int(num(1));
        rec.inning = int(num(2));
        rec.batter_id = row[col[3]];
        rec.pitcher_id = row[col[4]];
        rec.treatment = binary(5);
        rec.outcome = binary(6);
        rec.covariates = {num(7), num(8), num(9)};
        auto cat = parse_result_category(row[col[10]]);
        if (!cat)
            throw ParseError(line, "unknown result_category '" + row[col[10]] + "'");
        rec.result_category = *cat;
        out.push_back(std::move(rec));
    }
    return out;
}

} // namespace walkoff::cohort
