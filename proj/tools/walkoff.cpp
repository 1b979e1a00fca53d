#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "manifest.hpp"
#include "walkoff/walkoff.hpp"

namespace fs = std::filesystem;
using namespace walkoff;

namespace {

constexpr int kExitFailed = 1;  // ran, but the postcondition does not hold
constexpr int kExitError = 2;   // bad input or usage

struct Globals {
    std::uint64_t seed = 0;
    unsigned threads = 1;
};

cli::RunManifest manifest_for(const std::string& command, const Globals& g)
{
    cli::RunManifest m;
    m.command = command;
    m.version = WALKOFF_VERSION;
    m.seed = g.seed;
    return m;
}

void write_text_file(const fs::path& p, const std::string& text)
{
    if (p.has_parent_path())
        fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    if (!out || !(out << text))
        throw Error("cannot write " + p.string());
}

bool is_event_file(const fs::path& p)
{
    auto ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return char(std::toupper(c)); });
    return ext.size() == 4 && ext.compare(0, 3, ".EV") == 0;
}

std::vector<fs::path> collect_event_files(const std::vector<std::string>& paths)
{
    std::vector<fs::path> files;
    for (const auto& s : paths) {
        fs::path p(s);
        std::error_code ec;
        if (fs::is_directory(p, ec)) {
            std::vector<fs::path> found;
            for (const auto& entry : fs::directory_iterator(p))
                if (entry.is_regular_file() && is_event_file(entry.path()))
                    found.push_back(entry.path());
            std::sort(found.begin(), found.end());
            files.insert(files.end(), found.begin(), found.end());
        } else if (fs::is_regular_file(p, ec)) {
            files.push_back(p);
        } else {
            throw Error("cannot read " + s + ": no such file or directory");
        }
    }
    return files;
}

struct LoadedGames {
    std::vector<retrosheet::GameAccount> games;
    std::vector<std::string> game_files;  // source file per game
};

LoadedGames load_games(const std::vector<fs::path>& files, cli::RunManifest& manifest)
{
    LoadedGames out;
    for (const auto& f : files) {
        auto bytes = cli::read_file(f);
        manifest.add_input(f, bytes);
        retrosheet::EventFile ef;
        try {
            ef = retrosheet::parse_event_string(bytes);
        } catch (const ParseError& e) {
            throw Error(f.string() + ": " + e.what());
        }
        for (auto& g : ef.games) {
            out.games.push_back(std::move(g));
            out.game_files.push_back(f.string());
        }
    }
    return out;
}

template <class T, class Loader>
T load_with_digest(const fs::path& p, cli::RunManifest& manifest, Loader loader)
{
    auto bytes = cli::read_file(p);
    manifest.add_input(p, bytes);
    std::istringstream in(bytes);
    try {
        return loader(in);
    } catch (const ParseError& e) {
        throw Error(p.string() + ": " + e.what());
    }
}

std::string join_ints(const std::set<int>& xs)
{
    std::string s;
    for (int x : xs)
        s += (s.empty() ? "" : ",") + std::to_string(x);
    return s;
}

// ---------------------------------------------------------------------------
// parse

struct ParseArgs {
    std::vector<std::string> paths;
    std::string out;
};

int cmd_parse(const ParseArgs& a, const Globals& g)
{
    auto manifest = manifest_for("parse", g);
    auto loaded = load_games(collect_event_files(a.paths), manifest);

    std::ostringstream contexts;
    retrosheet::write_context_csv_header(contexts);
    std::size_t plays = 0;
    std::vector<std::string> problems;
    for (std::size_t i = 0; i < loaded.games.size(); ++i) {
        const auto& game = loaded.games[i];
        try {
            auto ctx = retrosheet::replay_game(game);
            plays += ctx.size();
            retrosheet::write_context_csv(contexts, game, ctx);
        } catch (const ReplayError& e) {
            problems.push_back(loaded.game_files[i] + ": " + e.what());
        }
    }

    std::ostringstream report;
    manifest.write(report);
    report << "parsed " << loaded.games.size() << " games, " << plays << " plays replayed, " << problems.size()
           << " replay inconsistencies\n";
    for (const auto& p : problems)
        report << "inconsistency: " << p << '\n';
    std::cout << report.str();
    for (const auto& p : problems)
        std::cerr << "error: " << p << '\n';
    if (!a.out.empty()) {
        write_text_file(fs::path(a.out) / "contexts.csv", contexts.str());
        write_text_file(fs::path(a.out) / "parse_report.txt", report.str());
    }
    return problems.empty() ? 0 : kExitFailed;
}

// ---------------------------------------------------------------------------
// cohort

struct CohortArgs {
    std::string events, batting, pitching, people, out;
    std::vector<int> seasons{2021, 2022};
};

int cmd_cohort(const CohortArgs& a, const Globals& g)
{
    std::set<int> seasons(a.seasons.begin(), a.seasons.end());
    cohort::validate_seasons(seasons);
    auto manifest = manifest_for("cohort", g);
    manifest.set("seasons", join_ints(seasons));

    auto loaded = load_games(collect_event_files({a.events}), manifest);
    std::optional<stats::IdCrosswalk> crosswalk;
    if (!a.people.empty())
        crosswalk = load_with_digest<stats::IdCrosswalk>(a.people, manifest,
                                                         [](std::istream& in) { return stats::load_crosswalk(in); });
    const stats::IdCrosswalk* cw = crosswalk ? &*crosswalk : nullptr;
    auto batting = load_with_digest<stats::BattingMap>(a.batting, manifest,
                                                       [&](std::istream& in) { return stats::load_batting(in, cw); });
    auto pitching = load_with_digest<stats::PitchingMap>(
        a.pitching, manifest, [&](std::istream& in) { return stats::load_pitching(in, cw); });

    auto extracted = cohort::extract_situations(loaded.games, seasons);
    for (const auto& s : extracted.skipped)
        std::cerr << "skipped: " << s << '\n';
    if (extracted.records.empty()) {
        std::cerr << "error: no qualifying situations (tied bottom halves past regulation starting with only a "
                     "runner on second) in "
                  << extracted.games_considered << " regular-season games of seasons " << join_ints(seasons)
                  << '\n';
        return kExitFailed;
    }
    auto joined = cohort::join_covariates(std::move(extracted.records), batting, pitching);
    if (joined.records.empty()) {
        std::cerr << "error: every situation lost its covariates in the join\n";
        return kExitFailed;
    }

    std::ostringstream csv;
    cohort::write_cohort_csv(csv, joined.records);
    auto summary = cohort::summarize_cohort(joined.records);

    std::ostringstream report;
    manifest.write(report);
    report << "games considered: " << extracted.games_considered << '\n';
    report << "situations: " << joined.report.input << ", skipped halves: " << extracted.skipped.size() << '\n';
    report << "join: " << joined.report.joined << " kept, " << joined.report.missing_batter << " missing batter, "
           << joined.report.missing_pitcher << " missing pitcher, " << joined.report.undefined_covariate
           << " undefined covariate\n\n";
    cohort::write_summary_text(report, summary);

    std::ostringstream summary_csv;
    cohort::write_summary_csv(summary_csv, summary);

    fs::path out(a.out);
    write_text_file(out, csv.str());
    auto stem = out;
    stem.replace_extension();
    write_text_file(stem.string() + "_summary.txt", report.str());
    write_text_file(stem.string() + "_summary.csv", summary_csv.str());
    std::cout << report.str();
    return 0;
}

// ---------------------------------------------------------------------------
// estimate

struct EstimateArgs {
    std::string cohort, config, out;
    std::vector<double> trim;
    std::optional<int> boot;
    std::string ci, target;
};

void write_model_table(std::ostream& os, const glm::LogisticModel& m)
{
    char buf[128];
    std::snprintf(buf, sizeof buf, "  %-10s %12s %12s\n", "term", "estimate", "std_error");
    os << buf;
    for (std::size_t i = 0; i < m.names.size(); ++i) {
        std::snprintf(buf, sizeof buf, "  %-10s %12.6f %12.6f\n", m.names[i].c_str(),
                      m.coefficients(Eigen::Index(i)), m.std_error(m.names[i]));
        os << buf;
    }
    os << "  iterations " << m.iterations << (m.converged ? ", converged" : ", NOT converged") << '\n';
    if (!m.diagnostics.empty())
        os << "  note: " << m.diagnostics << '\n';
}

int cmd_estimate(const EstimateArgs& a, const Globals& g)
{
    auto manifest = manifest_for("estimate", g);
    causal::PipelineConfig config;
    if (!a.config.empty())
        config = load_with_digest<causal::PipelineConfig>(a.config, manifest, [](std::istream& in) {
            return causal::pipeline_config_from_config(KeyValueConfig::parse(in));
        });
    if (!a.trim.empty()) {
        config.trim_lo = a.trim.at(0);
        config.trim_hi = a.trim.at(1);
    }
    if (a.boot)
        config.bootstrap_replicates = *a.boot;
    if (!a.ci.empty())
        config.ci_method = a.ci == "wald" ? causal::CiMethod::wald : causal::CiMethod::bootstrap;
    if (!a.target.empty())
        config.target = a.target == "marginal" ? causal::EffectTarget::marginal : causal::EffectTarget::conditional;
    config.seed = g.seed;
    config.threads = g.threads;
    config.validate();

    std::ostringstream settings;
    causal::write_pipeline_config(settings, config);
    {
        std::istringstream in(settings.str());
        const auto parsed = KeyValueConfig::parse(in);
        for (const auto& [k, v] : parsed.values())
            manifest.set(k, v);
    }

    auto records = load_with_digest<std::vector<cohort::CohortRecord>>(
        a.cohort, manifest, [](std::istream& in) { return cohort::read_cohort_csv(in); });
    auto analysis = causal::run_pipeline(records, config);

    std::ostringstream report;
    manifest.write(report);
    report << "records: " << records.size() << '\n' << '\n';
    causal::write_effects_text(report, analysis, config.ci_level);
    report << "\nPropensity model (A ~ " << causal::detail::covariate_list(config.propensity_covariates) << ")\n";
    write_model_table(report, analysis.propensity_model);
    report << "\nWeighted outcome model (Y ~ A";
    for (auto c : config.outcome_covariates)
        report << " + " << causal::name_of(c);
    report << ")\n";
    write_model_table(report, analysis.outcome_model);
    report << "\nBalance\n";
    causal::write_balance_csv(report, analysis.balance);

    std::ostringstream effects, balance, histogram;
    causal::write_effects_csv(effects, analysis);
    causal::write_balance_csv(balance, analysis.balance);
    causal::write_histogram_csv(histogram, analysis.histogram);

    std::cout << report.str();
    if (!a.out.empty()) {
        fs::path dir(a.out);
        write_text_file(dir / "effects.txt", report.str());
        write_text_file(dir / "effects.csv", effects.str());
        write_text_file(dir / "balance.csv", balance.str());
        write_text_file(dir / "propensity_histogram.csv", histogram.str());
    }
    return 0;
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateArgs {
    std::string model, out;
    double r = 0.72;
    double p_sac = 1.0;
    std::vector<double> uplift{4.15, 0.5};
    std::size_t trials = 1'000'000;
};

int cmd_simulate(const SimulateArgs& a, const Globals& g)
{
    auto manifest = manifest_for("simulate", g);
    sim::EventModel model;
    if (!a.model.empty())
        model = load_with_digest<sim::EventModel>(
            a.model, manifest, [](std::istream& in) { return sim::model_from_config(KeyValueConfig::parse(in)); });
    model.validate();
    sim::GeometricGameModel game{a.r};
    game.validate();
    if (a.uplift.size() != 2)
        throw ValidationError("--uplift-params takes two values: situations per season and p_continue_win");

    manifest.set("r", exact(a.r));
    manifest.set("p_sac_success", exact(a.p_sac));
    manifest.set("situations_per_season", exact(a.uplift[0]));
    manifest.set("p_continue_win", exact(a.uplift[1]));
    manifest.set("mc_trials", std::to_string(a.trials));

    std::ostringstream report;
    manifest.write(report);
    report << "Event model\n";
    {
        std::ostringstream m;
        sim::write_model(m, model);
        std::istringstream lines(m.str());
        for (std::string line; std::getline(lines, line);)
            report << "  " << line << '\n';
    }

    auto table = sim::score_prob_table(model);
    report << "\nP(at least one run before the third out)\n";
    char buf[160];
    std::snprintf(buf, sizeof buf, "  %-10s %10s %12s %10s\n", "state", "exact", "monte_carlo", "diff");
    report << buf;
    double max_diff = 0;
    for (int i = 0; i < kLiveStates; ++i) {
        auto s = BaseOutState::from_index(i);
        const double exact_v = table[std::size_t(i)];
        if (a.trials > 0) {
            auto mc = sim::monte_carlo_score_prob(s, model, a.trials, derive_seed(g.seed, std::uint64_t(i)),
                                                  g.threads);
            max_diff = std::max(max_diff, std::abs(mc.frequency - exact_v));
            std::snprintf(buf, sizeof buf, "  %-10s %10.6f %12.6f %10.6f\n", s.label().c_str(), exact_v, mc.frequency,
                          mc.frequency - exact_v);
        } else {
            std::snprintf(buf, sizeof buf, "  %-10s %10.6f %12s %10s\n", s.label().c_str(), exact_v, "-", "-");
        }
        report << buf;
    }
    if (a.trials > 0)
        report << "  max |exact - monte carlo| = " << fixed(max_diff, 6) << " (" << a.trials
               << " trials per state)\n";

    auto policy = sim::bunt_policy_value(model, a.p_sac);
    report << "\nPolicy from runner on second, nobody out (p_sac_success = " << fixed(a.p_sac, 3) << ")\n";
    report << "  bunt   " << fixed(policy.bunt, 6) << '\n';
    report << "  swing  " << fixed(policy.swing, 6) << '\n';
    report << "  failed sacrifice leaves " << sim::failed_sacrifice_state(model).label() << '\n';

    report << "\nGame length (r = " << fixed(a.r, 4) << ")\n";
    report << "  k  P(at least k extra innings)\n";
    for (int k = 1; k <= 6; ++k)
        report << "  " << k << "  " << fixed(sim::game_length_distribution(game, k), 6) << '\n';
    report << "  P(decided within the first two extra innings) = "
           << fixed(1 - sim::game_length_distribution(game, 3), 6) << '\n';
    report << "  P(12 innings or more) = " << fixed(sim::game_length_distribution(game, 3), 6) << '\n';

    const double uplift = sim::season_uplift(a.uplift[0], policy.bunt, policy.swing, a.uplift[1]);
    report << "\nSeason uplift\n";
    report << "  situations per season " << fixed(a.uplift[0], 3) << ", p_continue_win " << fixed(a.uplift[1], 3)
           << '\n';
    report << "  expected additional wins " << fixed(uplift, 4) << '\n';
    report << "  with p_continue_win = 0 "
           << fixed(sim::season_uplift(a.uplift[0], policy.bunt, policy.swing, 0.0), 4) << '\n';

    std::cout << report.str();
    if (!a.out.empty())
        write_text_file(a.out, report.str());
    return 0;
}

// ---------------------------------------------------------------------------
// synth-validate

struct SynthArgs {
    std::string spec, out;
    std::size_t n = 10000;
    int reps = 200;
    std::size_t population = 1'000'000;
    std::size_t null_n = 50000;
    double closer_threshold = 0.95;
    double null_tolerance = 0.05;
};

int cmd_synth_validate(const SynthArgs& a, const Globals& g)
{
    auto manifest = manifest_for("synth-validate", g);
    synth::SynthSpec spec = synth::confounded_default_spec();
    if (!a.spec.empty())
        spec = load_with_digest<synth::SynthSpec>(a.spec, manifest, [](std::istream& in) {
            return synth::spec_from_config(KeyValueConfig::parse(in), synth::confounded_default_spec());
        });
    if (a.n < 10 || a.reps < 1 || a.null_n < 10 || a.population < 1)
        throw ValidationError("--n, --null-n and --population must be at least 10, 10 and 1; --reps at least 1");
    {
        std::ostringstream s;
        synth::write_spec(s, spec);
        std::istringstream in(s.str());
        const auto parsed = KeyValueConfig::parse(in);
        for (const auto& [k, v] : parsed.values())
            manifest.set("spec." + k, v);
    }
    manifest.set("n", std::to_string(a.n));
    manifest.set("reps", std::to_string(a.reps));
    manifest.set("population", std::to_string(a.population));
    manifest.set("null_n", std::to_string(a.null_n));

    const auto config = synth::recovery_config();
    auto rep = synth::run_recovery(spec, a.n, a.reps, g.seed, config, a.population, g.threads);

    const auto plain = synth::unconfounded_spec(spec);
    auto null_cohort = synth::to_cohort(synth::generate(plain, a.null_n, derive_seed(g.seed, 0xfffffffeULL)));
    const double null_crude = causal::crude_or(null_cohort).log_or;
    const double null_ipw = causal::ipw_log_or(std::move(null_cohort), config);

    const bool confounded = spec.alpha_ops != 0 || spec.alpha_sac != 0 || spec.alpha_era != 0;
    double mean_crude = 0, mean_ipw = 0, mean_gap = 0;
    std::size_t ok = 0;
    for (const auto& r : rep.reps)
        if (r.ok) {
            mean_crude += r.crude_log_or;
            mean_ipw += r.ipw_log_or;
            mean_gap += std::abs(r.ipw_log_or - r.crude_log_or);
            ++ok;
        }
    if (ok) {
        mean_crude /= double(ok);
        mean_ipw /= double(ok);
        mean_gap /= double(ok);
    }

    struct Check {
        std::string name;
        bool pass;
        std::string detail;
    };
    std::vector<Check> checks;
    checks.push_back({"all repetitions estimated", rep.failed == 0,
                      std::to_string(rep.failed) + " of " + std::to_string(rep.reps.size()) + " failed"});
    if (confounded)
        checks.push_back({"IPW closer to truth than crude", rep.closer_fraction() >= a.closer_threshold,
                          fixed(100 * rep.closer_fraction(), 1) + "% of repetitions (need >= " +
                              fixed(100 * a.closer_threshold, 1) + "%)"});
    else
        checks.push_back({"crude ~ IPW without confounding", mean_gap < a.null_tolerance,
                          "mean |log IPW - log crude| = " + fixed(mean_gap, 4)});
    checks.push_back({"crude ~ IPW with confounding slopes zeroed", std::abs(null_ipw - null_crude) < a.null_tolerance,
                      "|log IPW - log crude| = " + fixed(std::abs(null_ipw - null_crude), 4) + " at n = " +
                          std::to_string(a.null_n)});

    std::ostringstream report;
    manifest.write(report);
    report << "truth (g-computation): OR " << fixed(rep.truth.odds_ratio, 4) << ", log OR "
           << fixed(rep.truth.log_or, 4) << " (MC se " << fixed(rep.truth.se_log_or, 5) << ")\n";
    report << "mean log OR over " << ok << " repetitions: crude " << fixed(mean_crude, 4) << ", IPW "
           << fixed(mean_ipw, 4) << '\n';
    report << "zero-confounding cohort: crude log OR " << fixed(null_crude, 4) << ", IPW log OR "
           << fixed(null_ipw, 4) << '\n';
    bool all = true;
    for (const auto& c : checks) {
        report << (c.pass ? "PASS  " : "FAIL  ") << c.name << ": " << c.detail << '\n';
        all = all && c.pass;
    }
    report << (all ? "overall: PASS\n" : "overall: FAIL\n");

    std::ostringstream reps_csv;
    reps_csv << "rep,ok,crude_log_or,ipw_log_or,error\n";
    for (std::size_t i = 0; i < rep.reps.size(); ++i) {
        const auto& r = rep.reps[i];
        reps_csv << i << ',' << int(r.ok) << ',' << fixed(r.crude_log_or, 8) << ',' << fixed(r.ipw_log_or, 8) << ','
                 << csv::escape(r.error) << '\n';
    }

    std::cout << report.str();
    if (!a.out.empty()) {
        write_text_file(fs::path(a.out) / "synth_report.txt", report.str());
        write_text_file(fs::path(a.out) / "repetitions.csv", reps_csv.str());
    }
    return all ? 0 : kExitFailed;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Walk-off bunt analysis: event replay, cohort extraction, IPW estimation and simulation"};
    app.set_version_flag("--version", std::string(WALKOFF_VERSION));
    app.require_subcommand(1);
    app.fallthrough();

    Globals g;
    app.add_option("--seed", g.seed, "Seed for every random draw")->envname("WALKOFF_SEED");
    app.add_option("--threads", g.threads, "Worker threads; results do not depend on it")
        ->check(CLI::Range(1u, 1024u));

    ParseArgs pa;
    auto* parse = app.add_subcommand("parse", "Parse and replay Retrosheet event files");
    parse->add_option("paths", pa.paths, "Event files or directories")->required();
    parse->add_option("--out", pa.out, "Directory for contexts.csv and the report");

    CohortArgs ca;
    auto* cohort_cmd = app.add_subcommand("cohort", "Extract the walk-off cohort and join season covariates");
    cohort_cmd->add_option("events", ca.events, "Event file or directory")->required();
    cohort_cmd->add_option("batting", ca.batting, "Lahman Batting.csv")->required();
    cohort_cmd->add_option("pitching", ca.pitching, "Lahman Pitching.csv")->required();
    cohort_cmd->add_option("--seasons", ca.seasons, "Seasons to include")->delimiter(',');
    cohort_cmd->add_option("--people", ca.people, "Lahman People.csv to map IDs to Retrosheet IDs");
    cohort_cmd->add_option("--out", ca.out, "Cohort CSV path")->required();

    EstimateArgs ea;
    auto* estimate = app.add_subcommand("estimate", "Crude and IPW odds ratios from a cohort CSV");
    estimate->add_option("cohort", ea.cohort, "Cohort CSV")->required();
    estimate->add_option("--config", ea.config, "Pipeline key=value file");
    estimate->add_option("--trim", ea.trim, "Propensity trimming bounds LO HI")->expected(2);
    estimate->add_option("--boot", ea.boot, "Bootstrap replicates");
    estimate->add_option("--ci", ea.ci, "Interval for the IPW estimate")->check(CLI::IsMember({"wald", "bootstrap"}));
    estimate->add_option("--target", ea.target, "Effect target")->check(CLI::IsMember({"conditional", "marginal"}));
    estimate->add_option("--out", ea.out, "Directory for the reports");

    SimulateArgs sa;
    auto* simulate = app.add_subcommand("simulate", "Markov half-inning model, game length and season uplift");
    simulate->add_option("model", sa.model, "Event model key=value file (default model when omitted)");
    simulate->add_option("--r", sa.r, "Probability a given extra inning ends the game");
    simulate->add_option("--p-sac", sa.p_sac, "Sacrifice success probability");
    simulate->add_option("--uplift-params", sa.uplift, "Situations per season and p_continue_win")->expected(2);
    simulate->add_option("--trials", sa.trials, "Monte Carlo trials per state (0 disables)");
    simulate->add_option("--out", sa.out, "Report path");

    SynthArgs ya;
    auto* synth_cmd = app.add_subcommand("synth-validate", "Check estimator recovery on synthetic cohorts");
    synth_cmd->add_option("--spec", ya.spec, "Synthetic spec key=value file");
    synth_cmd->add_option("--n", ya.n, "Cohort size per repetition");
    synth_cmd->add_option("--reps", ya.reps, "Repetitions");
    synth_cmd->add_option("--population", ya.population, "Draws for the g-computation truth");
    synth_cmd->add_option("--null-n", ya.null_n, "Cohort size for the zero-confounding check");
    synth_cmd->add_option("--out", ya.out, "Directory for the reports");

    CLI11_PARSE(app, argc, argv);

    const auto start = std::chrono::steady_clock::now();
    int code = 0;
    try {
        if (*parse)
            code = cmd_parse(pa, g);
        else if (*cohort_cmd)
            code = cmd_cohort(ca, g);
        else if (*estimate)
            code = cmd_estimate(ea, g);
        else if (*simulate)
            code = cmd_simulate(sa, g);
        else if (*synth_cmd)
            code = cmd_synth_validate(ya, g);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitError;
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::cerr << "wall clock " << fixed(seconds, 3) << " s, " << g.threads << " thread(s)\n";
    return code;
}
