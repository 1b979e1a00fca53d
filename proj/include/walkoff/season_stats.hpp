#pragma once

// Lahman-style season tables and the three covariates derived from them.

#include <compare>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <unordered_map>

#include "walkoff/csv.hpp"
#include "walkoff/error.hpp"
#include "walkoff/kv_config.hpp"

namespace walkoff::stats {

struct PlayerSeason {
    std::string player_id;
    int season = 0;

    friend auto operator<=>(const PlayerSeason&, const PlayerSeason&) = default;
};

struct BattingSeason {
    std::string player_id;
    int season = 0;
    long ab = 0, h = 0, doubles = 0, triples = 0, hr = 0, bb = 0, hbp = 0, sf = 0, sh = 0;

    friend bool operator==(const BattingSeason&, const BattingSeason&) = default;
};

struct PitchingSeason {
    std::string player_id;
    int season = 0;
    long earned_runs = 0;
    long outs_recorded = 0;

    friend bool operator==(const PitchingSeason&, const PitchingSeason&) = default;
};

struct CovariateTriple {
    double ops = 0;
    double sac_rate = 0;  // sacrifice hits per 100 PA
    double era = 0;

    friend bool operator==(const CovariateTriple&, const CovariateTriple&) = default;
};

using BattingMap = std::map<PlayerSeason, BattingSeason>;
using PitchingMap = std::map<PlayerSeason, PitchingSeason>;

/// Lahman playerID -> Retrosheet id, from People.csv (playerID, retroID).
using IdCrosswalk = std::unordered_map<std::string, std::string>;

namespace detail {

inline long count_cell(const std::string& cell, std::size_t line, const std::string& column)
{
    if (trim(cell).empty())
        return 0;
    auto v = parse_int(cell);
    if (!v || *v < 0)
        throw ParseError(line, "column '" + column + "': bad count '" + cell + "'");
    return long(*v);
}

inline std::string map_id(const std::string& id, const IdCrosswalk* crosswalk)
{
    if (!crosswalk)
        return id;
    auto it = crosswalk->find(id);
    return it == crosswalk->end() ? id : it->second;
}

} // namespace detail

inline IdCrosswalk load_crosswalk(std::istream& in)
{
    auto t = csv::read_table(in);
    auto pid = t.column("playerID");
    auto rid = t.column("retroID");
    IdCrosswalk cw;
    for (const auto& row : t.rows)
        if (!row[rid].empty())
            cw[row[pid]] = row[rid];
    return cw;
}

/// Loads Batting.csv, summing stints of the same player-season. Blank numeric
/// cells read as zero.
inline BattingMap load_batting(std::istream& in, const IdCrosswalk* crosswalk = nullptr)
{
    auto t = csv::read_table(in);
    const std::string names[] = {"playerID", "yearID", "stint", "AB", "H", "2B", "3B", "HR", "BB", "HBP", "SF", "SH"};
    std::size_t col[12];
    for (int i = 0; i < 12; ++i)
        col[i] = t.column(names[i]);

    BattingMap out;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto& row = t.rows[r];
        const auto line = t.row_lines[r];
        auto cell = [&](int i) { return detail::count_cell(row[col[i]], line, names[i]); };
        PlayerSeason key{detail::map_id(row[col[0]], crosswalk), int(cell(1))};
        auto& b = out[key];
        b.player_id = key.player_id;
        b.season = key.season;
        b.ab += cell(3);
        b.h += cell(4);
        b.doubles += cell(5);
        b.triples += cell(6);
        b.hr += cell(7);
        b.bb += cell(8);
        b.hbp += cell(9);
        b.sf += cell(10);
        b.sh += cell(11);
    }
    return out;
}

/// Loads Pitching.csv (playerID, yearID, ER, IPouts), summing stints.
inline PitchingMap load_pitching(std::istream& in, const IdCrosswalk* crosswalk = nullptr)
{
    auto t = csv::read_table(in);
    auto c_id = t.column("playerID");
    auto c_year = t.column("yearID");
    auto c_er = t.column("ER");
    auto c_outs = t.column("IPouts");

    PitchingMap out;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto& row = t.rows[r];
        const auto line = t.row_lines[r];
        PlayerSeason key{detail::map_id(row[c_id], crosswalk), int(detail::count_cell(row[c_year], line, "yearID"))};
        auto& p = out[key];
        p.player_id = key.player_id;
        p.season = key.season;
        p.earned_runs += detail::count_cell(row[c_er], line, "ER");
        p.outs_recorded += detail::count_cell(row[c_outs], line, "IPouts");
    }
    return out;
}

inline std::optional<double> compute_obp(const BattingSeason& b)
{
    long denom = b.ab + b.bb + b.hbp + b.sf;
    if (denom <= 0)
        return std::nullopt;
    return double(b.h + b.bb + b.hbp) / double(denom);
}

inline long total_bases(const BattingSeason& b)
{
    long singles = b.h - b.doubles - b.triples - b.hr;
    return singles + 2 * b.doubles + 3 * b.triples + 4 * b.hr;
}

inline std::optional<double> compute_slg(const BattingSeason& b)
{
    if (b.ab <= 0)
        return std::nullopt;
    return double(total_bases(b)) / double(b.ab);
}

/// OBP + SLG; nullopt when either denominator is zero.
inline std::optional<double> compute_ops(const BattingSeason& b)
{
    auto obp = compute_obp(b);
    auto slg = compute_slg(b);
    if (!obp || !slg)
        return std::nullopt;
    return *obp + *slg;
}

inline long plate_appearances(const BattingSeason& b) { return b.ab + b.bb + b.hbp + b.sf + b.sh; }

inline std::optional<double> compute_sac_rate(const BattingSeason& b)
{
    long pa = plate_appearances(b);
    if (pa <= 0)
        return std::nullopt;
    return 100.0 * double(b.sh) / double(pa);
}

inline std::optional<double> compute_era(const PitchingSeason& p)
{
    if (p.outs_recorded <= 0)
        return std::nullopt;
    return 9.0 * double(p.earned_runs) / (double(p.outs_recorded) / 3.0);
}

/// player_id,season,ops,sac_rate,era over every batter-season, with the ERA
/// column filled when the same id also pitched. Undefined values print as NA.
inline void write_covariate_csv(std::ostream& os, const BattingMap& batting, const PitchingMap& pitching)
{
    auto cell = [](std::optional<double> v) { return v ? fixed(*v, 6) : std::string("NA"); };
    os << "player_id,season,ops,sac_rate,era\n";
    std::map<PlayerSeason, int> keys;
    for (const auto& [k, v] : batting)
        keys[k] = 0;
    for (const auto& [k, v] : pitching)
        keys[k] = 0;
    for (const auto& [k, unused] : keys) {
        std::optional<double> ops, sac, era;
        if (auto it = batting.find(k); it != batting.end()) {
            ops = compute_ops(it->second);
            sac = compute_sac_rate(it->second);
        }
        if (auto it = pitching.find(k); it != pitching.end())
            era = compute_era(it->second);
        os << csv::escape(k.player_id) << ',' << k.season << ',' << cell(ops) << ',' << cell(sac) << ','
           << cell(era) << '\n';
    }
}

} // namespace walkoff::stats
