#pragma once

// Retrosheet event files: record parsing, bunt classification, game replay
// and pitch-sequence profiling.

#include <algorithm>
#include <array>
#include <cctype>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "walkoff/base_out.hpp"
#include "walkoff/csv.hpp"
#include "walkoff/error.hpp"
#include "walkoff/kv_config.hpp"

namespace walkoff::retrosheet {

enum class Half : int { top = 0, bottom = 1 };

struct PlayRecord {
    int inning = 1;
    Half half = Half::top;
    std::string batter_id;
    std::string pitcher_id;  // resolved from the fielding team's lineup
    std::string count;       // two digits or "??"
    std::string pitches;
    std::string event_text;
    std::size_t line = 0;  // source line; ignored by ==

    friend bool operator==(const PlayRecord& a, const PlayRecord& b)
    {
        return a.inning == b.inning && a.half == b.half && a.batter_id == b.batter_id &&
               a.pitcher_id == b.pitcher_id && a.count == b.count && a.pitches == b.pitches &&
               a.event_text == b.event_text;
    }
};

struct LineupEntry {
    std::string player_id;
    std::string name;
    int team = 0;  // 0 visitors, 1 home
    int batting_order = 0;
    int position = 0;  // 1 = pitcher, 10 = DH, 11/12 = pinch hitter/runner

    friend bool operator==(const LineupEntry&, const LineupEntry&) = default;
};

struct Substitution {
    LineupEntry entry;
    std::size_t before_play = 0;  // index of the first play after the `sub` record

    friend bool operator==(const Substitution&, const Substitution&) = default;
};

struct GameAccount {
    std::string game_id;
    int season = 0;
    std::map<std::string, std::string> info;
    std::vector<LineupEntry> starters;
    std::vector<Substitution> substitutions;
    std::vector<PlayRecord> plays;
    // Filled from the replay by attach_final_score().
    std::optional<int> final_home_runs;
    std::optional<int> final_away_runs;

    std::string info_value(const std::string& key, std::string fallback = {}) const
    {
        auto it = info.find(key);
        return it == info.end() ? fallback : it->second;
    }

    /// Regulation length; 7 for the 2020-21 doubleheader games.
    int scheduled_innings() const
    {
        auto v = parse_int(info_value("innings"));
        return v && *v > 0 ? int(*v) : 9;
    }

    friend bool operator==(const GameAccount&, const GameAccount&) = default;
};

struct EventFile {
    std::vector<GameAccount> games;
    std::size_t unknown_records = 0;
};

struct PlayContext {
    std::size_t play_index = 0;
    int inning = 1;
    Half half = Half::top;
    BaseOutState state_before;
    int score_home = 0;  // before the play
    int score_away = 0;
    int runs_on_play = 0;
    BaseOutState state_after;
    bool bunt_flag = false;
    bool is_plate_appearance_end = false;

    friend bool operator==(const PlayContext&, const PlayContext&) = default;
};

struct PitchProfile {
    int bunt_attempt_pitches = 0;
    int swing_pitches = 0;
    int taken_pitches = 0;
    bool switched_strategy = false;
    bool unknown = false;  // no pitch data recorded

    friend bool operator==(const PitchProfile&, const PitchProfile&) = default;
};

// ---------------------------------------------------------------------------
// Parsing

namespace detail {

inline int parse_field_int(const std::string& s, std::size_t line, const char* what)
{
    auto v = parse_int(s);
    if (!v)
        throw ParseError(line, std::string("bad ") + what + " '" + s + "'");
    return int(*v);
}

inline LineupEntry parse_lineup(const std::vector<std::string>& f, std::size_t line)
{
    if (f.size() != 6)
        throw ParseError(line, f[0] + " record: expected 6 fields, found " + std::to_string(f.size()));
    LineupEntry e;
    e.player_id = f[1];
    e.name = f[2];
    e.team = parse_field_int(f[3], line, "team");
    if (e.team != 0 && e.team != 1)
        throw ParseError(line, "team must be 0 or 1");
    e.batting_order = parse_field_int(f[4], line, "batting order");
    e.position = parse_field_int(f[5], line, "fielding position");
    return e;
}

inline int season_from(const std::string& game_id, const std::map<std::string, std::string>& info)
{
    if (game_id.size() >= 7) {
        if (auto y = parse_int(std::string_view(game_id).substr(3, 4)))
            return int(*y);
    }
    if (auto it = info.find("date"); it != info.end() && it->second.size() >= 4) {
        if (auto y = parse_int(std::string_view(it->second).substr(0, 4)))
            return int(*y);
    }
    return 0;
}

} // namespace detail

/// Parses a whole event file. One GameAccount per `id` record.
inline EventFile parse_event_file(std::istream& in)
{
    EventFile out;
    GameAccount* game = nullptr;
    std::array<std::string, 2> pitcher;  // current pitcher per team
    std::string line;
    std::size_t lineno = 0;

    auto finish = [&] {
        if (game && game->season == 0)
            game->season = detail::season_from(game->game_id, game->info);
    };

    while (std::getline(in, line)) {
        ++lineno;
        csv::strip_eol(line);
        if (trim(line).empty())
            continue;
        auto f = csv::split_line(line);
        const std::string& kind = f[0];

        if (kind == "id") {
            finish();
            if (f.size() != 2 || f[1].empty())
                throw ParseError(lineno, "id record: expected a game id");
            out.games.emplace_back();
            game = &out.games.back();
            game->game_id = f[1];
            game->season = detail::season_from(game->game_id, {});
            pitcher = {};
            continue;
        }
        if (kind == "version" || kind == "com")
            continue;

        const bool game_scoped = kind == "info" || kind == "start" || kind == "sub" || kind == "play" ||
                                 kind == "data" || kind == "badj" || kind == "padj" || kind == "ladj" ||
                                 kind == "radj" || kind == "presadj";
        if (!game_scoped) {
            ++out.unknown_records;
            continue;
        }
        if (!game)
            throw StructureError(lineno, "'" + kind + "' record before any 'id' record");

        if (kind == "info") {
            if (f.size() < 2)
                throw ParseError(lineno, "info record: missing key");
            std::string value;
            for (std::size_t i = 2; i < f.size(); ++i) {
                if (i > 2)
                    value += ',';
                value += f[i];
            }
            game->info[f[1]] = value;
        } else if (kind == "start" || kind == "sub") {
            auto e = detail::parse_lineup(f, lineno);
            if (e.position == 1)
                pitcher[e.team] = e.player_id;
            if (kind == "start")
                game->starters.push_back(std::move(e));
            else
                game->substitutions.push_back({std::move(e), game->plays.size()});
        } else if (kind == "play") {
            if (f.size() != 7)
                throw ParseError(lineno, "play record: expected 7 fields, found " + std::to_string(f.size()));
            PlayRecord p;
            p.inning = detail::parse_field_int(f[1], lineno, "inning");
            if (p.inning < 1)
                throw ParseError(lineno, "inning must be positive");
            int half = detail::parse_field_int(f[2], lineno, "half");
            if (half != 0 && half != 1)
                throw ParseError(lineno, "half must be 0 or 1");
            p.half = Half(half);
            p.batter_id = f[3];
            p.count = f[4];
            p.pitches = f[5];
            p.event_text = f[6];
            p.line = lineno;
            if (p.event_text.empty())
                throw ParseError(lineno, "play record: empty event");
            // Visitors bat in the top half against the home pitcher.
            p.pitcher_id = pitcher[p.half == Half::top ? 1 : 0];
            game->plays.push_back(std::move(p));
        }
        // data / *adj: state-neutral
    }
    finish();
    return out;
}

inline EventFile parse_event_string(const std::string& text)
{
    std::istringstream in(text);
    return parse_event_file(in);
}

/// Writes games back in event-file form. Comments and data records are not kept.
inline void serialize_event_file(std::ostream& os, const std::vector<GameAccount>& games)
{
    auto lineup = [&](const char* kind, const LineupEntry& e) {
        os << kind << ',' << e.player_id << ",\"" << e.name << "\"," << e.team << ',' << e.batting_order
           << ',' << e.position << '\n';
    };
    for (const auto& g : games) {
        os << "id," << g.game_id << "\nversion,2\n";
        for (const auto& [k, v] : g.info)
            os << "info," << k << ',' << v << '\n';
        for (const auto& e : g.starters)
            lineup("start", e);
        std::size_t next_sub = 0;
        for (std::size_t i = 0; i <= g.plays.size(); ++i) {
            while (next_sub < g.substitutions.size() && g.substitutions[next_sub].before_play == i)
                lineup("sub", g.substitutions[next_sub++].entry);
            if (i == g.plays.size())
                break;
            const auto& p = g.plays[i];
            os << "play," << p.inning << ',' << int(p.half) << ',' << p.batter_id << ',' << p.count << ','
               << p.pitches << ',' << p.event_text << '\n';
        }
    }
}

// ---------------------------------------------------------------------------
// Event grammar

/// One runner movement from the `.`-separated advance list.
struct Advance {
    int from = 0;  // 0 = batter
    int to = 1;    // 4 = home
    bool out = false;
};

struct EventParts {
    std::string primary;
    std::vector<std::string> modifiers;
    std::string advances;  // raw text after the first '.'
};

/// Splits `primary/mod/mod.adv;adv`. Uncertainty marks (`#`, `!`, `?`) are dropped.
inline EventParts split_event(std::string_view text)
{
    std::string clean;
    for (char c : text)
        if (c != '#' && c != '!' && c != '?' && c != ' ')
            clean.push_back(c);

    EventParts parts;
    std::string head = clean;
    if (auto dot = clean.find('.'); dot != std::string::npos) {
        head = clean.substr(0, dot);
        parts.advances = clean.substr(dot + 1);
    }
    int depth = 0;
    std::string cur;
    bool in_primary = true;
    auto flush = [&] {
        if (in_primary)
            parts.primary = cur;
        else if (!cur.empty())
            parts.modifiers.push_back(cur);
        cur.clear();
        in_primary = false;
    };
    for (char c : head) {
        if (c == '(')
            ++depth;
        else if (c == ')')
            --depth;
        if (c == '/' && depth == 0)
            flush();
        else
            cur.push_back(c);
    }
    flush();
    return parts;
}

namespace detail {

inline bool starts_with(std::string_view s, std::string_view p) { return s.substr(0, p.size()) == p; }

inline int base_code(char c)
{
    switch (c) {
    case 'B': return 0;
    case '1': return 1;
    case '2': return 2;
    case '3': return 3;
    case 'H': return 4;
    default: return -1;
    }
}

/// An "(E6)"-style group means the play was kept alive by an error.
inline bool group_has_error(std::string_view g)
{
    for (std::size_t i = 0; i + 1 < g.size(); ++i)
        if (g[i] == 'E' && std::isdigit(static_cast<unsigned char>(g[i + 1])))
            return true;
    return false;
}

/// Parenthesised groups following position `pos`; advances `pos` past them.
inline std::vector<std::string> read_groups(std::string_view s, std::size_t& pos)
{
    std::vector<std::string> groups;
    while (pos < s.size() && s[pos] == '(') {
        auto close = s.find(')', pos);
        if (close == std::string_view::npos)
            close = s.size();
        groups.emplace_back(s.substr(pos + 1, close - pos - 1));
        pos = close + 1;
    }
    return groups;
}

inline std::optional<std::vector<Advance>> parse_advances(std::string_view text)
{
    std::vector<Advance> out;
    std::size_t pos = 0;
    while (pos < text.size()) {
        if (text[pos] == ';') {
            ++pos;
            continue;
        }
        if (pos + 3 > text.size())
            return std::nullopt;
        Advance a;
        a.from = base_code(text[pos]);
        char kind = text[pos + 1];
        a.to = base_code(text[pos + 2]);
        if (a.from < 0 || a.from > 3 || a.to < 1 || (kind != '-' && kind != 'X'))
            return std::nullopt;
        pos += 3;
        auto groups = read_groups(text, pos);
        a.out = kind == 'X' && std::none_of(groups.begin(), groups.end(), group_has_error);
        out.push_back(a);
        if (pos < text.size() && text[pos] != ';')
            return std::nullopt;
    }
    return out;
}

} // namespace detail

enum class PrimaryKind {
    fielded_out,  // leading fielder digits, e.g. 63, 6(1)3, 8
    single,
    double_,
    triple,
    home_run,
    error,
    fielders_choice,
    strikeout,
    walk,
    intentional_walk,
    hit_by_pitch,
    interference,
    foul_error,
    no_play,
    stolen_base,
    caught_stealing,
    pickoff,
    pickoff_caught_stealing,
    wild_pitch,
    passed_ball,
    balk,
    defensive_indifference,
    other_advance,
    unknown,
};

/// Classifies the text before any `+` secondary event.
inline PrimaryKind primary_kind(std::string_view p)
{
    using detail::starts_with;
    if (p.empty())
        return PrimaryKind::unknown;
    if (std::isdigit(static_cast<unsigned char>(p[0])))
        return PrimaryKind::fielded_out;
    if (p == "NP") return PrimaryKind::no_play;
    if (starts_with(p, "POCS")) return PrimaryKind::pickoff_caught_stealing;
    if (starts_with(p, "PO")) return PrimaryKind::pickoff;
    if (starts_with(p, "PB")) return PrimaryKind::passed_ball;
    if (starts_with(p, "SB")) return PrimaryKind::stolen_base;
    if (starts_with(p, "CS")) return PrimaryKind::caught_stealing;
    if (starts_with(p, "WP")) return PrimaryKind::wild_pitch;
    if (starts_with(p, "BK")) return PrimaryKind::balk;
    if (starts_with(p, "DI")) return PrimaryKind::defensive_indifference;
    if (starts_with(p, "OA")) return PrimaryKind::other_advance;
    if (starts_with(p, "FLE")) return PrimaryKind::foul_error;
    if (starts_with(p, "FC")) return PrimaryKind::fielders_choice;
    if (starts_with(p, "HP")) return PrimaryKind::hit_by_pitch;
    if (starts_with(p, "IW")) return PrimaryKind::intentional_walk;
    if (starts_with(p, "DGR")) return PrimaryKind::double_;
    if (starts_with(p, "HR") || p == "H" || (p[0] == 'H' && p.size() > 1 && std::isdigit(static_cast<unsigned char>(p[1]))))
        return PrimaryKind::home_run;
    if (p[0] == 'K') return PrimaryKind::strikeout;
    if (p[0] == 'W') return PrimaryKind::walk;
    if (p[0] == 'I') return PrimaryKind::intentional_walk;
    if (p[0] == 'S') return PrimaryKind::single;
    if (p[0] == 'D') return PrimaryKind::double_;
    if (p[0] == 'T') return PrimaryKind::triple;
    if (p[0] == 'E') return PrimaryKind::error;
    if (p[0] == 'C') return PrimaryKind::interference;
    return PrimaryKind::unknown;
}

/// Batted balls that can land in fair territory.
inline bool in_fair_play(PrimaryKind k)
{
    switch (k) {
    case PrimaryKind::fielded_out:
    case PrimaryKind::single:
    case PrimaryKind::double_:
    case PrimaryKind::triple:
    case PrimaryKind::home_run:
    case PrimaryKind::error:
    case PrimaryKind::fielders_choice:
        return true;
    default:
        return false;
    }
}

/// Bunt modifiers: B, BG, BP, BL, BGDP, BPDP, optionally followed by a hit
/// location that starts with a digit (e.g. "BG15").
inline bool is_bunt_modifier(std::string_view m)
{
    static constexpr std::string_view kinds[] = {"BGDP", "BPDP", "BG", "BP", "BL", "B"};
    for (auto k : kinds) {
        if (m.substr(0, k.size()) != k)
            continue;
        auto rest = m.substr(k.size());
        return rest.empty() || std::isdigit(static_cast<unsigned char>(rest[0]));
    }
    return false;
}

/// True iff the play ended with a bunt in fair play. Squeeze, sacrifice and
/// bunt-for-hit attempts are not distinguished.
inline bool classify_bunt(std::string_view event_text)
{
    auto parts = split_event(event_text);
    auto plus = parts.primary.find('+');
    auto primary = std::string_view(parts.primary).substr(0, plus);
    if (!in_fair_play(primary_kind(primary)))
        return false;
    return std::any_of(parts.modifiers.begin(), parts.modifiers.end(),
                       [](const std::string& m) { return is_bunt_modifier(m); });
}

// ---------------------------------------------------------------------------
// Replay

namespace detail {

/// Per-runner resolution for one play. Index 0 is the batter, 1..3 the bases.
struct Movement {
    enum class Status { unassigned, stays, out, moves };
    std::array<Status, 4> status{Status::stays, Status::unassigned, Status::unassigned, Status::unassigned};
    std::array<int, 4> dest{0, 0, 0, 0};

    void move(int runner, int to)
    {
        status[runner] = Status::moves;
        dest[runner] = to;
    }
    void out(int runner) { status[runner] = Status::out; }
};

/// Runner events such as "SB2;SB3", "CS2(26)", "PO1(13)", "POCS2(1361)".
/// Returns false when the text is not a runner event.
inline bool apply_runner_events(std::string_view text, Movement& mv)
{
    std::size_t pos = 0;
    bool any = false;
    while (pos < text.size()) {
        if (text[pos] == ';') {
            ++pos;
            continue;
        }
        auto rest = text.substr(pos);
        int prefix = 0;
        enum { steal, caught, pick, pick_caught, plain } kind;
        if (starts_with(rest, "POCS")) { kind = pick_caught; prefix = 4; }
        else if (starts_with(rest, "PO")) { kind = pick; prefix = 2; }
        else if (starts_with(rest, "SB")) { kind = steal; prefix = 2; }
        else if (starts_with(rest, "CS")) { kind = caught; prefix = 2; }
        else if (starts_with(rest, "WP") || starts_with(rest, "PB") || starts_with(rest, "BK") ||
                 starts_with(rest, "DI") || starts_with(rest, "OA")) { kind = plain; prefix = 2; }
        else if (rest[0] == 'E' && rest.size() > 1 && std::isdigit(static_cast<unsigned char>(rest[1]))) {
            // K+E2 etc.: the error is recorded, runners move only by explicit advances
            pos += 2;
            any = true;
            continue;
        }
        else return false;
        pos += prefix;
        if (kind == plain) {
            detail::read_groups(text, pos);
            any = true;
            continue;
        }
        if (pos >= text.size())
            return false;
        int base = base_code(text[pos]);
        if (base < 1)
            return false;
        ++pos;
        auto groups = read_groups(text, pos);
        bool error = std::any_of(groups.begin(), groups.end(), group_has_error);
        switch (kind) {
        case steal: mv.move(base - 1, base); break;
        case caught:
        case pick_caught:
            if (!error) mv.out(base - 1);
            break;
        case pick:
            if (!error) mv.out(base);
            break;
        default: break;
        }
        any = true;
    }
    return any;
}

/// Fielded-out primaries such as "63", "6(1)3", "64(1)", "8(B)84(2)", "6E3".
inline void apply_fielded(std::string_view p, Movement& mv)
{
    bool batter_named = false;
    bool any_group = false;
    bool error = false;
    std::size_t pos = 0;
    while (pos < p.size()) {
        if (p[pos] == '(') {
            auto groups = read_groups(p, pos);
            for (const auto& g : groups) {
                any_group = true;
                int b = g.empty() ? -1 : base_code(g[0]);
                if (b == 0)
                    batter_named = true;
                if (b >= 0 && b <= 3)
                    mv.out(b);
            }
            continue;
        }
        if (p[pos] == 'E')
            error = true;
        ++pos;
    }
    if (batter_named)
        return;
    if (error) {
        mv.move(0, 1);
        return;
    }
    // "64(1)" is a force with the batter safe; "64(1)3" also retires the batter.
    bool ends_in_group = !p.empty() && p.back() == ')';
    if (any_group && ends_in_group)
        mv.move(0, 1);
    else
        mv.out(0);
}

} // namespace detail

/// Replays a game play by play. Explicit advances override implied ones;
/// forced runners move up when they have no explicit advance. Halves past
/// regulation start with a runner on second from 2020 on.
inline std::vector<PlayContext> replay_game(const GameAccount& game)
{
    using detail::Movement;
    using Status = Movement::Status;

    std::vector<PlayContext> out;
    out.reserve(game.plays.size());
    int score[2] = {0, 0};  // away, home
    BaseOutState state;
    int cur_inning = 0;
    int cur_half = -1;
    const int regulation = game.scheduled_innings();

    for (std::size_t i = 0; i < game.plays.size(); ++i) {
        const auto& play = game.plays[i];
        auto fail = [&](const std::string& what) { return ReplayError(game.game_id, i, what, play.line); };

        const int half = int(play.half);
        if (play.inning != cur_inning || half != cur_half) {
            if (play.inning < cur_inning || (play.inning == cur_inning && half < cur_half))
                throw fail("play out of inning order");
            cur_inning = play.inning;
            cur_half = half;
            state = BaseOutState{};
            if (play.inning > regulation && game.season >= 2020)
                state.second = true;
        }

        PlayContext ctx;
        ctx.play_index = i;
        ctx.inning = play.inning;
        ctx.half = play.half;
        ctx.state_before = state;
        ctx.score_away = score[0];
        ctx.score_home = score[1];
        ctx.bunt_flag = classify_bunt(play.event_text);

        auto parts = split_event(play.event_text);
        auto plus = parts.primary.find('+');
        std::string_view primary = std::string_view(parts.primary).substr(0, plus);
        std::string_view secondary =
            plus == std::string::npos ? std::string_view{} : std::string_view(parts.primary).substr(plus + 1);
        auto kind = primary_kind(primary);

        if (kind == PrimaryKind::no_play) {
            ctx.state_after = state;
            out.push_back(ctx);
            continue;
        }
        if (state.outs >= 3)
            throw fail("play after the third out");

        Movement mv;
        switch (kind) {
        case PrimaryKind::fielded_out: detail::apply_fielded(primary, mv); break;
        case PrimaryKind::single:
        case PrimaryKind::error:
        case PrimaryKind::fielders_choice:
        case PrimaryKind::walk:
        case PrimaryKind::intentional_walk:
        case PrimaryKind::hit_by_pitch:
        case PrimaryKind::interference: mv.move(0, 1); break;
        case PrimaryKind::double_: mv.move(0, 2); break;
        case PrimaryKind::triple: mv.move(0, 3); break;
        case PrimaryKind::home_run: mv.move(0, 4); break;
        case PrimaryKind::strikeout: mv.out(0); break;
        case PrimaryKind::foul_error: break;
        case PrimaryKind::stolen_base:
        case PrimaryKind::caught_stealing:
        case PrimaryKind::pickoff:
        case PrimaryKind::pickoff_caught_stealing:
        case PrimaryKind::wild_pitch:
        case PrimaryKind::passed_ball:
        case PrimaryKind::balk:
        case PrimaryKind::defensive_indifference:
        case PrimaryKind::other_advance:
            if (!detail::apply_runner_events(parts.primary, mv))
                throw fail("unrecognized runner event '" + parts.primary + "'");
            break;
        default: throw fail("unrecognized event '" + play.event_text + "'");
        }
        if (!secondary.empty() &&
            (kind == PrimaryKind::strikeout || kind == PrimaryKind::walk || kind == PrimaryKind::intentional_walk)) {
            if (!detail::apply_runner_events(secondary, mv))
                throw fail("unrecognized secondary event '" + std::string(secondary) + "'");
        }

        // Runners named by an implied event must exist.
        for (int b = 1; b <= 3; ++b)
            if (mv.status[b] != Status::unassigned && !state.occupied(b))
                throw fail("event moves a runner from empty base " + std::to_string(b));

        auto advances = detail::parse_advances(parts.advances);
        if (!advances)
            throw fail("malformed advance list '" + parts.advances + "'");
        for (const auto& a : *advances) {
            if (a.from >= 1 && !state.occupied(a.from))
                throw fail("advance from unoccupied base " + std::to_string(a.from));
            if (!a.out && a.to < a.from)
                throw fail("runner moves backward from base " + std::to_string(a.from));
            if (a.out)
                mv.out(a.from);
            else
                mv.move(a.from, a.to);
        }

        // Resolve unassigned runners: hold, unless pushed by a runner behind.
        std::array<bool, 5> taken{};
        if (mv.status[0] == Status::moves && mv.dest[0] <= 3)
            taken[mv.dest[0]] = true;
        for (int b = 1; b <= 3; ++b) {
            if (!state.occupied(b))
                continue;
            if (mv.status[b] == Status::unassigned) {
                int d = b;
                while (d <= 3 && taken[d])
                    ++d;
                if (d == b)
                    mv.status[b] = Status::stays, mv.dest[b] = b;
                else
                    mv.move(b, d);
            }
            if (mv.status[b] == Status::stays || mv.status[b] == Status::moves) {
                int d = mv.status[b] == Status::stays ? b : mv.dest[b];
                if (d <= 3) {
                    if (taken[d])
                        throw fail("two runners end on base " + std::to_string(d));
                    taken[d] = true;
                }
            }
        }

        int outs = state.outs;
        int runs = 0;
        BaseOutState after;
        for (int r = 0; r <= 3; ++r) {
            if (r >= 1 && !state.occupied(r))
                continue;
            switch (mv.status[r]) {
            case Status::out: ++outs; break;
            case Status::moves:
                if (mv.dest[r] == 4)
                    ++runs;
                else
                    after.set(mv.dest[r], true);
                break;
            case Status::stays:
                if (r >= 1)
                    after.set(r, true);
                break;
            case Status::unassigned: break;
            }
        }
        if (outs > 3)
            throw fail("more than three outs in the half-inning");
        after.outs = outs;
        if (outs == 3)
            after.first = after.second = after.third = false;

        ctx.runs_on_play = runs;
        ctx.state_after = after;
        ctx.is_plate_appearance_end = mv.status[0] != Status::stays;
        score[half] += runs;
        state = after;
        out.push_back(ctx);
    }
    return out;
}

/// Sets the final line score from a replay of the same game.
inline void attach_final_score(GameAccount& game, const std::vector<PlayContext>& contexts)
{
    int home = 0, away = 0;
    for (const auto& c : contexts)
        (c.half == Half::bottom ? home : away) += c.runs_on_play;
    game.final_home_runs = home;
    game.final_away_runs = away;
}

/// Debug dump with the columns
/// game_id,play_index,inning,half,outs,b1,b2,b3,score_away,score_home,event_text,bunt_flag
/// describing the state before each play.
inline void write_context_csv_header(std::ostream& os)
{
    os << "game_id,play_index,inning,half,outs,b1,b2,b3,score_away,score_home,event_text,bunt_flag\n";
}

inline void write_context_csv(std::ostream& os, const GameAccount& game, const std::vector<PlayContext>& contexts)
{
    for (const auto& c : contexts) {
        const auto& s = c.state_before;
        os << game.game_id << ',' << c.play_index << ',' << c.inning << ',' << int(c.half) << ',' << s.outs << ','
           << int(s.first) << ',' << int(s.second) << ',' << int(s.third) << ',' << c.score_away << ','
           << c.score_home << ',' << csv::escape(game.plays[c.play_index].event_text) << ','
           << int(c.bunt_flag) << '\n';
    }
}

// ---------------------------------------------------------------------------
// Pitch sequences

/// Counts bunt attempts (L foul bunt, M missed bunt, O foul tip on bunt),
/// swings (S, F, T, Q) and taken pitches (B, C, I, P, V, H). The final X is
/// a bunt attempt when the play ended in a bunt, a swing otherwise. Display
/// markers and pickoff throws are ignored.
inline PitchProfile pitch_profile(std::string_view pitches, bool bunt_flag)
{
    PitchProfile prof;
    bool any = false;
    for (char c : pitches) {
        switch (c) {
        case 'L': case 'M': case 'O':
            ++prof.bunt_attempt_pitches, any = true;
            break;
        case 'S': case 'F': case 'T': case 'Q':
            ++prof.swing_pitches, any = true;
            break;
        case 'X':
            ++(bunt_flag ? prof.bunt_attempt_pitches : prof.swing_pitches), any = true;
            break;
        case 'B': case 'C': case 'I': case 'P': case 'V': case 'H':
            ++prof.taken_pitches, any = true;
            break;
        case 'K': case 'U': case 'Y': case 'R':
            any = true;  // real pitch, strategy unknown
            break;
        default: break;  // N (no pitch), *, +, >, ., 1-3 markers
        }
    }
    prof.unknown = !any;
    prof.switched_strategy = prof.bunt_attempt_pitches >= 1 && prof.swing_pitches >= 1;
    return prof;
}

} // namespace walkoff::retrosheet
