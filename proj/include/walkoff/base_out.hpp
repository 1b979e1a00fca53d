#pragma once

#include <compare>
#include <string>

namespace walkoff {

/// Base occupancy plus outs. `outs == 3` only appears as a terminal state.
struct BaseOutState {
    bool first = false;
    bool second = false;
    bool third = false;
    int outs = 0;

    friend constexpr auto operator<=>(const BaseOutState&, const BaseOutState&) = default;

    constexpr int runners() const noexcept { return int(first) + int(second) + int(third); }

    /// 0..7: first=1, second=2, third=4.
    constexpr int base_code() const noexcept { return int(first) | int(second) << 1 | int(third) << 2; }

    /// 0..23 for live states.
    constexpr int index() const noexcept { return outs * 8 + base_code(); }

    static constexpr BaseOutState from_index(int idx) noexcept
    {
        return {bool(idx & 1), bool(idx & 2), bool(idx & 4), idx / 8};
    }

    constexpr bool occupied(int base) const noexcept
    {
        return base == 1 ? first : base == 2 ? second : base == 3 ? third : false;
    }

    constexpr void set(int base, bool on) noexcept
    {
        if (base == 1) first = on;
        else if (base == 2) second = on;
        else if (base == 3) third = on;
    }

    /// e.g. "1_3 1 out", "___ 0 outs".
    std::string label() const
    {
        std::string s;
        s += first ? '1' : '_';
        s += second ? '2' : '_';
        s += third ? '3' : '_';
        s += ' ';
        s += std::to_string(outs);
        s += outs == 1 ? " out" : " outs";
        return s;
    }
};

inline constexpr int kLiveStates = 24;

} // namespace walkoff
