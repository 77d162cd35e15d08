// Discrete weekly time periods and their embeddings.
//
// A week is 7 days of 5 blocks each: morning, noon, afternoon, night and the
// remaining hours. Period p = 5 * day + block, day 0 being Monday.
#pragma once

#include <cstdint>
#include <vector>

#include "hyperbandit/numerics.hpp"

namespace hyperbandit {

inline constexpr int kDaysPerWeek = 7;
inline constexpr int kBlocksPerDay = 5;
inline constexpr int kNumPeriods = kDaysPerWeek * kBlocksPerDay;

class TimePeriod {
public:
    constexpr TimePeriod() = default;
    /// Throws OutOfRange unless 0 <= p < 35.
    explicit TimePeriod(int p);

    constexpr int value() const noexcept { return p_; }
    constexpr int day() const noexcept { return p_ / kBlocksPerDay; }
    constexpr int block() const noexcept { return p_ % kBlocksPerDay; }

    friend constexpr bool operator==(TimePeriod, TimePeriod) = default;
    friend constexpr auto operator<=>(TimePeriod, TimePeriod) = default;

private:
    int p_ = 0;
};

TimePeriod period_of(int day, int block);

/// Maps seconds since the Unix epoch (UTC) to a period. Blocks:
/// 08:00-11:30, 11:30-14:00, 14:00-17:30, 17:30-22:00, everything else.
TimePeriod period_of_timestamp(std::int64_t seconds_since_epoch);

/// One cycle of a CycleSpec: its length and the 0-based position of a period
/// within it.
struct Cycle {
    int length = 1;
    int (*position_of)(TimePeriod) = nullptr;
};

struct CycleSpec {
    std::vector<Cycle> cycles;

    std::size_t size() const noexcept { return cycles.size(); }

    /// The weekly and daily cycles.
    static CycleSpec weekly_daily();
};

inline constexpr int kWeeklyCycle = 0;
inline constexpr int kDailyCycle = 1;

/// Relative position of p in the given cycle: (position + 1) / length, in (0, 1].
double phase(TimePeriod p, int cycle_index, const CycleSpec& spec = CycleSpec::weekly_daily());

/// [cos 2πa_1, sin 2πa_1, ..., cos 2πa_m, sin 2πa_m]
Vector euler_embed(TimePeriod p, const CycleSpec& spec = CycleSpec::weekly_daily());

Vector one_hot_embed(TimePeriod p);

enum class EmbeddingMode { Euler, OneHot };

Vector embed(TimePeriod p, EmbeddingMode mode);
std::size_t embedding_dim(EmbeddingMode mode);

}  // namespace hyperbandit
