#include "hyperbandit/temporal.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "hyperbandit/errors.hpp"

namespace hyperbandit {

TimePeriod::TimePeriod(int p) : p_(p) {
    if (p < 0 || p >= kNumPeriods)
        throw OutOfRange("time period " + std::to_string(p) + " outside [0, 34]");
}

TimePeriod period_of(int day, int block) {
    if (day < 0 || day >= kDaysPerWeek)
        throw OutOfRange("day " + std::to_string(day) + " outside [0, 6]");
    if (block < 0 || block >= kBlocksPerDay)
        throw OutOfRange("block " + std::to_string(block) + " outside [0, 4]");
    return TimePeriod(kBlocksPerDay * day + block);
}

TimePeriod period_of_timestamp(std::int64_t seconds_since_epoch) {
    constexpr std::int64_t kDay = 86400;
    std::int64_t days = seconds_since_epoch / kDay;
    std::int64_t secs = seconds_since_epoch % kDay;
    if (secs < 0) {
        secs += kDay;
        days -= 1;
    }
    // 1970-01-01 was a Thursday (Monday-based index 3).
    const int day = static_cast<int>(((days + 3) % 7 + 7) % 7);

    const std::int64_t minute = secs / 60;
    int block = 4;
    if (minute >= 8 * 60 && minute < 11 * 60 + 30) block = 0;
    else if (minute >= 11 * 60 + 30 && minute < 14 * 60) block = 1;
    else if (minute >= 14 * 60 && minute < 17 * 60 + 30) block = 2;
    else if (minute >= 17 * 60 + 30 && minute < 22 * 60) block = 3;
    return period_of(day, block);
}

CycleSpec CycleSpec::weekly_daily() {
    return CycleSpec{{
        Cycle{kDaysPerWeek, [](TimePeriod p) { return p.day(); }},
        Cycle{kBlocksPerDay, [](TimePeriod p) { return p.block(); }},
    }};
}

double phase(TimePeriod p, int cycle_index, const CycleSpec& spec) {
    if (cycle_index < 0 || static_cast<std::size_t>(cycle_index) >= spec.size())
        throw OutOfRange("cycle index " + std::to_string(cycle_index) + " out of range");
    const Cycle& c = spec.cycles[static_cast<std::size_t>(cycle_index)];
    const int pos = c.position_of(p);
    if (pos < 0 || pos >= c.length) throw OutOfRange("cycle position out of range");
    return static_cast<double>(pos + 1) / static_cast<double>(c.length);
}

Vector euler_embed(TimePeriod p, const CycleSpec& spec) {
    Vector s;
    s.reserve(2 * spec.size());
    for (std::size_t i = 0; i < spec.size(); ++i) {
        const double angle = 2.0 * std::numbers::pi * phase(p, static_cast<int>(i), spec);
        s.push_back(std::cos(angle));
        s.push_back(std::sin(angle));
    }
    return s;
}

Vector one_hot_embed(TimePeriod p) {
    Vector v(kNumPeriods, 0.0);
    v[static_cast<std::size_t>(p.value())] = 1.0;
    return v;
}

Vector embed(TimePeriod p, EmbeddingMode mode) {
    return mode == EmbeddingMode::Euler ? euler_embed(p) : one_hot_embed(p);
}

std::size_t embedding_dim(EmbeddingMode mode) {
    return mode == EmbeddingMode::Euler ? 2 * CycleSpec::weekly_daily().size()
                                        : static_cast<std::size_t>(kNumPeriods);
}

}  // namespace hyperbandit
