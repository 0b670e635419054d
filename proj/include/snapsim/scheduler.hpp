#pragma once

#include <array>
#include <cstdint>

#include "snapsim/corpus.hpp"
#include "snapsim/errors.hpp"
#include "snapsim/rng.hpp"

namespace snapsim {

inline constexpr std::int64_t kSecondsPerDay = 86400;

// All hour math is UTC; the source data carries no timezone.
inline int utc_hour(std::int64_t ts) {
    std::int64_t sec = ((ts % kSecondsPerDay) + kSecondsPerDay) % kSecondsPerDay;
    return int(sec / 3600);
}

struct ActivityHistogram {
    std::array<std::int64_t, 24> bins{};
    std::int64_t total = 0;
};

inline ActivityHistogram activity_histogram(const Timeline& timeline) {
    ActivityHistogram h;
    for (const auto& p : timeline.posts) {
        ++h.bins[utc_hour(p.created_at)];
        ++h.total;
    }
    return h;
}

struct PostSchedule {
    int hour = 0;   // [0,23]
    int minute = 0; // [0,59]
};

// Hour = smallest argmax of the histogram; minute uniform from the seed.
inline PostSchedule pick_post_time(const ActivityHistogram& hist, std::uint64_t rng_seed) {
    if (hist.total == 0) throw NoHistory();
    int best = 0;
    for (int h = 1; h < 24; ++h)
        if (hist.bins[h] > hist.bins[best]) best = h;
    Rng rng(rng_seed);
    return PostSchedule{best, int(rng.below(60))};
}

// First timestamp >= from that lands on hour:minute (UTC), second 0.
inline std::int64_t next_occurrence(std::int64_t from, int hour, int minute) {
    std::int64_t day_start = from - ((from % kSecondsPerDay) + kSecondsPerDay) % kSecondsPerDay;
    std::int64_t candidate = day_start + std::int64_t(hour) * 3600 + std::int64_t(minute) * 60;
    while (candidate < from) candidate += kSecondsPerDay;
    return candidate;
}

} // namespace snapsim
