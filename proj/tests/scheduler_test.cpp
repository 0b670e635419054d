#include <doctest.h>

#include <algorithm>
#include <set>

#include "snapsim/scheduler.hpp"
#include "testutil.hpp"

using namespace snapsim;

TEST_CASE("activity_histogram bins by UTC hour") {
    Timeline t{"u1", {}};
    // 22:05, 22:40, 07:10 UTC on 2017-07-14
    t.posts.push_back(testutil::make_post("p1", "u1", "x", 1500069900));
    t.posts.push_back(testutil::make_post("p2", "u1", "x", 1500072000));
    t.posts.push_back(testutil::make_post("p3", "u1", "x", 1500016200));
    auto h = activity_histogram(t);
    CHECK(h.bins[22] == 2);
    CHECK(h.bins[7] == 1);
    CHECK(h.total == 3);
    std::int64_t others = 0;
    for (int i = 0; i < 24; ++i)
        if (i != 22 && i != 7) others += h.bins[i];
    CHECK(others == 0);
}

TEST_CASE("activity_histogram: empty timeline and count oracle") {
    auto empty = activity_histogram(Timeline{"u1", {}});
    CHECK(empty.total == 0);
    for (auto b : empty.bins) CHECK(b == 0);

    Rng rng(15);
    Timeline big{"u1", {}};
    for (int i = 0; i < 10000; ++i)
        big.posts.push_back(testutil::make_post("p" + std::to_string(i), "u1", "x",
                                                1500000000 + std::int64_t(rng.below(864000))));
    auto h = activity_histogram(big);
    CHECK(h.total == 10000);
    std::int64_t sum = 0;
    for (auto b : h.bins) sum += b;
    CHECK(sum == 10000);
}

TEST_CASE("activity_histogram invariant under permutation") {
    Rng rng(31);
    Timeline t{"u1", {}};
    for (int i = 0; i < 300; ++i)
        t.posts.push_back(testutil::make_post("p" + std::to_string(i), "u1", "x",
                                              1500000000 + std::int64_t(rng.below(500000))));
    auto base = activity_histogram(t);
    Timeline shuffled = t;
    for (std::size_t i = shuffled.posts.size(); i > 1; --i)
        std::swap(shuffled.posts[i - 1], shuffled.posts[rng.below(i)]);
    auto after = activity_histogram(shuffled);
    CHECK(base.bins == after.bins);
    CHECK(base.total == after.total);
}

TEST_CASE("pick_post_time: peak hour 22 fixture") {
    ActivityHistogram h;
    // evening-heavy shape peaking at hour 22
    const std::int64_t shape[24] = {1, 0, 0, 0, 0, 0, 1, 2, 3, 4,  4,  5,
                                    5, 6, 6, 7, 8, 9, 12, 15, 18, 22, 40, 20};
    for (int i = 0; i < 24; ++i) {
        h.bins[i] = shape[i];
        h.total += shape[i];
    }
    auto s = pick_post_time(h, 7);
    CHECK(s.hour == 22);
    CHECK(s.minute >= 0);
    CHECK(s.minute <= 59);
}

TEST_CASE("pick_post_time: trivial and tie cases") {
    ActivityHistogram all_zero;
    CHECK_THROWS_AS(pick_post_time(all_zero, 1), NoHistory);

    ActivityHistogram hour0;
    hour0.bins[0] = 5;
    hour0.total = 5;
    CHECK(pick_post_time(hour0, 2).hour == 0);

    ActivityHistogram tie;
    tie.bins[3] = 4;
    tie.bins[7] = 4;
    tie.total = 8;
    CHECK(pick_post_time(tie, 3).hour == 3); // smallest argmax wins
}

TEST_CASE("pick_post_time: hour stability and minute coverage over 10k seeds") {
    ActivityHistogram h;
    h.bins[13] = 9;
    h.bins[2] = 3;
    h.total = 12;
    std::set<int> minutes;
    for (std::uint64_t seed = 0; seed < 10000; ++seed) {
        auto s = pick_post_time(h, seed);
        CHECK(s.hour == 13);
        minutes.insert(s.minute);
    }
    CHECK(minutes.size() == 60); // every minute occurs
    CHECK(*minutes.begin() == 0);
    CHECK(*minutes.rbegin() == 59);
}

TEST_CASE("pick_post_time: argmax property over randomized histograms") {
    Rng rng(2025);
    for (int trial = 0; trial < 1000; ++trial) {
        ActivityHistogram h;
        for (int i = 0; i < 24; ++i) {
            h.bins[i] = std::int64_t(rng.below(20));
            h.total += h.bins[i];
        }
        if (h.total == 0) {
            CHECK_THROWS_AS(pick_post_time(h, rng.next_u64()), NoHistory);
            continue;
        }
        auto s = pick_post_time(h, rng.next_u64());
        for (int j = 0; j < 24; ++j) CHECK(h.bins[s.hour] >= h.bins[j]);
        for (int j = 0; j < s.hour; ++j) CHECK(h.bins[j] < h.bins[s.hour]);
    }
}

TEST_CASE("next_occurrence lands on the requested slot") {
    const std::int64_t t0 = 1500000000; // 02:40:00 UTC
    CHECK(utc_hour(t0) == 2);
    const std::int64_t at = next_occurrence(t0, 22, 15);
    CHECK(utc_hour(at) == 22);
    CHECK((at / 60) % 60 == 15);
    CHECK(at >= t0);
    CHECK(at - t0 < kSecondsPerDay);
    // already past today: rolls to tomorrow
    const std::int64_t early = next_occurrence(t0, 1, 0);
    CHECK(early > t0);
    CHECK(utc_hour(early) == 1);
}
