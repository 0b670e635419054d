#include <doctest.h>

#include <atomic>
#include <set>
#include <thread>

#include "snapsim/linktrack.hpp"
#include "testutil.hpp"

using namespace snapsim;

namespace {

ClassifyRules shipped_rules() {
    return ClassifyRules::load(testutil::data_path("crawler_agents.txt"),
                               testutil::data_path("crawler_countries.txt"));
}

ClickEvent click(const std::string& code, std::int64_t ts,
                 std::optional<std::string> referrer, const std::string& country,
                 const std::string& ua = "Mozilla/5.0 (Macintosh) Safari/605.1") {
    return ClickEvent{code, ts, std::move(referrer), country, ua};
}

} // namespace

TEST_CASE("shorten appends the screen_name parameter") {
    LinkStore store(1);
    auto link = store.shorten("https://www.google.com/", "alice", 100);
    CHECK(link.destination == "https://www.google.com/?screen_name=alice");
    CHECK(link.code.size() == 6);
    CHECK(link.target_handle == "alice");

    auto with_query = store.shorten("https://www.google.com/?x=1", "bob", 100);
    CHECK(with_query.destination == "https://www.google.com/?x=1&screen_name=bob");
}

TEST_CASE("shorten is idempotent and salt-keyed") {
    LinkStore store(42);
    auto a = store.shorten("https://www.google.com/", "alice", 1);
    auto b = store.shorten("https://www.google.com/", "alice", 2);
    CHECK(a.code == b.code);
    CHECK(store.all_links().size() == 1);

    LinkStore other(43);
    auto c = other.shorten("https://www.google.com/", "alice", 1);
    CHECK(c.code != a.code); // different campaign salt, different code space
}

TEST_CASE("shorten: 10k distinct handles give 10k distinct codes") {
    LinkStore store(7);
    std::set<std::string> codes;
    for (int i = 0; i < 10000; ++i)
        codes.insert(store.shorten("https://www.google.com/", "h" + std::to_string(i), 0).code);
    CHECK(codes.size() == 10000);
}

TEST_CASE("record_click validation and report") {
    LinkStore store(3);
    auto link = store.shorten("https://www.google.com/", "alice", 1000);

    store.record_click(click(link.code, 1500, "t.co", "DE"));
    auto [total, events] = store.link_report(link.code);
    CHECK(total == 1);
    CHECK(events[0].country == "DE");

    CHECK_THROWS_AS(store.record_click(click("zzzzzz", 1500, {}, "DE")), UnknownCode);
    CHECK_THROWS_AS(store.record_click(click(link.code, 999, {}, "DE")), InvalidClick);
    CHECK_THROWS_AS(store.record_click(click(link.code, 1500, {}, "DEU")), InvalidClick);
    CHECK_THROWS_AS(store.link_report("zzzzzz"), UnknownCode);
}

TEST_CASE("link_report returns events in timestamp order") {
    LinkStore store(3);
    auto link = store.shorten("https://www.google.com/", "alice", 0);
    store.record_click(click(link.code, 300, {}, "DE"));
    store.record_click(click(link.code, 100, "t.co", "FR"));
    store.record_click(click(link.code, 200, {}, "JP"));
    auto [total, events] = store.link_report(link.code);
    REQUIRE(total == 3);
    // oracle: sort a copy of the inputs by ts
    std::vector<std::int64_t> expect{100, 200, 300};
    for (std::size_t i = 0; i < events.size(); ++i) CHECK(events[i].ts == expect[i]);
    CHECK((store.link_report(link.code).second.size() == 3)); // idempotent read
}

TEST_CASE("record_click: 1000 interleaved recorders sum exactly") {
    LinkStore store(9);
    auto link = store.shorten("https://www.google.com/", "alice", 0);
    std::vector<std::thread> workers;
    std::atomic<int> failures{0};
    for (int w = 0; w < 8; ++w) {
        workers.emplace_back([&, w] {
            for (int i = 0; i < 125; ++i) {
                try {
                    store.record_click(click(link.code, 10 + w * 1000 + i, "t.co", "DE"));
                } catch (...) {
                    ++failures;
                }
            }
        });
    }
    for (auto& t : workers) t.join();
    CHECK(failures == 0);
    CHECK(store.link_report(link.code).first == 1000);
}

TEST_CASE("classify_clicks rule precedence") {
    auto rules = shipped_rules();
    SUBCASE("t.co referrer is human even from a bot UA") {
        auto c = classify_clicks({click("c", 1, "t.co", "US", "Googlebot/2.1")}, rules);
        CHECK(c.human == 1);
        CHECK(c.total() == 1);
    }
    SUBCASE("crawler agent matches") {
        auto c = classify_clicks({click("c", 1, {}, "FR", "Googlebot/2.1 (+http://www.google.com/bot.html)")},
                                 rules);
        CHECK(c.crawler == 1);
    }
    SUBCASE("unique non-bot-origin country is likely human") {
        auto c = classify_clicks({click("c", 1, {}, "AT")}, rules);
        CHECK(c.likely_human == 1);
    }
    SUBCASE("unique bot-origin country stays unknown") {
        auto c = classify_clicks({click("c", 1, {}, "SG")}, rules);
        CHECK(c.unknown == 1);
    }
    SUBCASE("repeated country stays unknown") {
        auto c = classify_clicks({click("c", 1, {}, "AT"), click("c", 2, {}, "AT")}, rules);
        CHECK(c.unknown == 2);
        CHECK(c.likely_human == 0);
    }
}

TEST_CASE("classify_clicks: constructed 90-event campaign fixture") {
    auto rules = shipped_rules();
    // 27 official-redirector clicks, 32 unique-country clicks, 20 crawler
    // fetches, 11 shared-country leftovers
    const char* unique_countries[32] = {
        "AR", "AT", "AU", "BE", "BG", "BR", "CA", "CH", "CL", "CO", "CZ",
        "DE", "DK", "EE", "ES", "FI", "FR", "GB", "GR", "HR", "HU", "IL",
        "IN", "IT", "JP", "KR", "LT", "LV", "MX", "NO", "NZ", "PL"};
    std::vector<ClickEvent> events;
    for (int i = 0; i < 27; ++i) events.push_back(click("c", 10 + i, "t.co", "US"));
    for (int i = 0; i < 32; ++i) events.push_back(click("c", 100 + i, {}, unique_countries[i]));
    for (int i = 0; i < 20; ++i)
        events.push_back(click("c", 200 + i, {}, "US", "PlatformBot/1.1 (+link-safety-scan)"));
    for (int i = 0; i < 11; ++i) events.push_back(click("c", 300 + i, {}, "PT"));
    REQUIRE(events.size() == 90);

    auto c = classify_clicks(events, rules);
    CHECK(c.human == 27);
    CHECK(c.likely_human == 32);
    CHECK(c.crawler == 20);
    CHECK(c.unknown == 11);
    CHECK(c.total() == 90);

    auto [lower, upper] = ctr_bounds(90, c);
    CHECK(lower == doctest::Approx(0.300).epsilon(1e-9));
    CHECK(upper == doctest::Approx(59.0 / 90.0).epsilon(1e-9));
    // to three decimals: the 30%..66% band this fixture is built around
    CHECK(std::round(lower * 1000) / 1000 == doctest::Approx(0.300));
    CHECK(std::round(upper * 1000) / 1000 == doctest::Approx(0.656));
}

TEST_CASE("classify_clicks partitions arbitrary event sets") {
    auto rules = shipped_rules();
    Rng rng(77);
    const char* countries[6] = {"US", "DE", "FR", "JP", "BR", "SG"};
    for (int trial = 0; trial < 40; ++trial) {
        std::vector<ClickEvent> events;
        const std::size_t n = rng.below(60);
        for (std::size_t i = 0; i < n; ++i) {
            std::optional<std::string> ref;
            if (rng.below(3) == 0) ref = "t.co";
            if (rng.below(5) == 0) ref = "news.site";
            const std::string ua = rng.below(4) == 0 ? "curl/8.0" : "Mozilla/5.0 Safari";
            events.push_back(click("c", std::int64_t(i), ref, countries[rng.below(6)], ua));
        }
        auto c = classify_clicks(events, rules);
        CHECK(c.total() == std::int64_t(events.size()));
        CHECK(c.human >= 0);
        CHECK(c.likely_human >= 0);
        CHECK(c.crawler >= 0);
        CHECK(c.unknown >= 0);
    }
}

TEST_CASE("ctr_bounds arithmetic and errors") {
    ClickClassification zero;
    auto [l0, u0] = ctr_bounds(10, zero);
    CHECK(l0 == 0.0);
    CHECK(u0 == 0.0);

    ClickClassification all;
    all.human = 10;
    auto [l1, u1] = ctr_bounds(10, all);
    CHECK(l1 == 1.0);
    CHECK(u1 == 1.0);

    ClickClassification too_many;
    too_many.human = 7;
    too_many.likely_human = 5;
    CHECK_THROWS_AS(ctr_bounds(10, too_many), InvalidCounts);
    CHECK_THROWS_AS(ctr_bounds(0, zero), InvalidCounts);

    // monotonicity: adding a human click never lowers either bound
    Rng rng(13);
    for (int trial = 0; trial < 200; ++trial) {
        ClickClassification c;
        const std::int64_t posts = 1 + std::int64_t(rng.below(50));
        c.human = std::int64_t(rng.below(std::uint64_t(posts)));
        c.likely_human = std::int64_t(rng.below(std::uint64_t(posts - c.human + 1)));
        auto [lo, hi] = ctr_bounds(posts, c);
        CHECK(lo <= hi);
        CHECK(hi <= 1.0);
        if (c.human + c.likely_human < posts) {
            ClickClassification more = c;
            more.human += 1;
            auto [lo2, hi2] = ctr_bounds(posts, more);
            CHECK(lo2 >= lo);
            CHECK(hi2 >= hi);
        }
    }
}
