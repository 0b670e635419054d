#include <doctest.h>

#include "snapsim/campaign.hpp"
#include "snapsim/simnet.hpp"
#include "testutil.hpp"

using namespace snapsim;

// Corrupted or hostile inputs must surface typed errors, never crashes.

TEST_CASE("corrupted jsonl inputs raise typed errors") {
    CHECK_THROWS_AS(load_users(testutil::write_file("garbage.jsonl", "not json\n")),
                    MalformedRecord);
    CHECK_THROWS_AS(load_users(testutil::write_file("arr.jsonl", "[1,2,3]\n")), MalformedRecord);
    CHECK_THROWS_AS(
        load_users(testutil::write_file("v2.jsonl", R"({"v":2,"user_id":"u","handle":"h"})")),
        MalformedRecord);
    CHECK_THROWS_AS(load_users("/nonexistent/users.jsonl"), Error);
    CHECK_THROWS_AS(
        load_users(testutil::write_file(
            "neg.jsonl",
            R"({"v":1,"user_id":"u","handle":"h","bio_text":"","follower_count":-1,)"
            R"("following_count":0,"post_count":0,"created_at":1,"default_profile":true,)"
            R"("default_avatar":true,"verified":false})")),
        MalformedRecord);
}

TEST_CASE("corrupted campaign logs raise typed errors") {
    CHECK_THROWS_AS(CampaignLog::load(testutil::write_file("empty.log", "")), ConfigError);
    CHECK_THROWS_AS(CampaignLog::load(testutil::write_file("junk.log", "junk\n")),
                    MalformedRecord);
    CHECK_THROWS_AS(
        CampaignLog::load(testutil::write_file("kind.log", R"({"kind":"mystery"})")),
        MalformedRecord);
    // click lines alone, without a campaign header, are not a log
    CHECK_THROWS_AS(
        CampaignLog::load(testutil::write_file(
            "headless.log",
            R"({"kind":"click","code":"x","ts":1,"referrer":null,"country":"US","user_agent":"ua"})")),
        ConfigError);
}

TEST_CASE("corrupted model checkpoints are rejected") {
    CHECK_THROWS_AS(LstmModel::load(testutil::write_file("bad.bin", "BADMAGIC????")),
                    ConfigError);
    CHECK_THROWS_AS(LstmModel::load(testutil::write_file("trunc.bin", "SNAPLM01")), ConfigError);
    CHECK_THROWS_AS(LstmModel::load("/nonexistent/model.bin"), Error);
}

TEST_CASE("sim config validation") {
    CHECK_THROWS_AS(SimConfig::load(testutil::write_file("cfg.json", "[]")), ConfigError);
    json bad{{"rate_limit", 0}};
    CHECK_THROWS_AS(SimConfig::from_json(bad), ConfigError);
    json bad_hours{{"accounts", json::array({json{{"user_id", "u"},
                                                  {"online_hours", json::array({0.5})}}})}};
    CHECK_THROWS_AS(SimConfig::from_json(bad_hours), ConfigError);

    // behavior sums above 1 are rejected when the sim is built
    auto corpus = Corpus::build({testutil::make_profile("u1", "h1")}, {});
    SimConfig cfg;
    BehaviorSpec hot;
    hot.base_click_rate = 0.9;
    hot.topic_affinity_bonus = 0.2;
    cfg.defaults = hot;
    LinkStore links(1);
    CHECK_THROWS_AS(SocialSim(corpus, testutil::tiny_lexicon(), cfg, links), ConfigError);
}

TEST_CASE("a body that mentions the link prefix does not shadow the tracked link") {
    auto corpus = Corpus::build({testutil::make_profile("u1", "h1")}, {});
    SimConfig cfg;
    cfg.start_time = 1500000000;
    cfg.crawler_enabled = true;
    cfg.crawler_delay = 10;
    LinkStore links(4);
    SocialSim sim(corpus, testutil::tiny_lexicon(), cfg, links);
    auto link = links.shorten("https://www.google.com/", "h1", 1500000000);
    sim.submit_post(sim.config().attacker_id,
                    "@h1 saw goo.gl/zzzzzz in a dream goo.gl/" + link.code, 1500000000);
    auto events = sim.step(1500000000 + 120);
    REQUIRE(events.size() == 1); // crawler fetched the real link, not the decoy
    CHECK(events[0].click.code == link.code);
}
