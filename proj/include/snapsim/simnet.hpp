#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "snapsim/corpus.hpp"
#include "snapsim/errors.hpp"
#include "snapsim/linktrack.hpp"
#include "snapsim/rng.hpp"
#include "snapsim/scheduler.hpp"
#include "snapsim/topics.hpp"

namespace snapsim {

inline constexpr std::int64_t kRateWindowSeconds = 900; // rolling 15 minutes

// Synthetic behavioral account. Parameters are fixture inputs, never claims
// about human psychology; the click model exists so topic seeding and
// peak-hour scheduling have something to move.
struct SimAccount {
    std::string user_id;
    std::string handle;
    std::set<std::string> followers; // accounts following this one
    std::array<double, 24> online_hours{}; // per-tick activity probability by hour
    int modal_hour = 0;
    double base_click_rate = 0;
    double topic_affinity_bonus = 0;
    double schedule_bonus = 0;
    std::string country = "US";
    std::set<std::string> affinity_tokens;
    std::string language = "en";

    void validate() const {
        auto in01 = [](double p) { return p >= 0.0 && p <= 1.0; };
        if (!in01(base_click_rate) || !in01(topic_affinity_bonus) || !in01(schedule_bonus))
            throw ConfigError("click probabilities out of [0,1] for " + user_id);
        if (base_click_rate + topic_affinity_bonus + schedule_bonus > 1.0)
            throw ConfigError("base+bonuses exceed 1 for " + user_id);
        for (double w : online_hours)
            if (!(w >= 0.0 && w <= 1.0)) throw ConfigError("bad online_hours for " + user_id);
    }
};

struct SimPost {
    std::string post_id;
    std::string author_id;
    std::string text;
    std::int64_t posted_at = 0;
    std::set<std::string> visible_to;
    std::string link_code; // empty when the text carries no tracked link
};

// Per-account behavior knobs; anything unset falls back to the defaults
// entry, then to corpus-derived values (online hours from the activity
// histogram, affinity tokens from the user's own top topics).
struct BehaviorSpec {
    std::optional<double> base_click_rate, topic_affinity_bonus, schedule_bonus;
    std::optional<std::string> country;
    std::optional<std::vector<std::string>> affinity_tokens;
    std::optional<std::array<double, 24>> online_hours;
    std::optional<std::set<std::string>> followers;
};

struct SimConfig {
    int rate_limit = 3; // accepted posts per author per rolling 15 minutes
    bool crawler_enabled = true;
    std::int64_t crawler_delay = 30;
    std::uint64_t rng_seed = 0;
    std::int64_t tick = 60;
    std::int64_t start_time = 1500000000;
    std::string attacker_id = "attacker";
    std::string link_display_prefix = "goo.gl/";
    int affinity_seed_count = 5;
    BehaviorSpec defaults;
    std::map<std::string, BehaviorSpec> overrides;

    void validate() const {
        if (rate_limit < 1) throw ConfigError("rate_limit must be >= 1");
        if (tick < 1) throw ConfigError("tick must be >= 1");
        if (crawler_delay < 0) throw ConfigError("crawler_delay must be >= 0");
    }

    static BehaviorSpec behavior_from_json(const json& j) {
        BehaviorSpec b;
        if (j.contains("base_click_rate")) b.base_click_rate = j["base_click_rate"].get<double>();
        if (j.contains("topic_affinity_bonus"))
            b.topic_affinity_bonus = j["topic_affinity_bonus"].get<double>();
        if (j.contains("schedule_bonus")) b.schedule_bonus = j["schedule_bonus"].get<double>();
        if (j.contains("country")) b.country = j["country"].get<std::string>();
        if (j.contains("affinity_tokens"))
            b.affinity_tokens = j["affinity_tokens"].get<std::vector<std::string>>();
        if (j.contains("online_hours")) {
            auto v = j["online_hours"].get<std::vector<double>>();
            if (v.size() != 24) throw ConfigError("online_hours must have 24 entries");
            std::array<double, 24> a{};
            std::copy(v.begin(), v.end(), a.begin());
            b.online_hours = a;
        }
        if (j.contains("followers")) {
            auto v = j["followers"].get<std::vector<std::string>>();
            b.followers = std::set<std::string>(v.begin(), v.end());
        }
        return b;
    }

    static SimConfig from_json(const json& j) {
        SimConfig c;
        if (j.contains("rate_limit")) c.rate_limit = j["rate_limit"].get<int>();
        if (j.contains("crawler_enabled")) c.crawler_enabled = j["crawler_enabled"].get<bool>();
        if (j.contains("crawler_delay")) c.crawler_delay = j["crawler_delay"].get<std::int64_t>();
        if (j.contains("rng_seed")) c.rng_seed = j["rng_seed"].get<std::uint64_t>();
        if (j.contains("tick")) c.tick = j["tick"].get<std::int64_t>();
        if (j.contains("start_time")) c.start_time = j["start_time"].get<std::int64_t>();
        if (j.contains("attacker_id")) c.attacker_id = j["attacker_id"].get<std::string>();
        if (j.contains("affinity_seed_count"))
            c.affinity_seed_count = j["affinity_seed_count"].get<int>();
        if (j.contains("behavior_defaults"))
            c.defaults = behavior_from_json(j["behavior_defaults"]);
        if (j.contains("accounts"))
            for (const auto& ja : j["accounts"])
                c.overrides[ja.at("user_id").get<std::string>()] = behavior_from_json(ja);
        c.validate();
        return c;
    }

    static SimConfig load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw Error("cannot open " + path);
        json j = json::parse(in, nullptr, false);
        if (j.is_discarded() || !j.is_object()) throw ConfigError("bad sim config: " + path);
        return from_json(j);
    }
};

struct SimEvent {
    enum class Kind { human_click, crawler_click };
    Kind kind = Kind::human_click;
    std::string post_id;
    std::string viewer_id; // empty for crawler events
    ClickEvent click;
};

// Reply visibility: a post starting with '@' reaches the author, the
// addressee, and the followers the two accounts share; anything else reaches
// the author and their followers.
inline std::set<std::string> visibility(const SimAccount& author, const std::string& text,
                                        const SimAccount& target) {
    std::set<std::string> vis{author.user_id};
    if (!text.empty() && text.front() == '@') {
        vis.insert(target.user_id);
        for (const auto& f : author.followers)
            if (target.followers.count(f)) vis.insert(f);
    } else {
        vis.insert(author.followers.begin(), author.followers.end());
    }
    return vis;
}

// Deterministic discrete-event simulation of the platform: accounts, reply
// visibility, a rolling-window API rate limit, the platform's own link
// crawler, and probabilistic click behavior. (SimConfig, corpus, seed) fully
// determine the event log.
class SocialSim {
public:
    SocialSim(const Corpus& corpus, const ReferenceLexicon& lexicon, SimConfig config,
              LinkStore& links)
        : config_(std::move(config)), links_(&links), now_(config_.start_time) {
        config_.validate();
        for (const auto& u : corpus.users())
            add_account(build_account(u, corpus.timeline(u.user_id), lexicon));
        if (!accounts_.count(config_.attacker_id)) {
            SimAccount attacker;
            attacker.user_id = config_.attacker_id;
            attacker.handle = config_.attacker_id;
            // the dummy account follows no one and has no followers, so
            // replies stay between it and the target
            std::fill(attacker.online_hours.begin(), attacker.online_hours.end(), 0.0);
            add_account(std::move(attacker));
        }
    }

    std::int64_t now() const { return now_; }
    const SimConfig& config() const { return config_; }
    LinkStore& links() { return *links_; }

    // campaign-level rate-limit passthrough
    void set_rate_limit(int limit) {
        if (limit < 1) throw ConfigError("rate_limit must be >= 1");
        config_.rate_limit = limit;
    }

    const SimAccount& account(const std::string& user_id) const {
        auto it = accounts_.find(user_id);
        if (it == accounts_.end()) throw UnknownUser(user_id);
        return it->second;
    }

    const std::vector<SimPost>& posts() const { return posts_; }
    const std::vector<SimEvent>& event_log() const { return event_log_; }

    // Accepted iff the author has fewer than rate_limit accepted posts in the
    // trailing 15-minute window at `at`.
    std::string submit_post(const std::string& author_id, const std::string& text,
                            std::int64_t at) {
        if (at < now_) throw ConfigError("cannot post in the past");
        const SimAccount& author = account(author_id);
        auto& history = accepted_times_[author_id];
        while (!history.empty() && at - history.front() >= kRateWindowSeconds)
            history.pop_front();
        if (std::int64_t(history.size()) >= config_.rate_limit) {
            const std::int64_t retry_after = history.front() + kRateWindowSeconds - at;
            throw RateLimited(retry_after);
        }
        history.push_back(at);

        SimPost post;
        post.post_id = "sp" + std::to_string(++post_counter_);
        post.author_id = author_id;
        post.text = text;
        post.posted_at = at;
        post.link_code = extract_link_code(text);
        const SimAccount* reply_target = resolve_reply_target(text);
        if (!text.empty() && text.front() == '@') {
            post.visible_to = reply_target ? visibility(author, text, *reply_target)
                                           : std::set<std::string>{author_id};
        } else {
            post.visible_to = visibility(author, text, author);
        }

        std::set<std::string> post_tokens;
        for (const auto& t : tokenize(text)) post_tokens.insert(t.surface);

        const std::size_t idx = posts_.size();
        posts_.push_back(post);
        if (config_.crawler_enabled && !post.link_code.empty())
            crawler_queue_.push_back(CrawlerFetch{idx, at + config_.crawler_delay});
        for (const auto& viewer_id : post.visible_to) {
            if (viewer_id == author_id) continue;
            const SimAccount& viewer = account(viewer_id);
            double p = viewer.base_click_rate;
            bool topical = false;
            for (const auto& tok : viewer.affinity_tokens)
                if (post_tokens.count(tok)) {
                    topical = true;
                    break;
                }
            if (topical) p += viewer.topic_affinity_bonus;
            if (utc_hour(at) == viewer.modal_hour) p += viewer.schedule_bonus;
            if (!post.link_code.empty())
                pending_.push_back(PendingView{
                    idx, viewer_id, p,
                    Rng(combine_seed(combine_seed(config_.rng_seed, fnv1a64(post.post_id)),
                                     fnv1a64(viewer_id)))});
        }
        return post.post_id;
    }

    // Advance the clock in ticks, firing crawler fetches and letting viewers
    // come online and decide. Returns the events generated by this advance.
    std::vector<SimEvent> step(std::int64_t until) {
        if (until < now_) throw ConfigError("cannot step backwards");
        std::vector<SimEvent> out;
        while (now_ < until) {
            const std::int64_t t = std::min(now_ + config_.tick, until);
            now_ = t;

            for (auto it = crawler_queue_.begin(); it != crawler_queue_.end();) {
                if (it->due <= t) {
                    const SimPost& post = posts_[it->post_idx];
                    SimEvent ev;
                    ev.kind = SimEvent::Kind::crawler_click;
                    ev.post_id = post.post_id;
                    ev.click = ClickEvent{post.link_code, it->due, std::nullopt, "US",
                                          "PlatformBot/1.1 (+link-safety-scan)"};
                    links_->record_click(ev.click);
                    event_log_.push_back(ev);
                    out.push_back(ev);
                    it = crawler_queue_.erase(it);
                } else {
                    ++it;
                }
            }

            const int hour = utc_hour(t);
            for (auto it = pending_.begin(); it != pending_.end();) {
                const SimPost& post = posts_[it->post_idx];
                if (post.posted_at > t) {
                    ++it;
                    continue;
                }
                SimAccount& viewer = accounts_.at(it->viewer_id);
                if (!it->rng.bernoulli(viewer.online_hours[std::size_t(hour)])) {
                    ++it;
                    continue;
                }
                // the viewer saw the post; one click decision, then done
                if (it->rng.bernoulli(it->p)) {
                    SimEvent ev;
                    ev.kind = SimEvent::Kind::human_click;
                    ev.post_id = post.post_id;
                    ev.viewer_id = it->viewer_id;
                    ev.click = ClickEvent{post.link_code, t, std::string(kRedirectorHost),
                                          viewer.country, kHumanUserAgent};
                    links_->record_click(ev.click);
                    event_log_.push_back(ev);
                    out.push_back(ev);
                }
                it = pending_.erase(it);
            }
        }
        return out;
    }

    static constexpr const char* kHumanUserAgent =
        "Mozilla/5.0 (X11; Linux x86_64) AppleWebKit/537.36 (KHTML, like Gecko) "
        "Chrome/58.0.3029.110 Safari/537.36";

private:
    struct CrawlerFetch {
        std::size_t post_idx;
        std::int64_t due;
    };
    struct PendingView {
        std::size_t post_idx;
        std::string viewer_id;
        double p;
        Rng rng; // per-(post,viewer) stream; immune to processing-order drift
    };

    SimAccount build_account(const UserProfile& profile, const Timeline& timeline,
                             const ReferenceLexicon& lexicon) const {
        SimAccount a;
        a.user_id = profile.user_id;
        a.handle = profile.handle;
        a.language = profile.language_hint.value_or("en");
        const BehaviorSpec* spec = nullptr;
        if (auto it = config_.overrides.find(profile.user_id); it != config_.overrides.end())
            spec = &it->second;
        auto pick = [&](auto member, auto fallback) {
            if (spec && (*spec).*member) return *((*spec).*member);
            if (config_.defaults.*member) return *(config_.defaults.*member);
            return fallback;
        };
        a.base_click_rate = pick(&BehaviorSpec::base_click_rate, 0.0);
        a.topic_affinity_bonus = pick(&BehaviorSpec::topic_affinity_bonus, 0.0);
        a.schedule_bonus = pick(&BehaviorSpec::schedule_bonus, 0.0);
        a.country = pick(&BehaviorSpec::country, std::string("US"));

        if (spec && spec->followers)
            a.followers = *spec->followers;
        else if (config_.defaults.followers)
            a.followers = *config_.defaults.followers;

        if (spec && spec->online_hours) {
            a.online_hours = *spec->online_hours;
        } else if (config_.defaults.online_hours) {
            a.online_hours = *config_.defaults.online_hours;
        } else {
            const ActivityHistogram hist = activity_histogram(timeline);
            if (hist.total > 0) {
                for (int h = 0; h < 24; ++h)
                    a.online_hours[std::size_t(h)] =
                        double(hist.bins[std::size_t(h)]) / double(hist.total);
            } else {
                a.online_hours.fill(1.0 / 24.0);
            }
        }
        a.modal_hour = 0;
        for (int h = 1; h < 24; ++h)
            if (a.online_hours[std::size_t(h)] > a.online_hours[std::size_t(a.modal_hour)])
                a.modal_hour = h;

        std::vector<std::string> affinity;
        if (spec && spec->affinity_tokens) {
            affinity = *spec->affinity_tokens;
        } else if (config_.defaults.affinity_tokens) {
            affinity = *config_.defaults.affinity_tokens;
        } else if (config_.affinity_seed_count > 0) {
            try {
                const SeedTopics seeds =
                    extract_seed(timeline, lexicon, std::size_t(config_.affinity_seed_count));
                for (const auto& [tok, score] : seeds.entries) affinity.push_back(tok);
            } catch (const NoTopic&) {
                // nothing to be interested in
            }
        }
        a.affinity_tokens = std::set<std::string>(affinity.begin(), affinity.end());
        a.validate();
        return a;
    }

    void add_account(SimAccount account) {
        by_handle_[account.handle] = account.user_id;
        accounts_[account.user_id] = std::move(account);
    }

    const SimAccount* resolve_reply_target(const std::string& text) const {
        if (text.empty() || text.front() != '@') return nullptr;
        std::size_t end = 1;
        while (end < text.size() && !detail::is_spacec(text[end])) ++end;
        const std::string handle = text.substr(1, end - 1);
        auto it = by_handle_.find(handle);
        if (it == by_handle_.end()) return nullptr;
        return &accounts_.at(it->second);
    }

    std::string extract_link_code(const std::string& text) const {
        // the tracked link is appended last; body text may mention the prefix
        const auto pos = text.rfind(config_.link_display_prefix);
        if (pos == std::string::npos) return "";
        const std::size_t start = pos + config_.link_display_prefix.size();
        if (start + kShortCodeLength > text.size()) return "";
        const std::string code = text.substr(start, kShortCodeLength);
        return links_->find(code) ? code : "";
    }

    SimConfig config_;
    LinkStore* links_;
    std::int64_t now_;
    std::map<std::string, SimAccount> accounts_;
    std::map<std::string, std::string> by_handle_;
    std::vector<SimPost> posts_;
    std::map<std::string, std::deque<std::int64_t>> accepted_times_;
    std::vector<CrawlerFetch> crawler_queue_;
    std::vector<PendingView> pending_;
    std::vector<SimEvent> event_log_;
    std::int64_t post_counter_ = 0;
};

} // namespace snapsim
