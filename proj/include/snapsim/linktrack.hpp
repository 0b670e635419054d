#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "snapsim/errors.hpp"
#include "snapsim/rng.hpp"

namespace snapsim {

using json = nlohmann::json;

inline constexpr std::size_t kShortCodeLength = 6;
inline constexpr const char* kRedirectorHost = "t.co";

struct ShortLink {
    std::string code; // 6 base-62 characters
    std::string destination;
    std::string target_handle;
    std::int64_t created_at = 0;
};

struct ClickEvent {
    std::string code;
    std::int64_t ts = 0;
    std::optional<std::string> referrer;
    std::string country; // ISO 3166-1 alpha-2
    std::string user_agent;
};

inline json click_to_json(const ClickEvent& e) {
    json j{{"code", e.code},
           {"ts", e.ts},
           {"country", e.country},
           {"user_agent", e.user_agent}};
    j["referrer"] = e.referrer ? json(*e.referrer) : json(nullptr);
    return j;
}

inline ClickEvent click_from_json(const json& j, std::size_t line_no) {
    if (!j.is_object()) throw MalformedRecord(line_no, "click is not an object");
    ClickEvent e;
    e.code = j.at("code").get<std::string>();
    e.ts = j.at("ts").get<std::int64_t>();
    if (j.contains("referrer") && !j["referrer"].is_null())
        e.referrer = j["referrer"].get<std::string>();
    e.country = j.at("country").get<std::string>();
    e.user_agent = j.at("user_agent").get<std::string>();
    if (e.country.size() != 2) throw MalformedRecord(line_no, "country must be 2 letters");
    return e;
}

// The four buckets partition a campaign's click events.
struct ClickClassification {
    std::int64_t human = 0;
    std::int64_t likely_human = 0;
    std::int64_t crawler = 0;
    std::int64_t unknown = 0;

    std::int64_t total() const { return human + likely_human + crawler + unknown; }
};

struct ClassifyRules {
    std::string redirector = kRedirectorHost;
    std::vector<std::string> crawler_agents; // lowercase substrings
    std::set<std::string> crawler_countries; // origins bots commonly tunnel from

    // crawler_agents.txt / crawler_countries.txt: one entry per line
    static ClassifyRules load(const std::string& agents_path, const std::string& countries_path) {
        ClassifyRules r;
        auto read_lines = [](const std::string& path) {
            std::ifstream in(path);
            if (!in) throw Error("cannot open " + path);
            std::vector<std::string> lines;
            std::string line;
            while (std::getline(in, line)) {
                while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
                if (!line.empty() && line[0] != '#') lines.push_back(line);
            }
            return lines;
        };
        for (auto& a : read_lines(agents_path)) {
            for (char& c : a) c = char(std::tolower(static_cast<unsigned char>(c)));
            r.crawler_agents.push_back(std::move(a));
        }
        for (auto& c : read_lines(countries_path)) r.crawler_countries.insert(c);
        if (r.crawler_agents.empty()) throw ConfigError("crawler agent list is empty");
        return r;
    }

    bool agent_is_crawler(const std::string& user_agent) const {
        std::string ua = user_agent;
        for (char& c : ua) c = char(std::tolower(static_cast<unsigned char>(c)));
        for (const auto& sig : crawler_agents)
            if (ua.find(sig) != std::string::npos) return true;
        return false;
    }
};

inline std::string append_query_param(const std::string& base, const std::string& key,
                                      const std::string& value) {
    const char sep = base.find('?') == std::string::npos ? '?' : '&';
    return base + sep + key + "=" + value;
}

namespace detail {

inline std::string base62(std::uint64_t h, std::size_t chars) {
    static const char alphabet[] =
        "0123456789abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ";
    std::string code(chars, '0');
    for (std::size_t i = 0; i < chars; ++i) {
        code[i] = alphabet[h % 62];
        h /= 62;
    }
    return code;
}

} // namespace detail

// Simulated goo.gl: deterministic keyed-hash shortening plus an append-only
// click log with an in-memory index. record_click is safe under concurrent
// callers; reports see a consistent prefix of the log.
class LinkStore {
public:
    explicit LinkStore(std::uint64_t campaign_salt = 0, std::string event_log_path = "")
        : salt_(campaign_salt) {
        if (!event_log_path.empty()) {
            sink_.open(event_log_path, std::ios::app);
            if (!sink_) throw Error("cannot open event log " + event_log_path);
        }
    }

    // destination = base with screen_name=<handle> appended; idempotent for
    // identical inputs; collisions rehash with a counter.
    ShortLink shorten(const std::string& destination_base, const std::string& target_handle,
                      std::int64_t now) {
        const std::string destination =
            append_query_param(destination_base, "screen_name", target_handle);
        std::lock_guard<std::mutex> lock(mu_);
        if (auto it = by_destination_.find(destination); it != by_destination_.end())
            return by_code_.at(it->second);
        for (std::uint64_t attempt = 0; attempt < 16; ++attempt) {
            const std::uint64_t h =
                combine_seed(combine_seed(salt_, fnv1a64(destination)), attempt);
            std::string code = detail::base62(h, kShortCodeLength);
            if (by_code_.count(code)) continue; // held by a different destination
            ShortLink link{code, destination, target_handle, now};
            by_code_[code] = link;
            by_destination_[destination] = code;
            return link;
        }
        throw CodeCollision(destination);
    }

    const ShortLink* find(const std::string& code) const {
        std::lock_guard<std::mutex> lock(mu_);
        auto it = by_code_.find(code);
        return it == by_code_.end() ? nullptr : &it->second;
    }

    void record_click(const ClickEvent& event) {
        std::lock_guard<std::mutex> lock(mu_);
        auto it = by_code_.find(event.code);
        if (it == by_code_.end()) throw UnknownCode(event.code);
        if (event.ts < it->second.created_at)
            throw InvalidClick("click at " + std::to_string(event.ts) + " precedes link " +
                               event.code + " created at " +
                               std::to_string(it->second.created_at));
        if (event.country.size() != 2) throw InvalidClick("country must be a 2-letter code");
        by_code_events_[event.code].push_back(events_.size());
        events_.push_back(event);
        if (sink_.is_open()) {
            sink_ << click_to_json(event).dump() << '\n';
            sink_.flush();
        }
    }

    // (total clicks, events in timestamp order; ties keep arrival order)
    std::pair<std::int64_t, std::vector<ClickEvent>> link_report(const std::string& code) const {
        std::lock_guard<std::mutex> lock(mu_);
        if (!by_code_.count(code)) throw UnknownCode(code);
        std::vector<ClickEvent> out;
        auto it = by_code_events_.find(code);
        if (it != by_code_events_.end()) {
            std::vector<std::size_t> order = it->second;
            std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
                return events_[a].ts < events_[b].ts;
            });
            for (std::size_t i : order) out.push_back(events_[i]);
        }
        return {std::int64_t(out.size()), std::move(out)};
    }

    std::vector<ClickEvent> all_events() const {
        std::lock_guard<std::mutex> lock(mu_);
        std::vector<std::size_t> order(events_.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return events_[a].ts < events_[b].ts;
        });
        std::vector<ClickEvent> out;
        out.reserve(order.size());
        for (std::size_t i : order) out.push_back(events_[i]);
        return out;
    }

    std::vector<ShortLink> all_links() const {
        std::lock_guard<std::mutex> lock(mu_);
        std::vector<ShortLink> out;
        out.reserve(by_code_.size());
        for (const auto& [code, link] : by_code_) out.push_back(link);
        return out;
    }

private:
    mutable std::mutex mu_;
    std::uint64_t salt_;
    std::map<std::string, ShortLink> by_code_;
    std::map<std::string, std::string> by_destination_;
    std::map<std::string, std::vector<std::size_t>> by_code_events_;
    std::vector<ClickEvent> events_;
    std::ofstream sink_;
};

// Precedence: human (official redirector referrer) > crawler (agent
// signature) > likely_human (campaign-unique country outside the crawler
// origins) > unknown.
inline ClickClassification classify_clicks(const std::vector<ClickEvent>& events,
                                           const ClassifyRules& rules) {
    ClickClassification out;
    std::vector<const ClickEvent*> remaining;
    for (const auto& e : events) {
        if (e.referrer && *e.referrer == rules.redirector) {
            ++out.human;
        } else if (rules.agent_is_crawler(e.user_agent)) {
            ++out.crawler;
        } else {
            remaining.push_back(&e);
        }
    }
    std::map<std::string, std::int64_t> country_counts;
    for (const auto* e : remaining) ++country_counts[e->country];
    for (const auto* e : remaining) {
        const bool unique = country_counts[e->country] == 1;
        const bool bot_origin = rules.crawler_countries.count(e->country) != 0;
        if (unique && !bot_origin)
            ++out.likely_human;
        else
            ++out.unknown;
    }
    return out;
}

// (human/posts, (human+likely_human)/posts). No clamping: impossible counts
// are an error, not a saturation.
inline std::pair<double, double> ctr_bounds(std::int64_t posts_sent,
                                            const ClickClassification& c) {
    if (posts_sent < 1) throw InvalidCounts("posts_sent must be >= 1");
    if (c.human < 0 || c.likely_human < 0) throw InvalidCounts("negative click counts");
    if (c.human + c.likely_human > posts_sent)
        throw InvalidCounts("more qualifying clicks than posts sent");
    const double lower = double(c.human) / double(posts_sent);
    const double upper = double(c.human + c.likely_human) / double(posts_sent);
    return {lower, upper};
}

} // namespace snapsim
