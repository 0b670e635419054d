#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <ctime>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "snapsim/errors.hpp"

namespace snapsim {

using json = nlohmann::json;

// Platform-era character limit; enforced at ingestion and at composition.
inline constexpr std::size_t kMaxPostChars = 140;
inline constexpr std::string_view kUrlToken = "<url>";

struct UserProfile {
    std::string user_id;
    std::string handle;
    std::string bio_text;
    std::int64_t follower_count = 0;
    std::int64_t following_count = 0;
    std::int64_t post_count = 0;
    std::int64_t created_at = 0; // UTC seconds
    bool default_profile = true;
    bool default_avatar = true;
    bool verified = false;
    std::optional<std::string> location;
    std::optional<std::string> language_hint; // BCP-47-ish, e.g. "en", "es-MX"
};

struct Post {
    std::string post_id;
    std::string author_id;
    std::string text;
    std::int64_t created_at = 0;
    bool is_reply = false;
    std::int64_t like_count = 0;
    std::int64_t repost_count = 0;
};

// Posts sorted by created_at descending (ties by post_id ascending).
struct Timeline {
    std::string user_id;
    std::vector<Post> posts;
};

struct Token {
    std::string surface;
    bool operator==(const Token&) const = default;
};

namespace detail {

inline bool is_spacec(unsigned char c) { return std::isspace(c) != 0; }
inline bool is_punctc(unsigned char c) { return std::ispunct(c) != 0; }

inline bool looks_like_url(std::string_view s) {
    return s.starts_with("http://") || s.starts_with("https://") || s.starts_with("www.");
}

// raw is already lowercased and whitespace-free
inline std::string normalize_token(std::string_view raw) {
    if (raw == kUrlToken) return std::string(raw);
    std::size_t b = 0;
    while (b < raw.size() && is_punctc(raw[b]) && raw[b] != '@' && raw[b] != '#') ++b;
    std::string_view s = raw.substr(b);
    if (looks_like_url(s)) return std::string(kUrlToken);
    std::size_t e = s.size();
    while (e > 0 && is_punctc(s[e - 1])) {
        if (e == 1 && (s[0] == '@' || s[0] == '#')) break; // lone prefix survives
        --e;
    }
    return std::string(s.substr(0, e));
}

} // namespace detail

// Lowercase, split on whitespace, strip leading/trailing punctuation except a
// leading '@' or '#', collapse URLs to <url>, drop empties. Total function.
inline std::vector<Token> tokenize(std::string_view text) {
    std::vector<Token> out;
    std::size_t i = 0;
    const std::size_t n = text.size();
    std::string buf;
    while (i < n) {
        while (i < n && detail::is_spacec(text[i])) ++i;
        std::size_t j = i;
        while (j < n && !detail::is_spacec(text[j])) ++j;
        if (j > i) {
            buf.assign(text.substr(i, j - i));
            for (char& c : buf) c = char(std::tolower(static_cast<unsigned char>(c)));
            std::string tok = detail::normalize_token(buf);
            if (!tok.empty()) out.push_back({std::move(tok)});
        }
        i = j;
    }
    return out;
}

inline std::string join_tokens(const std::vector<Token>& toks) {
    std::string s;
    for (std::size_t i = 0; i < toks.size(); ++i) {
        if (i) s += ' ';
        s += toks[i].surface;
    }
    return s;
}

namespace detail {

inline json parse_jsonl_line(const std::string& line, std::size_t line_no) {
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object())
        throw MalformedRecord(line_no, "not a JSON object");
    return j;
}

inline void require_v1(const json& j, std::size_t line_no) {
    if (!j.contains("v") || !j["v"].is_number_integer() || j["v"].get<int>() != 1)
        throw MalformedRecord(line_no, "missing or unsupported schema version");
}

inline std::string req_string(const json& j, const char* key, std::size_t line_no) {
    if (!j.contains(key) || !j[key].is_string())
        throw MalformedRecord(line_no, std::string("missing string field '") + key + "'");
    return j[key].get<std::string>();
}

inline std::int64_t req_count(const json& j, const char* key, std::size_t line_no) {
    if (!j.contains(key) || !j[key].is_number_integer())
        throw MalformedRecord(line_no, std::string("missing integer field '") + key + "'");
    std::int64_t v = j[key].get<std::int64_t>();
    if (v < 0) throw MalformedRecord(line_no, std::string("negative '") + key + "'");
    return v;
}

inline std::int64_t req_int(const json& j, const char* key, std::size_t line_no) {
    if (!j.contains(key) || !j[key].is_number_integer())
        throw MalformedRecord(line_no, std::string("missing integer field '") + key + "'");
    return j[key].get<std::int64_t>();
}

inline bool req_bool(const json& j, const char* key, std::size_t line_no) {
    if (!j.contains(key) || !j[key].is_boolean())
        throw MalformedRecord(line_no, std::string("missing boolean field '") + key + "'");
    return j[key].get<bool>();
}

inline std::optional<std::string> opt_string(const json& j, const char* key, std::size_t line_no) {
    if (!j.contains(key) || j[key].is_null()) return std::nullopt;
    if (!j[key].is_string())
        throw MalformedRecord(line_no, std::string("field '") + key + "' must be a string");
    return j[key].get<std::string>();
}

} // namespace detail

inline UserProfile parse_user(const json& j, std::size_t line_no, std::int64_t now) {
    detail::require_v1(j, line_no);
    UserProfile u;
    u.user_id = detail::req_string(j, "user_id", line_no);
    u.handle = detail::req_string(j, "handle", line_no);
    u.bio_text = j.contains("bio_text") ? detail::req_string(j, "bio_text", line_no) : "";
    u.follower_count = detail::req_count(j, "follower_count", line_no);
    u.following_count = detail::req_count(j, "following_count", line_no);
    u.post_count = detail::req_count(j, "post_count", line_no);
    u.created_at = detail::req_int(j, "created_at", line_no);
    u.default_profile = detail::req_bool(j, "default_profile", line_no);
    u.default_avatar = detail::req_bool(j, "default_avatar", line_no);
    u.verified = detail::req_bool(j, "verified", line_no);
    u.location = detail::opt_string(j, "location", line_no);
    u.language_hint = detail::opt_string(j, "language_hint", line_no);
    if (u.user_id.empty()) throw MalformedRecord(line_no, "empty user_id");
    if (u.handle.empty()) throw MalformedRecord(line_no, "empty handle");
    if (u.created_at > now)
        throw MalformedRecord(line_no, "created_at is in the future");
    return u;
}

inline Post parse_post(const json& j, std::size_t line_no) {
    detail::require_v1(j, line_no);
    Post p;
    p.post_id = detail::req_string(j, "post_id", line_no);
    p.author_id = detail::req_string(j, "author_id", line_no);
    p.text = detail::req_string(j, "text", line_no);
    p.created_at = detail::req_int(j, "created_at", line_no);
    p.is_reply = detail::req_bool(j, "is_reply", line_no);
    p.like_count = detail::req_count(j, "like_count", line_no);
    p.repost_count = detail::req_count(j, "repost_count", line_no);
    if (p.post_id.empty()) throw MalformedRecord(line_no, "empty post_id");
    if (p.author_id.empty()) throw MalformedRecord(line_no, "empty author_id");
    if (p.text.size() > kMaxPostChars)
        throw MalformedRecord(line_no, "text exceeds 140 characters");
    return p;
}

inline json user_to_json(const UserProfile& u) {
    json j{{"v", 1},
           {"user_id", u.user_id},
           {"handle", u.handle},
           {"bio_text", u.bio_text},
           {"follower_count", u.follower_count},
           {"following_count", u.following_count},
           {"post_count", u.post_count},
           {"created_at", u.created_at},
           {"default_profile", u.default_profile},
           {"default_avatar", u.default_avatar},
           {"verified", u.verified}};
    if (u.location) j["location"] = *u.location;
    if (u.language_hint) j["language_hint"] = *u.language_hint;
    return j;
}

inline json post_to_json(const Post& p) {
    return json{{"v", 1},
                {"post_id", p.post_id},
                {"author_id", p.author_id},
                {"text", p.text},
                {"created_at", p.created_at},
                {"is_reply", p.is_reply},
                {"like_count", p.like_count},
                {"repost_count", p.repost_count}};
}

// JSON-Lines profile ingestion. `now` bounds created_at; defaults to wall clock.
inline std::vector<UserProfile> load_users(const std::string& path,
                                           std::optional<std::int64_t> now = std::nullopt) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path);
    const std::int64_t ref = now.value_or(std::int64_t(std::time(nullptr)));
    std::vector<UserProfile> users;
    std::set<std::string> handles, ids;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json j = detail::parse_jsonl_line(line, line_no);
        UserProfile u = parse_user(j, line_no, ref);
        if (!handles.insert(u.handle).second) throw DuplicateHandle(u.handle);
        if (!ids.insert(u.user_id).second)
            throw MalformedRecord(line_no, "duplicate user_id " + u.user_id);
        users.push_back(std::move(u));
    }
    return users;
}

inline std::vector<Post> load_posts(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path);
    std::vector<Post> posts;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json j = detail::parse_jsonl_line(line, line_no);
        posts.push_back(parse_post(j, line_no));
    }
    return posts;
}

inline void sort_timeline(Timeline& t) {
    std::sort(t.posts.begin(), t.posts.end(), [](const Post& a, const Post& b) {
        if (a.created_at != b.created_at) return a.created_at > b.created_at;
        return a.post_id < b.post_id;
    });
}

// Standalone timeline load: filters the file to one author's posts, newest
// first. When a known-user set is supplied, a user with zero posts that is
// also absent from the set is an error; otherwise an empty timeline is valid.
inline Timeline load_timeline(const std::string& path, const std::string& user_id,
                              const std::set<std::string>* known_users = nullptr) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path);
    Timeline t{user_id, {}};
    std::set<std::string> seen_ids;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json j = detail::parse_jsonl_line(line, line_no);
        Post p = parse_post(j, line_no);
        if (p.author_id != user_id) continue;
        if (!seen_ids.insert(p.post_id).second)
            throw MalformedRecord(line_no, "duplicate post_id " + p.post_id);
        t.posts.push_back(std::move(p));
    }
    if (t.posts.empty() && known_users && !known_users->count(user_id))
        throw UnknownUser(user_id);
    sort_timeline(t);
    return t;
}

// Immutable after build; the single source of truth the rest of the pipeline
// reads. Safe for unrestricted concurrent reads.
class Corpus {
public:
    Corpus() = default;

    static Corpus build(std::vector<UserProfile> users, std::vector<Post> posts) {
        Corpus c;
        c.users_ = std::move(users);
        c.posts_ = std::move(posts);
        for (std::size_t i = 0; i < c.users_.size(); ++i) {
            const auto& u = c.users_[i];
            if (!c.by_id_.emplace(u.user_id, i).second)
                throw MalformedRecord(0, "duplicate user_id " + u.user_id);
            if (!c.by_handle_.emplace(u.handle, i).second)
                throw DuplicateHandle(u.handle);
            c.timelines_[u.user_id] = Timeline{u.user_id, {}};
        }
        std::set<std::string> post_ids;
        for (const auto& p : c.posts_) {
            if (!c.by_id_.count(p.author_id))
                throw UnknownUser(p.author_id + " (author of " + p.post_id + ")");
            if (!post_ids.insert(p.post_id).second)
                throw MalformedRecord(0, "duplicate post_id " + p.post_id);
            c.timelines_[p.author_id].posts.push_back(p);
        }
        for (auto& [id, t] : c.timelines_) sort_timeline(t);
        return c;
    }

    const std::vector<UserProfile>& users() const { return users_; }
    const std::vector<Post>& posts() const { return posts_; }

    const UserProfile& user(const std::string& user_id) const {
        auto it = by_id_.find(user_id);
        if (it == by_id_.end()) throw UnknownUser(user_id);
        return users_[it->second];
    }

    const UserProfile* find_by_handle(const std::string& handle) const {
        auto it = by_handle_.find(handle);
        return it == by_handle_.end() ? nullptr : &users_[it->second];
    }

    const Timeline& timeline(const std::string& user_id) const {
        auto it = timelines_.find(user_id);
        if (it == timelines_.end()) throw UnknownUser(user_id);
        return it->second;
    }

    bool has_user(const std::string& user_id) const { return by_id_.count(user_id) != 0; }

    // Latest observed timestamp; used as the ingestion reference for feature
    // extraction so account age does not depend on the wall clock.
    std::int64_t reference_time() const {
        std::int64_t ref = 0;
        for (const auto& u : users_) ref = std::max(ref, u.created_at);
        for (const auto& p : posts_) ref = std::max(ref, p.created_at);
        return ref;
    }

    void save(const std::string& path) const {
        json j;
        j["v"] = 1;
        j["users"] = json::array();
        j["posts"] = json::array();
        for (const auto& u : users_) j["users"].push_back(user_to_json(u));
        for (const auto& p : posts_) j["posts"].push_back(post_to_json(p));
        std::ofstream out(path);
        if (!out) throw Error("cannot write " + path);
        out << j.dump() << '\n';
    }

    static Corpus load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw Error("cannot open " + path);
        json j = json::parse(in, nullptr, false);
        if (j.is_discarded() || !j.is_object() || !j.contains("users") || !j.contains("posts"))
            throw ConfigError("not a corpus file: " + path);
        std::vector<UserProfile> users;
        std::vector<Post> posts;
        std::size_t n = 0;
        for (const auto& ju : j["users"]) users.push_back(parse_user(ju, ++n, INT64_MAX));
        n = 0;
        for (const auto& jp : j["posts"]) posts.push_back(parse_post(jp, ++n));
        return build(std::move(users), std::move(posts));
    }

private:
    std::vector<UserProfile> users_;
    std::vector<Post> posts_;
    std::map<std::string, std::size_t> by_id_;
    std::map<std::string, std::size_t> by_handle_;
    std::map<std::string, Timeline> timelines_;
};

} // namespace snapsim
