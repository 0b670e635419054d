#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "snapsim/corpus.hpp"
#include "snapsim/errors.hpp"
#include "snapsim/linktrack.hpp"
#include "snapsim/scheduler.hpp"
#include "snapsim/simnet.hpp"
#include "snapsim/textgen.hpp"
#include "snapsim/triage.hpp"

namespace snapsim {

// Rendered form: "@" + handle + " " + body + " " + goo.gl-style display link.
struct PhishPost {
    std::string target_handle;
    std::string body;
    ShortLink link;
    std::string rendered;
};

inline std::string display_link(const ShortLink& link, const std::string& prefix = "goo.gl/") {
    return prefix + link.code;
}

// Assembles the three components and truncates the body at a token boundary
// when the 140-character limit would be breached.
inline PhishPost compose_post(const std::string& target_handle, const std::string& body,
                              const ShortLink& link, const std::string& link_prefix = "goo.gl/") {
    const std::string url = display_link(link, link_prefix);
    const std::size_t overhead_empty = 1 + target_handle.size() + 1 + url.size();
    if (overhead_empty > kMaxPostChars) throw HandleTooLong(target_handle);

    auto render = [&](const std::string& b) {
        std::string r = "@" + target_handle;
        if (!b.empty()) r += " " + b;
        r += " " + url;
        return r;
    };
    std::string trimmed = body;
    while (!trimmed.empty() && render(trimmed).size() > kMaxPostChars) {
        const auto cut = trimmed.find_last_of(' ');
        trimmed = cut == std::string::npos ? std::string() : trimmed.substr(0, cut);
    }
    PhishPost post{target_handle, trimmed, link, render(trimmed)};
    return post;
}

struct CampaignConfig {
    std::int64_t duration = 7200; // posting window, sim seconds
    bool scheduling_enabled = true;
    std::int64_t measurement_delay = 172800; // two days of sim time
    std::size_t model_threshold = 200;
    std::uint64_t rng_seed = 0;
    std::optional<int> rate_limit; // overrides the sim's configured limit
    bool scrambled_text = false;   // ablation: random tokens instead of a model
    std::string destination_base = "https://www.google.com/";
    std::size_t seed_topic_count = 2;
    double temperature = 0.8;
    std::size_t max_tokens = 24;
    int triage_k = 3;
    int triage_trials = 0; // > 0 runs the randomized search instead of fixed k
    int hmm_order = 1;
};

struct TargetOutcome {
    int rank = 0;
    std::string user_id;
    std::string handle;
    std::string status; // posted | skipped_no_text | skipped_handle | skipped_duration
    std::string model_used; // lstm | hmm | scrambled | none
    std::string body;
    std::string rendered;
    std::string code;
    std::int64_t scheduled_at = 0;
    std::int64_t posted_at = 0;
    int attempts = 0;
};

struct CampaignLog {
    std::int64_t duration = 0;
    std::int64_t measurement_delay = 0;
    bool scheduling_enabled = false;
    bool scrambled_text = false;
    std::uint64_t rng_seed = 0;
    std::int64_t start_time = 0;
    std::int64_t end_time = 0;
    std::int64_t measurement_ready = 0;
    std::int64_t posts_sent = 0;
    int selected_cluster = 0;
    double silhouette = 0;
    std::vector<TargetOutcome> targets;
    std::vector<ClickEvent> clicks;

    void save(const std::string& path) const {
        std::ofstream out(path, std::ios::binary); // binary: byte-identical logs
        if (!out) throw Error("cannot write " + path);
        json header{{"kind", "campaign"},
                    {"v", 1},
                    {"duration", duration},
                    {"measurement_delay", measurement_delay},
                    {"scheduling_enabled", scheduling_enabled},
                    {"scrambled_text", scrambled_text},
                    {"rng_seed", rng_seed},
                    {"start_time", start_time},
                    {"end_time", end_time},
                    {"measurement_ready", measurement_ready},
                    {"posts_sent", posts_sent},
                    {"selected_cluster", selected_cluster},
                    {"silhouette", silhouette}};
        out << header.dump() << '\n';
        for (const auto& t : targets) {
            json j{{"kind", "target"},     {"rank", t.rank},
                   {"user_id", t.user_id}, {"handle", t.handle},
                   {"status", t.status},   {"model_used", t.model_used},
                   {"body", t.body},       {"rendered", t.rendered},
                   {"code", t.code},       {"scheduled_at", t.scheduled_at},
                   {"posted_at", t.posted_at}, {"attempts", t.attempts}};
            out << j.dump() << '\n';
        }
        for (const auto& c : clicks) {
            json j = click_to_json(c);
            j["kind"] = "click";
            out << j.dump() << '\n';
        }
    }

    static CampaignLog load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw Error("cannot open " + path);
        CampaignLog log;
        bool have_header = false;
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (line.empty()) continue;
            json j = json::parse(line, nullptr, false);
            if (j.is_discarded() || !j.is_object() || !j.contains("kind"))
                throw MalformedRecord(line_no, "bad campaign log line");
            const std::string kind = j["kind"].get<std::string>();
            if (kind == "campaign") {
                log.duration = j.at("duration").get<std::int64_t>();
                log.measurement_delay = j.at("measurement_delay").get<std::int64_t>();
                log.scheduling_enabled = j.at("scheduling_enabled").get<bool>();
                log.scrambled_text = j.at("scrambled_text").get<bool>();
                log.rng_seed = j.at("rng_seed").get<std::uint64_t>();
                log.start_time = j.at("start_time").get<std::int64_t>();
                log.end_time = j.at("end_time").get<std::int64_t>();
                log.measurement_ready = j.at("measurement_ready").get<std::int64_t>();
                log.posts_sent = j.at("posts_sent").get<std::int64_t>();
                log.selected_cluster = j.at("selected_cluster").get<int>();
                log.silhouette = j.at("silhouette").get<double>();
                have_header = true;
            } else if (kind == "target") {
                TargetOutcome t;
                t.rank = j.at("rank").get<int>();
                t.user_id = j.at("user_id").get<std::string>();
                t.handle = j.at("handle").get<std::string>();
                t.status = j.at("status").get<std::string>();
                t.model_used = j.at("model_used").get<std::string>();
                t.body = j.at("body").get<std::string>();
                t.rendered = j.at("rendered").get<std::string>();
                t.code = j.at("code").get<std::string>();
                t.scheduled_at = j.at("scheduled_at").get<std::int64_t>();
                t.posted_at = j.at("posted_at").get<std::int64_t>();
                t.attempts = j.at("attempts").get<int>();
                log.targets.push_back(std::move(t));
            } else if (kind == "click") {
                log.clicks.push_back(click_from_json(j, line_no));
            } else {
                throw MalformedRecord(line_no, "unknown log record kind " + kind);
            }
        }
        if (!have_header) throw ConfigError("campaign log has no header: " + path);
        return log;
    }
};

namespace detail {

inline std::vector<std::string> corpus_token_set(const Corpus& corpus) {
    std::set<std::string> distinct;
    for (const auto& p : corpus.posts())
        for (const auto& t : tokenize(p.text)) distinct.insert(t.surface);
    return {distinct.begin(), distinct.end()};
}

// Ablation body: uniform draws from the corpus global token set.
inline std::string scrambled_body(const std::vector<std::string>& vocab,
                                  const std::string& user_id, std::uint64_t campaign_seed,
                                  std::size_t max_tokens) {
    if (vocab.empty()) return "";
    Rng rng(combine_seed(combine_seed(campaign_seed, fnv1a64(user_id)), 0x5c4a));
    std::string out;
    for (std::size_t i = 0; i < max_tokens; ++i) {
        const std::string& tok = vocab[rng.below(vocab.size())];
        if (!fits_budget(out, tok)) break;
        append_token(out, tok);
    }
    return out;
}

} // namespace detail

// End-to-end pipeline: triage, per-target generation, link creation,
// scheduling, posting through the sim, waiting out the measurement window.
// Per-target failures never abort the campaign.
inline CampaignLog run_campaign(const Corpus& corpus, SocialSim& sim,
                                const ReferenceLexicon& lexicon, const LstmModel* lstm,
                                const CampaignConfig& config,
                                const TriageResult* pre_triaged = nullptr) {
    if (config.duration <= 0) throw ConfigError("duration must be positive");
    if (config.measurement_delay < 0) throw ConfigError("measurement_delay must be >= 0");
    if (config.rate_limit) sim.set_rate_limit(*config.rate_limit);

    CampaignLog log;
    log.duration = config.duration;
    log.measurement_delay = config.measurement_delay;
    log.scheduling_enabled = config.scheduling_enabled;
    log.scrambled_text = config.scrambled_text;
    log.rng_seed = config.rng_seed;
    log.start_time = sim.now();

    TriageResult triage;
    if (pre_triaged) {
        triage = *pre_triaged;
    } else {
        std::vector<FeatureVector> features;
        const std::int64_t ref = corpus.reference_time();
        for (const auto& u : corpus.users())
            features.push_back(extract_features(u, corpus.timeline(u.user_id), ref));
        const auto standardized = standardize(features);
        int k = config.triage_k;
        std::uint64_t fit_seed = config.rng_seed;
        if (config.triage_trials > 0) {
            const auto found =
                hyperparameter_search(standardized, config.triage_trials, config.rng_seed);
            k = found.k;
            fit_seed = found.seed;
        }
        const ClusterModel model = kmeans_fit(standardized, k, fit_seed);
        triage = select_target_cluster(model, features);
    }
    log.selected_cluster = triage.selected_cluster;
    log.silhouette = triage.silhouette;

    const std::int64_t start = sim.now();
    const std::int64_t posting_deadline = start + config.duration;
    const std::vector<std::string> scramble_vocab =
        config.scrambled_text ? detail::corpus_token_set(corpus) : std::vector<std::string>{};

    struct Planned {
        std::int64_t when;
        int rank;
        std::size_t outcome_idx;
        std::string rendered;
    };
    std::vector<Planned> queue;

    int rank = 0;
    for (const auto& [user_id, engagement] : triage.ranked_targets) {
        ++rank;
        TargetOutcome outcome;
        outcome.rank = rank;
        outcome.user_id = user_id;
        const UserProfile& profile = corpus.user(user_id);
        const Timeline& timeline = corpus.timeline(user_id);
        outcome.handle = profile.handle;

        SeedTopics seeds;
        try {
            seeds = extract_seed(timeline, lexicon, config.seed_topic_count);
        } catch (const NoTopic&) {
            // fall through with empty seeds; the HMM can start unseeded
        }

        GenerationConfig gen;
        gen.temperature = config.temperature;
        gen.max_tokens = config.max_tokens;
        gen.rng_seed = combine_seed(config.rng_seed, fnv1a64(user_id));

        std::string body;
        if (config.scrambled_text) {
            outcome.model_used = "scrambled";
            body = detail::scrambled_body(scramble_vocab, user_id, config.rng_seed,
                                          config.max_tokens);
        } else {
            ModelChoice choice = select_model(profile, timeline, config.model_threshold);
            if (seeds.empty() || (choice == ModelChoice::lstm && !lstm))
                choice = ModelChoice::hmm;
            try {
                if (choice == ModelChoice::lstm) {
                    outcome.model_used = "lstm";
                    body = generate(*lstm, seeds, gen);
                } else {
                    outcome.model_used = "hmm";
                    const HmmModel hmm = train_hmm(timeline, config.hmm_order);
                    body = generate(hmm, seeds, gen);
                }
            } catch (const Error&) {
                body.clear();
            }
        }
        if (body.empty()) {
            outcome.status = "skipped_no_text";
            outcome.model_used = outcome.model_used.empty() ? "none" : outcome.model_used;
            log.targets.push_back(std::move(outcome));
            continue;
        }
        outcome.body = body;

        PhishPost post;
        try {
            const ShortLink link =
                sim.links().shorten(config.destination_base, profile.handle, start);
            post = compose_post(profile.handle, body, link, sim.config().link_display_prefix);
        } catch (const HandleTooLong&) {
            outcome.status = "skipped_handle";
            log.targets.push_back(std::move(outcome));
            continue;
        }
        outcome.code = post.link.code;
        outcome.rendered = post.rendered;

        std::int64_t when = start;
        if (config.scheduling_enabled) {
            try {
                const PostSchedule slot = pick_post_time(
                    activity_histogram(timeline), combine_seed(config.rng_seed, fnv1a64(user_id)));
                when = next_occurrence(start, slot.hour, slot.minute);
            } catch (const NoHistory&) {
                when = start; // no history: fall back to immediate posting
            }
        }
        outcome.scheduled_at = when;
        outcome.status = "pending";
        log.targets.push_back(std::move(outcome));
        queue.push_back(Planned{when, rank, log.targets.size() - 1, post.rendered});
    }

    std::sort(queue.begin(), queue.end(), [](const Planned& a, const Planned& b) {
        if (a.when != b.when) return a.when < b.when;
        return a.rank < b.rank;
    });

    // submission loop: advance the sim to each slot, retry on rate limiting
    std::size_t qi = 0;
    while (qi < queue.size()) {
        Planned item = queue[qi];
        if (item.when >= posting_deadline) {
            log.targets[item.outcome_idx].status = "skipped_duration";
            ++qi;
            continue;
        }
        if (item.when > sim.now()) sim.step(item.when);
        TargetOutcome& outcome = log.targets[item.outcome_idx];
        ++outcome.attempts;
        try {
            sim.submit_post(sim.config().attacker_id, item.rendered, item.when);
            outcome.status = "posted";
            outcome.posted_at = item.when;
            ++log.posts_sent;
            ++qi;
        } catch (const RateLimited& rl) {
            item.when += rl.retry_after_seconds;
            // re-insert keeping (time, rank) order among the remaining items
            std::size_t pos = qi + 1;
            while (pos < queue.size() &&
                   (queue[pos].when < item.when ||
                    (queue[pos].when == item.when && queue[pos].rank < item.rank)))
                ++pos;
            queue.insert(queue.begin() + std::ptrdiff_t(pos), item);
            queue.erase(queue.begin() + std::ptrdiff_t(qi));
        }
    }

    sim.step(posting_deadline);
    sim.step(posting_deadline + config.measurement_delay);
    log.end_time = sim.now();
    log.measurement_ready = posting_deadline + config.measurement_delay;
    log.clicks = sim.links().all_events();
    return log;
}

struct CampaignReport {
    std::int64_t total_targets = 0; // posts actually sent
    double posts_per_minute = 0;
    std::int64_t max_clickthroughs = 0; // human + likely_human
    double ctr_lower = 0;
    double ctr_upper = 0;
    ClickClassification classification;
    std::vector<TargetOutcome> per_target;

    json to_json() const {
        json targets = json::array();
        for (const auto& t : per_target) {
            targets.push_back(json{{"rank", t.rank},
                                   {"user_id", t.user_id},
                                   {"handle", t.handle},
                                   {"status", t.status},
                                   {"model_used", t.model_used},
                                   {"code", t.code},
                                   {"posted_at", t.posted_at}});
        }
        return json{{"total_targets", total_targets},
                    {"posts_per_minute", posts_per_minute},
                    {"max_clickthroughs", max_clickthroughs},
                    {"ctr_lower", ctr_lower},
                    {"ctr_upper", ctr_upper},
                    {"clicks",
                     json{{"human", classification.human},
                          {"likely_human", classification.likely_human},
                          {"crawler", classification.crawler},
                          {"unknown", classification.unknown}}},
                    {"targets", targets}};
    }

    std::string to_table() const {
        auto row = [](const std::string& metric, const std::string& value) {
            std::string line = metric;
            line.resize(26, ' ');
            return line + value + "\n";
        };
        auto fmt = [](double v) {
            char buf[32];
            std::snprintf(buf, sizeof buf, "%.3f", v);
            return std::string(buf);
        };
        std::string t;
        t += row("Metric", "Tool");
        t += row("Total Targets", std::to_string(total_targets));
        t += row("Posts/minute", fmt(posts_per_minute));
        t += row("Maximum Click-throughs", std::to_string(max_clickthroughs));
        t += row("CTR lower bound", fmt(ctr_lower));
        t += row("CTR upper bound", fmt(ctr_upper));
        t += row("Human clicks", std::to_string(classification.human));
        t += row("Likely-human clicks", std::to_string(classification.likely_human));
        t += row("Crawler clicks", std::to_string(classification.crawler));
        t += row("Unclassified clicks", std::to_string(classification.unknown));
        return t;
    }
};

// Pure function of the log; safe to re-run.
inline CampaignReport report(const CampaignLog& log, const ClassifyRules& rules) {
    if (log.end_time < log.measurement_ready)
        throw MeasurementPending(log.end_time, log.measurement_ready);
    CampaignReport r;
    r.total_targets = log.posts_sent;
    r.posts_per_minute = double(log.posts_sent) / (double(log.duration) / 60.0);
    r.classification = classify_clicks(log.clicks, rules);
    r.max_clickthroughs = r.classification.human + r.classification.likely_human;
    if (log.posts_sent > 0) {
        const auto [lo, hi] = ctr_bounds(log.posts_sent, r.classification);
        r.ctr_lower = lo;
        r.ctr_upper = hi;
    }
    r.per_target = log.targets;
    return r;
}

} // namespace snapsim
