#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "snapsim/corpus.hpp"
#include "snapsim/errors.hpp"
#include "snapsim/hmm.hpp"
#include "snapsim/lstm.hpp"
#include "snapsim/rng.hpp"
#include "snapsim/topics.hpp"

namespace snapsim {

// 140 minus '@' + 15-char handle + two separators + 13-char display link.
inline constexpr std::size_t kBodyCharBudget = 110;
inline constexpr std::size_t kPrimeSeedCount = 2;

struct GenerationConfig {
    double temperature = 1.0; // 0 selects greedy argmax decoding
    std::size_t max_tokens = 24;
    std::uint64_t rng_seed = 0;
};

namespace detail {

inline bool fits_budget(const std::string& so_far, const std::string& next) {
    const std::size_t extra = so_far.empty() ? next.size() : next.size() + 1;
    return so_far.size() + extra <= kBodyCharBudget;
}

inline void append_token(std::string& out, const std::string& tok) {
    if (!out.empty()) out += ' ';
    out += tok;
}

// Temperature-aware draw from an ordered (token -> prob) map. T=0 is argmax
// with the map's lexicographic order breaking ties.
inline const std::string* draw_from_distribution(const std::map<std::string, double>& dist,
                                                 double temperature, Rng& rng) {
    if (dist.empty()) return nullptr;
    if (temperature <= 0.0) {
        const std::string* best = nullptr;
        double best_p = -1;
        for (const auto& [tok, p] : dist)
            if (p > best_p) {
                best_p = p;
                best = &tok;
            }
        return best;
    }
    double total = 0;
    std::vector<std::pair<const std::string*, double>> scaled;
    scaled.reserve(dist.size());
    for (const auto& [tok, p] : dist) {
        const double w = std::pow(p, 1.0 / temperature);
        scaled.emplace_back(&tok, w);
        total += w;
    }
    const double x = rng.next_double() * total;
    double cum = 0;
    for (const auto& [tok, w] : scaled) {
        cum += w;
        if (cum > x) return tok;
    }
    return scaled.back().first;
}

} // namespace detail

// LSTM path: prime with the top seed tokens (surface forms are emitted even
// when the network sees <unk>), then sample the temperature-scaled softmax
// until <eos>, max_tokens, or the character budget.
inline std::string generate(const LstmModel& model, const SeedTopics& seeds,
                            const GenerationConfig& cfg) {
    if (!model.trained) throw UntrainedModel();
    Rng rng(cfg.rng_seed);
    const int unk = model.token_id(kUnkToken);
    const int eos = model.token_id(kEosToken);

    LstmModel::State state = model.initial_state();
    std::vector<double> logits, probs;
    std::string out;
    std::size_t emitted = 0;
    bool have_logits = false;

    const std::size_t primes = std::min(kPrimeSeedCount, seeds.entries.size());
    for (std::size_t i = 0; i < primes && emitted < cfg.max_tokens; ++i) {
        const std::string& tok = seeds.entries[i].first;
        if (!detail::fits_budget(out, tok)) break;
        detail::append_token(out, tok);
        ++emitted;
        model.step(model.token_id(tok), state, logits);
        have_logits = true;
    }
    if (!have_logits) {
        // no usable seed: let <eos> play start-of-text
        model.step(eos, state, logits);
    }

    while (emitted < cfg.max_tokens) {
        logits[std::size_t(unk)] = -1e30; // never surface the unknown marker
        int next;
        if (cfg.temperature <= 0.0) {
            next = 0;
            for (std::size_t v = 1; v < logits.size(); ++v)
                if (logits[v] > logits[std::size_t(next)]) next = int(v);
        } else {
            LstmModel::softmax(logits, probs, cfg.temperature);
            const double x = rng.next_double();
            double cum = 0;
            next = int(probs.size()) - 1;
            for (std::size_t v = 0; v < probs.size(); ++v) {
                cum += probs[v];
                if (cum > x) {
                    next = int(v);
                    break;
                }
            }
        }
        if (next == eos) break;
        const std::string& tok = model.vocab[std::size_t(next)];
        if (!detail::fits_budget(out, tok)) break;
        detail::append_token(out, tok);
        ++emitted;
        model.step(next, state, logits);
    }
    return out;
}

// HMM path: start from the highest-scoring seed present in the transition
// table, else from the start distribution; walk the chain until a dead end,
// max_tokens, or the character budget.
inline std::string generate(const HmmModel& model, const SeedTopics& seeds,
                            const GenerationConfig& cfg) {
    if (!model.trained) throw UntrainedModel();
    Rng rng(cfg.rng_seed);

    auto seed_context = [&](const std::string& tok) {
        std::vector<std::string> ctx(std::size_t(model.order), kHmmStartMark);
        ctx.back() = tok;
        return ctx;
    };

    std::string out;
    std::vector<std::string> ctx;
    for (const auto& [tok, score] : seeds.entries) {
        auto candidate = seed_context(tok);
        if (model.transitions.count(HmmModel::context_key(candidate))) {
            if (!detail::fits_budget(out, tok)) return out;
            ctx = std::move(candidate);
            detail::append_token(out, tok);
            break;
        }
    }
    if (ctx.empty()) {
        const std::string* first = detail::draw_from_distribution(model.start, cfg.temperature, rng);
        if (!first || !detail::fits_budget(out, *first)) return out;
        ctx = seed_context(*first);
        detail::append_token(out, *first);
    }

    std::size_t emitted = 1;
    while (emitted < cfg.max_tokens) {
        auto it = model.transitions.find(HmmModel::context_key(ctx));
        if (it == model.transitions.end()) break; // unseen context: chain ends
        const std::string* next = detail::draw_from_distribution(it->second, cfg.temperature, rng);
        if (!next || !detail::fits_budget(out, *next)) break;
        detail::append_token(out, *next);
        ++emitted;
        ctx.erase(ctx.begin());
        ctx.push_back(*next);
    }
    return out;
}

enum class ModelChoice { lstm, hmm };

// HMMs overfit small corpora but adapt to non-English users, so they get the
// non-English accounts and the prolific posters; everyone else gets the
// embedding-primed LSTM.
inline ModelChoice select_model(const UserProfile& profile, const Timeline& timeline,
                                std::size_t threshold = 200) {
    const bool non_english =
        profile.language_hint && !profile.language_hint->starts_with("en");
    if (non_english || timeline.posts.size() >= threshold) return ModelChoice::hmm;
    return ModelChoice::lstm;
}

} // namespace snapsim
