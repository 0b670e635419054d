#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "snapsim/corpus.hpp"
#include "snapsim/errors.hpp"

namespace snapsim {

// Padding marker for not-yet-filled context slots. tokenize() can never emit
// it (angle brackets are stripped), so it cannot collide with a real token.
inline constexpr const char* kHmmStartMark = "<s>";

// Maximum-likelihood n-gram chain trained directly on one user's posts.
// No smoothing: overfitting small corpora is the intended behavior.
struct HmmModel {
    int order = 1; // 1 = bigram contexts, 2 = trigram contexts
    // context key is the space-joined context tuple (tokens never contain
    // whitespace); values are proper distributions over the next token
    std::map<std::string, std::map<std::string, double>> transitions;
    std::map<std::string, double> start; // first-token distribution
    std::set<std::string> vocab;
    bool trained = false;

    static std::string context_key(const std::vector<std::string>& ctx) {
        std::string key;
        for (std::size_t i = 0; i < ctx.size(); ++i) {
            if (i) key += ' ';
            key += ctx[i];
        }
        return key;
    }
};

inline HmmModel train_hmm(const Timeline& timeline, int order = 1) {
    if (order != 1 && order != 2) throw ConfigError("hmm order must be 1 or 2");
    HmmModel model;
    model.order = order;
    std::map<std::string, std::map<std::string, std::int64_t>> counts;
    std::map<std::string, std::int64_t> start_counts;
    bool enough = false;
    for (const auto& post : timeline.posts) {
        const auto toks = tokenize(post.text);
        if (toks.empty()) continue;
        if (toks.size() >= std::size_t(order) + 1) enough = true;
        ++start_counts[toks[0].surface];
        std::vector<std::string> ctx(std::size_t(order), kHmmStartMark);
        for (const auto& tok : toks) {
            model.vocab.insert(tok.surface);
            // a fully-padded context carries no information; the start
            // distribution already covers the first token
            const bool all_padding = std::all_of(ctx.begin(), ctx.end(), [](const auto& c) {
                return c == kHmmStartMark;
            });
            if (!all_padding) ++counts[HmmModel::context_key(ctx)][tok.surface];
            ctx.erase(ctx.begin());
            ctx.push_back(tok.surface);
        }
    }
    if (!enough)
        throw InsufficientText("need at least one post with " + std::to_string(order + 1) +
                               " tokens for order " + std::to_string(order));
    for (const auto& [ctx, dist] : counts) {
        std::int64_t total = 0;
        for (const auto& [tok, c] : dist) total += c;
        auto& out = model.transitions[ctx];
        for (const auto& [tok, c] : dist) out[tok] = double(c) / double(total);
    }
    std::int64_t stotal = 0;
    for (const auto& [tok, c] : start_counts) stotal += c;
    for (const auto& [tok, c] : start_counts) model.start[tok] = double(c) / double(stotal);
    model.trained = true;
    return model;
}

} // namespace snapsim
