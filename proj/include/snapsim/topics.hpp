#pragma once

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "snapsim/corpus.hpp"
#include "snapsim/errors.hpp"

namespace snapsim {

// Stop-word list plus a reference unigram frequency table. Tokens absent from
// the table score against floor_freq, so hashtags and niche jargon are not
// penalized for being outside the shipped lexicon.
struct ReferenceLexicon {
    std::set<std::string> stop_words;
    std::map<std::string, double> reference_freq; // token -> relative frequency in (0,1]
    double floor_freq = 1e-8;

    bool is_stop(const std::string& tok) const { return stop_words.count(tok) != 0; }

    double freq(const std::string& tok) const {
        auto it = reference_freq.find(tok);
        return it == reference_freq.end() ? floor_freq : it->second;
    }

    void validate() const {
        if (stop_words.empty()) throw ConfigError("stop-word list is empty");
        if (!(floor_freq > 0)) throw ConfigError("floor_freq must be positive");
        for (const auto& [tok, f] : reference_freq)
            if (!(f > 0.0 && f <= 1.0))
                throw ConfigError("reference frequency out of (0,1] for token " + tok);
    }

    // stopwords.txt: one token per line. reffreq.tsv: token<TAB>frequency.
    static ReferenceLexicon load(const std::string& stopwords_path,
                                 const std::string& reffreq_path,
                                 double floor = 1e-8) {
        ReferenceLexicon lex;
        lex.floor_freq = floor;
        {
            std::ifstream in(stopwords_path);
            if (!in) throw Error("cannot open " + stopwords_path);
            std::string line;
            while (std::getline(in, line)) {
                while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
                if (!line.empty()) lex.stop_words.insert(line);
            }
        }
        {
            std::ifstream in(reffreq_path);
            if (!in) throw Error("cannot open " + reffreq_path);
            std::string line;
            std::size_t line_no = 0;
            while (std::getline(in, line)) {
                ++line_no;
                while (!line.empty() && line.back() == '\r') line.pop_back();
                if (line.empty()) continue;
                auto tab = line.find('\t');
                if (tab == std::string::npos)
                    throw MalformedRecord(line_no, "expected token<TAB>frequency");
                std::string tok = line.substr(0, tab);
                double f = 0;
                auto [p, ec] = std::from_chars(line.data() + tab + 1, line.data() + line.size(), f);
                if (ec != std::errc() || !(f > 0.0 && f <= 1.0))
                    throw MalformedRecord(line_no, "bad frequency for token " + tok);
                lex.reference_freq[tok] = f;
            }
        }
        lex.validate();
        return lex;
    }
};

// Ordered (token, score) pairs, scores descending, ties by token.
struct SeedTopics {
    std::vector<std::pair<std::string, double>> entries;

    bool empty() const { return entries.empty(); }
    const std::string& top() const { return entries.front().first; }
};

inline bool seed_eligible(const std::string& tok, const ReferenceLexicon& lex) {
    if (tok.empty() || tok == kUrlToken) return false;
    if (tok.front() == '@') return false; // mentions are addresses, not topics
    return !lex.is_stop(tok);
}

// Relative-frequency topic extraction: tokens frequent for the user but rare
// in the reference lexicon float to the top.
inline SeedTopics extract_seed(const Timeline& timeline, const ReferenceLexicon& lex,
                               std::size_t n) {
    if (n == 0) throw ConfigError("seed count must be positive");
    std::map<std::string, std::int64_t> counts;
    for (const auto& post : timeline.posts)
        for (const auto& tok : tokenize(post.text))
            if (seed_eligible(tok.surface, lex)) ++counts[tok.surface];
    if (counts.empty()) throw NoTopic(timeline.user_id);

    std::vector<std::pair<std::string, double>> scored;
    scored.reserve(counts.size());
    for (const auto& [tok, count] : counts)
        scored.emplace_back(tok, double(count) / lex.freq(tok));
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    if (scored.size() > n) scored.resize(n);
    return SeedTopics{std::move(scored)};
}

} // namespace snapsim
