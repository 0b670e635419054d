#pragma once

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "snapsim/errors.hpp"

namespace snapsim {

inline constexpr const char* kUnkToken = "<unk>";
inline constexpr const char* kEosToken = "<eos>";

// GloVe-style table: token -> d-vector, with a guaranteed <unk> row.
struct EmbeddingTable {
    std::size_t dim = 0;
    std::map<std::string, std::vector<double>> vectors;

    const std::vector<double>* find(const std::string& token) const {
        auto it = vectors.find(token);
        return it == vectors.end() ? nullptr : &it->second;
    }

    const std::vector<double>& unk() const { return vectors.at(kUnkToken); }
};

// Plain-text format, one line per token: `token v1 v2 ... vd`. If <unk> is
// absent it becomes the component-wise mean of all rows.
inline EmbeddingTable load_embeddings(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path);
    EmbeddingTable table;
    std::string line;
    std::size_t line_no = 0;
    std::vector<double> mean;
    std::size_t rows = 0;
    while (std::getline(in, line)) {
        ++line_no;
        while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
        if (line.empty()) continue;
        const char* p = line.data();
        const char* end = line.data() + line.size();
        while (p < end && *p == ' ') ++p;
        const char* tok_end = p;
        while (tok_end < end && *tok_end != ' ') ++tok_end;
        std::string token(p, tok_end);
        std::vector<double> vec;
        p = tok_end;
        while (p < end) {
            while (p < end && *p == ' ') ++p;
            if (p >= end) break;
            double v = 0;
            auto [next, ec] = std::from_chars(p, end, v);
            if (ec != std::errc())
                throw MalformedRecord(line_no, "unparseable value in embedding row");
            if (!std::isfinite(v))
                throw MalformedRecord(line_no, "non-finite value in embedding row");
            vec.push_back(v);
            p = next;
        }
        if (vec.empty()) throw DimensionMismatch(line_no, "row has no values");
        if (table.dim == 0) {
            if (vec.size() != 25 && vec.size() != 50 && vec.size() != 100 && vec.size() != 200)
                throw DimensionMismatch(line_no, "dimension must be 25, 50, 100, or 200; got " +
                                                     std::to_string(vec.size()));
            table.dim = vec.size();
            mean.assign(table.dim, 0.0);
        } else if (vec.size() != table.dim) {
            throw DimensionMismatch(line_no, "expected " + std::to_string(table.dim) +
                                                 " values, got " + std::to_string(vec.size()));
        }
        for (std::size_t d = 0; d < table.dim; ++d) mean[d] += vec[d];
        ++rows;
        table.vectors[std::move(token)] = std::move(vec);
    }
    if (rows == 0) throw EmptyFile(path);
    if (!table.vectors.count(kUnkToken)) {
        for (auto& m : mean) m /= double(rows);
        table.vectors[kUnkToken] = std::move(mean);
    }
    return table;
}

} // namespace snapsim
