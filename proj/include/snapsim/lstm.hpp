#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "snapsim/corpus.hpp"
#include "snapsim/embeddings.hpp"
#include "snapsim/errors.hpp"
#include "snapsim/rng.hpp"

namespace snapsim {

inline constexpr std::size_t kMaxVocab = 20000;
inline constexpr std::int64_t kMinTokenCount = 2;

struct TrainConfig {
    double learning_rate = 1e-3;
    int epochs = 10;
    int bptt_window = 16;
    int hidden_size = 128;
    std::uint64_t seed = 0;
    double grad_clip_norm = 5.0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
};

// Single-layer word-level LSTM with a trainable embedding matrix initialized
// from a pretrained table and a softmax projection over the vocabulary.
// All parameters live in one flat vector; gate order is i, f, o, g.
class LstmModel {
public:
    std::vector<std::string> vocab; // [0]=<unk>, [1]=<eos>
    std::size_t embed_dim = 0;
    std::size_t hidden_size = 0;
    std::vector<double> params;
    bool recurrence_bypassed = false; // ablation: project embeddings directly
    bool trained = false;
    TrainConfig config;
    double initial_loss = 0; // corpus mean NLL before training
    double final_loss = 0;   // and after
    std::vector<double> epoch_losses;

    std::size_t vocab_size() const { return vocab.size(); }
    std::size_t gate_rows() const { return hidden_size; }
    std::size_t gate_cols() const { return embed_dim + hidden_size; }

    std::size_t off_embed() const { return 0; }
    std::size_t off_gates() const { return vocab.size() * embed_dim; }
    std::size_t off_gate_bias() const { return off_gates() + 4 * gate_rows() * gate_cols(); }
    std::size_t off_proj() const { return off_gate_bias() + 4 * hidden_size; }
    std::size_t off_proj_bias() const { return off_proj() + vocab.size() * hidden_size; }
    std::size_t param_count() const { return off_proj_bias() + vocab.size(); }

    const double* embed_row(std::size_t id) const { return params.data() + id * embed_dim; }
    const double* gate_row(int gate, std::size_t j) const {
        return params.data() + off_gates() + (std::size_t(gate) * gate_rows() + j) * gate_cols();
    }
    const double* gate_bias(int gate) const {
        return params.data() + off_gate_bias() + std::size_t(gate) * hidden_size;
    }
    const double* proj_row(std::size_t v) const {
        return params.data() + off_proj() + v * hidden_size;
    }
    const double* proj_bias() const { return params.data() + off_proj_bias(); }

    int token_id(const std::string& tok) const {
        auto it = index_.find(tok);
        return it == index_.end() ? 0 : it->second; // 0 = <unk>
    }

    void rebuild_index() {
        index_.clear();
        for (std::size_t i = 0; i < vocab.size(); ++i) index_[vocab[i]] = int(i);
    }

    static LstmModel init(std::vector<std::string> vocabulary, const EmbeddingTable& table,
                          const TrainConfig& cfg, bool bypass_recurrence = false) {
        LstmModel m;
        m.vocab = std::move(vocabulary);
        m.embed_dim = table.dim;
        m.hidden_size = bypass_recurrence ? table.dim : std::size_t(cfg.hidden_size);
        m.recurrence_bypassed = bypass_recurrence;
        m.config = cfg;
        m.rebuild_index();
        m.params.assign(m.param_count(), 0.0);
        for (std::size_t v = 0; v < m.vocab.size(); ++v) {
            const std::vector<double>* row = table.find(m.vocab[v]);
            if (!row) row = &table.unk();
            std::copy(row->begin(), row->end(), m.params.begin() + v * m.embed_dim);
        }
        Rng rng(combine_seed(cfg.seed, 0x11a5));
        const double gate_scale = 1.0 / std::sqrt(double(m.gate_cols()));
        for (std::size_t i = 0; i < 4 * m.gate_rows() * m.gate_cols(); ++i)
            m.params[m.off_gates() + i] = rng.uniform(-gate_scale, gate_scale);
        // forget-gate bias starts at 1 so early gradients flow through time
        for (std::size_t j = 0; j < m.hidden_size; ++j)
            m.params[m.off_gate_bias() + 1 * m.hidden_size + j] = 1.0;
        const double proj_scale = 1.0 / std::sqrt(double(m.hidden_size));
        for (std::size_t i = 0; i < m.vocab.size() * m.hidden_size; ++i)
            m.params[m.off_proj() + i] = rng.uniform(-proj_scale, proj_scale);
        return m;
    }

    struct State {
        std::vector<double> h, c;
    };

    State initial_state() const { return State{std::vector<double>(hidden_size, 0.0),
                                               std::vector<double>(hidden_size, 0.0)}; }

    // Consume one token, advance the state, and produce next-token logits.
    void step(int token, State& state, std::vector<double>& logits) const {
        const std::size_t H = hidden_size, D = embed_dim, V = vocab.size();
        const double* x = embed_row(std::size_t(token));
        if (recurrence_bypassed) {
            std::copy(x, x + D, state.h.begin()); // H == D in this mode
        } else {
            std::vector<double> gate(4 * H);
            for (int g = 0; g < 4; ++g) {
                const double* bias = gate_bias(g);
                for (std::size_t j = 0; j < H; ++j) {
                    const double* w = gate_row(g, j);
                    double s = bias[j];
                    for (std::size_t t = 0; t < D; ++t) s += w[t] * x[t];
                    for (std::size_t t = 0; t < H; ++t) s += w[D + t] * state.h[t];
                    gate[std::size_t(g) * H + j] = s;
                }
            }
            for (std::size_t j = 0; j < H; ++j) {
                const double i = sigmoid(gate[0 * H + j]);
                const double f = sigmoid(gate[1 * H + j]);
                const double o = sigmoid(gate[2 * H + j]);
                const double g = std::tanh(gate[3 * H + j]);
                state.c[j] = f * state.c[j] + i * g;
                state.h[j] = o * std::tanh(state.c[j]);
            }
        }
        logits.assign(V, 0.0);
        const double* bp = proj_bias();
        for (std::size_t v = 0; v < V; ++v) {
            const double* w = proj_row(v);
            double s = bp[v];
            for (std::size_t j = 0; j < H; ++j) s += w[j] * state.h[j];
            logits[v] = s;
        }
    }

    static double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

    // Numerically stable softmax; temperature 1 by default.
    static void softmax(const std::vector<double>& logits, std::vector<double>& probs,
                        double temperature = 1.0) {
        probs.resize(logits.size());
        const double t = temperature > 0 ? temperature : 1.0;
        double mx = logits[0];
        for (double l : logits) mx = std::max(mx, l);
        double sum = 0;
        for (std::size_t i = 0; i < logits.size(); ++i) {
            probs[i] = std::exp((logits[i] - mx) / t);
            sum += probs[i];
        }
        for (auto& p : probs) p /= sum;
    }

    // Mean next-token NLL over the transitions of `ids`, carrying `state`
    // across the call. Backprop is truncated at the chunk boundary: no
    // gradient flows into the incoming state. Returns 0 for < 2 ids.
    double chunk_loss(std::span<const int> ids, State& state, std::vector<double>* grad) const {
        const std::size_t T = ids.size() >= 2 ? ids.size() - 1 : 0;
        if (T == 0) return 0.0;
        const std::size_t H = hidden_size, D = embed_dim, V = vocab.size();

        struct Cache {
            int input, target;
            std::vector<double> h_prev, c_prev, i, f, o, g, c, tc, probs;
        };
        std::vector<Cache> caches;
        if (grad) caches.resize(T);

        double nll = 0;
        std::vector<double> logits, probs;
        for (std::size_t t = 0; t < T; ++t) {
            Cache* cc = grad ? &caches[t] : nullptr;
            if (cc) {
                cc->input = ids[t];
                cc->target = ids[t + 1];
                cc->h_prev = state.h;
                cc->c_prev = state.c;
            }
            if (recurrence_bypassed) {
                const double* x = embed_row(std::size_t(ids[t]));
                std::copy(x, x + D, state.h.begin());
            } else {
                const double* x = embed_row(std::size_t(ids[t]));
                std::vector<double> pre(4 * H);
                for (int g = 0; g < 4; ++g) {
                    const double* bias = gate_bias(g);
                    for (std::size_t j = 0; j < H; ++j) {
                        const double* w = gate_row(g, j);
                        double s = bias[j];
                        for (std::size_t u = 0; u < D; ++u) s += w[u] * x[u];
                        for (std::size_t u = 0; u < H; ++u) s += w[D + u] * state.h[u];
                        pre[std::size_t(g) * H + j] = s;
                    }
                }
                if (cc) {
                    cc->i.resize(H);
                    cc->f.resize(H);
                    cc->o.resize(H);
                    cc->g.resize(H);
                    cc->c.resize(H);
                    cc->tc.resize(H);
                }
                for (std::size_t j = 0; j < H; ++j) {
                    const double iv = sigmoid(pre[0 * H + j]);
                    const double fv = sigmoid(pre[1 * H + j]);
                    const double ov = sigmoid(pre[2 * H + j]);
                    const double gv = std::tanh(pre[3 * H + j]);
                    const double cv = fv * state.c[j] + iv * gv;
                    const double tcv = std::tanh(cv);
                    state.c[j] = cv;
                    state.h[j] = ov * tcv;
                    if (cc) {
                        cc->i[j] = iv;
                        cc->f[j] = fv;
                        cc->o[j] = ov;
                        cc->g[j] = gv;
                        cc->c[j] = cv;
                        cc->tc[j] = tcv;
                    }
                }
            }
            logits.assign(V, 0.0);
            const double* bp = proj_bias();
            for (std::size_t v = 0; v < V; ++v) {
                const double* w = proj_row(v);
                double s = bp[v];
                for (std::size_t j = 0; j < H; ++j) s += w[j] * state.h[j];
                logits[v] = s;
            }
            softmax(logits, probs);
            nll += -std::log(std::max(probs[std::size_t(ids[t + 1])], 1e-300));
            if (cc) cc->probs = probs;
        }
        const double loss = nll / double(T);
        if (!grad) return loss;

        // Backward pass. dL/dlogits_t = (probs - onehot(target)) / T.
        grad->assign(param_count(), 0.0);
        std::vector<double> dh_next(H, 0.0), dc_next(H, 0.0);
        // h after step t is needed for dP; recompute from caches going backward
        // by replaying h_t = cache[t+1].h_prev (or final state for the last step)
        std::vector<double> h_t = state.h;
        for (std::size_t ti = T; ti-- > 0;) {
            const Cache& cc = caches[ti];
            const std::vector<double>& h_cur = (ti == T - 1) ? h_t : caches[ti + 1].h_prev;
            std::vector<double> dlogits = cc.probs;
            dlogits[std::size_t(cc.target)] -= 1.0;
            for (auto& d : dlogits) d /= double(T);

            std::vector<double> dh(H, 0.0);
            for (std::size_t j = 0; j < H; ++j) dh[j] = dh_next[j];
            double* gP = grad->data() + off_proj();
            double* gbp = grad->data() + off_proj_bias();
            for (std::size_t v = 0; v < V; ++v) {
                const double dv = dlogits[v];
                if (dv == 0.0) continue;
                const double* w = proj_row(v);
                double* gw = gP + v * H;
                for (std::size_t j = 0; j < H; ++j) {
                    gw[j] += dv * h_cur[j];
                    dh[j] += dv * w[j];
                }
                gbp[v] += dv;
            }

            if (recurrence_bypassed) {
                double* ge = grad->data() + std::size_t(cc.input) * D;
                for (std::size_t j = 0; j < H; ++j) ge[j] += dh[j];
                std::fill(dh_next.begin(), dh_next.end(), 0.0);
                continue;
            }

            std::vector<double> dpre(4 * H);
            std::vector<double> dc(H);
            for (std::size_t j = 0; j < H; ++j) {
                const double do_ = dh[j] * cc.tc[j];
                double dcv = dh[j] * cc.o[j] * (1.0 - cc.tc[j] * cc.tc[j]) + dc_next[j];
                const double df = dcv * cc.c_prev[j];
                const double di = dcv * cc.g[j];
                const double dg = dcv * cc.i[j];
                dc[j] = dcv * cc.f[j];
                dpre[0 * H + j] = di * cc.i[j] * (1.0 - cc.i[j]);
                dpre[1 * H + j] = df * cc.f[j] * (1.0 - cc.f[j]);
                dpre[2 * H + j] = do_ * cc.o[j] * (1.0 - cc.o[j]);
                dpre[3 * H + j] = dg * (1.0 - cc.g[j] * cc.g[j]);
            }
            const double* x = embed_row(std::size_t(cc.input));
            double* ge = grad->data() + std::size_t(cc.input) * D;
            std::vector<double> dhp(H, 0.0);
            for (int g = 0; g < 4; ++g) {
                double* gb = grad->data() + off_gate_bias() + std::size_t(g) * H;
                for (std::size_t j = 0; j < H; ++j) {
                    const double dp = dpre[std::size_t(g) * H + j];
                    if (dp == 0.0) continue;
                    const double* w = gate_row(g, j);
                    double* gw = grad->data() + off_gates() +
                                 (std::size_t(g) * gate_rows() + j) * gate_cols();
                    for (std::size_t u = 0; u < D; ++u) {
                        gw[u] += dp * x[u];
                        ge[u] += dp * w[u];
                    }
                    for (std::size_t u = 0; u < H; ++u) {
                        gw[D + u] += dp * cc.h_prev[u];
                        dhp[u] += dp * w[D + u];
                    }
                    gb[j] += dp;
                }
            }
            dh_next = dhp;
            dc_next = dc;
        }
        return loss;
    }

    // Mean NLL over a full sequence, state carried across its whole length.
    double sequence_nll(std::span<const int> ids) const {
        State st = initial_state();
        double total = 0;
        std::size_t steps = 0;
        std::vector<double> logits, probs;
        for (std::size_t t = 0; t + 1 < ids.size(); ++t) {
            step(ids[t], st, logits);
            softmax(logits, probs);
            total += -std::log(std::max(probs[std::size_t(ids[t + 1])], 1e-300));
            ++steps;
        }
        return steps ? total / double(steps) : 0.0;
    }

    void save(const std::string& path) const {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw Error("cannot write " + path);
        const char magic[8] = {'S', 'N', 'A', 'P', 'L', 'M', '0', '1'};
        out.write(magic, 8);
        auto w64 = [&](std::uint64_t v) { out.write(reinterpret_cast<const char*>(&v), 8); };
        auto wd = [&](double v) { out.write(reinterpret_cast<const char*>(&v), 8); };
        w64(vocab.size());
        w64(embed_dim);
        w64(hidden_size);
        w64((trained ? 1u : 0u) | (recurrence_bypassed ? 2u : 0u));
        for (const auto& tok : vocab) {
            w64(tok.size());
            out.write(tok.data(), std::streamsize(tok.size()));
        }
        w64(params.size());
        out.write(reinterpret_cast<const char*>(params.data()),
                  std::streamsize(params.size() * sizeof(double)));
        wd(config.learning_rate);
        w64(std::uint64_t(config.epochs));
        w64(std::uint64_t(config.bptt_window));
        w64(config.seed);
        wd(initial_loss);
        wd(final_loss);
        w64(epoch_losses.size());
        for (double e : epoch_losses) wd(e);
    }

    static LstmModel load(const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw Error("cannot open " + path);
        char magic[8];
        in.read(magic, 8);
        if (!in || std::memcmp(magic, "SNAPLM01", 8) != 0)
            throw ConfigError("not a model checkpoint: " + path);
        auto r64 = [&]() {
            std::uint64_t v = 0;
            in.read(reinterpret_cast<char*>(&v), 8);
            return v;
        };
        auto rd = [&]() {
            double v = 0;
            in.read(reinterpret_cast<char*>(&v), 8);
            return v;
        };
        LstmModel m;
        const std::uint64_t vs = r64();
        m.embed_dim = r64();
        m.hidden_size = r64();
        const std::uint64_t flags = r64();
        if (!in || vs > kMaxVocab || m.embed_dim > 4096 || m.hidden_size > 65536)
            throw ConfigError("checkpoint header is implausible: " + path);
        m.trained = (flags & 1) != 0;
        m.recurrence_bypassed = (flags & 2) != 0;
        m.vocab.resize(vs);
        for (auto& tok : m.vocab) {
            const std::uint64_t len = r64();
            if (!in || len > 4096) throw ConfigError("checkpoint vocab is implausible: " + path);
            tok.resize(len);
            in.read(tok.data(), std::streamsize(len));
        }
        const std::uint64_t pc = r64();
        if (!in || pc != m.param_count())
            throw ConfigError("checkpoint dimensions are inconsistent: " + path);
        m.params.resize(pc);
        in.read(reinterpret_cast<char*>(m.params.data()), std::streamsize(pc * sizeof(double)));
        m.config.learning_rate = rd();
        m.config.epochs = int(r64());
        m.config.bptt_window = int(r64());
        m.config.seed = r64();
        m.config.hidden_size = int(m.hidden_size);
        m.initial_loss = rd();
        m.final_loss = rd();
        m.epoch_losses.resize(r64());
        for (auto& e : m.epoch_losses) e = rd();
        if (!in) throw ConfigError("truncated model checkpoint: " + path);
        m.rebuild_index();
        return m;
    }

private:
    std::map<std::string, int> index_;
};

// Vocabulary: tokens seen at least twice, capped at 20k by descending count
// (ties lexicographic), with <unk> and <eos> in front.
inline std::vector<std::string> build_vocab(const std::vector<Timeline>& corpus) {
    std::map<std::string, std::int64_t> counts;
    for (const auto& t : corpus)
        for (const auto& p : t.posts)
            for (const auto& tok : tokenize(p.text)) ++counts[tok.surface];
    std::vector<std::pair<std::string, std::int64_t>> ranked;
    for (const auto& [tok, c] : counts)
        if (c >= kMinTokenCount && tok != kUnkToken && tok != kEosToken)
            ranked.emplace_back(tok, c);
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    if (ranked.size() > kMaxVocab - 2) ranked.resize(kMaxVocab - 2);
    std::vector<std::string> vocab{kUnkToken, kEosToken};
    for (auto& [tok, c] : ranked) vocab.push_back(std::move(tok));
    return vocab;
}

inline std::vector<std::vector<int>> corpus_sequences(const std::vector<Timeline>& corpus,
                                                      const LstmModel& model) {
    std::vector<std::vector<int>> seqs;
    const int eos = model.token_id(kEosToken);
    for (const auto& t : corpus) {
        for (const auto& p : t.posts) {
            const auto toks = tokenize(p.text);
            if (toks.empty()) continue;
            std::vector<int> ids;
            ids.reserve(toks.size() + 1);
            for (const auto& tok : toks) ids.push_back(model.token_id(tok.surface));
            ids.push_back(eos);
            seqs.push_back(std::move(ids));
        }
    }
    return seqs;
}

inline double corpus_nll(const LstmModel& model, const std::vector<std::vector<int>>& seqs) {
    double total = 0;
    std::int64_t steps = 0;
    for (const auto& ids : seqs) {
        if (ids.size() < 2) continue;
        total += model.sequence_nll(ids) * double(ids.size() - 1);
        steps += std::int64_t(ids.size()) - 1;
    }
    return steps ? total / double(steps) : 0.0;
}

inline double perplexity(const LstmModel& model, const std::vector<Timeline>& corpus) {
    return std::exp(corpus_nll(model, corpus_sequences(corpus, model)));
}

// Next-token cross-entropy training: truncated BPTT, gradient clipping by
// global norm, Adam. Deterministic for a fixed config seed.
inline LstmModel train_lstm(const std::vector<Timeline>& corpus, const EmbeddingTable& table,
                            const TrainConfig& cfg) {
    bool any_text = false;
    for (const auto& t : corpus)
        for (const auto& p : t.posts)
            if (!tokenize(p.text).empty()) any_text = true;
    if (corpus.empty() || !any_text) throw EmptyCorpus();

    LstmModel model = LstmModel::init(build_vocab(corpus), table, cfg);
    auto seqs = corpus_sequences(corpus, model);
    model.initial_loss = corpus_nll(model, seqs);

    const std::size_t P = model.param_count();
    std::vector<double> grad(P), m(P, 0.0), v(P, 0.0);
    std::int64_t adam_t = 0;
    Rng shuffle_rng(combine_seed(cfg.seed, 0x5f0e));
    std::vector<std::size_t> order(seqs.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[std::size_t(shuffle_rng.below(i))]);
        double epoch_nll = 0;
        std::int64_t epoch_steps = 0;
        for (std::size_t si : order) {
            const auto& ids = seqs[si];
            if (ids.size() < 2) continue;
            LstmModel::State state = model.initial_state();
            const std::size_t W = std::size_t(std::max(1, cfg.bptt_window));
            for (std::size_t begin = 0; begin + 1 < ids.size(); begin += W) {
                const std::size_t len = std::min(W + 1, ids.size() - begin);
                std::span<const int> chunk(ids.data() + begin, len);
                const double loss = model.chunk_loss(chunk, state, &grad);
                if (!std::isfinite(loss)) throw NonFiniteLoss(epoch);
                epoch_nll += loss * double(len - 1);
                epoch_steps += std::int64_t(len) - 1;

                double norm2 = 0;
                for (double g : grad) norm2 += g * g;
                const double norm = std::sqrt(norm2);
                if (!std::isfinite(norm)) throw NonFiniteLoss(epoch);
                const double scale =
                    norm > cfg.grad_clip_norm ? cfg.grad_clip_norm / norm : 1.0;

                ++adam_t;
                const double bc1 = 1.0 - std::pow(cfg.beta1, double(adam_t));
                const double bc2 = 1.0 - std::pow(cfg.beta2, double(adam_t));
                for (std::size_t p = 0; p < P; ++p) {
                    const double g = grad[p] * scale;
                    m[p] = cfg.beta1 * m[p] + (1.0 - cfg.beta1) * g;
                    v[p] = cfg.beta2 * v[p] + (1.0 - cfg.beta2) * g * g;
                    model.params[p] -=
                        cfg.learning_rate * (m[p] / bc1) / (std::sqrt(v[p] / bc2) + cfg.adam_eps);
                }
            }
        }
        model.epoch_losses.push_back(epoch_steps ? epoch_nll / double(epoch_steps) : 0.0);
    }
    model.final_loss = corpus_nll(model, seqs);
    model.trained = true;
    return model;
}

// Central-difference oracle for the analytic gradient: perturbs `probes`
// randomly chosen parameters by +-eps and reports the worst
// |analytic - numeric| / max(1, |analytic|, |numeric|).
inline double gradient_check(const LstmModel& model, const std::vector<std::string>& sample,
                             std::size_t probes = 200, std::uint64_t seed = 1,
                             double eps = 1e-5) {
    std::vector<int> ids;
    ids.reserve(sample.size());
    for (const auto& tok : sample) ids.push_back(model.token_id(tok));

    LstmModel work = model;
    std::vector<double> grad;
    {
        LstmModel::State st = work.initial_state();
        const double base = work.chunk_loss(ids, st, &grad);
        (void)base;
    }
    if (grad.empty()) return 0.0; // no transitions, zero-length gradient

    Rng rng(seed);
    double worst = 0;
    for (std::size_t p = 0; p < probes; ++p) {
        const std::size_t idx = rng.below(work.params.size());
        const double saved = work.params[idx];
        work.params[idx] = saved + eps;
        LstmModel::State st1 = work.initial_state();
        const double lp = work.chunk_loss(ids, st1, nullptr);
        work.params[idx] = saved - eps;
        LstmModel::State st2 = work.initial_state();
        const double lm = work.chunk_loss(ids, st2, nullptr);
        work.params[idx] = saved;
        const double numeric = (lp - lm) / (2.0 * eps);
        const double analytic = grad[idx];
        const double rel = std::abs(analytic - numeric) /
                           std::max({1.0, std::abs(analytic), std::abs(numeric)});
        worst = std::max(worst, rel);
    }
    return worst;
}

} // namespace snapsim
