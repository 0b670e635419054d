#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "snapsim/corpus.hpp"
#include "snapsim/errors.hpp"
#include "snapsim/rng.hpp"

namespace snapsim {

inline constexpr std::size_t kFeatureDim = 8;
inline constexpr std::array<const char*, kFeatureDim> kFeatureNames = {
    "log1p_follower_count", "log1p_following_count", "log1p_post_count",
    "account_age_days",     "non_default_profile_score", "bio_richness_score",
    "mean_engagement_per_post", "posts_per_day"};

struct FeatureVector {
    std::string user_id;
    std::array<double, kFeatureDim> values{};
};

// Job/company tokens that make a bio "descriptive" for triage purposes.
inline const std::set<std::string>& job_lexicon() {
    static const std::set<std::string> words = {
        "ceo", "cto", "cfo", "coo", "cio", "ciso", "cmo", "founder", "cofounder",
        "co-founder", "president", "vp", "svp", "evp", "director", "manager",
        "executive", "officer", "chairman", "chairwoman", "chair", "partner",
        "principal", "lead", "head", "chief", "analyst", "engineer", "developer",
        "architect", "consultant", "strategist", "advisor", "investor",
        "entrepreneur", "recruiter", "scientist", "researcher", "professor",
        "attorney", "counsel", "banker", "trader", "company", "inc", "llc",
        "corp", "corporation", "enterprises", "ventures", "capital", "holdings",
        "group", "agency", "firm", "startup", "solutions", "consulting",
        "official", "certified"};
    return words;
}

// d=8 vector per kFeatureNames. reference_time anchors account age so the
// result does not depend on the wall clock.
inline FeatureVector extract_features(const UserProfile& profile, const Timeline& timeline,
                                      std::int64_t reference_time) {
    FeatureVector fv;
    fv.user_id = profile.user_id;
    auto& v = fv.values;
    v[0] = std::log1p(double(profile.follower_count));
    v[1] = std::log1p(double(profile.following_count));
    v[2] = std::log1p(double(profile.post_count));
    const double age_days =
        std::max<std::int64_t>(0, reference_time - profile.created_at) / 86400.0;
    v[3] = age_days;
    v[4] = (profile.default_profile ? 0.0 : 0.5) + (profile.default_avatar ? 0.0 : 0.5);
    const auto bio_tokens = tokenize(profile.bio_text);
    if (!bio_tokens.empty()) {
        std::size_t hits = 0;
        for (const auto& t : bio_tokens)
            if (job_lexicon().count(t.surface)) ++hits;
        v[5] = double(hits) / double(bio_tokens.size());
    }
    if (!timeline.posts.empty()) {
        double engagement = 0;
        for (const auto& p : timeline.posts)
            engagement += double(p.like_count + p.repost_count);
        v[6] = engagement / double(timeline.posts.size());
    }
    v[7] = age_days > 0 ? double(profile.post_count) / age_days : 0.0;
    return fv;
}

// Per-dimension z-score (population variance). Zero-variance dimensions pass
// through as zeros; KMeans is scale-sensitive so this always precedes a fit.
inline std::vector<FeatureVector> standardize(const std::vector<FeatureVector>& features) {
    if (features.size() < 2)
        throw TooFewSamples("standardize requires at least 2 samples");
    const double n = double(features.size());
    std::array<double, kFeatureDim> mean{}, var{};
    for (const auto& f : features)
        for (std::size_t d = 0; d < kFeatureDim; ++d) mean[d] += f.values[d];
    for (auto& m : mean) m /= n;
    for (const auto& f : features)
        for (std::size_t d = 0; d < kFeatureDim; ++d) {
            const double dv = f.values[d] - mean[d];
            var[d] += dv * dv;
        }
    for (auto& s : var) s = std::sqrt(s / n);
    std::vector<FeatureVector> out = features;
    for (auto& f : out)
        for (std::size_t d = 0; d < kFeatureDim; ++d)
            f.values[d] = var[d] > 1e-12 ? (f.values[d] - mean[d]) / var[d] : 0.0;
    return out;
}

struct ClusterModel {
    int k = 0;
    std::vector<std::array<double, kFeatureDim>> centroids;
    std::vector<int> assignments; // index-parallel with the fitted features
    double inertia = 0;
    std::uint64_t rng_seed = 0;
    std::vector<double> inertia_trace; // winning restart, one entry per assign pass
};

namespace detail {

inline double sq_dist(const std::array<double, kFeatureDim>& a,
                      const std::array<double, kFeatureDim>& b) {
    double s = 0;
    for (std::size_t d = 0; d < kFeatureDim; ++d) {
        const double dv = a[d] - b[d];
        s += dv * dv;
    }
    return s;
}

inline int nearest_centroid(const std::array<double, kFeatureDim>& p,
                            const std::vector<std::array<double, kFeatureDim>>& centroids) {
    int best = 0;
    double best_d = sq_dist(p, centroids[0]);
    for (int c = 1; c < int(centroids.size()); ++c) {
        const double d = sq_dist(p, centroids[c]);
        if (d < best_d) { // ties keep the smaller index
            best_d = d;
            best = c;
        }
    }
    return best;
}

// k-means++ seeding
inline std::vector<std::array<double, kFeatureDim>>
seed_centroids(const std::vector<FeatureVector>& pts, int k, Rng& rng) {
    std::vector<std::array<double, kFeatureDim>> centroids;
    centroids.reserve(std::size_t(k));
    centroids.push_back(pts[rng.below(pts.size())].values);
    std::vector<double> d2(pts.size());
    while (int(centroids.size()) < k) {
        double total = 0;
        for (std::size_t i = 0; i < pts.size(); ++i) {
            double best = sq_dist(pts[i].values, centroids[0]);
            for (std::size_t c = 1; c < centroids.size(); ++c)
                best = std::min(best, sq_dist(pts[i].values, centroids[c]));
            d2[i] = best;
            total += best;
        }
        std::size_t pick = 0;
        if (total > 0) {
            const double x = rng.next_double() * total;
            double cum = 0;
            pick = pts.size() - 1;
            for (std::size_t i = 0; i < pts.size(); ++i) {
                cum += d2[i];
                if (cum > x) {
                    pick = i;
                    break;
                }
            }
        } else {
            pick = rng.below(pts.size());
        }
        centroids.push_back(pts[pick].values);
    }
    return centroids;
}

struct LloydResult {
    std::vector<std::array<double, kFeatureDim>> centroids;
    std::vector<int> assignments;
    double inertia = 0;
    std::vector<double> trace;
};

inline LloydResult lloyd(const std::vector<FeatureVector>& pts, int k, std::uint64_t seed) {
    Rng rng(seed);
    LloydResult r;
    r.centroids = seed_centroids(pts, k, rng);
    r.assignments.assign(pts.size(), -1);
    for (int iter = 0; iter < 300; ++iter) {
        bool changed = false;
        double inertia = 0;
        for (std::size_t i = 0; i < pts.size(); ++i) {
            const int c = nearest_centroid(pts[i].values, r.centroids);
            if (c != r.assignments[i]) {
                changed = true;
                r.assignments[i] = c;
            }
            inertia += sq_dist(pts[i].values, r.centroids[std::size_t(c)]);
        }
        r.trace.push_back(inertia);
        if (!changed) break;

        std::vector<std::array<double, kFeatureDim>> sums(static_cast<std::size_t>(k));
        std::vector<std::int64_t> counts(std::size_t(k), 0);
        for (std::size_t i = 0; i < pts.size(); ++i) {
            auto& s = sums[std::size_t(r.assignments[i])];
            for (std::size_t d = 0; d < kFeatureDim; ++d) s[d] += pts[i].values[d];
            ++counts[std::size_t(r.assignments[i])];
        }
        std::set<std::size_t> stolen;
        for (int c = 0; c < k; ++c) {
            if (counts[std::size_t(c)] > 0) {
                for (std::size_t d = 0; d < kFeatureDim; ++d)
                    r.centroids[std::size_t(c)][d] =
                        sums[std::size_t(c)][d] / double(counts[std::size_t(c)]);
            } else {
                // re-seed an empty cluster on the point farthest from its centroid
                std::size_t far = 0;
                double far_d = -1;
                for (std::size_t i = 0; i < pts.size(); ++i) {
                    if (stolen.count(i)) continue;
                    const double d =
                        sq_dist(pts[i].values, r.centroids[std::size_t(r.assignments[i])]);
                    if (d > far_d) {
                        far_d = d;
                        far = i;
                    }
                }
                stolen.insert(far);
                r.centroids[std::size_t(c)] = pts[far].values;
            }
        }
    }
    // final pass pins the fixpoint: every point sits with its nearest centroid
    r.inertia = 0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        r.assignments[i] = nearest_centroid(pts[i].values, r.centroids);
        r.inertia += sq_dist(pts[i].values, r.centroids[std::size_t(r.assignments[i])]);
    }
    return r;
}

} // namespace detail

inline constexpr int kKmeansRestarts = 10;

// Lloyd's algorithm with k-means++ seeding; best of 10 restarts by inertia.
// Deterministic for a fixed seed.
inline ClusterModel kmeans_fit(const std::vector<FeatureVector>& features, int k,
                               std::uint64_t seed) {
    if (k < 1) throw TooFewSamples("k must be positive");
    if (features.size() < std::size_t(k))
        throw TooFewSamples("need at least k=" + std::to_string(k) + " samples, have " +
                            std::to_string(features.size()));
    ClusterModel best;
    bool have = false;
    for (int restart = 0; restart < kKmeansRestarts; ++restart) {
        auto r = detail::lloyd(features, k, combine_seed(seed, std::uint64_t(restart)));
        if (!have || r.inertia < best.inertia) {
            have = true;
            best.k = k;
            best.centroids = std::move(r.centroids);
            best.assignments = std::move(r.assignments);
            best.inertia = r.inertia;
            best.inertia_trace = std::move(r.trace);
        }
    }
    best.rng_seed = seed;
    return best;
}

// Mean silhouette over all points: (b-a)/max(a,b), singleton clusters score 0.
inline double silhouette(const std::vector<FeatureVector>& features,
                         const std::vector<int>& assignments) {
    if (features.size() != assignments.size() || features.empty())
        throw TooFewSamples("features/assignments mismatch");
    int k = 0;
    for (int a : assignments) k = std::max(k, a + 1);
    std::vector<std::int64_t> counts(std::size_t(k), 0);
    for (int a : assignments) ++counts[std::size_t(a)];
    int non_empty = 0;
    for (auto c : counts)
        if (c > 0) ++non_empty;
    if (non_empty < 2) throw SingleCluster();

    const std::size_t n = features.size();
    double total = 0;
    std::vector<double> mean_dist(std::size_t(k), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const int own = assignments[i];
        if (counts[std::size_t(own)] == 1) continue; // singleton scores 0
        std::fill(mean_dist.begin(), mean_dist.end(), 0.0);
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            mean_dist[std::size_t(assignments[j])] +=
                std::sqrt(detail::sq_dist(features[i].values, features[j].values));
        }
        const double a = mean_dist[std::size_t(own)] / double(counts[std::size_t(own)] - 1);
        double b = std::numeric_limits<double>::infinity();
        for (int c = 0; c < k; ++c) {
            if (c == own || counts[std::size_t(c)] == 0) continue;
            b = std::min(b, mean_dist[std::size_t(c)] / double(counts[std::size_t(c)]));
        }
        const double denom = std::max(a, b);
        total += denom > 0 ? (b - a) / denom : 0.0;
    }
    return total / double(n);
}

struct SearchResult {
    int k = 0;
    std::uint64_t seed = 0;
    double silhouette = -2.0;
};

// Randomized search over (k in [2,8], restart seed), maximizing silhouette.
// Ties break toward smaller k, then smaller seed.
inline SearchResult hyperparameter_search(const std::vector<FeatureVector>& features,
                                          int trial_count, std::uint64_t seed) {
    if (trial_count < 1) throw ConfigError("trial_count must be >= 1");
    Rng rng(seed);
    SearchResult best;
    bool have = false;
    for (int t = 0; t < trial_count; ++t) {
        const int k = int(rng.uniform_int(2, 8));
        const std::uint64_t trial_seed = rng.below(1ull << 31);
        ClusterModel model = kmeans_fit(features, k, trial_seed); // TooFewSamples propagates
        double s;
        try {
            s = silhouette(features, model.assignments);
        } catch (const SingleCluster&) {
            continue; // degenerate trial; never selectable
        }
        const bool better =
            !have || s > best.silhouette ||
            (s == best.silhouette &&
             (k < best.k || (k == best.k && trial_seed < best.seed)));
        if (better) {
            have = true;
            best = SearchResult{k, trial_seed, s};
        }
    }
    if (!have) throw SingleCluster();
    return best;
}

struct TriageResult {
    int selected_cluster = 0;
    double silhouette = 0;
    std::vector<std::pair<std::string, double>> ranked_targets; // (user_id, engagement) desc
};

// Picks the cluster maximizing the mean susceptibility composite over its
// members: log1p followers + log1p posts + z-scored account age + the
// non-default-settings score. Members rank by mean engagement per post.
inline TriageResult select_target_cluster(const ClusterModel& model,
                                          const std::vector<FeatureVector>& raw_features) {
    if (raw_features.size() != model.assignments.size())
        throw TooFewSamples("features/assignments mismatch");
    const std::size_t n = raw_features.size();

    double age_mean = 0, age_sd = 0;
    for (const auto& f : raw_features) age_mean += f.values[3];
    age_mean /= double(n);
    for (const auto& f : raw_features) {
        const double d = f.values[3] - age_mean;
        age_sd += d * d;
    }
    age_sd = std::sqrt(age_sd / double(n));

    std::vector<double> sum(std::size_t(model.k), 0.0);
    std::vector<std::int64_t> count(std::size_t(model.k), 0);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& v = raw_features[i].values;
        const double age_z = age_sd > 1e-12 ? (v[3] - age_mean) / age_sd : 0.0;
        const double composite = v[0] + v[2] + age_z + v[4];
        sum[std::size_t(model.assignments[i])] += composite;
        ++count[std::size_t(model.assignments[i])];
    }
    int selected = 0;
    double best_mean = -std::numeric_limits<double>::infinity();
    for (int c = 0; c < model.k; ++c) {
        if (count[std::size_t(c)] == 0) continue;
        const double m = sum[std::size_t(c)] / double(count[std::size_t(c)]);
        if (m > best_mean) { // ties keep the smaller index
            best_mean = m;
            selected = c;
        }
    }

    TriageResult result;
    result.selected_cluster = selected;
    for (std::size_t i = 0; i < n; ++i)
        if (model.assignments[i] == selected)
            result.ranked_targets.emplace_back(raw_features[i].user_id,
                                               raw_features[i].values[6]);
    std::sort(result.ranked_targets.begin(), result.ranked_targets.end(),
              [](const auto& a, const auto& b) {
                  if (a.second != b.second) return a.second > b.second;
                  return a.first < b.first;
              });
    try {
        result.silhouette = silhouette(standardize(raw_features), model.assignments);
    } catch (const SingleCluster&) {
        result.silhouette = 0.0; // k=1 has no cluster structure to score
    }
    return result;
}

inline json triage_to_json(const TriageResult& r) {
    json targets = json::array();
    for (const auto& [uid, score] : r.ranked_targets)
        targets.push_back(json{{"user_id", uid}, {"score", score}});
    return json{{"selected_cluster", r.selected_cluster},
                {"silhouette", r.silhouette},
                {"targets", targets}};
}

} // namespace snapsim
