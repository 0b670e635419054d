#include <doctest.h>

#include <cmath>
#include <set>

#include "snapsim/triage.hpp"
#include "testutil.hpp"

using namespace snapsim;

namespace {

FeatureVector fv(const std::string& id, std::initializer_list<double> vals) {
    FeatureVector f;
    f.user_id = id;
    std::size_t d = 0;
    for (double v : vals) f.values[d++] = v;
    return f;
}

// independent nearest-centroid oracle
std::vector<int> nearest_oracle(const std::vector<FeatureVector>& pts,
                                const std::vector<std::array<double, kFeatureDim>>& centroids) {
    std::vector<int> out;
    for (const auto& p : pts) {
        int best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < centroids.size(); ++c) {
            double d = 0;
            for (std::size_t k = 0; k < kFeatureDim; ++k) {
                const double dv = p.values[k] - centroids[c][k];
                d += dv * dv;
            }
            if (d < best_d) {
                best_d = d;
                best = int(c);
            }
        }
        out.push_back(best);
    }
    return out;
}

} // namespace

TEST_CASE("extract_features contract") {
    const std::int64_t ref = 1600000000;
    SUBCASE("brand new empty account is all zeros except nothing") {
        UserProfile u;
        u.user_id = "u0";
        u.handle = "zero";
        u.created_at = ref; // brand new
        u.default_profile = true;
        u.default_avatar = true;
        Timeline t{"u0", {}};
        auto f = extract_features(u, t, ref);
        for (std::size_t d = 0; d < kFeatureDim; ++d) CHECK(f.values[d] == 0.0);
    }
    SUBCASE("non-default settings score") {
        auto u = testutil::make_profile("u1", "a");
        u.default_profile = false;
        u.default_avatar = false;
        auto f = extract_features(u, Timeline{"u1", {}}, ref);
        CHECK(f.values[4] == 1.0);
        u.default_avatar = true;
        f = extract_features(u, Timeline{"u1", {}}, ref);
        CHECK(f.values[4] == 0.5);
    }
    SUBCASE("posts per day hand arithmetic") {
        auto u = testutil::make_profile("u1", "a");
        u.post_count = 3400;
        u.created_at = ref - 340 * 86400;
        auto f = extract_features(u, Timeline{"u1", {}}, ref);
        CHECK(f.values[3] == doctest::Approx(340.0));
        CHECK(f.values[7] == doctest::Approx(10.0));
    }
    SUBCASE("bio richness fraction") {
        auto u = testutil::make_profile("u1", "a");
        u.bio_text = "CEO of Things inc";
        auto f = extract_features(u, Timeline{"u1", {}}, ref);
        CHECK(f.values[5] == doctest::Approx(0.5)); // ceo, inc out of 4 tokens
    }
    SUBCASE("mean engagement from timeline") {
        auto u = testutil::make_profile("u1", "a");
        Timeline t{"u1", {}};
        auto p1 = testutil::make_post("p1", "u1", "x");
        p1.like_count = 4;
        p1.repost_count = 2;
        auto p2 = testutil::make_post("p2", "u1", "y");
        p2.like_count = 0;
        t.posts = {p1, p2};
        auto f = extract_features(u, t, ref);
        CHECK(f.values[6] == doctest::Approx(3.0));
    }
}

TEST_CASE("standardize basics") {
    auto a = fv("a", {0});
    auto b = fv("b", {2});
    auto out = standardize({a, b});
    CHECK(out[0].values[0] == doctest::Approx(-1.0));
    CHECK(out[1].values[0] == doctest::Approx(1.0));
    // constant column passes through as zeros
    CHECK(out[0].values[1] == 0.0);
    CHECK(out[1].values[1] == 0.0);

    CHECK_THROWS_AS(standardize({a}), TooFewSamples);
}

TEST_CASE("standardize random fixture: recomputed moments") {
    Rng rng(123);
    std::vector<FeatureVector> pts;
    for (int i = 0; i < 100; ++i) {
        FeatureVector f;
        f.user_id = "u" + std::to_string(i);
        for (auto& v : f.values) v = rng.uniform(-50, 50);
        pts.push_back(f);
    }
    auto out = standardize(pts);
    for (std::size_t d = 0; d < kFeatureDim; ++d) {
        double mean = 0;
        for (const auto& f : out) mean += f.values[d];
        mean /= double(out.size());
        double var = 0;
        for (const auto& f : out) var += (f.values[d] - mean) * (f.values[d] - mean);
        const double sd = std::sqrt(var / double(out.size()));
        CHECK(std::abs(mean) < 1e-9);
        CHECK(std::abs(sd - 1.0) < 1e-9);
    }
}

TEST_CASE("kmeans k=1 centroid is the mean") {
    auto pts = std::vector<FeatureVector>{fv("a", {0, 0}), fv("b", {2, 2})};
    auto model = kmeans_fit(pts, 1, 9);
    CHECK(model.centroids[0][0] == doctest::Approx(1.0));
    CHECK(model.centroids[0][1] == doctest::Approx(1.0));
    CHECK(model.assignments == std::vector<int>{0, 0});
}

TEST_CASE("kmeans separates two blobs; assignments match oracle") {
    std::array<double, kFeatureDim> c0{}, c1{};
    c0[0] = 0;
    c0[1] = 0;
    c1[0] = 20;
    c1[1] = 20;
    auto pts = testutil::make_blobs({c0, c1}, 50, 1.0, 31);
    auto model = kmeans_fit(pts, 2, 5);

    auto oracle = nearest_oracle(pts, model.centroids);
    CHECK(model.assignments == oracle);

    // clusters coincide with blob membership
    std::set<int> first_blob, second_blob;
    for (std::size_t i = 0; i < 50; ++i) first_blob.insert(model.assignments[i]);
    for (std::size_t i = 50; i < 100; ++i) second_blob.insert(model.assignments[i]);
    CHECK(first_blob.size() == 1);
    CHECK(second_blob.size() == 1);
    CHECK(*first_blob.begin() != *second_blob.begin());
}

TEST_CASE("kmeans determinism and too-few-samples") {
    auto pts = testutil::make_blobs({{1, 2, 3, 4, 5, 6, 7, 8}}, 30, 2.0, 77);
    auto m1 = kmeans_fit(pts, 3, 42);
    auto m2 = kmeans_fit(pts, 3, 42);
    CHECK(m1.centroids == m2.centroids);
    CHECK(m1.assignments == m2.assignments);
    CHECK(m1.inertia == m2.inertia); // bit-for-bit

    CHECK_THROWS_AS(kmeans_fit({fv("a", {0}), fv("b", {1})}, 3, 1), TooFewSamples);
}

TEST_CASE("kmeans invariants: fixpoint and monotone inertia") {
    auto pts = testutil::make_blobs(
        {{0, 0, 0, 0, 0, 0, 0, 0}, {8, 0, 3, 0, 0, 0, 0, 0}, {0, 9, 0, 4, 0, 0, 0, 0}}, 40, 1.5,
        99);
    for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
        auto model = kmeans_fit(pts, 3, seed);
        CHECK(model.assignments == nearest_oracle(pts, model.centroids));
        for (std::size_t i = 1; i < model.inertia_trace.size(); ++i)
            CHECK(model.inertia_trace[i] <= model.inertia_trace[i - 1] + 1e-9);
        // reported inertia is the sum of squared assigned distances
        double recomputed = 0;
        for (std::size_t i = 0; i < pts.size(); ++i)
            for (std::size_t d = 0; d < kFeatureDim; ++d) {
                const double dv =
                    pts[i].values[d] -
                    model.centroids[std::size_t(model.assignments[i])][d];
                recomputed += dv * dv;
            }
        CHECK(model.inertia == doctest::Approx(recomputed).epsilon(1e-12));
        for (int a : model.assignments) {
            CHECK(a >= 0);
            CHECK(a < model.k);
        }
    }
}

TEST_CASE("silhouette: hand-derived two-cluster fixture") {
    auto pts = std::vector<FeatureVector>{fv("a", {0, 0}), fv("b", {0, 1}), fv("c", {10, 10}),
                                          fv("d", {10, 11})};
    std::vector<int> assign{0, 0, 1, 1};

    // direct formula, written out independently of the implementation
    const double d_ac = std::sqrt(200.0), d_ad = std::sqrt(221.0);
    const double d_bc = std::sqrt(181.0), d_bd = std::sqrt(200.0);
    const double s_a = ((d_ac + d_ad) / 2 - 1.0) / ((d_ac + d_ad) / 2);
    const double s_b = ((d_bc + d_bd) / 2 - 1.0) / ((d_bc + d_bd) / 2);
    const double s_c = ((d_ac + d_bc) / 2 - 1.0) / ((d_ac + d_bc) / 2);
    const double s_d = ((d_ad + d_bd) / 2 - 1.0) / ((d_ad + d_bd) / 2);
    const double oracle = (s_a + s_b + s_c + s_d) / 4.0;

    const double got = silhouette(pts, assign);
    CHECK(got == doctest::Approx(oracle).epsilon(1e-12));
    CHECK(got == doctest::Approx(0.9292895).epsilon(1e-6));
}

TEST_CASE("silhouette errors and range") {
    auto pts = std::vector<FeatureVector>{fv("a", {0, 0}), fv("b", {1, 1})};
    CHECK_THROWS_AS(silhouette(pts, std::vector<int>{0, 0}), SingleCluster);

    Rng rng(5);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<FeatureVector> rand_pts;
        std::vector<int> assign;
        const int n = 3 + int(rng.below(40));
        const int k = 2 + int(rng.below(4));
        for (int i = 0; i < n; ++i) {
            FeatureVector f;
            f.user_id = "u" + std::to_string(i);
            for (auto& v : f.values) v = rng.uniform(-5, 5);
            rand_pts.push_back(f);
            assign.push_back(int(rng.below(std::uint64_t(k))));
        }
        std::set<int> used(assign.begin(), assign.end());
        if (used.size() < 2) continue;
        const double s = silhouette(rand_pts, assign);
        CHECK(s >= -1.0);
        CHECK(s <= 1.0);
    }
}

TEST_CASE("hyperparameter_search selects k=3 on three blobs") {
    std::array<double, kFeatureDim> c0{}, c1{}, c2{};
    c1 = {15, 0, 15, 0, 15, 0, 15, 0};
    c2 = {0, 15, 0, 15, 0, 15, 0, 15};
    auto raw = testutil::make_blobs({c0, c1, c2}, 40, 1.0, 2024);
    auto pts = standardize(raw);

    auto found = hyperparameter_search(pts, 50, 7);
    CHECK(found.k == 3);

    // oracle: exhaustive evaluation over every k confirms the argmax
    double best_s = -2;
    int best_k = 0;
    for (int k = 2; k <= 8; ++k) {
        auto m = kmeans_fit(pts, k, found.seed);
        double s;
        try {
            s = silhouette(pts, m.assignments);
        } catch (const SingleCluster&) {
            continue;
        }
        if (s > best_s) {
            best_s = s;
            best_k = k;
        }
    }
    CHECK(best_k == 3);
    CHECK(found.silhouette <= best_s + 1e-12);

    // reproducibility and the single-trial identity
    auto again = hyperparameter_search(pts, 50, 7);
    CHECK(again.k == found.k);
    CHECK(again.seed == found.seed);
    CHECK(again.silhouette == found.silhouette);

    auto one = hyperparameter_search(pts, 1, 3);
    Rng replay(3);
    const int expect_k = int(replay.uniform_int(2, 8));
    const std::uint64_t expect_seed = replay.below(1ull << 31);
    CHECK(one.k == expect_k);
    CHECK(one.seed == expect_seed);
}

TEST_CASE("select_target_cluster picks the executive blob and ranks by engagement") {
    // blob 0: ordinary users; blob 1: executives (high followers/posts/age/non-default)
    std::vector<FeatureVector> raw;
    Rng rng(11);
    for (int i = 0; i < 30; ++i) {
        FeatureVector f;
        f.user_id = "low" + std::to_string(i);
        f.values = {std::log1p(20.0) + rng.uniform(-0.1, 0.1),
                    std::log1p(50.0),
                    std::log1p(30.0) + rng.uniform(-0.1, 0.1),
                    200.0 + rng.uniform(-20, 20),
                    0.0,
                    0.0,
                    rng.uniform(0, 1),
                    0.5};
        raw.push_back(f);
    }
    for (int i = 0; i < 30; ++i) {
        FeatureVector f;
        f.user_id = "exec" + std::to_string(i);
        f.values = {std::log1p(50000.0) + rng.uniform(-0.1, 0.1),
                    std::log1p(500.0),
                    std::log1p(20000.0) + rng.uniform(-0.1, 0.1),
                    3000.0 + rng.uniform(-100, 100),
                    1.0,
                    0.5,
                    5.0 + rng.uniform(0, 1),
                    8.0};
        raw.push_back(f);
    }
    auto model = kmeans_fit(standardize(raw), 2, 13);
    auto result = select_target_cluster(model, raw);

    // oracle: recompute each cluster's composite mean by hand
    double age_mean = 0, age_sd = 0;
    for (const auto& f : raw) age_mean += f.values[3];
    age_mean /= double(raw.size());
    for (const auto& f : raw) age_sd += (f.values[3] - age_mean) * (f.values[3] - age_mean);
    age_sd = std::sqrt(age_sd / double(raw.size()));
    std::array<double, 2> sum{}, cnt{};
    for (std::size_t i = 0; i < raw.size(); ++i) {
        const auto& v = raw[i].values;
        sum[std::size_t(model.assignments[i])] +=
            v[0] + v[2] + (v[3] - age_mean) / age_sd + v[4];
        cnt[std::size_t(model.assignments[i])] += 1;
    }
    const int oracle_cluster = sum[0] / cnt[0] > sum[1] / cnt[1] ? 0 : 1;
    CHECK(result.selected_cluster == oracle_cluster);

    // every selected target is an exec and ranking is by engagement desc
    REQUIRE(result.ranked_targets.size() == 30);
    for (const auto& [uid, score] : result.ranked_targets)
        CHECK(uid.substr(0, 4) == "exec");
    for (std::size_t i = 1; i < result.ranked_targets.size(); ++i)
        CHECK(result.ranked_targets[i - 1].second >= result.ranked_targets[i].second);
}

TEST_CASE("select_target_cluster trivial cases") {
    SUBCASE("k=1 selects the only cluster") {
        auto pts = std::vector<FeatureVector>{fv("a", {1, 0, 1, 10, 1, 0, 3, 0}),
                                              fv("b", {2, 0, 2, 20, 1, 0, 5, 0})};
        auto model = kmeans_fit(pts, 1, 1);
        auto r = select_target_cluster(model, pts);
        CHECK(r.selected_cluster == 0);
        CHECK(r.ranked_targets.size() == 2);
        CHECK(r.ranked_targets[0].first == "b"); // engagement 5 beats 3
    }
    SUBCASE("ranking ties break by user id") {
        auto pts = std::vector<FeatureVector>{fv("b", {0, 0, 0, 0, 0, 0, 2, 0}),
                                              fv("a", {0, 0, 0, 0, 0, 0, 2, 0}),
                                              fv("c", {0, 0, 0, 0, 0, 0, 5, 0})};
        auto model = kmeans_fit(pts, 1, 1);
        auto r = select_target_cluster(model, pts);
        CHECK(r.ranked_targets[0].first == "c");
        CHECK(r.ranked_targets[1].first == "a");
        CHECK(r.ranked_targets[2].first == "b");
    }
}

TEST_CASE("select_target_cluster invariant under relabeling") {
    auto raw = testutil::make_blobs(
        {{2, 1, 3, 500, 1, 0.2, 4, 1}, {6, 2, 7, 2500, 1, 0.5, 9, 3}}, 25, 0.3, 55);
    auto model = kmeans_fit(standardize(raw), 2, 3);
    auto base = select_target_cluster(model, raw);

    ClusterModel relabeled = model;
    std::swap(relabeled.centroids[0], relabeled.centroids[1]);
    for (auto& a : relabeled.assignments) a = 1 - a;
    auto flipped = select_target_cluster(relabeled, raw);

    CHECK(flipped.ranked_targets == base.ranked_targets);
    CHECK(flipped.selected_cluster == 1 - base.selected_cluster);
}
