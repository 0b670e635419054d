#include <doctest.h>

#include <cmath>

#include "snapsim/hmm.hpp"
#include "testutil.hpp"

using namespace snapsim;

TEST_CASE("train_hmm: forced counts on a b a b") {
    auto t = testutil::make_timeline("u1", {"a b a b"});
    auto model = train_hmm(t, 1);
    CHECK(model.transitions.at("a").at("b") == doctest::Approx(1.0));
    CHECK(model.transitions.at("b").at("a") == doctest::Approx(1.0));
    CHECK(model.start.at("a") == doctest::Approx(1.0));
}

TEST_CASE("train_hmm: split counts oracle") {
    auto t = testutil::make_timeline("u1", {"a b", "a c"});
    auto model = train_hmm(t, 1);
    CHECK(model.transitions.at("a").at("b") == doctest::Approx(0.5));
    CHECK(model.transitions.at("a").at("c") == doctest::Approx(0.5));
    CHECK(model.start.at("a") == doctest::Approx(1.0));
}

TEST_CASE("train_hmm: insufficient text") {
    CHECK_THROWS_AS(train_hmm(Timeline{"u1", {}}, 1), InsufficientText);
    auto singles = testutil::make_timeline("u1", {"a", "b", "c"});
    CHECK_THROWS_AS(train_hmm(singles, 1), InsufficientText);
    auto pairs = testutil::make_timeline("u1", {"a b"});
    CHECK_NOTHROW(train_hmm(pairs, 1));
    CHECK_THROWS_AS(train_hmm(pairs, 2), InsufficientText); // needs 3 tokens for order 2
}

TEST_CASE("train_hmm: order 2 contexts include the start-padded pair") {
    auto t = testutil::make_timeline("u1", {"a b c", "a b d"});
    auto model = train_hmm(t, 2);
    CHECK(model.transitions.at("<s> a").at("b") == doctest::Approx(1.0));
    CHECK(model.transitions.at("a b").at("c") == doctest::Approx(0.5));
    CHECK(model.transitions.at("a b").at("d") == doctest::Approx(0.5));
}

TEST_CASE("hmm distributions sum to one") {
    Rng rng(17);
    const std::vector<std::string> words = {"w0", "w1", "w2", "w3", "w4", "w5"};
    std::vector<std::string> texts;
    for (int p = 0; p < 40; ++p) {
        std::string text;
        const std::size_t len = 2 + rng.below(9);
        for (std::size_t i = 0; i < len; ++i) {
            if (i) text += ' ';
            text += words[rng.below(words.size())];
        }
        texts.push_back(text);
    }
    for (int order : {1, 2}) {
        auto model = train_hmm(testutil::make_timeline("u1", texts), order);
        for (const auto& [ctx, dist] : model.transitions) {
            double sum = 0;
            for (const auto& [tok, p] : dist) {
                CHECK(p > 0.0);
                sum += p;
            }
            CHECK(std::abs(sum - 1.0) < 1e-9);
        }
        double ssum = 0;
        for (const auto& [tok, p] : model.start) ssum += p;
        CHECK(std::abs(ssum - 1.0) < 1e-9);
    }
}

TEST_CASE("hmm vocabulary covers exactly the training tokens") {
    auto t = testutil::make_timeline("u1", {"x y z", "y z q"});
    auto model = train_hmm(t, 1);
    CHECK(model.vocab == std::set<std::string>{"q", "x", "y", "z"});
}
