#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "duplexsim/align.hpp"
#include "duplexsim/errors.hpp"
#include "duplexsim/rng.hpp"
#include "test_util.hpp"

#include <map>
#include <vector>

using namespace duplexsim;
using testutil::lattice_emissions;

namespace {

EmissionMatrix one_hot(const std::vector<Token>& symbols, int vocab) {
    EmissionMatrix em;
    em.frames = static_cast<int>(symbols.size());
    em.vocab = vocab;
    em.log_scores.assign(static_cast<std::size_t>(em.frames) * (vocab + 1), -1e9);
    for (int t = 0; t < em.frames; ++t) {
        em.log_scores[static_cast<std::size_t>(t) * (vocab + 1) + symbols[static_cast<std::size_t>(t)]] = 0.0;
    }
    return em;
}

std::vector<std::vector<Token>> all_targets(int vocab, int max_len) {
    std::vector<std::vector<Token>> out;
    std::vector<std::vector<Token>> frontier{{}};
    for (int len = 1; len <= max_len; ++len) {
        std::vector<std::vector<Token>> next;
        for (const auto& prefix : frontier) {
            for (Token t = 0; t < vocab; ++t) {
                auto target = prefix;
                target.push_back(t);
                out.push_back(target);
                next.push_back(std::move(target));
            }
        }
        frontier = std::move(next);
    }
    return out;
}

} // namespace

TEST_CASE("collapse merges repeats then removes blanks") {
    const Token B = 9;
    CHECK(collapse(std::vector<Token>{0, 0, B, 1}, B) == std::vector<Token>{0, 1});
    CHECK(collapse(std::vector<Token>{B, B}, B) == std::vector<Token>{});
    CHECK(collapse(std::vector<Token>{0, B, 0}, B) == std::vector<Token>{0, 0});
    CHECK(collapse(std::vector<Token>{}, B) == std::vector<Token>{});
}

TEST_CASE("forced_align follows a forced one-hot path") {
    const EmissionMatrix em = one_hot({0, 1}, 2);
    const Alignment al = forced_align(em, std::vector<Token>{0, 1});
    CHECK(al.labels == std::vector<Token>{0, 1});
    CHECK(al.score == doctest::Approx(0.0));
}

TEST_CASE("repeated target token forces a separating blank") {
    Rng rng(7);
    const EmissionMatrix em = lattice_emissions(3, 2, rng);
    const Alignment al = forced_align(em, std::vector<Token>{0, 0});
    CHECK(al.labels == std::vector<Token>{0, em.blank(), 0});
}

TEST_CASE("collapse of the forced path equals the target") {
    Rng rng(11);
    for (int trial = 0; trial < 200; ++trial) {
        const int frames = 3 + uniform_int(rng, 6);
        const int vocab = 2 + uniform_int(rng, 3);
        std::vector<Token> target;
        const int len = 1 + uniform_int(rng, 3);
        for (int i = 0; i < len; ++i) target.push_back(uniform_int(rng, vocab));
        if (min_ctc_frames(target) > frames) continue;
        const EmissionMatrix em = lattice_emissions(frames, vocab, rng);
        const Alignment al = forced_align(em, target);
        CHECK(collapse(al.labels, em.blank()) == target);
        CHECK(static_cast<int>(al.labels.size()) == frames);
    }
}

TEST_CASE("forced_align matches the brute-force oracle") {
    SUBCASE("seeded random case from the worked example") {
        Rng rng(42);
        const EmissionMatrix em = lattice_emissions(4, 2, rng);
        const std::vector<Token> target{0, 1};
        const Alignment fast = forced_align(em, target);
        const Alignment slow = brute_force_align(em, target);
        CHECK(fast.score == slow.score);
        CHECK(fast.labels == slow.labels);
    }

    SUBCASE("exhaustive over small shapes") {
        Rng rng(1);
        for (int frames = 1; frames <= 5; ++frames) {
            for (int vocab = 1; vocab <= 3; ++vocab) {
                for (const auto& target : all_targets(vocab, 2)) {
                    if (min_ctc_frames(target) > frames) continue;
                    const EmissionMatrix em = lattice_emissions(frames, vocab, rng);
                    const Alignment fast = forced_align(em, target);
                    const Alignment slow = brute_force_align(em, target);
                    CHECK(fast.score == slow.score);
                    CHECK(fast.labels == slow.labels);
                }
            }
        }
    }
}

TEST_CASE("score is shift-invariant per frame and the path is unchanged") {
    Rng rng(23);
    for (int trial = 0; trial < 50; ++trial) {
        const int frames = 4 + uniform_int(rng, 4);
        const EmissionMatrix em = lattice_emissions(frames, 3, rng);
        const std::vector<Token> target{0, 2, 1};

        EmissionMatrix shifted = em;
        double total_shift = 0.0;
        for (int t = 0; t < frames; ++t) {
            const double c = static_cast<double>(uniform_int(rng, 9) - 4) / 4.0;
            total_shift += c;
            for (int s = 0; s <= shifted.vocab; ++s) {
                shifted.log_scores[static_cast<std::size_t>(t) * shifted.columns() + s] += c;
            }
        }

        const Alignment base = forced_align(em, target);
        const Alignment moved = forced_align(shifted, target);
        CHECK(moved.labels == base.labels);
        CHECK(moved.score == doctest::Approx(base.score + total_shift).epsilon(1e-12));
    }
}

TEST_CASE("word_timestamps maps aligned tokens to word spans") {
    const std::map<Token, std::string> words{{0, "hi"}, {1, "yo"}};

    SUBCASE("worked example") {
        const Alignment al{{0, 0, 9, 1}, 0.0, 9};
        const auto ts = word_timestamps(al, words);
        REQUIRE(ts.size() == 2);
        CHECK(ts[0].word == "hi");
        CHECK(ts[0].start_frame == 1);
        CHECK(ts[0].end_frame == 2);
        CHECK(ts[1].word == "yo");
        CHECK(ts[1].start_frame == 4);
        CHECK(ts[1].end_frame == 4);
    }

    SUBCASE("empty collapse") {
        const Alignment al{{9, 9, 9}, 0.0, 9};
        CHECK(word_timestamps(al, words).empty());
    }

    SUBCASE("single word spanning all frames") {
        const Alignment al{{0, 0, 0, 0}, 0.0, 9};
        const auto ts = word_timestamps(al, words);
        REQUIRE(ts.size() == 1);
        CHECK(ts[0].start_frame == 1);
        CHECK(ts[0].end_frame == 4);
    }

    SUBCASE("spans are ordered and disjoint") {
        Rng rng(5);
        const EmissionMatrix em = lattice_emissions(8, 2, rng);
        const Alignment al = forced_align(em, std::vector<Token>{0, 1, 0});
        const auto ts = word_timestamps(al, words);
        for (std::size_t i = 1; i < ts.size(); ++i) {
            CHECK(ts[i].start_frame > ts[i - 1].end_frame);
        }
        for (const auto& t : ts) {
            CHECK(t.start_frame >= 1);
            CHECK(t.end_frame <= em.frames);
        }
    }
}

TEST_CASE("alignment error paths") {
    Rng rng(3);
    const EmissionMatrix em = lattice_emissions(2, 2, rng);

    CHECK_THROWS_AS(forced_align(em, std::vector<Token>{}), std::invalid_argument);
    CHECK_THROWS_AS(forced_align(em, std::vector<Token>{0, 0}), InfeasibleAlignmentError);
    CHECK_THROWS_AS(forced_align(em, std::vector<Token>{5}), std::invalid_argument);
    CHECK_THROWS_AS(brute_force_align(em, std::vector<Token>{0, 0}), InfeasibleAlignmentError);

    const EmissionMatrix big = lattice_emissions(11, 2, rng);
    CHECK_THROWS_AS(brute_force_align(big, std::vector<Token>{0}), std::invalid_argument);

    SUBCASE("single frame, single token") {
        const EmissionMatrix tiny = lattice_emissions(1, 2, rng);
        const Alignment al = brute_force_align(tiny, std::vector<Token>{1});
        CHECK(al.labels == std::vector<Token>{1});
    }

    SUBCASE("word mapping gap") {
        const Alignment al{{0, 1}, 0.0, 9};
        CHECK_THROWS_AS(word_timestamps(al, std::map<Token, std::string>{{0, "hi"}}),
                        std::invalid_argument);
    }
}
