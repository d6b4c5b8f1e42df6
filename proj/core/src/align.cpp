#include "duplexsim/align.hpp"

#include "duplexsim/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>

namespace duplexsim {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void check_target(const EmissionMatrix& em, std::span<const Token> target) {
    if (target.empty()) throw std::invalid_argument("align: empty target");
    for (const Token t : target) {
        if (t < 0 || t >= em.vocab) throw std::invalid_argument("align: target token outside vocabulary");
    }
    if (em.frames < min_ctc_frames(target)) {
        throw InfeasibleAlignmentError("align: target needs " + std::to_string(min_ctc_frames(target)) +
                                       " frames, emission has " + std::to_string(em.frames));
    }
}

} // namespace

void EmissionMatrix::check() const {
    if (frames < 1 || vocab < 1) throw std::invalid_argument("emission matrix: frames and vocab must be >= 1");
    if (log_scores.size() != static_cast<std::size_t>(frames) * columns()) {
        throw std::invalid_argument("emission matrix: score buffer does not match T x (V+1)");
    }
    for (const double v : log_scores) {
        if (!std::isfinite(v)) throw std::invalid_argument("emission matrix: non-finite score");
    }
}

std::vector<Token> collapse(std::span<const Token> labels, Token blank) {
    std::vector<Token> out;
    Token prev = -1; // labels are non-negative
    for (const Token label : labels) {
        if (label != prev && label != blank) out.push_back(label);
        prev = label;
    }
    return out;
}

int min_ctc_frames(std::span<const Token> target) {
    int repeats = 0;
    for (std::size_t i = 1; i < target.size(); ++i) {
        if (target[i] == target[i - 1]) ++repeats;
    }
    return static_cast<int>(target.size()) + repeats;
}

Alignment forced_align(const EmissionMatrix& em, std::span<const Token> target) {
    em.check();
    check_target(em, target);

    const int n = static_cast<int>(target.size());
    const int states = 2 * n + 1; // blank-interleaved: B t1 B t2 ... tn B
    const Token blank = em.blank();
    const auto symbol = [&](int s) { return s % 2 == 0 ? blank : target[static_cast<std::size_t>(s / 2)]; };

    std::vector<double> prev(static_cast<std::size_t>(states), kNegInf);
    std::vector<double> cur(static_cast<std::size_t>(states), kNegInf);
    // bp[t][s]: predecessor state, -1 where unreachable
    std::vector<std::int16_t> bp(static_cast<std::size_t>(em.frames) * states, -1);

    prev[0] = em.score(0, blank);
    prev[1] = em.score(0, symbol(1));

    for (int t = 1; t < em.frames; ++t) {
        for (int s = 0; s < states; ++s) {
            // candidates ordered largest-first: on ties keep the predecessor
            // that advanced through the target earliest
            double best = prev[static_cast<std::size_t>(s)];
            int best_pred = best == kNegInf ? -1 : s;
            if (s >= 1 && prev[static_cast<std::size_t>(s - 1)] > best) {
                best = prev[static_cast<std::size_t>(s - 1)];
                best_pred = s - 1;
            }
            if (s >= 2 && s % 2 == 1 && symbol(s) != symbol(s - 2) &&
                prev[static_cast<std::size_t>(s - 2)] > best) {
                best = prev[static_cast<std::size_t>(s - 2)];
                best_pred = s - 2;
            }
            cur[static_cast<std::size_t>(s)] = best == kNegInf ? kNegInf : best + em.score(t, symbol(s));
            bp[static_cast<std::size_t>(t) * states + s] = static_cast<std::int16_t>(best_pred);
        }
        std::swap(prev, cur);
    }

    int state = 2 * n; // prefer the trailing blank on ties
    if (n >= 1 && prev[static_cast<std::size_t>(2 * n - 1)] > prev[static_cast<std::size_t>(2 * n)]) {
        state = 2 * n - 1;
    }

    Alignment out;
    out.blank = blank;
    out.score = prev[static_cast<std::size_t>(state)];
    out.labels.resize(static_cast<std::size_t>(em.frames));
    for (int t = em.frames - 1; t >= 0; --t) {
        out.labels[static_cast<std::size_t>(t)] = symbol(state);
        if (t > 0) state = bp[static_cast<std::size_t>(t) * states + state];
    }
    return out;
}

namespace {

struct OracleBest {
    double score = kNegInf;
    std::vector<Token> labels;
    std::vector<int> states;
    bool set = false;
};

// Right-to-left comparison of state paths; larger state at the latest
// difference means the target was reached earlier.
bool path_preferred(const std::vector<int>& a, const std::vector<int>& b) {
    for (std::size_t i = a.size(); i-- > 0;) {
        if (a[i] != b[i]) return a[i] > b[i];
    }
    return false;
}

void oracle_recurse(const EmissionMatrix& em, std::span<const Token> target,
                    const std::vector<Token>& alphabet, int t, int consumed, Token last,
                    double score, std::vector<Token>& labels, std::vector<int>& states,
                    OracleBest& best) {
    const int n = static_cast<int>(target.size());
    if (t == em.frames) {
        if (consumed != n) return;
        if (!best.set || score > best.score ||
            (score == best.score && path_preferred(states, best.states))) {
            best.set = true;
            best.score = score;
            best.labels = labels;
            best.states = states;
        }
        return;
    }
    if (n - consumed > em.frames - t) return; // not enough frames left

    for (const Token label : alphabet) {
        int next_consumed = consumed;
        if (label != em.blank() && label != last) {
            if (consumed == n || target[static_cast<std::size_t>(consumed)] != label) continue;
            next_consumed = consumed + 1;
        }
        const int state = label == em.blank() ? 2 * next_consumed : 2 * next_consumed - 1;
        labels.push_back(label);
        states.push_back(state);
        oracle_recurse(em, target, alphabet, t + 1, next_consumed, label,
                       score + em.score(t, label), labels, states, best);
        labels.pop_back();
        states.pop_back();
    }
}

} // namespace

Alignment brute_force_align(const EmissionMatrix& em, std::span<const Token> target) {
    if (em.frames > 10 || em.vocab > 5) {
        throw std::invalid_argument("brute_force_align: size guard exceeded (T <= 10, V <= 5)");
    }
    em.check();
    check_target(em, target);

    std::vector<Token> alphabet{em.blank()};
    for (const Token t : target) {
        if (std::find(alphabet.begin(), alphabet.end(), t) == alphabet.end()) alphabet.push_back(t);
    }
    std::sort(alphabet.begin(), alphabet.end());

    OracleBest best;
    std::vector<Token> labels;
    std::vector<int> states;
    oracle_recurse(em, target, alphabet, 0, 0, -1, 0.0, labels, states, best);
    if (!best.set) throw InfeasibleAlignmentError("brute_force_align: no valid path");

    Alignment out;
    out.blank = em.blank();
    out.score = best.score;
    out.labels = std::move(best.labels);
    return out;
}

std::vector<WordTimestamp> word_timestamps(const Alignment& alignment,
                                           const std::map<Token, std::string>& token_to_word) {
    std::vector<WordTimestamp> out;
    Token prev = -1;
    for (int t = 1; t <= static_cast<int>(alignment.labels.size()); ++t) {
        const Token label = alignment.labels[static_cast<std::size_t>(t - 1)];
        if (label == alignment.blank) {
            prev = label;
            continue;
        }
        if (label == prev) {
            out.back().end_frame = t; // repeat continues the current word
            continue;
        }
        prev = label;
        const auto it = token_to_word.find(label);
        if (it == token_to_word.end()) {
            throw std::invalid_argument("word_timestamps: token " + std::to_string(label) + " has no word mapping");
        }
        if (!out.empty() && out.back().word == it->second) {
            out.back().end_frame = t; // next token of the same word
        } else {
            out.push_back({it->second, t, t});
        }
    }
    return out;
}

} // namespace duplexsim
