#pragma once

#include "duplexsim/types.hpp"

#include <map>
#include <span>
#include <string>
#include <vector>

namespace duplexsim {

// Frame-by-symbol log scores. Columns 0..vocab-1 are vocabulary tokens,
// column `vocab` is the CTC blank. Scores are arbitrary finite log values;
// normalization is not required.
struct EmissionMatrix {
    int frames = 0; // T
    int vocab = 0;  // V
    std::vector<double> log_scores; // row-major T x (V+1)

    Token blank() const { return vocab; }
    int columns() const { return vocab + 1; }
    // t is a 0-based row here; symbol in [0, vocab].
    double score(int t, Token symbol) const {
        return log_scores[static_cast<std::size_t>(t) * columns() + symbol];
    }
    // Throws std::invalid_argument on bad shape or non-finite entries.
    void check() const;
};

// Frame-length label path over vocab plus blank, with its total log score.
struct Alignment {
    std::vector<Token> labels;
    double score = 0.0;
    Token blank = 0;
};

struct WordTimestamp {
    std::string word;
    int start_frame = 0; // 1-based
    int end_frame = 0;
};

// Merge adjacent repeats, then delete blanks.
std::vector<Token> collapse(std::span<const Token> labels, Token blank);

// Minimum path length that can realize the target: |target| plus one blank
// per adjacent equal pair.
int min_ctc_frames(std::span<const Token> target);

// Maximum-score length-T path whose collapse equals target, over the
// standard blank-interleaved CTC graph. Ties are broken deterministically
// toward the path that advances through the target earliest (leftmost
// alignment). Throws InfeasibleAlignmentError when T < min_ctc_frames,
// std::invalid_argument on an empty or out-of-vocabulary target.
Alignment forced_align(const EmissionMatrix& em, std::span<const Token> target);

// Test oracle: exhaustive enumeration of every length-T label sequence whose
// collapse equals target, under the same tie-break rule. Guarded to
// T <= 10 and V <= 5.
Alignment brute_force_align(const EmissionMatrix& em, std::span<const Token> target);

// Word spans from an alignment. Consecutive collapsed tokens that map to the
// same word form one timestamp; repeat frames extend the span, blanks do not.
// Throws std::invalid_argument when a collapsed token has no mapping.
std::vector<WordTimestamp> word_timestamps(const Alignment& alignment,
                                           const std::map<Token, std::string>& token_to_word);

} // namespace duplexsim
