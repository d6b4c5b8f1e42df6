#pragma once

#include "duplexsim/codec.hpp"
#include "duplexsim/models.hpp"
#include "duplexsim/rng.hpp"
#include "duplexsim/token_space.hpp"

#include <span>
#include <unordered_set>
#include <vector>

namespace duplexsim {

struct DecodeParams {
    enum class Strategy { Greedy, TopK };

    Strategy strategy = Strategy::TopK;
    int k = 30;
    double temperature = 0.8;
    std::uint64_t seed = 0;
    int max_new_tokens = 64;
    int n_candidates = 10; // best-of-n speech reranking

    // Throws std::invalid_argument on out-of-range fields.
    void check() const;
};

using StopSet = std::unordered_set<Token>;

// Arg-max continuation until a stop token (not emitted) or max_new tokens.
// Arg-max ties resolve to the lowest token id.
std::vector<Token> greedy_decode(const SequenceModel& model, std::span<const Token> context,
                                 const StopSet& stops, int max_new);

// Temperature-scaled top-k sampling; reproducible for a fixed generator
// state. k = 1 reduces to greedy_decode.
std::vector<Token> topk_sample(const SequenceModel& model, std::span<const Token> context,
                               const DecodeParams& params, const StopSet& stops, Rng& rng);
// Convenience overload seeding a fresh generator from params.seed.
std::vector<Token> topk_sample(const SequenceModel& model, std::span<const Token> context,
                               const DecodeParams& params, const StopSet& stops);

// One top-k sampling step; exposed for the engine's bookkeeping.
Token topk_step(const SequenceModel& model, std::span<const Token> context,
                const DecodeParams& params, Rng& rng);

struct BestOfN {
    std::vector<Token> speech;
    int chosen = -1;         // candidate index, lowest on WER ties
    double wer = 0.0;
    int first_token_call = -1; // model-call offset of the chosen candidate's first token
    int total_calls = 0;
};

// Draws params.n_candidates speech continuations, decodes each through the
// codec, and keeps the one with minimum word error rate against the intended
// words.
BestOfN best_of_n_speech(const SequenceModel& model, std::span<const Token> context,
                         std::span<const int> intended_words, const ToyCodec& codec,
                         const DecodeParams& params, const StopSet& stops, Rng& rng);

// Sum of log P(token_t | prefix). Throws std::invalid_argument when empty.
double score_sequence(const SequenceModel& model, std::span<const Token> tokens);

// Levenshtein word error rate: edits / max(1, |ref|).
double word_error_rate(std::span<const int> hyp, std::span<const int> ref);
double word_error_rate(const std::vector<std::string>& hyp, const std::vector<std::string>& ref);

// Hallucination cleanup for one stage output: truncate at the first
// structural token, drop tokens outside the stage's legal vocabulary, and cap
// the length (max_words for text stages, max_frames for speech).
std::vector<Token> sanitize_stage_output(std::span<const Token> raw, Stage stage,
                                         const TokenSpace& space, int max_words, int max_frames);

} // namespace duplexsim
