#pragma once

#include "duplexsim/codec.hpp"
#include "duplexsim/token_space.hpp"
#include "duplexsim/types.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace duplexsim {

// Parameters for the synthetic two-channel conversation generator, the
// stand-in for a real dialogue corpus.
struct SyntheticSpec {
    int n_conversations = 10;
    int word_vocab = 40;
    int speech_vocab = 32;
    int frames_per_word = 5;
    double fps = 25.0;
    double duration_s = 60.0;
    double mean_turn_words = 6.0;
    double mean_pause_frames = 20.0;
    double target_overlap_rate = 0.0; // block-level rate the corpus converges to
    double backchannel_prob = 0.0;
    double calibration_block_s = 2.0; // block size the overlap controller measures at
    std::uint64_t seed = 0;

    void check() const;
};

struct Corpus {
    TokenSpace space;
    int frames_per_word = 5;
    std::vector<Conversation> conversations;

    ToyCodec codec() const { return {space.speech_vocab(), space.word_count(), frames_per_word}; }
};

// Deterministic pseudo-word list ("bado", "kiru", ...).
std::vector<std::string> default_word_list(int n);

// Seeded, reproducible corpus whose empirical block-overlap rate converges to
// the target: turn transitions either overlap the previous turn's tail or
// clear the next block boundary, steered by the realized rate so far.
// Word frames are the codec encodings of the spoken words.
Corpus generate_corpus(const SyntheticSpec& spec);

} // namespace duplexsim
