#pragma once

#include "duplexsim/types.hpp"

#include <optional>
#include <span>
#include <vector>

namespace duplexsim {

// Bijective word <-> fixed-length speech code over the non-silent frame
// labels. Stands in for real audio tokenization: every word is exactly
// frames_per_word frames, and codes are the word id written in base
// (speech_vocab - 1) with digits mapped to labels 1..speech_vocab-1.
class ToyCodec {
public:
    ToyCodec() = default;
    // Throws std::invalid_argument when the code space cannot hold word_count
    // distinct words.
    ToyCodec(int speech_vocab, int word_count, int frames_per_word = 5);

    int speech_vocab() const { return speech_vocab_; }
    int word_count() const { return word_count_; }
    int frames_per_word() const { return frames_per_word_; }

    std::vector<FrameLabel> encode(int word_id) const;
    // Exactly one code; nullopt when the frames are not a valid code.
    std::optional<int> decode(std::span<const FrameLabel> code) const;
    // Greedy scan: skip silence, decode frames_per_word-sized chunks,
    // slide by one frame past undecodable chunks.
    std::vector<int> decode_stream(std::span<const FrameLabel> frames) const;

private:
    int speech_vocab_ = 0;
    int word_count_ = 0;
    int frames_per_word_ = 0;
};

} // namespace duplexsim
