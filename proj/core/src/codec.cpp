#include "duplexsim/codec.hpp"

#include <stdexcept>

namespace duplexsim {

ToyCodec::ToyCodec(int speech_vocab, int word_count, int frames_per_word)
    : speech_vocab_(speech_vocab), word_count_(word_count), frames_per_word_(frames_per_word) {
    if (speech_vocab < 2) throw std::invalid_argument("codec: need at least one non-silent label");
    if (word_count < 1 || frames_per_word < 1) {
        throw std::invalid_argument("codec: word count and frames per word must be >= 1");
    }
    double capacity = 1.0;
    for (int i = 0; i < frames_per_word; ++i) capacity *= speech_vocab - 1;
    if (capacity < word_count) {
        throw std::invalid_argument("codec: code space too small for the vocabulary");
    }
}

std::vector<FrameLabel> ToyCodec::encode(int word_id) const {
    if (word_id < 0 || word_id >= word_count_) throw std::out_of_range("codec: word id out of range");
    const int base = speech_vocab_ - 1;
    std::vector<FrameLabel> code(static_cast<std::size_t>(frames_per_word_));
    int rest = word_id;
    for (int i = frames_per_word_ - 1; i >= 0; --i) {
        code[static_cast<std::size_t>(i)] = 1 + rest % base;
        rest /= base;
    }
    return code;
}

std::optional<int> ToyCodec::decode(std::span<const FrameLabel> code) const {
    if (static_cast<int>(code.size()) != frames_per_word_) return std::nullopt;
    const int base = speech_vocab_ - 1;
    long long value = 0;
    for (const FrameLabel f : code) {
        if (f < 1 || f >= speech_vocab_) return std::nullopt;
        value = value * base + (f - 1);
    }
    if (value >= word_count_) return std::nullopt;
    return static_cast<int>(value);
}

std::vector<int> ToyCodec::decode_stream(std::span<const FrameLabel> frames) const {
    std::vector<int> words;
    std::size_t i = 0;
    while (i < frames.size()) {
        if (frames[i] == kSilence) {
            ++i;
            continue;
        }
        if (i + static_cast<std::size_t>(frames_per_word_) <= frames.size()) {
            if (const auto word = decode(frames.subspan(i, static_cast<std::size_t>(frames_per_word_)))) {
                words.push_back(*word);
                i += static_cast<std::size_t>(frames_per_word_);
                continue;
            }
        }
        ++i;
    }
    return words;
}

} // namespace duplexsim
