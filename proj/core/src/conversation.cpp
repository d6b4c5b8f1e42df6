#include "duplexsim/types.hpp"

#include "duplexsim/errors.hpp"

#include <string>
#include <utility>

namespace duplexsim {

const char* to_string(Mode mode) noexcept {
    switch (mode) {
        case Mode::Listening: return "listening";
        case Mode::Speaking: return "speaking";
        case Mode::Overlap: return "overlap";
        case Mode::MutualSilence: return "mutual_silence";
    }
    return "?";
}

Conversation Conversation::swapped() const {
    Conversation out = *this;
    std::swap(out.user, out.system_reference);
    std::swap(out.user_words, out.system_words);
    std::swap(out.user_speaker, out.system_speaker);
    return out;
}

namespace {

void validate_channel(const std::string& conv_id, const std::string& name,
                      const FrameStream& stream, const std::vector<WordSpan>& words) {
    const int total = stream.length();
    for (const FrameLabel label : stream.labels) {
        if (label < 0) {
            throw ValidationError(conv_id + ": channel " + name + " has a negative frame label");
        }
    }

    std::vector<bool> in_span(static_cast<std::size_t>(total) + 1, false);
    int prev_end = 0;
    for (const WordSpan& w : words) {
        if (w.word.empty()) throw ValidationError(conv_id + ": empty word text in channel " + name);
        if (w.start_frame < 1 || w.end_frame > total || w.start_frame > w.end_frame) {
            throw ValidationError(conv_id + ": word '" + w.word + "' span out of range in channel " + name);
        }
        if (w.start_frame <= prev_end) {
            throw ValidationError(conv_id + ": word spans overlap or are unordered in channel " + name);
        }
        prev_end = w.end_frame;
        for (int f = w.start_frame; f <= w.end_frame; ++f) in_span[static_cast<std::size_t>(f)] = true;
    }

    for (int f = 1; f <= total; ++f) {
        const bool silent = stream.silent_at(f);
        if (in_span[static_cast<std::size_t>(f)] && silent) {
            throw ValidationError(conv_id + ": silent frame " + std::to_string(f) +
                                  " inside a word span in channel " + name);
        }
        if (!in_span[static_cast<std::size_t>(f)] && !silent) {
            throw ValidationError(conv_id + ": speech frame " + std::to_string(f) +
                                  " outside every word span in channel " + name);
        }
    }
}

} // namespace

void validate(const Conversation& conv) {
    if (conv.user.fps <= 0.0) throw ValidationError(conv.id + ": fps must be positive");
    if (conv.user.fps != conv.system_reference.fps) {
        throw ValidationError(conv.id + ": channels disagree on fps");
    }
    if (conv.user.length() != conv.system_reference.length()) {
        throw ValidationError(conv.id + ": channels disagree on length");
    }
    validate_channel(conv.id, conv.user_speaker, conv.user, conv.user_words);
    validate_channel(conv.id, conv.system_speaker, conv.system_reference, conv.system_words);
}

} // namespace duplexsim
