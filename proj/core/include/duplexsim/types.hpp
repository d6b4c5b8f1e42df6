#pragma once

#include <cstdint>
#include <string>
#include <vector>

// Frame indices are 1-based and inclusive everywhere: a span [start, end]
// covers frames start..end of a stream whose frames are numbered 1..T.

namespace duplexsim {

using Token = std::int32_t;
using FrameLabel = Token;

// Reserved id for conversational silence, shared by every speech vocabulary.
// Distinct from the CTC blank, which only exists inside alignments.
inline constexpr FrameLabel kSilence = 0;

enum class Mode { Listening, Speaking, Overlap, MutualSilence };

// Joint activity of one (user, system) frame pair. Total and deterministic:
// exactly one mode holds for every pair.
constexpr Mode classify_mode(FrameLabel user, FrameLabel system) noexcept {
    const bool u = user != kSilence;
    const bool s = system != kSilence;
    if (u && !s) return Mode::Listening;
    if (!u && s) return Mode::Speaking;
    if (u && s) return Mode::Overlap;
    return Mode::MutualSilence;
}

const char* to_string(Mode mode) noexcept;

// One conversation channel: per-frame discrete labels at a fixed frame rate.
struct FrameStream {
    std::vector<FrameLabel> labels;
    double fps = 25.0;

    int length() const { return static_cast<int>(labels.size()); }
    FrameLabel at(int frame) const { return labels.at(static_cast<std::size_t>(frame - 1)); }
    bool silent_at(int frame) const { return at(frame) == kSilence; }
    double duration_s() const { return static_cast<double>(length()) / fps; }
};

struct WordSpan {
    std::string word;
    int start_frame = 0;
    int end_frame = 0;
};

// Short token sequence identifying the output voice; conditions the speech
// stage only.
struct SpeakerPrompt {
    std::vector<Token> tokens;
};

// Two-channel dialogue: the incoming user channel and the reference system
// channel, with ground-truth word spans for both.
struct Conversation {
    std::string id;
    FrameStream user;
    FrameStream system_reference;
    std::vector<WordSpan> user_words;
    std::vector<WordSpan> system_words;
    SpeakerPrompt speaker_prompt;
    std::string user_speaker = "A";
    std::string system_speaker = "B";

    int length() const { return user.length(); }
    double fps() const { return user.fps; }

    // Same dialogue with the roles exchanged (the other human simulated as
    // the assistant).
    Conversation swapped() const;
};

// Throws ValidationError unless streams, word spans, and frames are mutually
// consistent: equal lengths and fps, spans inside [1, T], ordered and
// disjoint per channel, frames non-silent exactly inside spans.
void validate(const Conversation& conv);

} // namespace duplexsim
