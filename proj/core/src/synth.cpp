#include "duplexsim/synth.hpp"

#include "duplexsim/blocks.hpp"
#include "duplexsim/rng.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace duplexsim {

void SyntheticSpec::check() const {
    if (n_conversations < 1) throw std::invalid_argument("synth: n_conversations must be >= 1");
    if (word_vocab < 1) throw std::invalid_argument("synth: word_vocab must be >= 1");
    if (speech_vocab < 2) throw std::invalid_argument("synth: speech_vocab must be >= 2");
    if (frames_per_word < 1) throw std::invalid_argument("synth: frames_per_word must be >= 1");
    if (fps <= 0.0 || duration_s <= 0.0) throw std::invalid_argument("synth: fps and duration must be positive");
    if (mean_turn_words < 1.0) throw std::invalid_argument("synth: mean_turn_words must be >= 1");
    if (mean_pause_frames < 0.0) throw std::invalid_argument("synth: negative pause mean");
    if (target_overlap_rate < 0.0 || target_overlap_rate > 1.0) {
        throw std::invalid_argument("synth: target_overlap_rate must be in [0,1]");
    }
    if (backchannel_prob < 0.0 || backchannel_prob > 1.0) {
        throw std::invalid_argument("synth: backchannel_prob must be in [0,1]");
    }
    if (calibration_block_s <= 0.0) throw std::invalid_argument("synth: calibration block must be positive");
}

std::vector<std::string> default_word_list(int n) {
    static const std::vector<std::string> syllables = {
        "ba", "be", "bi", "bo", "bu", "da", "de", "di", "do", "du",
        "ka", "ke", "ki", "ko", "ku", "ma", "me", "mi", "mo", "mu",
        "na", "ne", "ni", "no", "nu", "ra", "re", "ri", "ro", "ru",
        "sa", "se", "si", "so", "su", "ta", "te", "ti", "to", "tu"};
    const int s = static_cast<int>(syllables.size());
    std::vector<std::string> words;
    words.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        std::string word = syllables[static_cast<std::size_t>((i / s) % s)] +
                           syllables[static_cast<std::size_t>(i % s)];
        if (i >= s * s) word += syllables[static_cast<std::size_t>((i / (s * s)) % s)];
        words.push_back(std::move(word));
    }
    return words;
}

namespace {

// Zipf-ish word frequencies so the corpus has a learnable skew.
std::vector<double> zipf_cumulative(int n) {
    std::vector<double> cum(static_cast<std::size_t>(n));
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
        total += 1.0 / std::pow(static_cast<double>(i + 1), 1.1);
        cum[static_cast<std::size_t>(i)] = total;
    }
    return cum;
}

int sample_zipf(Rng& rng, const std::vector<double>& cum) {
    const double u = uniform_unit(rng) * cum.back();
    return static_cast<int>(std::upper_bound(cum.begin(), cum.end(), u) - cum.begin());
}

struct ChannelState {
    FrameStream* stream = nullptr;
    std::vector<WordSpan>* words = nullptr;
    std::vector<bool> speaks; // per calibration block
    int last_word_end = 0;
};

class OverlapController {
public:
    OverlapController(int total_frames, int block_frames, double target)
        : block_frames_(block_frames), target_(target),
          blocks_(static_cast<std::size_t>((total_frames + block_frames - 1) / block_frames)) {}

    int block_of(int frame) const { return (frame - 1) / block_frames_; }

    void mark(int channel, int start, int end) {
        for (int b = block_of(start); b <= block_of(end); ++b) {
            if (b < static_cast<int>(blocks_.size())) {
                if (channel == 0) blocks_[static_cast<std::size_t>(b)].first = true;
                else blocks_[static_cast<std::size_t>(b)].second = true;
            }
        }
    }

    // realized rate over blocks fully before the given frame
    bool wants_overlap(int frame) const {
        if (target_ <= 0.0) return false;
        const int elapsed = std::min(block_of(frame), static_cast<int>(blocks_.size()));
        if (elapsed == 0) return true;
        int overlapped = 0;
        for (int b = 0; b < elapsed; ++b) {
            overlapped += blocks_[static_cast<std::size_t>(b)].first &&
                          blocks_[static_cast<std::size_t>(b)].second;
        }
        return static_cast<double>(overlapped) / elapsed < target_;
    }

    int next_boundary(int frame) const { return (block_of(frame) + 1) * block_frames_; }

private:
    int block_frames_;
    double target_;
    std::vector<std::pair<bool, bool>> blocks_;
};

} // namespace

Corpus generate_corpus(const SyntheticSpec& spec) {
    spec.check();

    Corpus corpus;
    corpus.space = TokenSpace(spec.speech_vocab, default_word_list(spec.word_vocab));
    corpus.frames_per_word = spec.frames_per_word;
    const ToyCodec codec = corpus.codec();
    const std::vector<double> zipf = zipf_cumulative(spec.word_vocab);

    const int total = std::max(1, static_cast<int>(std::lround(spec.duration_s * spec.fps)));
    const int cal_frames = std::max(1, static_cast<int>(std::lround(spec.calibration_block_s * spec.fps)));
    const int word_frames = spec.frames_per_word;

    for (int ci = 0; ci < spec.n_conversations; ++ci) {
        Rng rng(derive_seed(spec.seed, static_cast<std::uint64_t>(ci)));

        Conversation conv;
        char id[32];
        std::snprintf(id, sizeof id, "conv-%04d", ci);
        conv.id = id;
        conv.user.fps = conv.system_reference.fps = spec.fps;
        conv.user.labels.assign(static_cast<std::size_t>(total), kSilence);
        conv.system_reference.labels.assign(static_cast<std::size_t>(total), kSilence);
        for (int i = 0; i < 3; ++i) {
            conv.speaker_prompt.tokens.push_back(1 + uniform_int(rng, spec.speech_vocab - 1));
        }

        ChannelState channels[2] = {
            {&conv.user, &conv.user_words, {}, 0},
            {&conv.system_reference, &conv.system_words, {}, 0},
        };
        OverlapController controller(total, cal_frames, spec.target_overlap_rate);

        const auto write_word = [&](int ch, int word_id, int start) {
            const std::vector<FrameLabel> code = codec.encode(word_id);
            for (int i = 0; i < word_frames; ++i) {
                channels[ch].stream->labels[static_cast<std::size_t>(start + i - 1)] = code[static_cast<std::size_t>(i)];
            }
            channels[ch].words->push_back({corpus.space.words()[static_cast<std::size_t>(word_id)],
                                           start, start + word_frames - 1});
            channels[ch].last_word_end = start + word_frames - 1;
            controller.mark(ch, start, start + word_frames - 1);
        };

        int speaker = uniform_int(rng, 2);
        int cursor = 1 + geometric(rng, spec.mean_pause_frames / 2.0);
        while (cursor + word_frames - 1 <= total) {
            // one turn: a run of contiguous words
            const int want_words = 1 + geometric(rng, spec.mean_turn_words - 1.0);
            int written = 0;
            int t = cursor;
            while (written < want_words && t + word_frames - 1 <= total) {
                write_word(speaker, sample_zipf(rng, zipf), t);
                t += word_frames;
                ++written;
            }
            if (written == 0) break;
            const int turn_end = t - 1;

            // occasional short listener utterance inside the turn
            const int other = 1 - speaker;
            if (written >= 3 && controller.wants_overlap(turn_end) &&
                uniform_unit(rng) < spec.backchannel_prob) {
                const int offset = uniform_int(rng, (written - 1) * word_frames);
                const int bc_start = cursor + offset;
                if (bc_start > channels[other].last_word_end &&
                    bc_start + word_frames - 1 <= total) {
                    write_word(other, sample_zipf(rng, zipf), bc_start);
                }
            }

            // transition: overlap the tail or clear the next block boundary
            int next_start;
            if (controller.wants_overlap(turn_end)) {
                const int max_overlap = std::max(1, written * word_frames - 1);
                const int overlap = std::min(1 + geometric(rng, cal_frames / 3.0), max_overlap);
                next_start = turn_end - overlap + 1;
            } else {
                next_start = controller.next_boundary(turn_end) + 1 + geometric(rng, spec.mean_pause_frames);
            }
            next_start = std::max(next_start, channels[other].last_word_end + 2);
            speaker = other;
            cursor = next_start;
        }

        validate(conv);
        corpus.conversations.push_back(std::move(conv));
    }
    return corpus;
}

} // namespace duplexsim
