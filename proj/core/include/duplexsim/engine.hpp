#pragma once

#include "duplexsim/blocks.hpp"
#include "duplexsim/codec.hpp"
#include "duplexsim/decode.hpp"
#include "duplexsim/models.hpp"
#include "duplexsim/token_space.hpp"
#include "duplexsim/types.hpp"

#include <condition_variable>
#include <deque>
#include <mutex>
#include <optional>
#include <span>
#include <vector>

namespace duplexsim {

struct EngineConfig {
    int n_block = 50;
    Variant variant = Variant::Full;
    // Strategies are fixed by the stage (greedy transcript, sampled response,
    // best-of-n speech); per-stage params carry k, temperature, candidates.
    DecodeParams asr_params{DecodeParams::Strategy::Greedy, 1, 1.0, 0, 64, 1};
    DecodeParams res_params{DecodeParams::Strategy::TopK, 30, 0.8, 0, 64, 1};
    DecodeParams spe_params{DecodeParams::Strategy::TopK, 30, 0.8, 0, 64, 10};
    int max_words = 25;
    int silence_k = 10;
    enum class Clock { Simulated, Wall };
    Clock clock = Clock::Simulated;
    double per_token_latency_s = 0.0; // simulated cost per model call
    double fps = 25.0;
    std::uint64_t seed = 0;

    void check() const;
};

struct StageRecord {
    Stage stage = Stage::Spe;
    int context_len = 0;
    int calls = 0;
    double t_start = 0.0;
    double t_end = 0.0;
    std::vector<Token> raw;    // sampled tokens (chosen candidate for speech)
    std::vector<Token> output; // sanitized stage output
};

struct BlockTrace {
    int block = 0;
    int emit_start = 0;            // 1-based frame where emitted[0] lands
    double input_end_time = 0.0;   // when the block's input finished arriving
    double t_start = 0.0;          // when processing began
    double t_end = 0.0;
    bool silent = false;           // silence heuristic suppressed emission
    double first_speech_time = -1; // instant the emitted speech began generating
    std::vector<StageRecord> stages;
    std::vector<FrameLabel> emitted; // exactly the block length
};

struct StageTrace {
    Variant variant = Variant::Full;
    int n_block = 0;
    double fps = 25.0;
    bool teacher_forced = false;
    bool turn_based = false;
    std::vector<BlockTrace> blocks;
};

struct EngineResult {
    FrameStream output;
    StageTrace trace;
};

// Pull-model block delivery; the engine never sees past the block it asked
// for.
class BlockSource {
public:
    virtual ~BlockSource() = default;
    virtual std::optional<std::vector<FrameLabel>> next_block() = 0;
};

class StreamBlockSource : public BlockSource {
public:
    StreamBlockSource(const FrameStream& stream, int n_block);
    std::optional<std::vector<FrameLabel>> next_block() override;

private:
    const FrameStream* stream_;
    int n_block_;
    int cursor_ = 0; // frames handed out
};

// Ordered bounded queue connecting an input-delivery context to the engine.
class QueueBlockSource : public BlockSource {
public:
    explicit QueueBlockSource(std::size_t capacity = 8);
    void push(std::vector<FrameLabel> block); // blocks while full
    void close();
    std::optional<std::vector<FrameLabel>> next_block() override; // blocks while empty

private:
    std::mutex mutex_;
    std::condition_variable not_full_;
    std::condition_variable not_empty_;
    std::deque<std::vector<FrameLabel>> queue_;
    std::size_t capacity_;
    bool closed_ = false;
};

// A candidate counts as silent when it contains no word token and no
// non-silent speech frame.
bool candidate_is_silent(std::span<const Token> candidate, const TokenSpace& space);

// Majority silence rule: silent iff strictly more than half of the sampled
// candidates are silent.
bool silence_decision(const std::vector<std::vector<Token>>& candidates, const TokenSpace& space);

// Blockwise duplex engine, free-running: each block's stages condition on
// all prior blocks' inputs and the engine's own previous outputs.
EngineResult run_duplex(BlockSource& input, const SequenceModel& model, const ToyCodec& codec,
                        const TokenSpace& space, const EngineConfig& config,
                        const SpeakerPrompt& prompt = {});
EngineResult run_duplex(const FrameStream& input, const SequenceModel& model, const ToyCodec& codec,
                        const TokenSpace& space, const EngineConfig& config,
                        const SpeakerPrompt& prompt = {});

// Teacher-forced evaluation mode: history comes from the reference targets,
// tiled into windows exactly like training instances; only the current
// block's stages are the model's own.
EngineResult run_duplex_teacher(const Conversation& conv, const SequenceModel& model,
                                const ToyCodec& codec, const TokenSpace& space,
                                const EngineConfig& config, double window_s = 60.0);

// Turn-by-turn baseline: VAD-buffered turns, three-stage decode per turn,
// response emitted from the detection frame onward and truncated the moment
// the user speaks again. The joint output never overlaps the user.
EngineResult run_turn_based(const FrameStream& input, const SequenceModel& model,
                            const ToyCodec& codec, const TokenSpace& space,
                            const EngineConfig& config, int delta,
                            const SpeakerPrompt& prompt = {});

} // namespace duplexsim
