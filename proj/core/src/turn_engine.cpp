#include "duplexsim/engine.hpp"

#include "duplexsim/errors.hpp"
#include "duplexsim/targets.hpp"
#include "duplexsim/vad.hpp"
#include "engine_internal.hpp"

#include <algorithm>

namespace duplexsim {

EngineResult run_turn_based(const FrameStream& input, const SequenceModel& model,
                            const ToyCodec& codec, const TokenSpace& space,
                            const EngineConfig& config, int delta,
                            const SpeakerPrompt& prompt) {
    EngineConfig cfg = config;
    cfg.fps = input.fps;
    cfg.variant = Variant::Full; // the turn baseline always runs the full chain
    cfg.check();
    if (model.vocab_size() != space.total()) {
        throw ModelContractError("model vocab does not match token space");
    }

    detail::MeteredModel metered(model, cfg.clock, cfg.per_token_latency_s);
    Rng rng(derive_seed(cfg.seed, 2));
    detail::StageEngine stages(metered, codec, space, cfg, prompt.tokens, rng);

    EngineResult result;
    result.output.fps = input.fps;
    result.output.labels.assign(static_cast<std::size_t>(input.length()), kSilence);
    result.trace.variant = cfg.variant;
    result.trace.n_block = cfg.n_block;
    result.trace.fps = input.fps;
    result.trace.turn_based = true;

    const std::vector<TurnSegment> segments = vad_segment(input, delta);
    // generated response is bounded by the word cap spoken through the codec
    const int speech_cap = cfg.max_words * codec.frames_per_word();

    TokenStreamBuilder stream(space);
    double prev_end = 0.0;
    for (const TurnSegment& seg : segments) {
        const double arrival = static_cast<double>(seg.detect_frame) / input.fps;
        const double turn_start = std::max(arrival, prev_end);

        metered.reset_block();
        stream.append_input(std::span<const FrameLabel>(input.labels)
                                .subspan(static_cast<std::size_t>(seg.buffer_start - 1),
                                         static_cast<std::size_t>(seg.buffer_frames())));
        detail::StageOutcome outcome = stages.run(stream.tokens(), speech_cap,
                                                  /*apply_silence_rule=*/false);

        // emit from the detection frame, yielding the moment the user speaks
        std::vector<FrameLabel> emitted;
        int frame = seg.detect_frame;
        for (const Token t : outcome.speech_output) {
            if (frame > input.length() || !input.silent_at(frame)) break;
            result.output.labels[static_cast<std::size_t>(frame - 1)] = t;
            emitted.push_back(t);
            ++frame;
        }

        BlockTrace bt;
        bt.block = seg.index - 1;
        bt.emit_start = seg.detect_frame;
        bt.input_end_time = static_cast<double>(seg.buffer_end) / input.fps;
        bt.emitted = std::move(emitted);
        for (StageRecord& rec : outcome.records) {
            rec.t_start += turn_start;
            rec.t_end += turn_start;
        }
        bt.t_start = turn_start;
        bt.t_end = turn_start + metered.total_cost();
        bt.silent = outcome.speech_output.empty();
        bt.stages = std::move(outcome.records);
        if (outcome.speech_first_call >= 0 &&
            std::any_of(bt.emitted.begin(), bt.emitted.end(),
                        [](FrameLabel f) { return f != kSilence; })) {
            bt.first_speech_time = turn_start + metered.cost_before(outcome.speech_first_call);
        }
        prev_end = bt.t_end;

        for (const StageRecord& rec : bt.stages) stream.append_stage(rec.stage, rec.output);
        stream.end_turn();
        result.trace.blocks.push_back(std::move(bt));
    }
    return result;
}

} // namespace duplexsim
