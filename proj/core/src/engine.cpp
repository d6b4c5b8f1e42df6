#include "duplexsim/engine.hpp"

#include "duplexsim/errors.hpp"
#include "duplexsim/targets.hpp"
#include "engine_internal.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace duplexsim {

void EngineConfig::check() const {
    if (n_block < 1) throw std::invalid_argument("engine config: n_block must be >= 1");
    if (max_words < 1) throw std::invalid_argument("engine config: max_words must be >= 1");
    if (silence_k < 1) throw std::invalid_argument("engine config: silence_k must be >= 1");
    if (fps <= 0.0) throw std::invalid_argument("engine config: fps must be positive");
    if (per_token_latency_s < 0.0) throw std::invalid_argument("engine config: negative latency");
    asr_params.check();
    res_params.check();
    spe_params.check();
}

StreamBlockSource::StreamBlockSource(const FrameStream& stream, int n_block)
    : stream_(&stream), n_block_(n_block) {
    if (n_block < 1) throw std::invalid_argument("block source: n_block must be >= 1");
}

std::optional<std::vector<FrameLabel>> StreamBlockSource::next_block() {
    if (cursor_ >= stream_->length()) return std::nullopt;
    const int len = std::min(n_block_, stream_->length() - cursor_);
    std::vector<FrameLabel> block(stream_->labels.begin() + cursor_,
                                  stream_->labels.begin() + cursor_ + len);
    cursor_ += len;
    return block;
}

QueueBlockSource::QueueBlockSource(std::size_t capacity) : capacity_(std::max<std::size_t>(1, capacity)) {}

void QueueBlockSource::push(std::vector<FrameLabel> block) {
    std::unique_lock lock(mutex_);
    not_full_.wait(lock, [&] { return queue_.size() < capacity_ || closed_; });
    if (closed_) throw std::logic_error("block queue: push after close");
    queue_.push_back(std::move(block));
    not_empty_.notify_one();
}

void QueueBlockSource::close() {
    std::lock_guard lock(mutex_);
    closed_ = true;
    not_empty_.notify_all();
    not_full_.notify_all();
}

std::optional<std::vector<FrameLabel>> QueueBlockSource::next_block() {
    std::unique_lock lock(mutex_);
    not_empty_.wait(lock, [&] { return !queue_.empty() || closed_; });
    if (queue_.empty()) return std::nullopt;
    std::vector<FrameLabel> block = std::move(queue_.front());
    queue_.pop_front();
    not_full_.notify_one();
    return block;
}

bool candidate_is_silent(std::span<const Token> candidate, const TokenSpace& space) {
    for (const Token t : candidate) {
        if (space.is_word(t)) return false;
        if (space.is_speech(t) && t != kSilence) return false;
    }
    return true;
}

bool silence_decision(const std::vector<std::vector<Token>>& candidates, const TokenSpace& space) {
    const std::size_t n = candidates.size();
    std::size_t silent = 0;
    for (const auto& c : candidates) {
        if (candidate_is_silent(c, space)) ++silent;
    }
    return 2 * silent > n; // strictly more than half
}

namespace detail {

StageRecord StageEngine::exec_asr(std::vector<Token>& local, int speech_cap) {
    StageRecord rec;
    rec.stage = Stage::Asr;
    std::vector<Token> ctx = local;
    ctx.push_back(space_->asr_tag());
    rec.context_len = static_cast<int>(ctx.size());

    const int calls0 = metered_->calls();
    rec.t_start = metered_->cost_before(calls0);
    rec.raw = greedy_decode(*metered_, ctx, stops_, config_->max_words + 1);
    rec.output = sanitize_stage_output(rec.raw, Stage::Asr, *space_, config_->max_words, speech_cap);
    rec.calls = metered_->calls() - calls0;
    rec.t_end = metered_->total_cost();

    local.push_back(space_->asr_tag());
    local.insert(local.end(), rec.output.begin(), rec.output.end());
    return rec;
}

StageRecord StageEngine::exec_res(std::vector<Token>& local, int speech_cap, bool apply_silence_rule,
                                  bool* silent) {
    StageRecord rec;
    rec.stage = Stage::Res;
    std::vector<Token> ctx = local;
    ctx.push_back(space_->res_tag());
    rec.context_len = static_cast<int>(ctx.size());

    DecodeParams params = config_->res_params;
    params.max_new_tokens = config_->max_words + 1;

    const int calls0 = metered_->calls();
    rec.t_start = metered_->cost_before(calls0);

    const int draws = apply_silence_rule ? config_->silence_k : 1;
    std::vector<std::vector<Token>> raws;
    std::vector<std::vector<Token>> candidates;
    for (int c = 0; c < draws; ++c) {
        raws.push_back(topk_sample(*metered_, ctx, params, stops_, *rng_));
        candidates.push_back(sanitize_stage_output(raws.back(), Stage::Res, *space_,
                                                   config_->max_words, speech_cap));
    }
    if (apply_silence_rule) *silent = silence_decision(candidates, *space_);
    if (!*silent) {
        for (std::size_t c = 0; c < candidates.size(); ++c) {
            if (!candidate_is_silent(candidates[c], *space_)) {
                rec.output = candidates[c];
                rec.raw = raws[c];
                break;
            }
        }
    }
    rec.calls = metered_->calls() - calls0;
    rec.t_end = metered_->total_cost();

    res_output_ = rec.output;
    local.push_back(space_->res_tag());
    local.insert(local.end(), rec.output.begin(), rec.output.end());
    return rec;
}

StageRecord StageEngine::exec_spe(std::vector<Token>& local, int speech_cap, bool has_res,
                                  bool apply_silence_rule, bool* silent, int* first_call) {
    StageRecord rec;
    rec.stage = Stage::Spe;
    std::vector<Token> ctx = prompt_;
    ctx.insert(ctx.end(), local.begin(), local.end());
    ctx.push_back(space_->spe_tag());
    rec.context_len = static_cast<int>(ctx.size());

    DecodeParams params = config_->spe_params;
    params.max_new_tokens = speech_cap + 1;

    const int calls0 = metered_->calls();
    rec.t_start = metered_->cost_before(calls0);

    if (has_res) {
        // reranked against the response; skipped entirely when silenced
        if (!*silent) {
            std::vector<int> intended;
            for (const Token t : res_output_) {
                if (space_->is_word(t)) intended.push_back(space_->word_id(t));
            }
            const BestOfN best = best_of_n_speech(*metered_, ctx, intended, *codec_, params,
                                                  stops_, *rng_);
            rec.raw = best.speech;
            rec.output = sanitize_stage_output(rec.raw, Stage::Spe, *space_,
                                               config_->max_words, speech_cap);
            *first_call = calls0 + best.first_token_call;
        }
    } else {
        const int draws = apply_silence_rule ? config_->silence_k : 1;
        std::vector<std::vector<Token>> raws;
        std::vector<std::vector<Token>> candidates;
        std::vector<int> starts;
        for (int c = 0; c < draws; ++c) {
            starts.push_back(metered_->calls());
            raws.push_back(topk_sample(*metered_, ctx, params, stops_, *rng_));
            candidates.push_back(sanitize_stage_output(raws.back(), Stage::Spe, *space_,
                                                       config_->max_words, speech_cap));
        }
        if (apply_silence_rule) *silent = silence_decision(candidates, *space_);
        if (!*silent) {
            for (std::size_t c = 0; c < candidates.size(); ++c) {
                if (!candidate_is_silent(candidates[c], *space_)) {
                    rec.output = candidates[c];
                    rec.raw = raws[c];
                    *first_call = starts[c];
                    break;
                }
            }
        }
    }
    rec.calls = metered_->calls() - calls0;
    rec.t_end = metered_->total_cost();

    local.push_back(space_->spe_tag());
    local.insert(local.end(), rec.output.begin(), rec.output.end());
    return rec;
}

StageOutcome StageEngine::run(const std::vector<Token>& history, int speech_cap,
                              bool apply_silence_rule) {
    StageOutcome outcome;
    std::vector<Token> local = history;
    res_output_.clear();

    const auto& stages = stages_for(config_->variant);
    const bool has_res = std::find(stages.begin(), stages.end(), Stage::Res) != stages.end();

    for (const Stage stage : stages) {
        switch (stage) {
            case Stage::Asr:
                outcome.records.push_back(exec_asr(local, speech_cap));
                break;
            case Stage::Res:
                outcome.records.push_back(exec_res(local, speech_cap, apply_silence_rule,
                                                   &outcome.silent));
                break;
            case Stage::Spe:
                outcome.records.push_back(exec_spe(local, speech_cap, has_res, apply_silence_rule,
                                                   &outcome.silent, &outcome.speech_first_call));
                break;
        }
    }
    outcome.speech_output = outcome.records.back().output;
    return outcome;
}

} // namespace detail

namespace {

std::vector<FrameLabel> pad_block(std::vector<Token> speech, std::size_t block_len) {
    speech.resize(block_len, kSilence);
    return speech;
}

bool has_speech(std::span<const FrameLabel> frames) {
    return std::any_of(frames.begin(), frames.end(), [](FrameLabel f) { return f != kSilence; });
}

void offset_times(detail::StageOutcome& outcome, BlockTrace& bt, double block_start,
                  const detail::MeteredModel& metered) {
    for (StageRecord& rec : outcome.records) {
        rec.t_start += block_start;
        rec.t_end += block_start;
    }
    bt.t_start = block_start;
    bt.t_end = block_start + metered.total_cost();
    bt.silent = outcome.silent;
    bt.stages = std::move(outcome.records);
    if (outcome.speech_first_call >= 0 && has_speech(bt.emitted)) {
        bt.first_speech_time = block_start + metered.cost_before(outcome.speech_first_call);
    }
}

} // namespace

EngineResult run_duplex(BlockSource& input, const SequenceModel& model, const ToyCodec& codec,
                        const TokenSpace& space, const EngineConfig& config,
                        const SpeakerPrompt& prompt) {
    config.check();
    if (model.vocab_size() != space.total()) {
        throw ModelContractError("model vocab " + std::to_string(model.vocab_size()) +
                                 " does not match token space " + std::to_string(space.total()));
    }

    detail::MeteredModel metered(model, config.clock, config.per_token_latency_s);
    Rng rng(derive_seed(config.seed, 1));
    detail::StageEngine stages(metered, codec, space, config, prompt.tokens, rng);

    EngineResult result;
    result.output.fps = config.fps;
    result.trace.variant = config.variant;
    result.trace.n_block = config.n_block;
    result.trace.fps = config.fps;

    TokenStreamBuilder stream(space);
    int consumed = 0;
    double prev_end = 0.0;
    int b = 0;
    while (auto block = input.next_block()) {
        if (block->empty()) break;
        consumed += static_cast<int>(block->size());
        const double arrival = static_cast<double>(consumed) / config.fps;
        const double block_start = std::max(arrival, prev_end);

        metered.reset_block();
        stream.append_input(*block);
        detail::StageOutcome outcome = stages.run(stream.tokens(), static_cast<int>(block->size()),
                                                  /*apply_silence_rule=*/true);

        BlockTrace bt;
        bt.block = b++;
        bt.emit_start = consumed - static_cast<int>(block->size()) + 1;
        bt.input_end_time = arrival;
        bt.emitted = pad_block(outcome.speech_output, block->size());
        offset_times(outcome, bt, block_start, metered);
        prev_end = bt.t_end;

        result.output.labels.insert(result.output.labels.end(), bt.emitted.begin(), bt.emitted.end());
        for (const StageRecord& rec : bt.stages) stream.append_stage(rec.stage, rec.output);
        stream.end_block();
        result.trace.blocks.push_back(std::move(bt));
    }
    return result;
}

EngineResult run_duplex(const FrameStream& input, const SequenceModel& model, const ToyCodec& codec,
                        const TokenSpace& space, const EngineConfig& config,
                        const SpeakerPrompt& prompt) {
    StreamBlockSource source(input, config.n_block);
    EngineConfig cfg = config;
    cfg.fps = input.fps;
    return run_duplex(source, model, codec, space, cfg, prompt);
}

EngineResult run_duplex_teacher(const Conversation& conv, const SequenceModel& model,
                                const ToyCodec& codec, const TokenSpace& space,
                                const EngineConfig& config, double window_s) {
    EngineConfig cfg = config;
    cfg.fps = conv.fps();
    cfg.check();
    if (model.vocab_size() != space.total()) {
        throw ModelContractError("model vocab does not match token space");
    }
    if (window_s <= 0.0) throw std::invalid_argument("run_duplex_teacher: window_s must be positive");

    detail::MeteredModel metered(model, cfg.clock, cfg.per_token_latency_s);
    Rng rng(derive_seed(cfg.seed, 1));
    detail::StageEngine stages(metered, codec, space, cfg, conv.speaker_prompt.tokens, rng);

    EngineResult result;
    result.output.fps = cfg.fps;
    result.trace.variant = cfg.variant;
    result.trace.n_block = cfg.n_block;
    result.trace.fps = cfg.fps;
    result.trace.teacher_forced = true;

    const int window_frames = std::max(1, static_cast<int>(std::lround(window_s * cfg.fps)));
    const BlockPlan windows = partition_blocks(conv.length(), window_frames);

    int consumed = 0;
    double prev_end = 0.0;
    int global_block = 0;
    for (int w = 0; w < windows.block_count(); ++w) {
        const FrameSpan window = windows.span(w);
        const BlockPlan local = partition_blocks(window.length(), cfg.n_block);
        BlockPlan abs_plan = local;
        abs_plan.total_frames = conv.length();
        for (FrameSpan& s : abs_plan.blocks) s = {window.start + s.start - 1, window.start + s.end - 1};

        TokenStreamBuilder ref(space);
        for (int b = 0; b < abs_plan.block_count(); ++b) {
            const FrameSpan span = abs_plan.span(b);
            std::vector<FrameLabel> block;
            for (int f = span.start; f <= span.end; ++f) block.push_back(conv.user.at(f));

            consumed += static_cast<int>(block.size());
            const double arrival = static_cast<double>(consumed) / cfg.fps;
            const double block_start = std::max(arrival, prev_end);

            metered.reset_block();
            ref.append_input(block);
            detail::StageOutcome outcome = stages.run(ref.tokens(), static_cast<int>(block.size()),
                                                      /*apply_silence_rule=*/true);

            BlockTrace bt;
            bt.block = global_block++;
            bt.emit_start = span.start;
            bt.input_end_time = arrival;
            bt.emitted = pad_block(outcome.speech_output, block.size());
            offset_times(outcome, bt, block_start, metered);
            prev_end = bt.t_end;

            result.output.labels.insert(result.output.labels.end(), bt.emitted.begin(), bt.emitted.end());
            result.trace.blocks.push_back(std::move(bt));

            // history continues from the reference targets, not the outputs
            const BlockCotTargets targets = block_targets(conv, abs_plan, b);
            for (const Stage stage : stages_for(cfg.variant)) {
                switch (stage) {
                    case Stage::Asr: ref.append_stage(stage, word_tokens(space, targets.asr_words)); break;
                    case Stage::Res: ref.append_stage(stage, word_tokens(space, targets.res_words)); break;
                    case Stage::Spe: ref.append_stage(stage, targets.speech_frames); break;
                }
            }
            ref.end_block();
        }
    }
    return result;
}

} // namespace duplexsim
