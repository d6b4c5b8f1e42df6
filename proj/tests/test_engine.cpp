#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "duplexsim/engine.hpp"
#include "duplexsim/errors.hpp"
#include "duplexsim/rng.hpp"
#include "duplexsim/synth.hpp"
#include "duplexsim/timing.hpp"
#include "test_util.hpp"

#include <algorithm>
#include <thread>

using namespace duplexsim;

namespace {

// scripted model that always produces words at RES and speech at SPE
ScriptedModel always_speak(const TokenSpace& space) {
    ScriptedModel model = ScriptedModel::constant(space.total(), 3);
    model.set_rule(space.res_tag(), space.word_token(0));
    model.set_rule(space.word_token(0), space.word_token(1));
    model.set_rule(space.word_token(1), space.spe_tag());
    model.set_rule(space.asr_tag(), space.eob());
    model.set_rule(space.spe_tag(), 3);
    model.set_rule(3, 3);
    return model;
}

bool block_prefix_equal(const StageTrace& a, const StageTrace& b, int through_block) {
    for (int i = 0; i <= through_block; ++i) {
        const BlockTrace& x = a.blocks[static_cast<std::size_t>(i)];
        const BlockTrace& y = b.blocks[static_cast<std::size_t>(i)];
        if (x.emitted != y.emitted || x.silent != y.silent ||
            x.first_speech_time != y.first_speech_time || x.t_end != y.t_end) {
            return false;
        }
        if (x.stages.size() != y.stages.size()) return false;
        for (std::size_t s = 0; s < x.stages.size(); ++s) {
            if (x.stages[s].raw != y.stages[s].raw || x.stages[s].output != y.stages[s].output) {
                return false;
            }
        }
    }
    return true;
}

class SpyModel : public SequenceModel {
public:
    explicit SpyModel(const SequenceModel& inner) : inner_(&inner) {}
    std::vector<double> next_token_log_probs(std::span<const Token> context) const override {
        contexts.emplace_back(context.begin(), context.end());
        return inner_->next_token_log_probs(context);
    }
    int vocab_size() const override { return inner_->vocab_size(); }
    mutable std::vector<std::vector<Token>> contexts;

private:
    const SequenceModel* inner_;
};

SyntheticSpec small_spec(std::uint64_t seed, double overlap = 0.4) {
    SyntheticSpec spec;
    spec.n_conversations = 1;
    spec.word_vocab = 12;
    spec.speech_vocab = 6;
    spec.frames_per_word = 4;
    spec.duration_s = 16.0;
    spec.mean_turn_words = 4.0;
    spec.mean_pause_frames = 14.0;
    spec.target_overlap_rate = overlap;
    spec.seed = seed;
    return spec;
}

} // namespace

TEST_CASE("silence_decision is a strict majority rule") {
    const TokenSpace space = testutil::tiny_space();
    const std::vector<Token> silent_candidate{};
    const std::vector<Token> speaking_candidate{space.word_token(0)};

    const auto decide = [&](int k, int silent) {
        std::vector<std::vector<Token>> candidates;
        for (int i = 0; i < silent; ++i) candidates.push_back(silent_candidate);
        for (int i = silent; i < k; ++i) candidates.push_back(speaking_candidate);
        return silence_decision(candidates, space);
    };

    for (const int k : {1, 2, 10}) {
        const int m = k / 2;
        CHECK_FALSE(decide(k, m));
        CHECK(decide(k, m + 1));
    }
    CHECK_FALSE(decide(10, 0));
    CHECK(decide(10, 6));
    CHECK_FALSE(decide(10, 5));
}

TEST_CASE("candidate silence looks through silence frames") {
    const TokenSpace space = testutil::tiny_space();
    CHECK(candidate_is_silent(std::vector<Token>{}, space));
    CHECK(candidate_is_silent(std::vector<Token>{kSilence, kSilence}, space));
    CHECK_FALSE(candidate_is_silent(std::vector<Token>{3}, space));
    CHECK_FALSE(candidate_is_silent(std::vector<Token>{space.word_token(1)}, space));
}

TEST_CASE("duplex stage traces follow the variant exactly") {
    const Corpus corpus = generate_corpus(small_spec(5));
    const Conversation& conv = corpus.conversations[0];
    const ToyCodec codec = corpus.codec();
    const ScriptedModel model = ScriptedModel::uniform(corpus.space.total());

    for (const Variant variant : {Variant::None, Variant::Asr, Variant::Response, Variant::Full}) {
        EngineConfig config;
        config.n_block = 25;
        config.variant = variant;
        config.silence_k = 3;
        config.spe_params.n_candidates = 2;
        config.seed = 11;

        const EngineResult result = run_duplex(conv.user, model, codec, corpus.space, config,
                                               conv.speaker_prompt);
        const auto& canon = stages_for(variant);
        REQUIRE(!result.trace.blocks.empty());
        for (const BlockTrace& bt : result.trace.blocks) {
            REQUIRE(bt.stages.size() == canon.size());
            for (std::size_t s = 0; s < canon.size(); ++s) {
                CHECK(bt.stages[s].stage == canon[s]);
            }
            for (const StageRecord& rec : bt.stages) {
                if (rec.stage == Stage::Spe) {
                    CHECK(static_cast<int>(rec.output.size()) <= config.n_block);
                } else {
                    CHECK(static_cast<int>(rec.output.size()) <= config.max_words);
                }
            }
            CHECK(static_cast<int>(bt.emitted.size()) <= config.n_block);
        }
        // output length always matches input length
        CHECK(result.output.length() == conv.length());
    }
}

TEST_CASE("causality: future frames never change past blocks") {
    const Corpus corpus = generate_corpus(small_spec(21));
    const ToyCodec codec = corpus.codec();
    const ScriptedModel model = ScriptedModel::uniform(corpus.space.total());
    const FrameStream& input = corpus.conversations[0].user;

    EngineConfig config;
    config.n_block = 20;
    config.variant = Variant::Full;
    config.silence_k = 3;
    config.spe_params.n_candidates = 2;

    Rng rng(1234);
    for (int trial = 0; trial < 10; ++trial) {
        config.seed = trial;
        const EngineResult base = run_duplex(input, model, codec, corpus.space, config);
        const int blocks = static_cast<int>(base.trace.blocks.size());
        REQUIRE(blocks >= 2);
        const int b = uniform_int(rng, blocks - 1);

        FrameStream mutated = input;
        const int boundary = (b + 1) * config.n_block;
        for (int f = boundary + 1; f <= mutated.length(); ++f) {
            if (uniform_unit(rng) < 0.5) {
                mutated.labels[static_cast<std::size_t>(f - 1)] =
                    uniform_int(rng, corpus.space.speech_vocab());
            }
        }

        const EngineResult changed = run_duplex(mutated, model, codec, corpus.space, config);
        CHECK(block_prefix_equal(base.trace, changed.trace, b));
    }
}

TEST_CASE("conditioning: stage contexts contain exactly the prior intermediates") {
    const TokenSpace space = testutil::tiny_space(8, 6);
    const ToyCodec codec(8, 6, 2);
    const ScriptedModel inner = ScriptedModel::uniform(space.total());
    const SpyModel spy(inner);

    FrameStream input;
    input.labels.assign(40, 2); // ids well below the prompt marker
    SpeakerPrompt prompt{{7, 7, 7}};

    EngineConfig config;
    config.n_block = 20;
    config.silence_k = 2;
    config.spe_params.n_candidates = 2;
    config.max_words = 4;

    const auto tag_counts = [&](const std::vector<Token>& ctx, Token tag) {
        return std::count(ctx.begin(), ctx.end(), tag);
    };

    SUBCASE("full variant sees the current block's transcript at RES") {
        config.variant = Variant::Full;
        run_duplex(input, spy, codec, space, config, prompt);
        int max_block_seen = -1;
        for (const auto& ctx : spy.contexts) {
            REQUIRE(!ctx.empty());
            const Token last = ctx.back();
            if (last == space.asr_tag() && ctx[0] != 7) {
                const int b = static_cast<int>(tag_counts(ctx, space.eob()));
                max_block_seen = std::max(max_block_seen, b);
                CHECK(tag_counts(ctx, space.asr_tag()) == b + 1);
                CHECK(tag_counts(ctx, space.res_tag()) == b); // only up to b-1
            }
            if (last == space.res_tag() && ctx[0] != 7) {
                const int b = static_cast<int>(tag_counts(ctx, space.eob()));
                CHECK(tag_counts(ctx, space.asr_tag()) == b + 1); // includes block b
            }
            if (last == space.spe_tag() && ctx[0] == 7) {
                CHECK(ctx[1] == 7);
                CHECK(ctx[2] == 7);
            }
        }
        CHECK(max_block_seen == 1);
    }

    SUBCASE("response variant never sees transcripts") {
        config.variant = Variant::Response;
        run_duplex(input, spy, codec, space, config, prompt);
        for (const auto& ctx : spy.contexts) {
            CHECK(tag_counts(ctx, space.asr_tag()) == 0);
        }
    }

    SUBCASE("the speaker prompt only conditions the speech stage") {
        config.variant = Variant::Full;
        run_duplex(input, spy, codec, space, config, prompt);
        for (const auto& ctx : spy.contexts) {
            const bool has_prompt = ctx.size() >= 3 && ctx[0] == 7 && ctx[1] == 7 && ctx[2] == 7;
            // find the innermost stage tag to classify the call
            Token stage_tag = -1;
            for (auto it = ctx.rbegin(); it != ctx.rend(); ++it) {
                if (space.is_stage_tag(*it)) {
                    stage_tag = *it;
                    break;
                }
            }
            if (stage_tag == space.spe_tag()) {
                CHECK(has_prompt);
            } else if (stage_tag == space.asr_tag() || stage_tag == space.res_tag()) {
                CHECK_FALSE(has_prompt);
            }
        }
    }
}

TEST_CASE("duplex overlap against a simplex turn engine") {
    Corpus corpus = generate_corpus(small_spec(33, 0.5));
    const Conversation& conv = corpus.conversations[0];
    const ToyCodec codec = corpus.codec();

    EngineConfig config;
    config.n_block = 25;
    config.variant = Variant::Response;
    config.silence_k = 3;
    config.spe_params.n_candidates = 1;
    config.seed = 3;

    SUBCASE("an always-speak model overlaps the user in duplex mode") {
        const ScriptedModel model = always_speak(corpus.space);
        const EngineResult result = run_duplex(conv.user, model, codec, corpus.space, config);
        const BlockPlan plan = partition_blocks(conv.length(), config.n_block);
        int overlapping = 0;
        for (int b = 0; b < plan.block_count(); ++b) {
            overlapping += span_has_speech(conv.user, plan.span(b)) &&
                           span_has_speech(result.output, plan.span(b));
        }
        CHECK(overlapping > 0);
    }

    SUBCASE("the turn engine never overlaps, on any input or model") {
        Rng rng(7);
        for (int trial = 0; trial < 8; ++trial) {
            FrameStream input;
            const int total = 60 + uniform_int(rng, 200);
            for (int f = 0; f < total; ++f) {
                input.labels.push_back(uniform_unit(rng) < 0.4
                                           ? 1 + uniform_int(rng, corpus.space.speech_vocab() - 1)
                                           : kSilence);
            }
            EngineConfig tcfg = config;
            tcfg.seed = trial;
            const ScriptedModel model =
                trial % 2 == 0 ? always_speak(corpus.space)
                               : ScriptedModel::uniform(corpus.space.total());
            const EngineResult result =
                run_turn_based(input, model, codec, corpus.space, tcfg, 5);
            REQUIRE(result.output.length() == input.length());
            for (int f = 1; f <= input.length(); ++f) {
                CHECK(classify_mode(input.at(f), result.output.at(f)) != Mode::Overlap);
            }
        }
    }

    SUBCASE("all-silence input stays silent") {
        FrameStream input;
        input.labels.assign(120, kSilence);
        const ScriptedModel model = always_speak(corpus.space);
        const EngineResult result = run_turn_based(input, model, codec, corpus.space, config, 5);
        for (const FrameLabel f : result.output.labels) CHECK(f == kSilence);
        CHECK(result.trace.blocks.empty());
    }
}

TEST_CASE("turn responses start at the detection frame") {
    const TokenSpace space = testutil::tiny_space(8, 24);
    const ToyCodec codec(8, 24, 5);

    // user speaks frames 11..25, then silence; delta=10 detects at frame 35
    FrameStream input;
    input.labels.assign(120, kSilence);
    for (int f = 11; f <= 25; ++f) input.labels[static_cast<std::size_t>(f - 1)] = 2;

    ScriptedModel model = ScriptedModel::constant(space.total(), space.eob());
    model.set_rule(space.asr_tag(), space.word_token(1));
    model.set_rule(space.word_token(1), space.res_tag());
    model.set_rule(space.res_tag(), space.word_token(2));
    model.set_rule(space.word_token(2), space.spe_tag());
    model.set_rule(space.spe_tag(), 3);
    model.set_rule(3, 3);

    EngineConfig config;
    config.silence_k = 1;
    config.spe_params.n_candidates = 1;

    const EngineResult result = run_turn_based(input, model, codec, space, config, 10);
    REQUIRE(result.trace.blocks.size() == 1);
    CHECK(result.output.at(35) == 3);
    for (int f = 1; f < 35; ++f) CHECK(result.output.at(f) == kSilence);
    CHECK(result.trace.blocks[0].emit_start == 35);
    REQUIRE(result.trace.blocks[0].stages.size() == 3);
    CHECK(result.trace.blocks[0].stages[0].output == std::vector<Token>{space.word_token(1)});
    CHECK(result.trace.blocks[0].stages[1].output == std::vector<Token>{space.word_token(2)});
}

TEST_CASE("simulated clock timing") {
    const TokenSpace space = testutil::tiny_space(8, 24);
    const ToyCodec codec(8, 24, 5);

    // RES emits 19 words then stops; SPE chains speech frames
    ScriptedModel model = ScriptedModel::constant(space.total(), space.eob());
    model.set_rule(space.res_tag(), space.word_token(1));
    for (int w = 1; w < 19; ++w) model.set_rule(space.word_token(w), space.word_token(w + 1));
    model.set_rule(space.word_token(19), space.spe_tag());
    model.set_rule(space.spe_tag(), 3);
    model.set_rule(3, 3);

    // user speech ends exactly at the boundary of block 1
    FrameStream input;
    input.labels.assign(100, kSilence);
    for (int f = 31; f <= 50; ++f) input.labels[static_cast<std::size_t>(f - 1)] = 2;

    EngineConfig config;
    config.n_block = 50;
    config.variant = Variant::Response;
    config.silence_k = 1;
    config.spe_params.n_candidates = 1;

    SUBCASE("10 ms per token reproduces the analytic wait") {
        config.per_token_latency_s = 0.01;
        const EngineResult result = run_duplex(input, model, codec, space, config);
        const TimingReport timing = measure_timings(result.trace, input, 10);
        REQUIRE(!timing.segments.empty());
        // 19 response words + 1 stop token before the first speech token
        const double analytic = 20 * 0.01;
        CHECK(timing.segments[0].wait == doctest::Approx(analytic).epsilon(0.2));
        CHECK(timing.segments[0].rtf ==
              doctest::Approx(timing.segments[0].wait / timing.segments[0].duration_s));
    }

    SUBCASE("zero latency means zero block wait, exactly") {
        config.per_token_latency_s = 0.0;
        const EngineResult result = run_duplex(input, model, codec, space, config);
        const TimingReport timing = measure_timings(result.trace, input, 10);
        REQUIRE(!timing.block_waits.empty());
        for (const double w : timing.block_waits) CHECK(w == 0.0);
        CHECK(timing.block_wait_mean == 0.0);
    }

    SUBCASE("hand-built trace matches the RTF definition") {
        StageTrace trace;
        trace.fps = 25.0;
        BlockTrace bt;
        bt.block = 0;
        bt.emit_start = 51;
        bt.input_end_time = 2.0;
        bt.t_start = 2.0;
        bt.t_end = 2.6;
        bt.first_speech_time = 2.5; // 0.5 s after the 2.0 s segment
        bt.emitted = {3};
        trace.blocks.push_back(bt);

        FrameStream user;
        user.labels.assign(60, kSilence);
        for (int f = 1; f <= 50; ++f) user.labels[static_cast<std::size_t>(f - 1)] = 2;
        const TimingReport timing = measure_timings(trace, user, 5);
        REQUIRE(timing.segments.size() == 1);
        CHECK(timing.segments[0].wait == doctest::Approx(0.5));
        CHECK(timing.segments[0].rtf == doctest::Approx(0.25));
    }

    SUBCASE("speech without timing events is an error") {
        StageTrace trace;
        BlockTrace bt;
        bt.emitted = {3};
        bt.first_speech_time = -1;
        trace.blocks.push_back(bt);
        FrameStream user;
        user.labels.assign(10, kSilence);
        CHECK_THROWS_AS(measure_timings(trace, user, 5), std::invalid_argument);
    }
}

TEST_CASE("queue-fed engine equals the direct run") {
    const Corpus corpus = generate_corpus(small_spec(55));
    const Conversation& conv = corpus.conversations[0];
    const ToyCodec codec = corpus.codec();
    const ScriptedModel model = ScriptedModel::uniform(corpus.space.total());

    EngineConfig config;
    config.n_block = 25;
    config.variant = Variant::Response;
    config.silence_k = 3;
    config.seed = 9;

    const EngineResult direct = run_duplex(conv.user, model, codec, corpus.space, config);

    QueueBlockSource queue(2);
    std::thread feeder([&] {
        StreamBlockSource src(conv.user, config.n_block);
        while (auto block = src.next_block()) queue.push(std::move(*block));
        queue.close();
    });
    EngineConfig qcfg = config;
    qcfg.fps = conv.fps();
    const EngineResult queued = run_duplex(queue, model, codec, corpus.space, qcfg);
    feeder.join();

    CHECK(queued.output.labels == direct.output.labels);
    REQUIRE(queued.trace.blocks.size() == direct.trace.blocks.size());
    CHECK(block_prefix_equal(queued.trace, direct.trace,
                             static_cast<int>(direct.trace.blocks.size()) - 1));
}

TEST_CASE("teacher-forced mode conditions on the reference") {
    const Corpus corpus = generate_corpus(small_spec(77, 0.3));
    const Conversation& conv = corpus.conversations[0];
    const ToyCodec codec = corpus.codec();
    const NgramModel model = ngram_train({{0, 1, 2}}, corpus.space.total(), 3, 0.5);

    EngineConfig config;
    config.n_block = 25;
    config.variant = Variant::Full;
    config.silence_k = 3;
    config.spe_params.n_candidates = 2;

    const EngineResult result = run_duplex_teacher(conv, model, codec, corpus.space, config, 8.0);
    CHECK(result.trace.teacher_forced);
    CHECK(result.output.length() == conv.length());
    for (const BlockTrace& bt : result.trace.blocks) {
        REQUIRE(bt.stages.size() == 3);
    }

    // deterministic rerun
    const EngineResult again = run_duplex_teacher(conv, model, codec, corpus.space, config, 8.0);
    CHECK(again.output.labels == result.output.labels);
}

TEST_CASE("model contract violations abort with a diagnostic") {
    const TokenSpace space = testutil::tiny_space();
    const ToyCodec codec(8, 6, 2);
    const ScriptedModel wrong_size = ScriptedModel::uniform(space.total() + 3);
    FrameStream input;
    input.labels.assign(10, kSilence);
    EngineConfig config;
    CHECK_THROWS_AS(run_duplex(input, wrong_size, codec, space, config), ModelContractError);
}
