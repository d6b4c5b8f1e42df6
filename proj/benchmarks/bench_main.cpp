#include "duplexsim/align.hpp"
#include "duplexsim/decode.hpp"
#include "duplexsim/engine.hpp"
#include "duplexsim/eval.hpp"
#include "duplexsim/models.hpp"
#include "duplexsim/rng.hpp"
#include "duplexsim/synth.hpp"
#include "duplexsim/targets.hpp"

#include <benchmark/benchmark.h>

using namespace duplexsim;

namespace {

EmissionMatrix random_emissions(int frames, int vocab, Rng& rng) {
    EmissionMatrix em;
    em.frames = frames;
    em.vocab = vocab;
    em.log_scores.resize(static_cast<std::size_t>(frames) * (vocab + 1));
    for (double& v : em.log_scores) v = -5.0 * uniform_unit(rng);
    return em;
}

void bm_forced_align(benchmark::State& state) {
    Rng rng(1);
    const int frames = static_cast<int>(state.range(0));
    const EmissionMatrix em = random_emissions(frames, 50, rng);
    std::vector<Token> target;
    for (int i = 0; i < frames / 4; ++i) target.push_back(uniform_int(rng, 50));
    for (auto _ : state) {
        benchmark::DoNotOptimize(forced_align(em, target));
    }
    state.SetItemsProcessed(state.iterations() * frames);
}
BENCHMARK(bm_forced_align)->Arg(100)->Arg(400);

void bm_topk_step(benchmark::State& state) {
    const ScriptedModel model = ScriptedModel::uniform(static_cast<int>(state.range(0)));
    DecodeParams params;
    params.k = 30;
    Rng rng(2);
    const std::vector<Token> ctx{1, 2, 3};
    for (auto _ : state) {
        benchmark::DoNotOptimize(topk_step(model, ctx, params, rng));
    }
}
BENCHMARK(bm_topk_step)->Arg(128)->Arg(1024);

void bm_ngram_query(benchmark::State& state) {
    Rng rng(3);
    std::vector<std::vector<Token>> corpus;
    for (int s = 0; s < 50; ++s) {
        std::vector<Token> seq;
        for (int i = 0; i < 500; ++i) seq.push_back(uniform_int(rng, 128));
        corpus.push_back(std::move(seq));
    }
    const NgramModel model = ngram_train(corpus, 128, 3, 0.1);
    const std::vector<Token> ctx{5, 9};
    for (auto _ : state) {
        benchmark::DoNotOptimize(model.next_token_log_probs(ctx));
    }
}
BENCHMARK(bm_ngram_query);

void bm_duplex_block(benchmark::State& state) {
    SyntheticSpec spec;
    spec.n_conversations = 1;
    spec.duration_s = 60.0;
    spec.target_overlap_rate = 0.4;
    spec.seed = 4;
    const Corpus corpus = generate_corpus(spec);
    const ToyCodec codec = corpus.codec();
    const ScriptedModel model = ScriptedModel::uniform(corpus.space.total());
    EngineConfig config;
    config.n_block = 50;
    config.variant = Variant::Response;
    config.silence_k = 10;

    for (auto _ : state) {
        const EngineResult result =
            run_duplex(corpus.conversations[0].user, model, codec, corpus.space, config);
        benchmark::DoNotOptimize(result.output.length());
        state.SetItemsProcessed(state.items_processed() +
                                static_cast<std::int64_t>(result.trace.blocks.size()));
    }
}
BENCHMARK(bm_duplex_block)->Unit(benchmark::kMillisecond);

void bm_rouge_l(benchmark::State& state) {
    Rng rng(5);
    const auto sentence = [&](int n) {
        std::vector<std::string> words;
        for (int i = 0; i < n; ++i) words.push_back("w" + std::to_string(uniform_int(rng, 40)));
        return words;
    };
    const auto hyp = sentence(200);
    const auto ref = sentence(220);
    for (auto _ : state) {
        benchmark::DoNotOptimize(rouge(hyp, ref, RougeMode::RL));
    }
}
BENCHMARK(bm_rouge_l);

} // namespace

BENCHMARK_MAIN();
