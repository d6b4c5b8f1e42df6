#include "duplexsim/blocks.hpp"
#include "duplexsim/decode.hpp"
#include "duplexsim/engine.hpp"
#include "duplexsim/errors.hpp"
#include "duplexsim/eval.hpp"
#include "duplexsim/io.hpp"
#include "duplexsim/models.hpp"
#include "duplexsim/rng.hpp"
#include "duplexsim/synth.hpp"
#include "duplexsim/targets.hpp"
#include "duplexsim/timing.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

using namespace duplexsim;
using ordered_json = nlohmann::ordered_json;

namespace {

enum class LogLevel { Debug = 0, Info = 1, Warn = 2, Error = 3 };

LogLevel g_log_level = LogLevel::Info;

LogLevel parse_log_level(const std::string& name) {
    if (name == "debug") return LogLevel::Debug;
    if (name == "info") return LogLevel::Info;
    if (name == "warn") return LogLevel::Warn;
    if (name == "error") return LogLevel::Error;
    throw CLI::ValidationError("log", "unknown log level '" + name + "'");
}

void logf(LogLevel level, const std::string& message) {
    if (level < g_log_level) return;
    static const char* names[] = {"debug", "info", "warn", "error"};
    std::fprintf(stderr, "[duplexsim:%s] %s\n", names[static_cast<int>(level)], message.c_str());
}

// options shared by every subcommand
struct CommonOpts {
    std::uint64_t seed = 0;
    std::string log = "";
    bool json = false;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--seed", opts.seed, "Root seed; all randomness derives from it");
    cmd->add_option("--log", opts.log, "Log level: debug|info|warn|error");
    cmd->add_flag("--json", opts.json, "Print a machine-readable summary to stdout");
}

void apply_common(const CommonOpts& opts) {
    if (!opts.log.empty()) {
        g_log_level = parse_log_level(opts.log);
    } else if (const char* env = std::getenv("DUPLEXSIM_LOG")) {
        g_log_level = parse_log_level(env);
    }
}

Corpus load_corpus_opt(const std::string& path, const std::string& meta) {
    return meta.empty() ? load_corpus(path) : load_corpus(path, meta);
}

double measured_overlap_rate(const Corpus& corpus, int n_block) {
    long long overlapping = 0, total = 0;
    for (const Conversation& conv : corpus.conversations) {
        const BlockPlan plan = partition_blocks(conv.length(), n_block);
        for (int b = 0; b < plan.block_count(); ++b) {
            overlapping += block_has_overlap(conv, plan.span(b));
        }
        total += plan.block_count();
    }
    return total > 0 ? static_cast<double>(overlapping) / static_cast<double>(total) : 0.0;
}

// ---------------------------------------------------------------- gen

struct GenOpts {
    CommonOpts common;
    std::string out;
    SyntheticSpec spec;
};

int cmd_gen(const GenOpts& opts) {
    SyntheticSpec spec = opts.spec;
    spec.seed = opts.common.seed;
    const Corpus corpus = generate_corpus(spec);
    save_corpus(opts.out, corpus);

    const int cal = std::max(1, static_cast<int>(std::lround(spec.calibration_block_s * spec.fps)));
    const double rate = measured_overlap_rate(corpus, cal);
    logf(LogLevel::Info, "wrote " + std::to_string(corpus.conversations.size()) +
                             " conversations to " + opts.out +
                             " (block overlap rate " + std::to_string(rate) + ")");
    if (opts.common.json) {
        ordered_json j;
        j["conversations"] = corpus.conversations.size();
        j["overlap_rate"] = rate;
        j["out"] = opts.out;
        std::cout << j.dump() << "\n";
    }
    return 0;
}

// -------------------------------------------------------------- align

struct AlignOpts {
    CommonOpts common;
    std::string emissions;
    std::string target;
    std::string out;
    bool oracle = false;
};

int cmd_align(const AlignOpts& opts) {
    const EmissionMatrix em = load_emissions(opts.emissions);
    std::vector<Token> target;
    std::stringstream ss(opts.target);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) target.push_back(std::stoi(item));
    }

    const Alignment alignment = opts.oracle ? brute_force_align(em, target)
                                            : forced_align(em, target);
    const std::string text = alignment_to_json(alignment);
    if (!opts.out.empty()) write_file(opts.out, text);
    if (opts.common.json || opts.out.empty()) std::cout << text;
    logf(LogLevel::Info, "alignment score " + std::to_string(alignment.score));
    return 0;
}

// ------------------------------------------------------------ targets

struct TargetsOpts {
    CommonOpts common;
    std::string corpus;
    std::string meta;
    std::string out;
    std::string mode = "block";
    std::string variant = "full";
    double block_s = 2.0;
    double window_s = 60.0;
    int max_turns = 4;
    double max_s = 120.0;
    int delta = 10;
};

int cmd_targets(const TargetsOpts& opts) {
    const Corpus corpus = load_corpus_opt(opts.corpus, opts.meta);
    const Variant variant = parse_variant(opts.variant);

    std::vector<CotInstance> instances;
    for (const Conversation& conv : corpus.conversations) {
        const int n_block = std::max(1, static_cast<int>(std::lround(opts.block_s * conv.fps())));
        std::vector<CotInstance> built;
        if (opts.mode == "block") {
            built = build_block_instances(conv, corpus.space, variant, n_block, opts.window_s);
        } else if (opts.mode == "turn") {
            built = build_turn_instances(conv, corpus.space, opts.max_turns, opts.max_s, opts.delta);
        } else {
            throw ValidationError("targets: mode must be block or turn");
        }
        instances.insert(instances.end(), built.begin(), built.end());
    }
    save_instances(opts.out, instances);
    logf(LogLevel::Info, "wrote " + std::to_string(instances.size()) + " instances to " + opts.out);
    if (opts.common.json) {
        ordered_json j;
        j["instances"] = instances.size();
        j["out"] = opts.out;
        std::cout << j.dump() << "\n";
    }
    return 0;
}

// -------------------------------------------------------------- train

struct TrainOpts {
    CommonOpts common;
    std::string corpus;
    std::string meta;
    std::string out;
    std::string variant = "full";
    double block_s = 2.0;
    double window_s = 60.0;
    int order = 3;
    double alpha = 0.1;
};

int cmd_train(const TrainOpts& opts) {
    const Corpus corpus = load_corpus_opt(opts.corpus, opts.meta);
    const Variant variant = parse_variant(opts.variant);

    std::vector<std::vector<Token>> streams;
    for (const Conversation& conv : corpus.conversations) {
        const int n_block = std::max(1, static_cast<int>(std::lround(opts.block_s * conv.fps())));
        for (auto& s : window_streams(conv, corpus.space, variant, n_block, opts.window_s)) {
            streams.push_back(std::move(s));
        }
    }
    const NgramModel model = ngram_train(streams, corpus.space.total(), opts.order, opts.alpha);
    save_model(opts.out, model, corpus.space, corpus.frames_per_word);

    std::size_t tokens = 0;
    for (const auto& s : streams) tokens += s.size();
    logf(LogLevel::Info, "trained order-" + std::to_string(opts.order) + " model on " +
                             std::to_string(tokens) + " tokens -> " + opts.out);
    if (opts.common.json) {
        ordered_json j;
        j["streams"] = streams.size();
        j["tokens"] = tokens;
        j["out"] = opts.out;
        std::cout << j.dump() << "\n";
    }
    return 0;
}

// ---------------------------------------------------------------- run

struct RunOpts {
    CommonOpts common;
    std::string corpus;
    std::string meta;
    std::string model;
    std::string baseline;
    std::string out;
    std::string engine = "duplex";
    std::string variant = "full";
    std::string clock = "simulated";
    bool teacher_forced = false;
    double block_s = 2.0;
    double window_s = 60.0;
    int delta = 10;
    int max_words = 25;
    int silence_k = 10;
    int res_k = 30;
    double res_temp = 0.8;
    int spe_k = 30;
    double spe_temp = 0.8;
    int n_candidates = 10;
    double per_token_latency = 0.0;
    int jobs = 1;
};

std::unique_ptr<SequenceModel> make_baseline(const std::string& name, const TokenSpace& space) {
    if (name == "silence") {
        return std::make_unique<ScriptedModel>(ScriptedModel::constant(space.total(), space.eob()));
    }
    if (name == "random") {
        return std::make_unique<ScriptedModel>(ScriptedModel::uniform(space.total()));
    }
    throw ValidationError("run: baseline must be silence or random");
}

EngineConfig build_engine_config(const RunOpts& opts, double fps) {
    EngineConfig config;
    config.n_block = std::max(1, static_cast<int>(std::lround(opts.block_s * fps)));
    config.variant = parse_variant(opts.variant);
    config.max_words = opts.max_words;
    config.silence_k = opts.silence_k;
    config.res_params.k = opts.res_k;
    config.res_params.temperature = opts.res_temp;
    config.spe_params.k = opts.spe_k;
    config.spe_params.temperature = opts.spe_temp;
    config.spe_params.n_candidates = opts.n_candidates;
    config.per_token_latency_s = opts.per_token_latency;
    config.fps = fps;
    if (opts.clock == "wall") {
        config.clock = EngineConfig::Clock::Wall;
    } else if (opts.clock != "simulated") {
        throw ValidationError("run: clock must be simulated or wall");
    }
    return config;
}

int cmd_run(const RunOpts& opts) {
    const Corpus corpus = load_corpus_opt(opts.corpus, opts.meta);

    std::unique_ptr<SequenceModel> owned;
    const SequenceModel* model = nullptr;
    TokenSpace space = corpus.space;
    int frames_per_word = corpus.frames_per_word;
    if (!opts.model.empty()) {
        LoadedModel loaded = load_model(opts.model);
        space = loaded.space;
        frames_per_word = loaded.frames_per_word;
        owned = std::move(loaded.model);
        model = owned.get();
    } else if (!opts.baseline.empty()) {
        owned = make_baseline(opts.baseline, space);
        model = owned.get();
    } else {
        throw ValidationError("run: need --model or --baseline");
    }
    // a uniform model under top-k would collapse onto the k lowest token ids;
    // the random baseline means k = V
    const bool widen_k = opts.baseline == "random";
    const ToyCodec codec(space.speech_vocab(), space.word_count(), frames_per_word);

    if (opts.engine == "turn" && opts.teacher_forced) {
        throw ValidationError("run: --teacher-forced applies to the duplex engine only");
    }

    std::vector<TracedRun> runs(corpus.conversations.size());
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::string error_message;
    std::mutex error_mutex;

    const auto worker = [&] {
        while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= corpus.conversations.size() || failed.load()) break;
            const Conversation& conv = corpus.conversations[i];
            try {
                EngineConfig config = build_engine_config(opts, conv.fps());
                if (widen_k) {
                    config.res_params.k = space.total();
                    config.spe_params.k = space.total();
                }
                config.seed = derive_seed(opts.common.seed, i);
                EngineResult result;
                if (opts.engine == "turn") {
                    result = run_turn_based(conv.user, *model, codec, space, config, opts.delta,
                                            conv.speaker_prompt);
                } else if (opts.engine == "duplex") {
                    result = opts.teacher_forced
                                 ? run_duplex_teacher(conv, *model, codec, space, config,
                                                      opts.window_s)
                                 : run_duplex(conv.user, *model, codec, space, config,
                                              conv.speaker_prompt);
                } else {
                    throw ValidationError("run: engine must be duplex or turn");
                }
                runs[i] = {conv.id, std::move(result.trace)};
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!failed.exchange(true)) {
                    try {
                        throw;
                    } catch (const std::exception& e) {
                        error_message = e.what();
                    }
                }
                break;
            }
        }
    };

    // non-reentrant models get one session at a time
    const int jobs = model->reentrant() ? std::max(1, opts.jobs) : 1;
    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    if (failed.load()) throw ValidationError("run: " + error_message);

    save_traces(opts.out, runs, &space);

    std::size_t blocks = 0;
    for (const TracedRun& run : runs) blocks += run.trace.blocks.size();
    logf(LogLevel::Info, "ran " + std::to_string(runs.size()) + " conversations, " +
                             std::to_string(blocks) + " blocks -> " + opts.out);
    if (opts.common.json) {
        ordered_json j;
        j["conversations"] = runs.size();
        j["blocks"] = blocks;
        j["out"] = opts.out;
        std::cout << j.dump() << "\n";
    }
    return 0;
}

// --------------------------------------------------------------- eval

struct EvalOpts {
    CommonOpts common;
    std::string corpus;
    std::string meta;
    std::vector<std::string> traces;
    std::string model;
    std::string out;
    std::string csv;
    double block_s = 2.0;
    int delta = 10;
};

// bag-of-words embedding over the word vocabulary, the pluggable stand-in
// for a real style-embedding provider
std::vector<double> bow_embedding(const std::vector<std::string>& words, const TokenSpace& space) {
    std::vector<double> v(static_cast<std::size_t>(space.word_count()), 0.0);
    for (const std::string& w : words) {
        if (const auto id = space.find_word(w)) v[static_cast<std::size_t>(*id)] += 1.0;
    }
    return v;
}

int cmd_eval(const EvalOpts& opts) {
    const Corpus corpus = load_corpus_opt(opts.corpus, opts.meta);

    std::unique_ptr<SequenceModel> ppl_model;
    TokenSpace space = corpus.space;
    int frames_per_word = corpus.frames_per_word;
    if (!opts.model.empty()) {
        LoadedModel loaded = load_model(opts.model);
        space = loaded.space;
        frames_per_word = loaded.frames_per_word;
        ppl_model = std::move(loaded.model);
    }
    const ToyCodec codec(space.speech_vocab(), space.word_count(), frames_per_word);

    std::map<std::string, const Conversation*> by_id;
    for (const Conversation& conv : corpus.conversations) by_id[conv.id] = &conv;

    struct SystemEval {
        std::string name;
        MetricsReport report;
        std::vector<std::vector<double>> embeddings; // per turn
    };
    std::vector<SystemEval> systems;
    std::vector<std::vector<double>> reference_embeddings;

    for (const std::string& trace_path : opts.traces) {
        const std::vector<TracedRun> traced = load_traces(trace_path);
        std::vector<Conversation> convs;
        std::vector<EngineResult> results;
        SystemEval sys;
        sys.name = trace_path;
        bool fill_reference = reference_embeddings.empty();
        for (const TracedRun& run : traced) {
            const auto it = by_id.find(run.conv_id);
            if (it == by_id.end()) {
                throw ValidationError("eval: trace references unknown conversation " + run.conv_id);
            }
            const Conversation& conv = *it->second;
            EngineResult result;
            result.trace = run.trace;
            result.output = output_from_trace(run.trace, conv.length());
            for (const TurnPair& pair : turn_pairs(conv, result.output, codec, space, opts.delta)) {
                if (pair.ref.empty()) continue;
                sys.embeddings.push_back(bow_embedding(pair.hyp, space));
                if (fill_reference) reference_embeddings.push_back(bow_embedding(pair.ref, space));
            }
            convs.push_back(conv);
            results.push_back(std::move(result));
        }
        const int n_block = std::max(1, static_cast<int>(std::lround(
                                             opts.block_s * (convs.empty() ? 25.0 : convs[0].fps()))));
        sys.report = evaluate_run(convs, results, ppl_model.get(), codec, space, n_block, opts.delta);

        // style similarity against the reference bag of words
        if (!sys.embeddings.empty() && sys.embeddings.size() == reference_embeddings.size()) {
            double total = 0.0;
            for (std::size_t i = 0; i < sys.embeddings.size(); ++i) {
                total += cosine_similarity(sys.embeddings[i], reference_embeddings[i]);
            }
            sys.report.style_similarity = total / static_cast<double>(sys.embeddings.size());
        }
        systems.push_back(std::move(sys));
    }
    if (systems.empty()) throw ValidationError("eval: need at least one --trace");

    std::vector<double> ranks;
    if (systems.size() >= 2) {
        std::vector<std::vector<std::vector<double>>> embeddings;
        bool rankable = true;
        for (const SystemEval& sys : systems) {
            rankable &= sys.embeddings.size() == reference_embeddings.size();
            embeddings.push_back(sys.embeddings);
        }
        if (rankable && !reference_embeddings.empty()) {
            ranks = style_rank(embeddings, reference_embeddings);
        }
    }

    ordered_json summary = ordered_json::array();
    for (std::size_t s = 0; s < systems.size(); ++s) {
        const MetricsReport& r = systems[s].report;
        ordered_json j;
        j["trace"] = systems[s].name;
        j["report"] = ordered_json::parse(metrics_to_json(r));
        if (!ranks.empty()) j["style_rank"] = ranks[s];
        summary.push_back(std::move(j));
        logf(LogLevel::Info, systems[s].name + ": rouge-L F1 " + std::to_string(r.rougeL.f1) +
                                 ", overlap " + std::to_string(r.overlap_pct) + ", rtf " +
                                 std::to_string(r.rtf_mean));
    }

    if (!opts.out.empty()) {
        if (systems.size() == 1) {
            save_metrics(opts.out, systems[0].report);
        } else {
            write_file(opts.out, summary.dump(2) + "\n");
        }
    }
    if (!opts.csv.empty()) {
        std::ostringstream csv;
        csv << "trace,rouge1_f1,rouge2_f1,rougeL_f1,perplexity,overlap_pct,overlap_precision,"
               "overlap_recall,rtf_mean,first_token_wait_mean,style_rank\n";
        for (std::size_t s = 0; s < systems.size(); ++s) {
            const MetricsReport& r = systems[s].report;
            csv << systems[s].name << "," << r.rouge1.f1 << "," << r.rouge2.f1 << ","
                << r.rougeL.f1 << "," << r.perplexity << "," << r.overlap_pct << ",";
            if (r.overlap_precision) csv << *r.overlap_precision;
            csv << ",";
            if (r.overlap_recall) csv << *r.overlap_recall;
            csv << "," << r.rtf_mean << "," << r.first_token_wait_mean << ",";
            if (!ranks.empty()) csv << ranks[s];
            csv << "\n";
        }
        write_file(opts.csv, csv.str());
    }
    if (opts.common.json) std::cout << summary.dump() << "\n";
    return 0;
}

// ------------------------------------------------------------- ablate

struct AblateOpts {
    CommonOpts common;
    std::string corpus;
    std::string meta;
    std::string model;
    std::string sizes = "1,2";
    std::string out;
    std::string variant = "full";
    int delta = 10;
    bool free_running = false;
};

int cmd_ablate(const AblateOpts& opts) {
    const Corpus corpus = load_corpus_opt(opts.corpus, opts.meta);
    LoadedModel loaded = load_model(opts.model);
    const ToyCodec codec(loaded.space.speech_vocab(), loaded.space.word_count(),
                         loaded.frames_per_word);

    std::vector<double> sizes;
    std::stringstream ss(opts.sizes);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) sizes.push_back(std::stod(item));
    }

    EngineConfig config;
    config.variant = parse_variant(opts.variant);
    config.seed = opts.common.seed;
    config.fps = corpus.conversations.empty() ? 25.0 : corpus.conversations[0].fps();

    const AblationTable table = ablate_block_size(corpus.conversations, *loaded.model, codec,
                                                  loaded.space, config, sizes, opts.delta,
                                                  !opts.free_running);

    std::printf("%10s %12s %10s %12s\n", "block_s", "rouge_l", "rtf", "wait_s");
    for (const AblationRow& row : table.rows) {
        std::printf("%10.2f %12.4f %10.4f %12.4f\n", row.block_s, row.rouge_l, row.rtf_mean,
                    row.first_token_wait_mean);
    }
    if (!table.latency_monotone) {
        logf(LogLevel::Warn, "first-token wait is not monotone in block size on this corpus");
    }

    if (!opts.out.empty()) {
        if (opts.out.size() > 4 && opts.out.substr(opts.out.size() - 4) == ".csv") {
            write_file(opts.out, ablation_to_csv(table));
        } else {
            write_file(opts.out, ablation_to_json(table));
        }
    }
    if (opts.common.json) std::cout << ablation_to_json(table);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"blockwise full-duplex spoken-dialogue engine and simulator"};
    app.require_subcommand(1);
    // config files use one section per subcommand, e.g. [run]; command-line
    // flags override config values, unknown keys are rejected
    app.set_config("--config", "", "Read options from a config file");
    app.allow_config_extras(false);

    GenOpts gen;
    CLI::App* gen_cmd = app.add_subcommand("gen", "Generate a synthetic two-channel corpus");
    add_common(gen_cmd, gen.common);
    gen_cmd->add_option("--out", gen.out, "Corpus output path (JSONL)")->required();
    gen_cmd->add_option("--n", gen.spec.n_conversations, "Conversations to generate");
    gen_cmd->add_option("--duration", gen.spec.duration_s, "Conversation length in seconds");
    gen_cmd->add_option("--fps", gen.spec.fps, "Frames per second");
    gen_cmd->add_option("--word-vocab", gen.spec.word_vocab, "Word vocabulary size");
    gen_cmd->add_option("--speech-vocab", gen.spec.speech_vocab, "Speech token vocabulary size");
    gen_cmd->add_option("--frames-per-word", gen.spec.frames_per_word, "Codec frames per word");
    gen_cmd->add_option("--mean-turn-words", gen.spec.mean_turn_words, "Mean words per turn");
    gen_cmd->add_option("--mean-pause-frames", gen.spec.mean_pause_frames, "Mean pause length");
    gen_cmd->add_option("--overlap", gen.spec.target_overlap_rate, "Target block overlap rate");
    gen_cmd->add_option("--backchannel", gen.spec.backchannel_prob, "Backchannel probability");
    gen_cmd->add_option("--calibration-block", gen.spec.calibration_block_s,
                        "Block size (s) the overlap target is measured at");

    AlignOpts al;
    CLI::App* align_cmd = app.add_subcommand("align", "Force-align a target against emissions");
    add_common(align_cmd, al.common);
    align_cmd->add_option("--emissions", al.emissions, "Emission matrix (.json or binary)")->required();
    align_cmd->add_option("--target", al.target, "Comma-separated target token ids")->required();
    align_cmd->add_option("--out", al.out, "Alignment output path");
    align_cmd->add_flag("--oracle", al.oracle, "Use the exhaustive oracle (tiny inputs only)");

    TargetsOpts tg;
    CLI::App* targets_cmd = app.add_subcommand("targets", "Build stage-tagged training instances");
    add_common(targets_cmd, tg.common);
    targets_cmd->add_option("--corpus", tg.corpus, "Corpus JSONL")->required();
    targets_cmd->add_option("--meta", tg.meta, "Corpus meta sidecar (default <corpus>.meta.json)");
    targets_cmd->add_option("--out", tg.out, "Instance output path")->required();
    targets_cmd->add_option("--mode", tg.mode, "block or turn");
    targets_cmd->add_option("--variant", tg.variant, "none|asr|response|full");
    targets_cmd->add_option("--block-s", tg.block_s, "Block size in seconds");
    targets_cmd->add_option("--window-s", tg.window_s, "Context window in seconds");
    targets_cmd->add_option("--max-turns", tg.max_turns, "Turn-mode window size");
    targets_cmd->add_option("--max-s", tg.max_s, "Turn-mode duration cap");
    targets_cmd->add_option("--delta", tg.delta, "VAD silence run length (frames)");

    TrainOpts tr;
    CLI::App* train_cmd = app.add_subcommand("train", "Train the n-gram model on a corpus");
    add_common(train_cmd, tr.common);
    train_cmd->add_option("--corpus", tr.corpus, "Corpus JSONL")->required();
    train_cmd->add_option("--meta", tr.meta, "Corpus meta sidecar");
    train_cmd->add_option("--out", tr.out, "Model output path")->required();
    train_cmd->add_option("--variant", tr.variant, "Stream layout variant");
    train_cmd->add_option("--block-s", tr.block_s, "Block size in seconds");
    train_cmd->add_option("--window-s", tr.window_s, "Context window in seconds");
    train_cmd->add_option("--order", tr.order, "N-gram order");
    train_cmd->add_option("--alpha", tr.alpha, "Add-alpha smoothing");

    RunOpts rn;
    CLI::App* run_cmd = app.add_subcommand("run", "Run an engine over a corpus, writing traces");
    add_common(run_cmd, rn.common);
    run_cmd->add_option("--corpus", rn.corpus, "Corpus JSONL")->required();
    run_cmd->add_option("--meta", rn.meta, "Corpus meta sidecar");
    run_cmd->add_option("--out", rn.out, "Trace output path")->required();
    run_cmd->add_option("--model", rn.model, "Trained model file");
    run_cmd->add_option("--baseline", rn.baseline, "silence or random (instead of --model)");
    run_cmd->add_option("--engine", rn.engine, "duplex or turn");
    run_cmd->add_option("--variant", rn.variant, "none|asr|response|full");
    run_cmd->add_flag("--teacher-forced", rn.teacher_forced,
                      "Condition on reference history instead of own outputs");
    run_cmd->add_option("--block-s", rn.block_s, "Block size in seconds");
    run_cmd->add_option("--window-s", rn.window_s, "Teacher-forced window size");
    run_cmd->add_option("--delta", rn.delta, "VAD silence run length (turn engine)");
    run_cmd->add_option("--max-words", rn.max_words, "Per-stage word cap");
    run_cmd->add_option("--silence-k", rn.silence_k, "Silence-decision candidate count");
    run_cmd->add_option("--res-k", rn.res_k, "Response top-k");
    run_cmd->add_option("--res-temp", rn.res_temp, "Response temperature");
    run_cmd->add_option("--spe-k", rn.spe_k, "Speech top-k");
    run_cmd->add_option("--spe-temp", rn.spe_temp, "Speech temperature");
    run_cmd->add_option("--n-candidates", rn.n_candidates, "Best-of-n speech candidates");
    run_cmd->add_option("--per-token-latency", rn.per_token_latency,
                        "Simulated seconds per model call");
    run_cmd->add_option("--clock", rn.clock, "simulated or wall");
    run_cmd->add_option("--jobs", rn.jobs, "Worker threads across conversations");

    EvalOpts ev;
    CLI::App* eval_cmd = app.add_subcommand("eval", "Score traces against a corpus");
    add_common(eval_cmd, ev.common);
    eval_cmd->add_option("--corpus", ev.corpus, "Corpus JSONL")->required();
    eval_cmd->add_option("--meta", ev.meta, "Corpus meta sidecar");
    eval_cmd->add_option("--trace", ev.traces, "Trace file (repeat for system ranking)")->required();
    eval_cmd->add_option("--model", ev.model, "Model for perplexity scoring");
    eval_cmd->add_option("--out", ev.out, "Report output path");
    eval_cmd->add_option("--csv", ev.csv, "CSV export path");
    eval_cmd->add_option("--block-s", ev.block_s, "Block size for overlap metrics");
    eval_cmd->add_option("--delta", ev.delta, "VAD silence run length");

    AblateOpts ab;
    CLI::App* ablate_cmd = app.add_subcommand("ablate", "Compare block sizes on one corpus");
    add_common(ablate_cmd, ab.common);
    ablate_cmd->add_option("--corpus", ab.corpus, "Corpus JSONL")->required();
    ablate_cmd->add_option("--meta", ab.meta, "Corpus meta sidecar");
    ablate_cmd->add_option("--model", ab.model, "Trained model file")->required();
    ablate_cmd->add_option("--sizes", ab.sizes, "Comma-separated block sizes in seconds");
    ablate_cmd->add_option("--out", ab.out, "Table output (.csv or .json)");
    ablate_cmd->add_option("--variant", ab.variant, "Engine variant");
    ablate_cmd->add_option("--delta", ab.delta, "VAD silence run length");
    ablate_cmd->add_flag("--free-running", ab.free_running, "Disable teacher forcing");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (gen_cmd->parsed()) {
            apply_common(gen.common);
            return cmd_gen(gen);
        }
        if (align_cmd->parsed()) {
            apply_common(al.common);
            return cmd_align(al);
        }
        if (targets_cmd->parsed()) {
            apply_common(tg.common);
            return cmd_targets(tg);
        }
        if (train_cmd->parsed()) {
            apply_common(tr.common);
            return cmd_train(tr);
        }
        if (run_cmd->parsed()) {
            apply_common(rn.common);
            return cmd_run(rn);
        }
        if (eval_cmd->parsed()) {
            apply_common(ev.common);
            return cmd_eval(ev);
        }
        if (ablate_cmd->parsed()) {
            apply_common(ab.common);
            return cmd_ablate(ab);
        }
    } catch (const InfeasibleAlignmentError& e) {
        logf(LogLevel::Error, e.what());
        return 3;
    } catch (const ModelContractError& e) {
        logf(LogLevel::Error, e.what());
        return 4;
    } catch (const ValidationError& e) {
        logf(LogLevel::Error, e.what());
        return 2;
    } catch (const std::invalid_argument& e) {
        logf(LogLevel::Error, e.what());
        return 2;
    } catch (const std::out_of_range& e) {
        logf(LogLevel::Error, e.what());
        return 2;
    } catch (const std::exception& e) {
        logf(LogLevel::Error, e.what());
        return 1;
    }
    return 0;
}
