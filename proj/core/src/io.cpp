#include "duplexsim/io.hpp"

#include "duplexsim/errors.hpp"

#include <json.hpp>

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace duplexsim {

using json = nlohmann::ordered_json;

namespace {

json parse(const std::string& text, const std::string& what) {
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded()) throw ValidationError(what + ": invalid JSON");
    return j;
}

void require(bool ok, const std::string& message) {
    if (!ok) throw ValidationError(message);
}

template <typename T>
std::vector<T> int_array(const json& j, const std::string& what) {
    require(j.is_array(), what + ": expected an array");
    std::vector<T> out;
    out.reserve(j.size());
    for (const auto& v : j) {
        require(v.is_number_integer(), what + ": expected integers");
        out.push_back(v.get<T>());
    }
    return out;
}

} // namespace

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& contents) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot write " + path);
    out << contents;
}

// --- corpus -----------------------------------------------------------

std::string corpus_meta_path(const std::string& corpus_path) {
    return corpus_path + ".meta.json";
}

namespace {

json words_to_json(const std::vector<WordSpan>& words) {
    json arr = json::array();
    for (const WordSpan& w : words) {
        arr.push_back(json{{"w", w.word}, {"start", w.start_frame}, {"end", w.end_frame}});
    }
    return arr;
}

std::vector<WordSpan> words_from_json(const json& arr, const std::string& what) {
    require(arr.is_array(), what + ": words must be an array");
    std::vector<WordSpan> out;
    for (const auto& w : arr) {
        require(w.contains("w") && w.contains("start") && w.contains("end"),
                what + ": word needs w/start/end");
        out.push_back({w["w"].get<std::string>(), w["start"].get<int>(), w["end"].get<int>()});
    }
    return out;
}

} // namespace

void save_corpus(const std::string& path, const Corpus& corpus) {
    std::ostringstream out;
    for (const Conversation& conv : corpus.conversations) {
        json j;
        j["id"] = conv.id;
        j["fps"] = conv.fps();
        j["channels"] = json::array();
        j["channels"].push_back(json{{"speaker", conv.user_speaker},
                                     {"words", words_to_json(conv.user_words)},
                                     {"frames", conv.user.labels}});
        j["channels"].push_back(json{{"speaker", conv.system_speaker},
                                     {"words", words_to_json(conv.system_words)},
                                     {"frames", conv.system_reference.labels}});
        j["speaker_prompt"] = conv.speaker_prompt.tokens;
        out << j.dump() << "\n";
    }
    write_file(path, out.str());

    json meta;
    meta["format"] = "duplexsim-corpus-meta-v1";
    meta["speech_vocab"] = corpus.space.speech_vocab();
    meta["frames_per_word"] = corpus.frames_per_word;
    meta["words"] = corpus.space.words();
    write_file(corpus_meta_path(path), meta.dump(2) + "\n");
}

Corpus load_corpus(const std::string& path) {
    return load_corpus(path, corpus_meta_path(path));
}

Corpus load_corpus(const std::string& path, const std::string& meta_path) {
    Corpus corpus;

    const json meta = parse(read_file(meta_path), "corpus meta");
    require(meta.value("format", "") == "duplexsim-corpus-meta-v1", "corpus meta: unknown format");
    std::vector<std::string> words;
    for (const auto& w : meta.at("words")) words.push_back(w.get<std::string>());
    corpus.space = TokenSpace(meta.at("speech_vocab").get<int>(), std::move(words));
    corpus.frames_per_word = meta.at("frames_per_word").get<int>();

    std::istringstream in(read_file(path));
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const json j = parse(line, "corpus line " + std::to_string(line_no));
        require(j.contains("fps") && j.contains("channels") && j.contains("speaker_prompt"),
                "corpus line " + std::to_string(line_no) + ": missing fields");
        require(j["channels"].is_array() && j["channels"].size() == 2,
                "corpus line " + std::to_string(line_no) + ": need exactly 2 channels");

        Conversation conv;
        conv.id = j.value("id", "conv-" + std::to_string(line_no - 1));
        const double fps = j["fps"].get<double>();
        const json& user = j["channels"][0];
        const json& sys = j["channels"][1];
        conv.user_speaker = user.value("speaker", "A");
        conv.system_speaker = sys.value("speaker", "B");
        conv.user.fps = conv.system_reference.fps = fps;
        conv.user.labels = int_array<FrameLabel>(user.at("frames"), conv.id + " user frames");
        conv.system_reference.labels = int_array<FrameLabel>(sys.at("frames"), conv.id + " system frames");
        conv.user_words = words_from_json(user.at("words"), conv.id);
        conv.system_words = words_from_json(sys.at("words"), conv.id);
        conv.speaker_prompt.tokens = int_array<Token>(j.at("speaker_prompt"), conv.id + " prompt");

        validate(conv);
        for (const FrameLabel f : conv.user.labels) {
            require(f < corpus.space.speech_vocab(), conv.id + ": frame label outside speech vocab");
        }
        for (const FrameLabel f : conv.system_reference.labels) {
            require(f < corpus.space.speech_vocab(), conv.id + ": frame label outside speech vocab");
        }
        corpus.conversations.push_back(std::move(conv));
    }
    return corpus;
}

// --- emissions --------------------------------------------------------

namespace {

constexpr char kEmissionMagic[4] = {'D', 'S', 'E', 'M'};

bool ends_with(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

} // namespace

void save_emissions(const std::string& path, const EmissionMatrix& em) {
    em.check();
    if (ends_with(path, ".json")) {
        json j;
        j["T"] = em.frames;
        j["V"] = em.vocab;
        j["scores"] = em.log_scores;
        write_file(path, j.dump() + "\n");
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot write " + path);
    out.write(kEmissionMagic, 4);
    const std::uint32_t version = 1;
    const std::uint64_t t = static_cast<std::uint64_t>(em.frames);
    const std::uint64_t v = static_cast<std::uint64_t>(em.vocab);
    out.write(reinterpret_cast<const char*>(&version), sizeof version);
    out.write(reinterpret_cast<const char*>(&t), sizeof t);
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
    out.write(reinterpret_cast<const char*>(em.log_scores.data()),
              static_cast<std::streamsize>(em.log_scores.size() * sizeof(double)));
}

EmissionMatrix load_emissions(const std::string& path) {
    EmissionMatrix em;
    if (ends_with(path, ".json")) {
        const json j = parse(read_file(path), "emissions");
        require(j.contains("T") && j.contains("V") && j.contains("scores"),
                "emissions: need T, V, scores");
        em.frames = j["T"].get<int>();
        em.vocab = j["V"].get<int>();
        for (const auto& v : j["scores"]) em.log_scores.push_back(v.get<double>());
    } else {
        const std::string raw = read_file(path);
        require(raw.size() >= 24 && std::memcmp(raw.data(), kEmissionMagic, 4) == 0,
                "emissions: bad binary header");
        std::uint32_t version = 0;
        std::uint64_t t = 0, v = 0;
        std::memcpy(&version, raw.data() + 4, sizeof version);
        std::memcpy(&t, raw.data() + 8, sizeof t);
        std::memcpy(&v, raw.data() + 16, sizeof v);
        require(version == 1, "emissions: unsupported version");
        em.frames = static_cast<int>(t);
        em.vocab = static_cast<int>(v);
        const std::size_t need = static_cast<std::size_t>(t) * (v + 1) * sizeof(double);
        require(raw.size() == 24 + need, "emissions: truncated binary payload");
        em.log_scores.resize(static_cast<std::size_t>(t) * (v + 1));
        std::memcpy(em.log_scores.data(), raw.data() + 24, need);
    }
    try {
        em.check();
    } catch (const std::invalid_argument& e) {
        throw ValidationError(std::string("emissions: ") + e.what());
    }
    return em;
}

std::string alignment_to_json(const Alignment& alignment) {
    json j;
    j["labels"] = alignment.labels;
    j["score"] = alignment.score;
    j["blank"] = alignment.blank;
    return j.dump() + "\n";
}

// --- models -----------------------------------------------------------

namespace {

json space_to_json(const TokenSpace& space) {
    return json{{"speech_vocab", space.speech_vocab()}, {"words", space.words()}};
}

TokenSpace space_from_json(const json& j) {
    std::vector<std::string> words;
    for (const auto& w : j.at("words")) words.push_back(w.get<std::string>());
    return {j.at("speech_vocab").get<int>(), std::move(words)};
}

std::vector<double> probs_from_log(const std::vector<double>& lp) {
    std::vector<double> out;
    out.reserve(lp.size());
    for (const double v : lp) out.push_back(std::exp(v));
    return out;
}

} // namespace

void save_model(const std::string& path, const NgramModel& model, const TokenSpace& space,
                int frames_per_word) {
    json j;
    j["format"] = "duplexsim-ngram-v1";
    j["order"] = model.order();
    j["alpha"] = model.alpha();
    j["vocab"] = model.vocab_size();
    j["space"] = space_to_json(space);
    j["frames_per_word"] = frames_per_word;
    json contexts = json::array();
    for (const auto& [ctx, cc] : model.counts()) {
        json next = json::array();
        for (const auto& [tok, count] : cc.next) next.push_back(json::array({tok, count}));
        contexts.push_back(json{{"ctx", ctx}, {"next", std::move(next)}});
    }
    j["contexts"] = std::move(contexts);
    write_file(path, j.dump() + "\n");
}

void save_model(const std::string& path, const ScriptedModel& model, const TokenSpace& space,
                int frames_per_word) {
    json j;
    j["format"] = "duplexsim-scripted-v1";
    j["vocab"] = model.vocab_size();
    j["space"] = space_to_json(space);
    j["frames_per_word"] = frames_per_word;
    j["default"] = probs_from_log(model.default_log_probs());
    json rules = json::array();
    for (const auto& [last, lp] : model.rules()) {
        rules.push_back(json{{"last", last}, {"probs", probs_from_log(lp)}});
    }
    j["rules"] = std::move(rules);
    write_file(path, j.dump() + "\n");
}

LoadedModel load_model(const std::string& path) {
    const json j = parse(read_file(path), "model");
    const std::string format = j.value("format", "");
    LoadedModel out;
    out.space = space_from_json(j.at("space"));
    out.frames_per_word = j.value("frames_per_word", 5);

    if (format == "duplexsim-ngram-v1") {
        auto model = std::make_unique<NgramModel>(j.at("vocab").get<int>(), j.at("order").get<int>(),
                                                  j.at("alpha").get<double>());
        for (const auto& entry : j.at("contexts")) {
            std::vector<Token> ctx = int_array<Token>(entry.at("ctx"), "model context");
            for (const auto& pair : entry.at("next")) {
                require(pair.is_array() && pair.size() == 2, "model: bad count pair");
                model->set_count(ctx, pair[0].get<Token>(), pair[1].get<long long>());
            }
        }
        out.model = std::move(model);
    } else if (format == "duplexsim-scripted-v1") {
        std::vector<double> def;
        for (const auto& p : j.at("default")) def.push_back(p.get<double>());
        auto model = std::make_unique<ScriptedModel>(j.at("vocab").get<int>(), std::move(def));
        for (const auto& rule : j.at("rules")) {
            std::vector<double> probs;
            for (const auto& p : rule.at("probs")) probs.push_back(p.get<double>());
            model->set_rule(rule.at("last").get<Token>(), std::move(probs));
        }
        out.model = std::move(model);
    } else {
        throw ValidationError("model: unknown format '" + format + "'");
    }

    if (out.model->vocab_size() != out.space.total()) {
        throw ValidationError("model: vocab does not match its token space");
    }
    return out;
}

// --- instances --------------------------------------------------------

void save_instances(const std::string& path, const std::vector<CotInstance>& instances) {
    std::ostringstream out;
    for (const CotInstance& inst : instances) {
        json j;
        j["variant"] = to_string(inst.variant);
        j["context"] = inst.context;
        j["target"] = inst.target;
        j["meta"] = json{{"conv_id", inst.conv_id}, {"window", inst.window}, {"block", inst.block}};
        out << j.dump() << "\n";
    }
    write_file(path, out.str());
}

std::vector<CotInstance> load_instances(const std::string& path) {
    std::vector<CotInstance> out;
    std::istringstream in(read_file(path));
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const json j = parse(line, "instance line " + std::to_string(line_no));
        CotInstance inst;
        inst.variant = parse_variant(j.at("variant").get<std::string>());
        inst.context = int_array<Token>(j.at("context"), "instance context");
        inst.target = int_array<Token>(j.at("target"), "instance target");
        const json& meta = j.at("meta");
        inst.conv_id = meta.at("conv_id").get<std::string>();
        inst.window = meta.at("window").get<int>();
        inst.block = meta.at("block").get<int>();
        out.push_back(std::move(inst));
    }
    return out;
}

// --- traces -----------------------------------------------------------

namespace {

const char* trace_mode(const StageTrace& trace) {
    if (trace.turn_based) return "turn";
    return trace.teacher_forced ? "duplex-teacher" : "duplex-free";
}

} // namespace

void save_traces(const std::string& path, const std::vector<TracedRun>& runs,
                 const TokenSpace* space) {
    std::ostringstream out;
    for (const TracedRun& run : runs) {
        for (const BlockTrace& bt : run.trace.blocks) {
            json j;
            j["conv"] = run.conv_id;
            j["mode"] = trace_mode(run.trace);
            j["variant"] = to_string(run.trace.variant);
            j["n_block"] = run.trace.n_block;
            j["fps"] = run.trace.fps;
            j["block"] = bt.block;
            j["emit_start"] = bt.emit_start;
            j["input_end"] = bt.input_end_time;
            j["t_start"] = bt.t_start;
            j["t_end"] = bt.t_end;
            j["silent"] = bt.silent;
            j["first_speech"] = bt.first_speech_time;
            json stages = json::array();
            for (const StageRecord& rec : bt.stages) {
                json s;
                s["stage"] = to_string(rec.stage);
                s["context_len"] = rec.context_len;
                s["calls"] = rec.calls;
                s["t_start"] = rec.t_start;
                s["t_end"] = rec.t_end;
                s["raw"] = rec.raw;
                s["out"] = rec.output;
                if (space && rec.stage != Stage::Spe) {
                    json words = json::array();
                    for (const Token t : rec.output) {
                        if (space->is_word(t)) words.push_back(space->word_text(t));
                    }
                    s["words"] = std::move(words);
                }
                stages.push_back(std::move(s));
            }
            j["stages"] = std::move(stages);
            j["emitted"] = bt.emitted;
            out << j.dump() << "\n";
        }
    }
    write_file(path, out.str());
}

std::vector<TracedRun> load_traces(const std::string& path) {
    std::vector<TracedRun> runs;
    std::istringstream in(read_file(path));
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const json j = parse(line, "trace line " + std::to_string(line_no));
        const std::string conv = j.at("conv").get<std::string>();
        if (runs.empty() || runs.back().conv_id != conv) {
            TracedRun run;
            run.conv_id = conv;
            const std::string mode = j.at("mode").get<std::string>();
            run.trace.turn_based = mode == "turn";
            run.trace.teacher_forced = mode == "duplex-teacher";
            run.trace.variant = parse_variant(j.at("variant").get<std::string>());
            run.trace.n_block = j.at("n_block").get<int>();
            run.trace.fps = j.at("fps").get<double>();
            runs.push_back(std::move(run));
        }
        BlockTrace bt;
        bt.block = j.at("block").get<int>();
        bt.emit_start = j.at("emit_start").get<int>();
        bt.input_end_time = j.at("input_end").get<double>();
        bt.t_start = j.at("t_start").get<double>();
        bt.t_end = j.at("t_end").get<double>();
        bt.silent = j.at("silent").get<bool>();
        bt.first_speech_time = j.at("first_speech").get<double>();
        for (const auto& s : j.at("stages")) {
            StageRecord rec;
            rec.stage = parse_stage(s.at("stage").get<std::string>());
            rec.context_len = s.at("context_len").get<int>();
            rec.calls = s.at("calls").get<int>();
            rec.t_start = s.at("t_start").get<double>();
            rec.t_end = s.at("t_end").get<double>();
            rec.raw = int_array<Token>(s.at("raw"), "trace raw");
            rec.output = int_array<Token>(s.at("out"), "trace out");
            bt.stages.push_back(std::move(rec));
        }
        bt.emitted = int_array<FrameLabel>(j.at("emitted"), "trace emitted");
        runs.back().trace.blocks.push_back(std::move(bt));
    }
    return runs;
}

FrameStream output_from_trace(const StageTrace& trace, int total_frames) {
    FrameStream out;
    out.fps = trace.fps;
    out.labels.assign(static_cast<std::size_t>(total_frames), kSilence);
    for (const BlockTrace& bt : trace.blocks) {
        for (std::size_t i = 0; i < bt.emitted.size(); ++i) {
            const int frame = bt.emit_start + static_cast<int>(i);
            if (frame >= 1 && frame <= total_frames) {
                out.labels[static_cast<std::size_t>(frame - 1)] = bt.emitted[i];
            }
        }
    }
    return out;
}

// --- metrics ----------------------------------------------------------

namespace {

json rouge_to_json(const RougeScore& s) {
    return json{{"p", s.precision}, {"r", s.recall}, {"f1", s.f1}};
}

RougeScore rouge_from_json(const json& j) {
    return {j.at("p").get<double>(), j.at("r").get<double>(), j.at("f1").get<double>()};
}

json optional_to_json(const std::optional<double>& v) {
    if (v) return *v;
    return nullptr;
}

std::optional<double> optional_from_json(const json& j) {
    if (j.is_null()) return std::nullopt;
    return j.get<double>();
}

} // namespace

std::string metrics_to_json(const MetricsReport& report) {
    json j;
    j["rouge1"] = rouge_to_json(report.rouge1);
    j["rouge2"] = rouge_to_json(report.rouge2);
    j["rougeL"] = rouge_to_json(report.rougeL);
    j["perplexity"] = report.perplexity;
    j["overlap_pct"] = report.overlap_pct;
    j["overlap_precision"] = optional_to_json(report.overlap_precision);
    j["overlap_recall"] = optional_to_json(report.overlap_recall);
    j["rtf_mean"] = report.rtf_mean;
    j["first_token_wait_mean"] = report.first_token_wait_mean;
    j["style_similarity"] = optional_to_json(report.style_similarity);
    j["conversations"] = report.conversations;
    j["turns_scored"] = report.turns_scored;
    return j.dump(2) + "\n";
}

MetricsReport metrics_from_json(const std::string& json_text) {
    const json j = parse(json_text, "metrics");
    MetricsReport r;
    r.rouge1 = rouge_from_json(j.at("rouge1"));
    r.rouge2 = rouge_from_json(j.at("rouge2"));
    r.rougeL = rouge_from_json(j.at("rougeL"));
    r.perplexity = j.at("perplexity").get<double>();
    r.overlap_pct = j.at("overlap_pct").get<double>();
    r.overlap_precision = optional_from_json(j.at("overlap_precision"));
    r.overlap_recall = optional_from_json(j.at("overlap_recall"));
    r.rtf_mean = j.at("rtf_mean").get<double>();
    r.first_token_wait_mean = j.at("first_token_wait_mean").get<double>();
    r.style_similarity = optional_from_json(j.at("style_similarity"));
    r.conversations = j.at("conversations").get<int>();
    r.turns_scored = j.at("turns_scored").get<int>();
    return r;
}

void save_metrics(const std::string& path, const MetricsReport& report) {
    write_file(path, metrics_to_json(report));
}

MetricsReport load_metrics(const std::string& path) {
    return metrics_from_json(read_file(path));
}

std::string ablation_to_csv(const AblationTable& table) {
    std::ostringstream out;
    out << "block_s,rouge_l,rtf_mean,first_token_wait_mean\n";
    for (const AblationRow& row : table.rows) {
        out << row.block_s << "," << row.rouge_l << "," << row.rtf_mean << ","
            << row.first_token_wait_mean << "\n";
    }
    return out.str();
}

std::string ablation_to_json(const AblationTable& table) {
    json rows = json::array();
    for (const AblationRow& row : table.rows) {
        rows.push_back(json{{"block_s", row.block_s},
                            {"rouge_l", row.rouge_l},
                            {"rtf_mean", row.rtf_mean},
                            {"first_token_wait_mean", row.first_token_wait_mean}});
    }
    json j;
    j["rows"] = std::move(rows);
    j["latency_monotone"] = table.latency_monotone;
    return j.dump(2) + "\n";
}

} // namespace duplexsim
