#pragma once

#include "duplexsim/align.hpp"
#include "duplexsim/engine.hpp"
#include "duplexsim/eval.hpp"
#include "duplexsim/models.hpp"
#include "duplexsim/synth.hpp"
#include "duplexsim/targets.hpp"

#include <memory>
#include <string>
#include <utility>
#include <vector>

namespace duplexsim {

// All writers emit deterministic bytes (fixed field order, "\n" endings) so
// fixed-seed pipelines are byte-identical and traces can be golden-file
// tested. Loaders throw ValidationError on schema or consistency errors.

// Conversation corpus: line-delimited JSON, one object per conversation with
// fields id, fps, channels:[{speaker, words:[{w,start,end}], frames:[ints]}],
// speaker_prompt:[ints]. channels[0] is the user, channels[1] the reference
// system. The token space travels in a sidecar meta file.
std::string corpus_meta_path(const std::string& corpus_path);
void save_corpus(const std::string& path, const Corpus& corpus);
Corpus load_corpus(const std::string& path);
Corpus load_corpus(const std::string& path, const std::string& meta_path);

// Emission matrix: .json -> {"T","V","scores":[row-major T x (V+1)]},
// anything else -> binary (magic "DSEM", version, T, V, little-endian f64).
void save_emissions(const std::string& path, const EmissionMatrix& em);
EmissionMatrix load_emissions(const std::string& path);

std::string alignment_to_json(const Alignment& alignment);

// Models carry their token space and codec word length so downstream
// commands agree on ids.
struct LoadedModel {
    std::unique_ptr<SequenceModel> model;
    TokenSpace space;
    int frames_per_word = 5;
};
void save_model(const std::string& path, const NgramModel& model, const TokenSpace& space,
                int frames_per_word);
void save_model(const std::string& path, const ScriptedModel& model, const TokenSpace& space,
                int frames_per_word);
LoadedModel load_model(const std::string& path);

// Instance files: {"variant","context","target","meta":{conv_id,window,block}}.
void save_instances(const std::string& path, const std::vector<CotInstance>& instances);
std::vector<CotInstance> load_instances(const std::string& path);

// Trace files: one JSON object per block, deterministic field order. When a
// token space is supplied, text-stage outputs also carry their decoded words.
struct TracedRun {
    std::string conv_id;
    StageTrace trace;
};
void save_traces(const std::string& path, const std::vector<TracedRun>& runs,
                 const TokenSpace* space = nullptr);
std::vector<TracedRun> load_traces(const std::string& path);

// Rebuild the emitted output stream from a trace.
FrameStream output_from_trace(const StageTrace& trace, int total_frames);

std::string metrics_to_json(const MetricsReport& report);
MetricsReport metrics_from_json(const std::string& json_text);
void save_metrics(const std::string& path, const MetricsReport& report);
MetricsReport load_metrics(const std::string& path);

std::string ablation_to_csv(const AblationTable& table);
std::string ablation_to_json(const AblationTable& table);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& contents);

} // namespace duplexsim
