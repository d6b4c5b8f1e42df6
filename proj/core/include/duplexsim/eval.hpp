#pragma once

#include "duplexsim/blocks.hpp"
#include "duplexsim/codec.hpp"
#include "duplexsim/engine.hpp"
#include "duplexsim/models.hpp"
#include "duplexsim/types.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace duplexsim {

struct RougeScore {
    double precision = 0;
    double recall = 0;
    double f1 = 0;
};

enum class RougeMode { R1, R2, RL };

// Clipped n-gram overlap for R1/R2, longest-common-subsequence for RL.
// Empty inputs score 0.
RougeScore rouge(const std::vector<std::string>& hyp, const std::vector<std::string>& ref,
                 RougeMode mode);

// Case-fold, strip punctuation, whitespace-split.
std::vector<std::string> normalize_text(const std::string& text);

// exp(-mean log P); throws std::invalid_argument on an empty sequence.
double perplexity(const SequenceModel& model, std::span<const Token> tokens);

struct OverlapStats {
    double pct = 0; // share of blocks where the system overlaps the user
    std::optional<double> precision; // empty when the system never overlaps
    std::optional<double> recall;    // empty when the reference never overlaps
};

// Block-level overlap agreement between the system output and the reference
// channel. Throws std::invalid_argument on a length mismatch.
OverlapStats overlap_stats(const FrameStream& sys, const FrameStream& ref,
                           const FrameStream& user, const BlockPlan& plan);

// Mean rank of each system by per-utterance cosine similarity to the
// reference embedding; ties share the averaged rank. Throws
// std::invalid_argument on dimension or count mismatches.
std::vector<double> style_rank(const std::vector<std::vector<std::vector<double>>>& systems,
                               const std::vector<std::vector<double>>& references);

double cosine_similarity(std::span<const double> a, std::span<const double> b);

struct MetricsReport {
    RougeScore rouge1;
    RougeScore rouge2;
    RougeScore rougeL;
    double perplexity = 0;
    double overlap_pct = 0;
    std::optional<double> overlap_precision;
    std::optional<double> overlap_recall;
    double rtf_mean = 0;
    double first_token_wait_mean = 0;
    std::optional<double> style_similarity;
    int conversations = 0;
    int turns_scored = 0;
};

struct AblationRow {
    double block_s = 0;
    double rouge_l = 0;
    double rtf_mean = 0;
    double first_token_wait_mean = 0;
};

struct AblationTable {
    std::vector<AblationRow> rows;
    bool latency_monotone = false; // wait non-decreasing in block size
};

// Runs the duplex engine per block size with identical seeds and tabulates
// quality against latency. Needs at least two sizes.
AblationTable ablate_block_size(const std::vector<Conversation>& convs, const SequenceModel& model,
                                const ToyCodec& codec, const TokenSpace& space,
                                const EngineConfig& base, std::span<const double> sizes_s,
                                int delta, bool teacher_forced = true);

// Hypothesis/reference word lists per user turn: system speech inside each
// turn's response window is codec-decoded and compared against the reference
// words there (block outputs aggregate within the turn).
struct TurnPair {
    std::vector<std::string> hyp;
    std::vector<std::string> ref;
};
std::vector<TurnPair> turn_pairs(const Conversation& conv, const FrameStream& sys_output,
                                 const ToyCodec& codec, const TokenSpace& space, int delta);

// Full per-system evaluation over a corpus of (conversation, engine result).
MetricsReport evaluate_run(const std::vector<Conversation>& convs,
                           const std::vector<EngineResult>& runs, const SequenceModel* ppl_model,
                           const ToyCodec& codec, const TokenSpace& space, int n_block, int delta);

} // namespace duplexsim
