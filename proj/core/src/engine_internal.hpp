#pragma once

#include "duplexsim/decode.hpp"
#include "duplexsim/engine.hpp"
#include "duplexsim/errors.hpp"
#include "duplexsim/rng.hpp"

#include <chrono>
#include <vector>

namespace duplexsim::detail {

// Wraps the session model, charging one clock step per call. Simulated mode
// charges the configured per-token latency; wall mode charges measured time.
class MeteredModel : public SequenceModel {
public:
    MeteredModel(const SequenceModel& inner, EngineConfig::Clock clock, double per_token)
        : inner_(&inner), clock_(clock), per_token_(per_token) {}

    std::vector<double> next_token_log_probs(std::span<const Token> context) const override {
        double cost = per_token_;
        std::vector<double> lp;
        if (clock_ == EngineConfig::Clock::Wall) {
            const auto t0 = std::chrono::steady_clock::now();
            lp = inner_->next_token_log_probs(context);
            cost = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        } else {
            lp = inner_->next_token_log_probs(context);
        }
        total_ += cost;
        cumulative_.push_back(total_);
        return lp;
    }

    int vocab_size() const override { return inner_->vocab_size(); }
    bool reentrant() const override { return false; }

    void reset_block() {
        cumulative_.clear();
        total_ = 0.0;
    }
    int calls() const { return static_cast<int>(cumulative_.size()); }
    // cost accumulated before the given block-relative call starts
    double cost_before(int call) const {
        if (call <= 0) return 0.0;
        return cumulative_[static_cast<std::size_t>(call) - 1];
    }
    double total_cost() const { return total_; }

private:
    const SequenceModel* inner_;
    EngineConfig::Clock clock_;
    double per_token_;
    mutable std::vector<double> cumulative_;
    mutable double total_ = 0.0;
};

struct StageOutcome {
    std::vector<StageRecord> records; // times are block-relative costs
    bool silent = false;
    std::vector<Token> speech_output;
    int speech_first_call = -1; // block-relative call index, -1 when no speech
};

// Three-stage decoding shared by the duplex and turn engines. `history`
// must already contain the current block's (or turn's) input frames.
class StageEngine {
public:
    StageEngine(const MeteredModel& metered, const ToyCodec& codec, const TokenSpace& space,
                const EngineConfig& config, std::span<const Token> prompt, Rng& rng)
        : metered_(&metered), codec_(&codec), space_(&space), config_(&config),
          prompt_(prompt.begin(), prompt.end()), rng_(&rng) {
        stops_ = {space.asr_tag(), space.res_tag(), space.spe_tag(), space.eob(), space.eot()};
    }

    // apply_silence_rule: the duplex per-block silence heuristic; the turn
    // engine always responds. speech_cap bounds the emitted frame count.
    StageOutcome run(const std::vector<Token>& history, int speech_cap, bool apply_silence_rule);

private:
    StageRecord exec_asr(std::vector<Token>& local, int speech_cap);
    StageRecord exec_res(std::vector<Token>& local, int speech_cap, bool apply_silence_rule,
                         bool* silent);
    StageRecord exec_spe(std::vector<Token>& local, int speech_cap, bool has_res, bool apply_silence_rule,
                         bool* silent, int* first_call);

    const MeteredModel* metered_;
    const ToyCodec* codec_;
    const TokenSpace* space_;
    const EngineConfig* config_;
    std::vector<Token> prompt_;
    Rng* rng_;
    StopSet stops_;
    std::vector<Token> res_output_; // response of the current block, for reranking
};

} // namespace duplexsim::detail
