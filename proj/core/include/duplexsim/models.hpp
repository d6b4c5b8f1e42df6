#pragma once

#include "duplexsim/types.hpp"

#include <map>
#include <memory>
#include <span>
#include <vector>

namespace duplexsim {

// Pluggable autoregressive sequence model. next_token_log_probs must return
// a normalized log distribution of size vocab_size(), deterministically for
// a given context; the decode layer verifies this on every call.
class SequenceModel {
public:
    virtual ~SequenceModel() = default;
    virtual std::vector<double> next_token_log_probs(std::span<const Token> context) const = 0;
    virtual int vocab_size() const = 0;
    virtual bool reentrant() const { return true; }
};

// Throws ModelContractError unless lp is a size-`vocab` normalized log
// distribution (sum of exp within 1e-9 of 1, no NaN).
void check_log_distribution(std::span<const double> lp, int vocab);

// Table-driven model for scripting exact behaviors in tests and baselines.
// The distribution is chosen by the last context token; contexts whose last
// token has no rule (and the empty context) use the default distribution.
class ScriptedModel : public SequenceModel {
public:
    ScriptedModel(int vocab, std::vector<double> default_probs);

    static ScriptedModel uniform(int vocab);
    static ScriptedModel constant(int vocab, Token always);
    // rules tokens[i] -> tokens[i+1], tokens.back() -> terminal,
    // terminal -> terminal; default emits tokens.front().
    static ScriptedModel chain(int vocab, std::span<const Token> tokens, Token terminal);

    void set_rule(Token last, std::vector<double> probs);
    void set_rule(Token last, Token next);

    std::vector<double> next_token_log_probs(std::span<const Token> context) const override;
    int vocab_size() const override { return vocab_; }

    const std::map<Token, std::vector<double>>& rules() const { return rules_; }
    const std::vector<double>& default_log_probs() const { return default_; }

private:
    static std::vector<double> to_log(std::vector<double> probs, int vocab);

    int vocab_ = 0;
    std::vector<double> default_;
    std::map<Token, std::vector<double>> rules_;
};

// Add-alpha smoothed n-gram model with exact-length context lookup; contexts
// never seen in training fall back to the uniform distribution.
class NgramModel : public SequenceModel {
public:
    NgramModel(int vocab, int order = 3, double alpha = 0.1);

    void observe(std::span<const Token> sequence);

    std::vector<double> next_token_log_probs(std::span<const Token> context) const override;
    int vocab_size() const override { return vocab_; }

    int order() const { return order_; }
    double alpha() const { return alpha_; }

    struct ContextCounts {
        std::map<Token, long long> next;
        long long total = 0;
    };
    const std::map<std::vector<Token>, ContextCounts>& counts() const { return counts_; }
    void set_count(std::vector<Token> context, Token next, long long count);

private:
    int vocab_ = 0;
    int order_ = 3;
    double alpha_ = 0.1;
    std::map<std::vector<Token>, ContextCounts> counts_;
};

// Throws std::invalid_argument on an empty corpus.
NgramModel ngram_train(const std::vector<std::vector<Token>>& corpus, int vocab,
                       int order = 3, double alpha = 0.1);

} // namespace duplexsim
