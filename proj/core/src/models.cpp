#include "duplexsim/models.hpp"

#include "duplexsim/errors.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace duplexsim {

void check_log_distribution(std::span<const double> lp, int vocab) {
    if (static_cast<int>(lp.size()) != vocab) {
        throw ModelContractError("model returned " + std::to_string(lp.size()) +
                                 " log-probs, expected " + std::to_string(vocab));
    }
    double sum = 0.0;
    for (const double v : lp) {
        if (std::isnan(v) || v > 1e-9) throw ModelContractError("model log-prob out of range");
        sum += std::exp(v);
    }
    if (std::abs(sum - 1.0) > 1e-9) {
        throw ModelContractError("model distribution sums to " + std::to_string(sum));
    }
}

std::vector<double> ScriptedModel::to_log(std::vector<double> probs, int vocab) {
    if (static_cast<int>(probs.size()) != vocab) {
        throw std::invalid_argument("scripted model: distribution size mismatch");
    }
    double sum = 0.0;
    for (const double p : probs) {
        if (p < 0.0 || !std::isfinite(p)) throw std::invalid_argument("scripted model: bad probability");
        sum += p;
    }
    if (sum <= 0.0) throw std::invalid_argument("scripted model: zero distribution");
    for (double& p : probs) {
        p = p > 0.0 ? std::log(p / sum) : -std::numeric_limits<double>::infinity();
    }
    return probs;
}

ScriptedModel::ScriptedModel(int vocab, std::vector<double> default_probs) : vocab_(vocab) {
    if (vocab < 1) throw std::invalid_argument("scripted model: vocab must be >= 1");
    default_ = to_log(std::move(default_probs), vocab);
}

ScriptedModel ScriptedModel::uniform(int vocab) {
    return ScriptedModel(vocab, std::vector<double>(static_cast<std::size_t>(vocab), 1.0));
}

ScriptedModel ScriptedModel::constant(int vocab, Token always) {
    std::vector<double> probs(static_cast<std::size_t>(vocab), 0.0);
    probs.at(static_cast<std::size_t>(always)) = 1.0;
    return ScriptedModel(vocab, std::move(probs));
}

ScriptedModel ScriptedModel::chain(int vocab, std::span<const Token> tokens, Token terminal) {
    if (tokens.empty()) throw std::invalid_argument("scripted chain: empty token list");
    ScriptedModel model = ScriptedModel::constant(vocab, tokens.front());
    for (std::size_t i = 0; i + 1 < tokens.size(); ++i) model.set_rule(tokens[i], tokens[i + 1]);
    model.set_rule(tokens.back(), terminal);
    model.set_rule(terminal, terminal);
    return model;
}

void ScriptedModel::set_rule(Token last, std::vector<double> probs) {
    rules_[last] = to_log(std::move(probs), vocab_);
}

void ScriptedModel::set_rule(Token last, Token next) {
    std::vector<double> probs(static_cast<std::size_t>(vocab_), 0.0);
    probs.at(static_cast<std::size_t>(next)) = 1.0;
    set_rule(last, std::move(probs));
}

std::vector<double> ScriptedModel::next_token_log_probs(std::span<const Token> context) const {
    if (!context.empty()) {
        const auto it = rules_.find(context.back());
        if (it != rules_.end()) return it->second;
    }
    return default_;
}

NgramModel::NgramModel(int vocab, int order, double alpha)
    : vocab_(vocab), order_(order), alpha_(alpha) {
    if (vocab < 1) throw std::invalid_argument("ngram: vocab must be >= 1");
    if (order < 1) throw std::invalid_argument("ngram: order must be >= 1");
    if (alpha <= 0.0) throw std::invalid_argument("ngram: alpha must be positive");
}

void NgramModel::observe(std::span<const Token> sequence) {
    for (std::size_t i = 0; i < sequence.size(); ++i) {
        const std::size_t ctx_len = std::min<std::size_t>(static_cast<std::size_t>(order_ - 1), i);
        std::vector<Token> ctx(sequence.begin() + static_cast<std::ptrdiff_t>(i - ctx_len),
                               sequence.begin() + static_cast<std::ptrdiff_t>(i));
        ContextCounts& cc = counts_[std::move(ctx)];
        ++cc.next[sequence[i]];
        ++cc.total;
    }
}

void NgramModel::set_count(std::vector<Token> context, Token next, long long count) {
    ContextCounts& cc = counts_[std::move(context)];
    cc.next[next] += count;
    cc.total += count;
}

std::vector<double> NgramModel::next_token_log_probs(std::span<const Token> context) const {
    const std::size_t ctx_len = std::min<std::size_t>(static_cast<std::size_t>(order_ - 1), context.size());
    const std::vector<Token> key(context.end() - static_cast<std::ptrdiff_t>(ctx_len), context.end());

    std::vector<double> lp(static_cast<std::size_t>(vocab_));
    const auto it = counts_.find(key);
    if (it == counts_.end()) {
        const double uniform = -std::log(static_cast<double>(vocab_));
        for (double& v : lp) v = uniform;
        return lp;
    }
    const ContextCounts& cc = it->second;
    const double denom = std::log(static_cast<double>(cc.total) + alpha_ * vocab_);
    for (Token t = 0; t < vocab_; ++t) {
        const auto nit = cc.next.find(t);
        const double count = nit == cc.next.end() ? 0.0 : static_cast<double>(nit->second);
        lp[static_cast<std::size_t>(t)] = std::log(count + alpha_) - denom;
    }
    return lp;
}

NgramModel ngram_train(const std::vector<std::vector<Token>>& corpus, int vocab,
                       int order, double alpha) {
    if (corpus.empty()) throw std::invalid_argument("ngram_train: empty corpus");
    NgramModel model(vocab, order, alpha);
    for (const auto& sequence : corpus) model.observe(sequence);
    return model;
}

} // namespace duplexsim
