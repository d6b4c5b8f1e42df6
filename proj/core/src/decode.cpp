#include "duplexsim/decode.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace duplexsim {

void DecodeParams::check() const {
    if (k < 1) throw std::invalid_argument("decode params: k must be >= 1");
    if (temperature <= 0.0) throw std::invalid_argument("decode params: temperature must be positive");
    if (max_new_tokens < 1) throw std::invalid_argument("decode params: max_new_tokens must be >= 1");
    if (n_candidates < 1) throw std::invalid_argument("decode params: n_candidates must be >= 1");
}

namespace {

Token argmax_token(const std::vector<double>& lp) {
    return static_cast<Token>(std::max_element(lp.begin(), lp.end()) - lp.begin());
}

} // namespace

std::vector<Token> greedy_decode(const SequenceModel& model, std::span<const Token> context,
                                 const StopSet& stops, int max_new) {
    std::vector<Token> ctx(context.begin(), context.end());
    std::vector<Token> out;
    for (int i = 0; i < max_new; ++i) {
        const std::vector<double> lp = model.next_token_log_probs(ctx);
        check_log_distribution(lp, model.vocab_size());
        const Token next = argmax_token(lp);
        if (stops.count(next)) break;
        out.push_back(next);
        ctx.push_back(next);
    }
    return out;
}

Token topk_step(const SequenceModel& model, std::span<const Token> context,
                const DecodeParams& params, Rng& rng) {
    const std::vector<double> lp = model.next_token_log_probs(context);
    check_log_distribution(lp, model.vocab_size());

    // top-k by probability, ties toward the lower id so k=1 matches greedy
    std::vector<Token> ids(lp.size());
    std::iota(ids.begin(), ids.end(), 0);
    const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(params.k), lp.size());
    std::partial_sort(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(k), ids.end(),
                      [&](Token a, Token b) {
                          if (lp[static_cast<std::size_t>(a)] != lp[static_cast<std::size_t>(b)]) {
                              return lp[static_cast<std::size_t>(a)] > lp[static_cast<std::size_t>(b)];
                          }
                          return a < b;
                      });

    // renormalize the kept mass after temperature scaling
    std::vector<double> weights(k);
    const double top = lp[static_cast<std::size_t>(ids[0])];
    for (std::size_t i = 0; i < k; ++i) {
        weights[i] = std::exp((lp[static_cast<std::size_t>(ids[i])] - top) / params.temperature);
    }
    const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
    double u = uniform_unit(rng) * total;
    for (std::size_t i = 0; i < k; ++i) {
        u -= weights[i];
        if (u <= 0.0) return ids[i];
    }
    return ids[k - 1];
}

std::vector<Token> topk_sample(const SequenceModel& model, std::span<const Token> context,
                               const DecodeParams& params, const StopSet& stops, Rng& rng) {
    params.check();
    std::vector<Token> ctx(context.begin(), context.end());
    std::vector<Token> out;
    for (int i = 0; i < params.max_new_tokens; ++i) {
        const Token next = topk_step(model, ctx, params, rng);
        if (stops.count(next)) break;
        out.push_back(next);
        ctx.push_back(next);
    }
    return out;
}

std::vector<Token> topk_sample(const SequenceModel& model, std::span<const Token> context,
                               const DecodeParams& params, const StopSet& stops) {
    Rng rng(params.seed);
    return topk_sample(model, context, params, stops, rng);
}

BestOfN best_of_n_speech(const SequenceModel& model, std::span<const Token> context,
                         std::span<const int> intended_words, const ToyCodec& codec,
                         const DecodeParams& params, const StopSet& stops, Rng& rng) {
    params.check();
    BestOfN best;
    int calls = 0;
    for (int c = 0; c < params.n_candidates; ++c) {
        const int first_call = calls;
        std::vector<Token> ctx(context.begin(), context.end());
        std::vector<Token> candidate;
        for (int i = 0; i < params.max_new_tokens; ++i) {
            const Token next = topk_step(model, ctx, params, rng);
            ++calls;
            if (stops.count(next)) break;
            candidate.push_back(next);
            ctx.push_back(next);
        }
        const std::vector<int> decoded = codec.decode_stream(candidate);
        const double wer = word_error_rate(decoded, intended_words);
        if (best.chosen < 0 || wer < best.wer) {
            best.chosen = c;
            best.wer = wer;
            best.speech = std::move(candidate);
            best.first_token_call = first_call;
        }
    }
    best.total_calls = calls;
    return best;
}

double score_sequence(const SequenceModel& model, std::span<const Token> tokens) {
    if (tokens.empty()) throw std::invalid_argument("score_sequence: empty sequence");
    double total = 0.0;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        const std::vector<double> lp = model.next_token_log_probs(tokens.first(i));
        check_log_distribution(lp, model.vocab_size());
        const Token t = tokens[i];
        if (t < 0 || t >= model.vocab_size()) {
            throw std::invalid_argument("score_sequence: token outside model vocabulary");
        }
        total += lp[static_cast<std::size_t>(t)];
    }
    return total;
}

namespace {

template <typename Seq>
double levenshtein_rate(const Seq& hyp, const Seq& ref) {
    const std::size_t m = hyp.size();
    const std::size_t n = ref.size();
    std::vector<std::size_t> prev(n + 1);
    std::vector<std::size_t> cur(n + 1);
    std::iota(prev.begin(), prev.end(), std::size_t{0});
    for (std::size_t i = 1; i <= m; ++i) {
        cur[0] = i;
        for (std::size_t j = 1; j <= n; ++j) {
            const std::size_t sub = prev[j - 1] + (hyp[i - 1] == ref[j - 1] ? 0 : 1);
            cur[j] = std::min({sub, prev[j] + 1, cur[j - 1] + 1});
        }
        std::swap(prev, cur);
    }
    return static_cast<double>(prev[n]) / static_cast<double>(std::max<std::size_t>(1, n));
}

} // namespace

double word_error_rate(std::span<const int> hyp, std::span<const int> ref) {
    return levenshtein_rate(hyp, ref);
}

double word_error_rate(const std::vector<std::string>& hyp, const std::vector<std::string>& ref) {
    const auto fold = [](std::vector<std::string> words) {
        for (std::string& w : words) {
            for (char& c : w) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        }
        return words;
    };
    const std::vector<std::string> h = fold(hyp);
    const std::vector<std::string> r = fold(ref);
    return levenshtein_rate(h, r);
}

std::vector<Token> sanitize_stage_output(std::span<const Token> raw, Stage stage,
                                         const TokenSpace& space, int max_words, int max_frames) {
    std::vector<Token> out;
    const int cap = stage == Stage::Spe ? max_frames : max_words;
    for (const Token t : raw) {
        if (space.is_structural(t)) break;
        const bool legal = stage == Stage::Spe ? space.is_speech(t) : space.is_word(t);
        if (!legal) continue;
        out.push_back(t);
        if (static_cast<int>(out.size()) >= cap) break;
    }
    return out;
}

} // namespace duplexsim
