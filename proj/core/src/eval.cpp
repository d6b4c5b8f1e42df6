#include "duplexsim/eval.hpp"

#include "duplexsim/decode.hpp"
#include "duplexsim/targets.hpp"
#include "duplexsim/timing.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>

namespace duplexsim {

namespace {

RougeScore from_counts(double matched, double hyp_total, double ref_total) {
    RougeScore s;
    s.precision = hyp_total > 0 ? matched / hyp_total : 0.0;
    s.recall = ref_total > 0 ? matched / ref_total : 0.0;
    s.f1 = s.precision + s.recall > 0
               ? 2.0 * s.precision * s.recall / (s.precision + s.recall)
               : 0.0;
    return s;
}

double clipped_ngram_overlap(const std::vector<std::string>& hyp,
                             const std::vector<std::string>& ref, std::size_t n) {
    if (hyp.size() < n || ref.size() < n) return 0.0;
    const auto grams = [n](const std::vector<std::string>& words) {
        std::map<std::vector<std::string>, int> counts;
        for (std::size_t i = 0; i + n <= words.size(); ++i) {
            ++counts[{words.begin() + static_cast<std::ptrdiff_t>(i),
                      words.begin() + static_cast<std::ptrdiff_t>(i + n)}];
        }
        return counts;
    };
    const auto h = grams(hyp);
    const auto r = grams(ref);
    double matched = 0;
    for (const auto& [gram, count] : h) {
        const auto it = r.find(gram);
        if (it != r.end()) matched += std::min(count, it->second);
    }
    return matched;
}

std::size_t lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b) {
    std::vector<std::size_t> prev(b.size() + 1, 0);
    std::vector<std::size_t> cur(b.size() + 1, 0);
    for (std::size_t i = 1; i <= a.size(); ++i) {
        for (std::size_t j = 1; j <= b.size(); ++j) {
            cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

} // namespace

RougeScore rouge(const std::vector<std::string>& hyp, const std::vector<std::string>& ref,
                 RougeMode mode) {
    switch (mode) {
        case RougeMode::R1: {
            const double m = clipped_ngram_overlap(hyp, ref, 1);
            return from_counts(m, static_cast<double>(hyp.size()), static_cast<double>(ref.size()));
        }
        case RougeMode::R2: {
            const double m = clipped_ngram_overlap(hyp, ref, 2);
            const double h = hyp.size() >= 2 ? static_cast<double>(hyp.size() - 1) : 0.0;
            const double r = ref.size() >= 2 ? static_cast<double>(ref.size() - 1) : 0.0;
            return from_counts(m, h, r);
        }
        case RougeMode::RL: {
            const double m = static_cast<double>(lcs_length(hyp, ref));
            return from_counts(m, static_cast<double>(hyp.size()), static_cast<double>(ref.size()));
        }
    }
    return {};
}

std::vector<std::string> normalize_text(const std::string& text) {
    std::vector<std::string> words;
    std::string word;
    for (const char raw : text) {
        const unsigned char c = static_cast<unsigned char>(raw);
        if (std::isalnum(c)) {
            word.push_back(static_cast<char>(std::tolower(c)));
        } else if (std::isspace(c)) {
            if (!word.empty()) words.push_back(std::move(word));
            word.clear();
        }
        // punctuation is dropped
    }
    if (!word.empty()) words.push_back(std::move(word));
    return words;
}

double perplexity(const SequenceModel& model, std::span<const Token> tokens) {
    if (tokens.empty()) throw std::invalid_argument("perplexity: empty sequence");
    const double total = score_sequence(model, tokens);
    return std::exp(-total / static_cast<double>(tokens.size()));
}

OverlapStats overlap_stats(const FrameStream& sys, const FrameStream& ref,
                           const FrameStream& user, const BlockPlan& plan) {
    if (sys.length() != ref.length() || sys.length() != user.length()) {
        throw std::invalid_argument("overlap_stats: stream length mismatch");
    }
    if (plan.total_frames != sys.length()) {
        throw std::invalid_argument("overlap_stats: plan does not cover the streams");
    }

    int sys_overlap = 0;
    int ref_overlap = 0;
    int both = 0;
    for (int b = 0; b < plan.block_count(); ++b) {
        const FrameSpan& span = plan.span(b);
        const bool u = span_has_speech(user, span);
        const bool so = u && span_has_speech(sys, span);
        const bool ro = u && span_has_speech(ref, span);
        sys_overlap += so;
        ref_overlap += ro;
        both += so && ro;
    }

    OverlapStats out;
    out.pct = plan.block_count() > 0
                  ? static_cast<double>(sys_overlap) / plan.block_count()
                  : 0.0;
    if (sys_overlap > 0) out.precision = static_cast<double>(both) / sys_overlap;
    if (ref_overlap > 0) out.recall = static_cast<double>(both) / ref_overlap;
    return out;
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw std::invalid_argument("cosine: dimension mismatch");
    double dot = 0, na = 0, nb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

std::vector<double> style_rank(const std::vector<std::vector<std::vector<double>>>& systems,
                               const std::vector<std::vector<double>>& references) {
    if (systems.empty()) throw std::invalid_argument("style_rank: no systems");
    const std::size_t utterances = references.size();
    for (const auto& sys : systems) {
        if (sys.size() != utterances) {
            throw std::invalid_argument("style_rank: utterance count mismatch");
        }
    }

    std::vector<double> rank_sums(systems.size(), 0.0);
    for (std::size_t u = 0; u < utterances; ++u) {
        std::vector<double> sims(systems.size());
        for (std::size_t s = 0; s < systems.size(); ++s) {
            sims[s] = cosine_similarity(systems[s][u], references[u]);
        }
        // average rank over ties, rank 1 = most similar
        for (std::size_t s = 0; s < systems.size(); ++s) {
            int better = 0;
            int equal = 0;
            for (std::size_t o = 0; o < systems.size(); ++o) {
                if (sims[o] > sims[s]) ++better;
                if (sims[o] == sims[s]) ++equal;
            }
            rank_sums[s] += better + (1.0 + equal) / 2.0;
        }
    }
    for (double& r : rank_sums) r /= utterances > 0 ? static_cast<double>(utterances) : 1.0;
    return rank_sums;
}

std::vector<TurnPair> turn_pairs(const Conversation& conv, const FrameStream& sys_output,
                                 const ToyCodec& codec, const TokenSpace& space, int delta) {
    std::vector<TurnPair> out;
    const TurnStructure turns = derive_turns(conv, delta);
    for (const DialogueTurn& turn : turns.turns) {
        if (turn.response_window.start > turn.response_window.end) continue;
        TurnPair pair;
        for (const WordSpan& w : turn.response_words) {
            for (std::string& word : normalize_text(w.word)) pair.ref.push_back(std::move(word));
        }
        std::vector<FrameLabel> frames;
        for (int f = turn.response_window.start;
             f <= std::min(turn.response_window.end, sys_output.length()); ++f) {
            frames.push_back(sys_output.at(f));
        }
        for (const int word_id : codec.decode_stream(frames)) {
            if (word_id < space.word_count()) pair.hyp.push_back(space.words()[static_cast<std::size_t>(word_id)]);
        }
        out.push_back(std::move(pair));
    }
    return out;
}

MetricsReport evaluate_run(const std::vector<Conversation>& convs,
                           const std::vector<EngineResult>& runs, const SequenceModel* ppl_model,
                           const ToyCodec& codec, const TokenSpace& space, int n_block, int delta) {
    if (convs.size() != runs.size()) {
        throw std::invalid_argument("evaluate_run: conversation/run count mismatch");
    }

    MetricsReport report;
    report.conversations = static_cast<int>(convs.size());

    std::vector<RougeScore> r1s, r2s, rls;
    std::vector<double> ppls;
    long long overlap_blocks = 0, sys_blocks = 0, ref_blocks = 0, both_blocks = 0, total_blocks = 0;
    std::vector<double> rtfs, waits;

    for (std::size_t i = 0; i < convs.size(); ++i) {
        const Conversation& conv = convs[i];
        const EngineResult& run = runs[i];

        for (const TurnPair& pair : turn_pairs(conv, run.output, codec, space, delta)) {
            if (pair.ref.empty()) continue;
            ++report.turns_scored;
            r1s.push_back(rouge(pair.hyp, pair.ref, RougeMode::R1));
            r2s.push_back(rouge(pair.hyp, pair.ref, RougeMode::R2));
            rls.push_back(rouge(pair.hyp, pair.ref, RougeMode::RL));
            if (ppl_model && !pair.hyp.empty()) {
                std::vector<Token> tokens;
                for (const std::string& w : pair.hyp) {
                    if (const auto id = space.find_word(w)) tokens.push_back(space.word_token(*id));
                }
                if (!tokens.empty()) ppls.push_back(perplexity(*ppl_model, tokens));
            }
        }

        if (run.output.length() == conv.length()) {
            const BlockPlan plan = partition_blocks(conv.length(), n_block);
            for (int b = 0; b < plan.block_count(); ++b) {
                const FrameSpan& span = plan.span(b);
                const bool u = span_has_speech(conv.user, span);
                const bool so = u && span_has_speech(run.output, span);
                const bool ro = u && span_has_speech(conv.system_reference, span);
                sys_blocks += so;
                ref_blocks += ro;
                both_blocks += so && ro;
                overlap_blocks += so;
            }
            total_blocks += plan.block_count();
        }

        const TimingReport timing = measure_timings(run.trace, conv.user, delta);
        for (const SegmentTiming& st : timing.segments) {
            rtfs.push_back(st.rtf);
            waits.push_back(st.wait);
        }
    }

    const auto mean_scores = [](const std::vector<RougeScore>& v) {
        RougeScore m;
        if (v.empty()) return m;
        for (const RougeScore& s : v) {
            m.precision += s.precision;
            m.recall += s.recall;
            m.f1 += s.f1;
        }
        m.precision /= static_cast<double>(v.size());
        m.recall /= static_cast<double>(v.size());
        m.f1 /= static_cast<double>(v.size());
        return m;
    };
    const auto mean = [](const std::vector<double>& v) {
        if (v.empty()) return 0.0;
        return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    };

    report.rouge1 = mean_scores(r1s);
    report.rouge2 = mean_scores(r2s);
    report.rougeL = mean_scores(rls);
    report.perplexity = mean(ppls);
    report.overlap_pct = total_blocks > 0 ? static_cast<double>(overlap_blocks) / total_blocks : 0.0;
    if (sys_blocks > 0) report.overlap_precision = static_cast<double>(both_blocks) / sys_blocks;
    if (ref_blocks > 0) report.overlap_recall = static_cast<double>(both_blocks) / ref_blocks;
    report.rtf_mean = mean(rtfs);
    report.first_token_wait_mean = mean(waits);
    return report;
}

AblationTable ablate_block_size(const std::vector<Conversation>& convs, const SequenceModel& model,
                                const ToyCodec& codec, const TokenSpace& space,
                                const EngineConfig& base, std::span<const double> sizes_s,
                                int delta, bool teacher_forced) {
    if (sizes_s.size() < 2) throw std::invalid_argument("ablate_block_size: need at least 2 sizes");

    AblationTable table;
    for (const double size_s : sizes_s) {
        EngineConfig config = base;
        config.n_block = std::max(1, static_cast<int>(std::lround(size_s * base.fps)));

        std::vector<EngineResult> runs;
        for (const Conversation& conv : convs) {
            runs.push_back(teacher_forced
                               ? run_duplex_teacher(conv, model, codec, space, config)
                               : run_duplex(conv.user, model, codec, space, config,
                                            conv.speaker_prompt));
        }
        const MetricsReport report = evaluate_run(convs, runs, nullptr, codec, space,
                                                  config.n_block, delta);
        table.rows.push_back({size_s, report.rougeL.f1, report.rtf_mean,
                              report.first_token_wait_mean});
    }

    std::vector<AblationRow> sorted = table.rows;
    std::sort(sorted.begin(), sorted.end(),
              [](const AblationRow& a, const AblationRow& b) { return a.block_s < b.block_s; });
    table.latency_monotone = true;
    for (std::size_t i = 1; i < sorted.size(); ++i) {
        if (sorted[i].first_token_wait_mean < sorted[i - 1].first_token_wait_mean) {
            table.latency_monotone = false;
        }
    }
    return table;
}

} // namespace duplexsim
