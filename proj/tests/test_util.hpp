#pragma once

#include "duplexsim/align.hpp"
#include "duplexsim/rng.hpp"
#include "duplexsim/token_space.hpp"
#include "duplexsim/types.hpp"

#include <string>
#include <vector>

namespace testutil {

using namespace duplexsim;

// Random emissions on a dyadic lattice (multiples of 1/8) so path scores are
// exact in double arithmetic and score ties are honest ties.
inline EmissionMatrix lattice_emissions(int frames, int vocab, Rng& rng) {
    EmissionMatrix em;
    em.frames = frames;
    em.vocab = vocab;
    em.log_scores.resize(static_cast<std::size_t>(frames) * (vocab + 1));
    for (double& v : em.log_scores) {
        v = static_cast<double>(uniform_int(rng, 33) - 16) / 8.0;
    }
    return em;
}

// 's' = silence, any other char = that token id (a=1, b=2, ...).
inline FrameStream stream_from(const std::string& pattern, double fps = 25.0) {
    FrameStream out;
    out.fps = fps;
    for (const char c : pattern) {
        out.labels.push_back(c == 's' ? kSilence : 1 + c - 'a');
    }
    return out;
}

inline TokenSpace tiny_space(int speech_vocab = 8, int words = 6) {
    std::vector<std::string> list;
    for (int i = 0; i < words; ++i) list.push_back("w" + std::to_string(i));
    return {speech_vocab, std::move(list)};
}

} // namespace testutil
