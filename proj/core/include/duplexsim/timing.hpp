#pragma once

#include "duplexsim/engine.hpp"
#include "duplexsim/types.hpp"

#include <vector>

namespace duplexsim {

struct SegmentTiming {
    int segment = 0;          // 1-based turn number
    double user_end_time = 0; // end of the buffered user utterance
    double wait = 0;          // until the next emitted speech began generating
    double duration_s = 0;    // buffered utterance duration
    double rtf = 0;           // wait / duration
};

struct TimingReport {
    // Per speaking block: first_speech_time - input_end_time. Measures decode
    // backlog beyond block arrival; exactly 0 for a zero-latency model.
    std::vector<double> block_waits;
    // Per user segment: latency from end of user speech to the first emitted
    // speech token at or after it. Includes the block floor.
    std::vector<SegmentTiming> segments;
    double block_wait_mean = 0;
    double wait_mean = 0;
    double rtf_mean = 0;
};

// Throws std::invalid_argument when the trace lacks timing events for a
// speaking block.
TimingReport measure_timings(const StageTrace& trace, const FrameStream& user, int delta);

} // namespace duplexsim
