#include "duplexsim/vad.hpp"

#include <stdexcept>

namespace duplexsim {

std::vector<TurnSegment> vad_segment(const FrameStream& user, int delta) {
    if (delta < 1) throw std::invalid_argument("vad_segment: delta must be >= 1");

    std::vector<TurnSegment> segments;
    const int total = user.length();
    int turn_start = 1;     // T_{k-1}
    bool active = false;    // speech seen since turn_start
    int silence_run = 0;

    for (int f = 1; f <= total; ++f) {
        if (user.silent_at(f)) {
            ++silence_run;
            if (active && silence_run == delta) {
                TurnSegment seg;
                seg.index = static_cast<int>(segments.size()) + 1;
                seg.start_frame = turn_start;
                seg.detect_frame = f;
                seg.buffer_start = turn_start;
                seg.buffer_end = f - delta;
                segments.push_back(seg);
                turn_start = f;
                active = false;
            }
        } else {
            active = true;
            silence_run = 0;
        }
    }

    if (active) {
        TurnSegment seg;
        seg.index = static_cast<int>(segments.size()) + 1;
        seg.start_frame = turn_start;
        seg.detect_frame = total;
        seg.buffer_start = turn_start;
        seg.buffer_end = total;
        seg.open = true;
        segments.push_back(seg);
    }
    return segments;
}

} // namespace duplexsim
