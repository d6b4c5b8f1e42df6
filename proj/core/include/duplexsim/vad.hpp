#pragma once

#include "duplexsim/types.hpp"

#include <vector>

namespace duplexsim {

// One detected user turn. detect_frame is the first frame at which delta
// consecutive silence frames have been observed after speech activity; the
// buffered utterance is the closed span [start_frame, detect_frame - delta].
struct TurnSegment {
    int index = 0;        // 1-based turn number k
    int start_frame = 0;  // T_{k-1}: previous detection point (1 for the first turn)
    int detect_frame = 0; // T_k (stream end when open)
    int buffer_start = 0;
    int buffer_end = 0;
    bool open = false;    // speech ran into the stream end without a delta-run
    int response_len = 0; // T', filled in by the turn engine

    int buffer_frames() const { return buffer_end - buffer_start + 1; }
};

// Run-length silence VAD. A turn with speech but no trailing delta-silence
// closes at the stream end and is flagged open. All-silence input yields no
// segments. Throws std::invalid_argument when delta < 1.
std::vector<TurnSegment> vad_segment(const FrameStream& user, int delta);

} // namespace duplexsim
