#include "duplexsim/blocks.hpp"

#include <algorithm>
#include <stdexcept>

namespace duplexsim {

int BlockPlan::boundary(int b) const {
    return std::min(b * n_block, total_frames);
}

BlockPlan partition_blocks(int total_frames, int n_block) {
    if (n_block < 1) throw std::invalid_argument("partition_blocks: n_block must be >= 1");
    if (total_frames < 0) throw std::invalid_argument("partition_blocks: negative frame count");

    BlockPlan plan;
    plan.n_block = n_block;
    plan.total_frames = total_frames;
    for (int start = 1; start <= total_frames; start += n_block) {
        plan.blocks.push_back({start, std::min(start + n_block - 1, total_frames)});
    }
    return plan;
}

bool span_has_speech(const FrameStream& stream, const FrameSpan& span) {
    for (int f = span.start; f <= span.end; ++f) {
        if (!stream.silent_at(f)) return true;
    }
    return false;
}

bool block_has_overlap(const Conversation& conv, const FrameSpan& span) {
    return span_has_speech(conv.user, span) && span_has_speech(conv.system_reference, span);
}

} // namespace duplexsim
