#pragma once

#include "duplexsim/types.hpp"

namespace duplexsim {

struct FrameSpan {
    int start = 0; // 1-based, inclusive
    int end = 0;

    int length() const { return end - start + 1; }
    bool contains(int frame) const { return frame >= start && frame <= end; }
    bool intersects(const FrameSpan& o) const { return start <= o.end && o.start <= end; }
};

// Fixed-duration partition of [1, T]. Every block has exactly n_block frames
// except possibly the last, which keeps the remainder.
struct BlockPlan {
    int n_block = 0;
    int total_frames = 0;
    std::vector<FrameSpan> blocks;

    int block_count() const { return static_cast<int>(blocks.size()); }
    const FrameSpan& span(int b) const { return blocks.at(static_cast<std::size_t>(b)); }
    // I_b = b * n_block, clipped to the stream end.
    int boundary(int b) const;
};

// Throws std::invalid_argument when n_block < 1 or total_frames < 0.
BlockPlan partition_blocks(int total_frames, int n_block);

bool span_has_speech(const FrameStream& stream, const FrameSpan& span);

// True iff the block contains at least one non-silent frame in each channel.
bool block_has_overlap(const Conversation& conv, const FrameSpan& span);

} // namespace duplexsim
