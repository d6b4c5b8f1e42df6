#pragma once

#include "duplexsim/align.hpp"
#include "duplexsim/blocks.hpp"
#include "duplexsim/token_space.hpp"
#include "duplexsim/types.hpp"
#include "duplexsim/vad.hpp"

#include <span>
#include <string>
#include <vector>

namespace duplexsim {

// Per-block intermediate targets: the aligned user transcript slice, the
// aligned response slice, and the reference speech frames.
struct BlockCotTargets {
    int block = 0; // 0-based
    std::vector<WordSpan> asr_words;
    std::vector<WordSpan> res_words;
    std::vector<FrameLabel> speech_frames;
};

struct TurnCotTargets {
    int turn = 0; // 0-based
    std::vector<std::string> asr_text;
    std::vector<std::string> res_text;
    std::vector<FrameLabel> speech;
};

struct TurnStructure;
// Stage targets for one user turn of the derived structure.
TurnCotTargets turn_cot_targets(const TurnStructure& turns, int k);

// One training/inference record. Stage-tagged token sequences: each block is
// laid out as  user frames, <asr> words, <res> words, <spe> frames, <eob>
// (turn instances end with <eot>), restricted to the variant's stages.
struct CotInstance {
    Variant variant = Variant::Full;
    std::vector<Token> context;
    std::vector<Token> target;
    std::string conv_id;
    int window = 0; // block mode: window index; turn mode: role index (0 original, 1 swapped)
    int block = 0;  // block mode: block index in window; turn mode: turn index
};

// Every word whose span intersects block b of the plan; words crossing a
// boundary therefore appear in both adjacent blocks. Throws
// std::out_of_range on a bad block index.
std::vector<WordSpan> slice_alignment(std::span<const WordSpan> words, const BlockPlan& plan, int b);
std::vector<WordSpan> slice_alignment(const std::vector<WordTimestamp>& words, const BlockPlan& plan, int b);

// Ground-truth stage targets for one block of the conversation.
BlockCotTargets block_targets(const Conversation& conv, const BlockPlan& plan, int b);

// Encode a word list as word tokens, dropping words missing from the space.
std::vector<Token> word_tokens(const TokenSpace& space, std::span<const WordSpan> words);

// Incremental builder for the interleaved stream layout shared by training
// instances and the engine.
class TokenStreamBuilder {
public:
    explicit TokenStreamBuilder(const TokenSpace& space) : space_(&space) {}

    void append_input(std::span<const FrameLabel> frames);
    void append_stage(Stage stage, std::span<const Token> tokens);
    void end_block();
    void end_turn();

    const std::vector<Token>& tokens() const { return tokens_; }
    std::vector<Token> take() { return std::move(tokens_); }
    std::size_t size() const { return tokens_.size(); }

private:
    const TokenSpace* space_;
    std::vector<Token> tokens_;
};

// One instance per block per window. Windows tile the conversation without
// overlap at window_s seconds; the context restarts at each window boundary.
std::vector<CotInstance> build_block_instances(const Conversation& conv, const TokenSpace& space,
                                               Variant variant, int n_block, double window_s = 60.0);

// Full per-window token streams in the same layout (training corpus).
std::vector<std::vector<Token>> window_streams(const Conversation& conv, const TokenSpace& space,
                                               Variant variant, int n_block, double window_s = 60.0);

// One user turn paired with the assistant's response interval.
struct DialogueTurn {
    TurnSegment user;
    std::vector<WordSpan> user_words;
    std::vector<WordSpan> response_words;
    std::vector<FrameLabel> response_speech;
    FrameSpan response_window{0, 0};
};

// Turn structure of a conversation: VAD segments on the user channel, each
// paired with the assistant words/frames up to the next user speech onset.
// Assistant words spoken before any user speech are returned separately as
// the prelude (the assistant's initial utterance).
struct TurnStructure {
    std::vector<WordSpan> prelude_words;
    std::vector<FrameLabel> prelude_speech;
    FrameSpan prelude_window{0, 0};
    std::vector<DialogueTurn> turns;
};

TurnStructure derive_turns(const Conversation& conv, int delta);

// Instances for the turn-by-turn baseline: both role assignments of the
// conversation, one instance per user turn, contexts capped at max_turns
// turns and max_s seconds. The assistant's initial utterance is context
// only, never a prediction target.
std::vector<CotInstance> build_turn_instances(const Conversation& conv, const TokenSpace& space,
                                              int max_turns = 4, double max_s = 120.0, int delta = 10);

} // namespace duplexsim
