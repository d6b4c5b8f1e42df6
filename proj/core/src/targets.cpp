#include "duplexsim/targets.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace duplexsim {

namespace {

std::vector<WordSpan> words_in_span(std::span<const WordSpan> words, const FrameSpan& span) {
    std::vector<WordSpan> out;
    for (const WordSpan& w : words) {
        if (w.start_frame <= span.end && w.end_frame >= span.start) out.push_back(w);
    }
    return out;
}

std::vector<FrameLabel> frame_slice(const FrameStream& stream, const FrameSpan& span) {
    std::vector<FrameLabel> out;
    out.reserve(static_cast<std::size_t>(std::max(0, span.length())));
    for (int f = span.start; f <= span.end; ++f) out.push_back(stream.at(f));
    return out;
}

} // namespace

std::vector<WordSpan> slice_alignment(std::span<const WordSpan> words, const BlockPlan& plan, int b) {
    if (b < 0 || b >= plan.block_count()) throw std::out_of_range("slice_alignment: block index out of range");
    return words_in_span(words, plan.span(b));
}

std::vector<WordSpan> slice_alignment(const std::vector<WordTimestamp>& words, const BlockPlan& plan, int b) {
    std::vector<WordSpan> spans;
    spans.reserve(words.size());
    for (const WordTimestamp& w : words) spans.push_back({w.word, w.start_frame, w.end_frame});
    return slice_alignment(std::span<const WordSpan>(spans), plan, b);
}

BlockCotTargets block_targets(const Conversation& conv, const BlockPlan& plan, int b) {
    BlockCotTargets out;
    out.block = b;
    out.asr_words = slice_alignment(std::span<const WordSpan>(conv.user_words), plan, b);
    out.res_words = slice_alignment(std::span<const WordSpan>(conv.system_words), plan, b);
    out.speech_frames = frame_slice(conv.system_reference, plan.span(b));
    return out;
}

std::vector<Token> word_tokens(const TokenSpace& space, std::span<const WordSpan> words) {
    std::vector<Token> out;
    for (const WordSpan& w : words) {
        if (const auto id = space.find_word(w.word)) out.push_back(space.word_token(*id));
    }
    return out;
}

void TokenStreamBuilder::append_input(std::span<const FrameLabel> frames) {
    tokens_.insert(tokens_.end(), frames.begin(), frames.end());
}

void TokenStreamBuilder::append_stage(Stage stage, std::span<const Token> tokens) {
    tokens_.push_back(space_->stage_tag(stage));
    tokens_.insert(tokens_.end(), tokens.begin(), tokens.end());
}

void TokenStreamBuilder::end_block() { tokens_.push_back(space_->eob()); }

void TokenStreamBuilder::end_turn() { tokens_.push_back(space_->eot()); }

namespace {

// Window spans tile [1, T] at window_s seconds; the final partial window is
// kept.
std::vector<FrameSpan> window_spans(int total_frames, double fps, double window_s) {
    if (window_s <= 0.0) throw std::invalid_argument("window_s must be positive");
    const int window_frames = std::max(1, static_cast<int>(std::lround(window_s * fps)));
    std::vector<FrameSpan> out;
    for (int start = 1; start <= total_frames; start += window_frames) {
        out.push_back({start, std::min(start + window_frames - 1, total_frames)});
    }
    return out;
}

std::vector<Token> stage_tokens(const TokenSpace& space, const BlockCotTargets& targets, Stage stage) {
    switch (stage) {
        case Stage::Asr: return word_tokens(space, targets.asr_words);
        case Stage::Res: return word_tokens(space, targets.res_words);
        case Stage::Spe: return {targets.speech_frames.begin(), targets.speech_frames.end()};
    }
    return {};
}

// Shared walk over one window; emits an instance per block when wanted.
void build_window(const Conversation& conv, const TokenSpace& space, Variant variant,
                  const FrameSpan& window, int window_index, int n_block,
                  std::vector<CotInstance>* instances, std::vector<Token>* stream_out) {
    // block plan local to the window, offset back to absolute frames
    const BlockPlan local = partition_blocks(window.length(), n_block);
    TokenStreamBuilder stream(space);

    for (int b = 0; b < local.block_count(); ++b) {
        const FrameSpan abs{window.start + local.span(b).start - 1, window.start + local.span(b).end - 1};
        stream.append_input(frame_slice(conv.user, abs));

        BlockPlan abs_plan = local;
        for (FrameSpan& s : abs_plan.blocks) s = {window.start + s.start - 1, window.start + s.end - 1};
        abs_plan.total_frames = window.end;
        BlockCotTargets targets;
        targets.block = b;
        targets.asr_words = slice_alignment(std::span<const WordSpan>(conv.user_words), abs_plan, b);
        targets.res_words = slice_alignment(std::span<const WordSpan>(conv.system_words), abs_plan, b);
        targets.speech_frames = frame_slice(conv.system_reference, abs);

        TokenStreamBuilder target(space);
        for (const Stage stage : stages_for(variant)) {
            target.append_stage(stage, stage_tokens(space, targets, stage));
        }
        target.end_block();

        if (instances) {
            CotInstance inst;
            inst.variant = variant;
            inst.context = stream.tokens();
            inst.target = target.tokens();
            inst.conv_id = conv.id;
            inst.window = window_index;
            inst.block = b;
            instances->push_back(std::move(inst));
        }
        stream.append_input(std::span<const Token>(target.tokens()).subspan(0));
    }
    if (stream_out) *stream_out = stream.take();
}

} // namespace

std::vector<CotInstance> build_block_instances(const Conversation& conv, const TokenSpace& space,
                                               Variant variant, int n_block, double window_s) {
    std::vector<CotInstance> out;
    const auto windows = window_spans(conv.length(), conv.fps(), window_s);
    for (std::size_t w = 0; w < windows.size(); ++w) {
        build_window(conv, space, variant, windows[w], static_cast<int>(w), n_block, &out, nullptr);
    }
    return out;
}

std::vector<std::vector<Token>> window_streams(const Conversation& conv, const TokenSpace& space,
                                               Variant variant, int n_block, double window_s) {
    std::vector<std::vector<Token>> out;
    const auto windows = window_spans(conv.length(), conv.fps(), window_s);
    for (std::size_t w = 0; w < windows.size(); ++w) {
        std::vector<Token> stream;
        build_window(conv, space, variant, windows[w], static_cast<int>(w), n_block, nullptr, &stream);
        out.push_back(std::move(stream));
    }
    return out;
}

namespace {

int first_speech_after(const FrameStream& stream, int frame) {
    for (int f = frame; f <= stream.length(); ++f) {
        if (!stream.silent_at(f)) return f;
    }
    return stream.length() + 1;
}

std::vector<WordSpan> words_starting_in(std::span<const WordSpan> words, const FrameSpan& span) {
    std::vector<WordSpan> out;
    for (const WordSpan& w : words) {
        if (w.start_frame >= span.start && w.start_frame <= span.end) out.push_back(w);
    }
    return out;
}

// Slice [span.start, last non-silent frame in span]; empty when the span has
// no speech.
std::vector<FrameLabel> speech_slice(const FrameStream& stream, const FrameSpan& span) {
    int last = 0;
    for (int f = span.start; f <= span.end; ++f) {
        if (!stream.silent_at(f)) last = f;
    }
    if (last == 0) return {};
    return frame_slice(stream, {span.start, last});
}

} // namespace

TurnCotTargets turn_cot_targets(const TurnStructure& turns, int k) {
    const DialogueTurn& turn = turns.turns.at(static_cast<std::size_t>(k));
    TurnCotTargets out;
    out.turn = k;
    for (const WordSpan& w : turn.user_words) out.asr_text.push_back(w.word);
    for (const WordSpan& w : turn.response_words) out.res_text.push_back(w.word);
    out.speech = turn.response_speech;
    return out;
}

TurnStructure derive_turns(const Conversation& conv, int delta) {
    TurnStructure out;
    const auto segments = vad_segment(conv.user, delta);
    const int total = conv.length();

    const int first_user_speech = first_speech_after(conv.user, 1);
    if (first_user_speech > 1) {
        out.prelude_window = {1, std::min(first_user_speech - 1, total)};
        out.prelude_words = words_starting_in(conv.system_words, out.prelude_window);
        out.prelude_speech = speech_slice(conv.system_reference, out.prelude_window);
    }

    for (std::size_t k = 0; k < segments.size(); ++k) {
        DialogueTurn turn;
        turn.user = segments[k];
        turn.user_words = words_in_span(conv.user_words,
                                        {segments[k].buffer_start, segments[k].buffer_end});
        const int window_end = k + 1 < segments.size()
                                   ? first_speech_after(conv.user, segments[k].detect_frame) - 1
                                   : total;
        turn.response_window = {std::min(segments[k].detect_frame, total), std::min(window_end, total)};
        if (turn.response_window.start <= turn.response_window.end) {
            turn.response_words = words_starting_in(conv.system_words, turn.response_window);
            turn.response_speech = speech_slice(conv.system_reference, turn.response_window);
        }
        out.turns.push_back(std::move(turn));
    }
    return out;
}

namespace {

struct TurnPiece {
    bool prelude = false;
    int turn = -1;     // index into TurnStructure::turns
    int start_frame = 0;
    int end_frame = 0;
};

void append_turn_context(TokenStreamBuilder& stream, const Conversation& conv,
                         const TokenSpace& space, const TurnStructure& turns, const TurnPiece& piece) {
    if (piece.prelude) {
        stream.append_stage(Stage::Res, word_tokens(space, turns.prelude_words));
        stream.append_stage(Stage::Spe, turns.prelude_speech);
        stream.end_turn();
        return;
    }
    const DialogueTurn& t = turns.turns[static_cast<std::size_t>(piece.turn)];
    stream.append_input(std::span<const FrameLabel>(conv.user.labels)
                            .subspan(static_cast<std::size_t>(t.user.buffer_start - 1),
                                     static_cast<std::size_t>(t.user.buffer_frames())));
    stream.append_stage(Stage::Asr, word_tokens(space, t.user_words));
    stream.append_stage(Stage::Res, word_tokens(space, t.response_words));
    stream.append_stage(Stage::Spe, t.response_speech);
    stream.end_turn();
}

} // namespace

std::vector<CotInstance> build_turn_instances(const Conversation& conv, const TokenSpace& space,
                                              int max_turns, double max_s, int delta) {
    if (max_turns < 1) throw std::invalid_argument("build_turn_instances: max_turns must be >= 1");
    if (max_s <= 0.0) throw std::invalid_argument("build_turn_instances: max_s must be positive");

    std::vector<CotInstance> out;
    const Conversation swapped = conv.swapped();
    for (int role = 0; role < 2; ++role) {
        const Conversation& c = role == 0 ? conv : swapped;
        const TurnStructure turns = derive_turns(c, delta);

        std::vector<TurnPiece> pieces;
        if (!turns.prelude_words.empty() || !turns.prelude_speech.empty()) {
            pieces.push_back({true, -1, 1, turns.prelude_window.end});
        }
        for (std::size_t k = 0; k < turns.turns.size(); ++k) {
            const DialogueTurn& t = turns.turns[k];
            pieces.push_back({false, static_cast<int>(k), t.user.start_frame,
                              std::max(t.response_window.end, t.user.detect_frame)});
        }

        const int max_frames = static_cast<int>(std::lround(max_s * c.fps()));
        for (std::size_t p = 0; p < pieces.size(); ++p) {
            if (pieces[p].prelude) continue; // initial utterance is never a target
            // window of at most max_turns pieces ending at the target turn
            std::size_t first = p + 1 > static_cast<std::size_t>(max_turns) ? p + 1 - static_cast<std::size_t>(max_turns) : 0;
            while (first < p && pieces[p].end_frame - pieces[first].start_frame + 1 > max_frames) {
                ++first;
            }

            TokenStreamBuilder context(space);
            for (std::size_t j = first; j < p; ++j) append_turn_context(context, c, space, turns, pieces[j]);
            const DialogueTurn& target_turn = turns.turns[static_cast<std::size_t>(pieces[p].turn)];
            context.append_input(std::span<const FrameLabel>(c.user.labels)
                                     .subspan(static_cast<std::size_t>(target_turn.user.buffer_start - 1),
                                              static_cast<std::size_t>(target_turn.user.buffer_frames())));

            TokenStreamBuilder target(space);
            target.append_stage(Stage::Asr, word_tokens(space, target_turn.user_words));
            target.append_stage(Stage::Res, word_tokens(space, target_turn.response_words));
            target.append_stage(Stage::Spe, target_turn.response_speech);
            target.end_turn();

            CotInstance inst;
            inst.variant = Variant::Full;
            inst.context = context.take();
            inst.target = target.take();
            inst.conv_id = conv.id;
            inst.window = role;
            inst.block = pieces[p].turn;
            out.push_back(std::move(inst));
        }
    }
    return out;
}

} // namespace duplexsim
