#pragma once

#include "duplexsim/types.hpp"

#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace duplexsim {

enum class Stage { Asr, Res, Spe };

enum class Variant { None, Asr, Response, Full };

// Canonical stage order per variant. The speech stage is always last.
const std::vector<Stage>& stages_for(Variant variant);

const char* to_string(Stage stage) noexcept;
const char* to_string(Variant variant) noexcept;
Stage parse_stage(std::string_view name);
Variant parse_variant(std::string_view name);

// Unified token id layout for interleaved speech/text streams:
//   [0, speech_vocab)                       speech frame labels (0 = silence)
//   [speech_vocab, speech_vocab + #words)   word ids
//   then, in order: <asr> <res> <spe> <eob> <eot>
class TokenSpace {
public:
    TokenSpace() = default;
    TokenSpace(int speech_vocab, std::vector<std::string> words);

    int speech_vocab() const { return speech_vocab_; }
    const std::vector<std::string>& words() const { return words_; }
    int word_count() const { return static_cast<int>(words_.size()); }
    int total() const { return speech_vocab_ + word_count() + 5; }

    bool is_speech(Token t) const { return t >= 0 && t < speech_vocab_; }
    bool is_word(Token t) const { return t >= speech_vocab_ && t < speech_vocab_ + word_count(); }
    bool is_stage_tag(Token t) const { return t == asr_tag() || t == res_tag() || t == spe_tag(); }
    bool is_structural(Token t) const { return is_stage_tag(t) || t == eob() || t == eot(); }

    Token word_token(int word_id) const;
    int word_id(Token t) const; // -1 when t is not a word token
    const std::string& word_text(Token t) const;
    std::optional<int> find_word(std::string_view text) const;

    Token asr_tag() const { return speech_vocab_ + word_count(); }
    Token res_tag() const { return asr_tag() + 1; }
    Token spe_tag() const { return asr_tag() + 2; }
    Token eob() const { return asr_tag() + 3; }
    Token eot() const { return asr_tag() + 4; }

    Token stage_tag(Stage stage) const;

    bool operator==(const TokenSpace& o) const {
        return speech_vocab_ == o.speech_vocab_ && words_ == o.words_;
    }

private:
    int speech_vocab_ = 0;
    std::vector<std::string> words_;
    std::unordered_map<std::string, int> index_;
};

} // namespace duplexsim
