#include "duplexsim/token_space.hpp"

#include <stdexcept>

namespace duplexsim {

const std::vector<Stage>& stages_for(Variant variant) {
    static const std::vector<Stage> none{Stage::Spe};
    static const std::vector<Stage> asr{Stage::Asr, Stage::Spe};
    static const std::vector<Stage> response{Stage::Res, Stage::Spe};
    static const std::vector<Stage> full{Stage::Asr, Stage::Res, Stage::Spe};
    switch (variant) {
        case Variant::None: return none;
        case Variant::Asr: return asr;
        case Variant::Response: return response;
        case Variant::Full: return full;
    }
    return none;
}

const char* to_string(Stage stage) noexcept {
    switch (stage) {
        case Stage::Asr: return "asr";
        case Stage::Res: return "res";
        case Stage::Spe: return "spe";
    }
    return "?";
}

const char* to_string(Variant variant) noexcept {
    switch (variant) {
        case Variant::None: return "none";
        case Variant::Asr: return "asr";
        case Variant::Response: return "response";
        case Variant::Full: return "full";
    }
    return "?";
}

Stage parse_stage(std::string_view name) {
    if (name == "asr") return Stage::Asr;
    if (name == "res") return Stage::Res;
    if (name == "spe") return Stage::Spe;
    throw std::invalid_argument("unknown stage: " + std::string(name));
}

Variant parse_variant(std::string_view name) {
    if (name == "none") return Variant::None;
    if (name == "asr") return Variant::Asr;
    if (name == "response") return Variant::Response;
    if (name == "full") return Variant::Full;
    throw std::invalid_argument("unknown variant: " + std::string(name));
}

TokenSpace::TokenSpace(int speech_vocab, std::vector<std::string> words)
    : speech_vocab_(speech_vocab), words_(std::move(words)) {
    if (speech_vocab_ < 1) throw std::invalid_argument("token space: speech vocab must be >= 1");
    for (int i = 0; i < word_count(); ++i) {
        if (!index_.emplace(words_[static_cast<std::size_t>(i)], i).second) {
            throw std::invalid_argument("token space: duplicate word '" + words_[static_cast<std::size_t>(i)] + "'");
        }
    }
}

Token TokenSpace::word_token(int word_id) const {
    if (word_id < 0 || word_id >= word_count()) throw std::out_of_range("token space: word id out of range");
    return speech_vocab_ + word_id;
}

int TokenSpace::word_id(Token t) const {
    return is_word(t) ? t - speech_vocab_ : -1;
}

const std::string& TokenSpace::word_text(Token t) const {
    const int id = word_id(t);
    if (id < 0) throw std::out_of_range("token space: not a word token");
    return words_[static_cast<std::size_t>(id)];
}

std::optional<int> TokenSpace::find_word(std::string_view text) const {
    const auto it = index_.find(std::string(text));
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

Token TokenSpace::stage_tag(Stage stage) const {
    switch (stage) {
        case Stage::Asr: return asr_tag();
        case Stage::Res: return res_tag();
        case Stage::Spe: return spe_tag();
    }
    return eob();
}

} // namespace duplexsim
