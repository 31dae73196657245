#pragma once

// Corpus data model: every item (an image stand-in) carries three generated
// summary channels, each embedded at sentence and token granularity.

#include <array>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "mhys/embedding.hpp"
#include "mhys/errors.hpp"

namespace mhys {

enum class ChannelKind : std::uint8_t {
    image_question = 0,
    scene_question = 1,
    description = 2,
};

inline constexpr std::array<ChannelKind, 3> kAllChannels = {
    ChannelKind::image_question, ChannelKind::scene_question, ChannelKind::description};

inline std::string_view to_string(ChannelKind kind) {
    switch (kind) {
        case ChannelKind::image_question: return "image_question";
        case ChannelKind::scene_question: return "scene_question";
        case ChannelKind::description: return "description";
    }
    return "unknown";
}

inline ChannelKind parse_channel_kind(std::string_view name) {
    for (ChannelKind k : kAllChannels)
        if (to_string(k) == name) return k;
    throw ContractViolation("unknown channel '" + std::string(name) + "'");
}

/// Prompts used to generate each channel from an image with a multimodal LLM.
/// Scene questions are derived from the scene-information output.
inline std::string_view generation_prompt(ChannelKind kind) {
    switch (kind) {
        case ChannelKind::image_question: return "Generate a question based on the image:";
        case ChannelKind::scene_question: return "Generate the scene information based on the image:";
        case ChannelKind::description: return "Generate a detailed description based on the image:";
    }
    return "";
}

/// Subset of channels enabled for a retrieval run.
class ChannelMask {
public:
    constexpr ChannelMask() = default;

    constexpr ChannelMask(std::initializer_list<ChannelKind> kinds) {
        for (ChannelKind k : kinds) bits_ |= bit(k);
    }

    static constexpr ChannelMask all() {
        return {ChannelKind::image_question, ChannelKind::scene_question, ChannelKind::description};
    }

    /// Parses "all" or a comma/plus separated list of channel names.
    static ChannelMask parse(std::string_view text) {
        if (text == "all") return all();
        ChannelMask mask;
        std::size_t start = 0;
        while (start <= text.size()) {
            std::size_t end = text.find_first_of(",+", start);
            if (end == std::string_view::npos) end = text.size();
            const auto name = text.substr(start, end - start);
            if (!name.empty()) mask.bits_ |= bit(parse_channel_kind(name));
            start = end + 1;
        }
        if (mask.empty()) throw ContractViolation("channel mask is empty");
        return mask;
    }

    constexpr bool contains(ChannelKind k) const { return (bits_ & bit(k)) != 0; }
    constexpr bool empty() const { return bits_ == 0; }
    constexpr bool is_subset_of(ChannelMask other) const { return (bits_ & ~other.bits_) == 0; }

    std::vector<ChannelKind> kinds() const {
        std::vector<ChannelKind> out;
        for (ChannelKind k : kAllChannels)
            if (contains(k)) out.push_back(k);
        return out;
    }

    std::string to_string() const {
        if (bits_ == all().bits_) return "all";
        std::string out;
        for (ChannelKind k : kinds()) {
            if (!out.empty()) out += '+';
            out += mhys::to_string(k);
        }
        return out;
    }

    friend constexpr bool operator==(ChannelMask, ChannelMask) = default;

private:
    static constexpr std::uint8_t bit(ChannelKind k) {
        return static_cast<std::uint8_t>(1u << static_cast<unsigned>(k));
    }

    std::uint8_t bits_ = 0;
};

struct SummaryChannel {
    ChannelKind kind = ChannelKind::image_question;
    std::string text;
    SentenceEmbedding sentence;
    TokenEmbedding tokens;

    static SummaryChannel from_text(ChannelKind kind, std::string text, const EmbedderSpec& spec) {
        SummaryChannel ch{kind, std::move(text), {}, {}};
        ch.sentence = embed_sentence(ch.text, spec);
        ch.tokens = embed_tokens(ch.text, spec);
        return ch;
    }
};

struct CorpusItem {
    std::string item_id;
    std::map<ChannelKind, SummaryChannel> channels;

    const SummaryChannel& channel(ChannelKind kind) const {
        auto it = channels.find(kind);
        if (it == channels.end())
            throw IntegrityError("corpus item '" + item_id + "' has no " +
                                 std::string(to_string(kind)) + " channel");
        return it->second;
    }

    static CorpusItem from_texts(std::string id, const std::array<std::string, 3>& texts,
                                 const EmbedderSpec& spec) {
        CorpusItem item{std::move(id), {}};
        for (ChannelKind k : kAllChannels)
            item.channels.emplace(
                k, SummaryChannel::from_text(k, texts[static_cast<std::size_t>(k)], spec));
        return item;
    }
};

using Corpus = std::vector<CorpusItem>;

}  // namespace mhys
