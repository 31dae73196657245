#pragma once

// Seeded synthetic corpora. Each query owns a disjoint set of key tokens and
// detail tokens. Its gold items repeat the key tokens in question channels
// (with per-channel probability) and carry one key token plus the detail
// tokens inside a long description. Everything else is filler drawn from
// the remaining vocabulary, so gold items missed by one channel are often
// caught by another.

#include <array>
#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "mhys/corpus.hpp"
#include "mhys/corpus_io.hpp"
#include "mhys/errors.hpp"

namespace mhys {

struct ChannelSignal {
    double image_question = 0.9;
    double scene_question = 0.9;
    double description = 0.6;

    double rate(ChannelKind k) const {
        switch (k) {
            case ChannelKind::image_question: return image_question;
            case ChannelKind::scene_question: return scene_question;
            case ChannelKind::description: return description;
        }
        return 0.0;
    }
};

struct SyntheticSpec {
    std::uint64_t seed = 7;
    std::size_t corpus_size = 200;
    std::size_t relevant_per_query = 5;
    std::size_t query_count = 20;
    std::size_t vocabulary_size = 600;
    std::size_t key_tokens_per_query = 3;
    std::size_t detail_tokens_per_query = 3;
    ChannelSignal channel_signal;
    std::size_t dimension = 64;

    /// Smallest filler pool the generator accepts.
    static constexpr std::size_t kMinFiller = 32;

    void validate() const {
        for (ChannelKind k : kAllChannels) {
            const double r = channel_signal.rate(k);
            if (!(r >= 0.0 && r <= 1.0))
                throw ContractViolation("channel signal for " + std::string(to_string(k)) + " must lie in [0, 1]");
        }
        if (relevant_per_query < 1) throw ContractViolation("relevant_per_query must be >= 1");
        if (corpus_size < relevant_per_query) throw ContractViolation("corpus_size must be >= relevant_per_query");
        if (query_count < 1) throw ContractViolation("query_count must be >= 1");
        if (query_count * relevant_per_query > corpus_size)
            throw ContractViolation("query_count * relevant_per_query exceeds corpus_size");
        if (key_tokens_per_query < 1) throw ContractViolation("key_tokens_per_query must be >= 1");
        if (dimension < 2) throw ContractViolation("dimension must be >= 2");
        const std::size_t reserved = query_count * (key_tokens_per_query + detail_tokens_per_query);
        if (vocabulary_size < reserved + kMinFiller)
            throw ContractViolation("vocabulary_size must be >= " + std::to_string(reserved + kMinFiller) +
                                    " for this query layout");
        if (vocabulary_size > 8000) throw ContractViolation("vocabulary_size must be <= 8000");
    }
};

struct SyntheticDataset {
    EmbedderSpec spec;
    Corpus items;
    std::vector<QueryRecord> queries;
};

namespace detail {

/// Pronounceable pseudo-word for index < 8000 (three syllables).
inline std::string synthetic_word(std::size_t index) {
    static constexpr std::array<const char*, 20> syllables = {
        "ba", "ke", "lo", "mi", "nu", "pa", "re", "si", "to", "vu",
        "da", "fe", "go", "hi", "ju", "ra", "te", "zo", "ny", "wo"};
    return std::string(syllables[index % 20]) + syllables[(index / 20) % 20] + syllables[(index / 400) % 20];
}

class SyntheticRng {
public:
    explicit SyntheticRng(std::uint64_t seed) : engine_(seed) {}

    std::size_t below(std::size_t n) { return static_cast<std::size_t>(engine_() % n); }

    bool bernoulli(double p) {
        const double u = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
        return u < p;
    }

    template <class T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[below(i)]);
    }

    template <class T>
    const T& pick(const std::vector<T>& v) {
        return v[below(v.size())];
    }

private:
    std::mt19937_64 engine_;
};

inline std::string join_words(const std::vector<std::string>& words, char terminator) {
    std::string out;
    for (const auto& w : words) {
        if (!out.empty()) out += ' ';
        out += w;
    }
    out += terminator;
    return out;
}

}  // namespace detail

inline SyntheticDataset generate_synthetic(const SyntheticSpec& spec) {
    spec.validate();
    detail::SyntheticRng rng(spec.seed);

    const std::vector<std::string> question_words = {"what", "which", "where", "how", "who"};
    const std::vector<std::string> auxiliaries = {"is", "are", "does", "can"};

    std::vector<std::size_t> word_ids(spec.vocabulary_size);
    for (std::size_t i = 0; i < word_ids.size(); ++i) word_ids[i] = i;
    rng.shuffle(word_ids);
    std::size_t cursor = 0;
    auto take = [&](std::size_t n) {
        std::vector<std::string> out;
        for (std::size_t i = 0; i < n; ++i) out.push_back(detail::synthetic_word(word_ids[cursor++]));
        return out;
    };

    std::vector<std::vector<std::string>> keys, details;
    for (std::size_t q = 0; q < spec.query_count; ++q) {
        keys.push_back(take(spec.key_tokens_per_query));
        details.push_back(take(spec.detail_tokens_per_query));
    }
    const std::vector<std::string> filler = take(spec.vocabulary_size - cursor);

    const std::size_t width = std::to_string(spec.corpus_size - 1).size();
    auto item_name = [&](std::size_t i) {
        std::string n = std::to_string(i);
        return "img" + std::string(width - n.size(), '0') + n;
    };

    std::vector<std::size_t> order(spec.corpus_size);
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng.shuffle(order);
    constexpr std::size_t kNoQuery = static_cast<std::size_t>(-1);
    std::vector<std::size_t> owner(spec.corpus_size, kNoQuery);

    SyntheticDataset out;
    out.spec.dimension = spec.dimension;
    for (std::size_t q = 0; q < spec.query_count; ++q) {
        QueryRecord rec;
        const std::string qw = std::to_string(q);
        rec.query_id = "q" + std::string(width > qw.size() ? width - qw.size() : 0, '0') + qw;
        std::vector<std::string> words = {rng.pick(question_words), rng.pick(auxiliaries), "the"};
        for (const auto& k : keys[q]) words.push_back(k);
        rec.question = detail::join_words(words, '?');
        for (std::size_t r = 0; r < spec.relevant_per_query; ++r) {
            const std::size_t item = order[q * spec.relevant_per_query + r];
            owner[item] = q;
        }
        for (std::size_t i = 0; i < spec.corpus_size; ++i)
            if (owner[i] == q) rec.relevant.push_back(item_name(i));
        if (!details[q].empty()) rec.answer = details[q].front();
        out.queries.push_back(std::move(rec));
    }

    auto fillers = [&](std::size_t n) {
        std::vector<std::string> w;
        for (std::size_t i = 0; i < n; ++i) w.push_back(rng.pick(filler));
        return w;
    };
    auto question_text = [&](std::vector<std::string> content, const char* article) {
        rng.shuffle(content);
        std::vector<std::string> words = {rng.pick(question_words), rng.pick(auxiliaries), article};
        words.insert(words.end(), content.begin(), content.end());
        return detail::join_words(words, '?');
    };
    auto description_text = [&](std::vector<std::string> content) {
        rng.shuffle(content);
        std::vector<std::string> words = {"a"};
        const auto lead = fillers(2);
        words.insert(words.end(), lead.begin(), lead.end());
        words.push_back("with");
        words.push_back("the");
        for (std::size_t i = 0; i < content.size(); ++i) {
            if (i > 0 && i + 1 == content.size()) words.push_back("and");
            words.push_back(content[i]);
        }
        words.push_back("in");
        words.push_back("the");
        const auto tail = fillers(3);
        words.insert(words.end(), tail.begin(), tail.end());
        return detail::join_words(words, '.');
    };

    for (std::size_t i = 0; i < spec.corpus_size; ++i) {
        const std::size_t q = owner[i];
        std::array<std::string, 3> texts;
        const bool gold = q != kNoQuery;

        if (gold && rng.bernoulli(spec.channel_signal.image_question)) {
            auto c = keys[q];
            c.push_back(rng.pick(filler));
            texts[0] = question_text(std::move(c), "the");
        } else {
            texts[0] = question_text(fillers(spec.key_tokens_per_query + 1), "the");
        }

        if (gold && rng.bernoulli(spec.channel_signal.scene_question)) {
            auto c = keys[q];
            c.push_back(rng.pick(filler));
            c.push_back(rng.pick(filler));
            texts[1] = question_text(std::move(c), "a");
        } else {
            texts[1] = question_text(fillers(spec.key_tokens_per_query + 2), "a");
        }

        if (gold && rng.bernoulli(spec.channel_signal.description)) {
            std::vector<std::string> c = details[q];
            c.push_back(rng.pick(keys[q]));
            const auto extra = fillers(2);
            c.insert(c.end(), extra.begin(), extra.end());
            texts[2] = description_text(std::move(c));
        } else {
            texts[2] = description_text(fillers(spec.detail_tokens_per_query + 3));
        }

        out.items.push_back(CorpusItem::from_texts(item_name(i), texts, out.spec));
    }
    return out;
}

}  // namespace mhys
