#pragma once

// Deterministic text embedder standing in for pretrained sentence and token
// encoders. Tokens are hashed with FNV-1a 64 into one of `dimension` signed
// buckets, so equal inputs give bit-identical outputs on every platform.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "mhys/errors.hpp"

namespace mhys {

enum class TokenizerRule {
    whitespace_punct_lowercase,
};

inline std::string_view to_string(TokenizerRule rule) {
    switch (rule) {
        case TokenizerRule::whitespace_punct_lowercase:
            return "whitespace-punct-lowercase";
    }
    return "unknown";
}

inline TokenizerRule parse_tokenizer_rule(std::string_view name) {
    if (name == "whitespace-punct-lowercase") return TokenizerRule::whitespace_punct_lowercase;
    throw ContractViolation("unknown tokenizer rule '" + std::string(name) + "'");
}

struct EmbedderSpec {
    std::string name = "hashed-bow";
    std::size_t dimension = 64;
    TokenizerRule tokenizer = TokenizerRule::whitespace_punct_lowercase;

    friend bool operator==(const EmbedderSpec&, const EmbedderSpec&) = default;
};

/// Unit-norm whole-text vector.
struct SentenceEmbedding {
    Eigen::VectorXd vector;

    std::size_t dimension() const { return static_cast<std::size_t>(vector.size()); }
};

/// One unit-norm row per token.
struct TokenEmbedding {
    Eigen::MatrixXd matrix;

    std::size_t token_count() const { return static_cast<std::size_t>(matrix.rows()); }
    std::size_t dimension() const { return static_cast<std::size_t>(matrix.cols()); }
};

/// A query encoded at both granularities.
struct QueryEmbedding {
    SentenceEmbedding sentence;
    TokenEmbedding tokens;
};

inline std::uint64_t fnv1a64(std::string_view bytes) noexcept {
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        hash ^= c;
        hash *= 0x100000001b3ULL;
    }
    return hash;
}

namespace detail {

inline bool is_ascii_space(unsigned char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

inline bool is_ascii_punct(unsigned char c) {
    return (c >= 0x21 && c <= 0x2f) || (c >= 0x3a && c <= 0x40) || (c >= 0x5b && c <= 0x60) ||
           (c >= 0x7b && c <= 0x7e);
}

struct SignedBucket {
    std::size_t index;
    double sign;
};

inline SignedBucket bucket_of(std::string_view token, std::size_t dimension) {
    const std::uint64_t hash = fnv1a64(token);
    return {static_cast<std::size_t>(hash % dimension), (hash >> 63) == 0 ? 1.0 : -1.0};
}

inline void require_dimension(const EmbedderSpec& spec) {
    if (spec.dimension < 2) {
        throw ContractViolation("embedder dimension must be >= 2, got " +
                                std::to_string(spec.dimension));
    }
}

}  // namespace detail

/// Lowercases ASCII letters and splits on ASCII whitespace and punctuation.
/// Bytes outside ASCII are kept inside tokens unchanged.
inline std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> tokens;
    std::string current;
    for (unsigned char c : text) {
        if (detail::is_ascii_space(c) || detail::is_ascii_punct(c)) {
            if (!current.empty()) tokens.push_back(std::move(current));
            current.clear();
            continue;
        }
        if (c >= 'A' && c <= 'Z') c = static_cast<unsigned char>(c - 'A' + 'a');
        current.push_back(static_cast<char>(c));
    }
    if (!current.empty()) tokens.push_back(std::move(current));
    return tokens;
}

/// Hashed bag of words, L2-normalized. A zero sum (empty text, or tokens
/// whose signs cancel) maps to the first basis vector.
inline SentenceEmbedding embed_sentence(std::string_view text, const EmbedderSpec& spec) {
    detail::require_dimension(spec);
    const auto d = static_cast<Eigen::Index>(spec.dimension);
    Eigen::VectorXd v = Eigen::VectorXd::Zero(d);
    for (const auto& token : tokenize(text)) {
        const auto b = detail::bucket_of(token, spec.dimension);
        v[static_cast<Eigen::Index>(b.index)] += b.sign;
    }
    // Entries are small integers, so this sum of squares is exact.
    double sq = 0.0;
    for (Eigen::Index i = 0; i < d; ++i) sq += v[i] * v[i];
    if (sq == 0.0) {
        v.setZero();
        v[0] = 1.0;
        return {std::move(v)};
    }
    const double norm = std::sqrt(sq);
    for (Eigen::Index i = 0; i < d; ++i) v[i] /= norm;
    return {std::move(v)};
}

inline TokenEmbedding embed_tokens(std::string_view text, const EmbedderSpec& spec) {
    detail::require_dimension(spec);
    const auto tokens = tokenize(text);
    const auto d = static_cast<Eigen::Index>(spec.dimension);
    if (tokens.empty()) {
        Eigen::MatrixXd m = Eigen::MatrixXd::Zero(1, d);
        m(0, 0) = 1.0;
        return {std::move(m)};
    }
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(tokens.size()), d);
    for (std::size_t row = 0; row < tokens.size(); ++row) {
        const auto b = detail::bucket_of(tokens[row], spec.dimension);
        m(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(b.index)) = b.sign;
    }
    return {std::move(m)};
}

inline QueryEmbedding embed_query(std::string_view text, const EmbedderSpec& spec) {
    return {embed_sentence(text, spec), embed_tokens(text, spec)};
}

}  // namespace mhys
