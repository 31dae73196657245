#pragma once

// Coarse-to-fine similarity: projected cosine between sentence vectors,
// projected token-by-token cosine matrix reduced by a global max, and the
// fusion of the two into one ranking score.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "mhys/embedding.hpp"
#include "mhys/errors.hpp"

namespace mhys {

namespace detail {

// Kernels sum in index order with plain loops. Eigen's vectorized paths pick
// a summation order from shape and alignment, which can split bit-level ties
// between mathematically equal scores and reorder rankings.
template <class A, class B>
double ordered_dot(const A& a, const B& b) {
    double sum = 0.0;
    for (Eigen::Index i = 0; i < a.size(); ++i) sum += a(i) * b(i);
    return sum;
}

}  // namespace detail

/// x -> weight * x + bias.
struct AffineMap {
    Eigen::MatrixXd weight;
    Eigen::VectorXd bias;

    static AffineMap identity(std::size_t dimension) {
        const auto d = static_cast<Eigen::Index>(dimension);
        return {Eigen::MatrixXd::Identity(d, d), Eigen::VectorXd::Zero(d)};
    }

    std::size_t input_dimension() const { return static_cast<std::size_t>(weight.cols()); }
    std::size_t output_dimension() const { return static_cast<std::size_t>(weight.rows()); }

    Eigen::VectorXd apply(const Eigen::VectorXd& x) const {
        Eigen::VectorXd out(weight.rows());
        apply_to(x, out);
        return out;
    }

    /// Applies the map to every row of `rows`.
    Eigen::MatrixXd apply_rows(const Eigen::MatrixXd& rows) const {
        Eigen::MatrixXd out(rows.rows(), weight.rows());
        for (Eigen::Index t = 0; t < rows.rows(); ++t) {
            auto row = out.row(t);
            apply_to(rows.row(t), row);
        }
        return out;
    }

    /// Embeddings are sparse, so zero inputs are skipped. The surviving terms
    /// are still summed in index order, which gives the same bits as the dense
    /// ordered sum for finite weights.
    template <class X, class Out>
    void apply_to(const X& x, Out& out) const {
        std::vector<Eigen::Index> nonzero;
        nonzero.reserve(static_cast<std::size_t>(x.size()));
        for (Eigen::Index c = 0; c < x.size(); ++c)
            if (x(c) != 0.0) nonzero.push_back(c);
        for (Eigen::Index r = 0; r < weight.rows(); ++r) {
            double sum = 0.0;
            for (Eigen::Index c : nonzero) sum += weight(r, c) * x(c);
            out(r) = bias[r] + sum;
        }
    }

    bool all_finite() const { return weight.allFinite() && bias.allFinite(); }

    friend bool operator==(const AffineMap& a, const AffineMap& b) {
        return a.weight.rows() == b.weight.rows() && a.weight.cols() == b.weight.cols() &&
               a.bias.size() == b.bias.size() && a.weight == b.weight && a.bias == b.bias;
    }
};

/// The four trainable maps: query and summary sides at sentence level,
/// query and summary sides at word level.
struct ProjectionHeads {
    AffineMap sentence_query;
    AffineMap sentence_summary;
    AffineMap word_query;
    AffineMap word_summary;

    static ProjectionHeads identity(std::size_t dimension) {
        return {AffineMap::identity(dimension), AffineMap::identity(dimension),
                AffineMap::identity(dimension), AffineMap::identity(dimension)};
    }

    std::size_t dimension() const { return sentence_query.input_dimension(); }

    /// Throws ShapeError unless every map is square `dimension` x `dimension`
    /// with a matching bias, and ContractViolation on non-finite parameters.
    void validate(std::size_t dimension) const {
        for (const AffineMap* m : {&sentence_query, &sentence_summary, &word_query, &word_summary}) {
            if (m->input_dimension() != dimension)
                throw ShapeError("projection head input", dimension, m->input_dimension());
            if (m->output_dimension() != dimension)
                throw ShapeError("projection head output", dimension, m->output_dimension());
            if (static_cast<std::size_t>(m->bias.size()) != dimension)
                throw ShapeError("projection head bias", dimension,
                                 static_cast<std::size_t>(m->bias.size()));
            if (!m->all_finite())
                throw ContractViolation("projection head holds non-finite parameters");
        }
    }

    friend bool operator==(const ProjectionHeads&, const ProjectionHeads&) = default;
};

/// Rows index query tokens, columns index summary tokens.
struct SimilarityMatrix {
    Eigen::MatrixXd entries;

    std::size_t query_tokens() const { return static_cast<std::size_t>(entries.rows()); }
    std::size_t summary_tokens() const { return static_cast<std::size_t>(entries.cols()); }
};

enum class FusionMode {
    log_on_sentence,
    log_on_word,
    plain_sum,
    sentence_only,
    word_only,
    log_both,
};

inline constexpr FusionMode kAllFusionModes[] = {
    FusionMode::log_on_sentence, FusionMode::log_on_word,  FusionMode::plain_sum,
    FusionMode::sentence_only,   FusionMode::word_only,    FusionMode::log_both,
};

inline std::string_view to_string(FusionMode mode) {
    switch (mode) {
        case FusionMode::log_on_sentence: return "log_on_sentence";
        case FusionMode::log_on_word: return "log_on_word";
        case FusionMode::plain_sum: return "plain_sum";
        case FusionMode::sentence_only: return "sentence_only";
        case FusionMode::word_only: return "word_only";
        case FusionMode::log_both: return "log_both";
    }
    return "unknown";
}

inline FusionMode parse_fusion_mode(std::string_view name) {
    for (FusionMode m : kAllFusionModes)
        if (to_string(m) == name) return m;
    throw ContractViolation("unknown fusion mode '" + std::string(name) + "'");
}

struct FusionConfig {
    FusionMode mode = FusionMode::log_on_sentence;
    double epsilon = 1e-6;

    void validate() const {
        if (!(epsilon > 0.0 && epsilon < 1.0))
            throw ContractViolation("fusion epsilon must lie in (0, 1), got " +
                                    std::to_string(epsilon));
    }
};

namespace detail {

inline constexpr double kDegenerateNorm = 1e-12;

inline double clamp_cosine(double c) { return std::clamp(c, -1.0, 1.0); }

/// Normalizes each row in place; rows below the degenerate norm become zero
/// so that every cosine they take part in is 0.
inline void normalize_rows(Eigen::MatrixXd& rows) {
    for (Eigen::Index r = 0; r < rows.rows(); ++r) {
        const double n = std::sqrt(ordered_dot(rows.row(r), rows.row(r)));
        if (n < kDegenerateNorm)
            rows.row(r).setZero();
        else
            rows.row(r) /= n;
    }
}

inline void require_dimension(const char* what, std::size_t expected, std::size_t actual) {
    if (expected != actual) throw ShapeError(what, expected, actual);
}

}  // namespace detail

/// Query side of both kernels, projected once so a corpus scan does not
/// re-project it for every item.
struct ProjectedQuery {
    Eigen::VectorXd sentence;
    double sentence_norm = 0.0;
    Eigen::MatrixXd unit_tokens;  // projected token rows, normalized
};

inline ProjectedQuery project_query(const SentenceEmbedding& sentence, const TokenEmbedding& tokens,
                                    const ProjectionHeads& heads) {
    detail::require_dimension("query sentence embedding", heads.sentence_query.input_dimension(),
                              sentence.dimension());
    detail::require_dimension("query token embedding", heads.word_query.input_dimension(),
                              tokens.dimension());
    ProjectedQuery p;
    p.sentence = heads.sentence_query.apply(sentence.vector);
    p.sentence_norm = std::sqrt(detail::ordered_dot(p.sentence, p.sentence));
    p.unit_tokens = heads.word_query.apply_rows(tokens.matrix);
    detail::normalize_rows(p.unit_tokens);
    return p;
}

inline ProjectedQuery project_query(const QueryEmbedding& query, const ProjectionHeads& heads) {
    return project_query(query.sentence, query.tokens, heads);
}

inline double sentence_similarity(const ProjectedQuery& query, const SentenceEmbedding& summary,
                                  const ProjectionHeads& heads) {
    detail::require_dimension("summary sentence embedding",
                              heads.sentence_summary.input_dimension(), summary.dimension());
    const Eigen::VectorXd b = heads.sentence_summary.apply(summary.vector);
    detail::require_dimension("projected summary", static_cast<std::size_t>(query.sentence.size()),
                              static_cast<std::size_t>(b.size()));
    const double na = query.sentence_norm;
    const double nb = std::sqrt(detail::ordered_dot(b, b));
    if (na < detail::kDegenerateNorm || nb < detail::kDegenerateNorm) return 0.0;
    return detail::clamp_cosine(detail::ordered_dot(query.sentence, b) / (na * nb));
}

inline double sentence_similarity(const SentenceEmbedding& query, const SentenceEmbedding& summary,
                                  const ProjectionHeads& heads) {
    detail::require_dimension("query sentence embedding", heads.sentence_query.input_dimension(),
                              query.dimension());
    ProjectedQuery p;
    p.sentence = heads.sentence_query.apply(query.vector);
    p.sentence_norm = std::sqrt(detail::ordered_dot(p.sentence, p.sentence));
    return sentence_similarity(p, summary, heads);
}

inline SimilarityMatrix word_similarity_matrix(const ProjectedQuery& query, const TokenEmbedding& summary,
                                               const ProjectionHeads& heads) {
    detail::require_dimension("summary token embedding", heads.word_summary.input_dimension(),
                              summary.dimension());
    const Eigen::MatrixXd& q = query.unit_tokens;
    Eigen::MatrixXd s = heads.word_summary.apply_rows(summary.matrix);
    detail::require_dimension("projected summary tokens", static_cast<std::size_t>(q.cols()),
                              static_cast<std::size_t>(s.cols()));
    detail::normalize_rows(s);
    // Each entry is accumulated over i in ascending order, exactly as
    // ordered_dot would, but the inner loop over query rows vectorizes.
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(q.rows(), s.rows());
    for (Eigen::Index i = 0; i < q.cols(); ++i)
        for (Eigen::Index b = 0; b < s.rows(); ++b) {
            const double sb = s(b, i);
            for (Eigen::Index a = 0; a < q.rows(); ++a) m(a, b) += q(a, i) * sb;
        }
    m = m.unaryExpr([](double c) { return detail::clamp_cosine(c); });
    return {std::move(m)};
}

inline SimilarityMatrix word_similarity_matrix(const TokenEmbedding& query, const TokenEmbedding& summary,
                                               const ProjectionHeads& heads) {
    detail::require_dimension("query token embedding", heads.word_query.input_dimension(),
                              query.dimension());
    ProjectedQuery p;
    p.unit_tokens = heads.word_query.apply_rows(query.matrix);
    detail::normalize_rows(p.unit_tokens);
    return word_similarity_matrix(p, summary, heads);
}

/// Global maximum: max over query tokens, then over summary tokens.
inline double maxpool_relevance(const SimilarityMatrix& m) {
    if (m.entries.size() == 0)
        throw ContractViolation("maxpool_relevance requires a non-empty similarity matrix");
    double best = -std::numeric_limits<double>::infinity();
    for (Eigen::Index col = 0; col < m.entries.cols(); ++col) {
        double column_max = -std::numeric_limits<double>::infinity();
        for (Eigen::Index row = 0; row < m.entries.rows(); ++row)
            column_max = std::max(column_max, m.entries(row, col));
        best = std::max(best, column_max);
    }
    return best;
}

/// ln of the argument clamped to [epsilon, 1].
inline double clamped_log(double x, double epsilon) { return std::log(std::clamp(x, epsilon, 1.0)); }

inline double fuse_scores(double word_score, double sentence_score, const FusionConfig& cfg) {
    switch (cfg.mode) {
        case FusionMode::log_on_sentence:
            return word_score + clamped_log(sentence_score, cfg.epsilon);
        case FusionMode::log_on_word:
            return clamped_log(word_score, cfg.epsilon) + sentence_score;
        case FusionMode::plain_sum:
            return word_score + sentence_score;
        case FusionMode::sentence_only:
            return sentence_score;
        case FusionMode::word_only:
            return word_score;
        case FusionMode::log_both:
            return clamped_log(word_score, cfg.epsilon) + clamped_log(sentence_score, cfg.epsilon);
    }
    return word_score + clamped_log(sentence_score, cfg.epsilon);
}

}  // namespace mhys
