#pragma once

// Test-only reference implementations. They use plain std::vector loops and
// share no code path with the library beyond its public types.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "mhys/mhys.hpp"

namespace oracle {

using Vec = std::vector<double>;
using Mat = std::vector<Vec>;  // row-major

inline Vec to_vec(const Eigen::VectorXd& v) { return Vec(v.data(), v.data() + v.size()); }

inline Mat to_mat(const Eigen::MatrixXd& m) {
    Mat out(static_cast<std::size_t>(m.rows()), Vec(static_cast<std::size_t>(m.cols())));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) out[r][c] = m(r, c);
    return out;
}

struct Affine {
    Mat w;
    Vec b;
    explicit Affine(const mhys::AffineMap& m) : w(to_mat(m.weight)), b(to_vec(m.bias)) {}

    Vec operator()(const Vec& x) const {
        Vec y(w.size());
        for (std::size_t i = 0; i < w.size(); ++i) {
            double acc = b[i];
            for (std::size_t j = 0; j < x.size(); ++j) acc += w[i][j] * x[j];
            y[i] = acc;
        }
        return y;
    }
};

inline double dot(const Vec& a, const Vec& b) {
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double cosine(const Vec& a, const Vec& b) {
    const double na = std::sqrt(dot(a, a)), nb = std::sqrt(dot(b, b));
    if (na < 1e-12 || nb < 1e-12) return 0.0;
    return std::clamp(dot(a, b) / (na * nb), -1.0, 1.0);
}

inline double sentence_similarity(const Vec& q, const Vec& s, const mhys::ProjectionHeads& h) {
    return cosine(Affine(h.sentence_query)(q), Affine(h.sentence_summary)(s));
}

inline Mat word_matrix(const Mat& q, const Mat& s, const mhys::ProjectionHeads& h) {
    const Affine gq(h.word_query), gv(h.word_summary);
    Mat out(q.size(), Vec(s.size()));
    for (std::size_t a = 0; a < q.size(); ++a)
        for (std::size_t b = 0; b < s.size(); ++b) out[a][b] = cosine(gq(q[a]), gv(s[b]));
    return out;
}

inline double nested_max(const Mat& m) {
    double best = -INFINITY;
    for (const auto& row : m)
        for (double v : row)
            if (v > best) best = v;
    return best;
}

inline double clamped_ln(double x, double eps) {
    if (x < eps) x = eps;
    if (x > 1.0) x = 1.0;
    return std::log(x);
}

inline double fuse(double word, double sent, mhys::FusionMode mode, double eps) {
    using M = mhys::FusionMode;
    if (mode == M::log_on_sentence) return word + clamped_ln(sent, eps);
    if (mode == M::log_on_word) return clamped_ln(word, eps) + sent;
    if (mode == M::plain_sum) return word + sent;
    if (mode == M::sentence_only) return sent;
    if (mode == M::word_only) return word;
    return clamped_ln(word, eps) + clamped_ln(sent, eps);
}

/// Unfused (word, sentence) scores per channel, in corpus order.
using RawScores = std::map<mhys::ChannelKind, std::vector<std::pair<double, double>>>;

inline RawScores raw_scores(const std::string& query_text, const std::vector<mhys::CorpusItem>& corpus,
                            const mhys::EmbedderSpec& spec, const mhys::ProjectionHeads& heads) {
    const Vec qs = to_vec(mhys::embed_sentence(query_text, spec).vector);
    const Mat qt = to_mat(mhys::embed_tokens(query_text, spec).matrix);
    RawScores out;
    for (mhys::ChannelKind kind : mhys::kAllChannels)
        for (const auto& item : corpus) {
            const auto& ch = item.channels.at(kind);
            out[kind].emplace_back(nested_max(word_matrix(qt, to_mat(ch.tokens.matrix), heads)),
                                   sentence_similarity(qs, to_vec(ch.sentence.vector), heads));
        }
    return out;
}

/// Fuse, full sort, truncate each enabled channel, then union by best score.
inline std::vector<std::string> reference_rank(const RawScores& raw, const std::vector<mhys::CorpusItem>& corpus,
                                               mhys::FusionMode mode, double eps, std::size_t k,
                                               mhys::ChannelMask mask) {
    std::map<std::string, double> best;
    for (mhys::ChannelKind kind : mhys::kAllChannels) {
        if (!mask.contains(kind)) continue;
        std::vector<std::pair<double, std::string>> scored;
        for (std::size_t i = 0; i < corpus.size(); ++i) {
            const auto [w, s] = raw.at(kind)[i];
            scored.emplace_back(fuse(w, s, mode, eps), corpus[i].item_id);
        }
        std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
            return a.first != b.first ? a.first > b.first : a.second < b.second;
        });
        for (std::size_t i = 0; i < std::min(k, scored.size()); ++i) {
            auto it = best.find(scored[i].second);
            if (it == best.end()) best[scored[i].second] = scored[i].first;
            else it->second = std::max(it->second, scored[i].first);
        }
    }
    std::vector<std::pair<double, std::string>> merged;
    for (const auto& [id, s] : best) merged.emplace_back(s, id);
    std::sort(merged.begin(), merged.end(), [](const auto& a, const auto& b) {
        return a.first != b.first ? a.first > b.first : a.second < b.second;
    });
    std::vector<std::string> ids;
    for (auto& m : merged) ids.push_back(m.second);
    return ids;
}

/// Straight-line retrieval from query text.
inline std::vector<std::string> reference_retrieve(const std::string& query_text,
                                                   const std::vector<mhys::CorpusItem>& corpus,
                                                   const mhys::EmbedderSpec& spec,
                                                   const mhys::ProjectionHeads& heads, mhys::FusionMode mode,
                                                   double eps, std::size_t k, mhys::ChannelMask mask) {
    return reference_rank(raw_scores(query_text, corpus, spec, heads), corpus, mode, eps, k, mask);
}

/// Contrastive loss written directly from the formula, on pooled features.
inline double contrastive_loss(const std::vector<Vec>& pooled_q, const std::vector<Vec>& pooled_s,
                               std::size_t anchor, const mhys::ProjectionHeads& h, bool as_written) {
    const Affine gq(h.word_query), gv(h.word_summary);
    std::vector<Vec> u, v;
    for (const auto& x : pooled_q) u.push_back(gq(x));
    for (const auto& y : pooled_s) v.push_back(gv(y));
    auto cos = [](const Vec& a, const Vec& b) { return dot(a, b) / std::sqrt(dot(a, a) * dot(b, b)); };
    const double pos = std::exp(cos(u[anchor], v[anchor]));
    double neg = 0.0;
    for (std::size_t b = 0; b < u.size(); ++b) {
        if (b == anchor) continue;
        neg += std::exp(as_written ? cos(u[b], v[b]) : cos(u[anchor], v[b]));
    }
    return -std::log(pos / (pos + neg));
}

}  // namespace oracle

namespace testing_support {

inline Eigen::MatrixXd random_matrix(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols, double scale = 1.0) {
    std::uniform_real_distribution<double> u(-scale, scale);
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = u(rng);
    return m;
}

inline Eigen::VectorXd random_vector(std::mt19937_64& rng, Eigen::Index n, double scale = 1.0) {
    return random_matrix(rng, n, 1, scale).col(0);
}

inline mhys::AffineMap random_affine(std::mt19937_64& rng, std::size_t d) {
    const auto n = static_cast<Eigen::Index>(d);
    return {Eigen::MatrixXd::Identity(n, n) + random_matrix(rng, n, n, 0.5), random_vector(rng, n, 0.2)};
}

inline mhys::ProjectionHeads random_heads(std::uint64_t seed, std::size_t d) {
    std::mt19937_64 rng(seed);
    return {random_affine(rng, d), random_affine(rng, d), random_affine(rng, d), random_affine(rng, d)};
}

inline Eigen::MatrixXd unit_rows(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index d) {
    Eigen::MatrixXd m = random_matrix(rng, rows, d);
    for (Eigen::Index r = 0; r < rows; ++r) m.row(r).normalize();
    return m;
}

}  // namespace testing_support

namespace testing_support {

/// |a - n| / max(|a|, |n|, 1e-6). The floor keeps entries whose true value
/// is ~0 from turning finite-difference roundoff (~1e-11) into a large ratio.
inline double relative_error(double analytic, double numeric) {
    const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
    return std::abs(analytic - numeric) / scale;
}

struct GradCheck {
    double worst = 0.0;
    std::size_t parameters = 0;
};

/// Central differences of the oracle loss against the analytic gradient,
/// for every word-level weight and bias.
inline GradCheck check_gradient(const mhys::ContrastiveBatch& pooled, std::size_t anchor,
                                const mhys::ProjectionHeads& heads, mhys::ContrastiveMode mode,
                                double step = 1e-5) {
    std::vector<oracle::Vec> qs, ss;
    for (const auto& p : pooled.pairs) {
        qs.push_back(oracle::to_vec(p.query));
        ss.push_back(oracle::to_vec(p.summary));
    }
    const bool as_written = mode == mhys::ContrastiveMode::as_written;
    const auto g = mhys::contrastive_loss_grad(pooled, anchor, heads, mode);
    GradCheck out;
    auto probe = [&](auto select_param, double analytic) {
        auto plus = heads, minus = heads;
        select_param(plus) += step;
        select_param(minus) -= step;
        const double numeric = (oracle::contrastive_loss(qs, ss, anchor, plus, as_written) -
                                oracle::contrastive_loss(qs, ss, anchor, minus, as_written)) /
                               (2 * step);
        out.worst = std::max(out.worst, relative_error(analytic, numeric));
        ++out.parameters;
    };
    const auto d = heads.word_query.weight.rows();
    for (Eigen::Index r = 0; r < d; ++r) {
        for (Eigen::Index c = 0; c < d; ++c) {
            probe([&](mhys::ProjectionHeads& h) -> double& { return h.word_query.weight(r, c); }, g.query.weight(r, c));
            probe([&](mhys::ProjectionHeads& h) -> double& { return h.word_summary.weight(r, c); }, g.summary.weight(r, c));
        }
        probe([&](mhys::ProjectionHeads& h) -> double& { return h.word_query.bias[r]; }, g.query.bias[r]);
        probe([&](mhys::ProjectionHeads& h) -> double& { return h.word_summary.bias[r]; }, g.summary.bias[r]);
    }
    return out;
}

inline mhys::ContrastiveBatch random_batch(std::mt19937_64& rng, std::size_t pairs, std::size_t d) {
    mhys::ContrastiveBatch b;
    for (std::size_t i = 0; i < pairs; ++i)
        b.pairs.push_back({random_vector(rng, static_cast<Eigen::Index>(d)), random_vector(rng, static_cast<Eigen::Index>(d))});
    return b;
}

}  // namespace testing_support
