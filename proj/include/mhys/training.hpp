#pragma once

// Contrastive alignment of the word-level projection heads, plus the
// answer-token cross-entropy used when a decoder is attached.
//
// Query and summary features are the mean of their token rows, projected by
// word_query / word_summary. Only the word-level heads receive gradients.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "mhys/corpus.hpp"
#include "mhys/errors.hpp"
#include "mhys/similarity.hpp"

namespace mhys {

enum class ContrastiveMode {
    /// Negatives are the other samples' own pair cosines cos(q_b, s_b).
    as_written,
    /// Negatives are cross pairs cos(q_i, s_b).
    standard_infonce,
};

inline std::string_view to_string(ContrastiveMode mode) {
    return mode == ContrastiveMode::as_written ? "as_written" : "standard_infonce";
}

inline ContrastiveMode parse_contrastive_mode(std::string_view name) {
    if (name == "as_written") return ContrastiveMode::as_written;
    if (name == "standard_infonce") return ContrastiveMode::standard_infonce;
    throw ContractViolation("unknown contrastive loss mode '" + std::string(name) + "'");
}

enum class OptimizerKind { adamw, sgd };

inline std::string_view to_string(OptimizerKind k) { return k == OptimizerKind::adamw ? "adamw" : "sgd"; }

inline OptimizerKind parse_optimizer(std::string_view name) {
    if (name == "adamw") return OptimizerKind::adamw;
    if (name == "sgd") return OptimizerKind::sgd;
    throw ContractViolation("unknown optimizer '" + std::string(name) + "'");
}

struct FeaturePair {
    Eigen::VectorXd query;
    Eigen::VectorXd summary;
};

/// Sample i is the positive pair for anchor i; all other samples act as
/// negatives for it.
struct ContrastiveBatch {
    std::vector<FeaturePair> pairs;

    std::size_t size() const { return pairs.size(); }
};

struct AffineGradient {
    Eigen::MatrixXd weight;
    Eigen::VectorXd bias;

    static AffineGradient zero(std::size_t d) {
        const auto n = static_cast<Eigen::Index>(d);
        return {Eigen::MatrixXd::Zero(n, n), Eigen::VectorXd::Zero(n)};
    }

    AffineGradient& operator+=(const AffineGradient& o) {
        weight += o.weight;
        bias += o.bias;
        return *this;
    }
    AffineGradient& operator*=(double s) {
        weight *= s;
        bias *= s;
        return *this;
    }
};

/// Gradient with respect to the word-level heads.
struct WordHeadGradient {
    AffineGradient query;
    AffineGradient summary;

    static WordHeadGradient zero(std::size_t d) { return {AffineGradient::zero(d), AffineGradient::zero(d)}; }

    WordHeadGradient& operator+=(const WordHeadGradient& o) {
        query += o.query;
        summary += o.summary;
        return *this;
    }
    WordHeadGradient& operator*=(double s) {
        query *= s;
        summary *= s;
        return *this;
    }

    double max_abs() const {
        return std::max({query.weight.cwiseAbs().maxCoeff(), query.bias.cwiseAbs().maxCoeff(),
                         summary.weight.cwiseAbs().maxCoeff(), summary.bias.cwiseAbs().maxCoeff()});
    }
};

struct LossAndGradient {
    double loss = 0.0;
    WordHeadGradient gradient;
};

namespace detail {

inline constexpr double kFeatureNormFloor = 1e-12;

inline double checked_norm(const Eigen::VectorXd& v, const char* what) {
    const double n = v.norm();
    if (!(n >= kFeatureNormFloor))
        throw ContractViolation(std::string("zero-norm ") + what + " feature in contrastive batch");
    return n;
}

inline double cosine(const Eigen::VectorXd& a, double na, const Eigen::VectorXd& b, double nb) {
    return a.dot(b) / (na * nb);
}

/// d cos(a, b) / d a.
inline Eigen::VectorXd cosine_grad(const Eigen::VectorXd& a, double na, const Eigen::VectorXd& b,
                                   double nb, double cos_ab) {
    return b / (na * nb) - (cos_ab / (na * na)) * a;
}

inline double log_sum_exp(std::span<const double> z) {
    const double m = *std::max_element(z.begin(), z.end());
    double s = 0.0;
    for (double v : z) s += std::exp(v - m);
    return m + std::log(s);
}

/// Logits for one anchor: entry b is the positive when b == anchor.
inline std::vector<double> anchor_logits(std::span<const Eigen::VectorXd> u, std::span<const double> nu,
                                         std::span<const Eigen::VectorXd> v, std::span<const double> nv,
                                         std::size_t anchor, ContrastiveMode mode) {
    std::vector<double> z(u.size());
    for (std::size_t b = 0; b < u.size(); ++b) {
        const std::size_t qi = mode == ContrastiveMode::as_written ? b : anchor;
        z[b] = cosine(u[qi], nu[qi], v[b], nv[b]);
    }
    return z;
}

struct ProjectedBatch {
    std::vector<Eigen::VectorXd> u, v;
    std::vector<double> nu, nv;
};

inline ProjectedBatch normed(std::vector<Eigen::VectorXd> u, std::vector<Eigen::VectorXd> v) {
    ProjectedBatch p{std::move(u), std::move(v), {}, {}};
    for (const auto& x : p.u) p.nu.push_back(checked_norm(x, "query"));
    for (const auto& x : p.v) p.nv.push_back(checked_norm(x, "summary"));
    return p;
}

inline double anchor_loss(const ProjectedBatch& p, std::size_t anchor, ContrastiveMode mode) {
    const auto z = anchor_logits(p.u, p.nu, p.v, p.nv, anchor, mode);
    return std::max(0.0, log_sum_exp(z) - z[anchor]);
}

/// Adds scale * dL_anchor/du_b and dL_anchor/dv_b into gu / gv.
inline double accumulate_anchor(const ProjectedBatch& p, std::size_t anchor, ContrastiveMode mode,
                                double scale, std::vector<Eigen::VectorXd>& gu,
                                std::vector<Eigen::VectorXd>& gv) {
    const auto z = anchor_logits(p.u, p.nu, p.v, p.nv, anchor, mode);
    const double lse = log_sum_exp(z);
    for (std::size_t b = 0; b < z.size(); ++b) {
        const double dz = (std::exp(z[b] - lse) - (b == anchor ? 1.0 : 0.0)) * scale;
        const std::size_t qi = mode == ContrastiveMode::as_written ? b : anchor;
        gu[qi] += dz * cosine_grad(p.u[qi], p.nu[qi], p.v[b], p.nv[b], z[b]);
        gv[b] += dz * cosine_grad(p.v[b], p.nv[b], p.u[qi], p.nu[qi], z[b]);
    }
    return std::max(0.0, lse - z[anchor]);
}

inline void require_batch(const ContrastiveBatch& batch, std::size_t anchor) {
    if (batch.pairs.empty()) throw ContractViolation("contrastive batch is empty");
    if (anchor >= batch.pairs.size())
        throw ContractViolation("anchor index " + std::to_string(anchor) + " outside batch of " +
                                std::to_string(batch.pairs.size()));
    for (const auto& pair : batch.pairs)
        if (!pair.query.allFinite() || !pair.summary.allFinite())
            throw ContractViolation("contrastive batch holds non-finite features");
}

inline ProjectedBatch project(const ContrastiveBatch& pooled, const ProjectionHeads& heads) {
    const std::size_t d = heads.word_query.input_dimension();
    std::vector<Eigen::VectorXd> u, v;
    for (const auto& pair : pooled.pairs) {
        if (static_cast<std::size_t>(pair.query.size()) != d)
            throw ShapeError("pooled query feature", d, static_cast<std::size_t>(pair.query.size()));
        if (static_cast<std::size_t>(pair.summary.size()) != heads.word_summary.input_dimension())
            throw ShapeError("pooled summary feature", heads.word_summary.input_dimension(),
                             static_cast<std::size_t>(pair.summary.size()));
        u.push_back(heads.word_query.apply(pair.query));
        v.push_back(heads.word_summary.apply(pair.summary));
    }
    return normed(std::move(u), std::move(v));
}

inline WordHeadGradient chain_to_heads(const ContrastiveBatch& pooled, const ProjectionHeads& heads,
                                       const std::vector<Eigen::VectorXd>& gu,
                                       const std::vector<Eigen::VectorXd>& gv) {
    auto g = WordHeadGradient::zero(heads.word_query.input_dimension());
    for (std::size_t b = 0; b < pooled.pairs.size(); ++b) {
        g.query.weight.noalias() += gu[b] * pooled.pairs[b].query.transpose();
        g.query.bias += gu[b];
        g.summary.weight.noalias() += gv[b] * pooled.pairs[b].summary.transpose();
        g.summary.bias += gv[b];
    }
    return g;
}

}  // namespace detail

/// Loss for one anchor on features that are already projected.
inline double contrastive_loss(const ContrastiveBatch& projected, std::size_t anchor,
                               ContrastiveMode mode) {
    detail::require_batch(projected, anchor);
    std::vector<Eigen::VectorXd> u, v;
    for (const auto& pair : projected.pairs) {
        u.push_back(pair.query);
        v.push_back(pair.summary);
    }
    return detail::anchor_loss(detail::normed(std::move(u), std::move(v)), anchor, mode);
}

/// Applies word_query / word_summary to pooled features.
inline ContrastiveBatch project_batch(const ContrastiveBatch& pooled, const ProjectionHeads& heads) {
    ContrastiveBatch out;
    for (const auto& pair : pooled.pairs)
        out.pairs.push_back({heads.word_query.apply(pair.query), heads.word_summary.apply(pair.summary)});
    return out;
}

/// Gradient of one anchor's loss with respect to the word-level heads.
inline WordHeadGradient contrastive_loss_grad(const ContrastiveBatch& pooled, std::size_t anchor,
                                              const ProjectionHeads& heads, ContrastiveMode mode) {
    detail::require_batch(pooled, anchor);
    const auto p = detail::project(pooled, heads);
    const auto d = static_cast<Eigen::Index>(heads.word_query.output_dimension());
    std::vector<Eigen::VectorXd> gu(pooled.size(), Eigen::VectorXd::Zero(d));
    std::vector<Eigen::VectorXd> gv(pooled.size(), Eigen::VectorXd::Zero(d));
    detail::accumulate_anchor(p, anchor, mode, 1.0, gu, gv);
    return detail::chain_to_heads(pooled, heads, gu, gv);
}

/// Mean loss over every anchor of the batch, with its gradient.
inline LossAndGradient batch_loss_and_grad(const ContrastiveBatch& pooled, const ProjectionHeads& heads,
                                           ContrastiveMode mode) {
    detail::require_batch(pooled, 0);
    const auto p = detail::project(pooled, heads);
    const auto d = static_cast<Eigen::Index>(heads.word_query.output_dimension());
    std::vector<Eigen::VectorXd> gu(pooled.size(), Eigen::VectorXd::Zero(d));
    std::vector<Eigen::VectorXd> gv(pooled.size(), Eigen::VectorXd::Zero(d));
    const double scale = 1.0 / static_cast<double>(pooled.size());
    double loss = 0.0;
    for (std::size_t i = 0; i < pooled.size(); ++i)
        loss += detail::accumulate_anchor(p, i, mode, scale, gu, gv);
    return {loss * scale, detail::chain_to_heads(pooled, heads, gu, gv)};
}

/// Mean loss over every anchor, without the gradient.
inline double batch_loss(const ContrastiveBatch& pooled, const ProjectionHeads& heads,
                         ContrastiveMode mode) {
    detail::require_batch(pooled, 0);
    const auto p = detail::project(pooled, heads);
    double loss = 0.0;
    for (std::size_t i = 0; i < pooled.size(); ++i) loss += detail::anchor_loss(p, i, mode);
    return loss / static_cast<double>(pooled.size());
}

/// Row mean of a token matrix.
inline Eigen::VectorXd mean_pool(const TokenEmbedding& tokens) {
    return tokens.matrix.colwise().mean().transpose();
}

struct TrainConfig {
    double learning_rate = 1e-4;
    std::size_t batch_size = 100;
    std::size_t epochs = 20;
    OptimizerKind optimizer = OptimizerKind::adamw;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double weight_decay = 0.01;
    double adam_epsilon = 1e-8;
    ContrastiveMode loss_mode = ContrastiveMode::as_written;
    /// Channel whose tokens form the summary-side feature.
    ChannelKind summary_channel = ChannelKind::image_question;
    std::uint64_t seed = 0;

    void validate() const {
        if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
            throw ContractViolation("learning rate must be finite and >= 0");
        if (epochs < 1) throw ContractViolation("epochs must be >= 1");
        if (batch_size < 1) throw ContractViolation("batch size must be >= 1");
    }
};

struct TrainingExample {
    QueryEmbedding query;
    std::string positive_item_id;
};

struct TrainResult {
    ProjectionHeads heads;
    /// Mean per-sample loss of each epoch.
    std::vector<double> loss_history;
};

namespace detail {

struct AdamMoments {
    Eigen::MatrixXd m_w, v_w;
    Eigen::VectorXd m_b, v_b;

    explicit AdamMoments(std::size_t d)
        : m_w(Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d))),
          v_w(m_w), m_b(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d))), v_b(m_b) {}
};

template <class Param, class Moment>
void adamw_update(Param& theta, const Param& grad, Moment& m, Moment& v, const TrainConfig& cfg,
                  double bias1, double bias2) {
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * grad;
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * grad.cwiseProduct(grad);
    const auto m_hat = m / bias1;
    const auto v_hat = v / bias2;
    theta -= cfg.learning_rate *
             (m_hat.cwiseQuotient((v_hat.array().sqrt() + cfg.adam_epsilon).matrix()) +
              cfg.weight_decay * theta);
}

inline void optimizer_step(AffineMap& map, const AffineGradient& g, AdamMoments& state,
                           const TrainConfig& cfg, std::size_t step) {
    if (cfg.optimizer == OptimizerKind::sgd) {
        map.weight -= cfg.learning_rate * g.weight;
        map.bias -= cfg.learning_rate * g.bias;
        return;
    }
    const double bias1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
    const double bias2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
    adamw_update(map.weight, g.weight, state.m_w, state.v_w, cfg, bias1, bias2);
    adamw_update(map.bias, g.bias, state.m_b, state.v_b, cfg, bias1, bias2);
}

/// Fisher-Yates with a fixed engine so orderings match across standard libraries.
inline void shuffle_indices(std::vector<std::size_t>& idx, std::mt19937_64& rng) {
    for (std::size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[rng() % i]);
}

}  // namespace detail

/// Trains the word-level heads with minibatch contrastive loss. Each epoch
/// visits the dataset in a seeded random order.
inline TrainResult train_heads(std::span<const TrainingExample> dataset,
                               std::span<const CorpusItem> corpus, ProjectionHeads initial,
                               const TrainConfig& cfg) {
    cfg.validate();
    if (dataset.empty()) throw ContractViolation("training dataset is empty");
    const std::size_t d = initial.dimension();
    initial.validate(d);

    std::unordered_map<std::string_view, const CorpusItem*> by_id;
    for (const auto& item : corpus) by_id.emplace(item.item_id, &item);

    ContrastiveBatch pooled_all;
    for (const auto& ex : dataset) {
        auto it = by_id.find(ex.positive_item_id);
        if (it == by_id.end())
            throw IntegrityError("training example references unknown item '" + ex.positive_item_id + "'");
        pooled_all.pairs.push_back(
            {mean_pool(ex.query.tokens), mean_pool(it->second->channel(cfg.summary_channel).tokens)});
    }

    TrainResult result{std::move(initial), {}};
    detail::AdamMoments query_state(d), summary_state(d);
    std::mt19937_64 rng(cfg.seed);
    std::vector<std::size_t> order(dataset.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::size_t step = 0;

    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        detail::shuffle_indices(order, rng);
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t end = std::min(order.size(), start + cfg.batch_size);
            ContrastiveBatch batch;
            for (std::size_t i = start; i < end; ++i) batch.pairs.push_back(pooled_all.pairs[order[i]]);
            ++step;
            const auto lg = batch_loss_and_grad(batch, result.heads, cfg.loss_mode);
            if (!std::isfinite(lg.loss) || !std::isfinite(lg.gradient.max_abs()))
                throw TrainingError(epoch, step, "non-finite loss or gradient");
            epoch_loss += lg.loss * static_cast<double>(batch.size());
            detail::optimizer_step(result.heads.word_query, lg.gradient.query, query_state, cfg, step);
            detail::optimizer_step(result.heads.word_summary, lg.gradient.summary, summary_state, cfg, step);
            if (!result.heads.word_query.all_finite() || !result.heads.word_summary.all_finite())
                throw TrainingError(epoch, step, "non-finite parameters after update");
        }
        result.loss_history.push_back(epoch_loss / static_cast<double>(order.size()));
    }
    return result;
}

/// Per-token answer probabilities (rows) against one-hot targets.
struct AnswerDistribution {
    Eigen::MatrixXd probs;
    Eigen::MatrixXd target;
};

/// Cross-entropy summed over samples, positions and vocabulary, divided by
/// N * L * |W|. ln is evaluated at max(prob, 1e-12).
inline double vqa_cross_entropy(std::span<const AnswerDistribution> samples) {
    if (samples.empty()) throw ContractViolation("cross-entropy needs at least one sample");
    const Eigen::Index length = samples.front().probs.rows();
    const Eigen::Index vocab = samples.front().probs.cols();
    if (length == 0 || vocab == 0) throw ShapeError("answer distribution is empty");
    double total = 0.0;
    for (const auto& s : samples) {
        if (s.probs.rows() != length || s.probs.cols() != vocab)
            throw ShapeError("answer distributions must share shape (" + std::to_string(length) + ", " +
                             std::to_string(vocab) + ")");
        if (s.target.rows() != s.probs.rows() || s.target.cols() != s.probs.cols())
            throw ShapeError("target shape differs from probability shape");
        for (Eigen::Index l = 0; l < length; ++l) {
            if (std::abs(s.probs.row(l).sum() - 1.0) > 1e-9)
                throw ContractViolation("probability row does not sum to 1");
            std::size_t ones = 0;
            for (Eigen::Index w = 0; w < vocab; ++w) {
                const double t = s.target(l, w);
                if (t == 1.0) ++ones;
                else if (t != 0.0) throw ContractViolation("target row is not one-hot");
                if (t != 0.0) total += t * std::log(std::max(s.probs(l, w), 1e-12));
            }
            if (ones != 1) throw ContractViolation("target row is not one-hot");
        }
    }
    const double norm = static_cast<double>(samples.size()) * static_cast<double>(length) *
                        static_cast<double>(vocab);
    return -total / norm;
}

}  // namespace mhys
