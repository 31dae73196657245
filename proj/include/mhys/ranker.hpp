#pragma once

// Per-channel exhaustive scoring, top-K selection and the union of the
// per-channel candidate lists.

#include <algorithm>
#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "mhys/corpus.hpp"
#include "mhys/detail/parallel.hpp"
#include "mhys/similarity.hpp"

namespace mhys {

inline constexpr std::size_t kDefaultTopK = 5;

struct ScoredCandidate {
    std::string item_id;
    ChannelKind channel = ChannelKind::image_question;
    double word_score = 0.0;
    double sentence_score = 0.0;
    double fused_score = 0.0;
};

/// One entry of a candidate union.
struct Candidate {
    std::string item_id;
    double best_score = 0.0;
    /// Per-channel evidence, in channel order.
    std::vector<ScoredCandidate> contributions;

    std::vector<ChannelKind> channels() const {
        std::vector<ChannelKind> out;
        for (const auto& c : contributions) out.push_back(c.channel);
        return out;
    }
};

struct CandidateSet {
    std::vector<Candidate> entries;

    std::size_t size() const { return entries.size(); }

    std::vector<std::string> ids() const {
        std::vector<std::string> out;
        out.reserve(entries.size());
        for (const auto& e : entries) out.push_back(e.item_id);
        return out;
    }
};

/// Word and sentence scores of one channel of one item, before fusion.
struct GranularScores {
    double word = 0.0;
    double sentence = 0.0;
};

inline GranularScores score_pair(const ProjectedQuery& query, const SummaryChannel& channel,
                                 const ProjectionHeads& heads) {
    return {maxpool_relevance(word_similarity_matrix(query, channel.tokens, heads)),
            sentence_similarity(query, channel.sentence, heads)};
}

inline GranularScores score_pair(const QueryEmbedding& query, const SummaryChannel& channel,
                                 const ProjectionHeads& heads) {
    return score_pair(project_query(query, heads), channel, heads);
}

/// Unfused scores of one channel for every item, in corpus order.
inline std::vector<GranularScores> score_channel_granular(const QueryEmbedding& query,
                                                          std::span<const CorpusItem> corpus,
                                                          ChannelKind kind,
                                                          const ProjectionHeads& heads,
                                                          std::size_t threads = 1) {
    if (corpus.empty()) throw ContractViolation("cannot score an empty corpus");
    for (const auto& item : corpus) (void)item.channel(kind);
    heads.validate(query.sentence.dimension());
    const auto projected = project_query(query, heads);
    std::vector<GranularScores> out(corpus.size());
    detail::parallel_for(corpus.size(), threads, [&](std::size_t i) {
        out[i] = score_pair(projected, corpus[i].channel(kind), heads);
    });
    return out;
}

inline std::vector<ScoredCandidate> fuse_channel(std::span<const CorpusItem> corpus,
                                                 ChannelKind kind,
                                                 std::span<const GranularScores> granular,
                                                 const FusionConfig& cfg) {
    std::vector<ScoredCandidate> out;
    out.reserve(granular.size());
    for (std::size_t i = 0; i < granular.size(); ++i) {
        const auto& g = granular[i];
        out.push_back({corpus[i].item_id, kind, g.word, g.sentence, fuse_scores(g.word, g.sentence, cfg)});
    }
    return out;
}

/// One scored candidate per item, in corpus order. Scores do not depend on
/// `threads`.
inline std::vector<ScoredCandidate> score_channel(const QueryEmbedding& query,
                                                  std::span<const CorpusItem> corpus,
                                                  ChannelKind kind, const ProjectionHeads& heads,
                                                  const FusionConfig& cfg,
                                                  std::size_t threads = 1) {
    cfg.validate();
    const auto granular = score_channel_granular(query, corpus, kind, heads, threads);
    return fuse_channel(corpus, kind, granular, cfg);
}

namespace detail {

inline bool ranks_before(const ScoredCandidate& a, const ScoredCandidate& b) {
    if (a.fused_score != b.fused_score) return a.fused_score > b.fused_score;
    return a.item_id < b.item_id;
}

}  // namespace detail

/// The k best candidates by fused score, descending; ties by ascending id.
inline std::vector<ScoredCandidate> topk_scored(std::span<const ScoredCandidate> scores,
                                                std::size_t k) {
    if (k == 0) throw ContractViolation("top-k requires k >= 1");
    std::vector<ScoredCandidate> sorted(scores.begin(), scores.end());
    const std::size_t keep = std::min(k, sorted.size());
    std::partial_sort(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(keep),
                      sorted.end(), detail::ranks_before);
    sorted.resize(keep);
    return sorted;
}

inline std::vector<std::string> topk_candidates(std::span<const ScoredCandidate> scores,
                                                std::size_t k) {
    std::vector<std::string> ids;
    for (auto& c : topk_scored(scores, k)) ids.push_back(std::move(c.item_id));
    return ids;
}

/// Merges per-channel top-k lists. Each id appears once, ordered by its best
/// fused score over the contributing channels (descending, ties by id).
inline CandidateSet union_candidates(std::span<const std::vector<ScoredCandidate>> channel_lists) {
    std::map<std::string, Candidate> merged;
    for (const auto& list : channel_lists) {
        for (const auto& sc : list) {
            auto [it, inserted] = merged.try_emplace(sc.item_id);
            Candidate& c = it->second;
            if (inserted) {
                c.item_id = sc.item_id;
                c.best_score = sc.fused_score;
            } else {
                c.best_score = std::max(c.best_score, sc.fused_score);
            }
            c.contributions.push_back(sc);
        }
    }
    CandidateSet out;
    out.entries.reserve(merged.size());
    for (auto& [id, c] : merged) {
        std::sort(c.contributions.begin(), c.contributions.end(),
                  [](const ScoredCandidate& a, const ScoredCandidate& b) { return a.channel < b.channel; });
        out.entries.push_back(std::move(c));
    }
    std::sort(out.entries.begin(), out.entries.end(), [](const Candidate& a, const Candidate& b) {
        if (a.best_score != b.best_score) return a.best_score > b.best_score;
        return a.item_id < b.item_id;
    });
    return out;
}

/// Id-only form. Without scores, an entry at rank r (0-based) scores -r, so
/// the merge orders ids by their best rank across channels.
inline CandidateSet union_candidates(std::span<const std::string> image_question,
                                     std::span<const std::string> scene_question,
                                     std::span<const std::string> description) {
    std::vector<std::vector<ScoredCandidate>> lists(3);
    const std::span<const std::string> inputs[3] = {image_question, scene_question, description};
    for (std::size_t c = 0; c < 3; ++c) {
        for (std::size_t r = 0; r < inputs[c].size(); ++r) {
            const double s = -static_cast<double>(r);
            lists[c].push_back({inputs[c][r], kAllChannels[c], 0.0, 0.0, s});
        }
    }
    return union_candidates(lists);
}

/// Score every enabled channel, keep each channel's top k, and union them.
inline CandidateSet retrieve(const QueryEmbedding& query, std::span<const CorpusItem> corpus,
                             const ProjectionHeads& heads, const FusionConfig& cfg, std::size_t k,
                             ChannelMask mask, std::size_t threads = 1) {
    if (mask.empty()) throw ContractViolation("channel mask must enable at least one channel");
    if (k == 0) throw ContractViolation("top-k requires k >= 1");
    std::vector<std::vector<ScoredCandidate>> lists;
    for (ChannelKind kind : mask.kinds()) {
        const auto scored = score_channel(query, corpus, kind, heads, cfg, threads);
        lists.push_back(topk_scored(scored, k));
    }
    return union_candidates(lists);
}

}  // namespace mhys
