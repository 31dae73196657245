#pragma once

// Retrieval metrics and ablation grids over channel masks, fusion modes and
// per-channel K. Metrics are computed on the full candidate union that
// retrieve() returns for a given K, so "recall@K" is the recall of the set
// built from each enabled channel's top K.

#include <algorithm>
#include <cstddef>
#include <cstdio>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "mhys/corpus.hpp"
#include "mhys/corpus_io.hpp"
#include "mhys/detail/parallel.hpp"
#include "mhys/ranker.hpp"
#include "mhys/similarity.hpp"

namespace mhys {

/// |top-k ∩ gold| / |gold|; an empty gold set scores 1.
inline double recall_at_k(std::span<const std::string> ranked, std::span<const std::string> gold,
                          std::size_t k) {
    if (k == 0) throw ContractViolation("recall@k requires k >= 1");
    const std::unordered_set<std::string_view> gold_set(gold.begin(), gold.end());
    if (gold_set.empty()) return 1.0;
    std::unordered_set<std::string_view> hit;
    for (std::size_t i = 0; i < std::min(k, ranked.size()); ++i)
        if (gold_set.contains(ranked[i])) hit.insert(ranked[i]);
    return static_cast<double>(hit.size()) / static_cast<double>(gold_set.size());
}

/// |top-k ∩ gold| / min(k, |ranked|); 0 for an empty ranking.
inline double precision_at_k(std::span<const std::string> ranked, std::span<const std::string> gold,
                             std::size_t k) {
    if (k == 0) throw ContractViolation("precision@k requires k >= 1");
    const std::size_t n = std::min(k, ranked.size());
    if (n == 0) return 0.0;
    const std::unordered_set<std::string_view> gold_set(gold.begin(), gold.end());
    std::unordered_set<std::string_view> hit;
    for (std::size_t i = 0; i < n; ++i)
        if (gold_set.contains(ranked[i])) hit.insert(ranked[i]);
    return static_cast<double>(hit.size()) / static_cast<double>(n);
}

/// 1 / (1-based rank of the first gold id), or 0 when none is retrieved.
inline double mrr(std::span<const std::string> ranked, std::span<const std::string> gold) {
    const std::unordered_set<std::string_view> gold_set(gold.begin(), gold.end());
    for (std::size_t i = 0; i < ranked.size(); ++i)
        if (gold_set.contains(ranked[i])) return 1.0 / static_cast<double>(i + 1);
    return 0.0;
}

struct QueryMetrics {
    std::string query_id;
    std::size_t retrieved = 0;
    double recall = 0.0;
    double precision = 0.0;
    double reciprocal_rank = 0.0;
};

struct MetricReport {
    FusionConfig fusion;
    ChannelMask mask;
    std::size_t k = kDefaultTopK;
    std::vector<QueryMetrics> per_query;
    double recall = 0.0;
    double precision = 0.0;
    double mrr = 0.0;
};

struct GridAxes {
    std::vector<ChannelMask> masks{ChannelMask::all()};
    std::vector<FusionMode> modes{FusionMode::log_on_sentence};
    std::vector<std::size_t> ks{kDefaultTopK};
    double epsilon = 1e-6;
};

struct AblationGrid {
    GridAxes axes;
    /// Mask-major, then mode, then K, in axis order.
    std::vector<MetricReport> cells;

    const MetricReport& cell(ChannelMask mask, FusionMode mode, std::size_t k) const {
        for (const auto& c : cells)
            if (c.mask == mask && c.fusion.mode == mode && c.k == k) return c;
        throw ContractViolation("no grid cell for mask " + mask.to_string() + ", mode " +
                                std::string(to_string(mode)) + ", k " + std::to_string(k));
    }
};

inline QueryMetrics score_query(const std::string& query_id, const CandidateSet& candidates,
                                std::span<const std::string> gold) {
    const auto ids = candidates.ids();
    QueryMetrics m;
    m.query_id = query_id;
    m.retrieved = ids.size();
    const std::size_t depth = std::max<std::size_t>(1, ids.size());
    m.recall = recall_at_k(ids, gold, depth);
    m.precision = precision_at_k(ids, gold, depth);
    m.reciprocal_rank = mrr(ids, gold);
    return m;
}

namespace detail {

inline void aggregate(MetricReport& report) {
    report.recall = report.precision = report.mrr = 0.0;
    if (report.per_query.empty()) return;
    for (const auto& q : report.per_query) {
        report.recall += q.recall;
        report.precision += q.precision;
        report.mrr += q.reciprocal_rank;
    }
    const double n = static_cast<double>(report.per_query.size());
    report.recall /= n;
    report.precision /= n;
    report.mrr /= n;
}

}  // namespace detail

/// Every (mask, mode, K) cell over every query. Unfused channel scores are
/// computed once per query and shared by all cells.
inline AblationGrid run_ablation(std::span<const CorpusItem> corpus, std::span<const QueryRecord> queries,
                                 const EmbedderSpec& spec, const ProjectionHeads& heads, const GridAxes& axes,
                                 std::size_t threads = 1) {
    if (axes.masks.empty() || axes.modes.empty() || axes.ks.empty())
        throw ContractViolation("ablation axes must be non-empty");
    for (auto m : axes.masks)
        if (m.empty()) throw ContractViolation("channel mask must enable at least one channel");
    for (auto k : axes.ks)
        if (k == 0) throw ContractViolation("top-k requires k >= 1");
    FusionConfig{FusionMode::log_on_sentence, axes.epsilon}.validate();
    if (corpus.empty()) throw ContractViolation("cannot evaluate an empty corpus");

    AblationGrid grid;
    grid.axes = axes;
    for (auto mask : axes.masks)
        for (auto mode : axes.modes)
            for (auto k : axes.ks) grid.cells.push_back({{mode, axes.epsilon}, mask, k, {}, 0, 0, 0});

    std::vector<std::vector<QueryMetrics>> per_query(queries.size());
    detail::parallel_for(queries.size(), threads, [&](std::size_t qi) {
        const auto& q = queries[qi];
        const auto query = embed_query(q.question, spec);
        std::map<ChannelKind, std::vector<GranularScores>> granular;
        for (auto mask : axes.masks)
            for (ChannelKind kind : mask.kinds())
                if (!granular.contains(kind))
                    granular.emplace(kind, score_channel_granular(query, corpus, kind, heads));

        auto& out = per_query[qi];
        out.reserve(grid.cells.size());
        for (const auto& cell : grid.cells) {
            std::vector<std::vector<ScoredCandidate>> lists;
            for (ChannelKind kind : cell.mask.kinds())
                lists.push_back(topk_scored(fuse_channel(corpus, kind, granular.at(kind), cell.fusion), cell.k));
            out.push_back(score_query(q.query_id, union_candidates(lists), q.relevant));
        }
    });

    for (std::size_t c = 0; c < grid.cells.size(); ++c) {
        auto& cell = grid.cells[c];
        for (const auto& pq : per_query) cell.per_query.push_back(pq[c]);
        detail::aggregate(cell);
    }
    return grid;
}

/// Evaluates one configuration by calling retrieve() per query.
inline MetricReport evaluate(std::span<const CorpusItem> corpus, std::span<const QueryRecord> queries,
                             const EmbedderSpec& spec, const ProjectionHeads& heads, const FusionConfig& fusion,
                             ChannelMask mask, std::size_t k, std::size_t threads = 1) {
    MetricReport report{fusion, mask, k, {}, 0, 0, 0};
    report.per_query.resize(queries.size());
    detail::parallel_for(queries.size(), threads, [&](std::size_t qi) {
        const auto& q = queries[qi];
        const auto candidates = retrieve(embed_query(q.question, spec), corpus, heads, fusion, k, mask);
        report.per_query[qi] = score_query(q.query_id, candidates, q.relevant);
    });
    detail::aggregate(report);
    return report;
}

inline constexpr const char* kReportNotice =
    "retrieval metrics (recall/precision/MRR over the per-channel top-K union) stand in for answer "
    "accuracy; queries with no gold items count as recall 1.0";

/// One JSON object per cell, preceded by a header record.
inline void write_grid_jsonl(std::ostream& out, const AblationGrid& grid, bool per_query = false) {
    nlohmann::ordered_json header;
    header["type"] = "header";
    header["note"] = kReportNotice;
    out << header.dump() << '\n';
    for (const auto& cell : grid.cells) {
        nlohmann::ordered_json rec;
        rec["type"] = "cell";
        rec["mask"] = cell.mask.to_string();
        rec["fusion"] = std::string(to_string(cell.fusion.mode));
        rec["epsilon"] = cell.fusion.epsilon;
        rec["k"] = cell.k;
        rec["queries"] = cell.per_query.size();
        rec["recall"] = cell.recall;
        rec["precision"] = cell.precision;
        rec["mrr"] = cell.mrr;
        out << rec.dump() << '\n';
        if (!per_query) continue;
        for (const auto& q : cell.per_query) {
            nlohmann::ordered_json r;
            r["type"] = "query";
            r["mask"] = cell.mask.to_string();
            r["fusion"] = std::string(to_string(cell.fusion.mode));
            r["k"] = cell.k;
            r["query"] = q.query_id;
            r["retrieved"] = q.retrieved;
            r["recall"] = q.recall;
            r["precision"] = q.precision;
            r["reciprocal_rank"] = q.reciprocal_rank;
            out << r.dump() << '\n';
        }
    }
}

inline void write_grid_table(std::ostream& out, const AblationGrid& grid) {
    out << "# " << kReportNotice << '\n';
    char line[256];
    std::snprintf(line, sizeof line, "%-40s %-16s %4s %8s %9s %8s\n", "mask", "fusion", "k", "recall",
                  "precision", "mrr");
    out << line;
    for (const auto& c : grid.cells) {
        std::snprintf(line, sizeof line, "%-40s %-16s %4zu %8.4f %9.4f %8.4f\n", c.mask.to_string().c_str(),
                      std::string(to_string(c.fusion.mode)).c_str(), c.k, c.recall, c.precision, c.mrr);
        out << line;
    }
}

}  // namespace mhys
