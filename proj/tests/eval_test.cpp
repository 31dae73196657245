#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <set>
#include <sstream>

#include "mhys/eval.hpp"
#include "mhys/synthetic.hpp"

namespace mhys {
namespace {

using Ids = std::vector<std::string>;

TEST(Recall, Examples) {
    const Ids ranked{"a", "b", "c", "d"};
    EXPECT_DOUBLE_EQ(recall_at_k(ranked, Ids{"b", "z"}, 2), 0.5);
    EXPECT_DOUBLE_EQ(recall_at_k(ranked, Ids{"d"}, 3), 0.0);
    EXPECT_DOUBLE_EQ(recall_at_k(ranked, Ids{"d"}, 10), 1.0);
    EXPECT_DOUBLE_EQ(recall_at_k(ranked, Ids{}, 1), 1.0);
    EXPECT_DOUBLE_EQ(recall_at_k(Ids{}, Ids{"a"}, 1), 0.0);
    EXPECT_THROW(recall_at_k(ranked, Ids{"a"}, 0), ContractViolation);
}

TEST(Recall, MatchesSetIntersection) {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 50; ++trial) {
        Ids pool;
        for (int i = 0; i < 20; ++i) pool.push_back("i" + std::to_string(i));
        std::shuffle(pool.begin(), pool.end(), rng);
        const Ids ranked(pool.begin(), pool.begin() + 12);
        std::shuffle(pool.begin(), pool.end(), rng);
        const Ids gold(pool.begin(), pool.begin() + 1 + static_cast<long>(rng() % 6));
        const std::size_t k = 1 + rng() % 15;
        const std::set<std::string> top(ranked.begin(), ranked.begin() + static_cast<long>(std::min(k, ranked.size())));
        std::size_t inter = 0;
        for (const auto& g : gold) inter += top.count(g);
        EXPECT_DOUBLE_EQ(recall_at_k(ranked, gold, k), static_cast<double>(inter) / gold.size());
    }
}

TEST(Mrr, ExamplesAndScanOracle) {
    EXPECT_DOUBLE_EQ(mrr(Ids{"a", "b", "c"}, Ids{"c", "b"}), 0.5);
    EXPECT_DOUBLE_EQ(mrr(Ids{"a"}, Ids{"a"}), 1.0);
    EXPECT_DOUBLE_EQ(mrr(Ids{"a"}, Ids{"x"}), 0.0);
    std::mt19937_64 rng(9);
    for (int trial = 0; trial < 50; ++trial) {
        Ids ranked, gold;
        for (int i = 0; i < 10; ++i) ranked.push_back("i" + std::to_string(rng() % 30));
        for (int i = 0; i < 3; ++i) gold.push_back("i" + std::to_string(rng() % 30));
        double expected = 0.0;
        for (std::size_t i = 0; i < ranked.size() && expected == 0.0; ++i)
            if (std::find(gold.begin(), gold.end(), ranked[i]) != gold.end()) expected = 1.0 / (i + 1.0);
        EXPECT_DOUBLE_EQ(mrr(ranked, gold), expected);
    }
}

TEST(Precision, Examples) {
    const Ids ranked{"a", "b", "c"};
    EXPECT_DOUBLE_EQ(precision_at_k(ranked, Ids{"a", "c"}, 2), 0.5);
    EXPECT_DOUBLE_EQ(precision_at_k(ranked, Ids{"a", "c"}, 10), 2.0 / 3.0);
    EXPECT_DOUBLE_EQ(precision_at_k(Ids{}, Ids{"a"}, 3), 0.0);
}

struct Fixture {
    SyntheticDataset ds;
    ProjectionHeads heads;
    Fixture(std::uint64_t seed = 7, std::size_t size = 120, std::size_t queries = 12) {
        SyntheticSpec spec;
        spec.seed = seed;
        spec.corpus_size = size;
        spec.query_count = queries;
        spec.vocabulary_size = 400;
        ds = generate_synthetic(spec);
        heads = ProjectionHeads::identity(spec.dimension);
    }
    EmbedderSpec embedder() const { return EmbedderSpec{"hashed-bow", ds.spec.dimension, {}}; }
};

void expect_same(const MetricReport& a, const MetricReport& b) {
    ASSERT_EQ(a.per_query.size(), b.per_query.size());
    for (std::size_t i = 0; i < a.per_query.size(); ++i) {
        EXPECT_EQ(a.per_query[i].query_id, b.per_query[i].query_id);
        EXPECT_EQ(a.per_query[i].retrieved, b.per_query[i].retrieved);
        EXPECT_DOUBLE_EQ(a.per_query[i].recall, b.per_query[i].recall);
        EXPECT_DOUBLE_EQ(a.per_query[i].precision, b.per_query[i].precision);
        EXPECT_DOUBLE_EQ(a.per_query[i].reciprocal_rank, b.per_query[i].reciprocal_rank);
    }
    EXPECT_DOUBLE_EQ(a.recall, b.recall);
    EXPECT_DOUBLE_EQ(a.mrr, b.mrr);
}

TEST(Ablation, GridCellsMatchDirectEvaluation) {
    const Fixture f;
    GridAxes axes;
    axes.masks = {ChannelMask::all(), ChannelMask{ChannelKind::description},
                  ChannelMask{ChannelKind::image_question, ChannelKind::scene_question}};
    axes.modes.assign(std::begin(kAllFusionModes), std::end(kAllFusionModes));
    axes.ks = {1, 5};
    const auto grid = run_ablation(f.ds.items, f.ds.queries, f.embedder(), f.heads, axes);
    ASSERT_EQ(grid.cells.size(), 3u * 6u * 2u);
    for (const auto& cell : grid.cells)
        expect_same(cell, evaluate(f.ds.items, f.ds.queries, f.embedder(), f.heads, cell.fusion, cell.mask, cell.k));
}

TEST(Ablation, CellsIgnoreAxisOrder) {
    const Fixture f;
    GridAxes a;
    a.masks = {ChannelMask::all(), ChannelMask{ChannelKind::scene_question}};
    a.modes = {FusionMode::plain_sum, FusionMode::word_only};
    a.ks = {3, 7};
    GridAxes b = a;
    std::reverse(b.masks.begin(), b.masks.end());
    std::reverse(b.modes.begin(), b.modes.end());
    std::reverse(b.ks.begin(), b.ks.end());
    const auto ga = run_ablation(f.ds.items, f.ds.queries, f.embedder(), f.heads, a);
    const auto gb = run_ablation(f.ds.items, f.ds.queries, f.embedder(), f.heads, b, 2);
    for (const auto& cell : ga.cells) expect_same(cell, gb.cell(cell.mask, cell.fusion.mode, cell.k));
    EXPECT_EQ(gb.cells.front().mask, ChannelMask{ChannelKind::scene_question});
}

TEST(Ablation, SingleChannelCellIsThatChannelsTopK) {
    const Fixture f;
    GridAxes axes;
    axes.masks = {ChannelMask{ChannelKind::image_question}};
    axes.ks = {4};
    const auto grid = run_ablation(f.ds.items, f.ds.queries, f.embedder(), f.heads, axes);
    const FusionConfig cfg;
    for (std::size_t qi = 0; qi < f.ds.queries.size(); ++qi) {
        const auto& q = f.ds.queries[qi];
        const auto top = topk_scored(score_channel(embed_query(q.question, f.embedder()), f.ds.items,
                                                   ChannelKind::image_question, f.heads, cfg),
                                     4);
        Ids ids;
        for (const auto& s : top) ids.push_back(s.item_id);
        EXPECT_DOUBLE_EQ(grid.cells[0].per_query[qi].recall, recall_at_k(ids, q.relevant, 4));
        EXPECT_DOUBLE_EQ(grid.cells[0].per_query[qi].reciprocal_rank, mrr(ids, q.relevant));
    }
}

TEST(Ablation, DeterministicAndBounded) {
    const Fixture f(11);
    GridAxes axes;
    axes.masks = {ChannelMask::all(), ChannelMask{ChannelKind::description}};
    axes.modes.assign(std::begin(kAllFusionModes), std::end(kAllFusionModes));
    axes.ks = {1, 2, 10};
    std::ostringstream a, b;
    write_grid_jsonl(a, run_ablation(f.ds.items, f.ds.queries, f.embedder(), f.heads, axes, 1), true);
    const auto grid = run_ablation(f.ds.items, f.ds.queries, f.embedder(), f.heads, axes, 3);
    write_grid_jsonl(b, grid, true);
    EXPECT_EQ(a.str(), b.str());
    for (const auto& cell : grid.cells) {
        for (double v : {cell.recall, cell.precision, cell.mrr}) {
            EXPECT_GE(v, 0.0);
            EXPECT_LE(v, 1.0);
        }
        for (const auto& q : cell.per_query) EXPECT_LE(q.retrieved, cell.k * cell.mask.kinds().size());
    }
}

TEST(Ablation, FullMaskBeatsEverySingleChannel) {
    const Fixture f(7, 200, 20);
    GridAxes axes;
    axes.masks = {ChannelMask::all(), ChannelMask{ChannelKind::image_question},
                  ChannelMask{ChannelKind::scene_question}, ChannelMask{ChannelKind::description}};
    const auto grid = run_ablation(f.ds.items, f.ds.queries, f.embedder(), f.heads, axes);
    for (std::size_t i = 1; i < grid.cells.size(); ++i) EXPECT_GE(grid.cells[0].recall, grid.cells[i].recall);
}

TEST(Ablation, FusedAtLeastAsGoodAsSingleGranularity) {
    const Fixture f(7, 200, 20);
    GridAxes axes;
    axes.modes = {FusionMode::log_on_sentence, FusionMode::sentence_only, FusionMode::word_only};
    const auto grid = run_ablation(f.ds.items, f.ds.queries, f.embedder(), f.heads, axes);
    EXPECT_GE(grid.cells[0].recall, grid.cells[1].recall);
    EXPECT_GE(grid.cells[0].recall, grid.cells[2].recall);
}

TEST(Ablation, RejectsBadAxes) {
    const Fixture f;
    GridAxes axes;
    axes.ks = {0};
    EXPECT_THROW(run_ablation(f.ds.items, f.ds.queries, f.embedder(), f.heads, axes), ContractViolation);
    axes = {};
    axes.masks.clear();
    EXPECT_THROW(run_ablation(f.ds.items, f.ds.queries, f.embedder(), f.heads, axes), ContractViolation);
    axes = {};
    EXPECT_THROW(run_ablation({}, f.ds.queries, f.embedder(), f.heads, axes), ContractViolation);
}

TEST(Report, TableHasOneRowPerCell) {
    const Fixture f;
    GridAxes axes;
    axes.ks = {1, 2, 3};
    const auto grid = run_ablation(f.ds.items, f.ds.queries, f.embedder(), f.heads, axes);
    std::ostringstream out;
    write_grid_table(out, grid);
    std::istringstream in(out.str());
    std::size_t rows = 0;
    for (std::string line; std::getline(in, line);)
        if (!line.empty() && line[0] != '#') ++rows;
    EXPECT_EQ(rows, 1u + 3u);  // header row plus one per cell
    EXPECT_THROW(grid.cell(ChannelMask::all(), FusionMode::word_only, 1), ContractViolation);
}

}  // namespace
}  // namespace mhys
