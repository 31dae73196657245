// Command-line entry point: gen, validate, retrieve, train, eval.
//
// Exit codes: 0 success, 1 runtime or integrity error, 2 usage error.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mhys/mhys.hpp"

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

struct GlobalOptions {
    std::uint64_t seed = 7;
    std::size_t threads = 1;
};

struct RetrievalOptions {
    std::string corpus;
    std::string heads;
    std::string mask = "all";
    std::string fusion = "log_on_sentence";
    double epsilon = 1e-6;
    std::size_t k = mhys::kDefaultTopK;
};

std::vector<std::string> fusion_names() {
    std::vector<std::string> out;
    for (auto m : mhys::kAllFusionModes) out.emplace_back(mhys::to_string(m));
    return out;
}

/// Accepts "all" or channel names joined by ',' or '+'.
struct MaskValidator : CLI::Validator {
    MaskValidator() {
        name_ = "MASK";
        func_ = [](std::string& s) -> std::string {
            try {
                (void)mhys::ChannelMask::parse(s);
                return {};
            } catch (const mhys::Error& e) {
                return e.what();
            }
        };
    }
};

void add_retrieval_options(CLI::App* cmd, RetrievalOptions& o, bool with_mask) {
    cmd->add_option("--corpus", o.corpus, "Corpus file")->required()->check(CLI::ExistingFile);
    cmd->add_option("--heads", o.heads, "Projection heads file (identity when omitted)")->check(CLI::ExistingFile);
    cmd->add_option("--fusion", o.fusion, "Score fusion mode")->check(CLI::IsMember(fusion_names()))->capture_default_str();
    cmd->add_option("--epsilon", o.epsilon, "Log clamp floor")->check(CLI::Range(1e-300, 1.0 - 1e-16))->capture_default_str();
    cmd->add_option("--k", o.k, "Per-channel top K")->check(CLI::PositiveNumber)->capture_default_str();
    if (with_mask) cmd->add_option("--mask", o.mask, "Enabled channels: all, or names joined by ','")->check(MaskValidator{})->capture_default_str();
}

mhys::ProjectionHeads heads_or_identity(const std::string& path, std::size_t dimension) {
    if (path.empty()) return mhys::ProjectionHeads::identity(dimension);
    auto heads = mhys::load_heads(path);
    heads.validate(dimension);
    return heads;
}

std::pair<std::size_t, std::size_t> parse_k_range(const std::string& text) {
    const auto dots = text.find("..");
    if (dots == std::string::npos) throw CLI::ValidationError("--k-range", "expected A..B");
    try {
        const auto lo = std::stoul(text.substr(0, dots));
        const auto hi = std::stoul(text.substr(dots + 2));
        if (lo < 1 || hi < lo) throw CLI::ValidationError("--k-range", "need 1 <= A <= B");
        return {lo, hi};
    } catch (const std::logic_error&) {
        throw CLI::ValidationError("--k-range", "expected A..B");
    }
}

void print_candidates(const mhys::CandidateSet& set, bool explain) {
    std::size_t rank = 0;
    for (const auto& c : set.entries) {
        std::string channels;
        for (auto k : c.channels()) {
            if (!channels.empty()) channels += ',';
            channels += mhys::to_string(k);
        }
        std::printf("%zu\t%s\t%.9f\t%s\n", ++rank, c.item_id.c_str(), c.best_score, channels.c_str());
        if (!explain) continue;
        for (const auto& s : c.contributions)
            std::printf("\t%s\tword=%.9f\tsentence=%.9f\tfused=%.9f\n", std::string(mhys::to_string(s.channel)).c_str(),
                        s.word_score, s.sentence_score, s.fused_score);
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Hypothetical-summary retrieval: generate, validate, retrieve, train, evaluate"};
    app.fallthrough();
    app.set_config("--config", "", "Key-value configuration file (flags take precedence)");
    app.require_subcommand(1);

    GlobalOptions global;
    app.add_option("--seed", global.seed, "Seed for every random choice")->capture_default_str();
    app.add_option("--threads", global.threads, "Worker threads (0 = hardware concurrency)")->capture_default_str();

    // gen
    auto* gen = app.add_subcommand("gen", "Write a seeded synthetic corpus and query file");
    mhys::SyntheticSpec synth;
    std::string gen_corpus = "corpus.jsonl", gen_queries = "queries.jsonl";
    bool gen_embeddings = false;
    gen->add_option("--size", synth.corpus_size, "Number of corpus items")->required()->check(CLI::PositiveNumber);
    gen->add_option("--relevant", synth.relevant_per_query, "Gold items per query")->capture_default_str();
    gen->add_option("--num-queries", synth.query_count, "Number of queries")->capture_default_str();
    gen->add_option("--vocab", synth.vocabulary_size, "Vocabulary size")->capture_default_str();
    gen->add_option("--key-tokens", synth.key_tokens_per_query, "Key tokens per query")->capture_default_str();
    gen->add_option("--detail-tokens", synth.detail_tokens_per_query, "Detail tokens per query")->capture_default_str();
    gen->add_option("--signal-image-question", synth.channel_signal.image_question)->capture_default_str();
    gen->add_option("--signal-scene-question", synth.channel_signal.scene_question)->capture_default_str();
    gen->add_option("--signal-description", synth.channel_signal.description)->capture_default_str();
    gen->add_option("--dim", synth.dimension, "Embedding dimension")->capture_default_str();
    gen->add_option("--corpus-out", gen_corpus, "Corpus output path")->capture_default_str();
    gen->add_option("--queries-out", gen_queries, "Query output path")->capture_default_str();
    gen->add_flag("--with-embeddings", gen_embeddings, "Store embeddings alongside text");

    // validate
    auto* validate = app.add_subcommand("validate", "Load and check a corpus (and optionally queries)");
    std::string val_corpus, val_queries;
    validate->add_option("--corpus", val_corpus, "Corpus file")->required()->check(CLI::ExistingFile);
    validate->add_option("--queries", val_queries, "Query file")->check(CLI::ExistingFile);

    // retrieve
    auto* retrieve = app.add_subcommand("retrieve", "Rank corpus items for one query");
    RetrievalOptions ret;
    std::string query_text;
    bool explain = false;
    add_retrieval_options(retrieve, ret, true);
    retrieve->add_option("--query", query_text, "Query text")->required();
    retrieve->add_flag("--explain", explain, "Print word, sentence and fused scores per channel");

    // train
    auto* train = app.add_subcommand("train", "Train word-level projection heads contrastively");
    RetrievalOptions tr;
    std::string train_queries, heads_out, positive = "top1", optimizer = "adamw", loss_mode = "as_written",
                summary_channel = "image_question";
    mhys::TrainConfig tcfg;
    add_retrieval_options(train, tr, true);
    train->add_option("--queries", train_queries, "Query file")->required()->check(CLI::ExistingFile);
    train->add_option("--heads-out", heads_out, "Where to write trained heads")->required();
    train->add_option("--lr", tcfg.learning_rate, "Learning rate")->check(CLI::NonNegativeNumber)->capture_default_str();
    train->add_option("--epochs", tcfg.epochs, "Epochs")->check(CLI::PositiveNumber)->capture_default_str();
    train->add_option("--batch-size", tcfg.batch_size, "Batch size")->check(CLI::PositiveNumber)->capture_default_str();
    train->add_option("--weight-decay", tcfg.weight_decay, "AdamW weight decay")->capture_default_str();
    train->add_option("--optimizer", optimizer)->check(CLI::IsMember({"adamw", "sgd"}))->capture_default_str();
    train->add_option("--loss-mode", loss_mode)->check(CLI::IsMember({"as_written", "standard_infonce"}))->capture_default_str();
    train->add_option("--positive", positive, "Positive item per query: top1 retrieved or each gold item")
        ->check(CLI::IsMember({"top1", "gold"}))->capture_default_str();
    train->add_option("--summary-channel", summary_channel)
        ->check(CLI::IsMember({"image_question", "scene_question", "description"}))->capture_default_str();

    // eval
    auto* eval = app.add_subcommand("eval", "Compute retrieval metrics or an ablation grid");
    RetrievalOptions ev;
    std::string eval_queries, grid = "none", k_range = "1..10", format = "table";
    bool per_query = false;
    add_retrieval_options(eval, ev, true);
    eval->add_option("--queries", eval_queries, "Query file")->required()->check(CLI::ExistingFile);
    eval->add_option("--grid", grid, "none | fusion | channels | k | full")
        ->check(CLI::IsMember({"none", "fusion", "channels", "k", "full"}))->capture_default_str();
    eval->add_option("--k-range", k_range, "K sweep A..B for --grid k/full")->capture_default_str();
    eval->add_option("--format", format)->check(CLI::IsMember({"table", "jsonl"}))->capture_default_str();
    eval->add_flag("--per-query", per_query, "Emit per-query records (jsonl)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitUsage;
    }

    {
        CLI::App* active = app.get_subcommands().front();
        std::cerr << "# effective configuration\n#   seed=" << global.seed << "\n#   threads=" << global.threads
                  << '\n';
        const std::string effective = active->config_to_str(true, false);
        for (std::size_t pos = 0; pos < effective.size();) {
            const auto end = effective.find('\n', pos);
            if (end != pos) std::cerr << "#   " << active->get_name() << '.' << effective.substr(pos, end - pos) << '\n';
            if (end == std::string::npos) break;
            pos = end + 1;
        }
    }

    try {
        if (gen->parsed()) {
            synth.seed = global.seed;
            try {
                synth.validate();
            } catch (const mhys::ContractViolation& e) {
                std::cerr << "usage error: " << e.what() << '\n';
                return kExitUsage;
            }
            const auto ds = mhys::generate_synthetic(synth);
            mhys::save_corpus(gen_corpus, ds.items, ds.spec, gen_embeddings);
            mhys::save_queries(gen_queries, ds.queries);
            std::printf("wrote %zu items to %s and %zu queries to %s\n", ds.items.size(), gen_corpus.c_str(),
                        ds.queries.size(), gen_queries.c_str());
            return 0;
        }

        if (validate->parsed()) {
            const auto corpus = mhys::load_corpus(val_corpus, global.threads);
            std::printf("corpus ok: %zu items, embedder %s d=%zu\n", corpus.items.size(), corpus.spec.name.c_str(),
                        corpus.spec.dimension);
            if (!val_queries.empty()) {
                const auto queries = mhys::load_queries(val_queries);
                mhys::validate_queries(queries, corpus.items);
                std::printf("queries ok: %zu queries\n", queries.size());
            }
            return 0;
        }

        if (retrieve->parsed()) {
            const auto corpus = mhys::load_corpus(ret.corpus, global.threads);
            const auto heads = heads_or_identity(ret.heads, corpus.spec.dimension);
            const mhys::FusionConfig fusion{mhys::parse_fusion_mode(ret.fusion), ret.epsilon};
            const auto result = mhys::retrieve(mhys::embed_query(query_text, corpus.spec), corpus.items, heads, fusion,
                                               ret.k, mhys::ChannelMask::parse(ret.mask), global.threads);
            print_candidates(result, explain);
            return 0;
        }

        if (train->parsed()) {
            const auto corpus = mhys::load_corpus(tr.corpus, global.threads);
            const auto queries = mhys::load_queries(train_queries);
            mhys::validate_queries(queries, corpus.items);
            const auto initial = heads_or_identity(tr.heads, corpus.spec.dimension);
            const mhys::FusionConfig fusion{mhys::parse_fusion_mode(tr.fusion), tr.epsilon};
            const auto mask = mhys::ChannelMask::parse(tr.mask);
            tcfg.seed = global.seed;
            tcfg.optimizer = mhys::parse_optimizer(optimizer);
            tcfg.loss_mode = mhys::parse_contrastive_mode(loss_mode);
            tcfg.summary_channel = mhys::parse_channel_kind(summary_channel);

            std::vector<mhys::TrainingExample> dataset;
            for (const auto& q : queries) {
                const auto qe = mhys::embed_query(q.question, corpus.spec);
                if (positive == "gold") {
                    for (const auto& g : q.relevant) dataset.push_back({qe, g});
                } else {
                    const auto top = mhys::retrieve(qe, corpus.items, initial, fusion, 1, {tcfg.summary_channel});
                    dataset.push_back({qe, top.entries.front().item_id});
                }
            }
            if (dataset.empty()) throw mhys::ContractViolation("no training pairs could be formed");

            const auto before = mhys::evaluate(corpus.items, queries, corpus.spec, initial, fusion, mask, tr.k, global.threads);
            const auto result = mhys::train_heads(dataset, corpus.items, initial, tcfg);
            const auto after =
                mhys::evaluate(corpus.items, queries, corpus.spec, result.heads, fusion, mask, tr.k, global.threads);
            for (std::size_t e = 0; e < result.loss_history.size(); ++e)
                std::printf("epoch %zu\tloss %.9f\n", e + 1, result.loss_history[e]);
            std::printf("pairs %zu\trecall@%zu before %.6f\tafter %.6f\n", dataset.size(), tr.k, before.recall,
                        after.recall);
            mhys::save_heads(heads_out, result.heads);
            return 0;
        }

        if (eval->parsed()) {
            const auto corpus = mhys::load_corpus(ev.corpus, global.threads);
            const auto queries = mhys::load_queries(eval_queries);
            mhys::validate_queries(queries, corpus.items);
            const auto heads = heads_or_identity(ev.heads, corpus.spec.dimension);

            mhys::GridAxes axes;
            axes.epsilon = ev.epsilon;
            axes.masks = {mhys::ChannelMask::parse(ev.mask)};
            axes.modes = {mhys::parse_fusion_mode(ev.fusion)};
            axes.ks = {ev.k};
            const bool sweep_modes = grid == "fusion" || grid == "full";
            const bool sweep_masks = grid == "channels" || grid == "full";
            const bool sweep_k = grid == "k" || grid == "full";
            if (sweep_modes) axes.modes.assign(std::begin(mhys::kAllFusionModes), std::end(mhys::kAllFusionModes));
            if (sweep_masks) {
                using K = mhys::ChannelKind;
                axes.masks = {{K::image_question},
                              {K::scene_question},
                              {K::description},
                              {K::image_question, K::scene_question},
                              mhys::ChannelMask::all()};
            }
            if (sweep_k) {
                const auto [lo, hi] = parse_k_range(k_range);
                axes.ks.clear();
                for (auto k = lo; k <= hi; ++k) axes.ks.push_back(k);
            }
            const auto result = mhys::run_ablation(corpus.items, queries, corpus.spec, heads, axes, global.threads);
            if (format == "jsonl")
                mhys::write_grid_jsonl(std::cout, result, per_query);
            else
                mhys::write_grid_table(std::cout, result);
            return 0;
        }
    } catch (const CLI::ValidationError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
    return 0;
}
