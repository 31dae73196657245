#pragma once

// Line-delimited corpus and query files. The field-level layout is in
// docs/formats.md.

#include <cmath>
#include <cstddef>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "mhys/corpus.hpp"
#include "mhys/detail/parallel.hpp"
#include "mhys/embedding.hpp"
#include "mhys/errors.hpp"

namespace mhys {

inline constexpr const char* kCorpusSentinel = "#MHYS-CORPUS";
inline constexpr const char* kQueriesSentinel = "#MHYS-QUERIES";
inline constexpr int kCorpusFormatVersion = 1;

/// Stored embeddings may differ from recomputed ones by at most this much.
inline constexpr double kEmbeddingTolerance = 1e-9;

struct LoadedCorpus {
    EmbedderSpec spec;
    Corpus items;
};

struct QueryRecord {
    std::string query_id;
    std::string question;
    std::vector<std::string> relevant;
    std::optional<std::string> answer;

    friend bool operator==(const QueryRecord&, const QueryRecord&) = default;
};

namespace detail {

using ordered_json = nlohmann::ordered_json;

inline ordered_json vector_json(const Eigen::VectorXd& v) {
    ordered_json a = ordered_json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
    return a;
}

inline ordered_json matrix_json(const Eigen::MatrixXd& m) {
    ordered_json a = ordered_json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) a.push_back(vector_json(m.row(r).transpose()));
    return a;
}

inline bool split_header(const std::string& line, const char* sentinel, std::string& payload) {
    const std::string s(sentinel);
    if (line.compare(0, s.size(), s) != 0) return false;
    if (line.size() > s.size() && line[s.size()] != ' ') return false;
    payload = line.size() > s.size() ? line.substr(s.size() + 1) : std::string{};
    return true;
}

inline nlohmann::json parse_object(const std::string& text, const std::string& source, std::size_t line) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(source, line, std::string("malformed record: ") + e.what());
    }
    if (!j.is_object()) throw ParseError(source, line, "record is not a JSON object");
    return j;
}

template <class T>
T required_field(const nlohmann::json& j, const char* key, const std::string& source, std::size_t line) {
    auto it = j.find(key);
    if (it == j.end()) throw ParseError(source, line, std::string("missing field '") + key + "'");
    try {
        return it->get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ParseError(source, line, std::string("field '") + key + "' has the wrong type");
    }
}

inline bool is_blank(const std::string& line) {
    for (char c : line)
        if (c != ' ' && c != '\t' && c != '\r') return false;
    return true;
}

struct RawChannel {
    std::string text;
    std::optional<std::vector<double>> sentence;
    std::optional<std::vector<std::vector<double>>> tokens;
};

struct RawItem {
    std::size_t line = 0;
    std::string id;
    std::map<ChannelKind, RawChannel> channels;
};

inline void check_stored(const RawItem& raw, ChannelKind kind, const RawChannel& ch,
                         const SummaryChannel& computed, const std::string& source) {
    const std::string where = "item '" + raw.id + "' channel " + std::string(to_string(kind));
    auto fail = [&](const std::string& what) {
        throw IntegrityError(source + ":" + std::to_string(raw.line) + ": " + where + ": " + what);
    };
    if (ch.sentence) {
        const auto& v = *ch.sentence;
        if (v.size() != computed.sentence.dimension()) fail("stored sentence embedding has wrong dimension");
        for (std::size_t i = 0; i < v.size(); ++i)
            if (!(std::abs(v[i] - computed.sentence.vector[static_cast<Eigen::Index>(i)]) <= kEmbeddingTolerance))
                fail("stored sentence embedding does not match its text");
    }
    if (ch.tokens) {
        const auto& m = *ch.tokens;
        if (m.size() != computed.tokens.token_count()) fail("stored token embedding has wrong row count");
        for (std::size_t r = 0; r < m.size(); ++r) {
            if (m[r].size() != computed.tokens.dimension()) fail("stored token embedding has wrong dimension");
            for (std::size_t c = 0; c < m[r].size(); ++c)
                if (!(std::abs(m[r][c] - computed.tokens.matrix(static_cast<Eigen::Index>(r),
                                                                static_cast<Eigen::Index>(c))) <=
                      kEmbeddingTolerance))
                    fail("stored token embedding does not match its text");
        }
    }
}

}  // namespace detail

inline void write_corpus(std::ostream& out, std::span<const CorpusItem> items, const EmbedderSpec& spec,
                         bool include_embeddings) {
    detail::ordered_json header;
    header["format_version"] = kCorpusFormatVersion;
    header["embedder"] = {{"name", spec.name},
                          {"dimension", spec.dimension},
                          {"tokenizer", std::string(to_string(spec.tokenizer))}};
    detail::ordered_json prompts;
    for (ChannelKind k : kAllChannels) prompts[std::string(to_string(k))] = std::string(generation_prompt(k));
    header["prompts"] = prompts;
    out << kCorpusSentinel << ' ' << header.dump() << '\n';

    for (const auto& item : items) {
        detail::ordered_json rec;
        rec["id"] = item.item_id;
        detail::ordered_json channels;
        for (ChannelKind k : kAllChannels) {
            const auto& ch = item.channel(k);
            detail::ordered_json c;
            c["text"] = ch.text;
            if (include_embeddings) {
                c["sentence"] = detail::vector_json(ch.sentence.vector);
                c["tokens"] = detail::matrix_json(ch.tokens.matrix);
            }
            channels[std::string(to_string(k))] = c;
        }
        rec["channels"] = channels;
        out << rec.dump() << '\n';
    }
}

/// Parses and validates a corpus. Missing embeddings are computed from the
/// channel text; stored ones must match that recomputation.
inline LoadedCorpus read_corpus(std::istream& in, const std::string& source = "<corpus>",
                                std::size_t threads = 1) {
    std::string line;
    std::size_t line_no = 0;
    LoadedCorpus result;

    bool have_header = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::is_blank(line)) continue;
        std::string payload;
        if (!detail::split_header(line, kCorpusSentinel, payload))
            throw ParseError(source, line_no, "expected " + std::string(kCorpusSentinel) + " header line");
        const auto h = detail::parse_object(payload, source, line_no);
        const int version = detail::required_field<int>(h, "format_version", source, line_no);
        if (version != kCorpusFormatVersion)
            throw ParseError(source, line_no, "unsupported corpus format version " + std::to_string(version));
        const auto emb = detail::required_field<nlohmann::json>(h, "embedder", source, line_no);
        result.spec.name = detail::required_field<std::string>(emb, "name", source, line_no);
        const auto dim = detail::required_field<long long>(emb, "dimension", source, line_no);
        if (dim < 2) throw ParseError(source, line_no, "embedder dimension must be >= 2");
        result.spec.dimension = static_cast<std::size_t>(dim);
        try {
            result.spec.tokenizer =
                parse_tokenizer_rule(detail::required_field<std::string>(emb, "tokenizer", source, line_no));
        } catch (const ContractViolation& e) {
            throw ParseError(source, line_no, e.what());
        }
        have_header = true;
        break;
    }
    if (!have_header) throw ParseError(source, line_no + 1, "missing " + std::string(kCorpusSentinel) + " header");

    std::vector<detail::RawItem> raw;
    std::unordered_set<std::string> seen;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::is_blank(line)) continue;
        if (line[0] == '#') throw ParseError(source, line_no, "unexpected header line after records");
        const auto j = detail::parse_object(line, source, line_no);
        detail::RawItem item;
        item.line = line_no;
        item.id = detail::required_field<std::string>(j, "id", source, line_no);
        if (item.id.empty()) throw ParseError(source, line_no, "empty item id");
        if (!seen.insert(item.id).second)
            throw IntegrityError(source + ":" + std::to_string(line_no) + ": duplicate item id '" + item.id + "'");
        const auto channels = detail::required_field<nlohmann::json>(j, "channels", source, line_no);
        if (!channels.is_object()) throw ParseError(source, line_no, "'channels' is not an object");
        for (auto it = channels.begin(); it != channels.end(); ++it) {
            ChannelKind kind;
            try {
                kind = parse_channel_kind(it.key());
            } catch (const ContractViolation& e) {
                throw ParseError(source, line_no, e.what());
            }
            const auto& cj = it.value();
            if (!cj.is_object()) throw ParseError(source, line_no, "channel entry is not an object");
            detail::RawChannel ch;
            ch.text = detail::required_field<std::string>(cj, "text", source, line_no);
            if (cj.contains("sentence"))
                ch.sentence = detail::required_field<std::vector<double>>(cj, "sentence", source, line_no);
            if (cj.contains("tokens"))
                ch.tokens = detail::required_field<std::vector<std::vector<double>>>(cj, "tokens", source, line_no);
            item.channels.emplace(kind, std::move(ch));
        }
        for (ChannelKind k : kAllChannels)
            if (!item.channels.contains(k))
                throw IntegrityError(source + ":" + std::to_string(line_no) + ": item '" + item.id +
                                     "' is missing the " + std::string(to_string(k)) + " channel");
        raw.push_back(std::move(item));
    }

    result.items.resize(raw.size());
    detail::parallel_for(raw.size(), threads, [&](std::size_t i) {
        CorpusItem item{raw[i].id, {}};
        for (const auto& [kind, ch] : raw[i].channels) {
            auto computed = SummaryChannel::from_text(kind, ch.text, result.spec);
            detail::check_stored(raw[i], kind, ch, computed, source);
            item.channels.emplace(kind, std::move(computed));
        }
        result.items[i] = std::move(item);
    });
    return result;
}

inline void save_corpus(const std::string& path, std::span<const CorpusItem> items, const EmbedderSpec& spec,
                        bool include_embeddings = false) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open '" + path + "' for writing");
    write_corpus(out, items, spec, include_embeddings);
    if (!out) throw Error("failed writing '" + path + "'");
}

inline LoadedCorpus load_corpus(const std::string& path, std::size_t threads = 1) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open corpus '" + path + "'");
    return read_corpus(in, path, threads);
}

inline void write_queries(std::ostream& out, std::span<const QueryRecord> queries) {
    detail::ordered_json header;
    header["format_version"] = kCorpusFormatVersion;
    out << kQueriesSentinel << ' ' << header.dump() << '\n';
    for (const auto& q : queries) {
        detail::ordered_json rec;
        rec["id"] = q.query_id;
        rec["question"] = q.question;
        rec["relevant"] = q.relevant;
        if (q.answer) rec["answer"] = *q.answer;
        out << rec.dump() << '\n';
    }
}

inline std::vector<QueryRecord> read_queries(std::istream& in, const std::string& source = "<queries>") {
    std::string line;
    std::size_t line_no = 0;
    bool have_header = false;
    std::vector<QueryRecord> out;
    std::unordered_set<std::string> seen;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::is_blank(line)) continue;
        if (!have_header) {
            std::string payload;
            if (!detail::split_header(line, kQueriesSentinel, payload))
                throw ParseError(source, line_no, "expected " + std::string(kQueriesSentinel) + " header line");
            const auto h = detail::parse_object(payload, source, line_no);
            const int version = detail::required_field<int>(h, "format_version", source, line_no);
            if (version != kCorpusFormatVersion)
                throw ParseError(source, line_no, "unsupported query format version " + std::to_string(version));
            have_header = true;
            continue;
        }
        const auto j = detail::parse_object(line, source, line_no);
        QueryRecord q;
        q.query_id = detail::required_field<std::string>(j, "id", source, line_no);
        q.question = detail::required_field<std::string>(j, "question", source, line_no);
        q.relevant = detail::required_field<std::vector<std::string>>(j, "relevant", source, line_no);
        if (j.contains("answer")) q.answer = detail::required_field<std::string>(j, "answer", source, line_no);
        if (!seen.insert(q.query_id).second)
            throw IntegrityError(source + ":" + std::to_string(line_no) + ": duplicate query id '" + q.query_id + "'");
        out.push_back(std::move(q));
    }
    if (!have_header) throw ParseError(source, line_no + 1, "missing " + std::string(kQueriesSentinel) + " header");
    return out;
}

inline void save_queries(const std::string& path, std::span<const QueryRecord> queries) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open '" + path + "' for writing");
    write_queries(out, queries);
    if (!out) throw Error("failed writing '" + path + "'");
}

inline std::vector<QueryRecord> load_queries(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open queries '" + path + "'");
    return read_queries(in, path);
}

/// Every gold id must name a corpus item.
inline void validate_queries(std::span<const QueryRecord> queries, std::span<const CorpusItem> corpus) {
    std::unordered_set<std::string_view> ids;
    for (const auto& item : corpus) ids.insert(item.item_id);
    for (const auto& q : queries)
        for (const auto& gold : q.relevant)
            if (!ids.contains(gold))
                throw IntegrityError("query '" + q.query_id + "' references unknown item '" + gold + "'");
}

}  // namespace mhys
