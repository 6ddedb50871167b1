#include "mraglab/datastore.hpp"

#include <algorithm>
#include <unordered_set>
#include <bit>
#include <cmath>
#include <cstring>

#include <json.hpp>
#include <spdlog/spdlog.h>

#include "mraglab/parallel.hpp"

namespace mraglab::datastore {

using ordered_json = nlohmann::ordered_json;

static constexpr std::string_view kIndexFormat = "mraglab-index/1";

void l2_normalize(std::vector<float>& v) {
    double sq = 0.0;
    for (float x : v) sq += static_cast<double>(x) * static_cast<double>(x);
    if (!(sq > 0.0) || !std::isfinite(sq)) throw Error("cannot normalize a zero or non-finite vector");
    const double inv = 1.0 / std::sqrt(sq);
    for (float& x : v) x = static_cast<float>(static_cast<double>(x) * inv);
}

double dot(std::span<const float> a, std::span<const float> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<double>(a[i]) * static_cast<double>(b[i]);
    return s;
}

bool Scope::includes(const LanguageCode& lang) const {
    if (!langs_) return true;
    return std::find(langs_->begin(), langs_->end(), lang) != langs_->end();
}

Index::Index(std::vector<Document> docs, EmbeddingMatrix embeddings, std::string fingerprint)
    : docs_(std::move(docs)), embeddings_(std::move(embeddings)), fingerprint_(std::move(fingerprint)) {
    if (embeddings_.count != docs_.size() || embeddings_.values.size() != embeddings_.count * embeddings_.dim) {
        throw Error("index: embedding matrix shape does not match document count");
    }
    for (std::size_t i = 0; i < docs_.size(); ++i) {
        if (!by_id_.emplace(docs_[i].id, i).second) throw DuplicateIdError(docs_[i].id);
        partitions_[docs_[i].lang].push_back(i);
    }
}

std::optional<std::size_t> Index::find(const std::string& doc_id) const {
    const auto it = by_id_.find(doc_id);
    if (it == by_id_.end()) return std::nullopt;
    return it->second;
}

const Document& Index::doc(const std::string& doc_id) const {
    const auto i = find(doc_id);
    if (!i) throw Error("document '" + doc_id + "' not in index");
    return docs_[*i];
}

Index build_index(const std::vector<Document>& corpus, backends::Embedder& embedder, std::size_t batch_size,
                  std::size_t workers) {
    if (corpus.empty()) throw PreconditionError("build_index: empty corpus");
    if (batch_size == 0) throw PreconditionError("build_index: batch_size must be positive");

    const std::size_t n_batches = (corpus.size() + batch_size - 1) / batch_size;
    std::vector<std::vector<backends::Vector>> batches(n_batches);
    parallel_for(n_batches, workers, [&](std::size_t b) {
        const std::size_t begin = b * batch_size;
        const std::size_t end = std::min(corpus.size(), begin + batch_size);
        std::vector<std::string> texts;
        texts.reserve(end - begin);
        for (std::size_t i = begin; i < end; ++i) texts.push_back(corpus[i].text);
        try {
            batches[b] = embedder.embed(texts, backends::EmbedRole::passage);
        } catch (const backends::BackendError& e) {
            throw backends::BackendError("build_index: batch [" + std::to_string(begin) + "," +
                                             std::to_string(end) + ") failed: " + e.what(),
                                         e.attempts());
        }
    });

    EmbeddingMatrix m;
    m.dim = batches.front().front().size();
    m.count = corpus.size();
    m.values.reserve(m.count * m.dim);
    for (std::size_t b = 0; b < n_batches; ++b) {
        for (backends::Vector& v : batches[b]) {
            if (v.size() != m.dim) {
                throw DimensionMismatchError("build_index: batch " + std::to_string(b) + " has dimension " +
                                             std::to_string(v.size()) + ", expected " + std::to_string(m.dim));
            }
            l2_normalize(v);
            m.values.insert(m.values.end(), v.begin(), v.end());
        }
    }
    return Index(corpus, std::move(m), embedder.identify());
}

RankedList retrieve(const Index& index, std::span<const float> query_vec, std::size_t k, const Scope& scope,
                    std::string query_id) {
    if (k == 0) throw PreconditionError("retrieve: k must be >= 1");
    if (query_vec.size() != index.dim()) {
        throw DimensionMismatchError("retrieve: query has dimension " + std::to_string(query_vec.size()) +
                                     ", index has " + std::to_string(index.dim()));
    }
    struct Scored {
        double score;
        std::size_t row;
    };
    std::vector<Scored> scored;
    auto score_rows = [&](const std::vector<std::size_t>& rows) {
        for (std::size_t r : rows) scored.push_back({dot(query_vec, index.embeddings().row(r)), r});
    };
    if (scope.is_all()) {
        scored.reserve(index.size());
        for (std::size_t r = 0; r < index.size(); ++r) scored.push_back({dot(query_vec, index.embeddings().row(r)), r});
    } else {
        for (const auto& [lang, rows] : index.lang_partitions()) {
            if (scope.includes(lang)) score_rows(rows);
        }
    }

    const auto& docs = index.docs();
    auto before = [&](const Scored& a, const Scored& b) {
        return ranks_before(a.score, docs[a.row].id, b.score, docs[b.row].id);
    };
    const std::size_t n = std::min(k, scored.size());
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(n), scored.end(), before);

    RankedList out;
    out.query_id = std::move(query_id);
    out.items.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        out.items.push_back({docs[scored[i].row].id, scored[i].score, static_cast<int>(i) + 1});
    }
    return out;
}

std::vector<RankedItem> rank_candidates(std::vector<std::pair<std::string, double>> candidates) {
    std::unordered_set<std::string_view> seen;
    for (const auto& c : candidates) {
        if (!seen.insert(c.first).second) throw DuplicateIdError(c.first);
    }
    std::sort(candidates.begin(), candidates.end(), [](const auto& a, const auto& b) {
        return ranks_before(a.second, a.first, b.second, b.first);
    });
    std::vector<RankedItem> out;
    out.reserve(candidates.size());
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        out.push_back({std::move(candidates[i].first), candidates[i].second, static_cast<int>(i) + 1});
    }
    return out;
}

// --- file format -----------------------------------------------------------
//
//   <header JSON>\n
//   count*dim little-endian float32, row-major
//   <docs JSONL, one line per row>

namespace {

std::uint32_t to_le(std::uint32_t v) {
    if constexpr (std::endian::native == std::endian::little) return v;
    return ((v & 0xffu) << 24) | ((v & 0xff00u) << 8) | ((v >> 8) & 0xff00u) | (v >> 24);
}

}  // namespace

std::string serialize_index(const Index& index) {
    ordered_json header;
    header["format"] = kIndexFormat;
    header["dim"] = index.dim();
    header["count"] = index.size();
    header["fingerprint"] = index.fingerprint();
    ordered_json langs = ordered_json::object();
    for (const auto& [lang, rows] : index.lang_partitions()) langs[lang.str()] = rows;
    header["languages"] = langs;

    std::string out = header.dump();
    out += '\n';
    const auto& values = index.embeddings().values;
    const std::size_t offset = out.size();
    out.resize(offset + values.size() * sizeof(float));
    for (std::size_t i = 0; i < values.size(); ++i) {
        const std::uint32_t bits = to_le(std::bit_cast<std::uint32_t>(values[i]));
        std::memcpy(out.data() + offset + i * sizeof(float), &bits, sizeof(bits));
    }
    out += serialize_corpus(index.docs());
    return out;
}

void save_index(const Index& index, const std::filesystem::path& path) {
    write_text_file(path, serialize_index(index));
}

LoadedIndex parse_index(std::string_view bytes, const std::optional<std::string>& expected_fingerprint,
                        const LanguageSet& langs) {
    const std::size_t nl = bytes.find('\n');
    if (nl == std::string_view::npos) throw IndexFormatError("index: missing header line");
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(bytes.substr(0, nl));
    } catch (const nlohmann::json::parse_error& e) {
        throw IndexFormatError(std::string("index: malformed header: ") + e.what());
    }
    if (header.value("format", "") != kIndexFormat) throw IndexFormatError("index: unsupported format tag");
    const auto dim = header.at("dim").get<std::size_t>();
    const auto count = header.at("count").get<std::size_t>();
    const auto fingerprint = header.at("fingerprint").get<std::string>();
    if (dim == 0) throw IndexFormatError("index: dim must be positive");

    const std::size_t payload = count * dim * sizeof(float);
    const std::size_t start = nl + 1;
    if (bytes.size() - start < payload) {
        throw IndexFormatError("index: payload truncated: expected " + std::to_string(payload) + " bytes, found " +
                               std::to_string(bytes.size() - start));
    }
    EmbeddingMatrix m;
    m.dim = dim;
    m.count = count;
    m.values.resize(count * dim);
    for (std::size_t i = 0; i < m.values.size(); ++i) {
        std::uint32_t bits;
        std::memcpy(&bits, bytes.data() + start + i * sizeof(float), sizeof(bits));
        m.values[i] = std::bit_cast<float>(to_le(bits));
    }
    std::vector<Document> docs = parse_corpus(bytes.substr(start + payload), langs);
    if (docs.size() != count) {
        throw IndexFormatError("index: header declares " + std::to_string(count) + " documents, found " +
                               std::to_string(docs.size()));
    }

    LoadedIndex loaded{Index(std::move(docs), std::move(m), fingerprint), std::nullopt};
    std::map<LanguageCode, std::vector<std::size_t>> declared;
    for (const auto& [lang, rows] : header.at("languages").items()) {
        declared[LanguageCode(lang)] = rows.get<std::vector<std::size_t>>();
    }
    if (declared != loaded.index.lang_partitions()) {
        throw IndexFormatError("index: language table does not match document languages");
    }
    if (expected_fingerprint && *expected_fingerprint != fingerprint) {
        loaded.warning = "index was built with '" + fingerprint + "', but '" + *expected_fingerprint +
                         "' was requested";
        spdlog::warn("{}", *loaded.warning);
    }
    return loaded;
}

LoadedIndex load_index(const std::filesystem::path& path, const std::optional<std::string>& expected_fingerprint,
                       const LanguageSet& langs) {
    return parse_index(read_text_file(path), expected_fingerprint, langs);
}

}  // namespace mraglab::datastore
