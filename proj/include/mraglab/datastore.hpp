#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "mraglab/backends.hpp"
#include "mraglab/core.hpp"

namespace mraglab::datastore {

class DimensionMismatchError : public Error {
public:
    using Error::Error;
};

class IndexFormatError : public Error {
public:
    using Error::Error;
};

/// Row-major count x dim float32 matrix; every row has unit L2 norm.
struct EmbeddingMatrix {
    std::size_t dim = 0;
    std::size_t count = 0;
    std::vector<float> values;

    std::span<const float> row(std::size_t i) const { return {values.data() + i * dim, dim}; }
};

/// Normalizes in place (computed in double). Throws Error on a zero vector.
void l2_normalize(std::vector<float>& v);

/// Dot product accumulated in double over float inputs, in index order.
double dot(std::span<const float> a, std::span<const float> b);

/// Which documents a retrieval may return.
class Scope {
public:
    static Scope all() { return Scope(); }
    static Scope single(const LanguageCode& lang) { return Scope({lang}); }
    static Scope of(std::vector<LanguageCode> langs) { return Scope(std::move(langs)); }

    bool is_all() const noexcept { return !langs_.has_value(); }
    bool includes(const LanguageCode& lang) const;
    const std::vector<LanguageCode>& languages() const { return *langs_; }

private:
    Scope() = default;
    explicit Scope(std::vector<LanguageCode> langs) : langs_(std::move(langs)) {}
    std::optional<std::vector<LanguageCode>> langs_;
};

class Index {
public:
    Index() = default;
    Index(std::vector<Document> docs, EmbeddingMatrix embeddings, std::string fingerprint);

    const std::vector<Document>& docs() const noexcept { return docs_; }
    const EmbeddingMatrix& embeddings() const noexcept { return embeddings_; }
    const std::map<LanguageCode, std::vector<std::size_t>>& lang_partitions() const noexcept {
        return partitions_;
    }
    const std::string& fingerprint() const noexcept { return fingerprint_; }
    std::size_t dim() const noexcept { return embeddings_.dim; }
    std::size_t size() const noexcept { return docs_.size(); }

    /// Row index of a document id, if present.
    std::optional<std::size_t> find(const std::string& doc_id) const;
    const Document& doc(const std::string& doc_id) const;

private:
    std::vector<Document> docs_;
    EmbeddingMatrix embeddings_;
    std::map<LanguageCode, std::vector<std::size_t>> partitions_;
    std::unordered_map<std::string, std::size_t> by_id_;
    std::string fingerprint_;
};

Index build_index(const std::vector<Document>& corpus, backends::Embedder& embedder, std::size_t batch_size,
                  std::size_t workers = 1);

/// Exact top-k by cosine similarity over the documents in scope. Ranks follow
/// score descending, then doc id ascending. An empty scope yields an empty list.
RankedList retrieve(const Index& index, std::span<const float> query_vec, std::size_t k, const Scope& scope,
                    std::string query_id = {});

/// Assigns ranks 1..n to (doc_id, score) candidates using the same ordering.
std::vector<RankedItem> rank_candidates(std::vector<std::pair<std::string, double>> candidates);

std::string serialize_index(const Index& index);
void save_index(const Index& index, const std::filesystem::path& path);

struct LoadedIndex {
    Index index;
    /// Set when `expected_fingerprint` was given and differs from the file.
    std::optional<std::string> warning;
};

LoadedIndex parse_index(std::string_view bytes, const std::optional<std::string>& expected_fingerprint = {},
                        const LanguageSet& langs = LanguageSet());
LoadedIndex load_index(const std::filesystem::path& path,
                       const std::optional<std::string>& expected_fingerprint = {},
                       const LanguageSet& langs = LanguageSet());

}  // namespace mraglab::datastore
