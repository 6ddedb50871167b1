#pragma once

#include <cstdint>
#include <future>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mraglab/backends.hpp"
#include "mraglab/core.hpp"
#include "mraglab/datastore.hpp"

namespace mraglab::mlrs {

struct RetrievedDoc {
    std::string doc_id;
    LanguageCode lang;
    std::string text;
    int r_init = 0;
};

/// Initial top-k for one query, ranks 1..k in order.
struct InitialRetrieval {
    Query query;
    std::vector<RetrievedDoc> items;
};

InitialRetrieval initial_retrieval(const Query& query, const datastore::Index& index,
                                   backends::Embedder& embedder, std::size_t k);

struct LanguageSplit {
    std::vector<RetrievedDoc> same_lang;
    std::vector<RetrievedDoc> diff_lang;
};

LanguageSplit split_by_language(const InitialRetrieval& retrieval);

struct TranslatedDoc {
    std::string doc_id;
    LanguageCode original_lang;
    LanguageCode target_lang;
    std::string translated_text;
    int r_init = 0;
};

/// Translations keyed by (doc_id, target). Concurrent lookups of the same
/// missing key wait for a single backend call.
class TranslationCache {
public:
    std::size_t size() const;

private:
    friend std::vector<TranslatedDoc> translate_diff(const std::vector<RetrievedDoc>&, backends::Translator&,
                                                     const LanguageCode&, TranslationCache*);
    using Key = std::pair<std::string, std::string>;
    mutable std::mutex mutex_;
    std::map<Key, std::shared_future<std::string>> entries_;
};

/// Translates every entry into `target`. Entries must not already be in
/// `target`. One backend call per source language among cache misses.
std::vector<TranslatedDoc> translate_diff(const std::vector<RetrievedDoc>& diff, backends::Translator& translator,
                                          const LanguageCode& target, TranslationCache* cache = nullptr);

struct PoolEntry {
    std::string doc_id;
    std::string text;
};

/// Re-ranks the pool against the query by cosine similarity; returns the new
/// rank of every pool member.
std::map<std::string, int> rerank_pool(const Query& query, const std::vector<PoolEntry>& pool,
                                       backends::Embedder& embedder);

struct LedgerEntry {
    std::string doc_id;
    LanguageCode original_lang;
    int r_init = 0;
    int r_rerank = 0;
    std::int64_t delta = 0;
    std::int64_t delta_max = 0;
};

struct MlrsQueryResult {
    std::string query_id;
    LanguageCode query_lang;
    LanguageCode target_lang;
    std::size_t pool_size = 0;
    std::vector<LedgerEntry> ledger;
    std::int64_t delta_sum = 0;
    std::int64_t delta_max_sum = 0;
    double score = 0.0;
};

/// Fills delta, delta_max, the sums and the score from (r_init, r_rerank).
MlrsQueryResult score_ledger(MlrsQueryResult result);

struct MlrsOptions {
    /// Language the non-query-language documents are translated into; the
    /// query language when unset.
    std::optional<LanguageCode> target;
};

MlrsQueryResult mlrs_query(const InitialRetrieval& retrieval, backends::Translator& translator,
                           backends::Embedder& embedder, const MlrsOptions& options = {},
                           TranslationCache* cache = nullptr);

struct QueryFailure {
    std::string query_id;
    std::string stage;
    std::string message;
};

struct CellStats {
    std::size_t n = 0;
    double mean = 0.0;
};

struct MlrsReport {
    std::vector<MlrsQueryResult> results;
    std::vector<QueryFailure> failures;
    double corpus_score = 0.0;
    std::size_t empty_diff_queries = 0;
    /// (query language, target language) -> mean MLRS_q.
    std::map<std::pair<LanguageCode, LanguageCode>, CellStats> cells;
    std::string encoder;
    std::size_t k = 0;
};

/// Mean of per-query scores. Throws Error when `results` is empty.
MlrsReport mlrs_corpus(std::vector<MlrsQueryResult> results, std::vector<QueryFailure> failures = {});

struct RunOptions {
    std::size_t k = 50;
    /// Unset: each query's own language.
    std::optional<LanguageCode> target;
    std::size_t workers = 1;
};

/// Full pipeline over a query set. Queries whose backends fail are recorded
/// in `failures` and excluded from the mean.
MlrsReport run_mlrs(const std::vector<Query>& queries, const datastore::Index& index,
                    backends::Translator& translator, backends::Embedder& embedder, const RunOptions& options);

nlohmann::ordered_json to_json(const MlrsReport& report);
MlrsReport report_from_json(const nlohmann::json& j);

}  // namespace mraglab::mlrs
