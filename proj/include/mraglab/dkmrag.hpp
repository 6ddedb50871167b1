#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mraglab/backends.hpp"
#include "mraglab/core.hpp"
#include "mraglab/datastore.hpp"

namespace mraglab::dkmrag {

enum class StrategyKind { dkm, all, single, no_refined, no_translated, closed_book };

struct Strategy {
    StrategyKind kind = StrategyKind::dkm;
    /// Target language of `single`; each query's own language when unset.
    std::optional<LanguageCode> lang;

    /// dkm | all | single:<lang> | single:query-lang | no-refined |
    /// no-translated | closed-book
    static Strategy parse(std::string_view s);
    std::string to_string() const;
    bool operator==(const Strategy&) const = default;
};

enum class ConcatOrder { translated_first, refined_first };

struct DkmConfig {
    std::size_t k_retrieve = 50;
    std::size_t k_use = 5;
    ConcatOrder order = ConcatOrder::translated_first;
    backends::DecodeSettings answer_decode{0.0, 256, std::nullopt};
    backends::DecodeSettings rewrite_decode{0.0, 512, std::nullopt};
    std::size_t workers = 1;

    void validate() const;
};

/// Retrieval and re-ranking may use distinct encoders; by default both point
/// at the same one.
struct Backends {
    backends::Embedder& retriever;
    backends::Embedder& reranker;
    backends::Translator& translator;
    backends::Generator& generator;
};

struct Passage {
    std::string doc_id;
    LanguageCode original_lang;
    bool was_translated = false;
    std::string text;
};

struct PassageBundle {
    std::vector<Passage> p_translated;
    std::vector<Passage> p_refined;
};

struct PromptRecord {
    std::string purpose;  // "rewrite:<doc_id>" or "answer"
    std::vector<backends::ChatMessage> messages;
};

struct RunTrace {
    std::string query_id;
    LanguageCode query_lang;
    Strategy strategy;
    /// Set for the full pipeline, where both passage sets are concatenated.
    std::optional<ConcatOrder> order;
    bool ok = true;
    std::string failed_stage;
    std::string error;
    /// Doc ids kept after re-ranking, in re-rank order.
    std::vector<std::string> retrieved;
    std::vector<std::string> notes;
    /// Passages as they appear in the final prompt.
    std::vector<Passage> passages;
    std::vector<PromptRecord> prompts;
    std::string answer;
};

/// Step #1: top-k_retrieve over all languages, re-ranked by query-passage
/// cosine, truncated to k_use.
std::vector<Document> retrieve_and_rerank(const Query& query, const datastore::Index& index,
                                          const DkmConfig& config, const Backends& backends);

/// Translates passages not already in `target`; the others are copied with
/// was_translated = false.
std::vector<Passage> unify_language(const std::vector<Document>& docs, const LanguageCode& target,
                                    backends::Translator& translator, std::vector<std::string>* notes = nullptr);

RunTrace run_strategy(const Query& query, const datastore::Index& index, const DkmConfig& config,
                      const Backends& backends, const Strategy& strategy);

RunTrace run_dkm(const Query& query, const datastore::Index& index, const DkmConfig& config,
                 const Backends& backends);
/// `all`, `single` or `closed_book`.
RunTrace run_baseline(const Query& query, const datastore::Index& index, const DkmConfig& config,
                      const Backends& backends, const Strategy& strategy);
/// `no_refined` or `no_translated`.
RunTrace run_ablation(const Query& query, const datastore::Index& index, const DkmConfig& config,
                      const Backends& backends, StrategyKind variant);

std::vector<RunTrace> run_queries(const std::vector<Query>& queries, const datastore::Index& index,
                                  const DkmConfig& config, const Backends& backends, const Strategy& strategy);

nlohmann::ordered_json to_json(const RunTrace& trace);
RunTrace trace_from_json(const nlohmann::json& j);
std::string traces_jsonl(const std::vector<RunTrace>& traces);

}  // namespace mraglab::dkmrag
