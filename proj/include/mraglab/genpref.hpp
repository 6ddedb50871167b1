#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mraglab/backends.hpp"
#include "mraglab/core.hpp"
#include "mraglab/datastore.hpp"

namespace mraglab::genpref {

/// en, ko, zh, fr, ja, it, pt, es.
const std::vector<LanguageCode>& default_answer_languages();

/// The generator's output could not be turned into an AnswerSet.
class AnswerFormatError : public Error {
public:
    using Error::Error;
};

/// The completion is not a JSON object at all; the only repairable case.
class InvalidJsonError : public AnswerFormatError {
public:
    using AnswerFormatError::AnswerFormatError;
};

struct AnswerSet {
    std::string query_id;
    std::vector<std::string> doc_ids;
    std::vector<LanguageCode> langs;
    std::map<LanguageCode, std::string> answers;
    int repair_count = 0;
    std::vector<backends::ChatMessage> prompt;
};

/// Parses a completion into answers for exactly `langs`. Throws
/// AnswerFormatError for invalid JSON, missing or extra keys, or empty values.
std::map<LanguageCode, std::string> parse_answers(const std::string& completion,
                                                  const std::vector<LanguageCode>& langs);

/// One generation call; on a JSON parse failure, one repair call with an
/// extra user turn.
AnswerSet generate_multilingual(const Query& query, const std::vector<Document>& top_docs,
                                const std::vector<LanguageCode>& langs, backends::Generator& generator,
                                const backends::DecodeSettings& decode = {});

class SimilarityMatrix {
public:
    SimilarityMatrix() = default;
    SimilarityMatrix(std::vector<LanguageCode> langs, std::vector<double> values);

    const std::vector<LanguageCode>& langs() const noexcept { return langs_; }
    std::size_t size() const noexcept { return langs_.size(); }
    double at(std::size_t i, std::size_t j) const { return values_[i * langs_.size() + j]; }
    const std::vector<double>& values() const noexcept { return values_; }

private:
    std::vector<LanguageCode> langs_;
    std::vector<double> values_;
};

struct SimilarityOptions {
    std::size_t max_chars = 512;
};

struct SimilarityResult {
    SimilarityMatrix matrix;
    /// Languages whose answer was cut to max_chars before embedding.
    std::vector<LanguageCode> truncated;
};

SimilarityResult similarity_matrix(const AnswerSet& answers, backends::Embedder& embedder,
                                   const SimilarityOptions& options = {});

struct PreferenceScores {
    std::vector<LanguageCode> langs;
    SimilarityMatrix mean_matrix;
    /// Row mean without the diagonal.
    std::map<LanguageCode, double> excluding_diagonal;
    /// Row mean with the diagonal.
    std::map<LanguageCode, double> including_diagonal;
    /// Column mean without the diagonal; equals the row mean for symmetric input.
    std::map<LanguageCode, double> column_excluding_diagonal;
};

PreferenceScores preference_scores(const std::vector<SimilarityMatrix>& matrices);

struct QueryOutcome {
    std::string query_id;
    std::optional<AnswerSet> answers;
    std::optional<SimilarityResult> similarity;
    std::string error;
};

struct GenprefRunOptions {
    std::size_t top_docs = 5;
    std::vector<LanguageCode> langs = default_answer_languages();
    backends::DecodeSettings decode;
    SimilarityOptions similarity;
    std::size_t workers = 1;
};

struct GenprefReport {
    std::vector<QueryOutcome> outcomes;
    std::optional<PreferenceScores> preference;
    std::size_t failed = 0;
};

/// Retrieves top documents with `retriever`, asks `generator` for the
/// multilingual answers and embeds them with `similarity_embedder`.
GenprefReport run_genpref(const std::vector<Query>& queries, const datastore::Index& index,
                          backends::Embedder& retriever, backends::Generator& generator,
                          backends::Embedder& similarity_embedder, const GenprefRunOptions& options);

nlohmann::ordered_json to_json(const GenprefReport& report);
/// Heatmap-friendly CSV of a matrix: header row of languages, one row each.
std::string matrix_csv(const SimilarityMatrix& m);

}  // namespace mraglab::genpref
