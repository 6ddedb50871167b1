#pragma once

#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "mraglab/core.hpp"
#include "mraglab/dkmrag.hpp"
#include "mraglab/eval.hpp"
#include "mraglab/genpref.hpp"
#include "mraglab/mlrs.hpp"

namespace mraglab::report {

enum class Format { json, csv, markdown };

Format parse_format(std::string_view s);

class EmptyReportError : public Error {
public:
    using Error::Error;
};

/// (L_q x target) grid, one row per (query language, encoder). Cells off the
/// L_q = target column carry their difference to that column.
std::string mlrs_grid(const std::vector<mlrs::MlrsReport>& reports, Format format);

struct RecallRow {
    std::string query_id;
    LanguageCode query_lang;
    std::string strategy;
    double recall = 0.0;
};

struct RecallReport {
    std::vector<RecallRow> rows;
    /// Queries in the traces without gold answers, or without a trace.
    std::vector<std::string> skipped;
};

/// Scores every ok trace against the gold answers of its query.
RecallReport score_traces(const std::vector<dkmrag::RunTrace>& traces, const std::vector<Query>& queries,
                          const eval::RecallOptions& options = {});

nlohmann::ordered_json to_json(const RecallReport& report);
RecallReport recall_from_json(const nlohmann::json& j);

/// Strategy rows by query-language columns plus an average column.
std::string recall_grid(const std::vector<RecallRow>& rows, Format format);

std::string similarity_table(const genpref::PreferenceScores& scores, Format format);

nlohmann::ordered_json to_json(const eval::CorrelationResult& result, std::uint64_t n_perm, std::uint64_t seed);
std::string correlation_summary(const nlohmann::json& correlation, Format format);

/// Renders any report JSON produced by the toolkit (dispatching on its
/// "schema" field). Several MLRS reports are merged into one grid; other
/// kinds must come alone.
std::string emit_report(const std::vector<nlohmann::json>& inputs, Format format);

}  // namespace mraglab::report
