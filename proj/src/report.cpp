#include "mraglab/report.hpp"

#include <algorithm>
#include <set>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

namespace mraglab::report {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

Format parse_format(std::string_view s) {
    if (s == "json") return Format::json;
    if (s == "csv") return Format::csv;
    if (s == "markdown" || s == "md" || s == "markdown-table") return Format::markdown;
    throw Error("unknown report format '" + std::string(s) + "'");
}

namespace {

// Known languages in their canonical order, then anything else alphabetically.
std::vector<LanguageCode> ordered_langs(const std::set<LanguageCode>& langs) {
    std::vector<LanguageCode> out;
    for (const LanguageCode& l : default_languages()) {
        if (langs.count(l)) out.push_back(l);
    }
    for (const LanguageCode& l : langs) {
        if (std::find(out.begin(), out.end(), l) == out.end()) out.push_back(l);
    }
    return out;
}

std::string md_row(const std::vector<std::string>& cells) {
    std::string out = "|";
    for (const std::string& c : cells) out += " " + c + " |";
    return out + "\n";
}

std::string md_rule(std::size_t text_cols, std::size_t num_cols) {
    std::string out = "|";
    for (std::size_t i = 0; i < text_cols; ++i) out += "---|";
    for (std::size_t i = 0; i < num_cols; ++i) out += "---:|";
    return out + "\n";
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

// Shortest representation that round-trips.
std::string full(double v) { return fmt::format("{}", v); }

}  // namespace

std::string mlrs_grid(const std::vector<mlrs::MlrsReport>& reports, Format format) {
    if (reports.empty()) throw EmptyReportError("no MLRS reports");
    struct Acc {
        std::size_t n = 0;
        double sum = 0.0;  // n-weighted
    };
    using RowKey = std::pair<LanguageCode, std::string>;
    std::map<RowKey, std::map<LanguageCode, Acc>> rows;
    std::set<LanguageCode> targets;
    std::set<LanguageCode> query_langs;
    for (const mlrs::MlrsReport& r : reports) {
        for (const auto& [cell, stats] : r.cells) {
            Acc& acc = rows[{cell.first, r.encoder}][cell.second];
            acc.n += stats.n;
            acc.sum += stats.mean * static_cast<double>(stats.n);
            targets.insert(cell.second);
            query_langs.insert(cell.first);
        }
    }
    if (rows.empty()) throw EmptyReportError("MLRS reports contain no scored cells");
    const std::vector<LanguageCode> columns = ordered_langs(targets);

    std::vector<RowKey> row_order;
    for (const LanguageCode& lq : ordered_langs(query_langs)) {
        for (const auto& [key, cells] : rows) {
            if (key.first == lq) row_order.push_back(key);
        }
    }

    const auto mean_of = [](const Acc& a) { return a.sum / static_cast<double>(a.n); };
    const auto delta_of = [&](const RowKey& key, const LanguageCode& target) -> std::optional<double> {
        const auto& cells = rows.at(key);
        const auto same = cells.find(key.first);
        if (same == cells.end() || target == key.first) return std::nullopt;
        return mean_of(cells.at(target)) - mean_of(same->second);
    };

    if (format == Format::json) {
        ordered_json j;
        j["schema"] = "mraglab.mlrs-grid/1";
        std::vector<std::string> cols;
        for (const LanguageCode& c : columns) cols.push_back(c.str());
        j["columns"] = cols;
        ordered_json jrows = ordered_json::array();
        for (const RowKey& key : row_order) {
            ordered_json cells = ordered_json::object();
            for (const auto& [target, acc] : rows.at(key)) {
                ordered_json cell{{"n", acc.n}, {"mlrs", mean_of(acc)}};
                if (auto d = delta_of(key, target)) cell["delta"] = *d;
                cells[target.str()] = cell;
            }
            jrows.push_back({{"query_lang", key.first.str()}, {"encoder", key.second}, {"cells", cells}});
        }
        j["rows"] = jrows;
        return j.dump(2) + "\n";
    }
    if (format == Format::csv) {
        std::string out = "query_lang,encoder,target_lang,n,mlrs,delta_vs_same_lang\n";
        for (const RowKey& key : row_order) {
            for (const LanguageCode& target : columns) {
                const auto& cells = rows.at(key);
                const auto it = cells.find(target);
                if (it == cells.end()) continue;
                const auto d = delta_of(key, target);
                out += fmt::format("{},{},{},{},{},{}\n", key.first.str(), csv_field(key.second), target.str(),
                                   it->second.n, full(mean_of(it->second)), d ? full(*d) : "");
            }
        }
        return out;
    }
    std::vector<std::string> header{"L_q", "encoder"};
    for (const LanguageCode& c : columns) header.push_back(c.str());
    std::string out = md_row(header) + md_rule(2, columns.size());
    for (const RowKey& key : row_order) {
        std::vector<std::string> line{key.first.str(), key.second};
        for (const LanguageCode& target : columns) {
            const auto& cells = rows.at(key);
            const auto it = cells.find(target);
            if (it == cells.end()) {
                line.push_back("-");
                continue;
            }
            std::string cell = fmt::format("{:.2f}", mean_of(it->second));
            if (auto d = delta_of(key, target)) cell += fmt::format(" ({:+.2f})", *d);
            line.push_back(cell);
        }
        out += md_row(line);
    }
    return out;
}

RecallReport score_traces(const std::vector<dkmrag::RunTrace>& traces, const std::vector<Query>& queries,
                          const eval::RecallOptions& options) {
    std::map<std::string, const Query*> by_id;
    for (const Query& q : queries) by_id[q.id] = &q;
    RecallReport report;
    for (const dkmrag::RunTrace& t : traces) {
        const auto it = by_id.find(t.query_id);
        if (!t.ok || it == by_id.end() || it->second->gold_answers.empty()) {
            report.skipped.push_back(t.query_id);
            continue;
        }
        const eval::RecallResult r = eval::char3_recall(t.answer, it->second->gold_answers, options);
        if (r.per_gold.empty()) {
            report.skipped.push_back(t.query_id);
            continue;
        }
        report.rows.push_back({t.query_id, t.query_lang, t.strategy.to_string(), r.recall});
    }
    if (!report.skipped.empty()) {
        spdlog::warn("recall: {} trace(s) skipped (failed, unknown query or no gold answers)", report.skipped.size());
    }
    return report;
}

ordered_json to_json(const RecallReport& report) {
    ordered_json j;
    j["schema"] = "mraglab.recall-report/1";
    ordered_json rows = ordered_json::array();
    for (const RecallRow& r : report.rows) {
        rows.push_back({{"query_id", r.query_id},
                        {"query_lang", r.query_lang.str()},
                        {"strategy", r.strategy},
                        {"recall", r.recall}});
    }
    j["rows"] = rows;
    j["skipped"] = report.skipped;
    return j;
}

RecallReport recall_from_json(const json& j) {
    if (j.value("schema", "") != "mraglab.recall-report/1") throw Error("not a recall report");
    RecallReport report;
    for (const auto& r : j.at("rows")) {
        report.rows.push_back({r.at("query_id").get<std::string>(), LanguageCode(r.at("query_lang").get<std::string>()),
                               r.at("strategy").get<std::string>(), r.at("recall").get<double>()});
    }
    report.skipped = j.at("skipped").get<std::vector<std::string>>();
    return report;
}

std::string recall_grid(const std::vector<RecallRow>& rows, Format format) {
    if (rows.empty()) throw EmptyReportError("recall report has no scored rows");
    struct Acc {
        std::size_t n = 0;
        double sum = 0.0;
    };
    std::map<std::string, std::map<LanguageCode, Acc>> grid;
    std::map<std::string, Acc> overall;
    std::set<LanguageCode> langs;
    for (const RecallRow& r : rows) {
        Acc& a = grid[r.strategy][r.query_lang];
        ++a.n;
        a.sum += r.recall;
        ++overall[r.strategy].n;
        overall[r.strategy].sum += r.recall;
        langs.insert(r.query_lang);
    }
    const std::vector<LanguageCode> columns = ordered_langs(langs);
    const auto mean_of = [](const Acc& a) { return a.sum / static_cast<double>(a.n); };

    if (format == Format::json) {
        ordered_json j;
        j["schema"] = "mraglab.recall-grid/1";
        ordered_json jrows = ordered_json::array();
        for (const auto& [strategy, cells] : grid) {
            ordered_json c = ordered_json::object();
            for (const LanguageCode& l : columns) {
                if (auto it = cells.find(l); it != cells.end()) c[l.str()] = {{"n", it->second.n}, {"recall", mean_of(it->second)}};
            }
            jrows.push_back({{"strategy", strategy}, {"cells", c}, {"avg", mean_of(overall.at(strategy))}});
        }
        j["rows"] = jrows;
        return j.dump(2) + "\n";
    }
    if (format == Format::csv) {
        std::string out = "strategy,query_lang,n,recall\n";
        for (const auto& [strategy, cells] : grid) {
            for (const LanguageCode& l : columns) {
                if (auto it = cells.find(l); it != cells.end()) {
                    out += fmt::format("{},{},{},{}\n", csv_field(strategy), l.str(), it->second.n, full(mean_of(it->second)));
                }
            }
            out += fmt::format("{},avg,{},{}\n", csv_field(strategy), overall.at(strategy).n,
                               full(mean_of(overall.at(strategy))));
        }
        return out;
    }
    std::vector<std::string> header{"strategy"};
    for (const LanguageCode& l : columns) header.push_back(l.str());
    header.push_back("avg");
    std::string out = md_row(header) + md_rule(1, columns.size() + 1);
    for (const auto& [strategy, cells] : grid) {
        std::vector<std::string> line{strategy};
        for (const LanguageCode& l : columns) {
            const auto it = cells.find(l);
            line.push_back(it == cells.end() ? "-" : fmt::format("{:.2f}", 100.0 * mean_of(it->second)));
        }
        line.push_back(fmt::format("{:.2f}", 100.0 * mean_of(overall.at(strategy))));
        out += md_row(line);
    }
    return out;
}

std::string similarity_table(const genpref::PreferenceScores& scores, Format format) {
    const genpref::SimilarityMatrix& m = scores.mean_matrix;
    if (m.size() == 0) throw EmptyReportError("similarity report has no matrix");
    if (format == Format::csv) return genpref::matrix_csv(m);
    if (format == Format::json) {
        ordered_json j;
        j["schema"] = "mraglab.similarity-table/1";
        ordered_json rows = ordered_json::array();
        for (std::size_t i = 0; i < m.size(); ++i) {
            const LanguageCode& l = m.langs()[i];
            std::vector<double> row;
            for (std::size_t k = 0; k < m.size(); ++k) row.push_back(m.at(i, k));
            rows.push_back({{"lang", l.str()},
                            {"similarity", row},
                            {"preference_excluding_diagonal", scores.excluding_diagonal.at(l)},
                            {"preference_including_diagonal", scores.including_diagonal.at(l)}});
        }
        j["rows"] = rows;
        return j.dump(2) + "\n";
    }
    std::vector<std::string> header{"lang"};
    for (const LanguageCode& l : m.langs()) header.push_back(l.str());
    header.push_back("pref (excl. diag)");
    header.push_back("pref (incl. diag)");
    std::string out = md_row(header) + md_rule(1, m.size() + 2);
    for (std::size_t i = 0; i < m.size(); ++i) {
        const LanguageCode& l = m.langs()[i];
        std::vector<std::string> line{l.str()};
        for (std::size_t k = 0; k < m.size(); ++k) line.push_back(fmt::format("{:.3f}", m.at(i, k)));
        line.push_back(fmt::format("{:.4f}", scores.excluding_diagonal.at(l)));
        line.push_back(fmt::format("{:.4f}", scores.including_diagonal.at(l)));
        out += md_row(line);
    }
    return out;
}

ordered_json to_json(const eval::CorrelationResult& r, std::uint64_t n_perm, std::uint64_t seed) {
    ordered_json j;
    j["schema"] = "mraglab.correlation/1";
    j["n"] = r.n;
    j["pearson_r"] = r.pearson_r;
    j["spearman_rho"] = r.spearman_rho;
    j["p_pearson_permutation"] = r.p_pearson;
    j["p_spearman_permutation"] = r.p_spearman;
    j["p_pearson_t_approx"] = r.p_pearson_t;
    j["p_spearman_t_approx"] = r.p_spearman_t;
    j["n_perm"] = n_perm;
    j["seed"] = seed;
    j["method"] = r.method;
    return j;
}

std::string correlation_summary(const json& c, Format format) {
    if (c.value("schema", "") != "mraglab.correlation/1") throw Error("not a correlation report");
    const double r = c.at("pearson_r").get<double>();
    const double rho = c.at("spearman_rho").get<double>();
    const double pp = c.at("p_pearson_permutation").get<double>();
    const double ps = c.at("p_spearman_permutation").get<double>();
    const double tp = c.at("p_pearson_t_approx").get<double>();
    const double ts = c.at("p_spearman_t_approx").get<double>();
    if (format == Format::json) {
        ordered_json j = ordered_json::parse(c.dump());
        return j.dump(2) + "\n";
    }
    if (format == Format::csv) {
        std::string out = "statistic,value,p_permutation,p_t_approx\n";
        out += fmt::format("pearson,{},{},{}\n", full(r), full(pp), full(tp));
        out += fmt::format("spearman,{},{},{}\n", full(rho), full(ps), full(ts));
        return out;
    }
    std::string out = md_row({"statistic", "value", "p (permutation)", "p (t approx.)"}) + md_rule(1, 3);
    out += md_row({"pearson", fmt::format("{:.5f}", r), fmt::format("{:.3e}", pp), fmt::format("{:.3e}", tp)});
    out += md_row({"spearman", fmt::format("{:.5f}", rho), fmt::format("{:.3e}", ps), fmt::format("{:.3e}", ts)});
    out += fmt::format("\nn = {}, {} permutations, seed {}\n", c.at("n").get<std::size_t>(),
                       c.at("n_perm").get<std::uint64_t>(), c.at("seed").get<std::uint64_t>());
    return out;
}

namespace {

genpref::PreferenceScores preference_from_json(const json& j) {
    if (!j.contains("mean_matrix")) throw EmptyReportError("genpref report has no successfully scored query");
    genpref::PreferenceScores s;
    for (const auto& l : j.at("langs")) s.langs.emplace_back(l.get<std::string>());
    std::vector<double> values;
    for (const auto& row : j.at("mean_matrix")) {
        for (const auto& v : row) values.push_back(v.get<double>());
    }
    s.mean_matrix = genpref::SimilarityMatrix(s.langs, std::move(values));
    for (const LanguageCode& l : s.langs) {
        s.excluding_diagonal[l] = j.at("preference_excluding_diagonal").at(l.str()).get<double>();
        s.including_diagonal[l] = j.at("preference_including_diagonal").at(l.str()).get<double>();
        s.column_excluding_diagonal[l] = j.at("preference_column_excluding_diagonal").at(l.str()).get<double>();
    }
    return s;
}

}  // namespace

std::string emit_report(const std::vector<json>& inputs, Format format) {
    if (inputs.empty()) throw EmptyReportError("no report given");
    std::vector<std::string> schemas;
    for (const json& j : inputs) {
        if (!j.is_object() || j.empty()) throw EmptyReportError("empty report object");
        schemas.push_back(j.value("schema", ""));
    }
    const std::string& schema = schemas.front();
    if (std::any_of(schemas.begin(), schemas.end(), [&](const std::string& s) { return s != schema; })) {
        throw Error("cannot combine reports of different kinds");
    }
    if (schema == "mraglab.mlrs-report/1") {
        std::vector<mlrs::MlrsReport> reports;
        for (const json& j : inputs) {
            if (j.at("queries").empty()) throw EmptyReportError("MLRS report has no scored queries");
            reports.push_back(mlrs::report_from_json(j));
        }
        return mlrs_grid(reports, format);
    }
    if (inputs.size() != 1) throw Error("only MLRS reports can be combined");
    const json& j = inputs.front();
    if (schema == "mraglab.recall-report/1") return recall_grid(recall_from_json(j).rows, format);
    if (schema == "mraglab.genpref-report/1") return similarity_table(preference_from_json(j), format);
    if (schema == "mraglab.correlation/1") return correlation_summary(j, format);
    throw Error("unknown report schema '" + schema + "'");
}

}  // namespace mraglab::report
