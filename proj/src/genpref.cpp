#include "mraglab/genpref.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "mraglab/parallel.hpp"
#include "mraglab/prompts.hpp"
#include "mraglab/text.hpp"

namespace mraglab::genpref {

using backends::ChatMessage;
using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

const std::vector<LanguageCode>& default_answer_languages() {
    static const std::vector<LanguageCode> langs = [] {
        std::vector<LanguageCode> out;
        for (const char* c : {"en", "ko", "zh", "fr", "ja", "it", "pt", "es"}) out.emplace_back(c);
        return out;
    }();
    return langs;
}

namespace {

// Accepts a bare object or one wrapped in a ``` / ```json fence.
std::string unfence(const std::string& completion) {
    std::string s = text::trim(completion);
    if (s.rfind("```", 0) != 0) return s;
    const std::size_t first_nl = s.find('\n');
    const std::size_t last_fence = s.rfind("```");
    if (first_nl == std::string::npos || last_fence <= first_nl) return s;
    return text::trim(s.substr(first_nl + 1, last_fence - first_nl - 1));
}

}  // namespace

std::map<LanguageCode, std::string> parse_answers(const std::string& completion,
                                                  const std::vector<LanguageCode>& langs) {
    json j;
    try {
        j = json::parse(unfence(completion));
    } catch (const json::parse_error& e) {
        throw InvalidJsonError(std::string("completion is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw InvalidJsonError("completion is not a JSON object");

    std::map<LanguageCode, std::string> out;
    for (const LanguageCode& lang : langs) {
        const auto it = j.find(lang.str());
        if (it == j.end()) throw AnswerFormatError("answer for '" + lang.str() + "' missing");
        if (!it->is_string() || text::trim(it->get<std::string>()).empty()) {
            throw AnswerFormatError("answer for '" + lang.str() + "' is empty or not a string");
        }
        out[lang] = it->get<std::string>();
    }
    if (j.size() != langs.size()) {
        std::vector<std::string> extra;
        for (const auto& [key, value] : j.items()) {
            if (std::none_of(langs.begin(), langs.end(), [&](const LanguageCode& l) { return l.str() == key; })) {
                extra.push_back(key);
            }
        }
        throw AnswerFormatError("unexpected keys: " + text::join(extra, ", "));
    }
    return out;
}

AnswerSet generate_multilingual(const Query& query, const std::vector<Document>& top_docs,
                                const std::vector<LanguageCode>& langs, backends::Generator& generator,
                                const backends::DecodeSettings& decode) {
    if (top_docs.empty()) throw PreconditionError("generate_multilingual: no documents");
    if (langs.empty()) throw PreconditionError("generate_multilingual: no languages");
    if (std::set<LanguageCode>(langs.begin(), langs.end()).size() != langs.size()) {
        throw PreconditionError("generate_multilingual: duplicate languages");
    }

    AnswerSet set;
    set.query_id = query.id;
    set.langs = langs;
    std::vector<std::string> passages;
    for (const Document& d : top_docs) {
        set.doc_ids.push_back(d.id);
        passages.push_back(d.text);
    }
    set.prompt = prompts::multilingual_answers(query.text, passages, langs);

    const std::string first = generator.generate(set.prompt, decode);
    try {
        set.answers = parse_answers(first, langs);
        return set;
    } catch (const InvalidJsonError& e) {
        spdlog::info("genpref: query '{}': {}; retrying once", query.id, e.what());
    }
    std::vector<ChatMessage> repair = set.prompt;
    repair.push_back(prompts::json_repair_turn(langs));
    set.repair_count = 1;
    set.answers = parse_answers(generator.generate(repair, decode), langs);
    set.prompt = std::move(repair);
    return set;
}

SimilarityMatrix::SimilarityMatrix(std::vector<LanguageCode> langs, std::vector<double> values)
    : langs_(std::move(langs)), values_(std::move(values)) {
    if (values_.size() != langs_.size() * langs_.size()) throw Error("similarity matrix: shape mismatch");
}

SimilarityResult similarity_matrix(const AnswerSet& answers, backends::Embedder& embedder,
                                   const SimilarityOptions& options) {
    const std::size_t n = answers.langs.size();
    SimilarityResult result;
    std::vector<std::string> texts;
    texts.reserve(n);
    for (const LanguageCode& lang : answers.langs) {
        const auto it = answers.answers.find(lang);
        if (it == answers.answers.end()) throw PreconditionError("similarity_matrix: missing answer for " + lang.str());
        if (text::codepoint_length(it->second) > options.max_chars) {
            result.truncated.push_back(lang);
            texts.push_back(text::truncate_codepoints(it->second, options.max_chars));
        } else {
            texts.push_back(it->second);
        }
    }
    const std::vector<backends::Vector> vecs = embedder.embed(texts, backends::EmbedRole::passage);

    std::vector<double> norms(n);
    for (std::size_t i = 0; i < n; ++i) {
        double ss = 0.0;
        for (float x : vecs[i]) ss += static_cast<double>(x) * x;
        if (!(ss > 0.0)) throw backends::ProtocolError("similarity_matrix: zero embedding for " + answers.langs[i].str());
        norms[i] = std::sqrt(ss);
    }
    auto cosine = [&](std::size_t i, std::size_t j) {
        double s = 0.0;
        for (std::size_t d = 0; d < vecs[i].size(); ++d) s += static_cast<double>(vecs[i][d]) * vecs[j][d];
        return s / (norms[i] * norms[j]);
    };
    std::vector<double> values(n * n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i; j < n; ++j) {
            const double v = std::clamp(0.5 * (cosine(i, j) + cosine(j, i)), -1.0, 1.0);
            values[i * n + j] = v;
            values[j * n + i] = v;
        }
    }
    result.matrix = SimilarityMatrix(answers.langs, std::move(values));
    return result;
}

PreferenceScores preference_scores(const std::vector<SimilarityMatrix>& matrices) {
    if (matrices.empty()) throw PreconditionError("preference_scores: no matrices");
    const std::vector<LanguageCode>& langs = matrices.front().langs();
    const std::size_t n = langs.size();
    for (const SimilarityMatrix& m : matrices) {
        if (m.langs() != langs) throw PreconditionError("preference_scores: language lists differ");
    }
    std::vector<double> mean(n * n, 0.0);
    for (const SimilarityMatrix& m : matrices) {
        for (std::size_t i = 0; i < n * n; ++i) mean[i] += m.values()[i];
    }
    for (double& v : mean) v /= static_cast<double>(matrices.size());

    PreferenceScores scores;
    scores.langs = langs;
    for (std::size_t i = 0; i < n; ++i) {
        double row_all = 0.0;
        double col_all = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            row_all += mean[i * n + j];
            col_all += mean[j * n + i];
        }
        const double diag = mean[i * n + i];
        scores.including_diagonal[langs[i]] = row_all / static_cast<double>(n);
        if (n > 1) {
            scores.excluding_diagonal[langs[i]] = (row_all - diag) / static_cast<double>(n - 1);
            scores.column_excluding_diagonal[langs[i]] = (col_all - diag) / static_cast<double>(n - 1);
        } else {
            scores.excluding_diagonal[langs[i]] = diag;
            scores.column_excluding_diagonal[langs[i]] = diag;
        }
    }
    scores.mean_matrix = SimilarityMatrix(langs, std::move(mean));
    return scores;
}

GenprefReport run_genpref(const std::vector<Query>& queries, const datastore::Index& index,
                          backends::Embedder& retriever, backends::Generator& generator,
                          backends::Embedder& similarity_embedder, const GenprefRunOptions& options) {
    GenprefReport report;
    report.outcomes.resize(queries.size());
    parallel_for(queries.size(), options.workers, [&](std::size_t i) {
        const Query& q = queries[i];
        QueryOutcome& out = report.outcomes[i];
        out.query_id = q.id;
        try {
            const std::vector<std::string> qtext{q.text};
            backends::Vector qv = retriever.embed(qtext, backends::EmbedRole::query).front();
            datastore::l2_normalize(qv);
            const RankedList top = datastore::retrieve(index, qv, options.top_docs, datastore::Scope::all(), q.id);
            std::vector<Document> docs;
            for (const RankedItem& item : top.items) docs.push_back(index.doc(item.doc_id));
            out.answers = generate_multilingual(q, docs, options.langs, generator, options.decode);
            out.similarity = similarity_matrix(*out.answers, similarity_embedder, options.similarity);
        } catch (const std::exception& e) {
            spdlog::warn("genpref: query '{}' excluded: {}", q.id, e.what());
            out.answers.reset();
            out.error = e.what();
        }
    });
    std::vector<SimilarityMatrix> matrices;
    for (const QueryOutcome& o : report.outcomes) {
        if (o.similarity) {
            matrices.push_back(o.similarity->matrix);
        } else {
            ++report.failed;
        }
    }
    if (!matrices.empty()) report.preference = preference_scores(matrices);
    return report;
}

namespace {

ordered_json matrix_json(const SimilarityMatrix& m) {
    ordered_json rows = ordered_json::array();
    for (std::size_t i = 0; i < m.size(); ++i) {
        ordered_json row = ordered_json::array();
        for (std::size_t j = 0; j < m.size(); ++j) row.push_back(m.at(i, j));
        rows.push_back(row);
    }
    return rows;
}

ordered_json scores_json(const std::vector<LanguageCode>& langs, const std::map<LanguageCode, double>& scores) {
    ordered_json j = ordered_json::object();
    for (const LanguageCode& l : langs) j[l.str()] = scores.at(l);
    return j;
}

}  // namespace

ordered_json to_json(const GenprefReport& report) {
    ordered_json j;
    j["schema"] = "mraglab.genpref-report/1";
    ordered_json queries = ordered_json::array();
    for (const QueryOutcome& o : report.outcomes) {
        ordered_json q;
        q["query_id"] = o.query_id;
        if (o.similarity) {
            q["status"] = "ok";
            q["doc_ids"] = o.answers->doc_ids;
            q["repair_count"] = o.answers->repair_count;
            ordered_json answers = ordered_json::object();
            for (const LanguageCode& l : o.answers->langs) answers[l.str()] = o.answers->answers.at(l);
            q["answers"] = answers;
            std::vector<std::string> truncated;
            for (const LanguageCode& l : o.similarity->truncated) truncated.push_back(l.str());
            q["truncated"] = truncated;
            q["matrix"] = matrix_json(o.similarity->matrix);
        } else {
            q["status"] = "failed";
            q["error"] = o.error;
        }
        queries.push_back(q);
    }
    j["queries"] = queries;
    j["failed"] = report.failed;
    if (report.preference) {
        const PreferenceScores& p = *report.preference;
        std::vector<std::string> langs;
        for (const LanguageCode& l : p.langs) langs.push_back(l.str());
        j["langs"] = langs;
        j["mean_matrix"] = matrix_json(p.mean_matrix);
        j["preference_excluding_diagonal"] = scores_json(p.langs, p.excluding_diagonal);
        j["preference_including_diagonal"] = scores_json(p.langs, p.including_diagonal);
        j["preference_column_excluding_diagonal"] = scores_json(p.langs, p.column_excluding_diagonal);
    }
    return j;
}

std::string matrix_csv(const SimilarityMatrix& m) {
    std::string out = "lang";
    for (const LanguageCode& l : m.langs()) out += "," + l.str();
    out += '\n';
    for (std::size_t i = 0; i < m.size(); ++i) {
        out += m.langs()[i].str();
        for (std::size_t j = 0; j < m.size(); ++j) out += fmt::format(",{:.6f}", m.at(i, j));
        out += '\n';
    }
    return out;
}

}  // namespace mraglab::genpref
