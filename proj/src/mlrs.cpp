#include "mraglab/mlrs.hpp"

#include <algorithm>

#include <spdlog/spdlog.h>

#include "mraglab/parallel.hpp"

namespace mraglab::mlrs {

using ordered_json = nlohmann::ordered_json;

InitialRetrieval initial_retrieval(const Query& query, const datastore::Index& index,
                                   backends::Embedder& embedder, std::size_t k) {
    const std::vector<std::string> texts{query.text};
    backends::Vector qv = embedder.embed(texts, backends::EmbedRole::query).front();
    datastore::l2_normalize(qv);
    const RankedList list = datastore::retrieve(index, qv, k, datastore::Scope::all(), query.id);

    InitialRetrieval out;
    out.query = query;
    out.items.reserve(list.items.size());
    for (const RankedItem& item : list.items) {
        const Document& d = index.doc(item.doc_id);
        out.items.push_back({d.id, d.lang, d.text, item.rank});
    }
    return out;
}

LanguageSplit split_by_language(const InitialRetrieval& retrieval) {
    LanguageSplit split;
    for (const RetrievedDoc& d : retrieval.items) {
        (d.lang == retrieval.query.lang ? split.same_lang : split.diff_lang).push_back(d);
    }
    return split;
}

std::size_t TranslationCache::size() const {
    std::lock_guard lock(mutex_);
    return entries_.size();
}

std::vector<TranslatedDoc> translate_diff(const std::vector<RetrievedDoc>& diff, backends::Translator& translator,
                                          const LanguageCode& target, TranslationCache* cache) {
    for (const RetrievedDoc& d : diff) {
        if (d.lang == target) {
            throw PreconditionError("translate_diff: document '" + d.doc_id + "' is already in '" + target.str() +
                                    "'");
        }
    }

    std::vector<std::shared_future<std::string>> futures(diff.size());
    // Misses owned by this call, grouped by source language.
    std::map<LanguageCode, std::vector<std::size_t>> owned;
    std::map<std::size_t, std::promise<std::string>> promises;

    if (cache != nullptr) {
        std::lock_guard lock(cache->mutex_);
        for (std::size_t i = 0; i < diff.size(); ++i) {
            const TranslationCache::Key key{diff[i].doc_id, target.str()};
            if (const auto it = cache->entries_.find(key); it != cache->entries_.end()) {
                futures[i] = it->second;
                continue;
            }
            auto& p = promises[i];
            futures[i] = p.get_future().share();
            cache->entries_.emplace(key, futures[i]);
            owned[diff[i].lang].push_back(i);
        }
    } else {
        for (std::size_t i = 0; i < diff.size(); ++i) {
            futures[i] = promises[i].get_future().share();
            owned[diff[i].lang].push_back(i);
        }
    }

    try {
        for (const auto& [src, positions] : owned) {
            std::vector<std::string> texts;
            texts.reserve(positions.size());
            for (std::size_t i : positions) texts.push_back(diff[i].text);
            backends::Translation t = translator.translate(texts, src, target);
            for (std::size_t j = 0; j < positions.size(); ++j) {
                promises.at(positions[j]).set_value(std::move(t.texts[j]));
            }
        }
    } catch (...) {
        const auto error = std::current_exception();
        if (cache != nullptr) {
            std::lock_guard lock(cache->mutex_);
            for (auto& [i, p] : promises) cache->entries_.erase({diff[i].doc_id, target.str()});
        }
        for (auto& [i, p] : promises) {
            try {
                p.set_exception(error);
            } catch (const std::future_error&) {
                // already satisfied
            }
        }
        throw;
    }

    std::vector<TranslatedDoc> out;
    out.reserve(diff.size());
    for (std::size_t i = 0; i < diff.size(); ++i) {
        out.push_back({diff[i].doc_id, diff[i].lang, target, futures[i].get(), diff[i].r_init});
    }
    return out;
}

std::map<std::string, int> rerank_pool(const Query& query, const std::vector<PoolEntry>& pool,
                                       backends::Embedder& embedder) {
    std::map<std::string, int> ranks;
    if (pool.empty()) return ranks;
    const std::vector<std::string> qtext{query.text};
    backends::Vector qv = embedder.embed(qtext, backends::EmbedRole::query).front();
    datastore::l2_normalize(qv);

    std::vector<std::string> texts;
    texts.reserve(pool.size());
    for (const PoolEntry& p : pool) texts.push_back(p.text);
    std::vector<backends::Vector> vecs = embedder.embed(texts, backends::EmbedRole::passage);

    std::vector<std::pair<std::string, double>> candidates;
    candidates.reserve(pool.size());
    for (std::size_t i = 0; i < pool.size(); ++i) {
        if (vecs[i].size() != qv.size()) throw datastore::DimensionMismatchError("rerank_pool: dimension mismatch");
        datastore::l2_normalize(vecs[i]);
        candidates.emplace_back(pool[i].doc_id, datastore::dot(qv, vecs[i]));
    }
    for (const RankedItem& item : datastore::rank_candidates(std::move(candidates))) ranks[item.doc_id] = item.rank;
    return ranks;
}

MlrsQueryResult score_ledger(MlrsQueryResult result) {
    result.delta_sum = 0;
    result.delta_max_sum = 0;
    for (LedgerEntry& e : result.ledger) {
        e.delta = std::max<std::int64_t>(static_cast<std::int64_t>(e.r_init) - e.r_rerank, 0);
        e.delta_max = static_cast<std::int64_t>(e.r_init) - 1;
        result.delta_sum += e.delta;
        result.delta_max_sum += e.delta_max;
    }
    result.score = result.delta_max_sum > 0
                       ? 100.0 * static_cast<double>(result.delta_sum) / static_cast<double>(result.delta_max_sum)
                       : 0.0;
    return result;
}

MlrsQueryResult mlrs_query(const InitialRetrieval& retrieval, backends::Translator& translator,
                           backends::Embedder& embedder, const MlrsOptions& options, TranslationCache* cache) {
    const Query& q = retrieval.query;
    const LanguageCode target = options.target.value_or(q.lang);
    const LanguageSplit split = split_by_language(retrieval);

    // Documents already in the target language stay in the pool untouched and
    // are not scored.
    std::vector<RetrievedDoc> to_translate;
    for (const RetrievedDoc& d : split.diff_lang) {
        if (d.lang != target) to_translate.push_back(d);
    }
    const std::vector<TranslatedDoc> translated = translate_diff(to_translate, translator, target, cache);

    std::map<std::string, const TranslatedDoc*> by_id;
    for (const TranslatedDoc& t : translated) by_id[t.doc_id] = &t;

    std::vector<PoolEntry> pool;
    pool.reserve(retrieval.items.size());
    for (const RetrievedDoc& d : retrieval.items) {
        const auto it = by_id.find(d.doc_id);
        pool.push_back({d.doc_id, it == by_id.end() ? d.text : it->second->translated_text});
    }
    const std::map<std::string, int> reranked = rerank_pool(q, pool, embedder);

    MlrsQueryResult result;
    result.query_id = q.id;
    result.query_lang = q.lang;
    result.target_lang = target;
    result.pool_size = pool.size();
    for (const TranslatedDoc& t : translated) {
        result.ledger.push_back({t.doc_id, t.original_lang, t.r_init, reranked.at(t.doc_id), 0, 0});
    }
    return score_ledger(std::move(result));
}

MlrsReport mlrs_corpus(std::vector<MlrsQueryResult> results, std::vector<QueryFailure> failures) {
    if (results.empty()) throw Error("mlrs_corpus: no successfully scored queries");
    MlrsReport report;
    // Ratios accumulated in long double; the x100 scaling happens once.
    long double total = 0.0L;
    std::map<std::pair<LanguageCode, LanguageCode>, long double> cell_sums;
    for (const MlrsQueryResult& r : results) {
        const long double ratio =
            r.delta_max_sum > 0 ? static_cast<long double>(r.delta_sum) / static_cast<long double>(r.delta_max_sum)
                                : 0.0L;
        total += ratio;
        if (r.ledger.empty()) ++report.empty_diff_queries;
        const auto cell = std::make_pair(r.query_lang, r.target_lang);
        cell_sums[cell] += ratio;
        ++report.cells[cell].n;
    }
    report.corpus_score = static_cast<double>(100.0L * total / static_cast<long double>(results.size()));
    for (auto& [cell, stats] : report.cells) {
        stats.mean = static_cast<double>(100.0L * cell_sums[cell] / static_cast<long double>(stats.n));
    }
    report.results = std::move(results);
    report.failures = std::move(failures);
    return report;
}

MlrsReport run_mlrs(const std::vector<Query>& queries, const datastore::Index& index,
                    backends::Translator& translator, backends::Embedder& embedder, const RunOptions& options) {
    if (options.k == 0) throw PreconditionError("run_mlrs: k must be >= 1");
    std::vector<std::optional<MlrsQueryResult>> results(queries.size());
    std::vector<std::optional<QueryFailure>> failures(queries.size());
    TranslationCache cache;

    parallel_for(queries.size(), options.workers, [&](std::size_t i) {
        const Query& q = queries[i];
        std::string stage = "retrieve";
        try {
            const InitialRetrieval retrieval = initial_retrieval(q, index, embedder, options.k);
            stage = "translate+rerank";
            MlrsOptions opts;
            opts.target = options.target;
            results[i] = mlrs_query(retrieval, translator, embedder, opts, &cache);
        } catch (const std::exception& e) {
            spdlog::warn("mlrs: query '{}' failed at {}: {}", q.id, stage, e.what());
            failures[i] = QueryFailure{q.id, stage, e.what()};
        }
    });

    std::vector<MlrsQueryResult> ok;
    std::vector<QueryFailure> failed;
    for (std::size_t i = 0; i < queries.size(); ++i) {
        if (results[i]) ok.push_back(std::move(*results[i]));
        if (failures[i]) failed.push_back(std::move(*failures[i]));
    }
    MlrsReport report = mlrs_corpus(std::move(ok), std::move(failed));
    report.encoder = embedder.identify();
    report.k = options.k;
    return report;
}

ordered_json to_json(const MlrsReport& report) {
    ordered_json j;
    j["schema"] = "mraglab.mlrs-report/1";
    j["encoder"] = report.encoder;
    j["k"] = report.k;
    j["rerank_pool"] = "full-top-k-with-substitution";
    j["corpus_score"] = report.corpus_score;
    j["scored_queries"] = report.results.size();
    j["empty_diff_queries"] = report.empty_diff_queries;
    ordered_json cells = ordered_json::array();
    for (const auto& [cell, stats] : report.cells) {
        cells.push_back({{"query_lang", cell.first.str()},
                         {"target_lang", cell.second.str()},
                         {"n", stats.n},
                         {"mean", stats.mean}});
    }
    j["cells"] = cells;
    ordered_json queries = ordered_json::array();
    for (const MlrsQueryResult& r : report.results) {
        ordered_json q;
        q["query_id"] = r.query_id;
        q["query_lang"] = r.query_lang.str();
        q["target_lang"] = r.target_lang.str();
        q["pool_size"] = r.pool_size;
        q["delta_sum"] = r.delta_sum;
        q["delta_max_sum"] = r.delta_max_sum;
        q["score"] = r.score;
        ordered_json ledger = ordered_json::array();
        for (const LedgerEntry& e : r.ledger) {
            ledger.push_back({{"doc_id", e.doc_id},
                              {"original_lang", e.original_lang.str()},
                              {"r_init", e.r_init},
                              {"r_rerank", e.r_rerank},
                              {"delta", e.delta},
                              {"delta_max", e.delta_max}});
        }
        q["ledger"] = ledger;
        queries.push_back(q);
    }
    j["queries"] = queries;
    ordered_json failures = ordered_json::array();
    for (const QueryFailure& f : report.failures) {
        failures.push_back({{"query_id", f.query_id}, {"stage", f.stage}, {"message", f.message}});
    }
    j["failures"] = failures;
    return j;
}

MlrsReport report_from_json(const nlohmann::json& j) {
    if (j.value("schema", "") != "mraglab.mlrs-report/1") throw Error("not an MLRS report");
    std::vector<MlrsQueryResult> results;
    for (const auto& q : j.at("queries")) {
        MlrsQueryResult r;
        r.query_id = q.at("query_id").get<std::string>();
        r.query_lang = LanguageCode(q.at("query_lang").get<std::string>());
        r.target_lang = LanguageCode(q.at("target_lang").get<std::string>());
        r.pool_size = q.at("pool_size").get<std::size_t>();
        for (const auto& e : q.at("ledger")) {
            r.ledger.push_back({e.at("doc_id").get<std::string>(), LanguageCode(e.at("original_lang").get<std::string>()),
                                e.at("r_init").get<int>(), e.at("r_rerank").get<int>(), 0, 0});
        }
        // Recomputed rather than trusted.
        results.push_back(score_ledger(std::move(r)));
    }
    std::vector<QueryFailure> failures;
    for (const auto& f : j.at("failures")) {
        failures.push_back({f.at("query_id").get<std::string>(), f.at("stage").get<std::string>(),
                            f.at("message").get<std::string>()});
    }
    MlrsReport report = mlrs_corpus(std::move(results), std::move(failures));
    report.encoder = j.at("encoder").get<std::string>();
    report.k = j.at("k").get<std::size_t>();
    return report;
}

}  // namespace mraglab::mlrs
