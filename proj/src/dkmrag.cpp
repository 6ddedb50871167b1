#include "mraglab/dkmrag.hpp"

#include <map>

#include <spdlog/spdlog.h>

#include "mraglab/parallel.hpp"
#include "mraglab/prompts.hpp"

namespace mraglab::dkmrag {

using backends::ChatMessage;
using ordered_json = nlohmann::ordered_json;

static constexpr std::string_view kTraceSchema = "mraglab.trace/1";

Strategy Strategy::parse(std::string_view s) {
    if (s == "dkm") return {StrategyKind::dkm, std::nullopt};
    if (s == "all") return {StrategyKind::all, std::nullopt};
    if (s == "no-refined") return {StrategyKind::no_refined, std::nullopt};
    if (s == "no-translated") return {StrategyKind::no_translated, std::nullopt};
    if (s == "closed-book") return {StrategyKind::closed_book, std::nullopt};
    if (s == "single:query-lang") return {StrategyKind::single, std::nullopt};
    if (s.rfind("single:", 0) == 0) return {StrategyKind::single, LanguageCode(s.substr(7))};
    throw Error("unknown strategy '" + std::string(s) + "'");
}

std::string Strategy::to_string() const {
    switch (kind) {
        case StrategyKind::dkm: return "dkm";
        case StrategyKind::all: return "all";
        case StrategyKind::single: return "single:" + (lang ? lang->str() : std::string("query-lang"));
        case StrategyKind::no_refined: return "no-refined";
        case StrategyKind::no_translated: return "no-translated";
        case StrategyKind::closed_book: return "closed-book";
    }
    return "?";
}

void DkmConfig::validate() const {
    if (k_use < 1 || k_use > k_retrieve) {
        throw PreconditionError("dkm config: need 1 <= k_use <= k_retrieve (got " + std::to_string(k_use) + ", " +
                                std::to_string(k_retrieve) + ")");
    }
}

std::vector<Document> retrieve_and_rerank(const Query& query, const datastore::Index& index,
                                          const DkmConfig& config, const Backends& backends) {
    const std::vector<std::string> qtext{query.text};
    backends::Vector qv = backends.retriever.embed(qtext, backends::EmbedRole::query).front();
    datastore::l2_normalize(qv);
    const RankedList initial = datastore::retrieve(index, qv, config.k_retrieve, datastore::Scope::all(), query.id);
    if (initial.items.empty()) return {};

    backends::Vector rq = backends.reranker.embed(qtext, backends::EmbedRole::query).front();
    datastore::l2_normalize(rq);
    std::vector<std::string> texts;
    for (const RankedItem& item : initial.items) texts.push_back(index.doc(item.doc_id).text);
    std::vector<backends::Vector> pvecs = backends.reranker.embed(texts, backends::EmbedRole::passage);
    std::vector<std::pair<std::string, double>> candidates;
    for (std::size_t i = 0; i < pvecs.size(); ++i) {
        datastore::l2_normalize(pvecs[i]);
        candidates.emplace_back(initial.items[i].doc_id, datastore::dot(rq, pvecs[i]));
    }
    const std::vector<RankedItem> reranked = datastore::rank_candidates(std::move(candidates));

    std::vector<Document> out;
    for (std::size_t i = 0; i < reranked.size() && i < config.k_use; ++i) out.push_back(index.doc(reranked[i].doc_id));
    return out;
}

std::vector<Passage> unify_language(const std::vector<Document>& docs, const LanguageCode& target,
                                    backends::Translator& translator, std::vector<std::string>* notes) {
    std::vector<Passage> out(docs.size());
    std::map<LanguageCode, std::vector<std::size_t>> by_lang;
    for (std::size_t i = 0; i < docs.size(); ++i) {
        out[i] = {docs[i].id, docs[i].lang, false, docs[i].text};
        if (docs[i].lang != target) by_lang[docs[i].lang].push_back(i);
    }
    for (const auto& [src, positions] : by_lang) {
        std::vector<std::string> texts;
        for (std::size_t i : positions) texts.push_back(docs[i].text);
        backends::Translation t = translator.translate(texts, src, target);
        for (std::size_t j = 0; j < positions.size(); ++j) {
            Passage& p = out[positions[j]];
            p.text = std::move(t.texts[j]);
            p.was_translated = true;
        }
        if (notes != nullptr) {
            for (std::size_t j : t.passthrough) {
                notes->push_back("translation of '" + docs[positions[j]].id + "' was empty; original text kept");
            }
        }
    }
    return out;
}

namespace {

std::vector<std::string> texts_of(const std::vector<Passage>& ps) {
    std::vector<std::string> out;
    out.reserve(ps.size());
    for (const Passage& p : ps) out.push_back(p.text);
    return out;
}

// Rewrites each passage; a failed rewrite drops that passage only.
std::vector<Passage> refine(const Query& query, const std::vector<Passage>& translated, const DkmConfig& config,
                            const Backends& backends, RunTrace& trace) {
    std::vector<Passage> refined;
    for (const Passage& p : translated) {
        std::vector<ChatMessage> prompt = prompts::rewrite_passage(p.text, query.text, query.lang);
        trace.prompts.push_back({"rewrite:" + p.doc_id, prompt});
        try {
            std::string rewritten = backends.generator.generate(prompt, config.rewrite_decode);
            refined.push_back({p.doc_id, p.original_lang, p.was_translated, std::move(rewritten)});
        } catch (const std::exception& e) {
            spdlog::warn("dkm: query '{}': rewrite of '{}' failed: {}", query.id, p.doc_id, e.what());
            trace.notes.push_back("rewrite of '" + p.doc_id + "' failed: " + e.what());
        }
    }
    return refined;
}

}  // namespace

RunTrace run_strategy(const Query& query, const datastore::Index& index, const DkmConfig& config,
                      const Backends& backends, const Strategy& strategy) {
    config.validate();
    RunTrace trace;
    trace.query_id = query.id;
    trace.query_lang = query.lang;
    trace.strategy = strategy;
    if (strategy.kind == StrategyKind::dkm) trace.order = config.order;
    std::string stage;
    try {
        std::vector<Passage> passages;
        if (strategy.kind != StrategyKind::closed_book) {
            stage = "retrieve";
            const std::vector<Document> docs = retrieve_and_rerank(query, index, config, backends);
            for (const Document& d : docs) trace.retrieved.push_back(d.id);

            switch (strategy.kind) {
                case StrategyKind::all:
                    for (const Document& d : docs) passages.push_back({d.id, d.lang, false, d.text});
                    break;
                case StrategyKind::single:
                    stage = "translate";
                    passages = unify_language(docs, strategy.lang.value_or(query.lang), backends.translator, &trace.notes);
                    break;
                default: {
                    stage = "translate";
                    PassageBundle bundle;
                    bundle.p_translated = unify_language(docs, query.lang, backends.translator, &trace.notes);
                    if (strategy.kind != StrategyKind::no_refined) {
                        stage = "rewrite";
                        bundle.p_refined = refine(query, bundle.p_translated, config, backends, trace);
                    }
                    const auto append = [&](const std::vector<Passage>& ps) {
                        passages.insert(passages.end(), ps.begin(), ps.end());
                    };
                    if (strategy.kind == StrategyKind::no_refined) {
                        append(bundle.p_translated);
                    } else if (strategy.kind == StrategyKind::no_translated) {
                        append(bundle.p_refined);
                    } else if (config.order == ConcatOrder::translated_first) {
                        append(bundle.p_translated);
                        append(bundle.p_refined);
                    } else {
                        append(bundle.p_refined);
                        append(bundle.p_translated);
                    }
                }
            }
        }
        stage = "answer";
        std::vector<ChatMessage> prompt = strategy.kind == StrategyKind::closed_book
                                              ? prompts::answer_without_documents(query.text, query.lang)
                                              : prompts::answer_with_documents(query.text, texts_of(passages), query.lang);
        trace.prompts.push_back({"answer", prompt});
        trace.passages = std::move(passages);
        trace.answer = backends.generator.generate(prompt, config.answer_decode);
    } catch (const std::exception& e) {
        spdlog::warn("dkm: query '{}' ({}) failed at {}: {}", query.id, strategy.to_string(), stage, e.what());
        trace.ok = false;
        trace.failed_stage = stage;
        trace.error = e.what();
        trace.answer.clear();
    }
    return trace;
}

RunTrace run_dkm(const Query& query, const datastore::Index& index, const DkmConfig& config,
                 const Backends& backends) {
    return run_strategy(query, index, config, backends, {StrategyKind::dkm, std::nullopt});
}

RunTrace run_baseline(const Query& query, const datastore::Index& index, const DkmConfig& config,
                      const Backends& backends, const Strategy& strategy) {
    if (strategy.kind != StrategyKind::all && strategy.kind != StrategyKind::single &&
        strategy.kind != StrategyKind::closed_book) {
        throw PreconditionError("run_baseline: '" + strategy.to_string() + "' is not a baseline");
    }
    return run_strategy(query, index, config, backends, strategy);
}

RunTrace run_ablation(const Query& query, const datastore::Index& index, const DkmConfig& config,
                      const Backends& backends, StrategyKind variant) {
    if (variant != StrategyKind::no_refined && variant != StrategyKind::no_translated) {
        throw PreconditionError("run_ablation: not an ablation variant");
    }
    return run_strategy(query, index, config, backends, {variant, std::nullopt});
}

std::vector<RunTrace> run_queries(const std::vector<Query>& queries, const datastore::Index& index,
                                  const DkmConfig& config, const Backends& backends, const Strategy& strategy) {
    config.validate();
    std::vector<RunTrace> traces(queries.size());
    parallel_for(queries.size(), config.workers,
                 [&](std::size_t i) { traces[i] = run_strategy(queries[i], index, config, backends, strategy); });
    return traces;
}

ordered_json to_json(const RunTrace& trace) {
    ordered_json j;
    j["schema"] = kTraceSchema;
    j["query_id"] = trace.query_id;
    j["query_lang"] = trace.query_lang.str();
    j["strategy"] = trace.strategy.to_string();
    if (trace.order) {
        j["concat_order"] = *trace.order == ConcatOrder::translated_first ? "translated-first" : "refined-first";
    }
    j["status"] = trace.ok ? "ok" : "failed";
    if (!trace.ok) {
        j["failed_stage"] = trace.failed_stage;
        j["error"] = trace.error;
    }
    j["retrieved"] = trace.retrieved;
    ordered_json passages = ordered_json::array();
    for (const Passage& p : trace.passages) {
        passages.push_back({{"doc_id", p.doc_id},
                            {"original_lang", p.original_lang.str()},
                            {"was_translated", p.was_translated},
                            {"text", p.text}});
    }
    j["passages"] = passages;
    ordered_json prompts = ordered_json::array();
    for (const PromptRecord& pr : trace.prompts) {
        ordered_json messages = ordered_json::array();
        for (const ChatMessage& m : pr.messages) {
            messages.push_back({{"role", std::string(backends::to_string(m.role))}, {"content", m.content}});
        }
        prompts.push_back({{"purpose", pr.purpose}, {"messages", messages}});
    }
    j["prompts"] = prompts;
    j["notes"] = trace.notes;
    j["answer"] = trace.answer;
    return j;
}

RunTrace trace_from_json(const nlohmann::json& j) {
    if (j.value("schema", "") != kTraceSchema) throw Error("unsupported trace schema");
    RunTrace t;
    t.query_id = j.at("query_id").get<std::string>();
    t.query_lang = LanguageCode(j.at("query_lang").get<std::string>());
    t.strategy = Strategy::parse(j.at("strategy").get<std::string>());
    if (j.contains("concat_order")) {
        t.order = j.at("concat_order").get<std::string>() == "refined-first" ? ConcatOrder::refined_first
                                                                             : ConcatOrder::translated_first;
    }
    t.ok = j.at("status").get<std::string>() == "ok";
    t.failed_stage = j.value("failed_stage", "");
    t.error = j.value("error", "");
    t.retrieved = j.at("retrieved").get<std::vector<std::string>>();
    for (const auto& p : j.at("passages")) {
        t.passages.push_back({p.at("doc_id").get<std::string>(), LanguageCode(p.at("original_lang").get<std::string>()),
                              p.at("was_translated").get<bool>(), p.at("text").get<std::string>()});
    }
    for (const auto& pr : j.at("prompts")) {
        PromptRecord rec;
        rec.purpose = pr.at("purpose").get<std::string>();
        for (const auto& m : pr.at("messages")) {
            rec.messages.push_back({m.at("role").get<std::string>() == "system" ? ChatMessage::Role::system
                                                                                 : ChatMessage::Role::user,
                                    m.at("content").get<std::string>()});
        }
        t.prompts.push_back(std::move(rec));
    }
    t.notes = j.at("notes").get<std::vector<std::string>>();
    t.answer = j.at("answer").get<std::string>();
    return t;
}

std::string traces_jsonl(const std::vector<RunTrace>& traces) {
    std::string out;
    for (const RunTrace& t : traces) {
        out += to_json(t).dump();
        out += '\n';
    }
    return out;
}

}  // namespace mraglab::dkmrag
