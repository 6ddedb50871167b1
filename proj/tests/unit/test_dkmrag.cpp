#include <gtest/gtest.h>

#include <algorithm>

#include "mraglab/dkmrag.hpp"
#include "mraglab/synthetic.hpp"
#include "stubs.hpp"

using namespace mraglab;
using namespace mraglab::dkmrag;

namespace {

struct Fixture {
    synthetic::Dataset data = synthetic::generate();
    backends::MockEmbedder embedder{256, 0};
    backends::MockTranslator translator{data.lexicon};
    backends::MockGenerator generator;
    datastore::Index index = datastore::build_index(data.corpus, embedder, 32);
    DkmConfig config = [] {
        DkmConfig c;
        c.k_retrieve = 20;
        c.k_use = 5;
        return c;
    }();

    Backends backends() { return {embedder, embedder, translator, generator}; }
};

std::vector<std::string> texts(const RunTrace& t) {
    std::vector<std::string> out;
    for (const Passage& p : t.passages) out.push_back(p.doc_id + "|" + p.text);
    return out;
}

const std::string& answer_user_turn(const RunTrace& t) {
    for (const PromptRecord& p : t.prompts) {
        if (p.purpose == "answer") return p.messages.back().content;
    }
    throw std::runtime_error("no answer prompt");
}

datastore::Index monolingual_index(backends::Embedder& e) {
    std::vector<Document> docs;
    for (int i = 0; i < 8; ++i) {
        docs.push_back({"m" + std::to_string(i), LanguageCode("en"), "english passage number " + std::to_string(i * 11)});
    }
    return datastore::build_index(docs, e, 4);
}

}  // namespace

TEST(StrategyName, RoundTrips) {
    for (const char* s : {"dkm", "all", "single:ko", "single:query-lang", "no-refined", "no-translated", "closed-book"}) {
        EXPECT_EQ(Strategy::parse(s).to_string(), s);
    }
    EXPECT_THROW(Strategy::parse("bogus"), Error);
}

TEST(RetrieveAndRerank, KeepsKUse) {
    Fixture f;
    const auto docs = retrieve_and_rerank(f.data.queries[0], f.index, f.config, f.backends());
    EXPECT_EQ(docs.size(), 5u);
}

TEST(UnifyLanguage, SkipsDocumentsAlreadyInTarget) {
    mraglab::testing::RecordingTranslator tr;
    const std::vector<Document> docs{{"a", LanguageCode("en"), "x"}, {"b", LanguageCode("ko"), "y"},
                                     {"c", LanguageCode("ko"), "z"}, {"d", LanguageCode("zh"), "w"}};
    const auto out = unify_language(docs, LanguageCode("en"), tr);
    EXPECT_FALSE(out[0].was_translated);
    EXPECT_EQ(out[0].text, "x");
    EXPECT_TRUE(out[1].was_translated);
    EXPECT_EQ(out[2].text, "T:z");
    const auto calls = tr.calls_seen();
    ASSERT_EQ(calls.size(), 2u);
    for (const auto& c : calls) EXPECT_NE(c.src, c.tgt);
}

TEST(RunDkm, QueryLanguagePassagesStillGetRewritten) {
    backends::MockEmbedder e(64, 0);
    mraglab::testing::RecordingTranslator tr;
    backends::MockGenerator g;
    const datastore::Index index = monolingual_index(e);
    DkmConfig c;
    c.k_retrieve = 8;
    const Query q{"q", LanguageCode("en"), "english passage", {}};
    const RunTrace t = run_dkm(q, index, c, {e, e, tr, g});
    ASSERT_TRUE(t.ok);
    EXPECT_TRUE(tr.calls_seen().empty());
    ASSERT_EQ(t.passages.size(), 10u);
    for (std::size_t i = 0; i < 5; ++i) {
        EXPECT_FALSE(t.passages[i].was_translated);
        EXPECT_EQ(t.passages[i].text, index.doc(t.passages[i].doc_id).text);
    }
    const auto rewrites = std::count_if(t.prompts.begin(), t.prompts.end(),
                                        [](const PromptRecord& p) { return p.purpose.rfind("rewrite:", 0) == 0; });
    EXPECT_EQ(rewrites, 5);
}

TEST(RunDkm, OneFailedRewriteDropsOnePassage) {
    Fixture f;
    mraglab::testing::ScriptedGenerator g;
    g.script = {"rewritten or answered"};
    int rewrites = 0;
    g.fail_when = [&](const std::vector<backends::ChatMessage>& m) {
        return m.size() == 1 && ++rewrites == 3;  // rewrite prompts have a single user turn
    };
    const RunTrace t = run_dkm(f.data.queries[0], f.index, f.config, {f.embedder, f.embedder, f.translator, g});
    ASSERT_TRUE(t.ok);
    EXPECT_EQ(t.passages.size(), 9u);
    ASSERT_EQ(t.notes.size(), 1u);
    EXPECT_NE(t.notes[0].find("failed"), std::string::npos);
    EXPECT_NE(answer_user_turn(t).find("[9] "), std::string::npos);
    EXPECT_EQ(answer_user_turn(t).find("[10] "), std::string::npos);
}

TEST(RunDkm, ConcatOrderIsRecorded) {
    Fixture f;
    f.config.order = ConcatOrder::refined_first;
    const RunTrace t = run_dkm(f.data.queries[1], f.index, f.config, f.backends());
    ASSERT_TRUE(t.order);
    EXPECT_EQ(to_json(t).at("concat_order"), "refined-first");
    EXPECT_EQ(t.passages[0].doc_id, t.passages[5].doc_id);
}

TEST(RunDkm, FailedGenerationMarksTrace) {
    Fixture f;
    mraglab::testing::ScriptedGenerator g;
    g.script = {"!"};
    const RunTrace t = run_dkm(f.data.queries[0], f.index, f.config, {f.embedder, f.embedder, f.translator, g});
    EXPECT_FALSE(t.ok);
    EXPECT_EQ(t.failed_stage, "answer");
    EXPECT_TRUE(t.answer.empty());
}

TEST(Baselines, ClosedBookHasNoBackground) {
    Fixture f;
    const RunTrace t = run_baseline(f.data.queries[2], f.index, f.config, f.backends(),
                                    {StrategyKind::closed_book, std::nullopt});
    ASSERT_TRUE(t.ok);
    EXPECT_TRUE(t.passages.empty());
    for (const auto& m : t.prompts.at(0).messages) EXPECT_EQ(m.content.find("Background"), std::string::npos);
    const RunTrace with_docs = run_baseline(f.data.queries[2], f.index, f.config, f.backends(),
                                            {StrategyKind::all, std::nullopt});
    EXPECT_NE(answer_user_turn(with_docs).find("Background:"), std::string::npos);
}

TEST(Baselines, AllEqualsSingleOnMonolingualCorpus) {
    backends::MockEmbedder e(64, 0);
    mraglab::testing::RecordingTranslator tr;
    backends::MockGenerator g;
    const datastore::Index index = monolingual_index(e);
    DkmConfig c;
    c.k_retrieve = 8;
    const Query q{"q", LanguageCode("ko"), "english passage 33", {}};
    const RunTrace all = run_baseline(q, index, c, {e, e, tr, g}, {StrategyKind::all, std::nullopt});
    const RunTrace single = run_baseline(q, index, c, {e, e, tr, g}, {StrategyKind::single, LanguageCode("en")});
    EXPECT_EQ(texts(all), texts(single));
    EXPECT_TRUE(tr.calls_seen().empty());
}

TEST(Ablations, NoRefinedEqualsSingleQueryLanguage) {
    Fixture f;
    for (const Query& q : f.data.queries) {
        const RunTrace a = run_ablation(q, f.index, f.config, f.backends(), StrategyKind::no_refined);
        const RunTrace b = run_baseline(q, f.index, f.config, f.backends(), {StrategyKind::single, std::nullopt});
        EXPECT_EQ(texts(a), texts(b)) << q.id;
    }
}

TEST(Ablations, NoTranslatedHasKUsePassages) {
    Fixture f;
    const RunTrace t = run_ablation(f.data.queries[3], f.index, f.config, f.backends(), StrategyKind::no_translated);
    EXPECT_EQ(t.passages.size(), f.config.k_use);
}

TEST(Ablations, FullPromptIsAtLeastAsLong) {
    Fixture f;
    for (const Query& q : f.data.queries) {
        const auto full = answer_user_turn(run_dkm(q, f.index, f.config, f.backends())).size();
        const auto a = answer_user_turn(run_ablation(q, f.index, f.config, f.backends(), StrategyKind::no_refined)).size();
        const auto b =
            answer_user_turn(run_ablation(q, f.index, f.config, f.backends(), StrategyKind::no_translated)).size();
        EXPECT_GE(full, a);
        EXPECT_GE(full, b);
    }
}

TEST(Traces, JsonRoundTripAndDeterminism) {
    Fixture f;
    const auto a = run_queries(f.data.queries, f.index, f.config, f.backends(), {StrategyKind::dkm, std::nullopt});
    f.config.workers = 4;
    const auto b = run_queries(f.data.queries, f.index, f.config, f.backends(), {StrategyKind::dkm, std::nullopt});
    EXPECT_EQ(traces_jsonl(a), traces_jsonl(b));
    for (const RunTrace& t : a) {
        const RunTrace back = trace_from_json(nlohmann::json::parse(to_json(t).dump()));
        EXPECT_EQ(to_json(back).dump(), to_json(t).dump());
    }
}

TEST(Config, RejectsKUseAboveKRetrieve) {
    DkmConfig c;
    c.k_retrieve = 3;
    c.k_use = 5;
    EXPECT_THROW(c.validate(), PreconditionError);
}
