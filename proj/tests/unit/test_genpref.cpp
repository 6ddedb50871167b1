#include <gtest/gtest.h>

#include <random>

#include "mraglab/genpref.hpp"
#include "mraglab/synthetic.hpp"
#include "oracles.hpp"
#include "stubs.hpp"

using namespace mraglab;
using namespace mraglab::genpref;

namespace {

std::vector<LanguageCode> langs(std::initializer_list<const char*> codes) {
    std::vector<LanguageCode> out;
    for (const char* c : codes) out.emplace_back(c);
    return out;
}

const Query kQuery{"q1", LanguageCode("en"), "Who wrote it?", {}};
const std::vector<Document> kDocs{{"d1", LanguageCode("en"), "Some passage."}};

AnswerSet answer_set(const std::vector<LanguageCode>& ls, const std::vector<std::string>& texts) {
    AnswerSet a;
    a.query_id = "q";
    a.langs = ls;
    for (std::size_t i = 0; i < ls.size(); ++i) a.answers[ls[i]] = texts[i];
    return a;
}

}  // namespace

TEST(ParseAnswers, AcceptsExactKeys) {
    const auto got = parse_answers(R"({"en":"A","ko":"B"})", langs({"en", "ko"}));
    EXPECT_EQ(got.at(LanguageCode("en")), "A");
    EXPECT_EQ(got.at(LanguageCode("ko")), "B");
}

TEST(ParseAnswers, RejectsMissingExtraAndEmpty) {
    EXPECT_THROW(parse_answers(R"({"en":"A"})", langs({"en", "ko"})), AnswerFormatError);
    EXPECT_THROW(parse_answers(R"({"en":"A","ko":"B","fr":"C"})", langs({"en", "ko"})), AnswerFormatError);
    EXPECT_THROW(parse_answers(R"({"en":"","ko":"B"})", langs({"en", "ko"})), AnswerFormatError);
    EXPECT_THROW(parse_answers("Sure! Here you go.", langs({"en"})), InvalidJsonError);
}

TEST(GenerateMultilingual, ParsesFirstReply) {
    mraglab::testing::ScriptedGenerator g;
    g.script = {R"({"en":"A","ko":"B"})"};
    const AnswerSet a = generate_multilingual(kQuery, kDocs, langs({"en", "ko"}), g);
    EXPECT_EQ(a.answers.at(LanguageCode("ko")), "B");
    EXPECT_EQ(a.repair_count, 0);
    EXPECT_EQ(g.calls, 1u);
}

TEST(GenerateMultilingual, RepairsProseOnce) {
    mraglab::testing::ScriptedGenerator g;
    g.script = {"Here are the answers in prose.", R"({"en":"A","ko":"B"})"};
    const AnswerSet a = generate_multilingual(kQuery, kDocs, langs({"en", "ko"}), g);
    EXPECT_EQ(a.repair_count, 1);
    EXPECT_EQ(g.calls, 2u);
    EXPECT_EQ(a.prompt.back().role, backends::ChatMessage::Role::user);
}

TEST(GenerateMultilingual, MissingKeyIsNotRepaired) {
    mraglab::testing::ScriptedGenerator g;
    g.script = {R"({"en":"A"})"};
    EXPECT_THROW(generate_multilingual(kQuery, kDocs, langs({"en", "ko"}), g), AnswerFormatError);
    EXPECT_EQ(g.calls, 1u);
}

TEST(Similarity, IdenticalAnswersGiveAllOnes) {
    backends::MockEmbedder e(64, 0);
    const auto ls = langs({"en", "ko", "zh"});
    const auto m = similarity_matrix(answer_set(ls, {"same", "same", "same"}), e).matrix;
    for (double v : m.values()) EXPECT_NEAR(v, 1.0, 1e-12);
}

TEST(Similarity, OrthogonalStubVectors) {
    mraglab::testing::TableEmbedder e;
    e.table = {{"a", {1.0f, 0.0f}}, {"b", {0.0f, 1.0f}}};
    const auto m = similarity_matrix(answer_set(langs({"en", "ko"}), {"a", "b"}), e).matrix;
    EXPECT_EQ(m.at(0, 1), 0.0);
    EXPECT_EQ(m.at(1, 0), 0.0);
    EXPECT_NEAR(m.at(0, 0), 1.0, 1e-12);
}

TEST(Similarity, MatchesPairwiseCosineOracle) {
    std::mt19937_64 rng(99);
    mraglab::testing::CoarseEmbedder e(16, 5);
    const auto ls = langs({"en", "ko", "zh", "fr", "es"});
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<std::string> texts;
        std::vector<std::vector<float>> vecs;
        for (std::size_t i = 0; i < ls.size(); ++i) {
            texts.push_back("answer-" + std::to_string(rng()));
            vecs.push_back(e.vector_for(texts.back()));
        }
        const auto m = similarity_matrix(answer_set(ls, texts), e).matrix;
        const auto want = oracle::pairwise_cosine(vecs);
        for (std::size_t i = 0; i < want.size(); ++i) EXPECT_NEAR(m.values()[i], want[i], 1e-12);
    }
}

TEST(Similarity, LongAnswersAreTruncated) {
    backends::MockEmbedder e(64, 0);
    SimilarityOptions opts;
    opts.max_chars = 10;
    const auto r = similarity_matrix(answer_set(langs({"en", "ko"}), {"short", std::string(40, 'x')}), e, opts);
    EXPECT_EQ(r.truncated, langs({"ko"}));
}

TEST(Preference, ExcludesDiagonal) {
    const SimilarityMatrix m(langs({"en", "ko", "zh"}), {1, 0.8, 0.6, 0.8, 1, 0.5, 0.6, 0.5, 1});
    const PreferenceScores s = preference_scores({m});
    EXPECT_NEAR(s.excluding_diagonal.at(LanguageCode("en")), 0.7, 1e-12);
    EXPECT_NEAR(s.including_diagonal.at(LanguageCode("en")), 2.4 / 3, 1e-12);
    EXPECT_NEAR(s.column_excluding_diagonal.at(LanguageCode("zh")), 0.55, 1e-12);
}

TEST(Preference, AllOnesGivesOne) {
    const SimilarityMatrix m(langs({"en", "ko"}), {1, 1, 1, 1});
    for (const auto& [lang, v] : preference_scores({m}).excluding_diagonal) EXPECT_EQ(v, 1.0);
    EXPECT_THROW(preference_scores({}), PreconditionError);
}

TEST(Preference, TwoMatricesMatchAggregationOracle) {
    const auto ls = langs({"en", "ko", "zh"});
    const std::vector<double> a{1, 0.2, 0.4, 0.2, 1, 0.9, 0.4, 0.9, 1};
    const std::vector<double> b{1, 0.6, 0.1, 0.6, 1, 0.3, 0.1, 0.3, 1};
    const PreferenceScores s = preference_scores({SimilarityMatrix(ls, a), SimilarityMatrix(ls, b)});
    const auto want = oracle::preference({a, b}, 3);
    for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(s.excluding_diagonal.at(ls[i]), want[i], 1e-12);
}

TEST(Preference, PermutingLanguagesPermutesScores) {
    backends::MockEmbedder e(64, 4);
    const auto ls = langs({"en", "ko", "zh"});
    const auto rev = langs({"zh", "ko", "en"});
    const std::vector<std::string> texts{"one answer", "another reply", "third text"};
    const auto fwd = preference_scores({similarity_matrix(answer_set(ls, texts), e).matrix});
    const auto bwd = preference_scores(
        {similarity_matrix(answer_set(rev, {texts[2], texts[1], texts[0]}), e).matrix});
    for (const auto& l : ls) EXPECT_NEAR(fwd.excluding_diagonal.at(l), bwd.excluding_diagonal.at(l), 1e-12);
}

TEST(RunGenpref, MockPipelineScoresEveryQuery) {
    const synthetic::Dataset data = synthetic::generate();
    backends::MockEmbedder e(128, 0);
    backends::MockGenerator g;
    const datastore::Index index = datastore::build_index(data.corpus, e, 16);
    GenprefRunOptions opts;
    opts.langs = langs({"en", "ko", "zh"});
    const GenprefReport r = run_genpref(data.queries, index, e, g, e, opts);
    EXPECT_EQ(r.failed, 0u);
    ASSERT_TRUE(r.preference);
    EXPECT_EQ(r.preference->langs.size(), 3u);
    const std::string csv = matrix_csv(r.preference->mean_matrix);
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "lang,en,ko,zh");
}

TEST(RunGenpref, BadRepliesAreCountedAsFailures) {
    const synthetic::Dataset data = synthetic::generate();
    backends::MockEmbedder e(64, 0);
    mraglab::testing::ScriptedGenerator g;
    g.script = {R"({"en":"only english"})"};
    const datastore::Index index = datastore::build_index(data.corpus, e, 16);
    GenprefRunOptions opts;
    opts.langs = langs({"en", "ko"});
    const GenprefReport r = run_genpref(data.queries, index, e, g, e, opts);
    EXPECT_EQ(r.failed, data.queries.size());
    EXPECT_FALSE(r.preference);
}
