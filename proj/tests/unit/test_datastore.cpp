#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "mraglab/datastore.hpp"
#include "oracles.hpp"
#include "stubs.hpp"

using namespace mraglab;
using namespace mraglab::datastore;

namespace {

Index random_index(std::size_t n, std::size_t dim, std::mt19937_64& rng) {
    std::normal_distribution<float> g;
    const char* langs[] = {"en", "ko", "zh"};
    std::vector<Document> docs;
    EmbeddingMatrix m{dim, n, {}};
    for (std::size_t i = 0; i < n; ++i) {
        docs.push_back({"doc" + std::to_string(i), LanguageCode(langs[i % 3]), "t" + std::to_string(i)});
        std::vector<float> v(dim);
        for (float& x : v) x = g(rng);
        l2_normalize(v);
        m.values.insert(m.values.end(), v.begin(), v.end());
    }
    return Index(std::move(docs), std::move(m), "test");
}

class FlakyDimEmbedder final : public backends::Embedder {
public:
    int calls = 0;
    std::string identify() const override { return "flaky-dim"; }

protected:
    std::vector<backends::Vector> do_embed(std::span<const std::string> texts, backends::EmbedRole) override {
        const std::size_t dim = calls++ == 0 ? 64 : 32;
        return std::vector<backends::Vector>(texts.size(), backends::Vector(dim, 1.0f));
    }
};

}  // namespace

TEST(BuildIndex, ShapeAndUnitRows) {
    backends::MockEmbedder emb(64, 1);
    const std::vector<Document> docs{{"a", LanguageCode("en"), "alpha text"},
                                     {"b", LanguageCode("en"), "beta text"},
                                     {"c", LanguageCode("ko"), "감마"}};
    const Index index = build_index(docs, emb, 2);
    EXPECT_EQ(index.size(), 3u);
    EXPECT_EQ(index.dim(), 64u);
    for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(dot(index.embeddings().row(i), index.embeddings().row(i)), 1.0, 1e-6);
    ASSERT_EQ(index.lang_partitions().size(), 2u);
    EXPECT_EQ(index.lang_partitions().at(LanguageCode("en")).size(), 2u);
    EXPECT_EQ(index.lang_partitions().at(LanguageCode("ko")).size(), 1u);
    EXPECT_EQ(index.fingerprint(), emb.identify());
}

TEST(BuildIndex, DimensionChangeAcrossBatchesFails) {
    FlakyDimEmbedder emb;
    const std::vector<Document> docs{{"a", LanguageCode("en"), "x"}, {"b", LanguageCode("en"), "y"}};
    EXPECT_THROW(build_index(docs, emb, 1), DimensionMismatchError);
}

TEST(BuildIndex, SameResultForAnyWorkerCount) {
    backends::MockEmbedder emb(32, 3);
    std::vector<Document> docs;
    for (int i = 0; i < 50; ++i) docs.push_back({"d" + std::to_string(i), LanguageCode("en"), "text " + std::to_string(i * 7)});
    EXPECT_EQ(serialize_index(build_index(docs, emb, 4, 1)), serialize_index(build_index(docs, emb, 4, 8)));
}

TEST(Retrieve, SelfSimilarityRanksFirst) {
    std::mt19937_64 rng(11);
    const Index index = random_index(20, 16, rng);
    const auto row = index.embeddings().row(7);
    const RankedList list = retrieve(index, row, 3, Scope::all());
    EXPECT_EQ(list.items[0].doc_id, "doc7");
    EXPECT_NEAR(list.items[0].score, 1.0, 1e-6);
    EXPECT_EQ(list.items[0].rank, 1);
}

TEST(Retrieve, EqualScoresBreakTiesById) {
    std::vector<float> v{0.6f, 0.8f};
    EmbeddingMatrix m{2, 2, {}};
    m.values = {v[0], v[1], v[0], v[1]};
    const Index index({{"b", LanguageCode("en"), "x"}, {"a", LanguageCode("en"), "y"}}, m, "t");
    const RankedList list = retrieve(index, v, 2, Scope::all());
    EXPECT_EQ(list.items[0].doc_id, "a");
    EXPECT_EQ(list.items[1].doc_id, "b");
}

TEST(Retrieve, KLargerThanScopeTruncates) {
    std::mt19937_64 rng(2);
    const Index index = random_index(12, 8, rng);
    const RankedList list = retrieve(index, index.embeddings().row(0), 10, Scope::single(LanguageCode("en")));
    EXPECT_EQ(list.items.size(), 4u);
    for (const auto& item : list.items) EXPECT_EQ(index.doc(item.doc_id).lang.str(), "en");
}

TEST(Retrieve, EmptyScopeIsEmptyList) {
    std::mt19937_64 rng(3);
    const Index index = random_index(6, 8, rng);
    EXPECT_TRUE(retrieve(index, index.embeddings().row(0), 5, Scope::single(LanguageCode("fr"))).items.empty());
}

TEST(Retrieve, MatchesBruteForceOn50Docs) {
    std::mt19937_64 rng(50);
    const Index index = random_index(50, 24, rng);
    std::normal_distribution<float> g;
    std::vector<float> q(24);
    for (float& x : q) x = g(rng);
    l2_normalize(q);
    std::vector<std::pair<std::string, double>> all;
    for (std::size_t i = 0; i < index.size(); ++i) {
        const auto r = index.embeddings().row(i);
        all.emplace_back(index.docs()[i].id, oracle::dot(q, std::vector<float>(r.begin(), r.end())));
    }
    const auto expected = oracle::top_k(all, 5);
    const RankedList got = retrieve(index, q, 5, Scope::all());
    ASSERT_EQ(got.items.size(), 5u);
    for (std::size_t i = 0; i < 5; ++i) {
        EXPECT_EQ(got.items[i].doc_id, expected[i].id);
        EXPECT_EQ(got.items[i].rank, expected[i].rank);
        EXPECT_EQ(got.items[i].score, expected[i].score);
    }
    validate_ranked_list(got);
}

TEST(Retrieve, DimensionMismatchIsAnError) {
    std::mt19937_64 rng(4);
    const Index index = random_index(4, 8, rng);
    const std::vector<float> q(7, 0.1f);
    EXPECT_THROW(retrieve(index, q, 1, Scope::all()), DimensionMismatchError);
}

TEST(IndexFile, RoundTripIsBitwise) {
    std::mt19937_64 rng(5);
    const Index index = random_index(9, 12, rng);
    mraglab::testing::TempDir dir;
    save_index(index, dir / "i.bin");
    const LoadedIndex back = load_index(dir / "i.bin");
    EXPECT_FALSE(back.warning);
    EXPECT_EQ(back.index.embeddings().values, index.embeddings().values);
    EXPECT_EQ(back.index.docs().size(), 9u);
    EXPECT_EQ(back.index.docs()[4].id, "doc4");
    EXPECT_EQ(serialize_index(back.index), serialize_index(index));
}

TEST(IndexFile, TruncatedPayloadIsRejected) {
    std::mt19937_64 rng(6);
    const std::string bytes = serialize_index(random_index(5, 8, rng));
    const std::size_t header_end = bytes.find('\n') + 1;
    const std::string cut = bytes.substr(0, header_end + 20);
    EXPECT_THROW(parse_index(cut), IndexFormatError);
}

TEST(IndexFile, FingerprintMismatchWarns) {
    std::mt19937_64 rng(7);
    const std::string bytes = serialize_index(random_index(3, 8, rng));
    EXPECT_FALSE(parse_index(bytes, std::string("test")).warning);
    const LoadedIndex other = parse_index(bytes, std::string("another-model"));
    ASSERT_TRUE(other.warning);
    EXPECT_NE(other.warning->find("another-model"), std::string::npos);
}

TEST(RankCandidates, DuplicateIdsAreRejected) {
    EXPECT_THROW(rank_candidates({{"a", 1.0}, {"a", 0.5}}), DuplicateIdError);
    const auto ranked = rank_candidates({{"z", 0.1}, {"y", 0.3}, {"x", 0.3}});
    EXPECT_EQ(ranked[0].doc_id, "x");
    EXPECT_EQ(ranked[2].rank, 3);
}
