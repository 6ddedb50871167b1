#include <gtest/gtest.h>

#include <random>

#include "mraglab/eval.hpp"
#include "oracles.hpp"

using namespace mraglab;
using namespace mraglab::eval;

namespace {

std::string random_unicode(std::mt19937_64& rng, std::size_t max_len) {
    static const std::vector<std::string> alphabet{
        "a", "b", "c", "A", "B", "e", "\xCC\x81" /* U+0301 */, "\xC3\xA9" /* é */, "ß", "Σ", "σ", "ς",
        " ", "\t", "北", "京", "大", "한", "국", "가", "ﬁ", "İ", "１", "-"};
    std::uniform_int_distribution<std::size_t> len(0, max_len);
    std::uniform_int_distribution<std::size_t> pick(0, alphabet.size() - 1);
    std::string s;
    const std::size_t n = len(rng);
    for (std::size_t i = 0; i < n; ++i) s += alphabet[pick(rng)];
    return s;
}

}  // namespace

TEST(Recall, IdentityIsOne) {
    EXPECT_EQ(char3_recall("Seoul", {"Seoul"}).recall, 1.0);
    EXPECT_EQ(char3_recall("서울특별시", {"서울특별시"}).recall, 1.0);
}

TEST(Recall, HandEnumeratedCases) {
    EXPECT_DOUBLE_EQ(char3_recall("abc", {"abcd"}).recall, 0.5);
    const RecallResult r = char3_recall("zzabczz", {"x", "abcdef"});
    EXPECT_DOUBLE_EQ(r.recall, 0.25);
    ASSERT_EQ(r.per_gold.size(), 2u);
    EXPECT_EQ(r.per_gold[0], 0.0);
}

TEST(Recall, ShortGoldUsesContainment) {
    EXPECT_EQ(char3_recall("수도는 서울", {"서울"}).recall, 1.0);
    EXPECT_EQ(char3_recall("수도는 부산", {"서울"}).recall, 0.0);
}

TEST(Recall, NormalizesCaseAndComposition) {
    EXPECT_EQ(char3_recall("  CAFÉ  ", {"cafe\xCC\x81"}).recall, 1.0);
    EXPECT_EQ(char3_recall("STRASSE", {"straße"}).recall, 1.0);
}

TEST(Recall, EmptyPredictionAndEmptyGold) {
    EXPECT_EQ(char3_recall("", {"abc"}).recall, 0.0);
    const RecallResult r = char3_recall("abc", {"", "abc"});
    EXPECT_EQ(r.skipped_empty_golds, 1u);
    EXPECT_EQ(r.recall, 1.0);
    EXPECT_THROW(char3_recall("abc", {}), PreconditionError);
}

TEST(Recall, MultisetCountsRepeats) {
    RecallOptions multi;
    multi.multiset = true;
    EXPECT_DOUBLE_EQ(char3_recall("aaa", {"aaaa"}).recall, 1.0);
    EXPECT_DOUBLE_EQ(char3_recall("aaa", {"aaaa"}, multi).recall, 0.5);
}

TEST(Recall, AgreesWithOracleOnFuzzedUnicode) {
    std::mt19937_64 rng(1234);
    for (int i = 0; i < 1000; ++i) {
        const std::string pred = random_unicode(rng, 14);
        std::vector<std::string> golds;
        const int n = 1 + int(rng() % 3);
        for (int g = 0; g < n; ++g) golds.push_back(random_unicode(rng, 7));
        EXPECT_DOUBLE_EQ(char3_recall(pred, golds).recall, oracle::char3_recall(pred, golds)) << pred;
    }
}

TEST(Pearson, AffineAndAntiCorrelation) {
    const std::vector<double> x{1, 2, 4, 7, 11};
    std::vector<double> y;
    std::vector<double> neg;
    for (double v : x) {
        y.push_back(2 * v + 1);
        neg.push_back(-v);
    }
    EXPECT_NEAR(pearson(x, y), 1.0, 1e-12);
    EXPECT_NEAR(pearson(x, neg), -1.0, 1e-12);
}

TEST(Pearson, InvariantUnderPositiveAffineMaps) {
    std::mt19937_64 rng(8);
    std::normal_distribution<double> g;
    for (int t = 0; t < 50; ++t) {
        std::vector<double> x(13), y(13), x2, y2;
        for (int i = 0; i < 13; ++i) {
            x[i] = g(rng);
            y[i] = x[i] + g(rng);
        }
        for (int i = 0; i < 13; ++i) {
            x2.push_back(3.5 * x[i] - 2);
            y2.push_back(0.25 * y[i] + 10);
        }
        EXPECT_NEAR(pearson(x, y), pearson(x2, y2), 1e-12);
        EXPECT_NEAR(pearson(x, y), oracle::pearson(x, y), 1e-12);
    }
}

TEST(Pearson, DegenerateInputsAreErrors) {
    const std::vector<double> flat{1, 1, 1};
    const std::vector<double> x{1, 2, 3};
    try {
        pearson(x, flat);
        FAIL();
    } catch (const DegenerateInputError& e) {
        EXPECT_NE(std::string(e.what()).find("y"), std::string::npos);
    }
    EXPECT_THROW(pearson(std::vector<double>{1, 2}, std::vector<double>{1, 2}), PreconditionError);
    EXPECT_THROW(pearson(x, std::vector<double>{1, 2}), PreconditionError);
}

TEST(Spearman, MonotoneTransformAndTies) {
    const std::vector<double> x{0.3, 1.5, 2.0, 7.1, 9.9};
    std::vector<double> y;
    for (double v : x) y.push_back(std::exp(v));
    EXPECT_NEAR(spearman(x, y), 1.0, 1e-12);
    EXPECT_NEAR(spearman(std::vector<double>{1, 1, 2}, std::vector<double>{3, 3, 5}), 1.0, 1e-12);
    EXPECT_EQ(average_ranks(std::vector<double>{5, 1, 5, 3}), (std::vector<double>{3.5, 1, 3.5, 2}));
}

TEST(Spearman, EqualsPearsonOfRanks) {
    std::mt19937_64 rng(21);
    std::uniform_int_distribution<int> d(0, 5);
    for (int t = 0; t < 100; ++t) {
        std::vector<double> x(10), y(10);
        for (int i = 0; i < 10; ++i) {
            x[i] = d(rng);
            y[i] = d(rng) + 0.5 * x[i];
        }
        try {
            const double rho = spearman(x, y);
            EXPECT_NEAR(rho, pearson(average_ranks(x), average_ranks(y)), 1e-12);
            EXPECT_NEAR(rho, oracle::spearman(x, y), 1e-12);
        } catch (const DegenerateInputError&) {
        }
    }
}

TEST(Permutation, DeterministicAndWorkerIndependent) {
    const std::vector<double> x{1, 3, 2, 5, 4, 6, 8, 7, 9, 10, 12, 11, 13};
    const std::vector<double> y{2, 1, 4, 3, 6, 5, 7, 9, 8, 11, 10, 13, 12};
    const double a = perm_pvalue(CorrelationMetric::pearson, x, y, 5000, 7, 1);
    EXPECT_EQ(a, perm_pvalue(CorrelationMetric::pearson, x, y, 5000, 7, 1));
    EXPECT_EQ(a, perm_pvalue(CorrelationMetric::pearson, x, y, 5000, 7, 4));
    EXPECT_THROW(perm_pvalue(CorrelationMetric::pearson, x, y, 999, 7), PreconditionError);
}

TEST(Permutation, PerfectCorrelationHitsTheFloor) {
    std::vector<double> x, y;
    for (int i = 0; i < 13; ++i) {
        x.push_back(i);
        y.push_back(3 * i + 2);
    }
    const double p = perm_pvalue(CorrelationMetric::pearson, x, y, 100000, 7, 4);
    EXPECT_LE(p, 2e-5);
    EXPECT_GE(p, 1.0 / 100001);
}

TEST(Permutation, IndependentSamplesAreNotSignificant) {
    std::mt19937_64 rng(2024);
    std::normal_distribution<double> g;
    std::vector<double> x(13), y(13);
    for (auto& v : x) v = g(rng);
    for (auto& v : y) v = g(rng);
    EXPECT_GT(perm_pvalue(CorrelationMetric::pearson, x, y, 20000, 7, 2), 0.01);
    EXPECT_GT(perm_pvalue(CorrelationMetric::spearman, x, y, 20000, 7, 2), 0.01);
}

TEST(TApprox, KnownValue) {
    // r = 0.5, n = 12: t = 0.5 * sqrt(10 / 0.75) = 1.8257, two-sided p = 0.0979
    EXPECT_NEAR(t_approx_pvalue(0.5, 12), 0.0979, 5e-4);
    EXPECT_EQ(t_approx_pvalue(1.0, 13), 0.0);
}
