#pragma once

// Brute-force reference implementations used to cross-check the library.
// They share no code with it beyond the plain data types.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>

namespace oracle {

// --- vectors -----------------------------------------------------------------

inline std::vector<float> unit(const std::vector<float>& v) {
    double sq = 0.0;
    for (float x : v) sq += double(x) * double(x);
    const double inv = 1.0 / std::sqrt(sq);
    std::vector<float> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = float(double(v[i]) * inv);
    return out;
}

inline double dot(const std::vector<float>& a, const std::vector<float>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += double(a[i]) * double(b[i]);
    return s;
}

inline double cosine(const std::vector<float>& a, const std::vector<float>& b) { return dot(unit(a), unit(b)); }

struct Hit {
    std::string id;
    double score;
    int rank;
};

/// Scores everything, sorts the whole list, keeps the first k.
inline std::vector<Hit> top_k(const std::vector<std::pair<std::string, double>>& scored, std::size_t k) {
    std::vector<std::pair<std::string, double>> all = scored;
    std::stable_sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
        if (a.second > b.second) return true;
        if (a.second < b.second) return false;
        return a.first < b.first;
    });
    std::vector<Hit> out;
    for (std::size_t i = 0; i < all.size() && i < k; ++i) out.push_back({all[i].first, all[i].second, int(i) + 1});
    return out;
}

// --- MLRS ----------------------------------------------------------------------

struct RetrievedDoc {
    std::string id;
    std::string lang;
    std::string text;
};

struct LedgerRow {
    std::string id;
    long long r_init;
    long long r_rerank;
    long long delta;
    long long delta_max;
};

struct MlrsOutcome {
    std::vector<LedgerRow> ledger;  // in initial-rank order
    double score;
};

using EmbedFn = std::function<std::vector<float>(const std::string&)>;
using TranslateFn = std::function<std::string(const std::string& text, const std::string& src, const std::string& tgt)>;

/// Ranks are positions in `initial` (1-based). Documents in the query or the
/// target language stay as they are; every other document is replaced by its
/// translation and scored.
inline MlrsOutcome mlrs(const std::string& query_text, const std::string& query_lang, const std::string& target,
                        const std::vector<RetrievedDoc>& initial, const EmbedFn& embed, const TranslateFn& translate) {
    const std::vector<float> q = embed(query_text);
    std::vector<std::pair<std::string, double>> pool;
    std::vector<bool> translated(initial.size(), false);
    for (std::size_t i = 0; i < initial.size(); ++i) {
        const RetrievedDoc& d = initial[i];
        std::string text = d.text;
        if (d.lang != query_lang && d.lang != target) {
            text = translate(d.text, d.lang, target);
            translated[i] = true;
        }
        pool.emplace_back(d.id, cosine(q, embed(text)));
    }
    const std::vector<Hit> reranked = top_k(pool, pool.size());
    std::map<std::string, int> new_rank;
    for (const Hit& h : reranked) new_rank[h.id] = h.rank;

    MlrsOutcome out{{}, 0.0};
    long long sum = 0;
    long long sum_max = 0;
    for (std::size_t i = 0; i < initial.size(); ++i) {
        if (!translated[i]) continue;
        const long long r0 = static_cast<long long>(i) + 1;
        const long long r1 = new_rank.at(initial[i].id);
        const long long delta = r0 > r1 ? r0 - r1 : 0;
        out.ledger.push_back({initial[i].id, r0, r1, delta, r0 - 1});
        sum += delta;
        sum_max += r0 - 1;
    }
    out.score = sum_max == 0 ? 0.0 : 100.0 * double(sum) / double(sum_max);
    return out;
}

// --- character 3-gram recall -------------------------------------------------

inline std::u32string normalized_codepoints(const std::string& s) {
    UErrorCode status = U_ZERO_ERROR;
    const icu::Normalizer2* nfc = icu::Normalizer2::getNFCInstance(status);
    icu::UnicodeString u = icu::UnicodeString::fromUTF8(s);
    u = nfc->normalize(u, status);
    u.foldCase(U_FOLD_CASE_DEFAULT);
    u = nfc->normalize(u, status);
    std::u32string cps;
    for (int32_t i = 0; i < u.length();) {
        const UChar32 c = u.char32At(i);
        cps.push_back(static_cast<char32_t>(c));
        i += U16_LENGTH(c);
    }
    std::size_t b = 0;
    std::size_t e = cps.size();
    while (b < e && u_isUWhiteSpace(UChar32(cps[b]))) ++b;
    while (e > b && u_isUWhiteSpace(UChar32(cps[e - 1]))) --e;
    return cps.substr(b, e - b);
}

inline std::set<std::u32string> grams(const std::u32string& s) {
    std::set<std::u32string> out;
    for (std::size_t i = 0; i + 3 <= s.size(); ++i) out.insert(s.substr(i, 3));
    return out;
}

/// Max over non-empty golds; 0 when every gold is empty.
inline double char3_recall(const std::string& prediction, const std::vector<std::string>& golds) {
    const std::u32string p = normalized_codepoints(prediction);
    const std::set<std::u32string> pg = grams(p);
    double best = 0.0;
    for (const std::string& g : golds) {
        const std::u32string gn = normalized_codepoints(g);
        if (gn.empty()) continue;
        double r;
        if (gn.size() < 3) {
            r = !p.empty() && p.find(gn) != std::u32string::npos ? 1.0 : 0.0;
        } else {
            const std::set<std::u32string> gg = grams(gn);
            std::size_t hit = 0;
            for (const auto& x : gg) hit += pg.count(x);
            r = double(hit) / double(gg.size());
        }
        best = std::max(best, r);
    }
    return best;
}

// --- similarity and preference -------------------------------------------------

/// Row-major L x L matrix of pairwise cosines.
inline std::vector<double> pairwise_cosine(const std::vector<std::vector<float>>& vecs) {
    const std::size_t n = vecs.size();
    std::vector<double> m(n * n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double ab = 0, aa = 0, bb = 0;
            for (std::size_t d = 0; d < vecs[i].size(); ++d) {
                ab += double(vecs[i][d]) * vecs[j][d];
                aa += double(vecs[i][d]) * vecs[i][d];
                bb += double(vecs[j][d]) * vecs[j][d];
            }
            m[i * n + j] = ab / std::sqrt(aa * bb);
        }
    }
    return m;
}

/// Per-row mean of the off-diagonal entries of the element-wise mean matrix.
inline std::vector<double> preference(const std::vector<std::vector<double>>& matrices, std::size_t n) {
    std::vector<double> mean(n * n, 0.0);
    for (const auto& m : matrices) {
        for (std::size_t i = 0; i < n * n; ++i) mean[i] += m[i] / double(matrices.size());
    }
    std::vector<double> out(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (i != j) out[i] += mean[i * n + j];
        }
        out[i] /= double(n - 1);
    }
    return out;
}

// --- correlation ---------------------------------------------------------------

inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = double(x.size());
    double sx = 0, sy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
    }
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - sx / n) * (y[i] - sy / n);
        sxx += (x[i] - sx / n) * (x[i] - sx / n);
        syy += (y[i] - sy / n) * (y[i] - sy / n);
    }
    return sxy / std::sqrt(sxx * syy);
}

/// Average ranks by counting: rank = #less + (#equal + 1) / 2.
inline std::vector<double> ranks(const std::vector<double>& v) {
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        double less = 0, equal = 0;
        for (double w : v) {
            if (w < v[i]) ++less;
            if (w == v[i]) ++equal;
        }
        r[i] = less + (equal + 1) / 2;
    }
    return r;
}

inline double spearman(const std::vector<double>& x, const std::vector<double>& y) {
    return pearson(ranks(x), ranks(y));
}

}  // namespace oracle
