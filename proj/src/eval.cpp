#include "mraglab/eval.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <set>

#include <boost/math/distributions/students_t.hpp>
#include <spdlog/spdlog.h>

#include "mraglab/hashing.hpp"
#include "mraglab/parallel.hpp"
#include "mraglab/text.hpp"

namespace mraglab::eval {

std::string normalize_for_recall(const std::string& s) {
    return text::trim(text::casefold(text::nfc(s)));
}

namespace {

double gold_recall(const std::u32string& pred, const std::u32string& gold, bool multiset) {
    if (gold.size() < 3) return pred.find(gold) != std::u32string::npos ? 1.0 : 0.0;
    if (pred.size() < 3) return 0.0;

    std::map<std::u32string_view, std::size_t> pred_grams;
    for (std::size_t i = 0; i + 3 <= pred.size(); ++i) ++pred_grams[std::u32string_view(pred).substr(i, 3)];
    std::map<std::u32string_view, std::size_t> gold_grams;
    for (std::size_t i = 0; i + 3 <= gold.size(); ++i) ++gold_grams[std::u32string_view(gold).substr(i, 3)];

    std::size_t hit = 0;
    std::size_t total = 0;
    for (const auto& [gram, count] : gold_grams) {
        const auto it = pred_grams.find(gram);
        const std::size_t in_pred = it == pred_grams.end() ? 0 : it->second;
        if (multiset) {
            total += count;
            hit += std::min(count, in_pred);
        } else {
            total += 1;
            hit += in_pred > 0 ? 1 : 0;
        }
    }
    return static_cast<double>(hit) / static_cast<double>(total);
}

}  // namespace

RecallResult char3_recall(const std::string& prediction, const std::vector<std::string>& golds,
                          const RecallOptions& options) {
    if (golds.empty()) throw PreconditionError("char3_recall: no gold answers");
    RecallResult result;
    const std::u32string pred = text::to_codepoints(normalize_for_recall(prediction));
    for (const std::string& g : golds) {
        const std::u32string gold = text::to_codepoints(normalize_for_recall(g));
        if (gold.empty()) {
            spdlog::warn("char3_recall: skipping empty gold answer");
            ++result.skipped_empty_golds;
            continue;
        }
        const double r = pred.empty() ? 0.0 : gold_recall(pred, gold, options.multiset);
        result.per_gold.push_back(r);
        result.recall = std::max(result.recall, r);
    }
    return result;
}

namespace {

void check_inputs(std::span<const double> xs, std::span<const double> ys) {
    if (xs.size() != ys.size()) {
        throw PreconditionError("correlation: length mismatch (" + std::to_string(xs.size()) + " vs " +
                                std::to_string(ys.size()) + ")");
    }
    if (xs.size() < 3) throw PreconditionError("correlation: need at least 3 samples");
}

std::vector<double> centered(std::span<const double> v, const char* side) {
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    std::vector<double> out(v.size());
    double ss = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        out[i] = v[i] - mean;
        ss += out[i] * out[i];
    }
    if (!(ss > 0.0)) throw DegenerateInputError(std::string("correlation: zero variance in ") + side);
    return out;
}

double norm(const std::vector<double>& v) {
    double ss = 0.0;
    for (double x : v) ss += x * x;
    return std::sqrt(ss);
}

double clamp_unit(double r) {
    return std::clamp(r, -1.0, 1.0);
}

}  // namespace

double pearson(std::span<const double> xs, std::span<const double> ys) {
    check_inputs(xs, ys);
    const std::vector<double> xc = centered(xs, "xs");
    const std::vector<double> yc = centered(ys, "ys");
    double sxy = 0.0;
    for (std::size_t i = 0; i < xc.size(); ++i) sxy += xc[i] * yc[i];
    return clamp_unit(sxy / (norm(xc) * norm(yc)));
}

std::vector<double> average_ranks(std::span<const double> values) {
    std::vector<std::size_t> order(values.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<double> ranks(values.size());
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
        const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = avg;
        i = j + 1;
    }
    return ranks;
}

double spearman(std::span<const double> xs, std::span<const double> ys) {
    check_inputs(xs, ys);
    const std::vector<double> rx = average_ranks(xs);
    const std::vector<double> ry = average_ranks(ys);
    return pearson(rx, ry);
}

namespace {

// Unbiased integer in [0, bound] by rejection.
std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t bound) {
    const std::uint64_t range = bound + 1;
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % range;
    std::uint64_t x;
    do {
        x = rng();
    } while (x >= limit);
    return x % range;
}

}  // namespace

double perm_pvalue(CorrelationMetric metric, std::span<const double> xs, std::span<const double> ys,
                   std::uint64_t n_perm, std::uint64_t seed, std::size_t workers) {
    check_inputs(xs, ys);
    if (n_perm < 1000) throw PreconditionError("perm_pvalue: n_perm must be >= 1000");

    std::vector<double> xv(xs.begin(), xs.end());
    std::vector<double> yv(ys.begin(), ys.end());
    if (metric == CorrelationMetric::spearman) {
        xv = average_ranks(xs);
        yv = average_ranks(ys);
    }
    // Pearson under permutation of y: means and norms are invariant, only the
    // cross product changes.
    const std::vector<double> xc = centered(xv, "xs");
    const std::vector<double> yc = centered(yv, "ys");
    const double denom = norm(xc) * norm(yc);
    double obs = 0.0;
    for (std::size_t i = 0; i < xc.size(); ++i) obs += xc[i] * yc[i];
    const double threshold = std::abs(obs / denom) - 1e-12;

    const std::size_t n_chunks = std::max<std::size_t>(1, std::min<std::size_t>(workers, 64));
    std::vector<std::uint64_t> hits(n_chunks, 0);
    parallel_for(n_chunks, n_chunks, [&](std::size_t c) {
        std::vector<double> perm(yc.size());
        std::uint64_t local = 0;
        for (std::uint64_t t = c; t < n_perm; t += n_chunks) {
            std::mt19937_64 rng(splitmix64(seed ^ splitmix64(t + 1)));
            perm = yc;
            for (std::size_t i = perm.size() - 1; i > 0; --i) std::swap(perm[i], perm[bounded(rng, i)]);
            double s = 0.0;
            for (std::size_t i = 0; i < xc.size(); ++i) s += xc[i] * perm[i];
            if (std::abs(s / denom) >= threshold) ++local;
        }
        hits[c] = local;
    });
    const std::uint64_t total = std::accumulate(hits.begin(), hits.end(), std::uint64_t{0});
    return static_cast<double>(1 + total) / static_cast<double>(n_perm + 1);
}

double t_approx_pvalue(double r, std::size_t n) {
    if (n < 3) throw PreconditionError("t_approx_pvalue: n must be >= 3");
    if (std::abs(r) >= 1.0) return 0.0;
    const double dof = static_cast<double>(n - 2);
    const double t = std::abs(r) * std::sqrt(dof / (1.0 - r * r));
    const boost::math::students_t dist(dof);
    return std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, t)));
}

CorrelationResult correlate(std::span<const double> xs, std::span<const double> ys, std::uint64_t n_perm,
                            std::uint64_t seed, std::size_t workers) {
    CorrelationResult r;
    r.n = xs.size();
    r.pearson_r = pearson(xs, ys);
    r.spearman_rho = spearman(xs, ys);
    r.p_pearson = perm_pvalue(CorrelationMetric::pearson, xs, ys, n_perm, seed, workers);
    r.p_spearman = perm_pvalue(CorrelationMetric::spearman, xs, ys, n_perm, seed, workers);
    r.p_pearson_t = t_approx_pvalue(r.pearson_r, r.n);
    r.p_spearman_t = t_approx_pvalue(r.spearman_rho, r.n);
    r.method = "permutation(n_perm=" + std::to_string(n_perm) + ",seed=" + std::to_string(seed) + ")";
    return r;
}

}  // namespace mraglab::eval
