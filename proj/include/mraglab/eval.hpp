#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mraglab/core.hpp"

namespace mraglab::eval {

struct RecallOptions {
    /// Count repeated grams (clipped) instead of comparing gram sets.
    bool multiset = false;
};

struct RecallResult {
    std::string query_id;
    /// One value per non-empty gold, in input order.
    std::vector<double> per_gold;
    double recall = 0.0;
    std::size_t skipped_empty_golds = 0;
};

/// Character 3-gram recall of the prediction against each gold, maxed over
/// golds. Both sides are NFC-normalized, case-folded and trimmed; grams are
/// contiguous 3-code-point substrings. Golds shorter than 3 code points score
/// 1 when contained in the prediction, else 0.
RecallResult char3_recall(const std::string& prediction, const std::vector<std::string>& golds,
                          const RecallOptions& options = {});

/// The normalization char3_recall applies before extracting grams.
std::string normalize_for_recall(const std::string& s);

class DegenerateInputError : public Error {
public:
    using Error::Error;
};

double pearson(std::span<const double> xs, std::span<const double> ys);
double spearman(std::span<const double> xs, std::span<const double> ys);

/// 1-based ranks, ties receive the mean of the ranks they span.
std::vector<double> average_ranks(std::span<const double> values);

enum class CorrelationMetric { pearson, spearman };

/// Two-sided permutation p-value: (1 + #{|stat_perm| >= |stat_obs|}) / (n_perm + 1).
/// Trial t shuffles with a generator seeded from (seed, t), so the result does
/// not depend on `workers`.
double perm_pvalue(CorrelationMetric metric, std::span<const double> xs, std::span<const double> ys,
                   std::uint64_t n_perm, std::uint64_t seed, std::size_t workers = 1);

/// Two-sided p from the t approximation t = r sqrt((n-2)/(1-r^2)), n-2 dof.
double t_approx_pvalue(double r, std::size_t n);

struct CorrelationResult {
    std::size_t n = 0;
    double pearson_r = 0.0;
    double spearman_rho = 0.0;
    double p_pearson = 1.0;
    double p_spearman = 1.0;
    double p_pearson_t = 1.0;
    double p_spearman_t = 1.0;
    std::string method;
};

CorrelationResult correlate(std::span<const double> xs, std::span<const double> ys, std::uint64_t n_perm,
                            std::uint64_t seed, std::size_t workers = 1);

}  // namespace mraglab::eval
