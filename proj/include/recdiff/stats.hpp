#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "recdiff/vocab.hpp"

namespace recdiff {

// Empirical statistics of a recipe sample: ingredient-count histogram,
// per-ingredient presence marginals, phi correlation matrix (NaN where a
// variable has zero variance), and mean grams conditional on presence.
struct DistributionSummary {
    int n = 0;
    uint64_t support = 0;
    std::vector<double> count_histogram;  // index = ingredients per recipe, size n+1
    std::vector<double> marginals;
    std::vector<double> corr;          // n*n row-major, unit diagonal where defined
    std::vector<double> mean_weights;  // NaN when never present

    double corr_at(int i, int j) const { return corr[size_t(i) * n + j]; }
};

DistributionSummary summarize(std::span<const Recipe> samples, int n);

struct ComparisonReport {
    double max_marginal_gap = 0.0;
    int max_marginal_gap_id = -1;
    double corr_pearson_r = 1.0;   // over entries defined in both summaries
    size_t corr_entries = 0;
    double max_rel_mean_weight_err = 0.0;  // over the top-k by training total weight
    int top_k = 0;
    std::vector<int> top_ids;
    std::vector<std::pair<int, double>> rare_marginal_gaps;  // bottom-5 by train frequency

    nlohmann::json to_json() const;
};

ComparisonReport compare(const DistributionSummary& train, const DistributionSummary& generated,
                         int top_k = 10);

// CSV emitters for the stats pipeline
void write_counts_csv(const std::string& path, const DistributionSummary& train,
                      const DistributionSummary& generated);
void write_marginals_csv(const std::string& path, const IngredientVocabulary& vocab,
                         const DistributionSummary& train, const DistributionSummary& generated);
void write_corr_csv(const std::string& path, const DistributionSummary& s);
void write_weights_csv(const std::string& path, const IngredientVocabulary& vocab,
                       const DistributionSummary& train, const DistributionSummary& generated);

}  // namespace recdiff
