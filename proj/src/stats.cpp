#include "recdiff/stats.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace recdiff {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
}

DistributionSummary summarize(std::span<const Recipe> samples, int n) {
    if (samples.empty()) throw std::runtime_error("summarize: empty sample list");
    DistributionSummary s;
    s.n = n;
    s.support = samples.size();
    s.count_histogram.assign(n + 1, 0.0);
    s.marginals.assign(n, 0.0);
    s.mean_weights.assign(n, 0.0);
    std::vector<uint64_t> present(n, 0);
    std::vector<double> pair11(size_t(n) * n, 0.0);

    for (const auto& r : samples) {
        if (int(r.mask.size()) != n) throw std::runtime_error("summarize: vocabulary mismatch");
        int count = 0;
        for (int i = 0; i < n; ++i) {
            if (!r.mask[i]) continue;
            ++count;
            ++present[i];
            s.mean_weights[i] += r.weights_grams[i];
            for (int j = i + 1; j < n; ++j)
                if (r.mask[j]) pair11[size_t(i) * n + j] += 1.0;
        }
        s.count_histogram[count] += 1.0;
    }

    const double m = double(samples.size());
    for (auto& c : s.count_histogram) c /= m;
    for (int i = 0; i < n; ++i) {
        s.marginals[i] = double(present[i]) / m;
        s.mean_weights[i] = present[i] > 0 ? s.mean_weights[i] / double(present[i]) : kNaN;
    }

    // phi coefficient (Pearson on the 0/1 indicators); undefined entries stay NaN
    s.corr.assign(size_t(n) * n, kNaN);
    for (int i = 0; i < n; ++i) {
        const double pi = s.marginals[i];
        const double vi = pi * (1.0 - pi);
        if (vi > 0.0) s.corr[size_t(i) * n + i] = 1.0;
        for (int j = i + 1; j < n; ++j) {
            const double pj = s.marginals[j];
            const double vj = pj * (1.0 - pj);
            if (vi <= 0.0 || vj <= 0.0) continue;
            const double p11 = pair11[size_t(i) * n + j] / m;
            const double phi = (p11 - pi * pj) / std::sqrt(vi * vj);
            s.corr[size_t(i) * n + j] = phi;
            s.corr[size_t(j) * n + i] = phi;
        }
    }
    return s;
}

ComparisonReport compare(const DistributionSummary& train, const DistributionSummary& generated,
                         int top_k) {
    if (train.n != generated.n) throw std::runtime_error("compare: vocabulary mismatch");
    const int n = train.n;
    ComparisonReport rep;
    rep.top_k = top_k;

    for (int i = 0; i < n; ++i) {
        const double gap = std::abs(train.marginals[i] - generated.marginals[i]);
        if (gap > rep.max_marginal_gap) {
            rep.max_marginal_gap = gap;
            rep.max_marginal_gap_id = i;
        }
    }

    // Pearson r over off-diagonal entries defined in both summaries
    std::vector<double> a, b;
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            const double x = train.corr_at(i, j);
            const double y = generated.corr_at(i, j);
            if (std::isnan(x) || std::isnan(y)) continue;
            a.push_back(x);
            b.push_back(y);
        }
    }
    rep.corr_entries = a.size();
    if (a.size() >= 2) {
        const double ma = std::accumulate(a.begin(), a.end(), 0.0) / a.size();
        const double mb = std::accumulate(b.begin(), b.end(), 0.0) / b.size();
        double saa = 0, sbb = 0, sab = 0;
        for (size_t k = 0; k < a.size(); ++k) {
            saa += (a[k] - ma) * (a[k] - ma);
            sbb += (b[k] - mb) * (b[k] - mb);
            sab += (a[k] - ma) * (b[k] - mb);
        }
        rep.corr_pearson_r = (saa > 0 && sbb > 0) ? sab / std::sqrt(saa * sbb) : 1.0;
    } else {
        rep.corr_pearson_r = 1.0;  // degenerate: nothing defined to disagree on
    }

    // top-k ingredients by training total weight (marginal * mean weight)
    std::vector<int> ids(n);
    std::iota(ids.begin(), ids.end(), 0);
    auto total_weight = [&](int i) {
        return std::isnan(train.mean_weights[i]) ? 0.0
                                                 : train.marginals[i] * train.mean_weights[i];
    };
    std::stable_sort(ids.begin(), ids.end(),
                     [&](int x, int y) { return total_weight(x) > total_weight(y); });
    for (int k = 0; k < std::min(top_k, n); ++k) {
        const int i = ids[k];
        if (std::isnan(train.mean_weights[i])) continue;
        rep.top_ids.push_back(i);
        const double gen = std::isnan(generated.mean_weights[i]) ? 0.0 : generated.mean_weights[i];
        const double rel = std::abs(gen - train.mean_weights[i]) / train.mean_weights[i];
        rep.max_rel_mean_weight_err = std::max(rep.max_rel_mean_weight_err, rel);
    }

    // bottom-5 rarest by train frequency, ties by ingredient id
    std::vector<int> rare_ids(n);
    std::iota(rare_ids.begin(), rare_ids.end(), 0);
    std::stable_sort(rare_ids.begin(), rare_ids.end(), [&](int x, int y) {
        if (train.marginals[x] != train.marginals[y])
            return train.marginals[x] < train.marginals[y];
        return x < y;
    });
    for (int k = 0; k < std::min(5, n); ++k) {
        const int i = rare_ids[k];
        rep.rare_marginal_gaps.emplace_back(
            i, std::abs(train.marginals[i] - generated.marginals[i]));
    }
    return rep;
}

nlohmann::json ComparisonReport::to_json() const {
    nlohmann::json j;
    j["max_marginal_gap"] = max_marginal_gap;
    j["max_marginal_gap_id"] = max_marginal_gap_id;
    j["corr_pearson_r"] = corr_pearson_r;
    j["corr_entries"] = corr_entries;
    j["max_rel_mean_weight_err_topk"] = max_rel_mean_weight_err;
    j["top_k"] = top_k;
    j["top_ids"] = top_ids;
    j["rare_marginal_gaps"] = nlohmann::json::array();
    for (const auto& [id, gap] : rare_marginal_gaps)
        j["rare_marginal_gaps"].push_back({{"id", id}, {"gap", gap}});
    return j;
}

namespace {

std::ofstream open_csv(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    return out;
}

}  // namespace

void write_counts_csv(const std::string& path, const DistributionSummary& train,
                      const DistributionSummary& generated) {
    auto out = open_csv(path);
    out << "ingredient_count,train_freq,generated_freq\n";
    for (size_t k = 0; k < train.count_histogram.size(); ++k)
        out << k << "," << train.count_histogram[k] << "," << generated.count_histogram[k] << "\n";
}

void write_marginals_csv(const std::string& path, const IngredientVocabulary& vocab,
                         const DistributionSummary& train, const DistributionSummary& generated) {
    auto out = open_csv(path);
    out << "id,name,train_marginal,generated_marginal\n";
    for (int i = 0; i < train.n; ++i)
        out << i << "," << vocab.entries[i].name << "," << train.marginals[i] << ","
            << generated.marginals[i] << "\n";
}

void write_corr_csv(const std::string& path, const DistributionSummary& s) {
    auto out = open_csv(path);
    for (int i = 0; i < s.n; ++i) {
        for (int j = 0; j < s.n; ++j) {
            if (j) out << ",";
            const double v = s.corr_at(i, j);
            if (std::isnan(v))
                out << "";  // undefined (zero variance), never imputed as 0
            else
                out << v;
        }
        out << "\n";
    }
}

void write_weights_csv(const std::string& path, const IngredientVocabulary& vocab,
                       const DistributionSummary& train, const DistributionSummary& generated) {
    auto out = open_csv(path);
    out << "id,name,train_mean_grams,generated_mean_grams\n";
    for (int i = 0; i < train.n; ++i) {
        out << i << "," << vocab.entries[i].name << ",";
        if (!std::isnan(train.mean_weights[i])) out << train.mean_weights[i];
        out << ",";
        if (!std::isnan(generated.mean_weights[i])) out << generated.mean_weights[i];
        out << "\n";
    }
}

}  // namespace recdiff
