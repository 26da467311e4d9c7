#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "recdiff/continuous.hpp"
#include "recdiff/discrete.hpp"
#include "recdiff/vocab.hpp"

namespace recdiff {

// Target configuration: a mask for the discrete tier, or raw gram weights
// with a per-ingredient tolerance box for the continuous tier.
struct DiscoveryTarget {
    std::string name;
    BitMask mask;                        // discrete
    std::vector<double> weights_grams;   // continuous, raw grams
    std::vector<double> tolerance_grams; // half-widths, > 0
};

struct DiscoveryReport {
    std::string name;
    uint64_t trials = 0;
    uint64_t hits_path = 0;
    uint64_t hits_end = 0;
    double p_path = 0.0;
    double p_end = 0.0;
    long long n95_path = 0;
    long long n95_end = 0;
    double ci_path = 0.0;  // 3 sigma binomial half-width
    double ci_end = 0.0;
};

// ceil(ln 0.05 / ln(1-p)); p >= 1 -> 1; p <= 0 -> N95_UNREACHABLE
inline constexpr long long N95_UNREACHABLE = -1;
long long n95(double p);

struct SlopeFit {
    double slope = 0.0;
    double intercept = 0.0;
};

// least squares of log10(n95) against d^2
SlopeFit slope_fit(const std::vector<std::pair<double, long long>>& d2_n95);

// Distance from a normalized target to the training manifold: the segment
// joining the two cloud points for two-point clouds, otherwise the minimum
// point distance.
double distance_to_manifold(const Vec& target_normalized, const TrainingCloud& cloud);

DiscoveryReport discrete_discovery(const ProbabilityTable& x0_distribution, const BitMask& target,
                                   const FlipSchedule& schedule, uint64_t trials, uint64_t seed,
                                   int threads = 1);

// All targets are evaluated against one shared trajectory ensemble, matching
// the paper's protocol (and n-fold cheaper than separate runs).
std::vector<DiscoveryReport> continuous_discovery_sweep(const TrainingCloud& cloud,
                                                        const std::vector<DiscoveryTarget>& targets,
                                                        const Normalization& normalization,
                                                        const NoiseSchedule& schedule,
                                                        uint64_t trials, uint64_t seed,
                                                        int threads = 1);

DiscoveryReport continuous_discovery(const TrainingCloud& cloud, const DiscoveryTarget& target,
                                     const Normalization& normalization,
                                     const NoiseSchedule& schedule, uint64_t trials, uint64_t seed,
                                     int threads = 1);

// The six named burgers with the paper's 20% tolerance box
// [+-11.0, +-9.0, +-2.8] g on [bun, patty, cheese].
std::vector<DiscoveryTarget> table1_targets();

}  // namespace recdiff
