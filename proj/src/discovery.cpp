#include "recdiff/discovery.hpp"

#include <atomic>
#include <cmath>
#include <limits>
#include <mutex>
#include <stdexcept>

#include "recdiff/threading.hpp"

namespace recdiff {

long long n95(double p) {
    if (p >= 1.0) return 1;
    if (p <= 0.0) return N95_UNREACHABLE;
    // the 1e-9 guard keeps exact ratios (e.g. p = 0.95) from ceiling upward
    // off a one-ulp rounding error
    return (long long)std::ceil(std::log(0.05) / std::log1p(-p) - 1e-9);
}

SlopeFit slope_fit(const std::vector<std::pair<double, long long>>& d2_n95) {
    if (d2_n95.size() < 2) throw std::runtime_error("slope fit needs >= 2 points");
    double sx = 0, sy = 0;
    for (const auto& [x, n] : d2_n95) {
        if (n <= 0) throw std::runtime_error("slope fit needs finite n95 values");
        sx += x;
        sy += std::log10(double(n));
    }
    const double mx = sx / d2_n95.size();
    const double my = sy / d2_n95.size();
    double sxx = 0, sxy = 0;
    for (const auto& [x, n] : d2_n95) {
        const double dx = x - mx;
        sxx += dx * dx;
        sxy += dx * (std::log10(double(n)) - my);
    }
    if (sxx == 0.0) throw std::runtime_error("slope fit is degenerate (all d^2 equal)");
    SlopeFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    return fit;
}

double distance_to_manifold(const Vec& target, const TrainingCloud& cloud) {
    if (cloud.empty()) throw std::runtime_error("distance to empty cloud");
    auto point_dist2 = [&](const Vec& p) {
        double d2 = 0.0;
        for (size_t k = 0; k < target.size(); ++k) {
            const double d = target[k] - p[k];
            d2 += d * d;
        }
        return d2;
    };
    if (cloud.size() == 2) {
        // distance to the segment joining the two training points
        const Vec& a = cloud[0];
        const Vec& b = cloud[1];
        double ab2 = 0.0, at_ab = 0.0;
        for (size_t k = 0; k < target.size(); ++k) {
            const double e = b[k] - a[k];
            ab2 += e * e;
            at_ab += (target[k] - a[k]) * e;
        }
        double u = ab2 > 0.0 ? at_ab / ab2 : 0.0;
        u = std::clamp(u, 0.0, 1.0);
        double d2 = 0.0;
        for (size_t k = 0; k < target.size(); ++k) {
            const double c = a[k] + u * (b[k] - a[k]);
            const double d = target[k] - c;
            d2 += d * d;
        }
        return std::sqrt(d2);
    }
    double best = std::numeric_limits<double>::infinity();
    for (const auto& p : cloud) best = std::min(best, point_dist2(p));
    return std::sqrt(best);
}

namespace {

void finalize(DiscoveryReport& r) {
    r.p_path = double(r.hits_path) / double(r.trials);
    r.p_end = double(r.hits_end) / double(r.trials);
    r.n95_path = n95(r.p_path);
    r.n95_end = n95(r.p_end);
    auto ci = [&](double p) { return 3.0 * std::sqrt(p * (1.0 - p) / double(r.trials)); };
    r.ci_path = ci(r.p_path);
    r.ci_end = ci(r.p_end);
}

}  // namespace

DiscoveryReport discrete_discovery(const ProbabilityTable& x0_distribution, const BitMask& target,
                                   const FlipSchedule& schedule, uint64_t trials, uint64_t seed,
                                   int threads) {
    if (trials < 1) throw std::runtime_error("discovery needs trials >= 1");
    const int n = x0_distribution.n;
    const uint32_t target_idx = mask_to_index(target);

    std::mutex merge_mutex;
    uint64_t total_path = 0, total_end = 0;

    parallel_chunks(trials, threads, [&](uint64_t begin, uint64_t end) {
        uint64_t path = 0, endpoint = 0;
        for (uint64_t i = begin; i < end; ++i) {
            rng::Stream stream = rng::Stream::derive(seed, "discrete-discovery", i);
            uint32_t x = uint32_t(stream.categorical(x0_distribution.probs));
            bool visited = (x == target_idx);
            for (int t = 0; t < schedule.steps; ++t) {
                for (int b = 0; b < n; ++b)
                    if (stream.bernoulli(schedule.beta)) x ^= (1u << b);
                visited = visited || (x == target_idx);
            }
            path += visited;
            endpoint += (x == target_idx);
        }
        std::lock_guard<std::mutex> lock(merge_mutex);
        total_path += path;
        total_end += endpoint;
    });

    DiscoveryReport r;
    r.trials = trials;
    r.hits_path = total_path;
    r.hits_end = total_end;
    finalize(r);
    return r;
}

std::vector<DiscoveryReport> continuous_discovery_sweep(const TrainingCloud& cloud,
                                                        const std::vector<DiscoveryTarget>& targets,
                                                        const Normalization& normalization,
                                                        const NoiseSchedule& schedule,
                                                        uint64_t trials, uint64_t seed,
                                                        int threads) {
    if (trials < 1) throw std::runtime_error("discovery needs trials >= 1");
    if (cloud.empty()) throw std::runtime_error("discovery needs a non-empty cloud");
    const size_t dim = cloud.front().size();
    const size_t n_targets = targets.size();

    // The paper states the tolerance box in raw grams; trajectories live in
    // normalized coordinates, so convert each box once through the (affine,
    // monotone) normalization. Membership is identical to a raw-gram check on
    // the denormalized state.
    std::vector<std::vector<double>> lo(n_targets, std::vector<double>(dim));
    std::vector<std::vector<double>> hi(n_targets, std::vector<double>(dim));
    for (size_t j = 0; j < n_targets; ++j) {
        const auto& t = targets[j];
        if (t.weights_grams.size() != dim || t.tolerance_grams.size() != dim)
            throw std::runtime_error("target " + t.name + " has wrong dimension");
        for (size_t k = 0; k < dim; ++k) {
            if (!(t.tolerance_grams[k] >= 0.0))
                throw std::runtime_error("target " + t.name + " needs non-negative tolerances");
            lo[j][k] = (t.weights_grams[k] - t.tolerance_grams[k]) / normalization.scale[k] -
                       normalization.offset[k];
            hi[j][k] = (t.weights_grams[k] + t.tolerance_grams[k]) / normalization.scale[k] -
                       normalization.offset[k];
        }
    }

    const double dt = schedule.dt();
    std::mutex merge_mutex;
    std::vector<uint64_t> total_path(n_targets, 0), total_end(n_targets, 0);

    parallel_chunks(trials, threads, [&](uint64_t begin, uint64_t end) {
        std::vector<uint64_t> path(n_targets, 0), endpoint(n_targets, 0);
        std::vector<uint8_t> visited(n_targets);
        Vec w(dim);
        auto in_box = [&](size_t j) {
            for (size_t k = 0; k < dim; ++k)
                if (w[k] < lo[j][k] || w[k] > hi[j][k]) return false;
            return true;
        };
        for (uint64_t i = begin; i < end; ++i) {
            rng::Stream stream = rng::Stream::derive(seed, "continuous-discovery", i);
            const size_t mode = size_t(stream.uniform() * double(cloud.size())) % cloud.size();
            w = cloud[mode];
            for (size_t j = 0; j < n_targets; ++j) visited[j] = in_box(j);
            for (int s = 0; s < schedule.steps; ++s) {
                w = forward_step_exact(w, schedule, s * dt, (s + 1) * dt, stream);
                for (size_t j = 0; j < n_targets; ++j)
                    if (!visited[j]) visited[j] = in_box(j);
            }
            for (size_t j = 0; j < n_targets; ++j) {
                path[j] += visited[j];
                endpoint[j] += in_box(j);
            }
        }
        std::lock_guard<std::mutex> lock(merge_mutex);
        for (size_t j = 0; j < n_targets; ++j) {
            total_path[j] += path[j];
            total_end[j] += endpoint[j];
        }
    });

    std::vector<DiscoveryReport> out(n_targets);
    for (size_t j = 0; j < n_targets; ++j) {
        out[j].name = targets[j].name;
        out[j].trials = trials;
        out[j].hits_path = total_path[j];
        out[j].hits_end = total_end[j];
        finalize(out[j]);
    }
    return out;
}

DiscoveryReport continuous_discovery(const TrainingCloud& cloud, const DiscoveryTarget& target,
                                     const Normalization& normalization,
                                     const NoiseSchedule& schedule, uint64_t trials, uint64_t seed,
                                     int threads) {
    return continuous_discovery_sweep(cloud, {target}, normalization, schedule, trials, seed,
                                      threads)[0];
}

std::vector<DiscoveryTarget> table1_targets() {
    const std::vector<double> box = {11.0, 9.0, 2.8};
    return {
        {"Hamburger", {1, 1, 0}, {55.0, 45.0, 0.0}, box},
        {"Cheeseburger", {1, 1, 1}, {55.0, 45.0, 14.0}, box},
        {"Mc Double", {}, {55.0, 90.0, 14.0}, box},
        {"Big Mac", {}, {78.0, 90.0, 14.0}, box},
        {"Double Cheeseburger", {}, {55.0, 90.0, 28.0}, box},
        {"Quarter Pounder", {}, {72.0, 120.0, 14.0}, box},
    };
}

}  // namespace recdiff
