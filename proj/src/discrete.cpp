#include "recdiff/discrete.hpp"

#include <cmath>
#include <stdexcept>

namespace recdiff {

namespace {

void check_dim(int n) {
    if (n < 1 || n > 24) throw std::runtime_error("exact tier requires 1 <= n <= 24");
}

void check_same_length(const BitMask& x, const BitMask& y) {
    if (x.size() != y.size()) throw std::runtime_error("bit mask length mismatch");
}

}  // namespace

ProbabilityTable::ProbabilityTable(int n_, std::vector<double> p) : n(n_), probs(std::move(p)) {
    check_dim(n);
    if (probs.size() != (size_t(1) << n))
        throw std::runtime_error("probability table size must be 2^n");
}

double ProbabilityTable::max_abs_diff(const ProbabilityTable& other) const {
    if (n != other.n) throw std::runtime_error("table dimension mismatch");
    double m = 0.0;
    for (size_t i = 0; i < probs.size(); ++i)
        m = std::max(m, std::abs(probs[i] - other.probs[i]));
    return m;
}

void ProbabilityTable::validate(double tol) const {
    double sum = 0.0;
    for (double p : probs) {
        if (!(p >= 0.0)) throw std::runtime_error("negative probability entry");
        sum += p;
    }
    if (std::abs(sum - 1.0) > tol) throw std::runtime_error("probability mass != 1");
}

uint32_t mask_to_index(const BitMask& x) {
    uint32_t idx = 0;
    for (size_t i = 0; i < x.size(); ++i)
        if (x[i]) idx |= (1u << i);
    return idx;
}

BitMask index_to_mask(uint32_t idx, int n) {
    BitMask x(n, 0);
    for (int i = 0; i < n; ++i) x[i] = (idx >> i) & 1u;
    return x;
}

int hamming(const BitMask& x, const BitMask& y) {
    check_same_length(x, y);
    int d = 0;
    for (size_t i = 0; i < x.size(); ++i) d += (x[i] != y[i]);
    return d;
}

double one_step_prob_index(uint32_t x, uint32_t y, int n, double beta) {
    const int d = hamming_index(x, y);
    return std::pow(beta, d) * std::pow(1.0 - beta, n - d);
}

double one_step_prob(const BitMask& x, const BitMask& y, double beta) {
    check_same_length(x, y);
    return one_step_prob_index(mask_to_index(x), mask_to_index(y), int(x.size()), beta);
}

ProbabilityTable evolve(const ProbabilityTable& p, double beta) {
    const size_t m = p.size();
    // factor the kernel by hamming distance: precompute beta^d (1-beta)^(n-d)
    std::vector<double> by_dist(p.n + 1);
    for (int d = 0; d <= p.n; ++d)
        by_dist[d] = std::pow(beta, d) * std::pow(1.0 - beta, p.n - d);

    std::vector<double> out(m, 0.0);
    for (size_t y = 0; y < m; ++y) {
        double acc = 0.0;
        for (size_t x = 0; x < m; ++x)
            acc += p.probs[x] * by_dist[hamming_index(uint32_t(x), uint32_t(y))];
        out[y] = acc;
    }
    return ProbabilityTable(p.n, std::move(out));
}

double cumulative_flip_probability(int t, double beta) {
    return 0.5 * (1.0 - std::pow(1.0 - 2.0 * beta, t));
}

ProbabilityTable closed_form_marginal(const BitMask& x0, int t, double beta) {
    if (t < 0) throw std::runtime_error("t must be >= 0");
    const int n = int(x0.size());
    check_dim(n);
    const double q = cumulative_flip_probability(t, beta);
    const uint32_t x0_idx = mask_to_index(x0);
    std::vector<double> out(size_t(1) << n);
    for (size_t x = 0; x < out.size(); ++x) {
        const int d = hamming_index(x0_idx, uint32_t(x));
        out[x] = std::pow(q, d) * std::pow(1.0 - q, n - d);
    }
    return ProbabilityTable(n, std::move(out));
}

ProbabilityTable marginal_from(const ProbabilityTable& p0, int t, double beta) {
    return marginal_from_flip(p0, cumulative_flip_probability(t, beta));
}

ProbabilityTable marginal_from_flip(const ProbabilityTable& p0, double q) {
    std::vector<double> by_dist(p0.n + 1);
    for (int d = 0; d <= p0.n; ++d)
        by_dist[d] = std::pow(q, d) * std::pow(1.0 - q, p0.n - d);

    std::vector<double> out(p0.size(), 0.0);
    for (size_t x0 = 0; x0 < p0.size(); ++x0) {
        const double w = p0.probs[x0];
        if (w == 0.0) continue;
        for (size_t x = 0; x < out.size(); ++x)
            out[x] += w * by_dist[hamming_index(uint32_t(x0), uint32_t(x))];
    }
    return ProbabilityTable(p0.n, std::move(out));
}

double shannon_entropy(const ProbabilityTable& p) {
    double h = 0.0;
    for (double v : p.probs)
        if (v > 0.0) h -= v * std::log(v);
    return h;
}

ProbabilityTable stationary(int n) {
    check_dim(n);
    return ProbabilityTable(n, std::vector<double>(size_t(1) << n, std::ldexp(1.0, -n)));
}

ProbabilityTable posterior_table(uint32_t xt_index, double step_flip_prob,
                                 const ProbabilityTable& prior) {
    std::vector<double> by_dist(prior.n + 1);
    for (int d = 0; d <= prior.n; ++d)
        by_dist[d] = std::pow(step_flip_prob, d) * std::pow(1.0 - step_flip_prob, prior.n - d);

    std::vector<double> out(prior.size());
    double evidence = 0.0;
    for (size_t x = 0; x < out.size(); ++x) {
        out[x] = by_dist[hamming_index(uint32_t(x), xt_index)] * prior.probs[x];
        evidence += out[x];
    }
    if (evidence <= 0.0)
        throw std::runtime_error("reverse kernel: zero evidence (degenerate prior)");
    for (double& v : out) v /= evidence;
    return ProbabilityTable(prior.n, std::move(out));
}

ProbabilityTable reverse_kernel(const BitMask& xt, int t, double beta,
                                const ProbabilityTable& p0) {
    if (t < 1) throw std::runtime_error("reverse kernel needs t >= 1");
    const ProbabilityTable prior = marginal_from(p0, t - 1, beta);
    return posterior_table(mask_to_index(xt), beta, prior);
}

std::vector<BitMask> sample_forward_trajectory(const BitMask& x0, const FlipSchedule& schedule,
                                               rng::Stream& stream) {
    std::vector<BitMask> traj;
    traj.reserve(schedule.steps + 1);
    traj.push_back(x0);
    BitMask x = x0;
    for (int t = 0; t < schedule.steps; ++t) {
        for (auto& bit : x)
            if (stream.bernoulli(schedule.beta)) bit ^= 1;
        traj.push_back(x);
    }
    return traj;
}

std::vector<BitMask> sample_reverse_trajectory(const BitMask& xT, const FlipSchedule& schedule,
                                               const ProbabilityTable& p0, rng::Stream& stream) {
    std::vector<BitMask> traj;
    traj.reserve(schedule.steps + 1);
    traj.push_back(xT);
    BitMask x = xT;
    for (int t = schedule.steps; t >= 1; --t) {
        const ProbabilityTable k = reverse_kernel(x, t, schedule.beta, p0);
        x = index_to_mask(uint32_t(stream.categorical(k.probs)), k.n);
        traj.push_back(x);
    }
    return traj;
}

DiscreteReversePass::DiscreteReversePass(const FlipSchedule& schedule, ProbabilityTable p0)
    : schedule_(schedule), p0_(std::move(p0)) {
    priors_.reserve(schedule_.steps);
    for (int t = 1; t <= schedule_.steps; ++t)
        priors_.push_back(marginal_from(p0_, t - 1, schedule_.beta));
}

ProbabilityTable DiscreteReversePass::kernel(uint32_t xt_index, int t) const {
    return posterior_table(xt_index, schedule_.beta, priors_[t - 1]);
}

uint32_t DiscreteReversePass::sample_terminal(uint32_t xT_index, rng::Stream& stream) const {
    uint32_t x = xT_index;
    for (int t = schedule_.steps; t >= 1; --t) {
        const ProbabilityTable k = kernel(x, t);
        x = uint32_t(stream.categorical(k.probs));
    }
    return x;
}

std::vector<ProbabilityTable> DiscreteReversePass::ensemble_marginals(int trajectories,
                                                                      uint64_t seed) const {
    const size_t m = p0_.size();
    std::vector<std::vector<double>> counts(schedule_.steps + 1, std::vector<double>(m, 0.0));
    for (int i = 0; i < trajectories; ++i) {
        rng::Stream stream = rng::Stream::derive(seed, "discrete-reverse-ensemble", uint64_t(i));
        uint32_t x = uint32_t(stream.categorical(stationary(p0_.n).probs));
        counts[0][x] += 1.0;
        int row = 1;
        for (int t = schedule_.steps; t >= 1; --t, ++row) {
            const ProbabilityTable k = kernel(x, t);
            x = uint32_t(stream.categorical(k.probs));
            counts[row][x] += 1.0;
        }
    }
    std::vector<ProbabilityTable> out;
    out.reserve(counts.size());
    for (auto& row : counts) {
        for (double& c : row) c /= trajectories;
        out.emplace_back(p0_.n, std::move(row));
    }
    return out;
}

ProbabilityTable empirical_table(const Dataset& dataset) {
    const int n = dataset.n();
    check_dim(n);
    std::vector<double> probs(size_t(1) << n, 0.0);
    for (const auto& r : dataset.recipes) probs[mask_to_index(r.mask)] += 1.0;
    for (double& p : probs) p /= double(dataset.recipes.size());
    return ProbabilityTable(n, std::move(probs));
}

}  // namespace recdiff
