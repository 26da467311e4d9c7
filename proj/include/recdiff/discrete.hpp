#pragma once

#include <cstdint>
#include <vector>

#include "recdiff/rng.hpp"
#include "recdiff/vocab.hpp"

namespace recdiff {

using BitMask = std::vector<uint8_t>;

// Explicit distribution over all 2^n states, indexed by the integer encoding
// of the mask (bit i = ingredient i). Exact tier only; n is capped at 24.
struct ProbabilityTable {
    int n = 0;
    std::vector<double> probs;

    ProbabilityTable() = default;
    ProbabilityTable(int n_, std::vector<double> p);

    size_t size() const { return probs.size(); }
    double max_abs_diff(const ProbabilityTable& other) const;
    void validate(double tol = 1e-12) const;  // throws on bad mass/negatives
};

struct FlipSchedule {
    double beta = 0.025;  // per-ingredient flip probability, in (0,1)
    int steps = 100;
};

uint32_t mask_to_index(const BitMask& x);
BitMask index_to_mask(uint32_t idx, int n);

int hamming(const BitMask& x, const BitMask& y);
inline int hamming_index(uint32_t a, uint32_t b) { return __builtin_popcount(a ^ b); }

// beta^d (1-beta)^(n-d) with d = hamming(x, y)
double one_step_prob(const BitMask& x, const BitMask& y, double beta);
double one_step_prob_index(uint32_t x, uint32_t y, int n, double beta);

// one application of the forward kernel, O(4^n)
ProbabilityTable evolve(const ProbabilityTable& p, double beta);

// q_t = (1 - (1-2*beta)^t) / 2, the cumulative flip probability
double cumulative_flip_probability(int t, double beta);

// p_t(x | x0) = q_t^d (1-q_t)^(n-d)
ProbabilityTable closed_form_marginal(const BitMask& x0, int t, double beta);
// superposition of the closed form over an initial distribution
ProbabilityTable marginal_from(const ProbabilityTable& p0, int t, double beta);
// same superposition for an arbitrary cumulative flip probability q
ProbabilityTable marginal_from_flip(const ProbabilityTable& p0, double q);

double shannon_entropy(const ProbabilityTable& p);  // nats

ProbabilityTable stationary(int n);

// Posterior over the previous state given the current state index, a one-step
// flip probability, and a prior over previous states. Shared by the constant
// beta tier and the retention-schedule tier.
ProbabilityTable posterior_table(uint32_t xt_index, double step_flip_prob,
                                 const ProbabilityTable& prior);

// Bayes reverse kernel for the constant-beta chain: prior is the closed-form
// marginal at t-1 propagated from p0. Recomputes the prior per call; ensemble
// runs should use DiscreteReversePass.
ProbabilityTable reverse_kernel(const BitMask& xt, int t, double beta,
                                const ProbabilityTable& p0);

std::vector<BitMask> sample_forward_trajectory(const BitMask& x0, const FlipSchedule& schedule,
                                               rng::Stream& stream);

std::vector<BitMask> sample_reverse_trajectory(const BitMask& xT, const FlipSchedule& schedule,
                                               const ProbabilityTable& p0, rng::Stream& stream);

// Caches the per-step priors p_{t-1} (and kernel rows) for ensemble reverse
// sampling with a fixed schedule and data distribution.
class DiscreteReversePass {
public:
    DiscreteReversePass(const FlipSchedule& schedule, ProbabilityTable p0);

    const ProbabilityTable& prior(int t) const { return priors_[t - 1]; }  // p_{t-1}
    ProbabilityTable kernel(uint32_t xt_index, int t) const;
    // one full pass from xT down to x0; returns terminal state index
    uint32_t sample_terminal(uint32_t xT_index, rng::Stream& stream) const;
    // empirical state distribution at every step of an ensemble, outer index
    // runs t = T..0 (noisiest first), matching a reverse-time x axis
    std::vector<ProbabilityTable> ensemble_marginals(int trajectories, uint64_t seed) const;

    const FlipSchedule& schedule() const { return schedule_; }

private:
    FlipSchedule schedule_;
    ProbabilityTable p0_;
    std::vector<ProbabilityTable> priors_;
};

// empirical distribution of the dataset's masks (uniform over recipes)
ProbabilityTable empirical_table(const Dataset& dataset);

}  // namespace recdiff
