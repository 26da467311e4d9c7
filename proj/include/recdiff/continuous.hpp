#pragma once

#include <vector>

#include "recdiff/rng.hpp"

namespace recdiff {

using Vec = std::vector<double>;
using TrainingCloud = std::vector<Vec>;

// Linear variance-preserving schedule beta(t) = beta_min + (t/T)(beta_max -
// beta_min), with alpha(t) in closed form. beta_min == beta_max gives the
// constant schedule used by the three-ingredient demos.
struct NoiseSchedule {
    double beta_min = 0.001;
    double beta_max = 3.0;
    double total_time = 1.0;
    int steps = 1000;

    double beta(double t) const {
        return beta_min + (t / total_time) * (beta_max - beta_min);
    }
    double alpha(double t) const {
        return beta_min * t + (beta_max - beta_min) * t * t / (2.0 * total_time);
    }
    double dt() const { return total_time / steps; }

    static NoiseSchedule constant(double beta, double total_time = 1.0, int steps = 100) {
        return {beta, beta, total_time, steps};
    }
    static NoiseSchedule linear(double bmin, double bmax, double total_time = 1.0,
                                int steps = 1000) {
        return {bmin, bmax, total_time, steps};
    }
};

struct OuMoments {
    double mu = 1.0;     // exp(-alpha/2)
    double sigma = 0.0;  // 1 - exp(-alpha), the accumulated noise variance
    double alpha = 0.0;
};

OuMoments ou_moments(const NoiseSchedule& schedule, double t);

// w_t = mu(t) w0 + sqrt(sigma(t)) eps
Vec forward_sample(const Vec& w0, const NoiseSchedule& schedule, double t, rng::Stream& stream);

// exact conditional OU step from time s to time t > s
Vec forward_step_exact(const Vec& w, const NoiseSchedule& schedule, double s, double t,
                       rng::Stream& stream);

// log p_t(w) of the equal-weight Gaussian mixture induced by the cloud
double mixture_log_density(const Vec& w, double t, const NoiseSchedule& schedule,
                           const TrainingCloud& cloud);

// softmax posterior weights gamma_i(w, t), computed via log-sum-exp
std::vector<double> mixture_posterior_weights(const Vec& w, double t,
                                              const NoiseSchedule& schedule,
                                              const TrainingCloud& cloud);

// grad_w log p_t(w) = sum_i gamma_i (mu w_i - w) / sigma
Vec mixture_score(const Vec& w, double t, const NoiseSchedule& schedule,
                  const TrainingCloud& cloud);

// one explicit Euler-Maruyama reverse update,
// w' = w + [beta(t) w / 2 + beta(t) score] dt + sqrt(beta(t) dt) noise
Vec reverse_step(const Vec& w, double t, double dt, const NoiseSchedule& schedule,
                 const Vec& score, const Vec& noise);

enum class ReverseInit { from_pT, explicit_state };

// Reverse pass with the exact mixture score. Integration stops at t = dt
// (score undefined at t = 0); states are reported at t = T, T-dt, ..., dt.
std::vector<Vec> reverse_trajectory(const NoiseSchedule& schedule, const TrainingCloud& cloud,
                                    rng::Stream& stream, ReverseInit init = ReverseInit::from_pT,
                                    const Vec* w_init = nullptr);

// Shannon entropy of the normalized bin histogram; samples outside the range
// are clamped into the edge bins.
double histogram_entropy(const std::vector<double>& samples, int bins, double lo, double hi);

}  // namespace recdiff
