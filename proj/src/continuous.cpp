#include "recdiff/continuous.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace recdiff {

namespace {

void check_cloud(const TrainingCloud& cloud) {
    if (cloud.empty()) throw std::runtime_error("training cloud is empty");
    for (const auto& w : cloud)
        if (w.size() != cloud.front().size())
            throw std::runtime_error("training cloud has mixed dimensions");
}

}  // namespace

OuMoments ou_moments(const NoiseSchedule& schedule, double t) {
    if (t < 0.0 || t > schedule.total_time + 1e-12)
        throw std::runtime_error("t outside [0, T]");
    OuMoments m;
    m.alpha = schedule.alpha(t);
    m.mu = std::exp(-0.5 * m.alpha);
    m.sigma = 1.0 - std::exp(-m.alpha);
    return m;
}

Vec forward_sample(const Vec& w0, const NoiseSchedule& schedule, double t, rng::Stream& stream) {
    const OuMoments m = ou_moments(schedule, t);
    const double s = std::sqrt(m.sigma);
    Vec out(w0.size());
    for (size_t i = 0; i < w0.size(); ++i) out[i] = m.mu * w0[i] + s * stream.normal();
    return out;
}

Vec forward_step_exact(const Vec& w, const NoiseSchedule& schedule, double s, double t,
                       rng::Stream& stream) {
    if (t < s) throw std::runtime_error("forward step needs t >= s");
    const double dalpha = schedule.alpha(t) - schedule.alpha(s);
    const double mu = std::exp(-0.5 * dalpha);
    const double sd = std::sqrt(1.0 - std::exp(-dalpha));
    Vec out(w.size());
    for (size_t i = 0; i < w.size(); ++i) out[i] = mu * w[i] + sd * stream.normal();
    return out;
}

namespace {

// unnormalized log weights -|w - mu w_i|^2 / (2 sigma); shared by density,
// posterior weights, and score
void log_weights(const Vec& w, double mu, double sigma, const TrainingCloud& cloud,
                 std::vector<double>& out) {
    out.resize(cloud.size());
    for (size_t i = 0; i < cloud.size(); ++i) {
        double d2 = 0.0;
        for (size_t k = 0; k < w.size(); ++k) {
            const double d = w[k] - mu * cloud[i][k];
            d2 += d * d;
        }
        out[i] = -d2 / (2.0 * sigma);
    }
}

OuMoments moments_for_score(const NoiseSchedule& schedule, double t) {
    const OuMoments m = ou_moments(schedule, t);
    if (m.sigma <= 0.0) throw std::runtime_error("score undefined at t = 0");
    return m;
}

}  // namespace

double mixture_log_density(const Vec& w, double t, const NoiseSchedule& schedule,
                           const TrainingCloud& cloud) {
    check_cloud(cloud);
    const OuMoments m = moments_for_score(schedule, t);
    std::vector<double> lw;
    log_weights(w, m.mu, m.sigma, cloud, lw);
    const double mx = *std::max_element(lw.begin(), lw.end());
    double s = 0.0;
    for (double v : lw) s += std::exp(v - mx);
    const double n = double(w.size());
    return mx + std::log(s) - std::log(double(cloud.size())) -
           0.5 * n * std::log(2.0 * M_PI * m.sigma);
}

std::vector<double> mixture_posterior_weights(const Vec& w, double t,
                                              const NoiseSchedule& schedule,
                                              const TrainingCloud& cloud) {
    check_cloud(cloud);
    const OuMoments m = moments_for_score(schedule, t);
    std::vector<double> lw;
    log_weights(w, m.mu, m.sigma, cloud, lw);
    const double mx = *std::max_element(lw.begin(), lw.end());
    double s = 0.0;
    for (double& v : lw) {
        v = std::exp(v - mx);
        s += v;
    }
    for (double& v : lw) v /= s;
    return lw;
}

Vec mixture_score(const Vec& w, double t, const NoiseSchedule& schedule,
                  const TrainingCloud& cloud) {
    const OuMoments m = moments_for_score(schedule, t);
    const std::vector<double> gamma = mixture_posterior_weights(w, t, schedule, cloud);
    Vec score(w.size(), 0.0);
    for (size_t i = 0; i < cloud.size(); ++i) {
        const double g = gamma[i];
        for (size_t k = 0; k < w.size(); ++k)
            score[k] += g * (m.mu * cloud[i][k] - w[k]) / m.sigma;
    }
    return score;
}

Vec reverse_step(const Vec& w, double t, double dt, const NoiseSchedule& schedule,
                 const Vec& score, const Vec& noise) {
    if (dt <= 0.0) throw std::runtime_error("reverse step needs dt > 0");
    const double b = schedule.beta(t);
    const double diffusion = std::sqrt(b * dt);
    Vec out(w.size());
    for (size_t i = 0; i < w.size(); ++i)
        out[i] = w[i] + (0.5 * b * w[i] + b * score[i]) * dt + diffusion * noise[i];
    return out;
}

std::vector<Vec> reverse_trajectory(const NoiseSchedule& schedule, const TrainingCloud& cloud,
                                    rng::Stream& stream, ReverseInit init, const Vec* w_init) {
    check_cloud(cloud);
    const size_t dim = cloud.front().size();
    const double T = schedule.total_time;
    const double dt = schedule.dt();

    Vec w;
    if (init == ReverseInit::explicit_state) {
        if (!w_init) throw std::runtime_error("explicit init requires a state");
        w = *w_init;
    } else {
        const size_t i = size_t(stream.uniform() * double(cloud.size())) % cloud.size();
        const OuMoments m = ou_moments(schedule, T);
        const double sd = std::sqrt(m.sigma);
        w.resize(dim);
        for (size_t k = 0; k < dim; ++k) w[k] = m.mu * cloud[i][k] + sd * stream.normal();
    }

    std::vector<Vec> traj;
    traj.reserve(schedule.steps);
    traj.push_back(w);
    Vec noise(dim);
    for (int k = 0; k < schedule.steps - 1; ++k) {
        const double t = T - k * dt;
        const Vec score = mixture_score(w, t, schedule, cloud);
        for (auto& z : noise) z = stream.normal();
        w = reverse_step(w, t, dt, schedule, score, noise);
        traj.push_back(w);
    }
    return traj;
}

double histogram_entropy(const std::vector<double>& samples, int bins, double lo, double hi) {
    if (samples.empty()) throw std::runtime_error("histogram entropy of empty sample list");
    if (bins < 2) throw std::runtime_error("histogram entropy needs bins >= 2");
    if (!(hi > lo)) throw std::runtime_error("histogram entropy needs hi > lo");
    std::vector<double> counts(bins, 0.0);
    const double width = (hi - lo) / bins;
    for (double x : samples) {
        int b = int(std::floor((x - lo) / width));
        b = std::clamp(b, 0, bins - 1);
        counts[b] += 1.0;
    }
    double h = 0.0;
    for (double c : counts) {
        if (c == 0.0) continue;
        const double p = c / double(samples.size());
        h -= p * std::log(p);
    }
    return h;
}

}  // namespace recdiff
