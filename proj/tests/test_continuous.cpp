#include <doctest.h>

#include <cmath>

#include "recdiff/continuous.hpp"
#include "recdiff/vocab.hpp"

using namespace recdiff;

namespace {

const TrainingCloud kFixtureCloud = three_ingredient_fixture().cloud();

// naive mixture log density, no log-sum-exp, used as an independent oracle
double naive_log_density(const Vec& w, double t, const NoiseSchedule& s,
                         const TrainingCloud& cloud) {
    const OuMoments m = ou_moments(s, t);
    long double sum = 0.0L;
    for (const auto& wi : cloud) {
        long double d2 = 0.0L;
        for (size_t k = 0; k < w.size(); ++k) {
            const long double d = w[k] - m.mu * wi[k];
            d2 += d * d;
        }
        sum += expl(-d2 / (2.0L * m.sigma));
    }
    return double(logl(sum / cloud.size()) -
                  0.5L * w.size() * logl(2.0L * M_PI * m.sigma));
}

}  // namespace

TEST_CASE("ou moments: paper point, boundaries, quadrature oracle") {
    // alpha(t) = ln 2 at t = ln 2 for a constant unit-rate schedule
    const NoiseSchedule s = NoiseSchedule::constant(1.0, 1.0, 100);
    const OuMoments m = ou_moments(s, std::log(2.0));
    CHECK(std::abs(m.mu - 0.707) < 1e-3);
    CHECK(std::abs(m.sigma - 0.5) < 1e-3);

    const OuMoments zero = ou_moments(s, 0.0);
    CHECK(zero.mu == 1.0);
    CHECK(zero.sigma == 0.0);

    CHECK_THROWS_AS(ou_moments(s, 1.5), std::runtime_error);
    CHECK_THROWS_AS(ou_moments(s, -0.1), std::runtime_error);

    // trapezoid-rule quadrature oracle for the linear schedule
    const NoiseSchedule lin = NoiseSchedule::linear(0.001, 3.0, 1.0, 1000);
    for (double tq : {0.1, 0.37, 0.92, 1.0}) {
        const int steps = 200000;
        double acc = 0.0;
        for (int i = 0; i < steps; ++i) {
            const double a = tq * i / steps, b = tq * (i + 1) / steps;
            acc += 0.5 * (lin.beta(a) + lin.beta(b)) * (b - a);
        }
        CHECK(std::abs(lin.alpha(tq) - acc) < 1e-10);
    }
}

TEST_CASE("variance-preserving identity sigma = 1 - mu^2") {
    const NoiseSchedule lin = NoiseSchedule::linear(0.001, 3.0, 1.0, 1000);
    for (int k = 0; k <= 1000; ++k) {
        const OuMoments m = ou_moments(lin, k / 1000.0);
        CHECK(std::abs(m.sigma - (1.0 - m.mu * m.mu)) < 1e-12);
    }
}

TEST_CASE("forward noising turns the hamburger into a Mc Double under the worked noise") {
    // mu = 0.707, sigma = 0.5, eps = [0, sqrt 2, 1]
    const NoiseSchedule s = NoiseSchedule::constant(1.0, 1.0, 100);
    const OuMoments m = ou_moments(s, std::log(2.0));
    const Vec w0 = {0.0, 0.0, -1.0};
    const Vec eps = {0.0, std::sqrt(2.0), 1.0};
    Vec wt(3);
    for (int i = 0; i < 3; ++i) wt[i] = m.mu * w0[i] + std::sqrt(m.sigma) * eps[i];
    CHECK(std::abs(wt[0] - 0.0) < 2e-3);
    CHECK(std::abs(wt[1] - 1.0) < 2e-3);
    CHECK(std::abs(wt[2] - 0.0) < 2e-3);
}

TEST_CASE("forward sample: t = 0 returns w0, ensemble mean matches mu(t) w0") {
    const NoiseSchedule s = NoiseSchedule::constant(2.0, 1.0, 100);
    rng::Stream stream(3);
    const Vec w0 = {0.4, -1.2, 2.0};
    CHECK(forward_sample(w0, s, 0.0, stream) == w0);

    const double t = 0.7;
    const OuMoments m = ou_moments(s, t);
    const int trials = 100000;
    Vec mean(3, 0.0);
    for (int i = 0; i < trials; ++i) {
        const Vec w = forward_sample(w0, s, t, stream);
        for (int k = 0; k < 3; ++k) mean[k] += w[k];
    }
    for (int k = 0; k < 3; ++k) {
        mean[k] /= trials;
        CHECK(std::abs(mean[k] - m.mu * w0[k]) < 4.0 / std::sqrt(double(trials)));
    }
}

TEST_CASE("single-point cloud score is the exact Gaussian score") {
    const NoiseSchedule s = NoiseSchedule::constant(1.5, 1.0, 100);
    const TrainingCloud cloud = {{0.3, -0.7}};
    const Vec w = {1.0, 0.25};
    const double t = 0.42;
    const OuMoments m = ou_moments(s, t);
    const Vec score = mixture_score(w, t, s, cloud);
    for (int k = 0; k < 2; ++k)
        CHECK(score[k] == doctest::Approx((m.mu * cloud[0][k] - w[k]) / m.sigma).epsilon(1e-12));
}

TEST_CASE("score at an equidistant point splits the posterior weights in half") {
    const NoiseSchedule s = NoiseSchedule::constant(5.0, 1.0, 100);
    const double t = 0.4;
    const OuMoments m = ou_moments(s, t);
    // equidistant from mu*w1 = (0,0,0) and mu*w2 = (0,0,-mu)
    const Vec w = {0.7, -0.3, -0.5 * m.mu};
    const auto gamma = mixture_posterior_weights(w, t, s, kFixtureCloud);
    CHECK(gamma[0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(gamma[1] == doctest::Approx(0.5).epsilon(1e-12));
    const Vec score = mixture_score(w, t, s, kFixtureCloud);
    CHECK(score[0] == doctest::Approx((0.0 - w[0]) / m.sigma).epsilon(1e-10));
    CHECK(score[1] == doctest::Approx((0.0 - w[1]) / m.sigma).epsilon(1e-10));
    // cheese component points at the mu-scaled midpoint of the two modes
    CHECK(score[2] == doctest::Approx((-0.5 * m.mu - w[2]) / m.sigma).epsilon(1e-10));
}

TEST_CASE("posterior weights are a valid softmax") {
    const NoiseSchedule s = NoiseSchedule::constant(5.0, 1.0, 100);
    rng::Stream stream(17);
    TrainingCloud cloud;
    for (int i = 0; i < 7; ++i) cloud.push_back({stream.normal(), stream.normal(), stream.normal()});
    for (int trial = 0; trial < 50; ++trial) {
        const double t = 0.01 + 0.99 * stream.uniform();
        const Vec w = {4 * stream.normal(), 4 * stream.normal(), 4 * stream.normal()};
        const auto gamma = mixture_posterior_weights(w, t, s, cloud);
        double sum = 0.0;
        for (double g : gamma) {
            CHECK(g >= 0.0);
            sum += g;
        }
        CHECK(std::abs(sum - 1.0) < 1e-12);
    }
}

TEST_CASE("mixture score matches finite differences of the naive log density") {
    rng::Stream stream(23);
    for (int n : {1, 3, 5}) {
        const NoiseSchedule s = NoiseSchedule::constant(5.0, 1.0, 100);
        TrainingCloud cloud;
        for (int i = 0; i < 4; ++i) {
            Vec p(n);
            for (auto& v : p) v = stream.normal();
            cloud.push_back(p);
        }
        for (int trial = 0; trial < 12; ++trial) {
            const double t = 0.05 + 0.9 * stream.uniform();
            Vec w(n);
            for (auto& v : w) v = 2.5 * stream.normal();
            const Vec score = mixture_score(w, t, s, cloud);
            for (int k = 0; k < n; ++k) {
                const double h = 1e-5;
                Vec wp = w, wm = w;
                wp[k] += h;
                wm[k] -= h;
                const double fd =
                    (naive_log_density(wp, t, s, cloud) - naive_log_density(wm, t, s, cloud)) /
                    (2 * h);
                CHECK(std::abs(fd - score[k]) <= 1e-4 * std::max(1.0, std::abs(fd)));
            }
        }
    }
}

TEST_CASE("score is undefined at t = 0") {
    const NoiseSchedule s = NoiseSchedule::constant(5.0, 1.0, 100);
    CHECK_THROWS_WITH_AS(mixture_score({0, 0, 0}, 0.0, s, kFixtureCloud),
                         doctest::Contains("undefined"), std::runtime_error);
}

TEST_CASE("reverse step: drift-only expansion and determinism") {
    const NoiseSchedule s = NoiseSchedule::constant(2.0, 1.0, 100);
    const Vec w = {1.0, -2.0, 0.5};
    const Vec zero = {0, 0, 0};
    const Vec out = reverse_step(w, 0.5, 0.01, s, zero, zero);
    for (int k = 0; k < 3; ++k)
        CHECK(out[k] == doctest::Approx(w[k] * (1.0 + 0.5 * 2.0 * 0.01)).epsilon(1e-14));

    rng::Stream a(4), b(4);
    const auto t1 = reverse_trajectory(s, kFixtureCloud, a);
    const auto t2 = reverse_trajectory(s, kFixtureCloud, b);
    REQUIRE(t1.size() == t2.size());
    for (size_t i = 0; i < t1.size(); ++i) CHECK(t1[i] == t2[i]);
}

TEST_CASE("reverse trajectory stays near a mode in the weak-noise limit") {
    const NoiseSchedule s = NoiseSchedule::constant(0.01, 1.0, 100);
    const Vec init = {0.0, 0.0, -1.0};
    int ok = 0;
    for (int i = 0; i < 50; ++i) {
        rng::Stream stream = rng::Stream::derive(31, "weak-noise", uint64_t(i));
        const auto traj =
            reverse_trajectory(s, kFixtureCloud, stream, ReverseInit::explicit_state, &init);
        double d2 = 0.0;
        for (int k = 0; k < 3; ++k) {
            const double d = traj.back()[k] - init[k];
            d2 += d * d;
        }
        ok += (std::sqrt(d2) < 0.1);
    }
    CHECK(ok >= 48);
}

TEST_CASE("reverse ensemble re-localizes the cheese density at both modes") {
    const NoiseSchedule s = NoiseSchedule::constant(5.0, 1.0, 1000);
    const int trials = 2000;
    std::vector<double> cheese_start(trials), cheese_end(trials);
    int near0 = 0, near_m1 = 0;
    for (int i = 0; i < trials; ++i) {
        rng::Stream stream = rng::Stream::derive(8, "relocalize", uint64_t(i));
        const auto traj = reverse_trajectory(s, kFixtureCloud, stream);
        cheese_start[i] = traj.front()[2];
        cheese_end[i] = traj.back()[2];
        near0 += std::abs(cheese_end[i]) < 0.25;
        near_m1 += std::abs(cheese_end[i] + 1.0) < 0.25;
    }
    CHECK(near0 + near_m1 > int(0.9 * trials));
    CHECK(near0 > int(0.3 * trials));
    CHECK(near_m1 > int(0.3 * trials));
    // entropy of the cheese coordinate decreases along the pass
    CHECK(histogram_entropy(cheese_end, 60, -3, 3) <
          histogram_entropy(cheese_start, 60, -3, 3) - 0.5);
}

TEST_CASE("forward ensemble covariance matches mu^2 Cov + sigma I") {
    const NoiseSchedule s = NoiseSchedule::constant(5.0, 1.0, 100);
    const double t = 0.35;
    const OuMoments m = ou_moments(s, t);
    const int trials = 100000;
    std::vector<double> mean(3, 0.0);
    std::vector<double> cov(9, 0.0);
    std::vector<Vec> samples(trials);
    for (int i = 0; i < trials; ++i) {
        rng::Stream stream = rng::Stream::derive(77, "cov", uint64_t(i));
        const Vec& w0 = kFixtureCloud[i % 2];
        samples[i] = forward_sample(w0, s, t, stream);
        for (int k = 0; k < 3; ++k) mean[k] += samples[i][k];
    }
    for (int k = 0; k < 3; ++k) mean[k] /= trials;
    for (int i = 0; i < trials; ++i)
        for (int a = 0; a < 3; ++a)
            for (int b = 0; b < 3; ++b)
                cov[a * 3 + b] += (samples[i][a] - mean[a]) * (samples[i][b] - mean[b]);
    for (auto& c : cov) c /= trials;
    // population covariance of the fixture cloud: only cheese-cheese = 0.25
    for (int a = 0; a < 3; ++a) {
        for (int b = 0; b < 3; ++b) {
            const double cloud_cov = (a == 2 && b == 2) ? 0.25 : 0.0;
            const double expected = m.mu * m.mu * cloud_cov + (a == b ? m.sigma : 0.0);
            const double tol =
                3.0 * std::sqrt((m.sigma + 0.3) * (m.sigma + 0.3) + expected * expected) /
                std::sqrt(double(trials));
            CHECK(std::abs(cov[a * 3 + b] - expected) < tol);
        }
    }
}

TEST_CASE("forward-then-reverse round trip recovers the mode split") {
    const NoiseSchedule s = NoiseSchedule::constant(5.0, 1.0, 200);
    const int trials = 3000;
    int cheeseburger = 0;
    for (int i = 0; i < trials; ++i) {
        rng::Stream stream = rng::Stream::derive(55, "roundtrip", uint64_t(i));
        const auto traj = reverse_trajectory(s, kFixtureCloud, stream);
        const double d_cb = std::abs(traj.back()[2]);
        const double d_hb = std::abs(traj.back()[2] + 1.0);
        cheeseburger += (d_cb < d_hb);
    }
    CHECK(std::abs(double(cheeseburger) / trials - 0.5) < 0.05);
}

TEST_CASE("histogram entropy: degenerate, uniform, forward rise-and-plateau") {
    CHECK(histogram_entropy(std::vector<double>(100, 1.23), 60, -3, 3) == 0.0);

    rng::Stream stream(2);
    std::vector<double> u(200000);
    for (auto& v : u) v = 6.0 * stream.uniform() - 3.0;
    CHECK(std::abs(histogram_entropy(u, 60, -3, 3) - std::log(60.0)) / std::log(60.0) < 0.05);

    CHECK_THROWS_AS(histogram_entropy({}, 60, -3, 3), std::runtime_error);
    CHECK_THROWS_AS(histogram_entropy({1.0}, 1, -3, 3), std::runtime_error);

    // fixture forward entropy rises then plateaus
    const NoiseSchedule s = NoiseSchedule::constant(5.0, 1.0, 100);
    const int trials = 4000;
    auto entropy_at = [&](double t) {
        std::vector<double> cheese(trials);
        for (int i = 0; i < trials; ++i) {
            rng::Stream st = rng::Stream::derive(14, "plateau", uint64_t(i));
            cheese[i] = forward_sample(kFixtureCloud[i % 2], s, t, st)[2];
        }
        return histogram_entropy(cheese, 60, -3, 3);
    };
    const double h0 = entropy_at(0.001), h_mid = entropy_at(0.5), h_end = entropy_at(1.0);
    CHECK(h_mid > h0 + 1.0);
    CHECK(std::abs(h_end - h_mid) < 0.15);
}
