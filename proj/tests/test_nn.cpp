#include <doctest.h>

#include <cmath>

#include "recdiff/nn.hpp"

using namespace recdiff;

namespace {

// independent straightforward re-implementation of the forward pass
template <typename T>
std::vector<T> naive_forward(const nn::Mlp<T>& m, const std::vector<T>& x, int batch) {
    std::vector<T> a = x;
    for (size_t l = 0; l < m.layers.size(); ++l) {
        const auto& layer = m.layers[l];
        std::vector<T> z(size_t(batch) * layer.out);
        for (int r = 0; r < batch; ++r)
            for (int o = 0; o < layer.out; ++o) {
                T acc = layer.b[o];
                for (int i = 0; i < layer.in; ++i)
                    acc += a[size_t(r) * layer.in + i] * layer.w[size_t(i) * layer.out + o];
                z[size_t(r) * layer.out + o] = acc;
            }
        if (l + 1 == m.layers.size()) {
            a = z;
        } else {
            a.resize(z.size());
            for (size_t i = 0; i < z.size(); ++i) {
                if (m.activation == nn::Activation::relu)
                    a[i] = z[i] > T(0) ? z[i] : T(0);
                else
                    a[i] = z[i] / (T(1) + std::exp(-z[i]));
            }
        }
    }
    return a;
}

// scalar loss = sum of c_i * out_i with fixed random c, for gradient checks
double loss_of(const nn::Mlp<double>& m, const std::vector<double>& x, int batch,
               const std::vector<double>& c) {
    nn::MlpWorkspace<double> ws;
    const auto& out = nn::mlp_forward(m, x.data(), batch, ws);
    double loss = 0.0;
    for (size_t i = 0; i < out.size(); ++i) loss += c[i] * out[i] * out[i];
    return loss;
}

double max_rel_grad_error(nn::Mlp<double>& m, int batch, uint64_t seed, int probes) {
    rng::Stream stream(seed);
    std::vector<double> x(size_t(batch) * m.input_dim());
    for (auto& v : x) v = stream.normal();
    std::vector<double> c(size_t(batch) * m.output_dim());
    for (auto& v : c) v = stream.normal();

    nn::MlpWorkspace<double> ws;
    const auto& out = nn::mlp_forward(m, x.data(), batch, ws);
    std::vector<double> dout(out.size());
    for (size_t i = 0; i < out.size(); ++i) dout[i] = 2.0 * c[i] * out[i];
    nn::MlpGrads<double> grads(m);
    nn::mlp_backward(m, ws, dout, grads);

    double worst = 0.0;
    for (int probe = 0; probe < probes; ++probe) {
        const size_t l = size_t(stream.uniform() * m.layers.size());
        auto& layer = m.layers[l];
        const bool bias = stream.uniform() < 0.2;
        std::vector<double>& params = bias ? layer.b : layer.w;
        std::vector<double>& g = bias ? grads.layers[l].b : grads.layers[l].w;
        const size_t idx = size_t(stream.uniform() * params.size());
        const double h = 1e-6 * std::max(1.0, std::abs(params[idx]));
        const double saved = params[idx];
        params[idx] = saved + h;
        const double lp = loss_of(m, x, batch, c);
        params[idx] = saved - h;
        const double lm = loss_of(m, x, batch, c);
        params[idx] = saved;
        const double fd = (lp - lm) / (2 * h);
        const double rel = std::abs(fd - g[idx]) / std::max(1e-8, std::abs(fd));
        worst = std::max(worst, rel);
    }
    return worst;
}

}  // namespace

TEST_CASE("forward pass: zero model, identity model, naive-oracle agreement") {
    nn::Mlp<double> zero({3, 4, 2}, nn::Activation::relu);
    std::vector<double> x = {1.0, -2.0, 0.5};
    nn::MlpWorkspace<double> ws;
    for (double v : nn::mlp_forward(zero, x.data(), 1, ws)) CHECK(v == 0.0);

    nn::Mlp<double> ident({3, 3}, nn::Activation::relu);
    for (int i = 0; i < 3; ++i) ident.layers[0].w[size_t(i) * 3 + i] = 1.0;
    const auto& y = nn::mlp_forward(ident, x.data(), 1, ws);
    for (int i = 0; i < 3; ++i) CHECK(y[i] == doctest::Approx(x[i]).epsilon(1e-15));

    for (auto act : {nn::Activation::relu, nn::Activation::silu}) {
        nn::Mlp<double> m({5, 7, 6, 4}, act);
        rng::Stream stream(19);
        m.init_params(stream);
        const int batch = 3;
        std::vector<double> xs(size_t(batch) * 5);
        for (auto& v : xs) v = stream.normal();
        const auto& fast = nn::mlp_forward(m, xs.data(), batch, ws);
        const auto naive = naive_forward(m, xs, batch);
        REQUIRE(fast.size() == naive.size());
        for (size_t i = 0; i < fast.size(); ++i)
            CHECK(std::abs(fast[i] - naive[i]) < 1e-12);
    }
    CHECK_THROWS_AS(nn::Mlp<double>({5}, nn::Activation::relu), std::runtime_error);
}

TEST_CASE("backward matches central finite differences on a 3-layer toy model") {
    for (auto act : {nn::Activation::relu, nn::Activation::silu}) {
        nn::Mlp<double> m({4, 8, 8, 3}, act);
        rng::Stream stream(5);
        m.init_params(stream);
        CHECK(max_rel_grad_error(m, 5, 71, 60) < 1e-4);
    }
}

TEST_CASE("backward on the mask and value architectures (gradient oracle)") {
    const int n = 20;
    // mask trunk: time-embedding width 64 + n inputs, 3x512 relu
    nn::Mlp<double> mask_arch({64 + n, 512, 512, 512, n}, nn::Activation::relu);
    rng::Stream s1(101);
    mask_arch.init_params(s1);
    CHECK(max_rel_grad_error(mask_arch, 4, 11, 50) < 1e-4);

    // value trunk: mask + weights + 17 time features, 4x256 silu
    nn::Mlp<double> value_arch({2 * n + 17, 256, 256, 256, 256, n}, nn::Activation::silu);
    rng::Stream s2(102);
    value_arch.init_params(s2);
    CHECK(max_rel_grad_error(value_arch, 4, 12, 50) < 1e-4);
}

TEST_CASE("backward: zero upstream gradient and linearity") {
    nn::Mlp<double> m({3, 6, 2}, nn::Activation::silu);
    rng::Stream stream(9);
    m.init_params(stream);
    std::vector<double> x = {0.3, -1.0, 0.7};
    nn::MlpWorkspace<double> ws;
    nn::mlp_forward(m, x.data(), 1, ws);

    nn::MlpGrads<double> g0(m);
    nn::mlp_backward(m, ws, {0.0, 0.0}, g0);
    for (const auto& l : g0.layers) {
        for (double v : l.w) CHECK(v == 0.0);
        for (double v : l.b) CHECK(v == 0.0);
    }

    std::vector<double> d1 = {1.0, -0.5}, d2 = {0.25, 2.0}, dsum = {1.25, 1.5};
    nn::MlpGrads<double> ga(m), gb(m), gs(m);
    nn::mlp_forward(m, x.data(), 1, ws);
    nn::mlp_backward(m, ws, d1, ga);
    nn::mlp_forward(m, x.data(), 1, ws);
    nn::mlp_backward(m, ws, d2, gb);
    nn::mlp_forward(m, x.data(), 1, ws);
    nn::mlp_backward(m, ws, dsum, gs);
    for (size_t l = 0; l < m.layers.size(); ++l)
        for (size_t i = 0; i < gs.layers[l].w.size(); ++i)
            CHECK(gs.layers[l].w[i] ==
                  doctest::Approx(ga.layers[l].w[i] + gb.layers[l].w[i]).epsilon(1e-12));

    nn::MlpWorkspace<double> empty_ws;
    nn::MlpGrads<double> g(m);
    CHECK_THROWS_AS(nn::mlp_backward(m, empty_ws, d1, g), std::runtime_error);
}

TEST_CASE("adam: zero gradient is a no-op, one step moves by about lr") {
    nn::Adam<double> adam(1e-3);
    std::vector<double> p = {1.0, -2.0};
    std::vector<double> g = {0.0, 0.0};
    adam.begin_step();
    adam.update(0, p, g);
    CHECK(p[0] == 1.0);
    CHECK(p[1] == -2.0);

    nn::Adam<double> adam2(1e-3);
    std::vector<double> p2 = {1.0, 1.0};
    std::vector<double> g2 = {0.37, -220.0};
    adam2.begin_step();
    adam2.update(0, p2, g2);
    CHECK(std::abs((1.0 - p2[0]) - 1e-3) < 1e-6);   // +lr for positive gradient
    CHECK(std::abs((p2[1] - 1.0) - 1e-3) < 1e-6);   // -lr... sign flips for negative
}

TEST_CASE("adam drives a quadratic bowl to the minimum") {
    // f(p) = sum (p_i - c_i)^2
    const std::vector<double> c = {3.0, -1.5, 0.25};
    std::vector<double> p = {0.0, 0.0, 0.0};
    nn::Adam<double> adam(1e-2);
    for (int step = 0; step < 5000; ++step) {
        std::vector<double> g(3);
        for (int i = 0; i < 3; ++i) g[i] = 2.0 * (p[i] - c[i]);
        adam.begin_step();
        adam.update(0, p, g);
    }
    for (int i = 0; i < 3; ++i) CHECK(std::abs(p[i] - c[i]) < 1e-6);
}

TEST_CASE("training loss decreases monotonically over the first 100 steps") {
    nn::Mlp<double> m({2, 16, 1}, nn::Activation::silu);
    rng::Stream stream(33);
    m.init_params(stream);
    const int batch = 32;
    std::vector<double> x(size_t(batch) * 2), target(batch);
    for (int r = 0; r < batch; ++r) {
        x[r * 2] = stream.normal();
        x[r * 2 + 1] = stream.normal();
        target[r] = 0.5 * x[r * 2] - 0.25 * x[r * 2 + 1] + 0.1;
    }
    nn::Adam<double> adam(3e-3);
    nn::MlpWorkspace<double> ws;
    nn::MlpGrads<double> grads(m);
    double prev = 1e300;
    for (int step = 0; step < 100; ++step) {
        const auto& out = nn::mlp_forward(m, x.data(), batch, ws);
        double loss = 0.0;
        std::vector<double> dout(batch);
        for (int r = 0; r < batch; ++r) {
            const double res = out[r] - target[r];
            loss += res * res / batch;
            dout[r] = 2.0 * res / batch;
        }
        CHECK(loss < prev + 1e-12);
        prev = loss;
        grads.zero();
        nn::mlp_backward(m, ws, dout, grads);
        adam.begin_step();
        for (size_t l = 0; l < m.layers.size(); ++l) {
            adam.update(2 * l, m.layers[l].w, grads.layers[l].w);
            adam.update(2 * l + 1, m.layers[l].b, grads.layers[l].b);
        }
    }
}

TEST_CASE("time embedding gather/scatter") {
    nn::TimeEmbedding<double> emb(10, 4);
    rng::Stream stream(3);
    emb.init_params(stream);
    const int idx[3] = {0, 7, 7};
    std::vector<double> out(12);
    emb.gather(idx, 3, out.data());
    for (int k = 0; k < 4; ++k) {
        CHECK(out[k] == emb.table[k]);
        CHECK(out[4 + k] == emb.table[28 + k]);
        CHECK(out[8 + k] == emb.table[28 + k]);
    }
    std::vector<double> grad(emb.table.size(), 0.0);
    std::vector<double> dout(12, 1.0);
    emb.scatter_add(idx, 3, dout.data(), grad);
    for (int k = 0; k < 4; ++k) {
        CHECK(grad[k] == 1.0);
        CHECK(grad[28 + k] == 2.0);  // row 7 hit twice
    }
    const int bad = 10;
    CHECK_THROWS_AS(emb.gather(&bad, 1, out.data()), std::runtime_error);
}

TEST_CASE("bce with logits: uniform-logit loss is ln 2 per bit") {
    std::vector<double> logits(8, 0.0), targets = {1, 0, 1, 1, 0, 0, 1, 0}, d(8);
    const double loss = nn::bce_with_logits<double>(logits, targets, d);
    CHECK(loss == doctest::Approx(8.0 * std::log(2.0)).epsilon(1e-12));
    for (int i = 0; i < 8; ++i) CHECK(d[i] == doctest::Approx(0.5 - targets[i]).epsilon(1e-12));
}

TEST_CASE("training is bit-deterministic for a fixed seed") {
    auto train_once = [&] {
        nn::Mlp<float> m({3, 8, 2}, nn::Activation::relu);
        rng::Stream stream(77);
        m.init_params(stream);
        nn::Adam<float> adam(1e-3);
        nn::MlpWorkspace<float> ws;
        nn::MlpGrads<float> grads(m);
        std::vector<float> x = {0.1f, -0.2f, 0.3f};
        for (int step = 0; step < 50; ++step) {
            const auto& out = nn::mlp_forward(m, x.data(), 1, ws);
            std::vector<float> dout(out.size(), 0.1f);
            grads.zero();
            nn::mlp_backward(m, ws, dout, grads);
            adam.begin_step();
            for (size_t l = 0; l < m.layers.size(); ++l) {
                adam.update(2 * l, m.layers[l].w, grads.layers[l].w);
                adam.update(2 * l + 1, m.layers[l].b, grads.layers[l].b);
            }
        }
        return m.flatten();
    };
    const auto a = train_once();
    const auto b = train_once();
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
}
