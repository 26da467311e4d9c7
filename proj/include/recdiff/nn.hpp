#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "recdiff/rng.hpp"

namespace recdiff::nn {

enum class Activation { relu, silu };

// Weights are stored input-major ([in][out]) so the forward pass and the
// weight-gradient pass both stream contiguously over the output dimension.
template <typename T>
struct DenseLayer {
    int in = 0;
    int out = 0;
    std::vector<T> w;  // in * out
    std::vector<T> b;  // out
};

template <typename T>
struct Mlp {
    std::vector<DenseLayer<T>> layers;
    Activation activation = Activation::relu;

    Mlp() = default;
    Mlp(const std::vector<int>& dims, Activation act) : activation(act) {
        if (dims.size() < 2) throw std::runtime_error("mlp needs at least input and output dims");
        for (size_t l = 0; l + 1 < dims.size(); ++l) {
            DenseLayer<T> layer;
            layer.in = dims[l];
            layer.out = dims[l + 1];
            layer.w.assign(size_t(layer.in) * layer.out, T(0));
            layer.b.assign(layer.out, T(0));
            layers.push_back(std::move(layer));
        }
    }

    int input_dim() const { return layers.front().in; }
    int output_dim() const { return layers.back().out; }

    size_t param_count() const {
        size_t n = 0;
        for (const auto& l : layers) n += l.w.size() + l.b.size();
        return n;
    }

    // He-style scaled uniform fan-in init, biases zero
    void init_params(rng::Stream& stream) {
        for (auto& l : layers) {
            const double s = std::sqrt(6.0 / double(l.in));
            for (auto& w : l.w) w = T((2.0 * stream.uniform() - 1.0) * s);
            for (auto& b : l.b) b = T(0);
        }
    }

    std::vector<T> flatten() const {
        std::vector<T> out;
        out.reserve(param_count());
        for (const auto& l : layers) {
            out.insert(out.end(), l.w.begin(), l.w.end());
            out.insert(out.end(), l.b.begin(), l.b.end());
        }
        return out;
    }

    void unflatten(std::span<const T> flat) {
        if (flat.size() != param_count()) throw std::runtime_error("parameter count mismatch");
        size_t off = 0;
        for (auto& l : layers) {
            std::copy(flat.begin() + off, flat.begin() + off + l.w.size(), l.w.begin());
            off += l.w.size();
            std::copy(flat.begin() + off, flat.begin() + off + l.b.size(), l.b.begin());
            off += l.b.size();
        }
    }
};

template <typename T>
struct MlpGrads {
    std::vector<DenseLayer<T>> layers;

    explicit MlpGrads(const Mlp<T>& model) {
        for (const auto& l : model.layers) {
            DenseLayer<T> g;
            g.in = l.in;
            g.out = l.out;
            g.w.assign(l.w.size(), T(0));
            g.b.assign(l.b.size(), T(0));
            layers.push_back(std::move(g));
        }
    }

    void zero() {
        for (auto& l : layers) {
            std::fill(l.w.begin(), l.w.end(), T(0));
            std::fill(l.b.begin(), l.b.end(), T(0));
        }
    }
};

// Scratch activations for one forward/backward pair. Reused across batches;
// separate instances make const forward passes thread-safe.
template <typename T>
struct MlpWorkspace {
    int batch = 0;
    std::vector<std::vector<T>> act;  // act[0] = input, act[L] = output
    std::vector<std::vector<T>> pre;  // pre-activations per layer
    std::vector<std::vector<T>> delta;
    std::vector<T> wt_scratch;
};

namespace detail {

template <typename T>
inline T silu(T x) {
    return x / (T(1) + std::exp(-x));
}

template <typename T>
inline T silu_grad(T x) {
    const T s = T(1) / (T(1) + std::exp(-x));
    return s * (T(1) + x * (T(1) - s));
}

// Z (batch x out) = A (batch x in) * W (in x out) + b
template <typename T>
void affine_forward(const T* a, int batch, const DenseLayer<T>& l, T* z) {
    for (int r = 0; r < batch; ++r) {
        T* zr = z + size_t(r) * l.out;
        for (int o = 0; o < l.out; ++o) zr[o] = l.b[o];
        const T* ar = a + size_t(r) * l.in;
        for (int i = 0; i < l.in; ++i) {
            const T av = ar[i];
            if (av == T(0)) continue;
            const T* wr = l.w.data() + size_t(i) * l.out;
            for (int o = 0; o < l.out; ++o) zr[o] += av * wr[o];
        }
    }
}

// dW += A^T dZ ; db += colsum(dZ)
template <typename T>
void affine_grad_params(const T* a, const T* dz, int batch, const DenseLayer<T>& l,
                        DenseLayer<T>& g) {
    for (int r = 0; r < batch; ++r) {
        const T* ar = a + size_t(r) * l.in;
        const T* dzr = dz + size_t(r) * l.out;
        for (int o = 0; o < l.out; ++o) g.b[o] += dzr[o];
        for (int i = 0; i < l.in; ++i) {
            const T av = ar[i];
            if (av == T(0)) continue;
            T* gw = g.w.data() + size_t(i) * l.out;
            for (int o = 0; o < l.out; ++o) gw[o] += av * dzr[o];
        }
    }
}

// dA (batch x in) = dZ (batch x out) * W^T, via a transposed weight scratch
// so the inner loop streams stride-1
template <typename T>
void affine_grad_input(const T* dz, int batch, const DenseLayer<T>& l, std::vector<T>& wt_scratch,
                       T* da) {
    wt_scratch.resize(l.w.size());
    for (int i = 0; i < l.in; ++i)
        for (int o = 0; o < l.out; ++o) wt_scratch[size_t(o) * l.in + i] = l.w[size_t(i) * l.out + o];
    for (int r = 0; r < batch; ++r) {
        const T* dzr = dz + size_t(r) * l.out;
        T* dar = da + size_t(r) * l.in;
        for (int i = 0; i < l.in; ++i) dar[i] = T(0);
        for (int o = 0; o < l.out; ++o) {
            const T dv = dzr[o];
            if (dv == T(0)) continue;
            const T* wr = wt_scratch.data() + size_t(o) * l.in;
            for (int i = 0; i < l.in; ++i) dar[i] += dv * wr[i];
        }
    }
}

}  // namespace detail

// Batched forward; the output lives in ws.act.back().
template <typename T>
const std::vector<T>& mlp_forward(const Mlp<T>& model, const T* x, int batch,
                                  MlpWorkspace<T>& ws) {
    const size_t L = model.layers.size();
    ws.batch = batch;
    ws.act.resize(L + 1);
    ws.pre.resize(L);
    ws.act[0].assign(x, x + size_t(batch) * model.input_dim());
    for (size_t l = 0; l < L; ++l) {
        const auto& layer = model.layers[l];
        ws.pre[l].resize(size_t(batch) * layer.out);
        detail::affine_forward(ws.act[l].data(), batch, layer, ws.pre[l].data());
        ws.act[l + 1].resize(ws.pre[l].size());
        if (l + 1 == L) {
            ws.act[l + 1] = ws.pre[l];  // linear output
        } else if (model.activation == Activation::relu) {
            for (size_t i = 0; i < ws.pre[l].size(); ++i)
                ws.act[l + 1][i] = ws.pre[l][i] > T(0) ? ws.pre[l][i] : T(0);
        } else {
            for (size_t i = 0; i < ws.pre[l].size(); ++i)
                ws.act[l + 1][i] = detail::silu(ws.pre[l][i]);
        }
    }
    return ws.act.back();
}

// Reverse-mode gradients of a scalar loss, given d loss / d output. Requires
// the workspace of the matching forward call. Accumulates into grads.
template <typename T>
void mlp_backward(const Mlp<T>& model, MlpWorkspace<T>& ws, const std::vector<T>& dout,
                  MlpGrads<T>& grads, std::vector<T>* dinput = nullptr) {
    const size_t L = model.layers.size();
    if (ws.act.size() != L + 1) throw std::runtime_error("backward called without forward");
    const int batch = ws.batch;
    ws.delta.resize(L);
    ws.delta[L - 1] = dout;
    for (size_t l = L; l-- > 0;) {
        const auto& layer = model.layers[l];
        detail::affine_grad_params(ws.act[l].data(), ws.delta[l].data(), batch, layer,
                                   grads.layers[l]);
        const bool need_input_grad = l > 0 || dinput != nullptr;
        if (!need_input_grad) continue;
        std::vector<T>& da = (l > 0) ? ws.delta[l - 1] : *dinput;
        da.resize(size_t(batch) * layer.in);
        detail::affine_grad_input(ws.delta[l].data(), batch, layer, ws.wt_scratch, da.data());
        if (l > 0) {
            // multiply by the activation derivative of the layer below
            const auto& pre = ws.pre[l - 1];
            if (model.activation == Activation::relu) {
                for (size_t i = 0; i < da.size(); ++i)
                    if (pre[i] <= T(0)) da[i] = T(0);
            } else {
                for (size_t i = 0; i < da.size(); ++i) da[i] *= detail::silu_grad(pre[i]);
            }
        }
    }
}

// Learnable lookup table for discrete timesteps.
template <typename T>
struct TimeEmbedding {
    int rows = 0;
    int dim = 0;
    std::vector<T> table;

    TimeEmbedding() = default;
    TimeEmbedding(int rows_, int dim_) : rows(rows_), dim(dim_) {
        table.assign(size_t(rows) * dim, T(0));
    }

    void init_params(rng::Stream& stream) {
        for (auto& v : table) v = T((2.0 * stream.uniform() - 1.0) * 0.05);
    }

    void gather(const int* idx, int batch, T* out) const {
        for (int r = 0; r < batch; ++r) {
            if (idx[r] < 0 || idx[r] >= rows) throw std::runtime_error("embedding index range");
            const T* row = table.data() + size_t(idx[r]) * dim;
            std::copy(row, row + dim, out + size_t(r) * dim);
        }
    }

    void scatter_add(const int* idx, int batch, const T* dout, std::vector<T>& grad) const {
        for (int r = 0; r < batch; ++r) {
            T* row = grad.data() + size_t(idx[r]) * dim;
            const T* d = dout + size_t(r) * dim;
            for (int k = 0; k < dim; ++k) row[k] += d[k];
        }
    }
};

// Bias-corrected Adam. One instance drives any number of parameter tensors,
// addressed by slot; begin_step() advances the shared step count once per
// optimizer step.
template <typename T>
class Adam {
public:
    explicit Adam(double lr = 1e-3, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

    void begin_step() { ++t_; }
    long long step_count() const { return t_; }
    double learning_rate() const { return lr_; }

    void update(size_t slot, std::span<T> params, std::span<const T> grads) {
        if (params.size() != grads.size()) throw std::runtime_error("adam shape mismatch");
        if (t_ == 0) throw std::runtime_error("adam update before begin_step");
        if (slots_.size() <= slot) slots_.resize(slot + 1);
        auto& s = slots_[slot];
        if (s.m.empty()) {
            s.m.assign(params.size(), T(0));
            s.v.assign(params.size(), T(0));
        }
        const double bc1 = 1.0 - std::pow(beta1_, double(t_));
        const double bc2 = 1.0 - std::pow(beta2_, double(t_));
        for (size_t i = 0; i < params.size(); ++i) {
            const double g = double(grads[i]);
            const double m = beta1_ * double(s.m[i]) + (1.0 - beta1_) * g;
            const double v = beta2_ * double(s.v[i]) + (1.0 - beta2_) * g * g;
            s.m[i] = T(m);
            s.v[i] = T(v);
            params[i] = T(double(params[i]) - lr_ * (m / bc1) / (std::sqrt(v / bc2) + eps_));
        }
    }

private:
    struct Slot {
        std::vector<T> m, v;
    };
    double lr_, beta1_, beta2_, eps_;
    long long t_ = 0;
    std::vector<Slot> slots_;
};

// numerically stable binary cross-entropy on logits; returns summed loss and
// writes d loss / d logit
template <typename T>
double bce_with_logits(std::span<const T> logits, std::span<const T> targets,
                       std::span<T> dlogits) {
    double loss = 0.0;
    for (size_t i = 0; i < logits.size(); ++i) {
        const double z = double(logits[i]);
        const double y = double(targets[i]);
        loss += std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
        dlogits[i] = T(1.0 / (1.0 + std::exp(-z)) - y);
    }
    return loss;
}

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace recdiff::nn
