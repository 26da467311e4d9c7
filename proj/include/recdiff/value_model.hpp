#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "recdiff/continuous.hpp"
#include "recdiff/discrete.hpp"
#include "recdiff/mask_model.hpp"
#include "recdiff/nn.hpp"
#include "recdiff/vocab.hpp"

namespace recdiff {

struct ValueModelConfig {
    int n = 0;
    std::vector<int> hidden = {256, 256, 256, 256};
    int k_freqs = 8;  // sin/cos time features, plus the raw scalar t/T
    nn::Activation activation = nn::Activation::silu;
};

// Conditional score network s(x, w, t) for ingredient weights given a mask.
// Inputs are the +-1 coded mask, the noisy normalized weights, and the time
// features; the output is the n-dimensional score estimate.
class ValueModel {
public:
    ValueModel() = default;
    ValueModel(const ValueModelConfig& config, NoiseSchedule schedule, uint64_t init_seed);

    const ValueModelConfig& config() const { return config_; }
    const NoiseSchedule& schedule() const { return schedule_; }
    Normalization& normalization() { return normalization_; }
    const Normalization& normalization() const { return normalization_; }
    std::vector<std::string>& ingredient_names() { return ingredient_names_; }
    const std::vector<std::string>& ingredient_names() const { return ingredient_names_; }

    int input_dim() const { return 2 * config_.n + 1 + 2 * config_.k_freqs; }
    void build_input(const uint8_t* masks, const float* w, double t, int batch,
                     std::vector<float>& x) const;
    // per-row time variant used by training
    void build_input_rows(const uint8_t* masks, const float* w, const double* t, int batch,
                          std::vector<float>& x) const;

    // score prediction for a batch sharing one time t
    void predict_score(const uint8_t* masks, const float* w, double t, int batch,
                       std::vector<float>& score, nn::MlpWorkspace<float>& ws) const;
    // single-point convenience wrapper
    Vec score(const BitMask& mask, const Vec& w, double t) const;

    void save(const std::string& path, uint64_t train_seed) const;
    static ValueModel load(const std::string& path);

    nn::Mlp<float> trunk;

private:
    ValueModelConfig config_;
    NoiseSchedule schedule_;
    Normalization normalization_;
    std::vector<std::string> ingredient_names_;
};

struct ValueTrainConfig {
    double lr = 1e-3;
    int batch = 400;
    int epochs = 200;
    uint64_t seed = 0;
    double val_fraction = 0.2;
};

// Denoising score matching against the conditional Gaussian target
// -(w_t - mu(t) w0)/sigma(t), with absent coordinates masked out of the loss.
ValueModel train_value_model(const Dataset& dataset, const NoiseSchedule& schedule,
                             const ValueTrainConfig& config, TrainLog* log = nullptr);

struct WeightSampleResult {
    std::vector<Vec> grams;   // raw grams, zero off-mask, negatives clamped
    uint64_t clamped = 0;     // number of clamped coordinates
};

// Reverse SDE pass with the learned score; returns raw grams.
Vec sample_weights(const ValueModel& model, const BitMask& mask, uint64_t seed,
                   uint64_t* clamped = nullptr);

WeightSampleResult sample_weights_batch(const ValueModel& model, const std::vector<BitMask>& masks,
                                        uint64_t seed, int threads = 1);

}  // namespace recdiff
