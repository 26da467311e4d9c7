#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "recdiff/continuous.hpp"
#include "recdiff/discrete.hpp"
#include "recdiff/nn.hpp"
#include "recdiff/vocab.hpp"

namespace recdiff {

// Per-step flip schedule of the high-dimensional discrete chain. betas follow
// the paper's categorical parameterization, i.e. the actual per-bit flip
// probability at step t is beta_t / 2, and alphabar_t = prod(1 - beta_tau).
struct RetentionSchedule {
    std::vector<double> betas;     // index t-1, t = 1..steps
    std::vector<double> alphabar;  // size steps+1, alphabar[0] = 1

    int steps() const { return int(betas.size()); }

    static RetentionSchedule from_betas(std::vector<double> betas);
    // beta_t = 1 - exp(-(alpha(t_k) - alpha(t_{k-1}))) on the schedule's step
    // grid, so alphabar_t = exp(-alpha(t_k)) exactly
    static RetentionSchedule from_noise_schedule(const NoiseSchedule& ns);
};

// x_t,i = 1 with probability alphabar_t x0_i + (1 - alphabar_t)/2
BitMask corrupt_mask(const BitMask& x0, int t, const RetentionSchedule& schedule,
                     rng::Stream& stream);
double corrupt_prob_one(int x0_bit, int t, const RetentionSchedule& schedule);

// P(x_{t-1,i} = 1 | x_t,i, x0_i) via Bayes with the closed-form prior
double posterior_bit(int x_t_bit, int x0_bit, int t, const RetentionSchedule& schedule);
// same with the clean bit replaced by a soft prediction p(x0_i = 1)
double posterior_bit_soft(int x_t_bit, double x0_prob, int t, const RetentionSchedule& schedule);

struct MaskModelConfig {
    int n = 0;
    int emb_dim = 64;
    std::vector<int> hidden = {512, 512, 512};
    nn::Activation activation = nn::Activation::relu;
};

struct TrainConfig {
    double lr = 5e-4;
    int batch = 1000;
    int epochs = 200;
    uint64_t seed = 0;
    double val_fraction = 0.2;
    bool verbose = false;
};

struct TrainLog {
    std::vector<double> train_loss;  // per epoch, mean per-example loss
    std::vector<double> val_loss;    // empty entries when no validation rows
    int n_train = 0;
    int n_val = 0;
};

// Time-embedding + MLP trunk predicting the clean-mask probabilities
// x0_hat = sigmoid(logits) from a noisy mask and its step index.
class MaskModel {
public:
    MaskModel() = default;
    MaskModel(const MaskModelConfig& config, RetentionSchedule schedule, uint64_t init_seed);

    const MaskModelConfig& config() const { return config_; }
    const RetentionSchedule& schedule() const { return schedule_; }
    std::vector<std::string>& ingredient_names() { return ingredient_names_; }
    const std::vector<std::string>& ingredient_names() const { return ingredient_names_; }

    // rows of x0_hat probabilities for a batch of (mask, step) pairs
    void predict_x0(const uint8_t* masks, const int* t, int batch, std::vector<float>& probs,
                    nn::MlpWorkspace<float>& ws) const;

    void save(const std::string& path, uint64_t train_seed) const;
    static MaskModel load(const std::string& path);

    nn::TimeEmbedding<float> embedding;
    nn::Mlp<float> trunk;

private:
    void build_input(const uint8_t* masks, const int* t, int batch, std::vector<float>& x) const;

    MaskModelConfig config_;
    RetentionSchedule schedule_;
    std::vector<std::string> ingredient_names_;
};

MaskModel train_mask_model(const Dataset& dataset, const RetentionSchedule& schedule,
                           const TrainConfig& config, TrainLog* log = nullptr);

std::vector<BitMask> sample_masks(const MaskModel& model, int count, uint64_t seed,
                                  int threads = 1);

// Exact Bayes reverse of the retention chain from a Bernoulli(1/2) start,
// propagated as a full distribution (n <= 16). Oracle for the learned
// sampler's terminal total-variation check.
ProbabilityTable exact_reverse_terminal(const RetentionSchedule& schedule,
                                        const ProbabilityTable& p0);

}  // namespace recdiff
