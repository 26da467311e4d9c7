#include "recdiff/value_model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "recdiff/checkpoint.hpp"
#include "recdiff/threading.hpp"

namespace recdiff {

ValueModel::ValueModel(const ValueModelConfig& config, NoiseSchedule schedule, uint64_t init_seed)
    : config_(config), schedule_(schedule) {
    if (config_.n < 1) throw std::runtime_error("value model needs n >= 1");
    std::vector<int> dims;
    dims.push_back(input_dim());
    for (int h : config_.hidden) dims.push_back(h);
    dims.push_back(config_.n);
    trunk = nn::Mlp<float>(dims, config_.activation);
    rng::Stream stream = rng::Stream::derive(init_seed, "value-model-init");
    trunk.init_params(stream);
}

namespace {

void time_features(double u, int k_freqs, float* out) {
    out[0] = float(u);
    for (int k = 1; k <= k_freqs; ++k) {
        out[2 * k - 1] = float(std::sin(2.0 * M_PI * k * u));
        out[2 * k] = float(std::cos(2.0 * M_PI * k * u));
    }
}

}  // namespace

void ValueModel::build_input(const uint8_t* masks, const float* w, double t, int batch,
                             std::vector<float>& x) const {
    const int n = config_.n;
    const int in = input_dim();
    x.resize(size_t(batch) * in);
    std::vector<float> feats(1 + 2 * config_.k_freqs);
    time_features(t / schedule_.total_time, config_.k_freqs, feats.data());
    for (int r = 0; r < batch; ++r) {
        float* row = x.data() + size_t(r) * in;
        const uint8_t* m = masks + size_t(r) * n;
        for (int i = 0; i < n; ++i) row[i] = m[i] ? 1.0f : -1.0f;
        const float* wr = w + size_t(r) * n;
        std::copy(wr, wr + n, row + n);
        std::copy(feats.begin(), feats.end(), row + 2 * n);
    }
}

void ValueModel::build_input_rows(const uint8_t* masks, const float* w, const double* t,
                                  int batch, std::vector<float>& x) const {
    const int n = config_.n;
    const int in = input_dim();
    x.resize(size_t(batch) * in);
    for (int r = 0; r < batch; ++r) {
        float* row = x.data() + size_t(r) * in;
        const uint8_t* m = masks + size_t(r) * n;
        for (int i = 0; i < n; ++i) row[i] = m[i] ? 1.0f : -1.0f;
        const float* wr = w + size_t(r) * n;
        std::copy(wr, wr + n, row + n);
        time_features(t[r] / schedule_.total_time, config_.k_freqs, row + 2 * n);
    }
}

void ValueModel::predict_score(const uint8_t* masks, const float* w, double t, int batch,
                               std::vector<float>& score, nn::MlpWorkspace<float>& ws) const {
    std::vector<float> x;
    build_input(masks, w, t, batch, x);
    score = nn::mlp_forward(trunk, x.data(), batch, ws);
}

Vec ValueModel::score(const BitMask& mask, const Vec& w, double t) const {
    std::vector<float> wf(w.begin(), w.end());
    std::vector<float> s;
    nn::MlpWorkspace<float> ws;
    predict_score(mask.data(), wf.data(), t, 1, s, ws);
    return Vec(s.begin(), s.end());
}

namespace {

nlohmann::json value_arch_json(const ValueModelConfig& c) {
    return {{"type", "value"},
            {"n", c.n},
            {"hidden", c.hidden},
            {"k_freqs", c.k_freqs},
            {"activation", c.activation == nn::Activation::relu ? "relu" : "silu"}};
}

}  // namespace

void ValueModel::save(const std::string& path, uint64_t train_seed) const {
    nlohmann::json arch = value_arch_json(config_);
    nlohmann::json header;
    header["arch"] = arch;
    header["arch_hash"] = arch_hash(arch);
    header["seed"] = train_seed;
    header["schedule"] = {{"beta_min", schedule_.beta_min},
                          {"beta_max", schedule_.beta_max},
                          {"total_time", schedule_.total_time},
                          {"steps", schedule_.steps}};
    header["normalization_scale"] = normalization_.scale;
    header["normalization_offset"] = normalization_.offset;
    header["ingredients"] = ingredient_names_;
    write_checkpoint(path, header, trunk.flatten());
}

ValueModel ValueModel::load(const std::string& path) {
    auto [header, params] = read_checkpoint(path);
    const auto arch = header.at("arch");
    if (arch.at("type") != "value") throw std::runtime_error(path + ": not a value checkpoint");
    if (arch_hash(arch) != header.at("arch_hash").get<uint64_t>())
        throw std::runtime_error(path + ": architecture hash mismatch");
    ValueModelConfig config;
    config.n = arch.at("n");
    config.hidden = arch.at("hidden").get<std::vector<int>>();
    config.k_freqs = arch.at("k_freqs");
    config.activation =
        arch.at("activation") == "relu" ? nn::Activation::relu : nn::Activation::silu;
    NoiseSchedule schedule;
    schedule.beta_min = header.at("schedule").at("beta_min");
    schedule.beta_max = header.at("schedule").at("beta_max");
    schedule.total_time = header.at("schedule").at("total_time");
    schedule.steps = header.at("schedule").at("steps");
    ValueModel model(config, schedule, 0);
    if (params.size() != model.trunk.param_count())
        throw std::runtime_error(path + ": parameter count mismatch");
    model.trunk.unflatten(params);
    model.normalization_.scale = header.at("normalization_scale").get<std::vector<double>>();
    model.normalization_.offset = header.at("normalization_offset").get<std::vector<double>>();
    model.ingredient_names_ = header.value("ingredients", std::vector<std::string>{});
    return model;
}

ValueModel train_value_model(const Dataset& dataset, const NoiseSchedule& schedule,
                             const ValueTrainConfig& config, TrainLog* log) {
    if (dataset.recipes.empty()) throw std::runtime_error("training needs a non-empty dataset");
    if (dataset.normalization.empty())
        throw std::runtime_error("value model training needs a normalized dataset");
    const int n = dataset.n();
    const int steps = schedule.steps;

    ValueModelConfig vc;
    vc.n = n;
    ValueModel model(vc, schedule, config.seed);
    model.normalization() = dataset.normalization;
    for (const auto& e : dataset.vocabulary.entries) model.ingredient_names().push_back(e.name);

    // normalized weights, absent coordinates replaced by the sentinel 0
    // (they are masked out of the loss; the sentinel just keeps the input
    // bounded)
    std::vector<std::vector<float>> w0(dataset.recipes.size());
    for (size_t r = 0; r < dataset.recipes.size(); ++r) {
        const Vec wn = dataset.normalized_weights(r);
        w0[r].assign(wn.begin(), wn.end());
        for (int i = 0; i < n; ++i)
            if (!dataset.recipes[r].mask[i]) w0[r][i] = 0.0f;
    }

    std::vector<int> order(dataset.recipes.size());
    std::iota(order.begin(), order.end(), 0);
    rng::Stream split_stream = rng::Stream::derive(config.seed, "train-value/split");
    for (size_t i = order.size(); i > 1; --i)
        std::swap(order[i - 1], order[size_t(split_stream.uniform() * double(i))]);
    const int n_val = int(config.val_fraction * double(order.size()));
    std::vector<int> val_idx(order.begin(), order.begin() + n_val);
    std::vector<int> train_idx(order.begin() + n_val, order.end());

    TrainLog local_log;
    TrainLog& lg = log ? *log : local_log;
    lg.n_train = int(train_idx.size());
    lg.n_val = n_val;

    nn::Adam<float> adam(config.lr);
    nn::MlpWorkspace<float> ws;
    nn::MlpGrads<float> grads(model.trunk);

    rng::Stream shuffle_stream = rng::Stream::derive(config.seed, "train-value/shuffle");
    rng::Stream noise_stream = rng::Stream::derive(config.seed, "train-value/noise");
    rng::Stream val_stream = rng::Stream::derive(config.seed, "train-value/val");

    const int batch_cap = std::max(1, config.batch);
    const double dt = schedule.dt();

    std::vector<uint8_t> masks;
    std::vector<float> wt, targets, dout;
    std::vector<double> trows;

    auto run_batch = [&](const std::vector<int>& idx, size_t begin, size_t end,
                         rng::Stream& stream, bool update) {
        const int b = int(end - begin);
        masks.resize(size_t(b) * n);
        wt.resize(size_t(b) * n);
        targets.resize(size_t(b) * n);
        trows.resize(b);
        for (int r = 0; r < b; ++r) {
            const int ridx = idx[begin + r];
            const auto& recipe = dataset.recipes[ridx];
            const int k = std::min(1 + int(stream.uniform() * steps), steps);
            const double t = k * dt;
            trows[r] = t;
            const OuMoments m = ou_moments(schedule, t);
            const double sd = std::sqrt(m.sigma);
            for (int i = 0; i < n; ++i) {
                const size_t at = size_t(r) * n + i;
                masks[at] = recipe.mask[i];
                const double eps = stream.normal();
                wt[at] = float(m.mu * double(w0[ridx][i]) + sd * eps);
                targets[at] = float(-eps / sd);
            }
        }
        std::vector<float> input;
        model.build_input_rows(masks.data(), wt.data(), trows.data(), b, input);
        const auto& score = nn::mlp_forward(model.trunk, input.data(), b, ws);

        dout.resize(score.size());
        double loss = 0.0;
        for (size_t i = 0; i < score.size(); ++i) {
            if (!masks[i]) {  // absent coordinates are masked out of the loss
                dout[i] = 0.0f;
                continue;
            }
            const double res = double(score[i]) - double(targets[i]);
            loss += res * res;
            dout[i] = float(2.0 * res / double(b));
        }
        loss /= double(b);
        if (!update) return loss;

        grads.zero();
        nn::mlp_backward(model.trunk, ws, dout, grads);
        adam.begin_step();
        for (size_t l = 0; l < model.trunk.layers.size(); ++l) {
            adam.update(2 * l, model.trunk.layers[l].w, grads.layers[l].w);
            adam.update(2 * l + 1, model.trunk.layers[l].b, grads.layers[l].b);
        }
        return loss;
    };

    std::vector<int> perm = train_idx;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        for (size_t i = perm.size(); i > 1; --i)
            std::swap(perm[i - 1], perm[size_t(shuffle_stream.uniform() * double(i))]);
        double epoch_loss = 0.0;
        size_t examples = 0;
        for (size_t begin = 0; begin < perm.size(); begin += batch_cap) {
            const size_t end = std::min(perm.size(), begin + batch_cap);
            const double loss = run_batch(perm, begin, end, noise_stream, true);
            if (!std::isfinite(loss))
                throw std::runtime_error("value model training diverged (nan loss) at epoch " +
                                         std::to_string(epoch));
            epoch_loss += loss * double(end - begin);
            examples += end - begin;
        }
        lg.train_loss.push_back(epoch_loss / double(examples));
        if (n_val > 0) lg.val_loss.push_back(run_batch(val_idx, 0, val_idx.size(), val_stream, false));
    }
    return model;
}

WeightSampleResult sample_weights_batch(const ValueModel& model, const std::vector<BitMask>& masks,
                                        uint64_t seed, int threads) {
    const int n = model.config().n;
    const NoiseSchedule& schedule = model.schedule();
    const double T = schedule.total_time;
    const double dt = schedule.dt();
    const int updates = schedule.steps - 1;  // stop at t = dt, score undefined at 0

    WeightSampleResult result;
    result.grams.resize(masks.size());
    std::vector<uint64_t> clamp_counts(masks.size(), 0);

    parallel_chunks(masks.size(), threads, [&](uint64_t begin, uint64_t end) {
        const int chunk = int(end - begin);
        if (chunk == 0) return;
        std::vector<rng::Stream> streams;
        streams.reserve(chunk);
        for (uint64_t i = begin; i < end; ++i)
            streams.push_back(rng::Stream::derive(seed, "sample-weights/chain", i));

        std::vector<uint8_t> mask_rows(size_t(chunk) * n);
        for (int r = 0; r < chunk; ++r)
            for (int i = 0; i < n; ++i) mask_rows[size_t(r) * n + i] = masks[begin + r][i];

        const OuMoments mT = ou_moments(schedule, T);
        const double sdT = std::sqrt(mT.sigma);
        std::vector<float> w(size_t(chunk) * n);
        for (int r = 0; r < chunk; ++r)
            for (int i = 0; i < n; ++i) w[size_t(r) * n + i] = float(sdT * streams[r].normal());

        nn::MlpWorkspace<float> ws;
        std::vector<float> score;
        for (int k = 0; k < updates; ++k) {
            const double t = T - k * dt;
            const double b = schedule.beta(t);
            const double diffusion = std::sqrt(b * dt);
            model.predict_score(mask_rows.data(), w.data(), t, chunk, score, ws);
            for (int r = 0; r < chunk; ++r) {
                for (int i = 0; i < n; ++i) {
                    const size_t at = size_t(r) * n + i;
                    w[at] = float(double(w[at]) +
                                  (0.5 * b * double(w[at]) + b * double(score[at])) * dt +
                                  diffusion * streams[r].normal());
                }
            }
        }

        for (int r = 0; r < chunk; ++r) {
            Vec normalized(n, 0.0);
            for (int i = 0; i < n; ++i) normalized[i] = double(w[size_t(r) * n + i]);
            Vec grams = model.normalization().denormalize(normalized);
            for (int i = 0; i < n; ++i) {
                if (!masks[begin + r][i]) {
                    grams[i] = 0.0;  // off-mask coordinates are zeroed
                    continue;
                }
                if (grams[i] < 0.0) {
                    grams[i] = 0.0;
                    ++clamp_counts[begin + r];
                }
            }
            result.grams[begin + r] = std::move(grams);
        }
    });

    result.clamped = 0;
    for (uint64_t c : clamp_counts) result.clamped += c;
    return result;
}

Vec sample_weights(const ValueModel& model, const BitMask& mask, uint64_t seed,
                   uint64_t* clamped) {
    WeightSampleResult r = sample_weights_batch(model, {mask}, seed, 1);
    if (clamped) *clamped = r.clamped;
    return std::move(r.grams[0]);
}

}  // namespace recdiff
