#include "recdiff/mask_model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "recdiff/checkpoint.hpp"
#include "recdiff/threading.hpp"

namespace recdiff {

RetentionSchedule RetentionSchedule::from_betas(std::vector<double> betas) {
    RetentionSchedule s;
    for (double b : betas)
        if (!(b > 0.0 && b < 1.0)) throw std::runtime_error("retention betas must be in (0,1)");
    s.betas = std::move(betas);
    s.alphabar.resize(s.betas.size() + 1);
    s.alphabar[0] = 1.0;
    for (size_t t = 0; t < s.betas.size(); ++t)
        s.alphabar[t + 1] = s.alphabar[t] * (1.0 - s.betas[t]);
    return s;
}

RetentionSchedule RetentionSchedule::from_noise_schedule(const NoiseSchedule& ns) {
    std::vector<double> betas(ns.steps);
    const double dt = ns.dt();
    for (int k = 0; k < ns.steps; ++k) {
        const double dalpha = ns.alpha((k + 1) * dt) - ns.alpha(k * dt);
        betas[k] = 1.0 - std::exp(-dalpha);
    }
    return from_betas(std::move(betas));
}

double corrupt_prob_one(int x0_bit, int t, const RetentionSchedule& schedule) {
    const double ab = schedule.alphabar[t];
    return ab * double(x0_bit) + 0.5 * (1.0 - ab);
}

BitMask corrupt_mask(const BitMask& x0, int t, const RetentionSchedule& schedule,
                     rng::Stream& stream) {
    if (t < 1 || t > schedule.steps()) throw std::runtime_error("corrupt_mask: t out of range");
    BitMask x(x0.size());
    for (size_t i = 0; i < x0.size(); ++i)
        x[i] = stream.bernoulli(corrupt_prob_one(x0[i], t, schedule)) ? 1 : 0;
    return x;
}

double posterior_bit_soft(int x_t_bit, double x0_prob, int t, const RetentionSchedule& schedule) {
    if (t < 1 || t > schedule.steps()) throw std::runtime_error("posterior_bit: t out of range");
    // actual one-step flip probability of the categorical kernel is beta_t/2
    const double flip = 0.5 * schedule.betas[t - 1];
    const double like1 = x_t_bit ? (1.0 - flip) : flip;
    const double like0 = x_t_bit ? flip : (1.0 - flip);
    const double ab = schedule.alphabar[t - 1];
    const double prior1 = ab * x0_prob + 0.5 * (1.0 - ab);
    const double num = like1 * prior1;
    const double den = num + like0 * (1.0 - prior1);
    return num / den;
}

double posterior_bit(int x_t_bit, int x0_bit, int t, const RetentionSchedule& schedule) {
    return posterior_bit_soft(x_t_bit, double(x0_bit), t, schedule);
}

MaskModel::MaskModel(const MaskModelConfig& config, RetentionSchedule schedule,
                     uint64_t init_seed)
    : config_(config), schedule_(std::move(schedule)) {
    if (config_.n < 1) throw std::runtime_error("mask model needs n >= 1");
    embedding = nn::TimeEmbedding<float>(schedule_.steps(), config_.emb_dim);
    std::vector<int> dims;
    dims.push_back(config_.emb_dim + config_.n);
    for (int h : config_.hidden) dims.push_back(h);
    dims.push_back(config_.n);
    trunk = nn::Mlp<float>(dims, config_.activation);
    rng::Stream stream = rng::Stream::derive(init_seed, "mask-model-init");
    embedding.init_params(stream);
    trunk.init_params(stream);
}

void MaskModel::build_input(const uint8_t* masks, const int* t, int batch,
                            std::vector<float>& x) const {
    const int in = config_.emb_dim + config_.n;
    x.resize(size_t(batch) * in);
    std::vector<int> rows(batch);
    for (int r = 0; r < batch; ++r) rows[r] = t[r] - 1;
    // gather embedding into the leading columns, then the +-1 coded mask
    std::vector<float> emb(size_t(batch) * config_.emb_dim);
    embedding.gather(rows.data(), batch, emb.data());
    for (int r = 0; r < batch; ++r) {
        float* row = x.data() + size_t(r) * in;
        std::copy(emb.begin() + size_t(r) * config_.emb_dim,
                  emb.begin() + size_t(r + 1) * config_.emb_dim, row);
        const uint8_t* m = masks + size_t(r) * config_.n;
        for (int i = 0; i < config_.n; ++i) row[config_.emb_dim + i] = m[i] ? 1.0f : -1.0f;
    }
}

void MaskModel::predict_x0(const uint8_t* masks, const int* t, int batch,
                           std::vector<float>& probs, nn::MlpWorkspace<float>& ws) const {
    std::vector<float> x;
    build_input(masks, t, batch, x);
    const auto& logits = nn::mlp_forward(trunk, x.data(), batch, ws);
    probs.resize(logits.size());
    for (size_t i = 0; i < logits.size(); ++i) probs[i] = float(nn::sigmoid(logits[i]));
}

namespace {

nlohmann::json mask_arch_json(const MaskModelConfig& c, int steps) {
    return {{"type", "mask"},
            {"n", c.n},
            {"emb_dim", c.emb_dim},
            {"hidden", c.hidden},
            {"activation", c.activation == nn::Activation::relu ? "relu" : "silu"},
            {"steps", steps}};
}

}  // namespace

void MaskModel::save(const std::string& path, uint64_t train_seed) const {
    nlohmann::json arch = mask_arch_json(config_, schedule_.steps());
    nlohmann::json header;
    header["arch"] = arch;
    header["arch_hash"] = arch_hash(arch);
    header["seed"] = train_seed;
    header["betas"] = schedule_.betas;
    header["ingredients"] = ingredient_names_;
    std::vector<float> params = embedding.table;
    const auto trunk_params = trunk.flatten();
    params.insert(params.end(), trunk_params.begin(), trunk_params.end());
    write_checkpoint(path, header, params);
}

MaskModel MaskModel::load(const std::string& path) {
    auto [header, params] = read_checkpoint(path);
    const auto arch = header.at("arch");
    if (arch.at("type") != "mask") throw std::runtime_error(path + ": not a mask checkpoint");
    if (arch_hash(arch) != header.at("arch_hash").get<uint64_t>())
        throw std::runtime_error(path + ": architecture hash mismatch");
    MaskModelConfig config;
    config.n = arch.at("n");
    config.emb_dim = arch.at("emb_dim");
    config.hidden = arch.at("hidden").get<std::vector<int>>();
    config.activation =
        arch.at("activation") == "relu" ? nn::Activation::relu : nn::Activation::silu;
    auto schedule = RetentionSchedule::from_betas(header.at("betas").get<std::vector<double>>());
    MaskModel model(config, std::move(schedule), 0);
    model.ingredient_names_ = header.value("ingredients", std::vector<std::string>{});
    const size_t emb_count = model.embedding.table.size();
    if (params.size() != emb_count + model.trunk.param_count())
        throw std::runtime_error(path + ": parameter count mismatch");
    std::copy(params.begin(), params.begin() + emb_count, model.embedding.table.begin());
    model.trunk.unflatten(std::span<const float>(params).subspan(emb_count));
    return model;
}

MaskModel train_mask_model(const Dataset& dataset, const RetentionSchedule& schedule,
                           const TrainConfig& config, TrainLog* log) {
    if (dataset.recipes.empty()) throw std::runtime_error("training needs a non-empty dataset");
    const int n = dataset.n();
    const int steps = schedule.steps();

    MaskModelConfig mc;
    mc.n = n;
    MaskModel model(mc, schedule, config.seed);
    for (const auto& e : dataset.vocabulary.entries) model.ingredient_names().push_back(e.name);

    // 80/20 split on a seeded permutation; tiny datasets train on everything
    std::vector<int> order(dataset.recipes.size());
    std::iota(order.begin(), order.end(), 0);
    rng::Stream split_stream = rng::Stream::derive(config.seed, "train-mask/split");
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
    std::vector<float> emb_grad(model.embedding.table.size());

    rng::Stream shuffle_stream = rng::Stream::derive(config.seed, "train-mask/shuffle");
    rng::Stream corrupt_stream = rng::Stream::derive(config.seed, "train-mask/corrupt");
    rng::Stream val_stream = rng::Stream::derive(config.seed, "train-mask/val");

    const int batch_cap = std::max(1, config.batch);
    std::vector<uint8_t> xt;
    std::vector<int> tvec;
    std::vector<float> targets, dlogits;
    std::vector<float> dinput;
    std::vector<int> emb_rows;

    auto run_batch = [&](const std::vector<int>& idx, size_t begin, size_t end,
                         rng::Stream& stream, bool update) {
        const int b = int(end - begin);
        xt.resize(size_t(b) * n);
        tvec.resize(b);
        targets.resize(size_t(b) * n);
        for (int r = 0; r < b; ++r) {
            const auto& recipe = dataset.recipes[idx[begin + r]];
            const int t = 1 + int(stream.uniform() * steps);
            tvec[r] = std::min(t, steps);
            const BitMask noisy = corrupt_mask(recipe.mask, tvec[r], schedule, stream);
            for (int i = 0; i < n; ++i) {
                xt[size_t(r) * n + i] = noisy[i];
                targets[size_t(r) * n + i] = float(recipe.mask[i]);
            }
        }
        std::vector<float> input;
        // inline the model input build so the embedding rows are available
        const int in_dim = model.config().emb_dim + n;
        input.resize(size_t(b) * in_dim);
        emb_rows.resize(b);
        for (int r = 0; r < b; ++r) emb_rows[r] = tvec[r] - 1;
        std::vector<float> emb(size_t(b) * model.config().emb_dim);
        model.embedding.gather(emb_rows.data(), b, emb.data());
        for (int r = 0; r < b; ++r) {
            float* row = input.data() + size_t(r) * in_dim;
            std::copy(emb.begin() + size_t(r) * model.config().emb_dim,
                      emb.begin() + size_t(r + 1) * model.config().emb_dim, row);
            for (int i = 0; i < n; ++i)
                row[model.config().emb_dim + i] = xt[size_t(r) * n + i] ? 1.0f : -1.0f;
        }

        const auto& logits = nn::mlp_forward(model.trunk, input.data(), b, ws);
        dlogits.resize(logits.size());
        double loss = nn::bce_with_logits<float>(logits, targets, dlogits);
        loss /= double(b);
        if (!update) return loss;

        for (auto& g : dlogits) g /= float(b);
        grads.zero();
        std::fill(emb_grad.begin(), emb_grad.end(), 0.0f);
        nn::mlp_backward(model.trunk, ws, dlogits, grads, &dinput);
        // embedding gradient = leading emb_dim columns of the input gradient
        std::vector<float> demb(size_t(b) * model.config().emb_dim);
        for (int r = 0; r < b; ++r)
            std::copy(dinput.begin() + size_t(r) * in_dim,
                      dinput.begin() + size_t(r) * in_dim + model.config().emb_dim,
                      demb.begin() + size_t(r) * model.config().emb_dim);
        model.embedding.scatter_add(emb_rows.data(), b, demb.data(), emb_grad);

        adam.begin_step();
        adam.update(0, model.embedding.table, emb_grad);
        for (size_t l = 0; l < model.trunk.layers.size(); ++l) {
            adam.update(1 + 2 * l, model.trunk.layers[l].w, grads.layers[l].w);
            adam.update(2 + 2 * l, model.trunk.layers[l].b, grads.layers[l].b);
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
            const double loss = run_batch(perm, begin, end, corrupt_stream, true);
            if (!std::isfinite(loss))
                throw std::runtime_error("mask model training diverged (nan loss) at epoch " +
                                         std::to_string(epoch));
            epoch_loss += loss * double(end - begin);
            examples += end - begin;
        }
        lg.train_loss.push_back(epoch_loss / double(examples));
        if (n_val > 0) {
            const double vl = run_batch(val_idx, 0, val_idx.size(), val_stream, false);
            lg.val_loss.push_back(vl);
        }
    }
    return model;
}

std::vector<BitMask> sample_masks(const MaskModel& model, int count, uint64_t seed, int threads) {
    const int n = model.config().n;
    const int steps = model.schedule().steps();
    std::vector<BitMask> out(count);

    parallel_chunks(uint64_t(count), threads, [&](uint64_t begin, uint64_t end) {
        const int chunk = int(end - begin);
        if (chunk == 0) return;
        std::vector<rng::Stream> streams;
        streams.reserve(chunk);
        for (uint64_t i = begin; i < end; ++i)
            streams.push_back(rng::Stream::derive(seed, "sample-masks/chain", i));

        std::vector<uint8_t> x(size_t(chunk) * n);
        for (int r = 0; r < chunk; ++r)
            for (int i = 0; i < n; ++i) x[size_t(r) * n + i] = streams[r].bernoulli(0.5) ? 1 : 0;

        nn::MlpWorkspace<float> ws;
        std::vector<float> probs;
        std::vector<int> tvec(chunk);
        for (int t = steps; t >= 1; --t) {
            std::fill(tvec.begin(), tvec.end(), t);
            model.predict_x0(x.data(), tvec.data(), chunk, probs, ws);
            for (int r = 0; r < chunk; ++r) {
                for (int i = 0; i < n; ++i) {
                    const double p1 = posterior_bit_soft(x[size_t(r) * n + i],
                                                         double(probs[size_t(r) * n + i]), t,
                                                         model.schedule());
                    x[size_t(r) * n + i] = streams[r].bernoulli(p1) ? 1 : 0;
                }
            }
        }
        for (int r = 0; r < chunk; ++r) {
            out[begin + r].assign(x.begin() + size_t(r) * n, x.begin() + size_t(r + 1) * n);
        }
    });
    return out;
}

ProbabilityTable exact_reverse_terminal(const RetentionSchedule& schedule,
                                        const ProbabilityTable& p0) {
    if (p0.n > 16) throw std::runtime_error("exact reverse terminal caps n at 16");
    ProbabilityTable dist = stationary(p0.n);
    for (int t = schedule.steps(); t >= 1; --t) {
        const double q_prev = 0.5 * (1.0 - schedule.alphabar[t - 1]);
        const ProbabilityTable prior = marginal_from_flip(p0, q_prev);
        const double flip = 0.5 * schedule.betas[t - 1];
        std::vector<double> next(dist.size(), 0.0);
        for (size_t x = 0; x < dist.size(); ++x) {
            if (dist.probs[x] == 0.0) continue;
            const ProbabilityTable post = posterior_table(uint32_t(x), flip, prior);
            for (size_t y = 0; y < next.size(); ++y) next[y] += dist.probs[x] * post.probs[y];
        }
        dist = ProbabilityTable(p0.n, std::move(next));
    }
    return dist;
}

}  // namespace recdiff
