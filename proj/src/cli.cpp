#include "recdiff/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "recdiff/continuous.hpp"
#include "recdiff/discovery.hpp"
#include "recdiff/discrete.hpp"
#include "recdiff/mask_model.hpp"
#include "recdiff/stats.hpp"
#include "recdiff/value_model.hpp"
#include "recdiff/vocab.hpp"

namespace recdiff::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::ofstream open_out(const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << std::setprecision(17);
    return out;
}

void write_config(const fs::path& dir, const json& config) {
    fs::create_directories(dir);
    open_out(dir / "config.resolved") << config.dump(2) << "\n";
}

Dataset load_input_data(const std::string& data_path, bool fixture3, const std::string& format) {
    if (fixture3) return three_ingredient_fixture();
    if (data_path.empty()) throw CLI::ValidationError("--data", "either --data or --fixture3 is required");
    DataFormat f = DataFormat::infer;
    if (format == "jsonl") f = DataFormat::jsonl;
    if (format == "csv") f = DataFormat::csv;
    Dataset ds = load_dataset(data_path, f);
    for (const auto& w : ds.warnings) std::cerr << "warning: " << w << "\n";
    normalize_weights(ds, NormalizationMode::per_ingredient_stats);
    return ds;
}

// ---------------------------------------------------------------- demo3 ----

int cmd_demo3(double beta, int steps, int trajectories, uint64_t seed, const std::string& out) {
    const fs::path dir(out);
    write_config(dir, {{"subcommand", "demo3"},
                       {"beta", beta},
                       {"steps", steps},
                       {"trajectories", trajectories},
                       {"seed", seed}});

    const Dataset fixture = three_ingredient_fixture();
    const ProbabilityTable p0 = empirical_table(fixture);

    {
        auto csv = open_out(dir / "forward.csv");
        csv << "t";
        for (int s = 0; s < 8; ++s) csv << ",p" << s;
        csv << ",entropy\n";
        ProbabilityTable p = p0;
        for (int t = 0; t <= steps; ++t) {
            csv << t;
            for (double v : p.probs) csv << "," << v;
            csv << "," << shannon_entropy(p) << "\n";
            if (t < steps) p = evolve(p, beta);
        }
    }
    {
        DiscreteReversePass pass({beta, steps}, p0);
        const auto marginals = pass.ensemble_marginals(trajectories, seed);
        auto csv = open_out(dir / "reverse.csv");
        csv << "t";
        for (int s = 0; s < 8; ++s) csv << ",p" << s;
        csv << ",entropy\n";
        for (size_t row = 0; row < marginals.size(); ++row) {
            csv << steps - int(row);
            for (double v : marginals[row].probs) csv << "," << v;
            csv << "," << shannon_entropy(marginals[row]) << "\n";
        }
    }
    std::cout << "demo3: wrote " << (dir / "forward.csv") << " and " << (dir / "reverse.csv")
              << "\n";
    return 0;
}

// ----------------------------------------------------- demo3-continuous ----

int cmd_demo3_continuous(double beta, int steps, int trajectories, int tracked, uint64_t seed,
                         const std::string& out) {
    const fs::path dir(out);
    const int bins = 60;
    const double lo = -3.0, hi = 3.0;
    write_config(dir, {{"subcommand", "demo3-continuous"},
                       {"beta", beta},
                       {"steps", steps},
                       {"trajectories", trajectories},
                       {"tracked", tracked},
                       {"entropy_bins", bins},
                       {"entropy_range", {lo, hi}},
                       {"seed", seed}});

    const Dataset fixture = three_ingredient_fixture();
    const TrainingCloud cloud = fixture.cloud();
    const NoiseSchedule schedule = NoiseSchedule::constant(beta, 1.0, steps);
    const double dt = schedule.dt();

    // forward ensemble: exact OU stepping from the training modes
    std::vector<std::vector<Vec>> fwd(trajectories);
    for (int i = 0; i < trajectories; ++i) {
        rng::Stream stream = rng::Stream::derive(seed, "demo3c-forward", uint64_t(i));
        Vec w = cloud[size_t(stream.uniform() * cloud.size()) % cloud.size()];
        fwd[i].push_back(w);
        for (int k = 0; k < steps; ++k) {
            w = forward_step_exact(w, schedule, k * dt, (k + 1) * dt, stream);
            fwd[i].push_back(w);
        }
    }
    std::vector<std::vector<Vec>> rev(trajectories);
    for (int i = 0; i < trajectories; ++i) {
        rng::Stream stream = rng::Stream::derive(seed, "demo3c-reverse", uint64_t(i));
        rev[i] = reverse_trajectory(schedule, cloud, stream);
    }

    auto dump_tracks = [&](const fs::path& path, const std::vector<std::vector<Vec>>& ens,
                           bool reverse) {
        auto csv = open_out(path);
        csv << "t,trajectory,w_bun,w_patty,w_cheese\n";
        for (int i = 0; i < std::min(tracked, trajectories); ++i) {
            for (size_t k = 0; k < ens[i].size(); ++k) {
                const double t = reverse ? 1.0 - double(k) * dt : double(k) * dt;
                csv << t << "," << i << "," << ens[i][k][0] << "," << ens[i][k][1] << ","
                    << ens[i][k][2] << "\n";
            }
        }
    };
    dump_tracks(dir / "forward_trajectories.csv", fwd, false);
    dump_tracks(dir / "reverse_trajectories.csv", rev, true);

    {
        auto csv = open_out(dir / "entropy.csv");
        csv << "step,t_forward,forward_entropy,t_reverse,reverse_entropy\n";
        std::vector<double> cheese(trajectories);
        for (size_t k = 0; k < fwd[0].size(); ++k) {
            for (int i = 0; i < trajectories; ++i) cheese[i] = fwd[i][k][2];
            const double hf = histogram_entropy(cheese, bins, lo, hi);
            double hr = 0.0;
            double t_rev = 0.0;
            if (k < rev[0].size()) {
                for (int i = 0; i < trajectories; ++i) cheese[i] = rev[i][k][2];
                hr = histogram_entropy(cheese, bins, lo, hi);
                t_rev = 1.0 - double(k) * dt;
            }
            csv << k << "," << double(k) * dt << "," << hf << "," << t_rev << "," << hr << "\n";
        }
    }
    std::cout << "demo3-continuous: wrote trajectory and entropy CSVs to " << dir << "\n";
    return 0;
}

// ------------------------------------------------------------- discover ----

std::vector<DiscoveryTarget> load_targets(const std::string& path, bool discrete) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open targets file " + path);
    std::vector<DiscoveryTarget> targets;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim_fold(line).empty()) continue;
        json j = json::parse(line);
        DiscoveryTarget t;
        t.name = j.at("name");
        if (discrete) {
            for (int b : j.at("mask").get<std::vector<int>>()) t.mask.push_back(uint8_t(b));
        } else {
            t.weights_grams = j.at("weights_grams").get<std::vector<double>>();
            t.tolerance_grams = j.at("tolerance_grams").get<std::vector<double>>();
        }
        targets.push_back(std::move(t));
    }
    if (targets.empty()) throw std::runtime_error(path + ": no targets");
    return targets;
}

int cmd_discover(const std::string& mode, double beta, uint64_t trials, int steps,
                 const std::string& targets_path, uint64_t seed, int threads,
                 const std::string& out) {
    const fs::path dir(out);
    write_config(dir, {{"subcommand", "discover"},
                       {"mode", mode},
                       {"beta", beta},
                       {"trials", trials},
                       {"steps", steps},
                       {"targets", targets_path.empty() ? "builtin" : targets_path},
                       {"seed", seed},
                       {"threads", threads}});

    const Dataset fixture = three_ingredient_fixture();

    if (mode == "discrete") {
        std::vector<DiscoveryTarget> targets;
        if (targets_path.empty())
            targets.push_back({"cheese sandwich", {1, 0, 1}, {}, {}});
        else
            targets = load_targets(targets_path, true);
        const ProbabilityTable p0 = empirical_table(fixture);
        auto csv = open_out(dir / "discovery.csv");
        csv << "name,p_path,ci_path,p_end,ci_end,p_end_analytic,n95_path,n95_end\n";
        for (const auto& t : targets) {
            const auto r = discrete_discovery(p0, t.mask, {beta, steps}, trials, seed, threads);
            const double analytic =
                marginal_from(p0, steps, beta).probs[mask_to_index(t.mask)];
            csv << t.name << "," << r.p_path << "," << r.ci_path << "," << r.p_end << ","
                << r.ci_end << "," << analytic << "," << r.n95_path << "," << r.n95_end << "\n";
        }
        std::cout << "discover: wrote " << (dir / "discovery.csv") << "\n";
        return 0;
    }

    std::vector<DiscoveryTarget> targets =
        targets_path.empty() ? table1_targets() : load_targets(targets_path, false);
    const TrainingCloud cloud = fixture.cloud();
    const NoiseSchedule schedule = NoiseSchedule::constant(beta, 1.0, steps);
    const auto reports = continuous_discovery_sweep(cloud, targets, fixture.normalization,
                                                    schedule, trials, seed, threads);

    auto csv = open_out(dir / "discovery.csv");
    csv << "name,w_bun,w_patty,w_cheese,d,d2,p_path,ci_path,p_end,ci_end,n95_path,n95_end\n";
    std::vector<std::pair<double, long long>> path_points, end_points;
    for (size_t i = 0; i < targets.size(); ++i) {
        const Vec norm = fixture.normalization.normalize(targets[i].weights_grams);
        const double d = distance_to_manifold(norm, cloud);
        const auto& r = reports[i];
        csv << targets[i].name << "," << targets[i].weights_grams[0] << ","
            << targets[i].weights_grams[1] << "," << targets[i].weights_grams[2] << "," << d
            << "," << d * d << "," << r.p_path << "," << r.ci_path << "," << r.p_end << ","
            << r.ci_end << "," << r.n95_path << "," << r.n95_end << "\n";
        // only estimates with enough hits for a stable N95 enter the fit
        if (r.hits_path >= 10) path_points.push_back({d * d, r.n95_path});
        if (r.hits_end >= 10) end_points.push_back({d * d, r.n95_end});
    }
    {
        auto slopes = open_out(dir / "slopes.csv");
        slopes << "series,slope,intercept,points\n";
        for (auto& [name, pts] :
             {std::pair{std::string("pathwise"), path_points}, {"endpoint", end_points}}) {
            if (pts.size() >= 2) {
                const SlopeFit fit = slope_fit(pts);
                slopes << name << "," << fit.slope << "," << fit.intercept << "," << pts.size()
                       << "\n";
            }
        }
    }
    std::cout << "discover: wrote " << (dir / "discovery.csv") << " and " << (dir / "slopes.csv")
              << "\n";
    return 0;
}

// ------------------------------------------------------------- training ----

void write_losses_csv(const fs::path& path, const TrainLog& log) {
    auto csv = open_out(path);
    csv << "epoch,train_loss,val_loss\n";
    for (size_t e = 0; e < log.train_loss.size(); ++e) {
        csv << e << "," << log.train_loss[e] << ",";
        if (e < log.val_loss.size()) csv << log.val_loss[e];
        csv << "\n";
    }
}

int cmd_train_mask(const std::string& data, bool fixture3, const std::string& format, int epochs,
                   double lr, int batch, int steps, double beta_min, double beta_max,
                   uint64_t seed, const std::string& out) {
    const fs::path dir(out);
    write_config(dir, {{"subcommand", "train-mask"},
                       {"data", fixture3 ? "fixture3" : data},
                       {"epochs", epochs},
                       {"lr", lr},
                       {"batch", batch},
                       {"steps", steps},
                       {"beta_min", beta_min},
                       {"beta_max", beta_max},
                       {"seed", seed}});
    const Dataset ds = load_input_data(data, fixture3, format);
    const auto schedule =
        RetentionSchedule::from_noise_schedule(NoiseSchedule::linear(beta_min, beta_max, 1.0, steps));
    TrainLog log;
    MaskModel model = train_mask_model(ds, schedule, {lr, batch, epochs, seed}, &log);
    model.save((dir / "mask.ckpt").string(), seed);
    write_losses_csv(dir / "losses.csv", log);
    std::cout << "train-mask: " << log.n_train << " train / " << log.n_val
              << " val recipes, final train loss " << log.train_loss.back() << ", wrote "
              << (dir / "mask.ckpt") << "\n";
    return 0;
}

int cmd_train_value(const std::string& data, bool fixture3, const std::string& format, int epochs,
                    double lr, int batch, int steps, double beta_min, double beta_max,
                    uint64_t seed, const std::string& out) {
    const fs::path dir(out);
    write_config(dir, {{"subcommand", "train-value"},
                       {"data", fixture3 ? "fixture3" : data},
                       {"epochs", epochs},
                       {"lr", lr},
                       {"batch", batch},
                       {"steps", steps},
                       {"beta_min", beta_min},
                       {"beta_max", beta_max},
                       {"seed", seed}});
    const Dataset ds = load_input_data(data, fixture3, format);
    const NoiseSchedule schedule = NoiseSchedule::linear(beta_min, beta_max, 1.0, steps);
    TrainLog log;
    ValueModel model = train_value_model(ds, schedule, {lr, batch, epochs, seed}, &log);
    model.save((dir / "value.ckpt").string(), seed);
    write_losses_csv(dir / "losses.csv", log);
    std::cout << "train-value: " << log.n_train << " train / " << log.n_val
              << " val recipes, final train loss " << log.train_loss.back() << ", wrote "
              << (dir / "value.ckpt") << "\n";
    return 0;
}

// ---------------------------------------------------- sample / generate ----

int cmd_sample(const std::string& ckpt, int count, uint64_t seed, int threads,
               const std::string& out) {
    const fs::path dir(out);
    write_config(dir, {{"subcommand", "sample"},
                       {"ckpt", ckpt},
                       {"count", count},
                       {"seed", seed},
                       {"threads", threads}});
    const MaskModel model = MaskModel::load(ckpt);
    const auto masks = sample_masks(model, count, seed, threads);
    auto jsonl = open_out(dir / "masks.jsonl");
    for (size_t i = 0; i < masks.size(); ++i) {
        json j;
        char name[32];
        std::snprintf(name, sizeof(name), "gen-%06zu", i);
        j["name"] = name;
        j["mask"] = std::vector<int>(masks[i].begin(), masks[i].end());
        jsonl << j.dump() << "\n";
    }
    std::cout << "sample: wrote " << count << " masks to " << (dir / "masks.jsonl") << "\n";
    return 0;
}

int cmd_generate(const std::string& mask_ckpt, const std::string& value_ckpt, int count,
                 uint64_t seed, int threads, const std::string& out) {
    const fs::path dir(out);
    write_config(dir, {{"subcommand", "generate"},
                       {"mask_ckpt", mask_ckpt},
                       {"value_ckpt", value_ckpt},
                       {"count", count},
                       {"seed", seed},
                       {"threads", threads}});
    const MaskModel mask_model = MaskModel::load(mask_ckpt);
    const ValueModel value_model = ValueModel::load(value_ckpt);
    if (mask_model.config().n != value_model.config().n)
        throw std::runtime_error("mask and value checkpoints have different vocabularies");

    const auto masks = sample_masks(mask_model, count, seed, threads);
    const auto weights = sample_weights_batch(value_model, masks, seed + 1, threads);

    const auto& names = value_model.ingredient_names();
    auto jsonl = open_out(dir / "recipes.jsonl");
    for (size_t i = 0; i < masks.size(); ++i) {
        json j;
        char name[32];
        std::snprintf(name, sizeof(name), "gen-%06zu", i);
        j["name"] = name;
        j["ingredients"] = json::array();
        for (size_t k = 0; k < masks[i].size(); ++k) {
            if (!masks[i][k] || weights.grams[i][k] <= 0.0) continue;
            j["ingredients"].push_back(
                {{"name", k < names.size() ? names[k] : "ingredient-" + std::to_string(k)},
                 {"grams", weights.grams[i][k]}});
        }
        jsonl << j.dump() << "\n";
    }
    std::cout << "generate: wrote " << count << " recipes to " << (dir / "recipes.jsonl")
              << " (clamped " << weights.clamped << " negative weights)\n";
    return 0;
}

// ---------------------------------------------------------------- stats ----

int cmd_stats(const std::string& train_path, const std::string& generated_path, int top_k,
              const std::string& out) {
    const fs::path dir(out);
    write_config(dir, {{"subcommand", "stats"},
                       {"train", train_path},
                       {"generated", generated_path},
                       {"top_k", top_k},
                       {"correlation", "phi (Pearson on presence indicators)"}});
    Dataset train = load_dataset(train_path);
    Dataset generated = load_dataset_with_vocab(generated_path, train.vocabulary);
    const auto ts = summarize(train.recipes, train.n());
    const auto gs = summarize(generated.recipes, train.n());
    const auto report = compare(ts, gs, top_k);
    write_counts_csv((dir / "counts.csv").string(), ts, gs);
    write_marginals_csv((dir / "marginals.csv").string(), train.vocabulary, ts, gs);
    write_corr_csv((dir / "corr_train.csv").string(), ts);
    write_corr_csv((dir / "corr_generated.csv").string(), gs);
    write_weights_csv((dir / "weights.csv").string(), train.vocabulary, ts, gs);
    open_out(dir / "report.json") << report.to_json().dump(2) << "\n";
    std::cout << "stats: max marginal gap " << report.max_marginal_gap << ", corr r "
              << report.corr_pearson_r << ", wrote report to " << (dir / "report.json") << "\n";
    return 0;
}

// --------------------------------------------------------------- verify ----

int cmd_verify(uint64_t seed) {
    int failures = 0;
    auto check = [&](const std::string& name, bool ok) {
        std::cout << (ok ? "[ ok ] " : "[FAIL] ") << name << "\n";
        if (!ok) ++failures;
    };

    {  // closed form equals iterated evolution
        bool ok = true;
        for (int n = 1; n <= 4 && ok; ++n) {
            const BitMask x0 = index_to_mask(1u % (1u << n), n);
            ProbabilityTable p(n, [&] {
                std::vector<double> d(size_t(1) << n, 0.0);
                d[mask_to_index(x0)] = 1.0;
                return d;
            }());
            for (int t = 0; t <= 60; ++t) {
                if (closed_form_marginal(x0, t, 0.07).max_abs_diff(p) > 1e-12) ok = false;
                p = evolve(p, 0.07);
            }
        }
        check("closed-form marginal matches iterated evolution (n<=4, t<=60)", ok);
    }
    {  // kernel rows sum to one
        bool ok = true;
        for (double beta : {0.01, 0.3, 0.9}) {
            for (uint32_t x = 0; x < 8; ++x) {
                double sum = 0.0;
                for (uint32_t y = 0; y < 8; ++y) sum += one_step_prob_index(x, y, 3, beta);
                if (std::abs(sum - 1.0) > 1e-12) ok = false;
            }
        }
        check("one-step kernel rows sum to 1", ok);
    }
    {  // variance-preserving identity
        bool ok = true;
        const NoiseSchedule s = NoiseSchedule::linear(0.001, 3.0, 1.0, 1000);
        for (int k = 0; k <= 100; ++k) {
            const OuMoments m = ou_moments(s, k / 100.0);
            if (std::abs(m.sigma - (1.0 - m.mu * m.mu)) > 1e-12) ok = false;
        }
        check("OU moments satisfy sigma = 1 - mu^2", ok);
    }
    {  // analytic score equals finite differences of the log density
        const Dataset fixture = three_ingredient_fixture();
        const TrainingCloud cloud = fixture.cloud();
        const NoiseSchedule s = NoiseSchedule::constant(5.0, 1.0, 100);
        rng::Stream stream = rng::Stream::derive(seed, "verify-score");
        bool ok = true;
        for (int trial = 0; trial < 20; ++trial) {
            const double t = 0.05 + 0.95 * stream.uniform();
            Vec w(3);
            for (auto& v : w) v = 3.0 * (2.0 * stream.uniform() - 1.0);
            const Vec score = mixture_score(w, t, s, cloud);
            for (int k = 0; k < 3; ++k) {
                const double h = 1e-5;
                Vec wp = w, wm = w;
                wp[k] += h;
                wm[k] -= h;
                const double fd = (mixture_log_density(wp, t, s, cloud) -
                                   mixture_log_density(wm, t, s, cloud)) /
                                  (2 * h);
                const double rel = std::abs(fd - score[k]) / std::max(1e-8, std::abs(fd));
                if (rel > 1e-4) ok = false;
            }
        }
        check("mixture score matches finite differences (20 random points)", ok);
    }
    {  // per-bit posterior against brute-force enumeration at n=1
        const auto schedule =
            RetentionSchedule::from_noise_schedule(NoiseSchedule::linear(0.001, 3.0, 1.0, 50));
        bool ok = true;
        for (int t = 1; t <= 50; ++t) {
            for (int x0 = 0; x0 <= 1; ++x0) {
                for (int xt = 0; xt <= 1; ++xt) {
                    const double flip = 0.5 * schedule.betas[t - 1];
                    double joint1 = (xt ? 1.0 - flip : flip) * corrupt_prob_one(x0, t - 1, schedule);
                    double joint0 =
                        (xt ? flip : 1.0 - flip) * (1.0 - corrupt_prob_one(x0, t - 1, schedule));
                    const double expected = joint1 / (joint1 + joint0);
                    if (std::abs(expected - posterior_bit(xt, x0, t, schedule)) > 1e-12) ok = false;
                }
            }
        }
        check("retention posterior matches enumeration (n=1)", ok);
    }
    {  // N95 pinned values
        check("n95 reproduces 1799 / 5430 / 1",
              n95(0.0016643) == 1799 && n95(0.0005516) == 5430 && n95(0.95) == 1);
    }
    return failures == 0 ? 0 : 1;
}

}  // namespace

int run(const std::vector<std::string>& args) {
    CLI::App app{"recdiff: two-tier diffusion engine for recipe generation"};
    app.require_subcommand(0, 1);

    uint64_t seed = 0;
    int threads = 1;
    app.add_option("--seed", seed, "base RNG seed (all sub-streams derive from it)");
    app.add_option("--threads", threads, "worker threads for ensembles");

    // demo3
    auto* demo3 = app.add_subcommand("demo3", "exact discrete fixture demo (state CSVs)");
    double d3_beta = 0.025;
    int d3_steps = 100, d3_traj = 500;
    std::string d3_out = "out-demo3";
    demo3->add_option("--beta", d3_beta, "per-ingredient flip probability");
    demo3->add_option("--steps", d3_steps, "diffusion steps");
    demo3->add_option("--trajectories", d3_traj, "reverse ensemble size");
    demo3->add_option("--out", d3_out, "output directory");

    // demo3-continuous
    auto* d3c = app.add_subcommand("demo3-continuous", "exact OU fixture demo (trajectory CSVs)");
    double c_beta = 5.0;
    int c_steps = 100, c_traj = 2000, c_tracked = 8;
    std::string c_out = "out-demo3-continuous";
    d3c->add_option("--beta", c_beta, "constant diffusion rate");
    d3c->add_option("--steps", c_steps, "integration steps over T=1");
    d3c->add_option("--trajectories", c_traj, "ensemble size for entropy panels");
    d3c->add_option("--tracked", c_tracked, "trajectories dumped to CSV");
    d3c->add_option("--out", c_out, "output directory");

    // discover
    auto* disc = app.add_subcommand("discover", "sampling-complexity experiments");
    std::string disc_mode = "continuous", disc_targets, disc_out = "out-discover";
    double disc_beta = 0.10;
    uint64_t disc_trials = 1000000;
    int disc_steps = 100;
    disc->add_option("--mode", disc_mode, "discrete|continuous")
        ->check(CLI::IsMember({"discrete", "continuous"}));
    disc->add_option("--beta", disc_beta, "flip probability (discrete) or diffusion rate");
    disc->add_option("--trials", disc_trials, "trajectory count");
    disc->add_option("--steps", disc_steps, "steps per trajectory");
    disc->add_option("--targets", disc_targets, "JSONL targets file (default: built-in)");
    disc->add_option("--out", disc_out, "output directory");

    // shared training options
    std::string tm_data, tm_format = "infer", tm_out = "out-train-mask";
    bool tm_fixture = false;
    int tm_epochs = 2000, tm_batch = 1000, tm_steps = 1000;
    double tm_lr = 5e-4, tm_bmin = 0.001, tm_bmax = 3.0;
    auto* tmask = app.add_subcommand("train-mask", "train the discrete mask denoiser");
    tmask->add_option("--data", tm_data, "recipe file (jsonl or csv)");
    tmask->add_flag("--fixture3", tm_fixture, "use the built-in three-ingredient fixture");
    tmask->add_option("--format", tm_format, "jsonl|csv (default: by extension)");
    tmask->add_option("--epochs", tm_epochs, "training epochs");
    tmask->add_option("--lr", tm_lr, "Adam learning rate");
    tmask->add_option("--batch", tm_batch, "minibatch size");
    tmask->add_option("--steps", tm_steps, "diffusion steps");
    tmask->add_option("--beta-min", tm_bmin, "schedule beta_min");
    tmask->add_option("--beta-max", tm_bmax, "schedule beta_max");
    tmask->add_option("--out", tm_out, "output directory (checkpoint + losses)");

    std::string tv_data, tv_format = "infer", tv_out = "out-train-value";
    bool tv_fixture = false;
    int tv_epochs = 2000, tv_batch = 400, tv_steps = 1000;
    double tv_lr = 1e-3, tv_bmin = 0.001, tv_bmax = 3.0;
    auto* tvalue = app.add_subcommand("train-value", "train the conditional score network");
    tvalue->add_option("--data", tv_data, "recipe file (jsonl or csv)");
    tvalue->add_flag("--fixture3", tv_fixture, "use the built-in three-ingredient fixture");
    tvalue->add_option("--format", tv_format, "jsonl|csv (default: by extension)");
    tvalue->add_option("--epochs", tv_epochs, "training epochs");
    tvalue->add_option("--lr", tv_lr, "Adam learning rate");
    tvalue->add_option("--batch", tv_batch, "minibatch size");
    tvalue->add_option("--steps", tv_steps, "diffusion steps");
    tvalue->add_option("--beta-min", tv_bmin, "schedule beta_min");
    tvalue->add_option("--beta-max", tv_bmax, "schedule beta_max");
    tvalue->add_option("--out", tv_out, "output directory (checkpoint + losses)");

    // sample / generate
    auto* sample = app.add_subcommand("sample", "sample ingredient masks from a checkpoint");
    std::string s_ckpt, s_out = "out-sample";
    int s_count = 1000;
    sample->add_option("--ckpt", s_ckpt, "mask checkpoint")->required();
    sample->add_option("--count", s_count, "number of masks");
    sample->add_option("--out", s_out, "output directory");

    auto* gen = app.add_subcommand("generate", "sample full recipes (masks then weights)");
    std::string g_mask, g_value, g_out = "out-generate";
    int g_count = 1000;
    gen->add_option("--mask-ckpt", g_mask, "mask checkpoint")->required();
    gen->add_option("--value-ckpt", g_value, "value checkpoint")->required();
    gen->add_option("--count", g_count, "number of recipes");
    gen->add_option("--out", g_out, "output directory");

    auto* stats = app.add_subcommand("stats", "train-vs-generated distribution comparison");
    std::string st_train, st_gen, st_out = "out-stats";
    int st_topk = 10;
    stats->add_option("--train", st_train, "training recipe file")->required();
    stats->add_option("--generated", st_gen, "generated recipe file")->required();
    stats->add_option("--top-k", st_topk, "top ingredients by total weight for weight errors");
    stats->add_option("--out", st_out, "output directory");

    auto* verify = app.add_subcommand("verify", "analytic self-checks (exit nonzero on failure)");

    std::vector<std::string> argv_rev(args.rbegin(), args.rend());
    try {
        app.parse(argv_rev);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (app.get_subcommands().empty()) {
            std::cout << app.help();
            return 2;
        }
        if (demo3->parsed()) return cmd_demo3(d3_beta, d3_steps, d3_traj, seed, d3_out);
        if (d3c->parsed())
            return cmd_demo3_continuous(c_beta, c_steps, c_traj, c_tracked, seed, c_out);
        if (disc->parsed())
            return cmd_discover(disc_mode, disc_beta, disc_trials, disc_steps, disc_targets, seed,
                                threads, disc_out);
        if (tmask->parsed())
            return cmd_train_mask(tm_data, tm_fixture, tm_format, tm_epochs, tm_lr, tm_batch,
                                  tm_steps, tm_bmin, tm_bmax, seed, tm_out);
        if (tvalue->parsed())
            return cmd_train_value(tv_data, tv_fixture, tv_format, tv_epochs, tv_lr, tv_batch,
                                   tv_steps, tv_bmin, tv_bmax, seed, tv_out);
        if (sample->parsed()) return cmd_sample(s_ckpt, s_count, seed, threads, s_out);
        if (gen->parsed()) return cmd_generate(g_mask, g_value, g_count, seed, threads, g_out);
        if (stats->parsed()) return cmd_stats(st_train, st_gen, st_topk, st_out);
        if (verify->parsed()) return cmd_verify(seed);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}

}  // namespace recdiff::cli
