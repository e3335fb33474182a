#include "drag/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

#include <json.hpp>

#include "drag/error.hpp"

namespace drag {

using nlohmann::json;

std::string TrainConfig::to_json() const {
    const char* sched = schedule == Schedule::constant ? "constant"
                        : schedule == Schedule::step   ? "step"
                                                       : "cosine";
    json j{{"lr", lr},
           {"batch_size", batch_size},
           {"epochs", epochs},
           {"weight_decay", weight_decay},
           {"lr_schedule", sched},
           {"seed", seed}};
    return j.dump(2);
}

TrainConfig TrainConfig::from_json(const std::string& text) {
    json j = json::parse(text);
    TrainConfig c;
    c.lr = j.value("lr", c.lr);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.epochs = j.value("epochs", c.epochs);
    c.weight_decay = j.value("weight_decay", c.weight_decay);
    c.seed = j.value("seed", c.seed);
    std::string sched = j.value("lr_schedule", "step");
    if (sched == "constant")
        c.schedule = Schedule::constant;
    else if (sched == "step")
        c.schedule = Schedule::step;
    else if (sched == "cosine")
        c.schedule = Schedule::cosine;
    else
        fail("InvalidParams", "unknown lr_schedule '" + sched + "'");
    if (c.lr <= 0 || c.batch_size < 1 || c.epochs < 1 || c.weight_decay < 0)
        fail("InvalidParams", "train config values must be positive");
    return c;
}

double schedule_lr(const TrainConfig& config, int epoch) {
    switch (config.schedule) {
        case TrainConfig::Schedule::constant:
            return config.lr;
        case TrainConfig::Schedule::step:
            return config.lr * std::pow(0.5, epoch / 30);
        case TrainConfig::Schedule::cosine:
            return config.lr * 0.5 *
                   (1.0 + std::cos(std::numbers::pi * epoch /
                                   std::max(1, config.epochs)));
    }
    return config.lr;
}

std::string MetricsReport::to_json() const {
    json j{{"mse", mse}, {"mae", mae}, {"max_ae", max_ae}};
    if (r2_defined)
        j["r2"] = r2;
    else
        j["r2"] = "undefined";
    return j.dump(2);
}

SplitIndices split_dataset(std::size_t n, std::uint64_t seed) {
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    std::mt19937_64 rng(seed ^ 0x51177f00dull);
    std::shuffle(idx.begin(), idx.end(), rng);

    SplitIndices split;
    const std::size_t n_train = n * 70 / 100;
    const std::size_t n_val = n * 15 / 100;
    split.train.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
    split.val.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_train),
                     idx.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
    split.test.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), idx.end());
    return split;
}

void AdamState::init(const ParamRegistry& params) {
    m.clear();
    v.clear();
    t = 0;
    for (const auto& [name, tensor] : params.entries()) {
        const std::size_t n =
            tensor.requires_grad() ? static_cast<std::size_t>(tensor.numel()) : 0;
        m.emplace_back(n, 0.0);
        v.emplace_back(n, 0.0);
    }
}

void adam_step(ParamRegistry& params, AdamState& state, double lr, double weight_decay) {
    constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    if (state.m.size() != params.entries().size())
        fail("ShapeMismatch", "Adam state does not match the parameter registry");
    ++state.t;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.t));

    for (std::size_t e = 0; e < state.m.size(); ++e) {
        auto& [name, tensor] = params.entries_mut()[e];
        if (!tensor.requires_grad()) continue;
        auto theta = tensor.values_mut();
        auto g = tensor.grad();
        auto& m = state.m[e];
        auto& v = state.v[e];
        for (std::size_t i = 0; i < theta.size(); ++i) {
            if (weight_decay != 0.0) theta[i] -= lr * weight_decay * theta[i];
            m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
            v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            theta[i] -= lr * mhat / (std::sqrt(vhat) + eps);
        }
    }
}

MetricsReport compute_metrics(std::span<const double> truth, std::span<const double> predicted) {
    if (truth.empty() || truth.size() != predicted.size())
        fail("EmptyDataset", "metrics need matching non-empty prediction/truth lists");
    MetricsReport r;
    r.residuals.resize(truth.size());
    double mean_y = 0;
    for (double y : truth) mean_y += y;
    mean_y /= static_cast<double>(truth.size());

    double ss_res = 0, ss_tot = 0, abs_sum = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const double res = truth[i] - predicted[i];
        r.residuals[i] = res;
        ss_res += res * res;
        abs_sum += std::abs(res);
        ss_tot += (truth[i] - mean_y) * (truth[i] - mean_y);
        r.max_ae = std::max(r.max_ae, std::abs(res));
    }
    r.mse = ss_res / static_cast<double>(truth.size());
    r.mae = abs_sum / static_cast<double>(truth.size());
    if (ss_tot > 0) {
        r.r2 = 1.0 - ss_res / ss_tot;
    } else {
        r.r2_defined = false;  // ZeroVariance: R^2 undefined, other metrics stand
        r.r2 = std::numeric_limits<double>::quiet_NaN();
    }
    return r;
}

MetricsReport evaluate_model(DragNet& model, const std::vector<DragSample>& dataset,
                             std::span<const std::size_t> indices) {
    if (indices.empty()) fail("EmptyDataset", "evaluate needs at least one sample");
    std::vector<double> truth, pred;
    truth.reserve(indices.size());
    pred.reserve(indices.size());
    for (std::size_t i : indices) {
        truth.push_back(dataset[i].cd);
        pred.push_back(model.predict(dataset[i].cloud));
    }
    return compute_metrics(truth, pred);
}

MetricsReport evaluate_model(DragNet& model, const std::vector<DragSample>& dataset) {
    std::vector<std::size_t> idx(dataset.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    return evaluate_model(model, dataset, idx);
}

TrainResult train_model(DragNet& model, const std::vector<DragSample>& dataset,
                        const TrainConfig& config) {
    if (dataset.empty()) fail("EmptyDataset", "cannot train on an empty dataset");

    TrainResult result;
    result.split = split_dataset(dataset.size(), config.seed);
    if (result.split.train.empty() || result.split.val.empty() || result.split.test.empty())
        fail("EmptyDataset", "dataset too small for a 70/15/15 split");

    // standardize targets over the train split
    double mean = 0;
    for (std::size_t i : result.split.train) mean += dataset[i].cd;
    mean /= static_cast<double>(result.split.train.size());
    double var = 0;
    for (std::size_t i : result.split.train) {
        const double d = dataset[i].cd - mean;
        var += d * d;
    }
    var /= static_cast<double>(result.split.train.size());
    double std_dev = std::sqrt(var);
    if (std_dev < 1e-12) std_dev = 1.0;  // constant-target guard
    model.target_mean = mean;
    model.target_std = std_dev;

    AdamState adam;
    adam.init(model.params());
    std::mt19937_64 rng(config.seed * 0x9E3779B97F4A7C15ull + 1);

    double best_val = HUGE_VAL;
    std::vector<std::vector<double>> best_snapshot;
    std::vector<std::size_t> order = result.split.train;

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        const double lr = schedule_lr(config, epoch);
        std::shuffle(order.begin(), order.end(), rng);

        double train_sq_sum = 0;
        std::size_t train_count = 0;
        for (std::size_t start = 0; start < order.size();
             start += static_cast<std::size_t>(config.batch_size)) {
            const std::size_t end =
                std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
            const std::size_t b = end - start;
            if (b < 2) break;  // batchnorm needs at least 2 in training

            std::vector<const PointCloud*> clouds;
            std::vector<double> targets;
            clouds.reserve(b);
            targets.reserve(b);
            for (std::size_t i = start; i < end; ++i) {
                clouds.push_back(&dataset[order[i]].cloud);
                targets.push_back((dataset[order[i]].cd - mean) / std_dev);
            }

            model.params().zero_grads();
            Tensor pred = model.forward_batch({clouds.data(), clouds.size()}, true, true, rng());
            Tensor target =
                Tensor::from({1, static_cast<std::int64_t>(b)}, std::move(targets));
            Tensor loss = mse_loss(pred, target);
            const double loss_v = loss.scalar_value();
            if (!std::isfinite(loss_v))
                fail("DivergenceDetected", "loss is not finite at epoch " +
                                               std::to_string(epoch + 1) + ", step " +
                                               std::to_string(start / static_cast<std::size_t>(
                                                                          config.batch_size)));
            backward(loss);
            adam_step(model.params(), adam, lr, config.weight_decay);

            train_sq_sum += loss_v * static_cast<double>(b);
            train_count += b;
        }

        MetricsReport val = evaluate_model(model, dataset, result.split.val);
        const double train_mse_raw =
            train_count ? (train_sq_sum / static_cast<double>(train_count)) * std_dev * std_dev
                        : 0.0;
        result.history.push_back({epoch + 1, train_mse_raw, val.mse, lr});

        if (val.mse < best_val) {
            best_val = val.mse;
            result.best_epoch = epoch + 1;
            best_snapshot = model.params().snapshot_values();
        }
    }

    if (!best_snapshot.empty()) model.params().restore_values(best_snapshot);
    result.best_val_mse = best_val;
    result.test_metrics = evaluate_model(model, dataset, result.split.test);
    return result;
}

const std::vector<std::string> kAblationLabels = {"baseline", "baseline+cda", "full",
                                                  "no-learnable", "no-residual"};

namespace {

DatConfig variant_config(const DatConfig& base, const std::string& label) {
    DatConfig c = base;
    c.cda_enabled = true;
    c.cde_enabled = true;
    c.learnable_params_enabled = true;
    c.residual_enabled = true;
    if (label == "baseline") {
        c.cda_enabled = false;
        c.cde_enabled = false;
    } else if (label == "baseline+cda") {
        c.cde_enabled = false;
    } else if (label == "full") {
        // all on
    } else if (label == "no-learnable") {
        c.learnable_params_enabled = false;
    } else if (label == "no-residual") {
        c.residual_enabled = false;
    } else {
        fail("InvalidParams", "unknown ablation label '" + label + "'");
    }
    return c;
}

}  // namespace

std::vector<AblationRow> ablation_suite(const std::vector<DragSample>& dataset,
                                        const DatConfig& base, const TrainConfig& config,
                                        int n_seeds) {
    std::vector<AblationRow> rows;
    for (int s = 0; s < n_seeds; ++s) {
        const std::uint64_t seed = config.seed + static_cast<std::uint64_t>(s);
        for (const std::string& label : kAblationLabels) {
            AblationRow row;
            row.label = label;
            row.seed = seed;
            try {
                DragNet model(variant_config(base, label), seed);
                TrainConfig tc = config;
                tc.seed = seed;
                TrainResult res = train_model(model, dataset, tc);
                row.metrics = res.test_metrics;
                row.best_epoch = res.best_epoch;
            } catch (const Error& e) {
                row.failed = true;
                row.error = e.what();
            }
            rows.push_back(std::move(row));
        }
    }
    return rows;
}

std::string ablation_csv(const std::vector<AblationRow>& rows) {
    std::ostringstream os;
    os << "config,seed,status,mse,mae,max_ae,r2,best_epoch\n";
    char buf[256];
    for (const auto& r : rows) {
        if (r.failed) {
            os << r.label << "," << r.seed << ",error,,,,,\n";
            continue;
        }
        std::snprintf(buf, sizeof buf, "%s,%llu,ok,%.8g,%.8g,%.8g,%.8g,%d\n", r.label.c_str(),
                      static_cast<unsigned long long>(r.seed), r.metrics.mse, r.metrics.mae,
                      r.metrics.max_ae, r.metrics.r2_defined ? r.metrics.r2 : std::nan(""),
                      r.best_epoch);
        os << buf;
    }
    return os.str();
}

double ablation_median_r2(const std::vector<AblationRow>& rows, const std::string& label) {
    std::vector<double> r2s;
    for (const auto& r : rows)
        if (r.label == label && !r.failed && r.metrics.r2_defined) r2s.push_back(r.metrics.r2);
    if (r2s.empty()) fail("EmptyDataset", "no successful rows for '" + label + "'");
    std::sort(r2s.begin(), r2s.end());
    const std::size_t n = r2s.size();
    return n % 2 ? r2s[n / 2] : 0.5 * (r2s[n / 2 - 1] + r2s[n / 2]);
}

}  // namespace drag
