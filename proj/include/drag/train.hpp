#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "drag/data.hpp"
#include "drag/model.hpp"

namespace drag {

struct TrainConfig {
    double lr = 1e-4;
    int batch_size = 32;
    int epochs = 100;
    double weight_decay = 1e-4;
    enum class Schedule { constant, step, cosine } schedule = Schedule::step;
    std::uint64_t seed = 0;

    std::string to_json() const;
    static TrainConfig from_json(const std::string& text);
};

/// Effective learning rate for a 0-based epoch index: constant; step
/// halves every 30 epochs; cosine anneals to 0 over the run.
double schedule_lr(const TrainConfig& config, int epoch);

struct MetricsReport {
    double mse = 0.0;
    double mae = 0.0;
    double max_ae = 0.0;
    double r2 = 0.0;
    bool r2_defined = true;  // false when the target variance is zero
    std::vector<double> residuals;

    std::string to_json() const;
};

struct EpochRecord {
    int epoch;
    double train_mse;  // raw Cd scale
    double val_mse;
    double lr;
};

struct SplitIndices {
    std::vector<std::size_t> train, val, test;
};

/// Seeded-shuffle 70/15/15 split.
SplitIndices split_dataset(std::size_t n, std::uint64_t seed);

struct AdamState {
    std::vector<std::vector<double>> m, v;  // one slot per registry entry
    std::int64_t t = 0;

    void init(const ParamRegistry& params);
};

/// Bias-corrected Adam with decoupled weight decay applied before the
/// Adam delta. beta1 0.9, beta2 0.999, eps 1e-8. Only requires_grad
/// entries are updated.
void adam_step(ParamRegistry& params, AdamState& state, double lr, double weight_decay);

struct TrainResult {
    std::vector<EpochRecord> history;
    int best_epoch = -1;  // 1-based; model holds the best-val weights on return
    double best_val_mse = 0.0;
    MetricsReport test_metrics;
    SplitIndices split;
};

/// MSE training on standardized targets with best-validation checkpoint
/// selection. Deterministic for a fixed seed (single-threaded).
TrainResult train_model(DragNet& model, const std::vector<DragSample>& dataset,
                        const TrainConfig& config);

MetricsReport evaluate_model(DragNet& model, const std::vector<DragSample>& dataset,
                             std::span<const std::size_t> indices);
MetricsReport evaluate_model(DragNet& model, const std::vector<DragSample>& dataset);

/// Metrics from already-computed prediction pairs (exposed for oracles).
MetricsReport compute_metrics(std::span<const double> truth, std::span<const double> predicted);

struct AblationRow {
    std::string label;
    std::uint64_t seed = 0;
    bool failed = false;
    std::string error;
    MetricsReport metrics;
    int best_epoch = -1;
};

/// Trains the five architecture variants (baseline, baseline+cda, full,
/// no-learnable, no-residual) over n_seeds seeds with identical splits
/// per seed. A failing row is recorded and the remaining rows continue.
std::vector<AblationRow> ablation_suite(const std::vector<DragSample>& dataset,
                                        const DatConfig& base, const TrainConfig& config,
                                        int n_seeds);

extern const std::vector<std::string> kAblationLabels;

std::string ablation_csv(const std::vector<AblationRow>& rows);
double ablation_median_r2(const std::vector<AblationRow>& rows, const std::string& label);

}  // namespace drag
