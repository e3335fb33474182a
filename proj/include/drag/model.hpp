#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "drag/contour.hpp"
#include "drag/graph.hpp"
#include "drag/nn.hpp"
#include "drag/point_cloud.hpp"

namespace drag {

/// Architecture switches. The four flags map onto the ablation variants:
/// baseline (cda off), baseline+CDA (cde off), full model, frozen
/// attention parameters, and no residual path.
struct DatConfig {
    std::vector<std::int64_t> edgeconv_widths{64, 64, 128, 256};
    std::int64_t k = 50;
    bool cda_enabled = true;
    bool cde_enabled = true;
    bool learnable_params_enabled = true;
    bool residual_enabled = true;
    std::vector<std::int64_t> head_widths{512, 256, 64, 1};
    std::int64_t emb_dim = 512;
    double dropout = 0.0;
    std::int64_t points = 5000;

    void validate() const;
    std::string to_json() const;
    static DatConfig from_json(const std::string& text);
};

/// Channel-attention block state: pointwise query/key projections with
/// their batchnorms and ACON-C triples, the value-path ACON-C, and the
/// fusion weight alpha. Alpha starts at 0 when learnable (the attention
/// branch is then an exact no-op at init); a frozen alpha starts at 1 so
/// the frozen variant still exercises the branch.
struct CdaBlock {
    Linear query, key;
    BatchNorm bn_q, bn_k;
    AconParams acon_q, acon_k, acon_v;
    Tensor alpha;

    static CdaBlock create(ParamRegistry& reg, const std::string& name, std::int64_t channels,
                           bool learnable, std::uint64_t model_seed);
};

/// Channel-by-channel similarity: S[i][j] = sum_p Gq[i,p] * Gk[j,p] with
/// Gq = AconC(bn(Wq gamma)) and Gk = AconC(bn(Wk gamma)).
Tensor cda_similarity(const Tensor& gamma, CdaBlock& block, bool train, bool update_stats);

/// Row-stochastic attention from a similarity matrix:
/// A[i][j] = softmax_j(rowmax_i(S) - S[i][j]).
Tensor cde_attention(const Tensor& similarity);

/// G^o = alpha * (A x AconC_v(gamma)) [+ gamma if residual]. Pass the
/// attention contribution out through `contribution` when non-null.
Tensor fuse(const Tensor& gamma, const Tensor& attention, CdaBlock& block, bool residual,
            Tensor* contribution = nullptr);

/// EdgeConv backbone with per-layer dynamic kNN graphs and optional
/// correlation attention, global max+mean pooling, and an MLP head
/// regressing one scalar per cloud.
class DragNet {
public:
    DragNet(DatConfig config, std::uint64_t init_seed);

    const DatConfig& config() const { return config_; }
    ParamRegistry& params() { return params_; }
    std::uint64_t init_seed() const { return init_seed_; }

    /// Predictions in standardized target space, shape (1, B). All batch
    /// members share one graph so the head batchnorm normalizes over the
    /// batch axis (train mode needs B >= 2).
    Tensor forward_batch(std::span<const PointCloud* const> clouds, bool train,
                         bool update_stats, std::uint64_t dropout_seed);

    /// Single-cloud eval-mode prediction, denormalized to Cd.
    double predict(const PointCloud& cloud);

    /// Per-point salience in [0,1]: L2 norm over channels of the final
    /// CDA block's attention contribution, min-max normalized (all zeros
    /// when the contribution is constant).
    std::vector<double> attention_salience(const PointCloud& cloud);

    void save(const std::string& path) const;
    static std::unique_ptr<DragNet> load(const std::string& path);

    // target standardization, stored with the model
    double target_mean = 0.0;
    double target_std = 1.0;
    // extraction settings recorded so predict-from-STL reproduces training input
    ExtractionConfig extraction;

private:
    Tensor forward_impl(std::span<const PointCloud* const> clouds, bool train, bool update_stats,
                        std::uint64_t dropout_seed, Tensor* last_contribution);

    DatConfig config_;
    std::uint64_t init_seed_;
    ParamRegistry params_;
    std::vector<EdgeConv> layers_;
    std::vector<CdaBlock> cda_;
    Linear emb_lin_;
    BatchNorm emb_bn_;
    std::vector<Linear> head_lin_;
    std::vector<BatchNorm> head_bn_;
    Linear head_out_;
};

}  // namespace drag
