#include "drag/model.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

#include "drag/error.hpp"

namespace drag {

using nlohmann::json;

namespace {

json extraction_to_json(const ExtractionConfig& e) {
    return json{{"slice_count", e.slice_count},
                {"points_per_section", e.points_per_section},
                {"target_cloud_size", e.target_cloud_size},
                {"alpha", e.alpha},
                {"curvature_radius_threshold", e.curvature_radius_threshold},
                {"densify_factor", e.densify_factor},
                {"axis", {e.axis.x, e.axis.y, e.axis.z}}};
}

ExtractionConfig extraction_from_json(const json& j) {
    ExtractionConfig e;
    e.slice_count = j.value("slice_count", e.slice_count);
    e.points_per_section = j.value("points_per_section", e.points_per_section);
    e.target_cloud_size = j.value("target_cloud_size", e.target_cloud_size);
    e.alpha = j.value("alpha", e.alpha);
    e.curvature_radius_threshold =
        j.value("curvature_radius_threshold", e.curvature_radius_threshold);
    e.densify_factor = j.value("densify_factor", e.densify_factor);
    if (j.contains("axis")) {
        auto a = j["axis"];
        e.axis = {a[0].get<double>(), a[1].get<double>(), a[2].get<double>()};
    }
    return e;
}

json config_to_json(const DatConfig& c) {
    return json{{"edgeconv_widths", c.edgeconv_widths},
                {"k", c.k},
                {"cda_enabled", c.cda_enabled},
                {"cde_enabled", c.cde_enabled},
                {"learnable_params_enabled", c.learnable_params_enabled},
                {"residual_enabled", c.residual_enabled},
                {"head_widths", c.head_widths},
                {"emb_dim", c.emb_dim},
                {"dropout", c.dropout},
                {"points", c.points}};
}

DatConfig config_from_json(const json& j) {
    DatConfig c;
    if (j.contains("edgeconv_widths"))
        c.edgeconv_widths = j["edgeconv_widths"].get<std::vector<std::int64_t>>();
    c.k = j.value("k", c.k);
    c.cda_enabled = j.value("cda_enabled", c.cda_enabled);
    c.cde_enabled = j.value("cde_enabled", c.cde_enabled);
    c.learnable_params_enabled = j.value("learnable_params_enabled", c.learnable_params_enabled);
    c.residual_enabled = j.value("residual_enabled", c.residual_enabled);
    if (j.contains("head_widths"))
        c.head_widths = j["head_widths"].get<std::vector<std::int64_t>>();
    c.emb_dim = j.value("emb_dim", c.emb_dim);
    c.dropout = j.value("dropout", c.dropout);
    c.points = j.value("points", c.points);
    c.validate();
    return c;
}

}  // namespace

void DatConfig::validate() const {
    if (edgeconv_widths.empty()) fail("InvalidParams", "edgeconv_widths must be non-empty");
    for (auto w : edgeconv_widths)
        if (w < 1) fail("InvalidParams", "edgeconv widths must be positive");
    if (head_widths.empty() || head_widths.back() != 1)
        fail("InvalidParams", "head_widths must end in width 1");
    for (auto w : head_widths)
        if (w < 1) fail("InvalidParams", "head widths must be positive");
    if (emb_dim < 1) fail("InvalidParams", "emb_dim must be positive");
    if (k < 1) fail("InvalidParams", "k must be positive");
    if (points < 2) fail("InvalidParams", "points must be at least 2");
    if (k >= points) fail("InvalidParams", "k must be smaller than the point count");
    if (dropout < 0.0 || dropout >= 1.0) fail("InvalidParams", "dropout must be in [0,1)");
}

std::string DatConfig::to_json() const { return config_to_json(*this).dump(2); }

DatConfig DatConfig::from_json(const std::string& text) {
    return config_from_json(json::parse(text));
}

CdaBlock CdaBlock::create(ParamRegistry& reg, const std::string& name, std::int64_t channels,
                          bool learnable, std::uint64_t model_seed) {
    CdaBlock b;
    b.query = Linear::create(reg, name + ".query", channels, channels, false, model_seed);
    b.key = Linear::create(reg, name + ".key", channels, channels, false, model_seed);
    b.bn_q = BatchNorm::create(reg, name + ".bn_q", channels);
    b.bn_k = BatchNorm::create(reg, name + ".bn_k", channels);
    b.acon_q = AconParams::create(reg, name + ".acon_q", channels, learnable);
    b.acon_k = AconParams::create(reg, name + ".acon_k", channels, learnable);
    b.acon_v = AconParams::create(reg, name + ".acon_v", channels, learnable);
    b.alpha = reg.add(name + ".alpha", Tensor::full({1}, learnable ? 0.0 : 1.0, learnable));
    return b;
}

Tensor cda_similarity(const Tensor& gamma, CdaBlock& block, bool train, bool update_stats) {
    Tensor gq = block.acon_q.apply(block.bn_q.apply(block.query.apply(gamma), train, update_stats));
    Tensor gk = block.acon_k.apply(block.bn_k.apply(block.key.apply(gamma), train, update_stats));
    Tensor s = matmul(gq, transpose(gk));  // (C,C): rows query channels
    if (!s.all_finite()) fail("NonFinite", "similarity matrix contains NaN/Inf");
    return s;
}

Tensor cde_attention(const Tensor& similarity) {
    if (!similarity.all_finite()) fail("NonFinite", "similarity matrix contains NaN/Inf");
    Tensor row_max = max_reduce(similarity, 1, true);                       // (C,1)
    Tensor gap = sub(broadcast_to(row_max, similarity.shape()), similarity);
    return softmax(gap, 1);
}

Tensor fuse(const Tensor& gamma, const Tensor& attention, CdaBlock& block, bool residual,
            Tensor* contribution) {
    Tensor gv = block.acon_v.apply(gamma);
    Tensor agv = matmul(attention, gv);
    if (contribution) *contribution = agv;
    Tensor alpha_b = broadcast_to(reshape(block.alpha, {1, 1}), agv.shape());
    Tensor scaled = mul(alpha_b, agv);
    return residual ? add(scaled, gamma) : scaled;
}

DragNet::DragNet(DatConfig config, std::uint64_t init_seed)
    : config_(std::move(config)), init_seed_(init_seed) {
    config_.validate();

    std::int64_t c_in = 3;
    for (std::size_t i = 0; i < config_.edgeconv_widths.size(); ++i) {
        const std::int64_t c_out = config_.edgeconv_widths[i];
        layers_.push_back(
            EdgeConv::create(params_, "edgeconv" + std::to_string(i), c_in, c_out, init_seed_));
        if (config_.cda_enabled)
            cda_.push_back(CdaBlock::create(params_, "cda" + std::to_string(i), c_out,
                                            config_.learnable_params_enabled, init_seed_));
        c_in = c_out;
    }

    std::int64_t cat_width = 0;
    for (auto w : config_.edgeconv_widths) cat_width += w;
    emb_lin_ = Linear::create(params_, "emb", cat_width, config_.emb_dim, false, init_seed_);
    emb_bn_ = BatchNorm::create(params_, "emb.bn", config_.emb_dim);

    std::int64_t h_in = 2 * config_.emb_dim;
    for (std::size_t i = 0; i + 1 < config_.head_widths.size(); ++i) {
        const std::int64_t h_out = config_.head_widths[i];
        head_lin_.push_back(
            Linear::create(params_, "head" + std::to_string(i), h_in, h_out, true, init_seed_));
        head_bn_.push_back(BatchNorm::create(params_, "head" + std::to_string(i) + ".bn", h_out));
        h_in = h_out;
    }
    head_out_ = Linear::create(params_, "head_out", h_in, 1, true, init_seed_);
}

namespace {

// Columns [start, start+len) of a (C, N) tensor, as a gather.
Tensor slice_cols(const Tensor& t, std::int64_t start, std::int64_t len) {
    std::vector<std::int64_t> idx(static_cast<std::size_t>(len));
    for (std::int64_t i = 0; i < len; ++i) idx[static_cast<std::size_t>(i)] = start + i;
    return gather(t, std::move(idx), 1);
}

}  // namespace

// The backbone runs the whole batch as one (C, B*P) tensor with the
// per-sample kNN graphs merged by column offset: batchnorm then sees the
// joint (batch, points, neighbors) statistics the RegDGCNN lineage uses,
// and eval-mode running stats match the training distribution. Only the
// attention matrices and the pooling are per-sample.
Tensor DragNet::forward_impl(std::span<const PointCloud* const> clouds, bool train,
                             bool update_stats, std::uint64_t dropout_seed,
                             Tensor* last_contribution) {
    if (clouds.empty()) fail("EmptyDataset", "forward needs at least one cloud");
    const auto b = static_cast<std::int64_t>(clouds.size());
    const std::int64_t p = config_.points;
    for (const PointCloud* c : clouds)
        if (static_cast<std::int64_t>(c->size()) != p)
            fail("PointCountMismatch", "cloud has " + std::to_string(c->size()) +
                                           " points, model expects " + std::to_string(p));

    std::vector<double> coords(static_cast<std::size_t>(3 * b * p));
    for (std::int64_t s = 0; s < b; ++s)
        for (std::int64_t i = 0; i < p; ++i) {
            const Vec3& v = clouds[static_cast<std::size_t>(s)]->points[static_cast<std::size_t>(i)];
            coords[static_cast<std::size_t>(0 * b * p + s * p + i)] = v.x;
            coords[static_cast<std::size_t>(1 * b * p + s * p + i)] = v.y;
            coords[static_cast<std::size_t>(2 * b * p + s * p + i)] = v.z;
        }
    Tensor gamma = Tensor::from({3, b * p}, std::move(coords));

    // per-sample graphs over the current features, merged by offset
    std::vector<double> block(static_cast<std::size_t>(3 * p));
    auto batched_graph = [&](const Tensor& feats, KnnGraph::Space space) {
        const std::int64_t c = feats.dim(0);
        block.resize(static_cast<std::size_t>(c * p));
        KnnGraph merged;
        merged.k = config_.k;
        merged.points = b * p;
        merged.space = space;
        merged.neighbors.resize(static_cast<std::size_t>(b * p * config_.k));
        auto fv = feats.values();
        for (std::int64_t s = 0; s < b; ++s) {
            for (std::int64_t ch = 0; ch < c; ++ch)
                for (std::int64_t i = 0; i < p; ++i)
                    block[static_cast<std::size_t>(ch * p + i)] =
                        fv[static_cast<std::size_t>(ch * b * p + s * p + i)];
            KnnGraph local = knn_graph(block, c, p, config_.k, space);
            for (std::size_t e = 0; e < local.neighbors.size(); ++e)
                merged.neighbors[static_cast<std::size_t>(s * p * config_.k) + e] =
                    local.neighbors[e] + s * p;
        }
        return merged;
    };

    std::vector<Tensor> features;
    for (std::size_t layer = 0; layer < layers_.size(); ++layer) {
        // dynamic graph: layer 0 uses coordinates, deeper layers the
        // previous layer's output features
        KnnGraph graph = batched_graph(gamma, layer == 0 ? KnnGraph::Space::coordinates
                                                         : KnnGraph::Space::features);
        gamma = layers_[layer].apply(gamma, graph, train, update_stats);
        if (!gamma.all_finite())
            fail("NonFinite", "edgeconv" + std::to_string(layer) + " produced NaN/Inf");

        if (config_.cda_enabled) {
            CdaBlock& blk = cda_[layer];
            // pointwise projections and their batchnorms act on the whole
            // batch; the channel-by-channel products are per sample
            Tensor q_all =
                blk.acon_q.apply(blk.bn_q.apply(blk.query.apply(gamma), train, update_stats));
            Tensor k_all =
                blk.acon_k.apply(blk.bn_k.apply(blk.key.apply(gamma), train, update_stats));
            Tensor gv_all = blk.acon_v.apply(gamma);
            Tensor alpha_b;

            std::vector<Tensor> fused;
            fused.reserve(static_cast<std::size_t>(b));
            for (std::int64_t s = 0; s < b; ++s) {
                Tensor q = slice_cols(q_all, s * p, p);
                Tensor k = slice_cols(k_all, s * p, p);
                Tensor sim = matmul(q, transpose(k));
                if (!sim.all_finite())
                    fail("NonFinite", "cda" + std::to_string(layer) + " similarity NaN/Inf");
                Tensor att = config_.cde_enabled ? cde_attention(sim) : sim;
                Tensor gv = slice_cols(gv_all, s * p, p);
                Tensor agv = matmul(att, gv);
                if (last_contribution && s == 0) *last_contribution = agv;
                if (!alpha_b.defined())
                    alpha_b = broadcast_to(reshape(blk.alpha, {1, 1}), agv.shape());
                Tensor scaled = mul(alpha_b, agv);
                fused.push_back(config_.residual_enabled
                                    ? add(scaled, slice_cols(gamma, s * p, p))
                                    : scaled);
            }
            gamma = fused.size() == 1 ? fused[0] : concat(fused, 1);
            if (!gamma.all_finite())
                fail("NonFinite", "cda" + std::to_string(layer) + " produced NaN/Inf");
        }
        features.push_back(gamma);
    }

    Tensor cat = features.size() == 1 ? features[0] : concat(features, 0);
    Tensor e = leaky_relu(emb_bn_.apply(emb_lin_.apply(cat), train, update_stats), 0.2);
    if (!e.all_finite()) fail("NonFinite", "embedding produced NaN/Inf");

    std::vector<Tensor> pooled;
    pooled.reserve(static_cast<std::size_t>(b));
    for (std::int64_t s = 0; s < b; ++s) {
        Tensor es = slice_cols(e, s * p, p);
        pooled.push_back(concat({max_reduce(es, 1, true), mean_reduce(es, 1, true)}, 0));
    }
    Tensor h = pooled.size() == 1 ? pooled[0] : concat(pooled, 1);  // (2*emb, B)

    for (std::size_t i = 0; i < head_lin_.size(); ++i) {
        h = head_lin_[i].apply(h);
        h = head_bn_[i].apply(h, train, update_stats);
        h = leaky_relu(h, 0.2);
        h = dropout(h, config_.dropout, dropout_seed * 1315423911ull + i, train);
    }
    h = head_out_.apply(h);  // (1, B)
    if (!h.all_finite()) fail("NonFinite", "head produced NaN/Inf");
    return h;
}

Tensor DragNet::forward_batch(std::span<const PointCloud* const> clouds, bool train,
                              bool update_stats, std::uint64_t dropout_seed) {
    return forward_impl(clouds, train, update_stats, dropout_seed, nullptr);
}

double DragNet::predict(const PointCloud& cloud) {
    NoGradGuard ng;
    const PointCloud* ptr = &cloud;
    Tensor out = forward_batch({&ptr, 1}, false, false, 0);
    return out.values()[0] * target_std + target_mean;
}

std::vector<double> DragNet::attention_salience(const PointCloud& cloud) {
    if (!config_.cda_enabled)
        fail("ModelWithoutCda", "attention export requires a model with the CDA branch");
    NoGradGuard ng;
    Tensor contribution;
    const PointCloud* ptr = &cloud;
    forward_impl({&ptr, 1}, false, false, 0, &contribution);

    const std::int64_t c = contribution.dim(0), p = contribution.dim(1);
    std::vector<double> salience(static_cast<std::size_t>(p), 0.0);
    auto v = contribution.values();
    for (std::int64_t j = 0; j < p; ++j) {
        double acc = 0;
        for (std::int64_t i = 0; i < c; ++i) {
            double x = v[static_cast<std::size_t>(i * p + j)];
            acc += x * x;
        }
        salience[static_cast<std::size_t>(j)] = std::sqrt(acc);
    }
    auto [mn, mx] = std::minmax_element(salience.begin(), salience.end());
    double lo = *mn, hi = *mx;
    if (hi - lo <= 0) {
        std::fill(salience.begin(), salience.end(), 0.0);  // constant contribution
    } else {
        for (double& s : salience) s = (s - lo) / (hi - lo);
    }
    return salience;
}

void DragNet::save(const std::string& path) const {
    params_.save_binary(path);
    json sidecar{{"format", "aerodrag-model"},
                 {"version", 1},
                 {"init_seed", init_seed_},
                 {"config", config_to_json(config_)},
                 {"target_mean", target_mean},
                 {"target_std", target_std},
                 {"extraction", extraction_to_json(extraction)}};
    std::ofstream out(path + ".json");
    if (!out) fail("IoError", "cannot open '" + path + ".json' for writing");
    out << sidecar.dump(2) << "\n";
}

std::unique_ptr<DragNet> DragNet::load(const std::string& path) {
    std::ifstream in(path + ".json");
    if (!in) fail("BadModelFile", "missing sidecar '" + path + ".json'");
    json sidecar = json::parse(in, nullptr, false);
    if (sidecar.is_discarded() || sidecar.value("format", "") != "aerodrag-model")
        fail("BadModelFile", "'" + path + ".json' is not a model sidecar");

    auto model = std::make_unique<DragNet>(config_from_json(sidecar["config"]),
                                           sidecar.value("init_seed", 0ull));
    model->target_mean = sidecar.value("target_mean", 0.0);
    model->target_std = sidecar.value("target_std", 1.0);
    if (sidecar.contains("extraction"))
        model->extraction = extraction_from_json(sidecar["extraction"]);
    model->params_.load_binary(path);
    return model;
}

}  // namespace drag
