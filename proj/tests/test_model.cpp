#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "drag/error.hpp"
#include "drag/model.hpp"
#include "test_support.hpp"

using namespace drag;

namespace {

// Eval-mode batchnorm becomes the exact identity with these stats.
void neutralize_bn(BatchNorm& bn) {
    std::fill(bn.running_mean.values_mut().begin(), bn.running_mean.values_mut().end(), 0.0);
    std::fill(bn.running_var.values_mut().begin(), bn.running_var.values_mut().end(),
              1.0 - bn.eps);
}

void set_identity(Linear& lin) {
    auto w = lin.weight.values_mut();
    std::fill(w.begin(), w.end(), 0.0);
    const std::int64_t n = lin.weight.dim(0);
    for (std::int64_t i = 0; i < n; ++i) w[static_cast<std::size_t>(i * n + i)] = 1.0;
}

// Linear-regime ACON-C: p1 == p2 == 1 makes the activation the identity.
void set_linear_acon(AconParams& a) {
    std::fill(a.p1.values_mut().begin(), a.p1.values_mut().end(), 1.0);
    std::fill(a.p2.values_mut().begin(), a.p2.values_mut().end(), 1.0);
}

CdaBlock identity_cda(ParamRegistry& reg, std::int64_t c) {
    CdaBlock blk = CdaBlock::create(reg, "cda_test", c, true, 0);
    set_identity(blk.query);
    set_identity(blk.key);
    neutralize_bn(blk.bn_q);
    neutralize_bn(blk.bn_k);
    set_linear_acon(blk.acon_q);
    set_linear_acon(blk.acon_k);
    set_linear_acon(blk.acon_v);
    return blk;
}

DatConfig tiny_config(std::int64_t points = 32) {
    DatConfig cfg;
    cfg.edgeconv_widths = {8, 8};
    cfg.k = 4;
    cfg.emb_dim = 16;
    cfg.head_widths = {16, 8, 1};
    cfg.points = points;
    return cfg;
}

PointCloud random_cloud(std::int64_t p, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<Vec3> raw(static_cast<std::size_t>(p));
    for (auto& v : raw) v = {u(rng), u(rng), u(rng)};
    return normalize_cloud(raw, PointCloud::Source::uniform_surface);
}

}  // namespace

TEST_CASE("similarity of orthogonal channels is diagonal") {
    ParamRegistry reg;
    CdaBlock blk = identity_cda(reg, 2);
    Tensor gamma = Tensor::from({2, 2}, {1.0, 0.0, 0.0, 1.0});
    Tensor s = cda_similarity(gamma, blk, false, false);
    CHECK(s.values()[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(s.values()[1] == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(s.values()[2] == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(s.values()[3] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("similarity of an all-ones feature map is the point count") {
    ParamRegistry reg;
    CdaBlock blk = identity_cda(reg, 2);
    Tensor gamma = Tensor::full({2, 3}, 1.0);
    Tensor s = cda_similarity(gamma, blk, false, false);
    for (double v : s.values()) CHECK(v == doctest::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("shared query/key weights give a symmetric similarity") {
    ParamRegistry reg;
    CdaBlock blk = CdaBlock::create(reg, "cda_sym", 4, true, 5);
    // copy the query path onto the key path
    std::copy(blk.query.weight.values().begin(), blk.query.weight.values().end(),
              blk.key.weight.values_mut().begin());
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<double> vals(4 * 9);
    for (auto& v : vals) v = u(rng);
    Tensor gamma = Tensor::from({4, 9}, std::move(vals));

    Tensor s = cda_similarity(gamma, blk, false, false);
    auto sv = s.values();
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j)
            CHECK(sv[static_cast<std::size_t>(i * 4 + j)] ==
                  doctest::Approx(sv[static_cast<std::size_t>(j * 4 + i)]).epsilon(1e-12));
}

TEST_CASE("attention of a constant similarity row is uniform") {
    Tensor s = Tensor::from({1, 3}, {5.0, 5.0, 5.0});
    Tensor a = cde_attention(s);
    for (double v : a.values()) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("attention row follows the rowmax-minus-S softmax") {
    Tensor s = Tensor::from({1, 2}, {1.0, 0.0});
    Tensor a = cde_attention(s);
    const double e = std::exp(1.0);
    CHECK(a.values()[0] == doctest::Approx(1.0 / (1.0 + e)).epsilon(1e-12));
    CHECK(a.values()[1] == doctest::Approx(e / (1.0 + e)).epsilon(1e-12));
}

TEST_CASE("attention rows are probability vectors") {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> vals(6 * 6);
        for (auto& v : vals) v = u(rng);
        Tensor a = cde_attention(Tensor::from({6, 6}, std::move(vals)));
        auto av = a.values();
        for (int i = 0; i < 6; ++i) {
            double sum = 0;
            for (int j = 0; j < 6; ++j) {
                double x = av[static_cast<std::size_t>(i * 6 + j)];
                CHECK(x > 0.0);
                CHECK(x < 1.0);
                sum += x;
            }
            CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
        }
    }
}

TEST_CASE("fusion with alpha 0 returns gamma exactly") {
    ParamRegistry reg;
    CdaBlock blk = identity_cda(reg, 3);
    blk.alpha.values_mut()[0] = 0.0;
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    std::vector<double> vals(3 * 7);
    for (auto& v : vals) v = u(rng);
    Tensor gamma = Tensor::from({3, 7}, vals);
    Tensor a = cde_attention(cda_similarity(gamma, blk, false, false));
    Tensor out = fuse(gamma, a, blk, true);
    for (std::size_t i = 0; i < vals.size(); ++i) CHECK(out.values()[i] == vals[i]);
}

TEST_CASE("fusion with identity attention and linear value path doubles gamma") {
    ParamRegistry reg;
    CdaBlock blk = identity_cda(reg, 3);
    blk.alpha.values_mut()[0] = 1.0;
    Tensor gamma = Tensor::from({3, 2}, {1.0, -2.0, 0.5, 3.0, -1.0, 0.25});
    Tensor identity = Tensor::from({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
    Tensor out = fuse(gamma, identity, blk, true);
    for (std::size_t i = 0; i < out.values().size(); ++i)
        CHECK(out.values()[i] == doctest::Approx(2.0 * gamma.values()[i]).epsilon(1e-12));
}

TEST_CASE("fusion matches a naive triple-loop evaluation") {
    ParamRegistry reg;
    CdaBlock blk = CdaBlock::create(reg, "cda_loop", 4, true, 11);
    blk.alpha.values_mut()[0] = 0.7;
    std::mt19937_64 rng(13);
    std::uniform_real_distribution<double> u(-1.5, 1.5);
    std::vector<double> gv(4 * 8), av(4 * 4);
    for (auto& v : gv) v = u(rng);
    for (auto& v : av) v = u(rng);
    Tensor gamma = Tensor::from({4, 8}, gv);
    Tensor attention = Tensor::from({4, 4}, av);

    Tensor out = fuse(gamma, attention, blk, true);

    // oracle: AconC value path and the fused sum, all by hand
    auto p1 = blk.acon_v.p1.values();
    auto p2 = blk.acon_v.p2.values();
    auto beta = blk.acon_v.beta.values();
    for (int i = 0; i < 4; ++i)
        for (int p = 0; p < 8; ++p) {
            double acc = 0;
            for (int j = 0; j < 4; ++j) {
                double x = gv[static_cast<std::size_t>(j * 8 + p)];
                double d = (p1[static_cast<std::size_t>(j)] - p2[static_cast<std::size_t>(j)]) * x;
                double swish =
                    d / (1.0 + std::exp(-beta[static_cast<std::size_t>(j)] * d)) +
                    p2[static_cast<std::size_t>(j)] * x;
                acc += av[static_cast<std::size_t>(i * 4 + j)] * swish;
            }
            double expect = 0.7 * acc + gv[static_cast<std::size_t>(i * 8 + p)];
            CHECK(out.values()[static_cast<std::size_t>(i * 8 + p)] ==
                  doctest::Approx(expect).epsilon(1e-12));
        }
}

TEST_CASE("dropping the residual removes the gamma term") {
    ParamRegistry reg;
    CdaBlock blk = identity_cda(reg, 2);
    blk.alpha.values_mut()[0] = 1.0;
    Tensor gamma = Tensor::from({2, 2}, {1.0, 2.0, 3.0, 4.0});
    Tensor identity = Tensor::from({2, 2}, {1, 0, 0, 1});
    Tensor with = fuse(gamma, identity, blk, true);
    Tensor without = fuse(gamma, identity, blk, false);
    for (std::size_t i = 0; i < 4; ++i)
        CHECK(with.values()[i] - without.values()[i] ==
              doctest::Approx(gamma.values()[i]).epsilon(1e-12));
}

TEST_CASE("alpha=0 full model equals the baseline bitwise") {
    std::mt19937_64 rng(101);
    DatConfig full_cfg = tiny_config();
    DatConfig base_cfg = full_cfg;
    base_cfg.cda_enabled = false;
    base_cfg.cde_enabled = false;

    DragNet full(full_cfg, 42);
    DragNet base(base_cfg, 42);
    // learnable alphas initialize to 0 already; make it explicit
    for (auto& [name, t] : full.params().entries_mut())
        if (name.find(".alpha") != std::string::npos) t.values_mut()[0] = 0.0;

    for (int trial = 0; trial < 5; ++trial) {
        PointCloud cloud = random_cloud(32, rng);
        CHECK(full.predict(cloud) == base.predict(cloud));
    }
}

TEST_CASE("prediction is invariant to point permutations") {
    std::mt19937_64 rng(202);
    DragNet model(tiny_config(64), 7);
    PointCloud cloud = random_cloud(64, rng);
    const double base = model.predict(cloud);

    for (int trial = 0; trial < 5; ++trial) {
        PointCloud shuffled = cloud;
        std::shuffle(shuffled.points.begin(), shuffled.points.end(), rng);
        CHECK(std::abs(model.predict(shuffled) - base) <= 1e-9);
    }
}

TEST_CASE("a cloud of identical points still yields a finite output") {
    DragNet model(tiny_config(), 3);
    std::vector<Vec3> raw(32, Vec3{0.4, -0.2, 0.9});
    PointCloud degenerate = normalize_cloud(raw, PointCloud::Source::uniform_surface);
    double cd = model.predict(degenerate);
    CHECK(std::isfinite(cd));

    // the degenerate cloud also exercises the constant-contribution path
    auto salience = model.attention_salience(degenerate);
    for (double s : salience) CHECK(s == 0.0);
}

TEST_CASE("point count mismatches are rejected") {
    std::mt19937_64 rng(9);
    DragNet model(tiny_config(32), 1);
    PointCloud wrong = random_cloud(33, rng);
    CHECK_THROWS_WITH_AS(model.predict(wrong), doctest::Contains("PointCountMismatch"), Error);
}

TEST_CASE("salience is defined and in [0,1] for an untrained model") {
    std::mt19937_64 rng(303);
    DragNet model(tiny_config(), 11);
    PointCloud cloud = random_cloud(32, rng);
    auto salience = model.attention_salience(cloud);
    REQUIRE(salience.size() == 32);
    for (double s : salience) {
        CHECK(s >= 0.0);
        CHECK(s <= 1.0);
    }
    CHECK(*std::min_element(salience.begin(), salience.end()) == 0.0);
    CHECK(*std::max_element(salience.begin(), salience.end()) == 1.0);
}

TEST_CASE("baseline models refuse attention export") {
    DatConfig cfg = tiny_config();
    cfg.cda_enabled = false;
    DragNet model(cfg, 1);
    std::mt19937_64 rng(1);
    PointCloud cloud = random_cloud(32, rng);
    CHECK_THROWS_WITH_AS(model.attention_salience(cloud), doctest::Contains("ModelWithoutCda"),
                         Error);
}

TEST_CASE("model save/load reproduces predictions bitwise") {
    std::mt19937_64 rng(404);
    DragNet model(tiny_config(), 21);
    model.target_mean = 0.31;
    model.target_std = 0.07;
    PointCloud cloud = random_cloud(32, rng);
    const double before = model.predict(cloud);

    model.save("/tmp/aerodrag_model_test.bin");
    auto loaded = DragNet::load("/tmp/aerodrag_model_test.bin");
    CHECK(loaded->predict(cloud) == before);
    CHECK(loaded->config().points == 32);
    CHECK(loaded->target_mean == 0.31);
}

TEST_CASE("config JSON round trips") {
    DatConfig cfg = tiny_config();
    cfg.cde_enabled = false;
    cfg.dropout = 0.25;
    DatConfig back = DatConfig::from_json(cfg.to_json());
    CHECK(back.edgeconv_widths == cfg.edgeconv_widths);
    CHECK(back.cde_enabled == false);
    CHECK(back.dropout == 0.25);
    CHECK(back.points == cfg.points);
}
