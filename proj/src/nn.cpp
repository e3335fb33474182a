#include "drag/nn.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "drag/error.hpp"

namespace drag {

namespace {
constexpr char kMagic[8] = {'A', 'D', 'R', 'G', 'P', 'R', 'M', '1'};
constexpr std::uint8_t kVersion = 1;
}  // namespace

Tensor ParamRegistry::add(const std::string& name, Tensor t) {
    if (find(name)) fail("DuplicateParam", "'" + name + "' registered twice");
    entries_.emplace_back(name, t);
    return t;
}

Tensor* ParamRegistry::find(const std::string& name) {
    for (auto& [n, t] : entries_)
        if (n == name) return &t;
    return nullptr;
}

void ParamRegistry::zero_grads() {
    for (auto& [n, t] : entries_) t.zero_grad();
}

std::vector<std::vector<double>> ParamRegistry::snapshot_values() const {
    std::vector<std::vector<double>> snap;
    snap.reserve(entries_.size());
    for (const auto& [n, t] : entries_)
        snap.emplace_back(t.values().begin(), t.values().end());
    return snap;
}

void ParamRegistry::restore_values(const std::vector<std::vector<double>>& snap) {
    if (snap.size() != entries_.size())
        fail("ShapeMismatch", "snapshot has " + std::to_string(snap.size()) +
                                  " entries, registry has " + std::to_string(entries_.size()));
    for (std::size_t i = 0; i < snap.size(); ++i) {
        auto vals = entries_[i].second.values_mut();
        if (snap[i].size() != vals.size())
            fail("ShapeMismatch", "snapshot entry '" + entries_[i].first + "' size mismatch");
        std::copy(snap[i].begin(), snap[i].end(), vals.begin());
    }
}

void ParamRegistry::save_binary(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail("IoError", "cannot open '" + path + "' for writing");
    out.write(kMagic, sizeof kMagic);
    out.put(static_cast<char>(kVersion));
    auto count = static_cast<std::uint32_t>(entries_.size());
    out.write(reinterpret_cast<const char*>(&count), 4);
    for (const auto& [name, t] : entries_) {
        auto len = static_cast<std::uint16_t>(name.size());
        out.write(reinterpret_cast<const char*>(&len), 2);
        out.write(name.data(), len);
        auto rank = static_cast<std::uint8_t>(t.shape().size());
        out.put(static_cast<char>(rank));
        for (std::int64_t d : t.shape()) out.write(reinterpret_cast<const char*>(&d), 8);
        out.write(reinterpret_cast<const char*>(t.values().data()),
                  static_cast<std::streamsize>(t.values().size() * sizeof(double)));
    }
    if (!out) fail("IoError", "short write to '" + path + "'");
}

void ParamRegistry::load_binary(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail("IoError", "cannot open '" + path + "'");
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kMagic, 8) != 0)
        fail("BadModelFile", "'" + path + "' is not a parameter file");
    int version = in.get();
    if (version != kVersion)
        fail("BadModelFile", "unsupported version " + std::to_string(version));
    std::uint32_t count = 0;
    in.read(reinterpret_cast<char*>(&count), 4);
    if (!in || count != entries_.size())
        fail("BadModelFile", "'" + path + "' holds " + std::to_string(count) +
                                 " records, model expects " + std::to_string(entries_.size()));
    for (auto& [name, t] : entries_) {
        std::uint16_t len = 0;
        in.read(reinterpret_cast<char*>(&len), 2);
        std::string fname(len, '\0');
        in.read(fname.data(), len);
        if (!in || fname != name)
            fail("BadModelFile", "expected record '" + name + "', found '" + fname + "'");
        int rank = in.get();
        Shape shape(static_cast<std::size_t>(rank));
        for (auto& d : shape) in.read(reinterpret_cast<char*>(&d), 8);
        if (!in || shape != t.shape())
            fail("BadModelFile", "record '" + name + "' shape " + shape_str(shape) +
                                     " != expected " + shape_str(t.shape()));
        auto vals = t.values_mut();
        in.read(reinterpret_cast<char*>(vals.data()),
                static_cast<std::streamsize>(vals.size() * sizeof(double)));
        if (!in) fail("BadModelFile", "'" + path + "' truncated in record '" + name + "'");
    }
}

std::uint64_t param_seed(std::uint64_t model_seed, const std::string& name) {
    // FNV-1a over the name, mixed with the model seed
    std::uint64_t h = 1469598103934665603ull;
    for (char c : name) {
        h ^= static_cast<std::uint8_t>(c);
        h *= 1099511628211ull;
    }
    h ^= model_seed * 0x9E3779B97F4A7C15ull;
    return h;
}

Linear Linear::create(ParamRegistry& reg, const std::string& name, std::int64_t in,
                      std::int64_t out, bool with_bias, std::uint64_t model_seed) {
    Linear lin;
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    lin.weight = reg.add(name + ".weight",
                         uniform_init({out, in}, bound, param_seed(model_seed, name + ".weight")));
    if (with_bias) lin.bias = reg.add(name + ".bias", Tensor::zeros({out}, true));
    return lin;
}

Tensor Linear::apply(const Tensor& x) const {
    Tensor y = matmul(weight, x);
    if (bias.defined()) {
        Tensor b = broadcast_to(reshape(bias, {bias.numel(), 1}), y.shape());
        y = add(y, b);
    }
    return y;
}

BatchNorm BatchNorm::create(ParamRegistry& reg, const std::string& name, std::int64_t channels) {
    BatchNorm bn;
    bn.scale = reg.add(name + ".scale", Tensor::full({channels}, 1.0, true));
    bn.shift = reg.add(name + ".shift", Tensor::zeros({channels}, true));
    bn.running_mean = reg.add(name + ".running_mean", Tensor::zeros({channels}, false));
    bn.running_var = reg.add(name + ".running_var", Tensor::full({channels}, 1.0, false));
    return bn;
}

Tensor BatchNorm::apply(const Tensor& x, bool train, bool update_stats) {
    const std::int64_t c = x.dim(0), n = x.dim(1);
    if (c != scale.numel())
        fail("ShapeMismatch", "batchnorm over " + std::to_string(scale.numel()) +
                                  " channels applied to " + shape_str(x.shape()));

    Tensor xhat;
    if (train) {
        Tensor mean = mean_reduce(x, 1, true);                       // (C,1)
        Tensor centered = sub(x, broadcast_to(mean, x.shape()));     // (C,N)
        Tensor var = mean_reduce(mul(centered, centered), 1, true);  // biased, (C,1)
        Tensor inv = divide(Tensor::full({c, 1}, 1.0), sqrt(scalar_add(var, eps)));
        xhat = mul(centered, broadcast_to(inv, x.shape()));

        if (update_stats) {
            auto rm = running_mean.values_mut();
            auto rv = running_var.values_mut();
            auto mv = mean.values();
            auto vv = var.values();
            for (std::int64_t i = 0; i < c; ++i) {
                rm[static_cast<std::size_t>(i)] =
                    (1.0 - momentum) * rm[static_cast<std::size_t>(i)] + momentum * mv[static_cast<std::size_t>(i)];
                rv[static_cast<std::size_t>(i)] =
                    (1.0 - momentum) * rv[static_cast<std::size_t>(i)] + momentum * vv[static_cast<std::size_t>(i)];
            }
        }
    } else {
        std::vector<double> inv_v(static_cast<std::size_t>(c)), mean_v(static_cast<std::size_t>(c));
        auto rm = running_mean.values();
        auto rv = running_var.values();
        for (std::int64_t i = 0; i < c; ++i) {
            mean_v[static_cast<std::size_t>(i)] = rm[static_cast<std::size_t>(i)];
            inv_v[static_cast<std::size_t>(i)] = 1.0 / std::sqrt(rv[static_cast<std::size_t>(i)] + eps);
        }
        Tensor mean = Tensor::from({c, 1}, std::move(mean_v));
        Tensor inv = Tensor::from({c, 1}, std::move(inv_v));
        xhat = mul(sub(x, broadcast_to(mean, x.shape())), broadcast_to(inv, x.shape()));
    }
    (void)n;
    Tensor s = broadcast_to(reshape(scale, {c, 1}), x.shape());
    Tensor b = broadcast_to(reshape(shift, {c, 1}), x.shape());
    return add(mul(s, xhat), b);
}

AconParams AconParams::create(ParamRegistry& reg, const std::string& name, std::int64_t channels,
                              bool learnable) {
    AconParams a;
    a.p1 = reg.add(name + ".p1", Tensor::full({channels}, 1.0, learnable));
    a.p2 = reg.add(name + ".p2", Tensor::zeros({channels}, learnable));
    a.beta = reg.add(name + ".beta", Tensor::full({channels}, 1.0, learnable));
    return a;
}

Tensor mse_loss(const Tensor& pred, const Tensor& target) {
    Tensor diff = sub(pred, target);
    Tensor sq = mul(diff, diff);
    Tensor flat = reshape(sq, {sq.numel()});
    return mean_reduce(flat, 0, false);
}

}  // namespace drag
