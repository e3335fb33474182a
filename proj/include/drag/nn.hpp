#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "drag/tensor.hpp"

namespace drag {

/// Ordered (name -> tensor) map covering learnable parameters and
/// persistent buffers (batchnorm running stats). Registration order is
/// the serialization order.
class ParamRegistry {
public:
    Tensor add(const std::string& name, Tensor t);
    Tensor* find(const std::string& name);
    const std::vector<std::pair<std::string, Tensor>>& entries() const { return entries_; }
    std::vector<std::pair<std::string, Tensor>>& entries_mut() { return entries_; }

    void zero_grads();

    /// Deep copy of all values (params + buffers), usable as a checkpoint.
    std::vector<std::vector<double>> snapshot_values() const;
    void restore_values(const std::vector<std::vector<double>>& snap);

    /// Binary format: magic "ADRGPRM1", version byte, u32 record count,
    /// then per record u16 name length + name + u8 rank + i64 dims +
    /// f64 values, all little-endian.
    void save_binary(const std::string& path) const;
    void load_binary(const std::string& path);

private:
    std::vector<std::pair<std::string, Tensor>> entries_;
};

/// Derives a per-parameter init seed from the model seed and the
/// parameter name, so models sharing a name share the init regardless of
/// which other parameters exist.
std::uint64_t param_seed(std::uint64_t model_seed, const std::string& name);

struct Linear {
    Tensor weight;  // (out, in)
    Tensor bias;    // (out) or undefined

    static Linear create(ParamRegistry& reg, const std::string& name, std::int64_t in,
                         std::int64_t out, bool with_bias, std::uint64_t model_seed);
    /// x is (in, N); returns (out, N).
    Tensor apply(const Tensor& x) const;
};

/// Per-channel normalization over the trailing axis of a (C, N) tensor.
/// Train mode uses the batch statistics of that axis and folds them into
/// the running stats (momentum 0.1) unless update_stats is false; eval
/// mode uses the running stats. Epsilon 1e-5.
struct BatchNorm {
    Tensor scale;         // learnable, init 1
    Tensor shift;         // learnable, init 0
    Tensor running_mean;  // buffer, init 0
    Tensor running_var;   // buffer, init 1
    double momentum = 0.1;
    double eps = 1e-5;

    static BatchNorm create(ParamRegistry& reg, const std::string& name, std::int64_t channels);
    Tensor apply(const Tensor& x, bool train, bool update_stats);
};

/// Learnable ACON-C parameter triple; init p1=1, p2=0, beta=1 (Swish).
struct AconParams {
    Tensor p1, p2, beta;

    static AconParams create(ParamRegistry& reg, const std::string& name, std::int64_t channels,
                             bool learnable);
    Tensor apply(const Tensor& x) const { return aconc(x, p1, p2, beta); }
};

/// Mean squared error between same-shape tensors, as a scalar tensor.
Tensor mse_loss(const Tensor& pred, const Tensor& target);

}  // namespace drag
