// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "lstnet/baselines.hpp"
#include "lstnet/data.hpp"
#include "lstnet/model.hpp"
#include "lstnet/tensor.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace lstnet {

/// Binary model container, all integers and doubles little-endian.
/// Layout (bytes):
///   0   8   magic "LSTNETCK"
///   8   4   u32 format version (currently 1)
///   12  4   u32 kind: 0 neural, 1 VAR-ridge, 2 univariate-AR
///   16  8   u64 dataset variable count n
///   24  8   u64 rng seed
///   32  4   u32 normalization mode: 0 none, 1 per-variable max
///   36  8n  f64 per-variable scale factors
///   ..  4+L u32 config text length, then L bytes of flat dotted-key text
///   ..  4   u32 parameter count P, then P records:
///             u32 name length, name bytes,
///             u32 rank, u64 extents[rank],
///             f64 values[prod(extents)]
enum class CheckpointKind : std::uint32_t {
    neural = 0,
    var_ridge = 1,
    univariate_ar = 2,
};

struct NamedArray {
    std::string name;
    Shape shape;
    std::vector<double> values;
};

struct Checkpoint {
    std::uint32_t version = 1;
    CheckpointKind kind = CheckpointKind::neural;
    std::uint64_t n_vars = 0;
    std::uint64_t seed = 0;
    NormalizeMode normalize_mode = NormalizeMode::none;
    std::vector<double> scale_factors;
    std::string config_text; // flat dotted keys, one `key = value` per line
    std::vector<NamedArray> params;
};

/// Atomic write (temp file then rename).
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

Checkpoint make_checkpoint(const LstNetModel& model,
                           const TimeSeriesDataset& dataset);
Checkpoint make_checkpoint(const VarRidgeModel& model,
                           const TimeSeriesDataset& dataset,
                           std::uint64_t seed);
Checkpoint make_checkpoint(const UnivariateArModel& model,
                           const TimeSeriesDataset& dataset,
                           std::uint64_t seed);

/// Rebuilds the kind-appropriate forecaster. For neural checkpoints the
/// model is reconstructed from the stored config and parameter arrays.
LstNetModel restore_neural(const Checkpoint& ckpt);
VarRidgeModel restore_var_ridge(const Checkpoint& ckpt);
UnivariateArModel restore_univariate_ar(const Checkpoint& ckpt);

/// Serializes a model config as the checkpoint's dotted-key text.
std::string model_config_text(const LstNetConfig& config);
LstNetConfig model_config_from_text(const std::string& text);

} // namespace lstnet
