#pragma once

#include <array>
#include <cstdint>

#include "msnet/model.hpp"
#include "msnet/tensor.hpp"

namespace msnet {

struct LossConfig {
    double weight_gain = 5.0;  // boundary emphasis of the pixel weight map
    int pool_k = 5;            // odd window of the weight-map pooling
    std::uint64_t lossnet_seed = 7;
    int lossnet_levels = 4;    // fixed: the feature loss sums four levels
    double eps = 1e-7;         // clamp for the BCE logs

    void validate() const;
};

// Nearest odd integer to 31 * input_size / 352, floored at 3. Keeps the
// boundary band of the weight map proportional to the input resolution
// (ties between two odd candidates round up).
int pool_k_for_input(int input_size);

// Frozen four-stage feature extractor: per stage conv3x3 (stride 1, padding
// 1) + relu + maxpool2, widths 8/16/32/64, single-channel input. Weights are
// drawn once from the seed and never updated; gradients flow through to the
// inputs only.
struct LossNetParams {
    std::array<ConvParam, 4> stages;

    static LossNetParams init(std::uint64_t seed);
};

// w = 1 + weight_gain * |avgpool_window(gt, pool_k) - gt|. gt must be a
// binary N x 1 x H x W map; entries lie in [1, 1 + weight_gain] and exceed 1
// only near mask boundaries.
Tensor pixel_weight_map(const Tensor& gt, const LossConfig& cfg);

// -sum(w * (g log p + (1-g) log(1-p))) / sum(w), with p clamped to
// [eps, 1-eps] before the logs.
Tensor weighted_bce(const Tensor& pred, const Tensor& gt, const LossConfig& cfg);

// 1 - (sum(w*p*g) + 1) / (sum(w*(p + g - p*g)) + 1).
Tensor weighted_iou(const Tensor& pred, const Tensor& gt, const LossConfig& cfg);

// Outputs of the four frozen stages; level i has spatial extent H / 2^i.
// Requires H and W divisible by 16.
std::array<Tensor, 4> lossnet_features(const Tensor& map, const LossNetParams& params);

// sum over levels of ||F_pred - F_gt||_2 (root of the summed squared
// differences per level). Exactly zero at equality; the derivative at zero
// distance is kept finite by a 1e-12 term under the square root in the
// backward pass only.
Tensor feature_loss(const Tensor& pred, const Tensor& gt, const LossNetParams& params);

struct LossBreakdown {
    double wbce = 0.0;
    double wiou = 0.0;
    double lf = 0.0;
    double total = 0.0;
};

struct TotalLoss {
    Tensor value;  // scalar, differentiable
    LossBreakdown parts;
};

// wiou + wbce (+ feature loss when lossnet_enabled). params may be null when
// lossnet_enabled is false.
TotalLoss total_loss(const Tensor& pred, const Tensor& gt, const LossNetParams* params,
                     const LossConfig& cfg, bool lossnet_enabled);

}  // namespace msnet
