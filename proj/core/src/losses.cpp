#include "msnet/losses.hpp"

#include <cmath>

#include "msnet/error.hpp"
#include "msnet/ops.hpp"

namespace msnet {

void LossConfig::validate() const {
    if (pool_k < 3 || pool_k % 2 == 0)
        fail(ErrorCategory::config, "pool_k must be an odd integer >= 3, got " + std::to_string(pool_k));
    if (lossnet_levels != 4)
        fail(ErrorCategory::config, "lossnet_levels is fixed at 4, got " + std::to_string(lossnet_levels));
    if (!(weight_gain >= 0.0)) fail(ErrorCategory::config, "weight_gain must be >= 0");
    if (!(eps > 0.0 && eps < 0.5)) fail(ErrorCategory::config, "eps must be in (0, 0.5)");
}

int pool_k_for_input(int input_size) {
    const double target = 31.0 * input_size / 352.0;
    const int lower = std::max(1, 2 * static_cast<int>((target - 1.0) / 2.0) + 1);
    // lower is the largest odd <= target (for target >= 1); pick the closer
    // of {lower, lower + 2}, ties rounding up
    const int upper = lower + 2;
    const int k = (target - lower < upper - target) ? lower : upper;
    return std::max(3, k);
}

LossNetParams LossNetParams::init(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const int widths[4] = {8, 16, 32, 64};
    LossNetParams p;
    int in_ch = 1;
    for (int s = 0; s < 4; ++s) {
        // He scale damped per stage: the root-sum-square feature distances
        // and their gradients grow with map size, and the raw He scale makes
        // the feature term drown the pixel losses during training.
        const double stddev = 0.25 * std::sqrt(2.0 / (static_cast<double>(in_ch) * 9));
        p.stages[s].weight = Tensor::randn({widths[s], in_ch, 3, 3}, rng, stddev);
        p.stages[s].bias = Tensor::zeros({widths[s]});
        in_ch = widths[s];
    }
    return p;
}

namespace {

void require_mask_shape(const Tensor& t, const char* op) {
    if (t.shape().size() != 4 || t.dim(1) != 1)
        fail(ErrorCategory::shape,
             std::string(op) + ": expected N x 1 x H x W map, got " + shape_str(t.shape()));
}

void require_binary(const Tensor& gt, const char* op) {
    for (double x : gt.values())
        if (x != 0.0 && x != 1.0)
            fail(ErrorCategory::numeric,
                 std::string(op) + ": ground truth must be binary, found " + std::to_string(x));
}

Tensor one_minus(const Tensor& t) { return add_scalar(mul_scalar(t, -1.0), 1.0); }

}  // namespace

Tensor pixel_weight_map(const Tensor& gt, const LossConfig& cfg) {
    require_mask_shape(gt, "pixel_weight_map");
    require_binary(gt, "pixel_weight_map");
    cfg.validate();
    Tensor pooled = avgpool_window(gt, cfg.pool_k);
    return add_scalar(mul_scalar(sub_abs(pooled, gt), cfg.weight_gain), 1.0);
}

Tensor weighted_bce(const Tensor& pred, const Tensor& gt, const LossConfig& cfg) {
    if (pred.shape() != gt.shape())
        fail(ErrorCategory::shape, "weighted_bce: shape mismatch " + shape_str(pred.shape()) +
                                       " vs " + shape_str(gt.shape()));
    Tensor w = pixel_weight_map(gt, cfg);
    Tensor p = clamp(pred, cfg.eps, 1.0 - cfg.eps);
    Tensor per_pixel = add(mul(gt, log(p)), mul(one_minus(gt), log(one_minus(p))));
    Tensor num = sum(mul(w, per_pixel));
    return mul_scalar(div(num, sum(w)), -1.0);
}

Tensor weighted_iou(const Tensor& pred, const Tensor& gt, const LossConfig& cfg) {
    if (pred.shape() != gt.shape())
        fail(ErrorCategory::shape, "weighted_iou: shape mismatch " + shape_str(pred.shape()) +
                                       " vs " + shape_str(gt.shape()));
    Tensor w = pixel_weight_map(gt, cfg);
    Tensor pg = mul(pred, gt);
    Tensor inter = sum(mul(w, pg));
    Tensor uni = sum(mul(w, sub(add(pred, gt), pg)));
    return one_minus(div(add_scalar(inter, 1.0), add_scalar(uni, 1.0)));
}

std::array<Tensor, 4> lossnet_features(const Tensor& map, const LossNetParams& params) {
    require_mask_shape(map, "lossnet_features");
    if (map.dim(2) % 16 != 0 || map.dim(3) % 16 != 0)
        fail(ErrorCategory::shape, "lossnet_features: spatial extents must be divisible by 16, got " +
                                       std::to_string(map.dim(2)) + "x" + std::to_string(map.dim(3)));
    std::array<Tensor, 4> features;
    Tensor x = map;
    for (int s = 0; s < 4; ++s) {
        x = maxpool2(relu(conv2d(x, params.stages[s].weight, params.stages[s].bias, 1, 1)));
        features[s] = x;
    }
    return features;
}

Tensor feature_loss(const Tensor& pred, const Tensor& gt, const LossNetParams& params) {
    if (pred.shape() != gt.shape())
        fail(ErrorCategory::shape, "feature_loss: shape mismatch " + shape_str(pred.shape()) +
                                       " vs " + shape_str(gt.shape()));
    auto fp = lossnet_features(pred, params);
    auto fg = lossnet_features(gt, params);
    Tensor total;
    for (int i = 0; i < 4; ++i) {
        Tensor d = sub(fp[i], fg[i]);
        Tensor level = sqrt_smoothed(sum(mul(d, d)));
        total = total.defined() ? add(total, level) : level;
    }
    return total;
}

TotalLoss total_loss(const Tensor& pred, const Tensor& gt, const LossNetParams* params,
                     const LossConfig& cfg, bool lossnet_enabled) {
    TotalLoss out;
    Tensor wiou = weighted_iou(pred, gt, cfg);
    Tensor wbce = weighted_bce(pred, gt, cfg);
    out.parts.wiou = wiou.item();
    out.parts.wbce = wbce.item();
    out.value = add(wiou, wbce);
    if (lossnet_enabled) {
        if (params == nullptr)
            fail(ErrorCategory::config, "total_loss: lossnet enabled but no LossNetParams given");
        Tensor lf = feature_loss(pred, gt, *params);
        out.parts.lf = lf.item();
        out.value = add(out.value, lf);
    }
    out.parts.total = out.value.item();
    return out;
}

}  // namespace msnet
