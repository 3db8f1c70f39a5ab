#include "msnet/model.hpp"

#include <cmath>

#include "msnet/error.hpp"
#include "msnet/ops.hpp"

namespace msnet {

const char* to_string(FusionMode mode) {
    return mode == FusionMode::subtract ? "subtract" : "add";
}

FusionMode fusion_mode_from_string(const std::string& s) {
    if (s == "subtract") return FusionMode::subtract;
    if (s == "add") return FusionMode::add;
    fail(ErrorCategory::config, "unknown fusion mode '" + s + "' (expected subtract or add)");
}

void ModelConfig::validate() const {
    if (input_size <= 0 || input_size % 32 != 0)
        fail(ErrorCategory::config,
             "input_size must be a positive multiple of 32, got " + std::to_string(input_size));
    if (channels <= 0) fail(ErrorCategory::config, "channels must be positive");
    if (pyramid_depth < 1 || pyramid_depth > 5)
        fail(ErrorCategory::config,
             "pyramid_depth must be in 1..5, got " + std::to_string(pyramid_depth));
}

std::array<int, 5> encoder_widths(int channels) {
    return {channels, channels, 2 * channels, 2 * channels, 4 * channels};
}

namespace {

ConvParam make_conv(int out_ch, int in_ch, int k, std::mt19937_64& rng) {
    const double stddev = std::sqrt(2.0 / (static_cast<double>(in_ch) * k * k));
    return ConvParam{Tensor::randn({out_ch, in_ch, k, k}, rng, stddev, /*requires_grad=*/true),
                     Tensor::zeros({out_ch}, /*requires_grad=*/true)};
}

Tensor conv_relu(const Tensor& x, const ConvParam& p) {
    return relu(conv2d(x, p.weight, p.bias, /*stride=*/1, /*padding=*/1));
}

}  // namespace

ModelParams init_params(const ModelConfig& config) {
    config.validate();
    std::mt19937_64 rng(config.seed);
    const int c = config.channels;
    const auto widths = encoder_widths(c);

    ModelParams p;
    p.config = config;
    int in_ch = 3;
    for (int s = 0; s < 5; ++s) {
        p.encoder[s][0] = make_conv(widths[s], in_ch, 3, rng);
        p.encoder[s][1] = make_conv(widths[s], widths[s], 3, rng);
        in_ch = widths[s];
    }
    for (int s = 0; s < 5; ++s) p.reducers[s] = make_conv(c, widths[s], 3, rng);
    for (int col = 2; col <= config.pyramid_depth; ++col) {
        std::vector<ConvParam> column;
        for (int level = 1; level + col - 1 <= 5; ++level) column.push_back(make_conv(c, c, 3, rng));
        p.su.push_back(std::move(column));
    }
    for (int s = 0; s < 5; ++s) p.aggregate[s] = make_conv(c, c, 3, rng);
    for (int s = 0; s < 4; ++s) p.decoder[s] = make_conv(c, c, 3, rng);
    p.head = make_conv(1, c, 1, rng);
    return p;
}

std::vector<std::pair<std::string, Tensor>> ModelParams::named_tensors() const {
    std::vector<std::pair<std::string, Tensor>> out;
    auto push = [&out](const std::string& name, const ConvParam& conv) {
        out.emplace_back(name + ".w", conv.weight);
        out.emplace_back(name + ".b", conv.bias);
    };
    for (int s = 0; s < 5; ++s) {
        push("encoder" + std::to_string(s + 1) + ".a", encoder[s][0]);
        push("encoder" + std::to_string(s + 1) + ".b", encoder[s][1]);
    }
    for (int s = 0; s < 5; ++s) push("reduce" + std::to_string(s + 1), reducers[s]);
    for (std::size_t col = 0; col < su.size(); ++col)
        for (std::size_t lvl = 0; lvl < su[col].size(); ++lvl)
            push("su" + std::to_string(col + 2) + "." + std::to_string(lvl + 1), su[col][lvl]);
    for (int s = 0; s < 5; ++s) push("ce" + std::to_string(s + 1), aggregate[s]);
    for (int s = 0; s < 4; ++s) push("decode" + std::to_string(s + 1), decoder[s]);
    push("head", head);
    return out;
}

std::vector<Tensor> ModelParams::backbone_group() const {
    std::vector<Tensor> out;
    for (const auto& stage : encoder)
        for (const auto& conv : stage) {
            out.push_back(conv.weight);
            out.push_back(conv.bias);
        }
    return out;
}

std::vector<Tensor> ModelParams::head_group() const {
    std::vector<Tensor> out;
    const std::size_t backbone = backbone_group().size();
    auto all = named_tensors();
    for (std::size_t i = backbone; i < all.size(); ++i) out.push_back(all[i].second);
    return out;
}

std::int64_t ModelParams::parameter_count() const {
    std::int64_t n = 0;
    for (const auto& [name, t] : named_tensors()) n += t.numel();
    return n;
}

void ModelParams::zero_grad() const {
    for (const auto& [name, t] : named_tensors()) const_cast<Tensor&>(t).zero_grad();
}

void ModelParams::freeze() const {
    for (const auto& [name, t] : named_tensors()) const_cast<Tensor&>(t).set_requires_grad(false);
}

FeaturePyramid encode(const Tensor& image, const ModelParams& params) {
    if (image.shape().size() != 4 || image.dim(1) != 3)
        fail(ErrorCategory::shape, "encode: expected N x 3 x S x S image, got " + shape_str(image.shape()));
    const int s = image.dim(2);
    if (image.dim(3) != s || s <= 0 || s % 32 != 0)
        fail(ErrorCategory::shape,
             "encode: spatial size must be a square multiple of 32, got " +
                 std::to_string(image.dim(2)) + "x" + std::to_string(image.dim(3)));
    FeaturePyramid levels;
    Tensor x = image;
    for (int stage = 0; stage < 5; ++stage) {
        x = conv_relu(x, params.encoder[stage][0]);
        x = conv_relu(x, params.encoder[stage][1]);
        x = maxpool2(x);
        levels[stage] = x;
    }
    return levels;
}

FeaturePyramid reduce_channels(const FeaturePyramid& pyramid, const ModelParams& params) {
    FeaturePyramid reduced;
    for (int i = 0; i < 5; ++i) reduced[i] = conv_relu(pyramid[i], params.reducers[i]);
    return reduced;
}

Tensor subtraction_unit(const Tensor& a, const Tensor& b, const ConvParam& conv, FusionMode mode) {
    Tensor fused = mode == FusionMode::subtract ? sub_abs(a, b) : add(a, b);
    return conv_relu(fused, conv);
}

MsGrid build_ms_grid(const FeaturePyramid& reduced, const ModelParams& params) {
    const int depth = params.config.pyramid_depth;
    MsGrid grid(5);
    for (int i = 0; i < 5; ++i) grid[i].push_back(reduced[i]);
    for (int n = 1; n < depth; ++n) {
        // entry (level i, order n+1) exists while i + n <= 5 (1-based levels)
        for (int i = 0; i + n < 5; ++i) {
            const Tensor& fine = grid[i][static_cast<std::size_t>(n) - 1];
            const Tensor& coarse = grid[i + 1][static_cast<std::size_t>(n) - 1];
            grid[i].push_back(subtraction_unit(fine, upsample2(coarse),
                                               params.su[static_cast<std::size_t>(n) - 1][i],
                                               params.config.fusion_mode));
        }
    }
    return grid;
}

std::array<Tensor, 5> complementarity_enhance(const MsGrid& grid, const ModelParams& params) {
    std::array<Tensor, 5> ce;
    for (int i = 0; i < 5; ++i) {
        Tensor acc = grid[i][0];
        for (std::size_t n = 1; n < grid[i].size(); ++n) acc = add(acc, grid[i][n]);
        ce[i] = conv_relu(acc, params.aggregate[i]);
    }
    return ce;
}

Tensor decode(const std::array<Tensor, 5>& ce, const ModelParams& params) {
    Tensor d = ce[4];
    for (int i = 3; i >= 0; --i) d = conv_relu(add(ce[i], upsample2(d)), params.decoder[i]);
    Tensor logits = conv2d(d, params.head.weight, params.head.bias, /*stride=*/1, /*padding=*/0);
    return upsample2(logits);
}

Tensor forward(const Tensor& image, const ModelParams& params) {
    return sigmoid(decode(
        complementarity_enhance(build_ms_grid(reduce_channels(encode(image, params), params), params),
                                params),
        params));
}

ForwardTrace forward_trace(const Tensor& image, const ModelParams& params) {
    ForwardTrace trace;
    trace.pyramid = encode(image, params);
    trace.reduced = reduce_channels(trace.pyramid, params);
    trace.grid = build_ms_grid(trace.reduced, params);
    trace.ce = complementarity_enhance(trace.grid, params);
    trace.logits = decode(trace.ce, params);
    trace.prediction = sigmoid(trace.logits);
    return trace;
}

}  // namespace msnet
