#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "msnet/tensor.hpp"

namespace msnet {

enum class FusionMode { subtract, add };

const char* to_string(FusionMode mode);
FusionMode fusion_mode_from_string(const std::string& s);

// Architectural hyperparameters. Defaults are the desk-scale configuration;
// the reference-scale values (input 352, 64 channels) are legal too.
struct ModelConfig {
    int input_size = 64;     // H == W, multiple of 32
    int channels = 16;       // width after channel reduction
    int pyramid_depth = 5;   // highest subtraction order kept, 1..5
    FusionMode fusion_mode = FusionMode::subtract;
    bool lossnet_enabled = true;
    std::uint64_t seed = 1;

    void validate() const;
};

struct ConvParam {
    Tensor weight;
    Tensor bias;
};

// Stage output widths of the encoder: channels * {1, 1, 2, 2, 4}.
std::array<int, 5> encoder_widths(int channels);

// All trainable tensors. The flat order of named_tensors() is the checkpoint
// serialization order: encoder stages 1..5 (conv_a.w, conv_a.b, conv_b.w,
// conv_b.b), reducers 1..5, subtraction-unit convs by column 2..depth (level
// ascending within a column), aggregation convs 1..5, decoder convs 1..4,
// head conv.
struct ModelParams {
    ModelConfig config;
    std::array<std::array<ConvParam, 2>, 5> encoder;
    std::array<ConvParam, 5> reducers;
    std::vector<std::vector<ConvParam>> su;  // su[col-2][level-1], col = 2..pyramid_depth
    std::array<ConvParam, 5> aggregate;
    std::array<ConvParam, 4> decoder;
    ConvParam head;

    std::vector<std::pair<std::string, Tensor>> named_tensors() const;
    std::vector<Tensor> backbone_group() const;  // encoder stages
    std::vector<Tensor> head_group() const;      // everything else
    std::int64_t parameter_count() const;
    void zero_grad() const;
    void freeze() const;  // drop requires_grad on every tensor
};

// He fan-in initialization from a PRNG seeded with config.seed; biases zero.
ModelParams init_params(const ModelConfig& config);

using FeaturePyramid = std::array<Tensor, 5>;
using MsGrid = std::vector<std::vector<Tensor>>;  // grid[level-1][order-1]

// Five-stage encoder: per stage, conv3x3 + relu, conv3x3 + relu, maxpool2.
// Accepts any square input whose side is a positive multiple of 32.
FeaturePyramid encode(const Tensor& image, const ModelParams& params);

// Per-level conv3x3 + relu mapping every pyramid level to config.channels.
FeaturePyramid reduce_channels(const FeaturePyramid& pyramid, const ModelParams& params);

// conv3x3 + relu over |a - b| (subtract mode) or (a + b) (add mode).
Tensor subtraction_unit(const Tensor& a, const Tensor& b, const ConvParam& conv, FusionMode mode);

// Triangular grid of difference features: row i starts from the reduced
// level i and gains one higher-order entry per column up to the configured
// depth, each produced from the previous column of this level and the
// upsampled previous column of the next-coarser level.
MsGrid build_ms_grid(const FeaturePyramid& reduced, const ModelParams& params);

// Per-level conv3x3 + relu over the sum of all grid entries of that level.
std::array<Tensor, 5> complementarity_enhance(const MsGrid& grid, const ModelParams& params);

// Top-down decoder: D5 = CE5, D_i = conv3x3+relu(CE_i + up(D_{i+1})),
// logits = up(conv1x1(D1)) at full input resolution.
Tensor decode(const std::array<Tensor, 5>& ce, const ModelParams& params);

// sigmoid(decode(...)) over the whole pipeline.
Tensor forward(const Tensor& image, const ModelParams& params);

struct ForwardTrace {
    FeaturePyramid pyramid;
    FeaturePyramid reduced;
    MsGrid grid;
    std::array<Tensor, 5> ce;
    Tensor logits;
    Tensor prediction;
};

ForwardTrace forward_trace(const Tensor& image, const ModelParams& params);

}  // namespace msnet
