#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "msnet/pnm.hpp"

namespace msnet {

struct SegmentationSample {
    Image3 image;  // 3 x S x S, values in [0, 1]
    BinMap mask;   // 1 x S x S, strictly binary
    std::string id;
};

enum class Difficulty { easy, medium, hard };

const char* to_string(Difficulty d);
Difficulty difficulty_from_string(const std::string& s);

// One synthetic sample: 1-3 smooth blobs (thresholded sums of low-frequency
// sinusoids) over a textured background, the foreground shifted in intensity
// by the difficulty's contrast (easy 0.4, medium 0.2, hard 0.1) plus
// Gaussian noise (sigma 0.02/0.05/0.08). The mask is the exact blob support
// with foreground fraction in [0.01, 0.6]. Identical arguments give
// identical samples.
SegmentationSample generate_sample(std::uint64_t seed, int size, Difficulty difficulty);

struct SplitRatios {
    double train = 0.8;
    double val = 0.1;
    double test = 0.1;
};

// Writes images/<id>.ppm, masks/<id>.pgm and manifest.txt ("<split> <id>"
// per line) under out_dir. Split sizes follow cumulative rounding of the
// ratios; per-sample seeds are derived from (seed, split, index) so splits
// are disjoint. Refuses a non-empty output directory unless force is set.
struct DatasetCounts {
    int train = 0;
    int val = 0;
    int test = 0;
};
DatasetCounts generate_dataset(const std::filesystem::path& out_dir, std::uint64_t seed, int n,
                               int size, Difficulty difficulty, SplitRatios ratios, bool force);

// Loads one split ("train", "val", "test") in manifest order.
std::vector<SegmentationSample> load_split(const std::filesystem::path& dataset_dir,
                                           const std::string& split);

// Deterministic primitives used by augment().
void hflip(SegmentationSample& sample);
// Rotation about the image center with nearest-neighbor resampling; the
// image clamps to its edge, the mask fills with background and stays binary.
void rotate_nearest(SegmentationSample& sample, double degrees);

// Horizontal flip with probability 0.5, then rotation by an angle uniform in
// [-15, 15] degrees.
void augment(SegmentationSample& sample, std::mt19937_64& rng);

// Nearest multiple of 32, ties rounding up (48 -> 64).
int snap_to_multiple_of_32(int side);

Image3 resize_bilinear(const Image3& image, int oh, int ow);
RealMap resize_bilinear(const RealMap& map, int oh, int ow);
BinMap resize_nearest(const BinMap& mask, int oh, int ow);

// Batch multi-scale step: sides scaled by `scale` and snapped to a multiple
// of 32; images resize bilinearly, masks with nearest neighbor.
void multiscale_resize(std::vector<SegmentationSample>& batch, double scale);

}  // namespace msnet
