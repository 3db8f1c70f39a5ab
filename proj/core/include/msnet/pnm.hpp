#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace msnet {

// Grayscale map with double values in [0, 1], row-major.
struct RealMap {
    int h = 0;
    int w = 0;
    std::vector<double> v;

    double& at(int y, int x) { return v[static_cast<std::size_t>(y) * w + x]; }
    double at(int y, int x) const { return v[static_cast<std::size_t>(y) * w + x]; }
};

// Binary mask, values restricted to {0, 1}.
struct BinMap {
    int h = 0;
    int w = 0;
    std::vector<std::uint8_t> v;

    std::uint8_t& at(int y, int x) { return v[static_cast<std::size_t>(y) * w + x]; }
    std::uint8_t at(int y, int x) const { return v[static_cast<std::size_t>(y) * w + x]; }
};

// RGB image, planar 3 x h x w layout, values in [0, 1].
struct Image3 {
    int h = 0;
    int w = 0;
    std::vector<double> v;

    double& at(int c, int y, int x) {
        return v[(static_cast<std::size_t>(c) * h + y) * w + x];
    }
    double at(int c, int y, int x) const {
        return v[(static_cast<std::size_t>(c) * h + y) * w + x];
    }
};

// Binary PPM (P6, maxval 255). Values are quantized with round-to-nearest.
void write_ppm(const std::filesystem::path& path, const Image3& image);
Image3 read_ppm(const std::filesystem::path& path);

// Binary PGM (P5, maxval 255).
void write_pgm(const std::filesystem::path& path, const RealMap& map);   // quantized x255
void write_pgm(const std::filesystem::path& path, const BinMap& mask);   // {0, 255}
RealMap read_pgm(const std::filesystem::path& path);                     // normalized /255
BinMap read_mask(const std::filesystem::path& path);                     // binarized at >= 128

}  // namespace msnet
