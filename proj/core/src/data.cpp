#include "msnet/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>

#include "msnet/error.hpp"

namespace msnet {

const char* to_string(Difficulty d) {
    switch (d) {
        case Difficulty::easy: return "easy";
        case Difficulty::medium: return "medium";
        case Difficulty::hard: return "hard";
    }
    return "unknown";
}

Difficulty difficulty_from_string(const std::string& s) {
    if (s == "easy") return Difficulty::easy;
    if (s == "medium") return Difficulty::medium;
    if (s == "hard") return Difficulty::hard;
    fail(ErrorCategory::config, "unknown difficulty '" + s + "' (expected easy, medium or hard)");
}

namespace {

constexpr double kTau = 2.0 * std::numbers::pi;

struct SinusoidField {
    struct Term {
        double fx, fy, phase, amp;
    };
    std::vector<Term> terms;

    static SinusoidField random(std::mt19937_64& rng, int n_terms, double f_lo, double f_hi,
                                double amp) {
        std::uniform_real_distribution<double> freq(f_lo, f_hi);
        std::uniform_real_distribution<double> phase(0.0, kTau);
        std::uniform_real_distribution<double> sign(-1.0, 1.0);
        SinusoidField f;
        for (int i = 0; i < n_terms; ++i) {
            const double a = amp * (0.5 + 0.5 * std::fabs(sign(rng)));
            f.terms.push_back({freq(rng) * (sign(rng) < 0 ? -1.0 : 1.0),
                               freq(rng) * (sign(rng) < 0 ? -1.0 : 1.0), phase(rng), a});
        }
        return f;
    }

    double at(double x, double y) const {
        double acc = 0.0;
        for (const auto& t : terms) acc += t.amp * std::sin(kTau * (t.fx * x + t.fy * y) + t.phase);
        return acc;
    }
};

// 4-connected component labels (0 = background), sizes indexed by label - 1.
std::vector<int> label_components(const BinMap& mask, std::vector<std::int64_t>& sizes) {
    std::vector<int> labels(mask.v.size(), 0);
    sizes.clear();
    std::vector<std::pair<int, int>> stack;
    for (int sy = 0; sy < mask.h; ++sy) {
        for (int sx = 0; sx < mask.w; ++sx) {
            const std::size_t si = static_cast<std::size_t>(sy) * mask.w + sx;
            if (!mask.v[si] || labels[si]) continue;
            const int label = static_cast<int>(sizes.size()) + 1;
            sizes.push_back(0);
            stack.emplace_back(sy, sx);
            labels[si] = label;
            while (!stack.empty()) {
                const auto [y, x] = stack.back();
                stack.pop_back();
                ++sizes[static_cast<std::size_t>(label) - 1];
                const int ny[4] = {y - 1, y + 1, y, y};
                const int nx[4] = {x, x, x - 1, x + 1};
                for (int k = 0; k < 4; ++k) {
                    if (ny[k] < 0 || ny[k] >= mask.h || nx[k] < 0 || nx[k] >= mask.w) continue;
                    const std::size_t ni = static_cast<std::size_t>(ny[k]) * mask.w + nx[k];
                    if (!mask.v[ni] || labels[ni]) continue;
                    labels[ni] = label;
                    stack.emplace_back(ny[k], nx[k]);
                }
            }
        }
    }
    return labels;
}

// Keeps the `keep` largest components, erasing the rest. Ties resolve to the
// earlier label so the result is deterministic.
int keep_largest_components(BinMap& mask, int keep) {
    std::vector<std::int64_t> sizes;
    const std::vector<int> labels = label_components(mask, sizes);
    const int found = static_cast<int>(sizes.size());
    if (found <= keep) return found;
    std::vector<int> order(sizes.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i) + 1;
    std::stable_sort(order.begin(), order.end(),
                     [&sizes](int a, int b) { return sizes[a - 1] > sizes[b - 1]; });
    std::vector<std::uint8_t> kept(sizes.size() + 1, 0);
    for (int i = 0; i < keep; ++i) kept[static_cast<std::size_t>(order[i])] = 1;
    for (std::size_t i = 0; i < mask.v.size(); ++i)
        if (mask.v[i] && !kept[static_cast<std::size_t>(labels[i])]) mask.v[i] = 0;
    return keep;
}

struct DifficultyParams {
    double contrast;
    double noise_sigma;
};

DifficultyParams params_for(Difficulty d) {
    switch (d) {
        case Difficulty::easy: return {0.4, 0.02};
        case Difficulty::medium: return {0.2, 0.05};
        case Difficulty::hard: return {0.1, 0.08};
    }
    return {0.4, 0.02};
}

}  // namespace

SegmentationSample generate_sample(std::uint64_t seed, int size, Difficulty difficulty) {
    if (size <= 0 || size % 32 != 0)
        fail(ErrorCategory::config, "sample size must be a positive multiple of 32, got " +
                                        std::to_string(size));
    std::mt19937_64 rng(seed);
    const DifficultyParams dp = params_for(difficulty);

    SegmentationSample sample;
    sample.mask = BinMap{size, size, std::vector<std::uint8_t>(static_cast<std::size_t>(size) * size, 0)};

    // Threshold a low-frequency field at the quantile matching a target
    // foreground fraction, keep the 1..3 largest blobs, and retry on the
    // rare draw whose surviving support is too small.
    std::uniform_real_distribution<double> frac_dist(0.08, 0.35);
    std::uniform_int_distribution<int> blob_dist(1, 3);
    std::vector<double> field(sample.mask.v.size());
    for (int attempt = 0; attempt < 64; ++attempt) {
        const SinusoidField f = SinusoidField::random(rng, 5, 0.6, 2.2, 1.0);
        for (int y = 0; y < size; ++y)
            for (int x = 0; x < size; ++x)
                field[static_cast<std::size_t>(y) * size + x] =
                    f.at((x + 0.5) / size, (y + 0.5) / size);
        const double target_frac = frac_dist(rng);
        const int target_blobs = blob_dist(rng);
        std::vector<double> sorted = field;
        const std::size_t cut = static_cast<std::size_t>(
            std::min<double>(sorted.size() - 1.0, (1.0 - target_frac) * sorted.size()));
        std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(cut), sorted.end());
        const double tau = sorted[cut];
        for (std::size_t i = 0; i < field.size(); ++i) sample.mask.v[i] = field[i] > tau ? 1 : 0;

        keep_largest_components(sample.mask, target_blobs);
        const double frac = static_cast<double>(std::count(sample.mask.v.begin(),
                                                           sample.mask.v.end(), 1)) /
                            static_cast<double>(sample.mask.v.size());
        if (frac >= 0.01 && frac <= 0.6) break;
    }

    // Textured background plus a contrast-shifted foreground and pixel noise.
    sample.image = Image3{size, size, std::vector<double>(static_cast<std::size_t>(3) * size * size)};
    std::uniform_real_distribution<double> base_dist(0.2, 0.42);
    std::uniform_real_distribution<double> jitter_dist(0.0, 0.1);
    std::normal_distribution<double> noise(0.0, dp.noise_sigma);
    for (int c = 0; c < 3; ++c) {
        const double base = base_dist(rng);
        const double shift = dp.contrast * (1.0 + jitter_dist(rng));
        const SinusoidField texture = SinusoidField::random(rng, 3, 1.0, 6.0, 0.015);
        for (int y = 0; y < size; ++y) {
            for (int x = 0; x < size; ++x) {
                double v = base + texture.at((x + 0.5) / size, (y + 0.5) / size);
                if (sample.mask.at(y, x)) v += shift;
                v += noise(rng);
                sample.image.at(c, y, x) = std::min(1.0, std::max(0.0, v));
            }
        }
    }
    return sample;
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

}  // namespace

DatasetCounts generate_dataset(const std::filesystem::path& out_dir, std::uint64_t seed, int n,
                               int size, Difficulty difficulty, SplitRatios ratios, bool force) {
    namespace fs = std::filesystem;
    const double ratio_sum = ratios.train + ratios.val + ratios.test;
    if (std::fabs(ratio_sum - 1.0) > 1e-9)
        fail(ErrorCategory::config, "split ratios must sum to 1, got " + std::to_string(ratio_sum));
    if (n <= 0) fail(ErrorCategory::config, "dataset size must be positive");

    if (fs::exists(out_dir) && !fs::is_empty(out_dir) && !force)
        fail(ErrorCategory::state,
             "output directory " + out_dir.string() + " is not empty (use --force to overwrite)");
    fs::create_directories(out_dir / "images");
    fs::create_directories(out_dir / "masks");

    // cumulative rounding keeps the totals exact
    const int n_train = static_cast<int>(std::llround(ratios.train * n));
    const int n_val = static_cast<int>(std::llround((ratios.train + ratios.val) * n)) - n_train;
    const int n_test = n - n_train - n_val;
    const struct {
        const char* name;
        int count;
        std::uint64_t salt;
    } splits[3] = {{"train", n_train, 1}, {"val", n_val, 2}, {"test", n_test, 3}};

    std::ofstream manifest(out_dir / "manifest.txt", std::ios::trunc);
    if (!manifest) fail(ErrorCategory::io, "cannot write " + (out_dir / "manifest.txt").string());
    for (const auto& split : splits) {
        for (int i = 0; i < split.count; ++i) {
            char id[32];
            std::snprintf(id, sizeof(id), "%s_%04d", split.name, i);
            const std::uint64_t sample_seed = splitmix64(seed ^ splitmix64(split.salt * 0x10001ULL + i));
            SegmentationSample sample = generate_sample(sample_seed, size, difficulty);
            sample.id = id;
            write_ppm(out_dir / "images" / (sample.id + ".ppm"), sample.image);
            write_pgm(out_dir / "masks" / (sample.id + ".pgm"), sample.mask);
            manifest << split.name << ' ' << sample.id << '\n';
        }
    }
    manifest.flush();
    if (!manifest) fail(ErrorCategory::io, "short write to manifest");
    return {n_train, n_val, n_test};
}

std::vector<SegmentationSample> load_split(const std::filesystem::path& dataset_dir,
                                           const std::string& split) {
    const auto manifest_path = dataset_dir / "manifest.txt";
    std::ifstream manifest(manifest_path);
    if (!manifest) fail(ErrorCategory::io, "cannot open " + manifest_path.string());
    std::vector<SegmentationSample> samples;
    std::string line_split, id;
    while (manifest >> line_split >> id) {
        if (line_split != split) continue;
        SegmentationSample s;
        s.id = id;
        s.image = read_ppm(dataset_dir / "images" / (id + ".ppm"));
        s.mask = read_mask(dataset_dir / "masks" / (id + ".pgm"));
        if (s.image.h != s.mask.h || s.image.w != s.mask.w)
            fail(ErrorCategory::shape, "image/mask size mismatch for id " + id);
        samples.push_back(std::move(s));
    }
    if (samples.empty())
        fail(ErrorCategory::io, "split '" + split + "' has no samples in " + manifest_path.string());
    return samples;
}

void hflip(SegmentationSample& sample) {
    const int h = sample.image.h, w = sample.image.w;
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w / 2; ++x)
                std::swap(sample.image.at(c, y, x), sample.image.at(c, y, w - 1 - x));
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w / 2; ++x)
            std::swap(sample.mask.at(y, x), sample.mask.at(y, w - 1 - x));
}

void rotate_nearest(SegmentationSample& sample, double degrees) {
    const int h = sample.image.h, w = sample.image.w;
    const double rad = degrees * std::numbers::pi / 180.0;
    const double c = std::cos(rad), s = std::sin(rad);
    const double cy = h / 2.0, cx = w / 2.0;

    Image3 image{h, w, std::vector<double>(sample.image.v.size())};
    BinMap mask{h, w, std::vector<std::uint8_t>(sample.mask.v.size())};
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            // inverse mapping: rotate the destination pixel center back
            const double dx = (x + 0.5) - cx;
            const double dy = (y + 0.5) - cy;
            const double sx = c * dx + s * dy + cx - 0.5;
            const double sy = -s * dx + c * dy + cy - 0.5;
            const int ix = static_cast<int>(std::llround(sx));
            const int iy = static_cast<int>(std::llround(sy));
            const bool inside = ix >= 0 && ix < w && iy >= 0 && iy < h;
            const int px = std::min(w - 1, std::max(0, ix));
            const int py = std::min(h - 1, std::max(0, iy));
            for (int ch = 0; ch < 3; ++ch) image.at(ch, y, x) = sample.image.at(ch, py, px);
            mask.at(y, x) = inside && sample.mask.at(iy, ix) ? 1 : 0;
        }
    }
    sample.image = std::move(image);
    sample.mask = std::move(mask);
}

void augment(SegmentationSample& sample, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_real_distribution<double> angle(-15.0, 15.0);
    if (unit(rng) < 0.5) hflip(sample);
    rotate_nearest(sample, angle(rng));
}

int snap_to_multiple_of_32(int side) {
    const int k = (side * 2 + 32) / 64;  // floor(side/32 + 0.5) for side >= 0
    return std::max(32, 32 * k);
}

namespace {

template <typename Plane>
void bilinear_plane(const Plane& in, Plane& out, int sh, int sw, int oh, int ow,
                    std::size_t in_off, std::size_t out_off) {
    for (int y = 0; y < oh; ++y) {
        const double sy = (y + 0.5) * sh / oh - 0.5;
        const int y0 = static_cast<int>(std::floor(sy));
        const double fy = sy - y0;
        const int ya = std::min(sh - 1, std::max(0, y0));
        const int yb = std::min(sh - 1, std::max(0, y0 + 1));
        for (int x = 0; x < ow; ++x) {
            const double sx = (x + 0.5) * sw / ow - 0.5;
            const int x0 = static_cast<int>(std::floor(sx));
            const double fx = sx - x0;
            const int xa = std::min(sw - 1, std::max(0, x0));
            const int xb = std::min(sw - 1, std::max(0, x0 + 1));
            const double v00 = in[in_off + static_cast<std::size_t>(ya) * sw + xa];
            const double v01 = in[in_off + static_cast<std::size_t>(ya) * sw + xb];
            const double v10 = in[in_off + static_cast<std::size_t>(yb) * sw + xa];
            const double v11 = in[in_off + static_cast<std::size_t>(yb) * sw + xb];
            out[out_off + static_cast<std::size_t>(y) * ow + x] =
                (1.0 - fy) * ((1.0 - fx) * v00 + fx * v01) + fy * ((1.0 - fx) * v10 + fx * v11);
        }
    }
}

}  // namespace

Image3 resize_bilinear(const Image3& image, int oh, int ow) {
    Image3 out{oh, ow, std::vector<double>(static_cast<std::size_t>(3) * oh * ow)};
    for (int c = 0; c < 3; ++c)
        bilinear_plane(image.v, out.v, image.h, image.w, oh, ow,
                       static_cast<std::size_t>(c) * image.h * image.w,
                       static_cast<std::size_t>(c) * oh * ow);
    return out;
}

RealMap resize_bilinear(const RealMap& map, int oh, int ow) {
    RealMap out{oh, ow, std::vector<double>(static_cast<std::size_t>(oh) * ow)};
    bilinear_plane(map.v, out.v, map.h, map.w, oh, ow, 0, 0);
    return out;
}

BinMap resize_nearest(const BinMap& mask, int oh, int ow) {
    BinMap out{oh, ow, std::vector<std::uint8_t>(static_cast<std::size_t>(oh) * ow)};
    for (int y = 0; y < oh; ++y) {
        const int sy = std::min(mask.h - 1, static_cast<int>((y + 0.5) * mask.h / oh));
        for (int x = 0; x < ow; ++x) {
            const int sx = std::min(mask.w - 1, static_cast<int>((x + 0.5) * mask.w / ow));
            out.at(y, x) = mask.at(sy, sx);
        }
    }
    return out;
}

void multiscale_resize(std::vector<SegmentationSample>& batch, double scale) {
    if (batch.empty()) return;
    for (auto& sample : batch) {
        const int side = snap_to_multiple_of_32(
            static_cast<int>(std::llround(scale * std::max(sample.image.h, sample.image.w))));
        if (side == sample.image.h && side == sample.image.w) continue;
        sample.image = resize_bilinear(sample.image, side, side);
        sample.mask = resize_nearest(sample.mask, side, side);
    }
}

}  // namespace msnet
