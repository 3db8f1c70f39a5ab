#include "msnet/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <ostream>

#include "msnet/error.hpp"

namespace msnet {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

void require_same_size(int ph, int pw, int gh, int gw, const char* op) {
    if (ph != gh || pw != gw)
        fail(ErrorCategory::shape, std::string(op) + ": size mismatch " + std::to_string(ph) + "x" +
                                       std::to_string(pw) + " vs " + std::to_string(gh) + "x" +
                                       std::to_string(gw));
}

std::int64_t count_fg(const BinMap& m) {
    std::int64_t n = 0;
    for (auto v : m.v) n += v;
    return n;
}

}  // namespace

BinMap binarize(const RealMap& pred, double threshold) {
    if (!(threshold > 0.0 && threshold < 1.0))
        fail(ErrorCategory::usage, "binarize: threshold must be in (0, 1)");
    BinMap out{pred.h, pred.w, std::vector<std::uint8_t>(pred.v.size())};
    for (std::size_t i = 0; i < pred.v.size(); ++i) out.v[i] = pred.v[i] >= threshold ? 1 : 0;
    return out;
}

double dice(const BinMap& pred, const BinMap& gt) {
    require_same_size(pred.h, pred.w, gt.h, gt.w, "dice");
    std::int64_t inter = 0, psum = 0, gsum = 0;
    for (std::size_t i = 0; i < pred.v.size(); ++i) {
        inter += pred.v[i] & gt.v[i];
        psum += pred.v[i];
        gsum += gt.v[i];
    }
    if (psum + gsum == 0) return 1.0;
    return 2.0 * static_cast<double>(inter) / static_cast<double>(psum + gsum);
}

double iou(const BinMap& pred, const BinMap& gt) {
    require_same_size(pred.h, pred.w, gt.h, gt.w, "iou");
    std::int64_t inter = 0, uni = 0;
    for (std::size_t i = 0; i < pred.v.size(); ++i) {
        inter += pred.v[i] & gt.v[i];
        uni += pred.v[i] | gt.v[i];
    }
    if (uni == 0) return 1.0;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

double mae(const RealMap& pred, const BinMap& gt) {
    require_same_size(pred.h, pred.w, gt.h, gt.w, "mae");
    double acc = 0.0;
    for (std::size_t i = 0; i < pred.v.size(); ++i) acc += std::fabs(pred.v[i] - gt.v[i]);
    return acc / static_cast<double>(pred.v.size());
}

// ---------------------------------------------------------------------------
// Weighted F-measure
// ---------------------------------------------------------------------------

namespace {

// Separable zero-padded Gaussian blur, kernel normalized to unit total mass.
void gaussian_blur(const std::vector<double>& in, std::vector<double>& out, int h, int w, int win,
                   double sigma) {
    const int r = win / 2;
    std::vector<double> k1(static_cast<std::size_t>(win));
    double ksum = 0.0;
    for (int i = 0; i < win; ++i) {
        const double d = i - r;
        k1[static_cast<std::size_t>(i)] = std::exp(-d * d / (2.0 * sigma * sigma));
        ksum += k1[static_cast<std::size_t>(i)];
    }
    for (double& k : k1) k /= ksum;

    std::vector<double> tmp(in.size(), 0.0);
    for (int y = 0; y < h; ++y) {
        const double* row = in.data() + static_cast<std::size_t>(y) * w;
        double* trow = tmp.data() + static_cast<std::size_t>(y) * w;
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int i = -r; i <= r; ++i) {
                const int xx = x + i;
                if (xx >= 0 && xx < w) acc += k1[static_cast<std::size_t>(i + r)] * row[xx];
            }
            trow[x] = acc;
        }
    }
    out.assign(in.size(), 0.0);
    for (int y = 0; y < h; ++y) {
        double* orow = out.data() + static_cast<std::size_t>(y) * w;
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int i = -r; i <= r; ++i) {
                const int yy = y + i;
                if (yy >= 0 && yy < h)
                    acc += k1[static_cast<std::size_t>(i + r)] * tmp[static_cast<std::size_t>(yy) * w + x];
            }
            orow[x] = acc;
        }
    }
}

}  // namespace

double weighted_fmeasure(const RealMap& pred, const BinMap& gt) {
    require_same_size(pred.h, pred.w, gt.h, gt.w, "weighted_fmeasure");
    const int h = gt.h, w = gt.w;
    const std::int64_t n_fg = count_fg(gt);
    if (n_fg == 0) {
        for (double p : pred.v)
            if (p != 0.0) return 0.0;
        return 1.0;
    }

    std::vector<std::pair<int, int>> fg;
    fg.reserve(static_cast<std::size_t>(n_fg));
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            if (gt.at(y, x)) fg.emplace_back(y, x);

    // E = |pred - gt|; background errors replaced by the mean error over the
    // nearest foreground pixels (exact squared-distance ties averaged).
    std::vector<double> err(pred.v.size());
    for (std::size_t i = 0; i < pred.v.size(); ++i) err[i] = std::fabs(pred.v[i] - gt.v[i]);

    std::vector<double> err_t = err;
    std::vector<double> dist(pred.v.size(), 0.0);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (gt.at(y, x)) continue;
            std::int64_t best = std::numeric_limits<std::int64_t>::max();
            double esum = 0.0;
            int ecnt = 0;
            for (const auto& [fy, fx] : fg) {
                const std::int64_t dy = fy - y, dx = fx - x;
                const std::int64_t d2 = dy * dy + dx * dx;
                if (d2 < best) {
                    best = d2;
                    esum = err[static_cast<std::size_t>(fy) * w + fx];
                    ecnt = 1;
                } else if (d2 == best) {
                    esum += err[static_cast<std::size_t>(fy) * w + fx];
                    ++ecnt;
                }
            }
            const std::size_t i = static_cast<std::size_t>(y) * w + x;
            err_t[i] = esum / ecnt;
            dist[i] = std::sqrt(static_cast<double>(best));
        }
    }

    int win = std::min(7, std::min(h, w));
    if (win % 2 == 0) --win;
    std::vector<double> blurred;
    gaussian_blur(err_t, blurred, h, w, win, 5.0);

    const double decay = std::log(0.5) / 5.0;
    double ew_fg_sum = 0.0, ew_bg_sum = 0.0;
    for (std::size_t i = 0; i < pred.v.size(); ++i) {
        double min_e = err[i];
        if (gt.v[i] && blurred[i] < err[i]) min_e = blurred[i];
        const double b = gt.v[i] ? 1.0 : 2.0 - std::exp(decay * dist[i]);
        const double ew = min_e * b;
        if (gt.v[i]) {
            ew_fg_sum += ew;
        } else {
            ew_bg_sum += ew;
        }
    }

    const double tpw = static_cast<double>(n_fg) - ew_fg_sum;
    const double recall = 1.0 - ew_fg_sum / static_cast<double>(n_fg);
    const double precision = tpw / (kEps + tpw + ew_bg_sum);
    return 2.0 * recall * precision / (kEps + recall + precision);
}

// ---------------------------------------------------------------------------
// S-measure
// ---------------------------------------------------------------------------

namespace {

double mean_of_range(const RealMap& pred, int y0, int y1, int x0, int x1) {
    double acc = 0.0;
    for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x) acc += pred.at(y, x);
    const std::int64_t n = static_cast<std::int64_t>(y1 - y0) * (x1 - x0);
    return n > 0 ? acc / static_cast<double>(n) : 0.0;
}

// 2x / (x^2 + 1 + sigma_x + eps) over the values of pred where mask holds;
// dissimilarity step of the object-aware term.
double object_score(const std::vector<double>& vals) {
    if (vals.empty()) return 0.0;
    double mean = 0.0;
    for (double v : vals) mean += v;
    mean /= static_cast<double>(vals.size());
    double var = 0.0;
    for (double v : vals) var += (v - mean) * (v - mean);
    const double stddev = vals.size() > 1 ? std::sqrt(var / (static_cast<double>(vals.size()) - 1.0)) : 0.0;
    return 2.0 * mean / (mean * mean + 1.0 + stddev + kEps);
}

// Fan's region SSIM between the prediction values and the binary gt of one
// region.
double region_ssim(const RealMap& pred, const BinMap& gt, int y0, int y1, int x0, int x1) {
    const std::int64_t n = static_cast<std::int64_t>(y1 - y0) * (x1 - x0);
    double px = 0.0, gy = 0.0;
    for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x) {
            px += pred.at(y, x);
            gy += gt.at(y, x);
        }
    px /= static_cast<double>(n);
    gy /= static_cast<double>(n);
    double sx = 0.0, sy = 0.0, sxy = 0.0;
    for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x) {
            const double dp = pred.at(y, x) - px;
            const double dg = gt.at(y, x) - gy;
            sx += dp * dp;
            sy += dg * dg;
            sxy += dp * dg;
        }
    const double norm = static_cast<double>(n) - 1.0 + kEps;
    sx /= norm;
    sy /= norm;
    sxy /= norm;
    const double alpha = 4.0 * px * gy * sxy;
    const double beta = (px * px + gy * gy) * (sx + sy);
    if (alpha != 0.0) return alpha / (beta + kEps);
    return beta == 0.0 ? 1.0 : 0.0;
}

}  // namespace

double s_measure(const RealMap& pred, const BinMap& gt) {
    require_same_size(pred.h, pred.w, gt.h, gt.w, "s_measure");
    const int h = gt.h, w = gt.w;
    const std::int64_t n_fg = count_fg(gt);
    const std::int64_t n = static_cast<std::int64_t>(h) * w;

    double pred_mean = 0.0;
    for (double p : pred.v) pred_mean += p;
    pred_mean /= static_cast<double>(n);

    if (n_fg == 0) return 1.0 - pred_mean;
    if (n_fg == n) return pred_mean;
    const double mu = static_cast<double>(n_fg) / static_cast<double>(n);

    // object-aware term
    std::vector<double> fg_vals, bg_vals;
    fg_vals.reserve(static_cast<std::size_t>(n_fg));
    bg_vals.reserve(static_cast<std::size_t>(n - n_fg));
    for (std::size_t i = 0; i < pred.v.size(); ++i) {
        if (gt.v[i])
            fg_vals.push_back(pred.v[i]);
        else
            bg_vals.push_back(1.0 - pred.v[i]);
    }
    const double so = mu * object_score(fg_vals) + (1.0 - mu) * object_score(bg_vals);

    // region-aware term: quadrants cut at the floored foreground centroid
    double cx = 0.0, cy = 0.0;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            if (gt.at(y, x)) {
                cx += x + 1;
                cy += y + 1;
            }
    cx /= static_cast<double>(n_fg);
    cy /= static_cast<double>(n_fg);
    const int split_x = static_cast<int>(std::floor(cx));  // columns 1..split_x go left
    const int split_y = static_cast<int>(std::floor(cy));

    const int x_edges[3] = {0, split_x, w};
    const int y_edges[3] = {0, split_y, h};
    double sr = 0.0;
    for (int ry = 0; ry < 2; ++ry) {
        for (int rx = 0; rx < 2; ++rx) {
            const int y0 = y_edges[ry], y1 = y_edges[ry + 1];
            const int x0 = x_edges[rx], x1 = x_edges[rx + 1];
            const std::int64_t area = static_cast<std::int64_t>(y1 - y0) * (x1 - x0);
            if (area <= 0) continue;
            const double weight = static_cast<double>(area) / static_cast<double>(n);
            sr += weight * region_ssim(pred, gt, y0, y1, x0, x1);
        }
    }

    return std::max(0.0, 0.5 * so + 0.5 * sr);
}

// ---------------------------------------------------------------------------
// E-measure
// ---------------------------------------------------------------------------

double e_measure(const RealMap& pred, const BinMap& gt) {
    require_same_size(pred.h, pred.w, gt.h, gt.w, "e_measure");
    const std::int64_t n = static_cast<std::int64_t>(gt.h) * gt.w;
    const std::int64_t n_fg = count_fg(gt);

    // Sorted prediction values with a parallel foreground prefix count give
    // the four binarization counts per threshold in O(log n).
    std::vector<std::pair<double, std::uint8_t>> order(pred.v.size());
    for (std::size_t i = 0; i < pred.v.size(); ++i) order[i] = {pred.v[i], gt.v[i]};
    std::sort(order.begin(), order.end());
    std::vector<std::int64_t> fg_prefix(order.size() + 1, 0);
    for (std::size_t i = 0; i < order.size(); ++i) fg_prefix[i + 1] = fg_prefix[i] + order[i].second;

    double best = 0.0;
    for (int j = 0; j < 256; ++j) {
        const double t = j / 255.0;
        // the sweep binarizes with strict >, matching the reference
        // evaluation protocol
        const auto it = std::upper_bound(
            order.begin(), order.end(), t,
            [](double value, const std::pair<double, std::uint8_t>& p) { return value < p.first; });
        const std::int64_t below = it - order.begin();
        const std::int64_t fm_count = n - below;                        // pred > t
        const std::int64_t n11 = n_fg - fg_prefix[static_cast<std::size_t>(below)];
        const std::int64_t n10 = fm_count - n11;
        const std::int64_t n01 = n_fg - n11;
        const std::int64_t n00 = n - fm_count - n01;

        double score;
        if (n_fg == 0) {
            score = static_cast<double>(n - fm_count) / static_cast<double>(n);
        } else if (n_fg == n) {
            score = static_cast<double>(fm_count) / static_cast<double>(n);
        } else {
            const double mu_f = static_cast<double>(fm_count) / static_cast<double>(n);
            const double mu_g = static_cast<double>(n_fg) / static_cast<double>(n);
            auto enhanced = [&](double fm_bit, double g_bit) {
                const double af = fm_bit - mu_f;
                const double ag = g_bit - mu_g;
                const double align = 2.0 * ag * af / (ag * ag + af * af + kEps);
                return (align + 1.0) * (align + 1.0) / 4.0;
            };
            score = (static_cast<double>(n11) * enhanced(1, 1) + static_cast<double>(n10) * enhanced(1, 0) +
                     static_cast<double>(n01) * enhanced(0, 1) + static_cast<double>(n00) * enhanced(0, 0)) /
                    static_cast<double>(n);
        }
        best = std::max(best, score);
    }
    return best;
}

// ---------------------------------------------------------------------------
// Aggregation
// ---------------------------------------------------------------------------

MetricValues evaluate_pair(const RealMap& pred, const BinMap& gt, double threshold) {
    const BinMap pred_bin = binarize(pred, threshold);
    MetricValues m;
    m.mdice = dice(pred_bin, gt);
    m.miou = iou(pred_bin, gt);
    m.wfm = weighted_fmeasure(pred, gt);
    m.s_measure = s_measure(pred, gt);
    m.e_measure = e_measure(pred, gt);
    m.mae = mae(pred, gt);
    return m;
}

MetricValues mean_of(const std::vector<MetricValues>& values) {
    MetricValues m;
    if (values.empty()) return m;
    for (const auto& v : values) {
        m.mdice += v.mdice;
        m.miou += v.miou;
        m.wfm += v.wfm;
        m.s_measure += v.s_measure;
        m.e_measure += v.e_measure;
        m.mae += v.mae;
    }
    const double n = static_cast<double>(values.size());
    m.mdice /= n;
    m.miou /= n;
    m.wfm /= n;
    m.s_measure /= n;
    m.e_measure /= n;
    m.mae /= n;
    return m;
}

MetricReport evaluate_dataset(const std::filesystem::path& pred_dir,
                              const std::filesystem::path& gt_dir, double threshold) {
    namespace fs = std::filesystem;
    auto list_pgm = [](const fs::path& dir) {
        if (!fs::is_directory(dir))
            fail(ErrorCategory::io, "not a directory: " + dir.string());
        std::map<std::string, fs::path> files;
        for (const auto& entry : fs::directory_iterator(dir))
            if (entry.is_regular_file() && entry.path().extension() == ".pgm")
                files[entry.path().filename().string()] = entry.path();
        return files;
    };
    const auto preds = list_pgm(pred_dir);
    const auto gts = list_pgm(gt_dir);

    MetricReport report;
    report.threshold = threshold;
    for (const auto& [name, ppath] : preds) {
        const auto it = gts.find(name);
        if (it == gts.end())
            fail(ErrorCategory::io, "prediction " + name + " has no ground-truth counterpart in " +
                                        gt_dir.string());
        const RealMap pred = read_pgm(ppath);
        const BinMap gt = read_mask(it->second);
        if (pred.h != gt.h || pred.w != gt.w)
            fail(ErrorCategory::shape, "size mismatch for " + name + ": " + std::to_string(pred.w) +
                                           "x" + std::to_string(pred.h) + " vs " +
                                           std::to_string(gt.w) + "x" + std::to_string(gt.h));
        report.ids.push_back(name);
        report.per_image.push_back(evaluate_pair(pred, gt, threshold));
    }
    if (report.per_image.empty())
        fail(ErrorCategory::io, "no name-matched .pgm pairs between " + pred_dir.string() +
                                    " and " + gt_dir.string());
    report.mean = mean_of(report.per_image);
    return report;
}

namespace {

std::string metric_row(const std::string& id, const MetricValues& m) {
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%s,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f", id.c_str(), m.mdice,
                  m.miou, m.wfm, m.s_measure, m.e_measure, m.mae);
    return buf;
}

}  // namespace

void write_csv(const MetricReport& report, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) fail(ErrorCategory::io, "cannot write " + path.string());
    out << "id,mdice,miou,wfm,smeasure,emeasure,mae\n";
    for (std::size_t i = 0; i < report.per_image.size(); ++i)
        out << metric_row(report.ids[i], report.per_image[i]) << "\n";
    out << metric_row("mean", report.mean) << "\n";
    if (!out) fail(ErrorCategory::io, "short write to " + path.string());
}

void write_table(const MetricReport& report, std::ostream& os, const std::string& label) {
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%-16s %7s %7s %7s %7s %7s %7s\n", "", "mDice", "mIoU", "Fwb",
                  "Sa", "Emax", "MAE");
    os << buf;
    const MetricValues& m = report.mean;
    std::snprintf(buf, sizeof(buf), "%-16s %7.3f %7.3f %7.3f %7.3f %7.3f %7.3f\n", label.c_str(),
                  m.mdice, m.miou, m.wfm, m.s_measure, m.e_measure, m.mae);
    os << buf;
}

}  // namespace msnet
