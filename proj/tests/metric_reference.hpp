#pragma once

// Test-only reference transcriptions of the evaluation metrics, written as
// direct per-pixel loops straight from the published algorithm descriptions
// (weighted F-measure: Margolin et al.; S-measure / E-measure: Fan et al.)
// with this project's pinned conventions. Deliberately naive and independent
// of the production implementations in core.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

namespace metric_ref {

constexpr double kEps = 2.220446049250313e-16;

struct Map {
    int h = 0;
    int w = 0;
    std::vector<double> v;  // prediction in [0,1] or binary gt as 0/1

    double at(int y, int x) const { return v[static_cast<std::size_t>(y) * w + x]; }
    double& at(int y, int x) { return v[static_cast<std::size_t>(y) * w + x]; }
};

inline double ref_dice(const Map& pred_bin, const Map& gt) {
    long long inter = 0, p = 0, g = 0;
    for (std::size_t i = 0; i < gt.v.size(); ++i) {
        const bool pb = pred_bin.v[i] != 0.0;
        const bool gb = gt.v[i] != 0.0;
        if (pb && gb) ++inter;
        if (pb) ++p;
        if (gb) ++g;
    }
    if (p + g == 0) return 1.0;
    return 2.0 * static_cast<double>(inter) / static_cast<double>(p + g);
}

inline double ref_iou(const Map& pred_bin, const Map& gt) {
    long long inter = 0, uni = 0;
    for (std::size_t i = 0; i < gt.v.size(); ++i) {
        const bool pb = pred_bin.v[i] != 0.0;
        const bool gb = gt.v[i] != 0.0;
        if (pb && gb) ++inter;
        if (pb || gb) ++uni;
    }
    if (uni == 0) return 1.0;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

inline double ref_mae(const Map& pred, const Map& gt) {
    double acc = 0.0;
    for (std::size_t i = 0; i < gt.v.size(); ++i) acc += std::fabs(pred.v[i] - gt.v[i]);
    return acc / static_cast<double>(gt.v.size());
}

// Weighted F-measure, beta^2 = 1.
inline double ref_weighted_fmeasure(const Map& pred, const Map& gt) {
    const int h = gt.h, w = gt.w;
    long long n_fg = 0;
    for (double g : gt.v) n_fg += g != 0.0;
    if (n_fg == 0) {
        for (double p : pred.v)
            if (p != 0.0) return 0.0;
        return 1.0;
    }

    // E = |FM - G|
    Map E{h, w, std::vector<double>(gt.v.size())};
    for (std::size_t i = 0; i < gt.v.size(); ++i) E.v[i] = std::fabs(pred.v[i] - gt.v[i]);

    // Et: background error replaced by the mean error of the nearest
    // foreground pixels; Dst: Euclidean distance to the nearest foreground.
    Map Et = E;
    Map Dst{h, w, std::vector<double>(gt.v.size(), 0.0)};
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (gt.at(y, x) != 0.0) continue;
            long long best = std::numeric_limits<long long>::max();
            double esum = 0.0;
            long long ecnt = 0;
            for (int fy = 0; fy < h; ++fy) {
                for (int fx = 0; fx < w; ++fx) {
                    if (gt.at(fy, fx) == 0.0) continue;
                    const long long d2 = static_cast<long long>(fy - y) * (fy - y) +
                                         static_cast<long long>(fx - x) * (fx - x);
                    if (d2 < best) {
                        best = d2;
                        esum = E.at(fy, fx);
                        ecnt = 1;
                    } else if (d2 == best) {
                        esum += E.at(fy, fx);
                        ++ecnt;
                    }
                }
            }
            Et.at(y, x) = esum / static_cast<double>(ecnt);
            Dst.at(y, x) = std::sqrt(static_cast<double>(best));
        }
    }

    // EA = full 2-D Gaussian correlation, window min(7, fit), sigma 5,
    // kernel normalized over the whole window, zero padding.
    int win = std::min(7, std::min(h, w));
    if (win % 2 == 0) --win;
    const int r = win / 2;
    std::vector<double> kernel(static_cast<std::size_t>(win) * win);
    double ksum = 0.0;
    for (int ky = 0; ky < win; ++ky)
        for (int kx = 0; kx < win; ++kx) {
            const double dy = ky - r, dx = kx - r;
            kernel[static_cast<std::size_t>(ky) * win + kx] =
                std::exp(-(dx * dx + dy * dy) / (2.0 * 5.0 * 5.0));
            ksum += kernel[static_cast<std::size_t>(ky) * win + kx];
        }
    for (double& k : kernel) k /= ksum;

    Map EA{h, w, std::vector<double>(gt.v.size(), 0.0)};
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int ky = -r; ky <= r; ++ky)
                for (int kx = -r; kx <= r; ++kx) {
                    const int yy = y + ky, xx = x + kx;
                    if (yy < 0 || yy >= h || xx < 0 || xx >= w) continue;
                    acc += kernel[static_cast<std::size_t>(ky + r) * win + (kx + r)] * Et.at(yy, xx);
                }
            EA.at(y, x) = acc;
        }

    double ew_fg = 0.0, ew_bg = 0.0;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double min_e_ea = E.at(y, x);
            if (gt.at(y, x) != 0.0 && EA.at(y, x) < E.at(y, x)) min_e_ea = EA.at(y, x);
            double b = 1.0;
            if (gt.at(y, x) == 0.0) b = 2.0 - std::exp(std::log(0.5) / 5.0 * Dst.at(y, x));
            const double ew = min_e_ea * b;
            if (gt.at(y, x) != 0.0)
                ew_fg += ew;
            else
                ew_bg += ew;
        }

    const double tpw = static_cast<double>(n_fg) - ew_fg;
    const double R = 1.0 - ew_fg / static_cast<double>(n_fg);
    const double P = tpw / (kEps + tpw + ew_bg);
    return (1.0 + 1.0) * R * P / (kEps + R + 1.0 * P);
}

// S-measure, alpha = 0.5, floor-centroid region split.
inline double ref_s_measure(const Map& pred, const Map& gt) {
    const int h = gt.h, w = gt.w;
    const double n = static_cast<double>(h) * w;
    double gt_sum = 0.0, pred_sum = 0.0;
    for (std::size_t i = 0; i < gt.v.size(); ++i) {
        gt_sum += gt.v[i];
        pred_sum += pred.v[i];
    }
    const double y_mean = gt_sum / n;
    if (y_mean == 0.0) return 1.0 - pred_sum / n;
    if (y_mean == 1.0) return pred_sum / n;

    // object term
    auto object = [](const std::vector<double>& vals) {
        double x = 0.0;
        for (double v : vals) x += v;
        x /= static_cast<double>(vals.size());
        double var = 0.0;
        for (double v : vals) var += (v - x) * (v - x);
        const double sigma =
            vals.size() > 1 ? std::sqrt(var / (static_cast<double>(vals.size()) - 1.0)) : 0.0;
        return 2.0 * x / (x * x + 1.0 + sigma + kEps);
    };
    std::vector<double> fg, bg;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            if (gt.at(y, x) != 0.0)
                fg.push_back(pred.at(y, x));
            else
                bg.push_back(1.0 - pred.at(y, x));
        }
    const double s_object = y_mean * object(fg) + (1.0 - y_mean) * object(bg);

    // region term
    double cx = 0.0, cy = 0.0;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            if (gt.at(y, x) != 0.0) {
                cx += x + 1;
                cy += y + 1;
            }
    cx /= gt_sum;
    cy /= gt_sum;
    const int X = static_cast<int>(std::floor(cx));
    const int Y = static_cast<int>(std::floor(cy));

    auto ssim_region = [&](int y0, int y1, int x0, int x1) {
        const double cnt = static_cast<double>(y1 - y0) * (x1 - x0);
        double mp = 0.0, mg = 0.0;
        for (int y = y0; y < y1; ++y)
            for (int x = x0; x < x1; ++x) {
                mp += pred.at(y, x);
                mg += gt.at(y, x);
            }
        mp /= cnt;
        mg /= cnt;
        double sp = 0.0, sg = 0.0, spg = 0.0;
        for (int y = y0; y < y1; ++y)
            for (int x = x0; x < x1; ++x) {
                sp += (pred.at(y, x) - mp) * (pred.at(y, x) - mp);
                sg += (gt.at(y, x) - mg) * (gt.at(y, x) - mg);
                spg += (pred.at(y, x) - mp) * (gt.at(y, x) - mg);
            }
        sp /= cnt - 1.0 + kEps;
        sg /= cnt - 1.0 + kEps;
        spg /= cnt - 1.0 + kEps;
        const double alpha = 4.0 * mp * mg * spg;
        const double beta = (mp * mp + mg * mg) * (sp + sg);
        if (alpha != 0.0) return alpha / (beta + kEps);
        return beta == 0.0 ? 1.0 : 0.0;
    };

    double s_region = 0.0;
    const int ys[3] = {0, Y, h};
    const int xs[3] = {0, X, w};
    for (int ry = 0; ry < 2; ++ry)
        for (int rx = 0; rx < 2; ++rx) {
            const double area = static_cast<double>(ys[ry + 1] - ys[ry]) * (xs[rx + 1] - xs[rx]);
            if (area <= 0.0) continue;
            s_region += area / n * ssim_region(ys[ry], ys[ry + 1], xs[rx], xs[rx + 1]);
        }

    return std::max(0.0, 0.5 * s_object + 0.5 * s_region);
}

// E-measure maximized over 256 thresholds, per-pixel recomputation.
inline double ref_e_measure(const Map& pred, const Map& gt) {
    const int h = gt.h, w = gt.w;
    const double n = static_cast<double>(h) * w;
    double best = 0.0;
    for (int j = 0; j < 256; ++j) {
        const double t = j / 255.0;
        std::vector<double> fm(gt.v.size());
        for (std::size_t i = 0; i < gt.v.size(); ++i) fm[i] = pred.v[i] > t ? 1.0 : 0.0;

        double gt_sum = 0.0, fm_sum = 0.0;
        for (std::size_t i = 0; i < gt.v.size(); ++i) {
            gt_sum += gt.v[i];
            fm_sum += fm[i];
        }
        double score;
        if (gt_sum == 0.0) {
            double acc = 0.0;
            for (double f : fm) acc += 1.0 - f;
            score = acc / n;
        } else if (gt_sum == n) {
            score = fm_sum / n;
        } else {
            const double mu_f = fm_sum / n;
            const double mu_g = gt_sum / n;
            double acc = 0.0;
            for (std::size_t i = 0; i < gt.v.size(); ++i) {
                const double af = fm[i] - mu_f;
                const double ag = gt.v[i] - mu_g;
                const double align = 2.0 * ag * af / (ag * ag + af * af + kEps);
                acc += (align + 1.0) * (align + 1.0) / 4.0;
            }
            score = acc / n;
        }
        best = std::max(best, score);
    }
    return best;
}

}  // namespace metric_ref
