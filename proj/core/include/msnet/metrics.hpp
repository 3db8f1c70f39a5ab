#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "msnet/pnm.hpp"

namespace msnet {

struct MetricValues {
    double mdice = 0.0;
    double miou = 0.0;
    double wfm = 0.0;
    double s_measure = 0.0;
    double e_measure = 0.0;
    double mae = 0.0;
};

struct MetricReport {
    std::vector<std::string> ids;
    std::vector<MetricValues> per_image;
    MetricValues mean;
    double threshold = 0.5;

    std::size_t image_count() const { return per_image.size(); }
};

// 1 where pred >= threshold, else 0.
BinMap binarize(const RealMap& pred, double threshold = 0.5);

// 2|P inter G| / (|P| + |G|); 1.0 when both masks are empty.
double dice(const BinMap& pred, const BinMap& gt);

// |P inter G| / |P union G|; 1.0 when both masks are empty.
double iou(const BinMap& pred, const BinMap& gt);

// Mean absolute error over the continuous prediction.
double mae(const RealMap& pred, const BinMap& gt);

// Weighted F-measure with beta^2 = 1. Errors at background pixels inherit
// the error of the nearest foreground pixel (mean over exact-distance ties),
// are blurred with a 7x7 sigma-5 Gaussian (window shrunk to fit small
// images), and decayed by 2 - exp(ln(0.5)/5 * d) away from the mask. An
// empty ground truth scores 1.0 against an identically zero prediction and
// 0.0 otherwise.
double weighted_fmeasure(const RealMap& pred, const BinMap& gt);

// Structure measure: 0.5 * object term + 0.5 * region term, clamped at 0.
// Degenerate cases: 1 - mean(pred) for an empty gt, mean(pred) for a full
// gt. The region split cuts at floor of the foreground centroid, which keeps
// the score invariant under joint horizontal flips away from integral
// centroids.
double s_measure(const RealMap& pred, const BinMap& gt);

// Enhanced-alignment measure, maximized over 256 evenly spaced binarization
// thresholds in [0, 1]; the sweep binarizes with strict > as in the
// reference evaluation protocol. Per threshold the score is the mean over
// pixels of (align + 1)^2 / 4 with align = 2*af*ag / (af^2 + ag^2 + eps); an
// empty (full) gt scores mean(1 - FM) (mean(FM)).
double e_measure(const RealMap& pred, const BinMap& gt);

// All six metrics for one prediction/ground-truth pair; dice and iou use the
// binarized prediction, the rest the continuous one.
MetricValues evaluate_pair(const RealMap& pred, const BinMap& gt, double threshold = 0.5);

MetricValues mean_of(const std::vector<MetricValues>& values);

// Scores name-matched .pgm files from two directories, ordered by filename.
// Missing counterparts and size mismatches are reported by name; an empty
// intersection is an error.
MetricReport evaluate_dataset(const std::filesystem::path& pred_dir,
                              const std::filesystem::path& gt_dir, double threshold = 0.5);

// One row per image plus a final mean row.
void write_csv(const MetricReport& report, const std::filesystem::path& path);
// Plain-text table with the mDice / mIoU / Fwb / Sa / Emax / MAE columns.
void write_table(const MetricReport& report, std::ostream& os, const std::string& label);

}  // namespace msnet
