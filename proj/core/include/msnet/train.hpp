#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <vector>

#include "msnet/config.hpp"
#include "msnet/data.hpp"
#include "msnet/losses.hpp"
#include "msnet/metrics.hpp"
#include "msnet/model.hpp"

namespace msnet {

// Piecewise-linear warmup then decay over iterations t = 1..total:
// lr_max * t / warmup for t <= warmup, lr_max * (total - t) / (total -
// warmup) after. Continuous, peaks exactly once at t == warmup, reaches 0 at
// t == total.
double lr_at(double lr_max, std::int64_t t, std::int64_t total, std::int64_t warmup);

// SGD with momentum and decoupled weight decay (multiplicative shrink after
// the update, applied to weights only, never biases). Gradients are clipped
// to a global norm over the group before the momentum update; clip_norm <= 0
// disables clipping.
class SgdOptimizer {
  public:
    SgdOptimizer(std::vector<Tensor> params, double momentum, double weight_decay,
                 double clip_norm = 0.0);

    void step(double lr);

  private:
    struct Slot {
        Tensor param;
        std::vector<double> velocity;
        bool is_bias;
    };
    std::vector<Slot> slots_;
    double momentum_;
    double weight_decay_;
    double clip_norm_;
};

// Stacks samples into N x 3 x S x S / N x 1 x S x S tensors (all samples
// must share one size).
Tensor batch_images(const std::vector<SegmentationSample>& samples);
Tensor batch_masks(const std::vector<SegmentationSample>& samples);

RealMap prediction_to_map(const Tensor& pred, int index);

struct EpochLog {
    int epoch = 0;
    LossBreakdown loss;   // means over the epoch's iterations
    double val_mdice = 0.0;
    double lr_head = 0.0;
};

struct TrainResult {
    std::filesystem::path best_checkpoint;
    std::filesystem::path last_checkpoint;
    double best_val_mdice = 0.0;
    std::vector<EpochLog> epochs;
};

// Full training run: seeded shuffling, flip/rotate augmentation, per-batch
// multi-scale resizing over {0.75, 1.0, 1.25}, two learning-rate groups
// (encoder vs rest), per-epoch validation mDice, best/last checkpoints under
// cfg.out_dir. Deterministic given cfg.seed. A non-finite loss aborts with
// the offending iteration index.
TrainResult train(const RunConfig& cfg, std::ostream& log);

struct EvalOptions {
    std::string split = "test";
    bool gt_as_pred = false;  // sanity mode: score the ground truth against itself
};

// Evaluates a checkpointed model over one split; writes report.csv and
// report.txt under cfg.out_dir and returns the report.
MetricReport run_eval(const RunConfig& cfg, const std::optional<std::filesystem::path>& checkpoint,
                      const EvalOptions& options, std::ostream& log);

// Writes <id>_prob.pgm and <id>_mask.pgm per input image under cfg.out_dir.
// Inputs resize to the model's input_size for the forward pass; outputs
// resize back to the source dimensions.
void run_predict(const RunConfig& cfg, const std::filesystem::path& checkpoint,
                 const std::vector<std::filesystem::path>& images, std::ostream& log);

struct AblateRow {
    std::string label;
    RunConfig config;
    std::uint64_t hash = 0;
    std::int64_t parameter_count = 0;
    MetricValues metrics;
};

// The seven ablation rows (depth 1 baseline, depths 2..5, depth 5 with the
// feature loss, depth 5 with additive fusion), trained with a shared seed on
// cfg.data_dir and scored on the test split. Writes ablate.csv/ablate.txt
// under cfg.out_dir.
std::vector<AblateRow> run_ablate(const RunConfig& cfg, std::ostream& log);

struct BenchReport {
    int iters = 0;
    double mean_ms = 0.0;
    double median_ms = 0.0;
    double stddev_ms = 0.0;
    double variance_ms2 = 0.0;
    double fps = 0.0;
};

// Forward-pass latency at the configured input size: 10 warmup iterations,
// then at least 30 timed samples, single worker.
BenchReport run_bench(const RunConfig& cfg, const std::optional<std::filesystem::path>& checkpoint,
                      int iters, std::ostream& log);

// Raises a config error when explicitly requested architecture fields
// disagree with the checkpoint's embedded config.
void check_config_matches_checkpoint(const ModelConfig& requested, const ModelConfig& loaded,
                                     bool input_size_set, bool channels_set, bool depth_set,
                                     bool fusion_set);

}  // namespace msnet
