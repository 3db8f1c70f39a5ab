#include "msnet/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <ostream>

#include "msnet/checkpoint.hpp"
#include "msnet/error.hpp"
#include "msnet/ops.hpp"

namespace msnet {

double lr_at(double lr_max, std::int64_t t, std::int64_t total, std::int64_t warmup) {
    if (t <= 0 || total <= 0 || warmup <= 0 || warmup >= total)
        fail(ErrorCategory::config, "lr_at: need 0 < warmup < total and t >= 1");
    if (t <= warmup) return lr_max * static_cast<double>(t) / static_cast<double>(warmup);
    return lr_max * static_cast<double>(total - t) / static_cast<double>(total - warmup);
}

SgdOptimizer::SgdOptimizer(std::vector<Tensor> params, double momentum, double weight_decay,
                           double clip_norm)
    : momentum_(momentum), weight_decay_(weight_decay), clip_norm_(clip_norm) {
    for (auto& p : params) {
        const bool is_bias = p.shape().size() == 1;
        slots_.push_back({p, std::vector<double>(p.values().size(), 0.0), is_bias});
    }
}

void SgdOptimizer::step(double lr) {
    double scale = 1.0;
    if (clip_norm_ > 0.0) {
        double sq = 0.0;
        for (const auto& slot : slots_) {
            if (!slot.param.has_grad()) continue;
            for (double g : slot.param.grad()) sq += g * g;
        }
        const double norm = std::sqrt(sq);
        if (norm > clip_norm_) scale = clip_norm_ / norm;
    }
    for (auto& slot : slots_) {
        if (!slot.param.has_grad()) continue;
        const auto& g = slot.param.grad();
        auto& v = slot.velocity;
        auto& x = slot.param.values();
        const double shrink = 1.0 - lr * weight_decay_;
        for (std::size_t i = 0; i < x.size(); ++i) {
            v[i] = momentum_ * v[i] + scale * g[i];
            x[i] -= lr * v[i];
            if (!slot.is_bias) x[i] *= shrink;
        }
    }
}

Tensor batch_images(const std::vector<SegmentationSample>& samples) {
    if (samples.empty()) fail(ErrorCategory::usage, "batch_images: empty batch");
    const int h = samples[0].image.h, w = samples[0].image.w;
    const int n = static_cast<int>(samples.size());
    std::vector<double> values(static_cast<std::size_t>(n) * 3 * h * w);
    std::size_t o = 0;
    for (const auto& s : samples) {
        if (s.image.h != h || s.image.w != w)
            fail(ErrorCategory::shape, "batch_images: mixed sizes in one batch");
        std::copy(s.image.v.begin(), s.image.v.end(), values.begin() + static_cast<std::ptrdiff_t>(o));
        o += s.image.v.size();
    }
    return Tensor::from_values({n, 3, h, w}, std::move(values));
}

Tensor batch_masks(const std::vector<SegmentationSample>& samples) {
    if (samples.empty()) fail(ErrorCategory::usage, "batch_masks: empty batch");
    const int h = samples[0].mask.h, w = samples[0].mask.w;
    const int n = static_cast<int>(samples.size());
    std::vector<double> values(static_cast<std::size_t>(n) * h * w);
    std::size_t o = 0;
    for (const auto& s : samples) {
        if (s.mask.h != h || s.mask.w != w)
            fail(ErrorCategory::shape, "batch_masks: mixed sizes in one batch");
        for (auto b : s.mask.v) values[o++] = b ? 1.0 : 0.0;
    }
    return Tensor::from_values({n, 1, h, w}, std::move(values));
}

RealMap prediction_to_map(const Tensor& pred, int index) {
    const int h = pred.dim(2), w = pred.dim(3);
    RealMap map{h, w, std::vector<double>(static_cast<std::size_t>(h) * w)};
    const std::size_t off = static_cast<std::size_t>(index) * h * w;
    std::copy(pred.values().begin() + static_cast<std::ptrdiff_t>(off),
              pred.values().begin() + static_cast<std::ptrdiff_t>(off + map.v.size()),
              map.v.begin());
    return map;
}

namespace {

double validation_mdice(const std::vector<SegmentationSample>& val, const ModelParams& params,
                        double threshold) {
    double acc = 0.0;
    for (const auto& sample : val) {
        Tensor pred = forward(batch_images({sample}), params);
        acc += dice(binarize(prediction_to_map(pred, 0), threshold), sample.mask);
    }
    return acc / static_cast<double>(val.size());
}

}  // namespace

TrainResult train(const RunConfig& cfg_in, std::ostream& log) {
    RunConfig cfg = cfg_in;
    cfg.finalize();
    cfg.validate();
    if (cfg.data_dir.empty()) fail(ErrorCategory::usage, "train: data_dir is required");

    const auto train_set = load_split(cfg.data_dir, "train");
    const auto val_set = load_split(cfg.data_dir, "val");

    ModelParams params = init_params(cfg.model);
    LossNetParams lossnet = LossNetParams::init(cfg.loss.lossnet_seed);

    SgdOptimizer backbone(params.backbone_group(), cfg.momentum, cfg.weight_decay, cfg.clip_norm);
    SgdOptimizer head(params.head_group(), cfg.momentum, cfg.weight_decay, cfg.clip_norm);

    const std::int64_t steps_per_epoch =
        (static_cast<std::int64_t>(train_set.size()) + cfg.batch_size - 1) / cfg.batch_size;
    const std::int64_t total_steps = steps_per_epoch * cfg.epochs;
    const std::int64_t warmup_steps =
        std::max<std::int64_t>(1, std::llround(cfg.warmup_fraction * static_cast<double>(total_steps)));
    if (warmup_steps >= total_steps)
        fail(ErrorCategory::config, "warmup covers the whole schedule; increase epochs");

    std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
    std::vector<std::size_t> indices(train_set.size());
    std::iota(indices.begin(), indices.end(), 0);
    const double scales[3] = {0.75, 1.0, 1.25};
    std::uniform_int_distribution<int> scale_pick(0, 2);

    namespace fs = std::filesystem;
    fs::create_directories(cfg.out_dir);
    TrainResult result;
    result.best_checkpoint = fs::path(cfg.out_dir) / "best.ckpt";
    result.last_checkpoint = fs::path(cfg.out_dir) / "last.ckpt";
    result.best_val_mdice = -1.0;

    std::int64_t t = 0;
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        std::shuffle(indices.begin(), indices.end(), rng);
        LossBreakdown epoch_loss;
        double lr_head_last = 0.0;
        for (std::size_t start = 0; start < indices.size(); start += cfg.batch_size) {
            ++t;
            const std::size_t stop = std::min(indices.size(), start + cfg.batch_size);
            std::vector<SegmentationSample> batch;
            batch.reserve(stop - start);
            for (std::size_t k = start; k < stop; ++k) {
                SegmentationSample s = train_set[indices[k]];
                augment(s, rng);
                batch.push_back(std::move(s));
            }
            multiscale_resize(batch, scales[scale_pick(rng)]);

            Tensor pred = forward(batch_images(batch), params);
            TotalLoss loss = total_loss(pred, batch_masks(batch), &lossnet, cfg.loss,
                                        cfg.model.lossnet_enabled);
            if (!std::isfinite(loss.parts.total))
                fail(ErrorCategory::numeric,
                     "non-finite loss at iteration " + std::to_string(t));
            backward(loss.value);

            const double lr_b = lr_at(cfg.lr_backbone_max, t, total_steps, warmup_steps);
            const double lr_h = lr_at(cfg.lr_head_max, t, total_steps, warmup_steps);
            backbone.step(lr_b);
            head.step(lr_h);
            params.zero_grad();
            lr_head_last = lr_h;

            epoch_loss.wbce += loss.parts.wbce;
            epoch_loss.wiou += loss.parts.wiou;
            epoch_loss.lf += loss.parts.lf;
            epoch_loss.total += loss.parts.total;
        }
        const double inv_steps = 1.0 / static_cast<double>(steps_per_epoch);
        epoch_loss.wbce *= inv_steps;
        epoch_loss.wiou *= inv_steps;
        epoch_loss.lf *= inv_steps;
        epoch_loss.total *= inv_steps;

        const double val_mdice = validation_mdice(val_set, params, cfg.threshold);
        char line[256];
        std::snprintf(line, sizeof(line),
                      "epoch %3d  loss %.6f  wbce %.6f  wiou %.6f  lf %.6f  val_mdice %.4f  lr_head %.5f",
                      epoch, epoch_loss.total, epoch_loss.wbce, epoch_loss.wiou, epoch_loss.lf,
                      val_mdice, lr_head_last);
        log << line << std::endl;

        result.epochs.push_back({epoch, epoch_loss, val_mdice, lr_head_last});
        if (val_mdice > result.best_val_mdice) {
            result.best_val_mdice = val_mdice;
            save_checkpoint(result.best_checkpoint, params);
        }
    }
    save_checkpoint(result.last_checkpoint, params);

    std::ofstream cfg_out(fs::path(cfg.out_dir) / "config.txt", std::ios::trunc);
    cfg_out << serialize_config(cfg);
    return result;
}

void check_config_matches_checkpoint(const ModelConfig& requested, const ModelConfig& loaded,
                                     bool input_size_set, bool channels_set, bool depth_set,
                                     bool fusion_set) {
    auto mismatch = [](const std::string& field, const std::string& got, const std::string& want) {
        fail(ErrorCategory::config, "checkpoint/config mismatch: " + field + " is " + got +
                                        " in the checkpoint but " + want + " was requested");
    };
    if (input_size_set && requested.input_size != loaded.input_size)
        mismatch("input_size", std::to_string(loaded.input_size), std::to_string(requested.input_size));
    if (channels_set && requested.channels != loaded.channels)
        mismatch("channels", std::to_string(loaded.channels), std::to_string(requested.channels));
    if (depth_set && requested.pyramid_depth != loaded.pyramid_depth)
        mismatch("pyramid_depth", std::to_string(loaded.pyramid_depth),
                 std::to_string(requested.pyramid_depth));
    if (fusion_set && requested.fusion_mode != loaded.fusion_mode)
        mismatch("fusion_mode", to_string(loaded.fusion_mode), to_string(requested.fusion_mode));
}

MetricReport run_eval(const RunConfig& cfg_in, const std::optional<std::filesystem::path>& checkpoint,
                      const EvalOptions& options, std::ostream& log) {
    RunConfig cfg = cfg_in;
    cfg.finalize();
    if (cfg.data_dir.empty()) fail(ErrorCategory::usage, "eval: data_dir is required");
    const auto samples = load_split(cfg.data_dir, options.split);

    std::optional<ModelParams> params;
    if (!options.gt_as_pred) {
        if (!checkpoint) fail(ErrorCategory::usage, "eval: a checkpoint is required");
        params = load_checkpoint(*checkpoint);
        params->freeze();
    }

    MetricReport report;
    report.threshold = cfg.threshold;
    for (const auto& sample : samples) {
        RealMap pred;
        if (options.gt_as_pred) {
            pred = RealMap{sample.mask.h, sample.mask.w,
                           std::vector<double>(sample.mask.v.size())};
            for (std::size_t i = 0; i < pred.v.size(); ++i) pred.v[i] = sample.mask.v[i];
        } else {
            SegmentationSample resized = sample;
            const int s = params->config.input_size;
            if (resized.image.h != s || resized.image.w != s)
                resized.image = resize_bilinear(resized.image, s, s);
            Tensor out = forward(batch_images({resized}), *params);
            pred = prediction_to_map(out, 0);
            if (pred.h != sample.mask.h || pred.w != sample.mask.w)
                pred = resize_bilinear(pred, sample.mask.h, sample.mask.w);
        }
        report.ids.push_back(sample.id);
        report.per_image.push_back(evaluate_pair(pred, sample.mask, cfg.threshold));
    }
    report.mean = mean_of(report.per_image);

    namespace fs = std::filesystem;
    fs::create_directories(cfg.out_dir);
    write_csv(report, fs::path(cfg.out_dir) / "report.csv");
    std::ofstream table(fs::path(cfg.out_dir) / "report.txt", std::ios::trunc);
    write_table(report, table, options.split);
    write_table(report, log, options.split);
    return report;
}

void run_predict(const RunConfig& cfg_in, const std::filesystem::path& checkpoint,
                 const std::vector<std::filesystem::path>& images, std::ostream& log) {
    RunConfig cfg = cfg_in;
    cfg.finalize();
    if (images.empty()) fail(ErrorCategory::usage, "predict: at least one image is required");
    ModelParams params = load_checkpoint(checkpoint);
    params.freeze();
    const int s = params.config.input_size;

    namespace fs = std::filesystem;
    fs::create_directories(cfg.out_dir);
    for (const auto& path : images) {
        if (!fs::exists(path)) fail(ErrorCategory::io, "unreadable input " + path.string());
        SegmentationSample sample;
        sample.image = read_ppm(path);
        const int oh = sample.image.h, ow = sample.image.w;
        if (oh != s || ow != s) sample.image = resize_bilinear(sample.image, s, s);
        sample.mask = BinMap{s, s, std::vector<std::uint8_t>(static_cast<std::size_t>(s) * s, 0)};
        Tensor out = forward(batch_images({sample}), params);
        RealMap prob = prediction_to_map(out, 0);
        if (prob.h != oh || prob.w != ow) prob = resize_bilinear(prob, oh, ow);

        const std::string id = path.stem().string();
        write_pgm(fs::path(cfg.out_dir) / (id + "_prob.pgm"), prob);
        // mask from the quantized probabilities so the two files re-threshold
        // consistently at 0.5 (128/255)
        BinMap mask{oh, ow, std::vector<std::uint8_t>(prob.v.size())};
        for (std::size_t i = 0; i < prob.v.size(); ++i)
            mask.v[i] = std::llround(std::min(std::max(prob.v[i], 0.0), 1.0) * 255.0) >= 128 ? 1 : 0;
        write_pgm(fs::path(cfg.out_dir) / (id + "_mask.pgm"), mask);
        log << id << ": wrote " << id << "_prob.pgm and " << id << "_mask.pgm" << std::endl;
    }
}

std::vector<AblateRow> run_ablate(const RunConfig& cfg_in, std::ostream& log) {
    RunConfig base = cfg_in;
    base.finalize();
    if (base.data_dir.empty()) fail(ErrorCategory::usage, "ablate: data_dir is required");

    struct RowSpec {
        const char* label;
        int depth;
        FusionMode fusion;
        bool lossnet;
    };
    // Row order mirrors the ablation table: baseline, one column at a time,
    // the feature loss, then additive fusion.
    const RowSpec specs[7] = {
        {"baseline", 1, FusionMode::subtract, false},
        {"+ms2", 2, FusionMode::subtract, false},
        {"+ms3", 3, FusionMode::subtract, false},
        {"+ms4", 4, FusionMode::subtract, false},
        {"+ms5", 5, FusionMode::subtract, false},
        {"+lossnet", 5, FusionMode::subtract, true},
        {"ma-fusion", 5, FusionMode::add, true},
    };

    namespace fs = std::filesystem;
    fs::create_directories(base.out_dir);
    std::vector<AblateRow> rows;
    for (const auto& spec : specs) {
        AblateRow row;
        row.label = spec.label;
        row.config = base;
        row.config.model.pyramid_depth = spec.depth;
        row.config.model.fusion_mode = spec.fusion;
        row.config.model.lossnet_enabled = spec.lossnet;
        row.config.out_dir = (fs::path(base.out_dir) / spec.label).string();
        row.hash = config_hash(row.config);

        log << "--- " << spec.label << " (config hash " << std::hex << row.hash << std::dec << ")"
            << std::endl;
        TrainResult trained = train(row.config, log);
        row.parameter_count = init_params(row.config.model).parameter_count();

        RunConfig eval_cfg = row.config;
        EvalOptions eval_opts;
        eval_opts.split = "test";
        MetricReport report = run_eval(eval_cfg, trained.best_checkpoint, eval_opts, log);
        row.metrics = report.mean;
        rows.push_back(std::move(row));
    }

    std::ofstream csv(fs::path(base.out_dir) / "ablate.csv", std::ios::trunc);
    csv << "row,params,config_hash,mdice,miou,wfm,smeasure,emeasure,mae\n";
    std::ofstream table(fs::path(base.out_dir) / "ablate.txt", std::ios::trunc);
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%-12s %10s %18s %7s %7s %7s %7s %7s %7s\n", "row", "params",
                  "config_hash", "mDice", "mIoU", "Fwb", "Sa", "Emax", "MAE");
    table << buf;
    log << buf;
    for (const auto& row : rows) {
        const MetricValues& m = row.metrics;
        std::snprintf(buf, sizeof(buf), "%s,%lld,%016llx,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f\n",
                      row.label.c_str(), static_cast<long long>(row.parameter_count),
                      static_cast<unsigned long long>(row.hash), m.mdice, m.miou, m.wfm,
                      m.s_measure, m.e_measure, m.mae);
        csv << buf;
        std::snprintf(buf, sizeof(buf), "%-12s %10lld %016llx %7.3f %7.3f %7.3f %7.3f %7.3f %7.3f\n",
                      row.label.c_str(), static_cast<long long>(row.parameter_count),
                      static_cast<unsigned long long>(row.hash), m.mdice, m.miou, m.wfm,
                      m.s_measure, m.e_measure, m.mae);
        table << buf;
        log << buf;
    }
    return rows;
}

BenchReport run_bench(const RunConfig& cfg_in, const std::optional<std::filesystem::path>& checkpoint,
                      int iters, std::ostream& log) {
    RunConfig cfg = cfg_in;
    cfg.finalize();
    ModelParams params = checkpoint ? load_checkpoint(*checkpoint) : init_params(cfg.model);
    params.freeze();
    const int s = params.config.input_size;

    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<double> values(static_cast<std::size_t>(3) * s * s);
    for (double& v : values) v = unit(rng);
    Tensor image = Tensor::from_values({1, 3, s, s}, std::move(values));

    const int samples = std::max(30, iters);
    for (int i = 0; i < 10; ++i) forward(image, params);

    std::vector<double> latencies_ms;
    latencies_ms.reserve(static_cast<std::size_t>(samples));
    for (int i = 0; i < samples; ++i) {
        const auto start = std::chrono::steady_clock::now();
        forward(image, params);
        const auto stop = std::chrono::steady_clock::now();
        latencies_ms.push_back(std::chrono::duration<double, std::milli>(stop - start).count());
    }

    BenchReport report;
    report.iters = samples;
    for (double v : latencies_ms) report.mean_ms += v;
    report.mean_ms /= samples;
    std::vector<double> sorted = latencies_ms;
    std::sort(sorted.begin(), sorted.end());
    report.median_ms = samples % 2 ? sorted[samples / 2]
                                   : 0.5 * (sorted[samples / 2 - 1] + sorted[samples / 2]);
    for (double v : latencies_ms) {
        const double d = v - report.mean_ms;
        report.variance_ms2 += d * d;
    }
    report.variance_ms2 /= samples;
    report.stddev_ms = std::sqrt(report.variance_ms2);
    report.fps = 1000.0 / report.mean_ms;

    char line[256];
    std::snprintf(line, sizeof(line),
                  "input %dx%d  iters %d  mean_ms %.3f  median_ms %.3f  stddev_ms %.3f  fps %.2f",
                  s, s, report.iters, report.mean_ms, report.median_ms, report.stddev_ms,
                  report.fps);
    log << line << std::endl;
    return report;
}

}  // namespace msnet
