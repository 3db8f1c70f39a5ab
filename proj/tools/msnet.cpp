// Command-line surface: data generation, training, evaluation, prediction,
// gradient checking, ablation runs and a throughput benchmark.

#include <CLI11.hpp>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "msnet/checkpoint.hpp"
#include "msnet/config.hpp"
#include "msnet/data.hpp"
#include "msnet/error.hpp"
#include "msnet/metrics.hpp"
#include "msnet/train.hpp"
#include "msnet/verify.hpp"

namespace {

using msnet::RunConfig;

// RunConfig-backed flags route through the same key/value parser as config
// files, so flags and files behave identically and override in order:
// defaults, then --config, then explicit flags.
struct ConfigFlag {
    std::string value;
    CLI::Option* option = nullptr;
    const char* key = nullptr;
};

class ConfigBinder {
  public:
    explicit ConfigBinder(CLI::App* cmd) : cmd_(cmd) {
        config_path_option_ = cmd->add_option("--config", config_path_,
                                              "key = value config file (flags override it)");
    }

    void bind(const std::string& flag, const char* key, const std::string& help) {
        flags_.push_back(std::make_unique<ConfigFlag>());
        ConfigFlag& f = *flags_.back();
        f.key = key;
        f.option = cmd_->add_option(flag, f.value, help);
    }

    RunConfig resolve() const {
        RunConfig cfg;
        if (config_path_option_->count() > 0) msnet::apply_config_file(cfg, config_path_);
        for (const auto& f : flags_)
            if (f->option->count() > 0) msnet::apply_config_entry(cfg, f->key, f->value, "flag");
        cfg.finalize();
        return cfg;
    }

    // true when the key was set explicitly, by flag or by the config file
    bool touched(const char* key) const {
        for (const auto& f : flags_)
            if (f->option->count() > 0 && std::string(f->key) == key) return true;
        if (config_path_option_->count() > 0) {
            RunConfig defaults, from_file;
            msnet::apply_config_file(from_file, config_path_);
            if (field_of(from_file, key) != field_of(defaults, key)) return true;
        }
        return false;
    }

  private:
    static std::string field_of(const RunConfig& cfg, const char* key) {
        const std::string text = "\n" + msnet::serialize_config(cfg);
        const std::string prefix = "\n" + std::string(key) + " = ";
        const auto pos = text.find(prefix);
        if (pos == std::string::npos) return "";
        const auto end = text.find('\n', pos + 1);
        return text.substr(pos, end - pos);
    }

    CLI::App* cmd_;
    std::string config_path_;
    CLI::Option* config_path_option_ = nullptr;
    std::vector<std::unique_ptr<ConfigFlag>> flags_;
};

void bind_model_flags(ConfigBinder& binder) {
    binder.bind("--input-size", "input_size", "square input side, multiple of 32");
    binder.bind("--channels", "channels", "width after channel reduction");
    binder.bind("--depth", "pyramid_depth", "subtraction pyramid depth, 1..5");
    binder.bind("--fusion", "fusion_mode", "subtract | add");
    binder.bind("--lossnet", "lossnet_enabled", "enable the feature loss (true/false)");
    binder.bind("--model-seed", "model_seed", "parameter init seed");
    binder.bind("--weight-gain", "weight_gain", "boundary weight gain");
    binder.bind("--pool-k", "pool_k", "weight-map pooling window (odd)");
    binder.bind("--lossnet-seed", "lossnet_seed", "frozen feature net seed");
    binder.bind("--eps", "eps", "BCE clamp epsilon");
}

void bind_train_flags(ConfigBinder& binder) {
    binder.bind("--momentum", "momentum", "SGD momentum");
    binder.bind("--weight-decay", "weight_decay", "decoupled weight decay");
    binder.bind("--lr-backbone", "lr_backbone_max", "peak encoder learning rate");
    binder.bind("--lr-head", "lr_head_max", "peak learning rate for everything else");
    binder.bind("--epochs", "epochs", "training epochs");
    binder.bind("--batch-size", "batch_size", "mini-batch size");
    binder.bind("--warmup", "warmup_fraction", "warmup fraction of total iterations");
    binder.bind("--clip-norm", "clip_norm", "per-group gradient norm clip (<= 0 disables)");
}

int dispatch(int argc, char** argv) {
    CLI::App app{"multi-scale subtraction segmentation toolkit"};
    app.require_subcommand(1);

    auto* gen = app.add_subcommand("gen-data", "generate a synthetic dataset");
    ConfigBinder gen_binder(gen);
    gen_binder.bind("--out", "out_dir", "output dataset directory");
    gen_binder.bind("--seed", "seed", "dataset seed");
    gen_binder.bind("--n", "gen_n", "number of samples");
    gen_binder.bind("--size", "input_size", "sample side, multiple of 32");
    gen_binder.bind("--difficulty", "gen_difficulty", "easy | medium | hard");
    bool force = false;
    gen->add_flag("--force", force, "overwrite a non-empty output directory");
    std::string ratios;
    auto* ratios_opt =
        gen->add_option("--ratios", ratios, "train,val,test ratios (default 0.8,0.1,0.1)");

    auto* train_cmd = app.add_subcommand("train", "train a model");
    ConfigBinder train_binder(train_cmd);
    train_binder.bind("--data", "data_dir", "dataset directory");
    train_binder.bind("--out", "out_dir", "output directory for checkpoints and logs");
    train_binder.bind("--seed", "seed", "run seed");
    train_binder.bind("--threshold", "threshold", "validation binarization threshold");
    bind_model_flags(train_binder);
    bind_train_flags(train_binder);

    auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on a split");
    ConfigBinder eval_binder(eval_cmd);
    eval_binder.bind("--data", "data_dir", "dataset directory");
    eval_binder.bind("--out", "out_dir", "report output directory");
    eval_binder.bind("--threshold", "threshold", "binarization threshold");
    bind_model_flags(eval_binder);
    std::string eval_ckpt, eval_split = "test", pred_dir;
    eval_cmd->add_option("--ckpt", eval_ckpt, "checkpoint path");
    eval_cmd->add_option("--split", eval_split, "train | val | test");
    bool gt_as_pred = false;
    eval_cmd->add_flag("--gt-as-pred", gt_as_pred, "sanity mode: score ground truth against itself");
    eval_cmd->add_option("--pred-dir", pred_dir,
                         "score an existing directory of .pgm predictions instead of a checkpoint");

    auto* predict_cmd = app.add_subcommand("predict", "write probability and mask maps");
    ConfigBinder predict_binder(predict_cmd);
    predict_binder.bind("--out", "out_dir", "output directory");
    std::string predict_ckpt;
    predict_cmd->add_option("--ckpt", predict_ckpt, "checkpoint path")->required();
    std::vector<std::string> predict_images;
    predict_cmd->add_option("images", predict_images, "input .ppm images")->required();

    auto* grad_cmd = app.add_subcommand("gradcheck", "finite-difference gradient verification");
    std::string scope = "ops";
    grad_cmd->add_option("--scope", scope, "ops | model | loss");
    int trials = 20;
    grad_cmd->add_option("--trials", trials, "random trials per operator");
    double fd_h = 1e-5, fd_tol = 1e-5;
    grad_cmd->add_option("--step", fd_h, "finite-difference step");
    grad_cmd->add_option("--tol", fd_tol, "max relative error tolerance");
    std::uint64_t grad_seed = 20240601;
    grad_cmd->add_option("--seed", grad_seed, "trial seed");

    auto* ablate_cmd = app.add_subcommand("ablate", "train and score the ablation grid");
    ConfigBinder ablate_binder(ablate_cmd);
    ablate_binder.bind("--data", "data_dir", "dataset directory");
    ablate_binder.bind("--out", "out_dir", "output directory");
    ablate_binder.bind("--seed", "seed", "shared run seed");
    ablate_binder.bind("--threshold", "threshold", "binarization threshold");
    bind_model_flags(ablate_binder);
    bind_train_flags(ablate_binder);

    auto* bench_cmd = app.add_subcommand("bench", "forward-pass throughput");
    ConfigBinder bench_binder(bench_cmd);
    bench_binder.bind("--seed", "seed", "input seed");
    bind_model_flags(bench_binder);
    std::string bench_ckpt;
    bench_cmd->add_option("--ckpt", bench_ckpt, "checkpoint path (fresh init otherwise)");
    int bench_iters = 50;
    bench_cmd->add_option("--iters", bench_iters, "timed iterations (minimum 30)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: usage: " << e.what() << std::endl;
        return 2;
    }

    if (gen->parsed()) {
        RunConfig cfg = gen_binder.resolve();
        if (ratios_opt->count() > 0) {
            if (std::sscanf(ratios.c_str(), "%lf,%lf,%lf", &cfg.ratio_train, &cfg.ratio_val,
                            &cfg.ratio_test) != 3)
                msnet::fail(msnet::ErrorCategory::usage,
                            "--ratios expects three comma-separated numbers");
        }
        cfg.validate();
        if (cfg.out_dir.empty()) msnet::fail(msnet::ErrorCategory::usage, "gen-data: --out is required");
        auto counts = msnet::generate_dataset(cfg.out_dir, cfg.seed, cfg.gen_n, cfg.model.input_size,
                                              cfg.gen_difficulty,
                                              {cfg.ratio_train, cfg.ratio_val, cfg.ratio_test}, force);
        std::cout << "train " << counts.train << " val " << counts.val << " test " << counts.test
                  << std::endl;
        return 0;
    }

    if (train_cmd->parsed()) {
        RunConfig cfg = train_binder.resolve();
        cfg.validate();
        auto result = msnet::train(cfg, std::cout);
        std::cout << "best val mdice " << result.best_val_mdice << " -> "
                  << result.best_checkpoint.string() << std::endl;
        return 0;
    }

    if (eval_cmd->parsed()) {
        RunConfig cfg = eval_binder.resolve();
        if (!pred_dir.empty()) {
            msnet::MetricReport report = msnet::evaluate_dataset(
                pred_dir, std::filesystem::path(cfg.data_dir) / "masks", cfg.threshold);
            std::filesystem::create_directories(cfg.out_dir);
            msnet::write_csv(report, std::filesystem::path(cfg.out_dir) / "report.csv");
            msnet::write_table(report, std::cout, "pred-dir");
            return 0;
        }
        std::optional<std::filesystem::path> ckpt;
        if (!eval_ckpt.empty()) {
            ckpt = eval_ckpt;
            if (!gt_as_pred) {
                msnet::ModelParams loaded = msnet::load_checkpoint(*ckpt);
                msnet::check_config_matches_checkpoint(
                    cfg.model, loaded.config, eval_binder.touched("input_size"),
                    eval_binder.touched("channels"), eval_binder.touched("pyramid_depth"),
                    eval_binder.touched("fusion_mode"));
            }
        }
        msnet::EvalOptions options;
        options.split = eval_split;
        options.gt_as_pred = gt_as_pred;
        msnet::run_eval(cfg, ckpt, options, std::cout);
        return 0;
    }

    if (predict_cmd->parsed()) {
        RunConfig cfg = predict_binder.resolve();
        std::vector<std::filesystem::path> paths(predict_images.begin(), predict_images.end());
        msnet::run_predict(cfg, predict_ckpt, paths, std::cout);
        return 0;
    }

    if (grad_cmd->parsed()) {
        bool all_pass = true;
        if (scope == "ops") {
            for (const auto& result : msnet::run_op_gradcheck_suite(trials, fd_h, fd_tol, grad_seed)) {
                std::cout << msnet::format_result(result) << std::endl;
                all_pass = all_pass && result.report.pass;
            }
        } else if (scope == "model") {
            auto result = msnet::run_model_gradcheck(std::max(1, trials / 5), 50, fd_h,
                                                     std::max(fd_tol, 1e-4), grad_seed);
            std::cout << msnet::format_result(result) << std::endl;
            all_pass = result.report.pass;
        } else if (scope == "loss") {
            auto result = msnet::run_loss_gradcheck(std::max(1, trials / 5), fd_h,
                                                    std::max(fd_tol, 1e-4), grad_seed);
            std::cout << msnet::format_result(result) << std::endl;
            all_pass = result.report.pass;
        } else {
            msnet::fail(msnet::ErrorCategory::usage, "gradcheck: unknown scope '" + scope + "'");
        }
        if (!all_pass) msnet::fail(msnet::ErrorCategory::numeric, "gradient check failed");
        return 0;
    }

    if (ablate_cmd->parsed()) {
        RunConfig cfg = ablate_binder.resolve();
        cfg.validate();
        msnet::run_ablate(cfg, std::cout);
        return 0;
    }

    if (bench_cmd->parsed()) {
        RunConfig cfg = bench_binder.resolve();
        std::optional<std::filesystem::path> ckpt;
        if (!bench_ckpt.empty()) ckpt = bench_ckpt;
        msnet::run_bench(cfg, ckpt, bench_iters, std::cout);
        return 0;
    }

    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return dispatch(argc, argv);
    } catch (const msnet::Error& e) {
        std::cerr << "error: " << msnet::to_string(e.category()) << ": " << e.what() << std::endl;
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: internal: " << e.what() << std::endl;
        return 1;
    }
}
