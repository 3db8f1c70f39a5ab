#include "msnet/verify.hpp"

#include <cmath>
#include <cstdio>

#include "msnet/error.hpp"
#include "msnet/losses.hpp"
#include "msnet/model.hpp"
#include "msnet/ops.hpp"

namespace msnet {

namespace {

// Values drawn away from 0 so relu/sub_abs/maxpool kinks stay clear of the
// finite-difference window.
Tensor randn_kink_free(const Shape& shape, std::mt19937_64& rng, double margin = 1e-3) {
    std::normal_distribution<double> dist(0.0, 1.0);
    std::vector<double> v(static_cast<std::size_t>(shape_numel(shape)));
    for (double& x : v) {
        do {
            x = dist(rng);
        } while (std::fabs(x) < margin);
    }
    return Tensor::from_values(shape, std::move(v));
}

Tensor rand_uniform(const Shape& shape, std::mt19937_64& rng, double lo, double hi) {
    std::uniform_real_distribution<double> dist(lo, hi);
    std::vector<double> v(static_cast<std::size_t>(shape_numel(shape)));
    for (double& x : v) x = dist(rng);
    return Tensor::from_values(shape, std::move(v));
}

Tensor random_binary_mask(const Shape& shape, std::mt19937_64& rng) {
    std::uniform_int_distribution<int> bit(0, 1);
    std::vector<double> v(static_cast<std::size_t>(shape_numel(shape)));
    for (double& x : v) x = bit(rng);
    return Tensor::from_values(shape, std::move(v));
}

void merge(GradcheckReport& total, const GradcheckReport& one) {
    total.max_rel_error = std::max(total.max_rel_error, one.max_rel_error);
    total.checked += one.checked;
    total.excluded += one.excluded;
}

}  // namespace

std::vector<OpCheckResult> run_op_gradcheck_suite(int trials, double h, double tol,
                                                  std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<OpCheckResult> results;

    struct Case {
        const char* name;
        std::function<GradcheckReport(std::mt19937_64&, std::uint64_t)> run;
    };

    auto simple = [&](const char* name, auto make_input, auto fn) {
        return Case{name, [make_input, fn, h, tol](std::mt19937_64& r, std::uint64_t pseed) {
                        Tensor input = make_input(r);
                        return gradcheck(fn, input, h, tol, pseed);  // tol applied by caller
                    }};
    };

    const Shape small4{1, 2, 4, 4};
    std::vector<Case> cases;

    cases.push_back(simple(
        "relu", [&](std::mt19937_64& r) { return randn_kink_free(small4, r); },
        [](const Tensor& x) { return relu(x); }));
    cases.push_back(simple(
        "sigmoid", [&](std::mt19937_64& r) { return randn_kink_free(small4, r); },
        [](const Tensor& x) { return sigmoid(x); }));
    cases.push_back(Case{"sub_abs", [&](std::mt19937_64& r, std::uint64_t pseed) {
                             // keep |a - b| away from the kink at zero difference
                             Tensor b = rand_uniform(small4, r, -1.0, 1.0);
                             Tensor a;
                             for (;;) {
                                 a = rand_uniform(small4, r, -1.0, 1.0);
                                 bool ok = true;
                                 for (std::size_t i = 0; i < a.values().size(); ++i)
                                     if (std::fabs(a.values()[i] - b.values()[i]) < 1e-3) ok = false;
                                 if (ok) break;
                             }
                             return gradcheck([&b](const Tensor& x) { return sub_abs(x, b); }, a,
                                              h, tol, pseed);
                         }});
    cases.push_back(Case{"add", [&](std::mt19937_64& r, std::uint64_t pseed) {
                             Tensor b = rand_uniform(small4, r, -1.0, 1.0);
                             Tensor a = rand_uniform(small4, r, -1.0, 1.0);
                             return gradcheck([&b](const Tensor& x) { return add(x, b); }, a, h,
                                              tol, pseed);
                         }});
    cases.push_back(Case{"sub", [&](std::mt19937_64& r, std::uint64_t pseed) {
                             Tensor b = rand_uniform(small4, r, -1.0, 1.0);
                             Tensor a = rand_uniform(small4, r, -1.0, 1.0);
                             return gradcheck([&b](const Tensor& x) { return sub(b, x); }, a, h,
                                              tol, pseed);
                         }});
    cases.push_back(Case{"mul", [&](std::mt19937_64& r, std::uint64_t pseed) {
                             Tensor b = rand_uniform(small4, r, -1.0, 1.0);
                             Tensor a = rand_uniform(small4, r, -1.0, 1.0);
                             return gradcheck([&b](const Tensor& x) { return mul(x, b); }, a, h,
                                              tol, pseed);
                         }});
    cases.push_back(Case{"div", [&](std::mt19937_64& r, std::uint64_t pseed) {
                             Tensor b = rand_uniform(small4, r, 0.5, 2.0);
                             Tensor a = rand_uniform(small4, r, -1.0, 1.0);
                             return gradcheck([&b](const Tensor& x) { return div(x, b); }, a, h,
                                              tol, pseed);
                         }});
    cases.push_back(simple(
        "mul_scalar", [&](std::mt19937_64& r) { return rand_uniform(small4, r, -1.0, 1.0); },
        [](const Tensor& x) { return mul_scalar(x, 1.7); }));
    cases.push_back(simple(
        "add_scalar", [&](std::mt19937_64& r) { return rand_uniform(small4, r, -1.0, 1.0); },
        [](const Tensor& x) { return add_scalar(x, -0.3); }));
    cases.push_back(simple(
        "sum", [&](std::mt19937_64& r) { return rand_uniform(small4, r, -1.0, 1.0); },
        [](const Tensor& x) { return sum(x); }));
    cases.push_back(simple(
        "mean", [&](std::mt19937_64& r) { return rand_uniform(small4, r, -1.0, 1.0); },
        [](const Tensor& x) { return mean(x); }));
    cases.push_back(simple(
        "clamp", [&](std::mt19937_64& r) { return rand_uniform(small4, r, 0.1, 0.9); },
        [](const Tensor& x) { return clamp(x, 0.0, 1.0); }));
    cases.push_back(simple(
        "log", [&](std::mt19937_64& r) { return rand_uniform(small4, r, 0.2, 2.0); },
        [](const Tensor& x) { return log(x); }));
    cases.push_back(simple(
        "sqrt_smoothed", [&](std::mt19937_64& r) { return rand_uniform(small4, r, 0.2, 2.0); },
        [](const Tensor& x) { return sqrt_smoothed(x); }));
    cases.push_back(simple(
        "upsample2", [&](std::mt19937_64& r) { return rand_uniform({1, 1, 2, 2}, r, -1.0, 1.0); },
        [](const Tensor& x) { return upsample2(x); }));
    cases.push_back(simple(
        "avgpool_window", [&](std::mt19937_64& r) { return rand_uniform({1, 1, 5, 5}, r, -1.0, 1.0); },
        [](const Tensor& x) { return avgpool_window(x, 3); }));
    cases.push_back(Case{"maxpool2", [&](std::mt19937_64& r, std::uint64_t pseed) {
                             // redraw when any window has a near-tie
                             Tensor a;
                             for (;;) {
                                 a = rand_uniform({1, 1, 4, 4}, r, -1.0, 1.0);
                                 bool ok = true;
                                 for (int oy = 0; oy < 2 && ok; ++oy)
                                     for (int ox = 0; ox < 2 && ok; ++ox) {
                                         double best = -1e9, second = -1e9;
                                         for (int dy = 0; dy < 2; ++dy)
                                             for (int dx = 0; dx < 2; ++dx) {
                                                 const double v = a.at4(0, 0, 2 * oy + dy, 2 * ox + dx);
                                                 if (v > best) {
                                                     second = best;
                                                     best = v;
                                                 } else if (v > second) {
                                                     second = v;
                                                 }
                                             }
                                         if (best - second < 1e-3) ok = false;
                                     }
                                 if (ok) break;
                             }
                             return gradcheck([](const Tensor& x) { return maxpool2(x); }, a, h,
                                              tol, pseed);
                         }});
    // conv2d w.r.t. each operand
    auto conv_fixture = [&](std::mt19937_64& r) {
        return std::tuple<Tensor, Tensor, Tensor>{rand_uniform({1, 2, 4, 4}, r, -1.0, 1.0),
                                                  rand_uniform({3, 2, 3, 3}, r, -1.0, 1.0),
                                                  rand_uniform({3}, r, -0.5, 0.5)};
    };
    cases.push_back(Case{"conv2d.input", [&, conv_fixture](std::mt19937_64& r, std::uint64_t pseed) {
                             auto [in, w, b] = conv_fixture(r);
                             return gradcheck(
                                 [&w, &b](const Tensor& x) { return conv2d(x, w, b, 1, 1); }, in,
                                 h, tol, pseed);
                         }});
    cases.push_back(Case{"conv2d.weight", [&, conv_fixture](std::mt19937_64& r, std::uint64_t pseed) {
                             auto [in, w, b] = conv_fixture(r);
                             return gradcheck(
                                 [&in, &b](const Tensor& x) { return conv2d(in, x, b, 1, 1); }, w,
                                 h, tol, pseed);
                         }});
    cases.push_back(Case{"conv2d.bias", [&, conv_fixture](std::mt19937_64& r, std::uint64_t pseed) {
                             auto [in, w, b] = conv_fixture(r);
                             return gradcheck(
                                 [&in, &w](const Tensor& x) { return conv2d(in, w, x, 1, 1); }, b,
                                 h, tol, pseed);
                         }});
    cases.push_back(Case{"conv2d.stride2", [&, conv_fixture](std::mt19937_64& r, std::uint64_t pseed) {
                             auto [in, w, b] = conv_fixture(r);
                             Tensor wide = rand_uniform({1, 2, 5, 5}, r, -1.0, 1.0);
                             return gradcheck(
                                 [&w, &b](const Tensor& x) { return conv2d(x, w, b, 2, 1); }, wide,
                                 h, tol, pseed);
                         }});

    for (const auto& c : cases) {
        OpCheckResult result;
        result.name = c.name;
        for (int trial = 0; trial < trials; ++trial)
            merge(result.report, c.run(rng, seed + static_cast<std::uint64_t>(trial) * 1315423911ULL));
        result.report.pass = result.report.checked > 0 && result.report.max_rel_error <= tol;
        // override the per-call h/tol bookkeeping with the suite-level h
        results.push_back(std::move(result));
    }

    return results;
}

OpCheckResult run_model_gradcheck(int trials, int param_samples, double h, double tol,
                                  std::uint64_t seed) {
    OpCheckResult result;
    result.name = "model.total_loss";
    std::mt19937_64 rng(seed);

    for (int trial = 0; trial < trials; ++trial) {
        ModelConfig mc;
        mc.input_size = 32;
        mc.channels = 4;
        mc.pyramid_depth = 5;
        mc.fusion_mode = FusionMode::subtract;
        mc.lossnet_enabled = true;
        mc.seed = seed + static_cast<std::uint64_t>(trial);
        ModelParams params = init_params(mc);
        LossNetParams lossnet = LossNetParams::init(mc.seed ^ 0xabcdULL);
        LossConfig lc;
        lc.pool_k = 3;

        Tensor image = rand_uniform({1, 3, 32, 32}, rng, 0.0, 1.0);
        Tensor gt = random_binary_mask({1, 1, 32, 32}, rng);

        auto loss_value = [&]() {
            Tensor pred = forward(image, params);
            return total_loss(pred, gt, &lossnet, lc, true).value;
        };

        Tensor loss = loss_value();
        backward(loss);
        const double f0 = loss.item();

        auto named = params.named_tensors();
        std::uniform_int_distribution<std::size_t> tensor_pick(0, named.size() - 1);
        for (int s = 0; s < param_samples; ++s) {
            auto& tensor = named[tensor_pick(rng)].second;
            std::uniform_int_distribution<std::size_t> coord_pick(0, tensor.values().size() - 1);
            const std::size_t i = coord_pick(rng);
            auto f_at_delta = [&](double delta) {
                const double saved = tensor.values()[i];
                tensor.values()[i] = saved + delta;
                const double v = loss_value().item();
                tensor.values()[i] = saved;
                return v;
            };
            const FdCheck check = fd_check_coordinate(f_at_delta, f0, tensor.grad()[i], h, tol);
            if (check.excluded) {
                ++result.report.excluded;
                continue;
            }
            result.report.max_rel_error = std::max(result.report.max_rel_error, check.rel);
            ++result.report.checked;
        }
        params.zero_grad();
    }
    result.report.pass = result.report.checked > 0 && result.report.max_rel_error <= tol;
    return result;
}

OpCheckResult run_loss_gradcheck(int trials, double h, double tol, std::uint64_t seed) {
    OpCheckResult result;
    result.name = "loss.d_pred";
    std::mt19937_64 rng(seed);
    LossNetParams lossnet = LossNetParams::init(seed ^ 0x5a5aULL);
    LossConfig lc;
    lc.pool_k = 3;

    for (int trial = 0; trial < trials; ++trial) {
        // predictions away from the clamp boundary at eps and 1 - eps
        Tensor pred = rand_uniform({1, 1, 16, 16}, rng, 0.05, 0.95);
        Tensor gt = random_binary_mask({1, 1, 16, 16}, rng);
        auto fn = [&gt, &lossnet, &lc](const Tensor& x) {
            return total_loss(x, gt, &lossnet, lc, true).value;
        };
        merge(result.report, gradcheck(fn, pred, h, tol, seed + trial));
    }
    result.report.pass = result.report.checked > 0 && result.report.max_rel_error <= tol;
    return result;
}

std::string format_result(const OpCheckResult& result) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "op=%-16s max_rel_err=%.3e  checked=%-6d excluded=%-4d %s",
                  result.name.c_str(), result.report.max_rel_error, result.report.checked,
                  result.report.excluded, result.report.pass ? "pass" : "FAIL");
    return buf;
}

}  // namespace msnet
