#include "msnet/ops.hpp"

#include <algorithm>
#include <cmath>

#include "msnet/error.hpp"

namespace msnet {

using detail::Node;
using detail::make_op_node;

namespace {

void require_defined(const Tensor& t, const char* op) {
    if (!t.defined()) fail(ErrorCategory::state, std::string(op) + ": undefined tensor operand");
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape())
        fail(ErrorCategory::shape, std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                                       " vs " + shape_str(b.shape()));
}

void require_4d(const Tensor& t, const char* op) {
    if (t.shape().size() != 4)
        fail(ErrorCategory::shape, std::string(op) + ": expected a 4-D N x C x H x W tensor, got " +
                                       shape_str(t.shape()));
}

// Elementwise op with one differentiable operand. dfdx receives the input
// value and must return the local derivative.
template <typename Fwd, typename Dfdx>
Tensor unary_elementwise(const char* op, const Tensor& a, Fwd fwd, Dfdx dfdx) {
    require_defined(a, op);
    const auto& av = a.values();
    std::vector<double> out(av.size());
    for (std::size_t i = 0; i < av.size(); ++i) out[i] = fwd(av[i]);
    auto pa = a.node();
    return make_op_node(op, a.shape(), std::move(out), {pa}, [pa, dfdx](Node& self) {
        if (!pa->requires_grad) return;
        pa->ensure_grad();
        const auto& g = self.grad;
        for (std::size_t i = 0; i < g.size(); ++i) pa->grad[i] += g[i] * dfdx(pa->values[i]);
    });
}

}  // namespace

Tensor relu(const Tensor& input) {
    return unary_elementwise(
        "relu", input, [](double x) { return x > 0.0 ? x : 0.0; },
        [](double x) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor sigmoid(const Tensor& input) {
    require_defined(input, "sigmoid");
    const auto& av = input.values();
    std::vector<double> out(av.size());
    for (std::size_t i = 0; i < av.size(); ++i) {
        const double x = av[i];
        if (x >= 0.0) {
            out[i] = 1.0 / (1.0 + std::exp(-x));
        } else {
            const double e = std::exp(x);
            out[i] = e / (1.0 + e);
        }
    }
    auto pa = input.node();
    return make_op_node("sigmoid", input.shape(), std::move(out), {pa}, [pa](Node& self) {
        if (!pa->requires_grad) return;
        pa->ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            const double s = self.values[i];
            pa->grad[i] += self.grad[i] * s * (1.0 - s);
        }
    });
}

Tensor sub_abs(const Tensor& a, const Tensor& b) {
    require_defined(a, "sub_abs");
    require_defined(b, "sub_abs");
    require_same_shape(a, b, "sub_abs");
    const auto& av = a.values();
    const auto& bv = b.values();
    std::vector<double> out(av.size());
    for (std::size_t i = 0; i < av.size(); ++i) out[i] = std::fabs(av[i] - bv[i]);
    auto pa = a.node();
    auto pb = b.node();
    return make_op_node("sub_abs", a.shape(), std::move(out), {pa, pb}, [pa, pb](Node& self) {
        if (pa->requires_grad) pa->ensure_grad();
        if (pb->requires_grad) pb->ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            const double d = pa->values[i] - pb->values[i];
            const double s = d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
            const double g = self.grad[i] * s;
            if (pa->requires_grad) pa->grad[i] += g;
            if (pb->requires_grad) pb->grad[i] -= g;
        }
    });
}

Tensor add(const Tensor& a, const Tensor& b) {
    require_defined(a, "add");
    require_defined(b, "add");
    require_same_shape(a, b, "add");
    const auto& av = a.values();
    const auto& bv = b.values();
    std::vector<double> out(av.size());
    for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] + bv[i];
    auto pa = a.node();
    auto pb = b.node();
    return make_op_node("add", a.shape(), std::move(out), {pa, pb}, [pa, pb](Node& self) {
        if (pa->requires_grad) {
            pa->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) pa->grad[i] += self.grad[i];
        }
        if (pb->requires_grad) {
            pb->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) pb->grad[i] += self.grad[i];
        }
    });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require_defined(a, "sub");
    require_defined(b, "sub");
    require_same_shape(a, b, "sub");
    const auto& av = a.values();
    const auto& bv = b.values();
    std::vector<double> out(av.size());
    for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] - bv[i];
    auto pa = a.node();
    auto pb = b.node();
    return make_op_node("sub", a.shape(), std::move(out), {pa, pb}, [pa, pb](Node& self) {
        if (pa->requires_grad) {
            pa->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) pa->grad[i] += self.grad[i];
        }
        if (pb->requires_grad) {
            pb->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) pb->grad[i] -= self.grad[i];
        }
    });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require_defined(a, "mul");
    require_defined(b, "mul");
    require_same_shape(a, b, "mul");
    const auto& av = a.values();
    const auto& bv = b.values();
    std::vector<double> out(av.size());
    for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] * bv[i];
    auto pa = a.node();
    auto pb = b.node();
    return make_op_node("mul", a.shape(), std::move(out), {pa, pb}, [pa, pb](Node& self) {
        if (pa->requires_grad) {
            pa->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i)
                pa->grad[i] += self.grad[i] * pb->values[i];
        }
        if (pb->requires_grad) {
            pb->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i)
                pb->grad[i] += self.grad[i] * pa->values[i];
        }
    });
}

Tensor div(const Tensor& a, const Tensor& b) {
    require_defined(a, "div");
    require_defined(b, "div");
    require_same_shape(a, b, "div");
    const auto& av = a.values();
    const auto& bv = b.values();
    std::vector<double> out(av.size());
    for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] / bv[i];
    auto pa = a.node();
    auto pb = b.node();
    return make_op_node("div", a.shape(), std::move(out), {pa, pb}, [pa, pb](Node& self) {
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            const double binv = 1.0 / pb->values[i];
            if (pa->requires_grad) {
                pa->ensure_grad();
                pa->grad[i] += self.grad[i] * binv;
            }
            if (pb->requires_grad) {
                pb->ensure_grad();
                pb->grad[i] -= self.grad[i] * pa->values[i] * binv * binv;
            }
        }
    });
}

Tensor mul_scalar(const Tensor& a, double s) {
    return unary_elementwise(
        "mul_scalar", a, [s](double x) { return x * s; }, [s](double) { return s; });
}

Tensor add_scalar(const Tensor& a, double s) {
    return unary_elementwise(
        "add_scalar", a, [s](double x) { return x + s; }, [](double) { return 1.0; });
}

Tensor sum(const Tensor& a) {
    require_defined(a, "sum");
    double acc = 0.0;
    for (double x : a.values()) acc += x;
    auto pa = a.node();
    return make_op_node("sum", {1}, {acc}, {pa}, [pa](Node& self) {
        if (!pa->requires_grad) return;
        pa->ensure_grad();
        const double g = self.grad[0];
        for (double& x : pa->grad) x += g;
    });
}

Tensor mean(const Tensor& a) {
    require_defined(a, "mean");
    const double n = static_cast<double>(a.numel());
    double acc = 0.0;
    for (double x : a.values()) acc += x;
    auto pa = a.node();
    return make_op_node("mean", {1}, {acc / n}, {pa}, [pa, n](Node& self) {
        if (!pa->requires_grad) return;
        pa->ensure_grad();
        const double g = self.grad[0] / n;
        for (double& x : pa->grad) x += g;
    });
}

Tensor clamp(const Tensor& a, double lo, double hi) {
    require_defined(a, "clamp");
    if (!(lo < hi)) fail(ErrorCategory::usage, "clamp: lo must be < hi");
    return unary_elementwise(
        "clamp", a, [lo, hi](double x) { return std::min(std::max(x, lo), hi); },
        [lo, hi](double x) { return (x > lo && x < hi) ? 1.0 : 0.0; });
}

Tensor log(const Tensor& a) {
    require_defined(a, "log");
    for (double x : a.values())
        if (!(x > 0.0)) fail(ErrorCategory::numeric, "log: non-positive input " + std::to_string(x));
    return unary_elementwise(
        "log", a, [](double x) { return std::log(x); }, [](double x) { return 1.0 / x; });
}

Tensor sqrt_smoothed(const Tensor& a, double grad_eps) {
    require_defined(a, "sqrt_smoothed");
    for (double x : a.values())
        if (x < 0.0) fail(ErrorCategory::numeric, "sqrt_smoothed: negative input " + std::to_string(x));
    return unary_elementwise(
        "sqrt_smoothed", a, [](double x) { return std::sqrt(x); },
        [grad_eps](double x) { return 0.5 / std::sqrt(x + grad_eps); });
}

Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias, int stride,
              int padding) {
    require_defined(input, "conv2d");
    require_defined(weight, "conv2d");
    require_defined(bias, "conv2d");
    require_4d(input, "conv2d");
    require_4d(weight, "conv2d");
    const int N = input.dim(0), Ci = input.dim(1), H = input.dim(2), W = input.dim(3);
    const int Co = weight.dim(0), K = weight.dim(2);
    if (weight.dim(1) != Ci)
        fail(ErrorCategory::shape, "conv2d: input channels (" + std::to_string(Ci) +
                                       ") do not match weight input channels (" +
                                       std::to_string(weight.dim(1)) + ")");
    if (weight.dim(3) != K) fail(ErrorCategory::shape, "conv2d: kernel must be square");
    if (K % 2 == 0) fail(ErrorCategory::shape, "conv2d: kernel size must be odd, got " + std::to_string(K));
    if (bias.shape() != Shape{Co})
        fail(ErrorCategory::shape, "conv2d: bias shape " + shape_str(bias.shape()) +
                                       " does not match output channels " + std::to_string(Co));
    if (stride < 1) fail(ErrorCategory::usage, "conv2d: stride must be >= 1");
    if (padding < 0) fail(ErrorCategory::usage, "conv2d: padding must be >= 0");
    if (H + 2 * padding < K || W + 2 * padding < K)
        fail(ErrorCategory::shape, "conv2d: padded input smaller than kernel");

    const int Ho = (H + 2 * padding - K) / stride + 1;
    const int Wo = (W + 2 * padding - K) / stride + 1;
    std::vector<double> out(static_cast<std::size_t>(N) * Co * Ho * Wo);

    const double* in = input.values().data();
    const double* w = weight.values().data();
    const double* b = bias.values().data();

    // Per (ky,kx) tap the valid output range is precomputed so the inner
    // loops run without bounds checks; the stride-1 path is the hot one.
    auto tap_range = [](int pad, int tap, int in_extent, int out_extent, int stride, int& lo, int& hi) {
        // valid o satisfy 0 <= o*stride - pad + tap <= in_extent - 1
        const int lo_num = pad - tap;
        lo = lo_num <= 0 ? 0 : (lo_num + stride - 1) / stride;
        const int hi_num = in_extent - 1 - tap + pad;
        hi = hi_num < 0 ? -1 : std::min(out_extent - 1, hi_num / stride);
    };

    for (int n = 0; n < N; ++n) {
        for (int co = 0; co < Co; ++co) {
            double* out_nc = out.data() + (static_cast<std::size_t>(n) * Co + co) * Ho * Wo;
            std::fill(out_nc, out_nc + static_cast<std::size_t>(Ho) * Wo, b[co]);
            for (int ci = 0; ci < Ci; ++ci) {
                const double* in_nc = in + (static_cast<std::size_t>(n) * Ci + ci) * H * W;
                const double* w_cc = w + (static_cast<std::size_t>(co) * Ci + ci) * K * K;
                for (int ky = 0; ky < K; ++ky) {
                    int oy_lo, oy_hi;
                    tap_range(padding, ky, H, Ho, stride, oy_lo, oy_hi);
                    for (int kx = 0; kx < K; ++kx) {
                        const double wv = w_cc[ky * K + kx];
                        int ox_lo, ox_hi;
                        tap_range(padding, kx, W, Wo, stride, ox_lo, ox_hi);
                        if (ox_hi < ox_lo) continue;
                        for (int oy = oy_lo; oy <= oy_hi; ++oy) {
                            const int iy = oy * stride - padding + ky;
                            const double* in_row = in_nc + static_cast<std::size_t>(iy) * W +
                                                   (ox_lo * stride - padding + kx);
                            double* out_row = out_nc + static_cast<std::size_t>(oy) * Wo + ox_lo;
                            const int count = ox_hi - ox_lo + 1;
                            if (stride == 1) {
                                for (int i = 0; i < count; ++i) out_row[i] += wv * in_row[i];
                            } else {
                                for (int i = 0; i < count; ++i)
                                    out_row[i] += wv * in_row[static_cast<std::size_t>(i) * stride];
                            }
                        }
                    }
                }
            }
        }
    }

    auto pin = input.node();
    auto pw = weight.node();
    auto pb = bias.node();
    auto bwd = [pin, pw, pb, N, Ci, H, W, Co, K, Ho, Wo, stride, padding, tap_range](Node& self) {
        const double* g = self.grad.data();
        const double* in = pin->values.data();
        const double* w = pw->values.data();
        const bool need_in = pin->requires_grad;
        const bool need_w = pw->requires_grad;
        const bool need_b = pb->requires_grad;
        if (need_in) pin->ensure_grad();
        if (need_w) pw->ensure_grad();
        if (need_b) pb->ensure_grad();

        if (need_b) {
            for (int n = 0; n < N; ++n)
                for (int co = 0; co < Co; ++co) {
                    const double* g_nc = g + (static_cast<std::size_t>(n) * Co + co) * Ho * Wo;
                    double acc = 0.0;
                    for (std::int64_t i = 0; i < static_cast<std::int64_t>(Ho) * Wo; ++i) acc += g_nc[i];
                    pb->grad[static_cast<std::size_t>(co)] += acc;
                }
        }
        if (!need_in && !need_w) return;

        for (int n = 0; n < N; ++n) {
            for (int co = 0; co < Co; ++co) {
                const double* g_nc = g + (static_cast<std::size_t>(n) * Co + co) * Ho * Wo;
                for (int ci = 0; ci < Ci; ++ci) {
                    const double* in_nc = in + (static_cast<std::size_t>(n) * Ci + ci) * H * W;
                    double* gin_nc = need_in
                                         ? pin->grad.data() + (static_cast<std::size_t>(n) * Ci + ci) * H * W
                                         : nullptr;
                    const double* w_cc = w + (static_cast<std::size_t>(co) * Ci + ci) * K * K;
                    double* gw_cc = need_w
                                        ? pw->grad.data() + (static_cast<std::size_t>(co) * Ci + ci) * K * K
                                        : nullptr;
                    for (int ky = 0; ky < K; ++ky) {
                        int oy_lo, oy_hi;
                        tap_range(padding, ky, H, Ho, stride, oy_lo, oy_hi);
                        for (int kx = 0; kx < K; ++kx) {
                            int ox_lo, ox_hi;
                            tap_range(padding, kx, W, Wo, stride, ox_lo, ox_hi);
                            if (ox_hi < ox_lo || oy_hi < oy_lo) continue;
                            const int count = ox_hi - ox_lo + 1;
                            const double wv = w_cc[ky * K + kx];
                            double wacc = 0.0;
                            for (int oy = oy_lo; oy <= oy_hi; ++oy) {
                                const int iy = oy * stride - padding + ky;
                                const std::size_t in_off = static_cast<std::size_t>(iy) * W +
                                                           (ox_lo * stride - padding + kx);
                                const double* g_row = g_nc + static_cast<std::size_t>(oy) * Wo + ox_lo;
                                if (stride == 1) {
                                    if (need_in) {
                                        double* gin_row = gin_nc + in_off;
                                        for (int i = 0; i < count; ++i) gin_row[i] += wv * g_row[i];
                                    }
                                    if (need_w) {
                                        const double* in_row = in_nc + in_off;
                                        for (int i = 0; i < count; ++i) wacc += in_row[i] * g_row[i];
                                    }
                                } else {
                                    if (need_in) {
                                        double* gin_row = gin_nc + in_off;
                                        for (int i = 0; i < count; ++i)
                                            gin_row[static_cast<std::size_t>(i) * stride] += wv * g_row[i];
                                    }
                                    if (need_w) {
                                        const double* in_row = in_nc + in_off;
                                        for (int i = 0; i < count; ++i)
                                            wacc += in_row[static_cast<std::size_t>(i) * stride] * g_row[i];
                                    }
                                }
                            }
                            if (need_w) gw_cc[ky * K + kx] += wacc;
                        }
                    }
                }
            }
        }
    };
    return make_op_node("conv2d", {N, Co, Ho, Wo}, std::move(out), {pin, pw, pb}, std::move(bwd));
}

Tensor maxpool2(const Tensor& input) {
    require_defined(input, "maxpool2");
    require_4d(input, "maxpool2");
    const int N = input.dim(0), C = input.dim(1), H = input.dim(2), W = input.dim(3);
    if (H % 2 != 0 || W % 2 != 0)
        fail(ErrorCategory::shape,
             "maxpool2: odd spatial extent " + std::to_string(H) + "x" + std::to_string(W));
    const int Ho = H / 2, Wo = W / 2;
    std::vector<double> out(static_cast<std::size_t>(N) * C * Ho * Wo);
    // argmax flat index into the input plane, for backward routing
    auto argmax = std::make_shared<std::vector<std::int64_t>>(out.size());
    const double* in = input.values().data();
    std::size_t o = 0;
    for (int nc = 0; nc < N * C; ++nc) {
        const double* plane = in + static_cast<std::size_t>(nc) * H * W;
        const std::int64_t plane_off = static_cast<std::int64_t>(nc) * H * W;
        for (int oy = 0; oy < Ho; ++oy) {
            for (int ox = 0; ox < Wo; ++ox, ++o) {
                const int iy = 2 * oy, ix = 2 * ox;
                // first occurrence in row-major window order wins ties
                std::int64_t best = static_cast<std::int64_t>(iy) * W + ix;
                double bv = plane[best];
                const std::int64_t cands[3] = {best + 1, best + W, best + W + 1};
                for (std::int64_t c : cands) {
                    if (plane[c] > bv) {
                        bv = plane[c];
                        best = c;
                    }
                }
                out[o] = bv;
                (*argmax)[o] = plane_off + best;
            }
        }
    }
    auto pa = input.node();
    return make_op_node("maxpool2", {N, C, Ho, Wo}, std::move(out), {pa}, [pa, argmax](Node& self) {
        if (!pa->requires_grad) return;
        pa->ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i)
            pa->grad[static_cast<std::size_t>((*argmax)[i])] += self.grad[i];
    });
}

namespace {

// Separable zero-padded window sum divided by k^2; self-adjoint, so backward
// applies the same kernel to the output gradient.
void window_mean_plane(const double* in, double* out, int H, int W, int k, double scale,
                       std::vector<double>& tmp) {
    const int r = k / 2;
    tmp.assign(static_cast<std::size_t>(H) * W, 0.0);
    for (int y = 0; y < H; ++y) {
        const double* row = in + static_cast<std::size_t>(y) * W;
        double* trow = tmp.data() + static_cast<std::size_t>(y) * W;
        for (int x = 0; x < W; ++x) {
            const int lo = std::max(0, x - r), hi = std::min(W - 1, x + r);
            double acc = 0.0;
            for (int i = lo; i <= hi; ++i) acc += row[i];
            trow[x] = acc;
        }
    }
    for (int y = 0; y < H; ++y) {
        const int lo = std::max(0, y - r), hi = std::min(H - 1, y + r);
        double* orow = out + static_cast<std::size_t>(y) * W;
        for (int x = 0; x < W; ++x) {
            double acc = 0.0;
            for (int i = lo; i <= hi; ++i) acc += tmp[static_cast<std::size_t>(i) * W + x];
            orow[x] += acc * scale;
        }
    }
}

}  // namespace

Tensor avgpool_window(const Tensor& input, int k) {
    require_defined(input, "avgpool_window");
    require_4d(input, "avgpool_window");
    if (k < 1 || k % 2 == 0)
        fail(ErrorCategory::usage, "avgpool_window: window must be a positive odd integer, got " +
                                       std::to_string(k));
    const int N = input.dim(0), C = input.dim(1), H = input.dim(2), W = input.dim(3);
    const double scale = 1.0 / (static_cast<double>(k) * k);
    std::vector<double> out(input.values().size(), 0.0);
    std::vector<double> tmp;
    for (int nc = 0; nc < N * C; ++nc) {
        const std::size_t off = static_cast<std::size_t>(nc) * H * W;
        window_mean_plane(input.values().data() + off, out.data() + off, H, W, k, scale, tmp);
    }
    auto pa = input.node();
    return make_op_node("avgpool_window", input.shape(), std::move(out), {pa},
                        [pa, N, C, H, W, k, scale](Node& self) {
                            if (!pa->requires_grad) return;
                            pa->ensure_grad();
                            std::vector<double> tmp;
                            for (int nc = 0; nc < N * C; ++nc) {
                                const std::size_t off = static_cast<std::size_t>(nc) * H * W;
                                window_mean_plane(self.grad.data() + off, pa->grad.data() + off, H,
                                                  W, k, scale, tmp);
                            }
                        });
}

Tensor upsample2(const Tensor& input) {
    require_defined(input, "upsample2");
    require_4d(input, "upsample2");
    const int N = input.dim(0), C = input.dim(1), H = input.dim(2), W = input.dim(3);
    const int Ho = 2 * H, Wo = 2 * W;
    std::vector<double> out(static_cast<std::size_t>(N) * C * Ho * Wo);
    const double* in = input.values().data();
    for (int nc = 0; nc < N * C; ++nc) {
        const double* plane = in + static_cast<std::size_t>(nc) * H * W;
        double* oplane = out.data() + static_cast<std::size_t>(nc) * Ho * Wo;
        for (int y = 0; y < Ho; ++y) {
            const double* irow = plane + static_cast<std::size_t>(y / 2) * W;
            double* orow = oplane + static_cast<std::size_t>(y) * Wo;
            for (int x = 0; x < Wo; ++x) orow[x] = irow[x / 2];
        }
    }
    auto pa = input.node();
    return make_op_node("upsample2", {N, C, Ho, Wo}, std::move(out), {pa},
                        [pa, N, C, H, W, Ho, Wo](Node& self) {
                            if (!pa->requires_grad) return;
                            pa->ensure_grad();
                            const double* g = self.grad.data();
                            for (int nc = 0; nc < N * C; ++nc) {
                                double* gplane = pa->grad.data() + static_cast<std::size_t>(nc) * H * W;
                                const double* goplane = g + static_cast<std::size_t>(nc) * Ho * Wo;
                                for (int y = 0; y < Ho; ++y) {
                                    double* grow = gplane + static_cast<std::size_t>(y / 2) * W;
                                    const double* gorow = goplane + static_cast<std::size_t>(y) * Wo;
                                    for (int x = 0; x < Wo; ++x) grow[x / 2] += gorow[x];
                                }
                            }
                        });
}

}  // namespace msnet
