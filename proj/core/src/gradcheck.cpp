#include "msnet/gradcheck.hpp"

#include <cmath>
#include <limits>

#include "msnet/error.hpp"
#include "msnet/ops.hpp"

namespace msnet {

namespace {

double rel_error(double analytic, double numeric) {
    return std::fabs(analytic - numeric) / std::max({1.0, std::fabs(analytic), std::fabs(numeric)});
}

}  // namespace

FdCheck fd_check_coordinate(const std::function<double(double)>& f_at_delta, double f0,
                            double analytic, double h, double tol) {
    FdCheck out;
    out.rel = std::numeric_limits<double>::infinity();
    for (int refine = 0; refine < 4; ++refine) {
        const double step = h / std::pow(16.0, refine);
        const double fp = f_at_delta(step);
        const double fm = f_at_delta(-step);
        const double central = (fp - fm) / (2.0 * step);
        const double gap = std::fabs(fp + fm - 2.0 * f0) / (2.0 * step);
        if (gap > 0.1 * (1.0 + std::fabs(central))) {
            out.excluded = true;  // the point itself sits on a kink
            return out;
        }
        out.rel = std::min(out.rel, rel_error(analytic, central));
        if (out.rel <= tol) return out;
    }
    return out;
}

GradcheckReport gradcheck(const std::function<Tensor(const Tensor&)>& fn, const Tensor& input,
                          double h, double tol, std::uint64_t projection_seed) {
    if (!(h > 0.0)) fail(ErrorCategory::usage, "gradcheck: h must be positive");

    Tensor x = input.detached_copy(/*requires_grad=*/true);
    Tensor out = fn(x);

    std::mt19937_64 prng(projection_seed);
    Tensor projection = Tensor::randn(out.shape(), prng);

    auto project = [&projection](const Tensor& t) { return sum(mul(t, projection)); };

    Tensor loss = project(out);
    backward(loss);
    std::vector<double> analytic = x.grad();
    const double f0 = loss.item();

    Tensor probe = input.detached_copy(/*requires_grad=*/false);
    GradcheckReport report;
    for (std::size_t i = 0; i < probe.values().size(); ++i) {
        auto f_at_delta = [&](double delta) {
            const double saved = probe.values()[i];
            probe.values()[i] = saved + delta;
            const double v = project(fn(probe)).item();
            probe.values()[i] = saved;
            return v;
        };
        const FdCheck check = fd_check_coordinate(f_at_delta, f0, analytic[i], h, tol);
        if (check.excluded) {
            ++report.excluded;
            continue;
        }
        report.max_rel_error = std::max(report.max_rel_error, check.rel);
        ++report.checked;
    }
    report.pass = report.checked > 0 && report.max_rel_error <= tol;
    return report;
}

}  // namespace msnet
