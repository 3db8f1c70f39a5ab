#pragma once

#include <functional>

#include "msnet/tensor.hpp"

namespace msnet {

struct GradcheckReport {
    double max_rel_error = 0.0;
    bool pass = false;
    int checked = 0;   // coordinates compared
    int excluded = 0;  // coordinates skipped as nondifferentiable (kinks)
};

// Central-finite-difference check of the analytic gradient of fn w.r.t.
// `input`. fn may return a tensor of any shape; it is contracted with a
// fixed random projection (seeded by projection_seed) to obtain a scalar, so
// the check covers a full vector-Jacobian product.
//
// Relative error per coordinate is |analytic - numeric| / max(1, |analytic|,
// |numeric|). Nondifferentiable points are excluded rather than failed: a
// coordinate counts as a kink when its one-sided slopes disagree, and a
// coordinate whose window merely straddles a kink off-center is retried at
// successively smaller steps until the window clears it (see
// fd_check_coordinate).
GradcheckReport gradcheck(const std::function<Tensor(const Tensor&)>& fn, const Tensor& input,
                          double h, double tol, std::uint64_t projection_seed = 0x5eed);

struct FdCheck {
    double rel = 0.0;
    bool excluded = false;
};

// One-coordinate central-difference verdict. f_at_delta evaluates the scalar
// graph with the coordinate displaced by delta; f0 is the undisplaced value.
// Steps h, h/16, h/256 and h/4096 are tried in turn: the coordinate passes
// with the best relative error seen, is excluded when any step exposes
// disagreeing one-sided slopes (|f+ + f- - 2 f0| / (2 step) above 0.1 * (1 +
// |central|)), and otherwise reports the scale-consistent mismatch.
FdCheck fd_check_coordinate(const std::function<double(double)>& f_at_delta, double f0,
                            double analytic, double h, double tol);

}  // namespace msnet
