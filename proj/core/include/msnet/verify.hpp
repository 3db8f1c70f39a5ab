#pragma once

#include <string>
#include <vector>

#include "msnet/gradcheck.hpp"

namespace msnet {

struct OpCheckResult {
    std::string name;
    GradcheckReport report;
};

// Finite-difference sweep over every differentiable operator, `trials`
// seeded random inputs each (kink coordinates excluded and counted).
std::vector<OpCheckResult> run_op_gradcheck_suite(int trials, double h, double tol,
                                                  std::uint64_t seed);

// End-to-end check of d(total_loss)/d(parameters) on a tiny model (input 32)
// against central differences, `param_samples` random parameter coordinates
// per trial.
OpCheckResult run_model_gradcheck(int trials, int param_samples, double h, double tol,
                                  std::uint64_t seed);

// d(total_loss)/d(prediction) away from the clamp boundaries.
OpCheckResult run_loss_gradcheck(int trials, double h, double tol, std::uint64_t seed);

std::string format_result(const OpCheckResult& result);

}  // namespace msnet
