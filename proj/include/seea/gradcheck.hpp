#pragma once

#include <functional>
#include <string>
#include <vector>

#include "seea/graph.hpp"

namespace seea {

/// A differentiable scalar-valued computation with explicit leaf inputs,
/// ready for finite-difference verification. The forward closure must be a
/// pure function of the leaves.
struct PreparedCheck {
  std::string name;
  std::vector<Tensor<double>> inputs;
  std::function<Var<double>(const std::vector<Var<double>>&)> forward;
};

struct GradCheckResult {
  std::string name;
  double max_rel_err = 0.0;
  double kink_margin = 0.0;  // min distance of relu/maxpool inputs from their kinks
  bool pass = false;
};

/// Names of the standard checks: every primitive op plus every composite
/// block and the focal loss.
std::vector<std::string> gradcheck_names();

PreparedCheck build_gradcheck(const std::string& name, uint64_t seed);

/// Central finite differences in f64. Elementwise relative error uses
/// denominator max(1, |analytic|, |numeric|). Inputs whose nominal forward
/// pass comes within `min_margin` of a relu/maxpool kink are regenerated
/// from the next seed (up to 10 attempts).
GradCheckResult run_gradcheck(const std::string& name, uint64_t seed, double h = 1e-5,
                              double tol = 1e-6, double min_margin = 1e-2);

/// Runs every standard check. Returns the per-op results.
std::vector<GradCheckResult> run_all_gradchecks(uint64_t seed);

}  // namespace seea
