#pragma once

#include <functional>
#include <vector>

namespace fieldrecon {

struct NelderMeadResult {
  std::vector<double> x;
  double value;
  int iterations;
};

/// Unconstrained Nelder-Mead with standard coefficients. Stops when the
/// simplex value spread and diameter both drop below `tol` or after
/// `max_iter` iterations. Deterministic.
NelderMeadResult nelder_mead(const std::function<double(const std::vector<double>&)>& f,
                             std::vector<double> x0, double initial_step, double tol = 1e-12,
                             int max_iter = 2000);

}  // namespace fieldrecon
