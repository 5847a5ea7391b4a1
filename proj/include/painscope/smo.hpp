#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "painscope/matrix.hpp"

namespace painscope {

struct SmoResult {
  std::vector<double> alpha;  // dual coefficients in [0, C_i]
  double bias = 0.0;          // f(x) = Σ α_i y_i K(x_i, x) + bias
  double objective = 0.0;     // ½ αᵀQα − Σ α, Q_ij = y_i y_j K_ij
  double kkt_gap = 0.0;       // max violating-pair gap at exit
  std::size_t iterations = 0;
  bool converged = false;     // false: iteration cap hit, best iterate returned
};

/// Sequential minimal optimization for the C-SVM dual with second-order
/// working-set selection. `labels` are ±1; `upper` holds each sample's box
/// bound C_i. Stops when the maximal KKT violation drops below `tol`.
SmoResult solve_smo(const Matrix& kernel, std::span<const double> labels, std::span<const double> upper,
                    double tol = 1e-3, std::size_t max_iterations = 10'000'000);

/// Uniform box bound C for every sample.
SmoResult solve_smo(const Matrix& kernel, std::span<const double> labels, double c, double tol = 1e-3,
                    std::size_t max_iterations = 10'000'000);

}  // namespace painscope
