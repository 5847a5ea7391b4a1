#include "painscope/smo.hpp"

#include <cmath>
#include <limits>

#include "painscope/error.hpp"

namespace painscope {
namespace {

constexpr double kTau = 1e-12;

}  // namespace

SmoResult solve_smo(const Matrix& kernel, std::span<const double> labels, double c, double tol,
                    std::size_t max_iterations) {
  const std::vector<double> upper(labels.size(), c);
  return solve_smo(kernel, labels, upper, tol, max_iterations);
}

SmoResult solve_smo(const Matrix& kernel, std::span<const double> y, std::span<const double> upper, double tol,
                    std::size_t max_iterations) {
  const std::size_t n = y.size();
  if (kernel.rows() != n || kernel.cols() != n || upper.size() != n)
    throw Error(ErrorKind::InvalidArgument, "kernel, labels and bounds must agree in size");
  for (double v : y)
    if (v != 1.0 && v != -1.0) throw Error(ErrorKind::InvalidArgument, "SMO labels must be +1/-1");

  SmoResult res;
  res.alpha.assign(n, 0.0);
  std::vector<double> grad(n, -1.0);  // ∇ = Qα − e
  auto& alpha = res.alpha;

  const auto q = [&](std::size_t i, std::size_t j) { return y[i] * y[j] * kernel(i, j); };
  const auto in_up = [&](std::size_t t) { return (y[t] > 0 && alpha[t] < upper[t]) || (y[t] < 0 && alpha[t] > 0); };
  const auto in_low = [&](std::size_t t) { return (y[t] > 0 && alpha[t] > 0) || (y[t] < 0 && alpha[t] < upper[t]); };

  while (true) {
    // Maximal violating first index.
    double gmax = -std::numeric_limits<double>::infinity();
    std::size_t i = n;
    for (std::size_t t = 0; t < n; ++t) {
      if (!in_up(t)) continue;
      const double v = -y[t] * grad[t];
      if (v > gmax) {
        gmax = v;
        i = t;
      }
    }
    // Second index by second-order gain; track the lower bound for the stop test.
    double gmin = std::numeric_limits<double>::infinity();
    double best = std::numeric_limits<double>::infinity();
    std::size_t j = n;
    for (std::size_t t = 0; t < n; ++t) {
      if (!in_low(t)) continue;
      const double v = -y[t] * grad[t];
      gmin = std::min(gmin, v);
      if (i == n) continue;
      const double b = gmax - v;
      if (b <= 0) continue;
      double a = kernel(i, i) + kernel(t, t) - 2.0 * kernel(i, t);
      if (a <= 0) a = kTau;
      const double score = -(b * b) / a;
      if (score < best) {
        best = score;
        j = t;
      }
    }
    res.kkt_gap = (i == n || !std::isfinite(gmin)) ? 0.0 : gmax - gmin;
    if (i == n || j == n || res.kkt_gap < tol) {
      res.converged = true;
      break;
    }
    if (res.iterations >= max_iterations) break;
    ++res.iterations;

    const double ci = upper[i];
    const double cj = upper[j];
    const double old_ai = alpha[i];
    const double old_aj = alpha[j];
    if (y[i] != y[j]) {
      double quad = kernel(i, i) + kernel(j, j) + 2.0 * q(i, j);
      if (quad <= 0) quad = kTau;
      const double delta = (-grad[i] - grad[j]) / quad;
      const double diff = alpha[i] - alpha[j];
      alpha[i] += delta;
      alpha[j] += delta;
      if (diff > 0) {
        if (alpha[j] < 0) {
          alpha[j] = 0;
          alpha[i] = diff;
        }
      } else if (alpha[i] < 0) {
        alpha[i] = 0;
        alpha[j] = -diff;
      }
      if (diff > ci - cj) {
        if (alpha[i] > ci) {
          alpha[i] = ci;
          alpha[j] = ci - diff;
        }
      } else if (alpha[j] > cj) {
        alpha[j] = cj;
        alpha[i] = cj + diff;
      }
    } else {
      double quad = kernel(i, i) + kernel(j, j) - 2.0 * q(i, j);
      if (quad <= 0) quad = kTau;
      const double delta = (grad[i] - grad[j]) / quad;
      const double sum = alpha[i] + alpha[j];
      alpha[i] -= delta;
      alpha[j] += delta;
      if (sum > ci) {
        if (alpha[i] > ci) {
          alpha[i] = ci;
          alpha[j] = sum - ci;
        }
      } else if (alpha[j] < 0) {
        alpha[j] = 0;
        alpha[i] = sum;
      }
      if (sum > cj) {
        if (alpha[j] > cj) {
          alpha[j] = cj;
          alpha[i] = sum - cj;
        }
      } else if (alpha[i] < 0) {
        alpha[i] = 0;
        alpha[j] = sum;
      }
    }
    const double dai = alpha[i] - old_ai;
    const double daj = alpha[j] - old_aj;
    for (std::size_t t = 0; t < n; ++t) grad[t] += q(t, i) * dai + q(t, j) * daj;
  }

  // Bias from free vectors; midpoint of the feasible interval otherwise.
  double sum_free = 0.0;
  std::size_t n_free = 0;
  double ub = std::numeric_limits<double>::infinity();
  double lb = -std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t < n; ++t) {
    const double yg = y[t] * grad[t];
    if (alpha[t] > 0 && alpha[t] < upper[t]) {
      sum_free += yg;
      ++n_free;
    } else if ((alpha[t] >= upper[t] && y[t] < 0) || (alpha[t] <= 0 && y[t] > 0)) {
      ub = std::min(ub, yg);
    } else {
      lb = std::max(lb, yg);
    }
  }
  double rho = 0.0;
  if (n_free > 0) rho = sum_free / static_cast<double>(n_free);
  else if (std::isfinite(ub) && std::isfinite(lb)) rho = 0.5 * (ub + lb);
  else if (std::isfinite(ub)) rho = ub;
  else if (std::isfinite(lb)) rho = lb;
  res.bias = -rho;

  double obj = 0.0;
  for (std::size_t t = 0; t < n; ++t) obj += alpha[t] * (grad[t] - 1.0);
  res.objective = 0.5 * obj;
  return res;
}

}  // namespace painscope
