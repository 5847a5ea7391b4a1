#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "painscope/matrix.hpp"

namespace painscope {

struct TreeNode {
  std::int32_t feature = -1;  // -1 marks a leaf
  double threshold = 0.0;     // x[feature] <= threshold goes left
  std::int32_t left = -1;
  std::int32_t right = -1;
  double value = 0.0;         // leaf output

  bool operator==(const TreeNode&) const = default;
};

struct Tree {
  std::vector<TreeNode> nodes;  // root at 0

  double predict(std::span<const double> x) const;
  std::int32_t leaf_of(std::span<const double> x) const;
  std::size_t depth() const;
  bool operator==(const Tree&) const = default;
};

/// Split score over per-node sums G = Σg, H = Σh.
///   Gini:         g = w·y, h = w      (−2·G(H−G)/H, leaf = G/H)
///   SquaredError: g = r,   h = 1      (G²/H,        leaf = G/H)
///   SecondOrder:  g = −∂,  h = ∂²     (G²/(H+λ),    leaf = G/(H+λ))
enum class SplitCriterion { Gini, SquaredError, SecondOrder };

struct TreeParams {
  SplitCriterion criterion = SplitCriterion::Gini;
  std::size_t max_depth = 8;
  std::size_t max_features = 0;   // candidate features per node; 0 = all
  double lambda = 0.0;            // SecondOrder L2 leaf penalty
  double min_child_hessian = 0.0; // minimum H in each child
  double min_gain = 1e-12;
};

/// Column-major copy of X with each column's row order sorted ascending.
/// Built once per training set and shared by every tree grown on it.
class PresortedData {
public:
  explicit PresortedData(const Matrix& x);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  double value(std::size_t row, std::size_t feature) const noexcept { return columns_[feature * rows_ + row]; }
  std::span<const std::uint32_t> order(std::size_t feature) const noexcept {
    return {order_.data() + feature * rows_, rows_};
  }

private:
  std::size_t rows_;
  std::size_t cols_;
  std::vector<double> columns_;
  std::vector<std::uint32_t> order_;
};

struct GrownTree {
  Tree tree;
  std::vector<std::int32_t> leaf_of_row;  // -1 for rows not in play (zero weight)
};

/// Grows one tree level by level. Rows with h == 0 and g == 0 and
/// `in_play[i] == 0` are ignored. Candidate features per node are drawn from
/// `rng` when max_features < cols. Ties go to the lower feature index, then
/// the lower threshold.
GrownTree grow_tree(const PresortedData& data, std::span<const double> g, std::span<const double> h,
                    std::span<const std::uint8_t> in_play, const TreeParams& params, std::mt19937_64& rng);

}  // namespace painscope
