#include "painscope/trees.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

#include "painscope/error.hpp"

namespace painscope {

std::int32_t Tree::leaf_of(std::span<const double> x) const {
  std::int32_t at = 0;
  while (nodes[at].feature >= 0) {
    const auto& n = nodes[at];
    at = x[n.feature] <= n.threshold ? n.left : n.right;
  }
  return at;
}

double Tree::predict(std::span<const double> x) const { return nodes[leaf_of(x)].value; }

std::size_t Tree::depth() const {
  std::vector<std::size_t> d(nodes.size(), 0);
  std::size_t best = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i].feature < 0) continue;
    d[nodes[i].left] = d[nodes[i].right] = d[i] + 1;
    best = std::max(best, d[i] + 1);
  }
  return best;
}

PresortedData::PresortedData(const Matrix& x)
    : rows_(x.rows()), cols_(x.cols()), columns_(x.rows() * x.cols()), order_(x.rows() * x.cols()) {
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) columns_[c * rows_ + r] = x(r, c);
  for (std::size_t c = 0; c < cols_; ++c) {
    auto* ord = order_.data() + c * rows_;
    const auto* col = columns_.data() + c * rows_;
    std::iota(ord, ord + rows_, 0u);
    std::stable_sort(ord, ord + rows_, [col](std::uint32_t a, std::uint32_t b) { return col[a] < col[b]; });
  }
}

namespace {

struct Sums {
  double g = 0.0;
  double h = 0.0;
  std::size_t count = 0;
};

double score(const Sums& s, const TreeParams& p) {
  switch (p.criterion) {
    case SplitCriterion::Gini:
      return s.h > 0 ? -2.0 * s.g * (s.h - s.g) / s.h : 0.0;
    case SplitCriterion::SquaredError:
      return s.h > 0 ? s.g * s.g / s.h : 0.0;
    case SplitCriterion::SecondOrder:
      return s.g * s.g / (s.h + p.lambda);
  }
  return 0.0;
}

double leaf_value(const Sums& s, const TreeParams& p) {
  switch (p.criterion) {
    case SplitCriterion::Gini:
    case SplitCriterion::SquaredError:
      return s.h > 0 ? s.g / s.h : 0.0;
    case SplitCriterion::SecondOrder:
      return s.h + p.lambda > 0 ? s.g / (s.h + p.lambda) : 0.0;
  }
  return 0.0;
}

bool child_ok(const Sums& s, const TreeParams& p) {
  if (s.count == 0) return false;
  if (p.criterion == SplitCriterion::Gini && s.h <= 0) return false;
  return s.h >= p.min_child_hessian;
}

struct Candidate {
  double gain = -std::numeric_limits<double>::infinity();
  std::int32_t feature = -1;
  double threshold = 0.0;
};

// Per-node running state while scanning one feature.
struct Scan {
  Sums left;
  double last = 0.0;
  bool started = false;
};

}  // namespace

GrownTree grow_tree(const PresortedData& data, std::span<const double> g, std::span<const double> h,
                    std::span<const std::uint8_t> in_play, const TreeParams& params, std::mt19937_64& rng) {
  const std::size_t n = data.rows();
  const std::size_t d = data.cols();
  if (g.size() != n || h.size() != n || in_play.size() != n)
    throw Error(ErrorKind::InvalidArgument, "tree inputs disagree in length");

  GrownTree out;
  auto& nodes = out.tree.nodes;
  out.leaf_of_row.assign(n, -1);
  auto& node_of = out.leaf_of_row;

  Sums root;
  for (std::size_t i = 0; i < n; ++i) {
    if (!in_play[i]) continue;
    node_of[i] = 0;
    root.g += g[i];
    root.h += h[i];
    ++root.count;
  }
  nodes.push_back(TreeNode{});
  nodes[0].value = leaf_value(root, params);
  if (root.count == 0) return out;

  std::vector<std::int32_t> frontier{0};
  std::vector<Sums> totals{root};
  const bool subsample = params.max_features > 0 && params.max_features < d;
  std::vector<std::uint32_t> feature_pool(d);

  for (std::size_t depth = 0; depth < params.max_depth && !frontier.empty(); ++depth) {
    const std::size_t m = frontier.size();
    // slot_of_node maps tree node id to its index in this level's frontier.
    std::vector<std::int32_t> slot_of_node(nodes.size(), -1);
    for (std::size_t s = 0; s < m; ++s) slot_of_node[frontier[s]] = static_cast<std::int32_t>(s);

    // Candidate features per frontier node.
    std::vector<std::uint8_t> allowed;
    std::vector<std::uint8_t> feature_used(d, subsample ? 0 : 1);
    if (subsample) {
      allowed.assign(m * d, 0);
      for (std::size_t s = 0; s < m; ++s) {
        std::iota(feature_pool.begin(), feature_pool.end(), 0u);
        for (std::size_t k = 0; k < params.max_features; ++k) {
          std::uniform_int_distribution<std::size_t> pick(k, d - 1);
          std::swap(feature_pool[k], feature_pool[pick(rng)]);
          allowed[s * d + feature_pool[k]] = 1;
          feature_used[feature_pool[k]] = 1;
        }
      }
    }

    std::vector<Candidate> best(m);
    std::vector<Scan> scan(m);
    for (std::size_t f = 0; f < d; ++f) {
      if (!feature_used[f]) continue;
      std::fill(scan.begin(), scan.end(), Scan{});
      for (std::uint32_t row : data.order(f)) {
        const std::int32_t node = node_of[row];
        if (node < 0) continue;
        const std::int32_t slot = slot_of_node[node];
        if (slot < 0) continue;
        if (subsample && !allowed[slot * d + f]) continue;
        auto& sc = scan[slot];
        const double v = data.value(row, f);
        if (sc.started && v > sc.last) {
          const Sums& tot = totals[slot];
          Sums right{tot.g - sc.left.g, tot.h - sc.left.h, tot.count - sc.left.count};
          if (child_ok(sc.left, params) && child_ok(right, params)) {
            const double gain = score(sc.left, params) + score(right, params) - score(tot, params);
            if (gain > best[slot].gain) {
              double thr = 0.5 * (sc.last + v);
              if (!(thr < v)) thr = sc.last;
              best[slot] = Candidate{gain, static_cast<std::int32_t>(f), thr};
            }
          }
        }
        sc.left.g += g[row];
        sc.left.h += h[row];
        ++sc.left.count;
        sc.last = v;
        sc.started = true;
      }
    }

    std::vector<std::int32_t> next;
    std::vector<Sums> next_totals;
    std::vector<std::int32_t> left_child(m, -1);
    for (std::size_t s = 0; s < m; ++s) {
      if (best[s].feature < 0 || !(best[s].gain > params.min_gain)) continue;
      const auto id = frontier[s];
      const auto l = static_cast<std::int32_t>(nodes.size());
      nodes.push_back(TreeNode{});
      nodes.push_back(TreeNode{});
      nodes[id].feature = best[s].feature;
      nodes[id].threshold = best[s].threshold;
      nodes[id].left = l;
      nodes[id].right = l + 1;
      left_child[s] = l;
    }
    std::vector<Sums> child_sums(nodes.size());
    for (std::size_t i = 0; i < n; ++i) {
      const std::int32_t node = node_of[i];
      if (node < 0 || node >= static_cast<std::int32_t>(slot_of_node.size())) continue;
      const std::int32_t slot = slot_of_node[node];
      if (slot < 0 || left_child[slot] < 0) continue;
      const auto& split = nodes[node];
      const std::int32_t child = data.value(i, split.feature) <= split.threshold ? split.left : split.right;
      node_of[i] = child;
      child_sums[child].g += g[i];
      child_sums[child].h += h[i];
      ++child_sums[child].count;
    }
    for (std::size_t s = 0; s < m; ++s) {
      if (left_child[s] < 0) continue;
      for (std::int32_t c : {left_child[s], left_child[s] + 1}) {
        nodes[c].value = leaf_value(child_sums[c], params);
        next.push_back(c);
        next_totals.push_back(child_sums[c]);
      }
    }
    frontier = std::move(next);
    totals = std::move(next_totals);
  }
  return out;
}

}  // namespace painscope
