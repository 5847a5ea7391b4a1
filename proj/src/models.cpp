#include "painscope/models.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "painscope/error.hpp"
#include "painscope/smo.hpp"

namespace painscope {
namespace {

using EMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using EVector = Eigen::VectorXd;

Eigen::Map<const EMatrix> view(const Matrix& m) {
  return {m.data(), static_cast<Eigen::Index>(m.rows()), static_cast<Eigen::Index>(m.cols())};
}

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// −log σ(z) for y = 1, −log(1 − σ(z)) for y = 0.
double log_loss(double z, std::uint8_t y) {
  const double s = y ? -z : z;
  return s > 0 ? s + std::log1p(std::exp(-s)) : std::log1p(std::exp(s));
}

struct AlgorithmName {
  AlgorithmId id;
  std::string_view name;
};

constexpr AlgorithmName kNames[] = {
    {AlgorithmId::SvmRbf, "svm_rbf"},
    {AlgorithmId::Knn, "knn"},
    {AlgorithmId::RandomForest, "random_forest"},
    {AlgorithmId::RegGradBoost, "reg_grad_boost"},
    {AlgorithmId::LogisticRegression, "logistic_regression"},
    {AlgorithmId::LinearDiscriminant, "linear_discriminant"},
    {AlgorithmId::GradBoost, "grad_boost"},
    {AlgorithmId::GaussianNb, "gaussian_nb"},
};

enum class ValueKind { Positive, NonNegative, Count, Flag, GammaSpec, FeatureSpec };

struct KeySpec {
  std::string_view key;
  std::string_view fallback;
  ValueKind kind;
};

std::vector<KeySpec> key_specs(AlgorithmId id) {
  switch (id) {
    case AlgorithmId::SvmRbf:
      return {{"C", "1.0", ValueKind::Positive},
              {"gamma", "scale", ValueKind::GammaSpec},
              {"tol", "1e-3", ValueKind::Positive},
              {"max_iter", "10000000", ValueKind::Count}};
    case AlgorithmId::Knn:
      return {{"k", "5", ValueKind::Count}};
    case AlgorithmId::RandomForest:
      return {{"n_trees", "100", ValueKind::Count},
              {"max_depth", "8", ValueKind::Count},
              {"max_features", "sqrt", ValueKind::FeatureSpec},
              {"bootstrap", "true", ValueKind::Flag}};
    case AlgorithmId::GradBoost:
      return {{"n_trees", "200", ValueKind::Count},
              {"max_depth", "3", ValueKind::Count},
              {"learning_rate", "0.1", ValueKind::Positive}};
    case AlgorithmId::RegGradBoost:
      return {{"n_rounds", "100", ValueKind::Count},
              {"max_depth", "4", ValueKind::Count},
              {"learning_rate", "0.1", ValueKind::Positive},
              {"lambda", "1.0", ValueKind::NonNegative},
              {"min_child_weight", "1.0", ValueKind::NonNegative}};
    case AlgorithmId::LogisticRegression:
      return {{"lambda", "1e-2", ValueKind::NonNegative},
              {"grad_tol", "1e-6", ValueKind::Positive},
              {"max_iter", "200", ValueKind::Count}};
    case AlgorithmId::LinearDiscriminant:
      return {{"shrinkage", "1e-3", ValueKind::NonNegative}};
    case AlgorithmId::GaussianNb:
      return {{"var_smoothing", "1e-9", ValueKind::NonNegative}};
  }
  return {};
}

std::optional<double> parse_double(std::string_view s) {
  double v = 0.0;
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc{} || ptr != end || !std::isfinite(v)) return std::nullopt;
  return v;
}

bool valid_value(ValueKind kind, std::string_view v) {
  const auto num = parse_double(v);
  switch (kind) {
    case ValueKind::Positive:
      return num && *num > 0;
    case ValueKind::NonNegative:
      return num && *num >= 0;
    case ValueKind::Count:
      return num && *num >= 1 && std::floor(*num) == *num;
    case ValueKind::Flag:
      return v == "true" || v == "false";
    case ValueKind::GammaSpec:
      return v == "scale" || (num && *num > 0);
    case ValueKind::FeatureSpec:
      return v == "sqrt" || v == "all" || (num && *num >= 1 && std::floor(*num) == *num);
  }
  return false;
}

void check_training_data(const Matrix& x, std::span<const std::uint8_t> y) {
  if (x.rows() != y.size()) throw Error(ErrorKind::InvalidArgument, "feature rows and labels disagree in count");
  if (x.rows() < 10) throw Error(ErrorKind::TooFewRows, "training needs at least 10 rows");
  if (x.cols() == 0) throw Error(ErrorKind::InvalidArgument, "training matrix has no columns");
  std::size_t high = 0;
  for (auto v : y) {
    if (v > 1) throw Error(ErrorKind::InvalidArgument, "labels must be 0 or 1");
    high += v;
  }
  if (high == 0 || high == y.size()) throw Error(ErrorKind::SingleClassData, "training data holds a single class");
  for (double v : x.storage())
    if (!std::isfinite(v)) throw Error(ErrorKind::NonFiniteFeature, "training matrix holds a non-finite value");
}

Matrix rbf_kernel(const Matrix& a, const Matrix& b, double gamma) {
  const auto ea = view(a);
  const auto eb = view(b);
  const EVector na = ea.rowwise().squaredNorm();
  const EVector nb = eb.rowwise().squaredNorm();
  Matrix k(a.rows(), b.rows());
  Eigen::Map<EMatrix> ek(k.data(), static_cast<Eigen::Index>(a.rows()), static_cast<Eigen::Index>(b.rows()));
  ek.noalias() = ea * eb.transpose();
  for (Eigen::Index i = 0; i < ek.rows(); ++i)
    for (Eigen::Index j = 0; j < ek.cols(); ++j) ek(i, j) = std::exp(-gamma * std::max(0.0, na(i) + nb(j) - 2.0 * ek(i, j)));
  return k;
}

SvmParams train_svm(const Hyperparams& hp, const Matrix& x, std::span<const std::uint8_t> y, TrainMeta& meta) {
  SvmParams p;
  p.dims = x.cols();
  p.gamma = hp.text("gamma") == "scale" ? scale_gamma(x) : hp.number("gamma");
  const Matrix k = rbf_kernel(x, x, p.gamma);
  std::vector<double> ys(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) ys[i] = y[i] ? 1.0 : -1.0;
  const auto res = solve_smo(k, ys, hp.number("C"), hp.number("tol"), hp.count("max_iter"));
  p.iterations = res.iterations;
  p.converged = res.converged;
  p.bias = res.bias;
  meta.loss_history = {res.objective};

  std::vector<std::size_t> sv;
  for (std::size_t i = 0; i < res.alpha.size(); ++i)
    if (res.alpha[i] > 0) sv.push_back(i);
  p.support_vectors = Matrix(sv.size(), x.cols());
  for (std::size_t s = 0; s < sv.size(); ++s) {
    std::copy_n(x.row(sv[s]).data(), x.cols(), p.support_vectors.row(s).data());
    p.coef.push_back(res.alpha[sv[s]] * ys[sv[s]]);
  }
  std::vector<double> decision(x.rows(), p.bias);
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t s = 0; s < sv.size(); ++s) decision[i] += p.coef[s] * k(sv[s], i);
  std::tie(p.platt_a, p.platt_b) = fit_platt(decision, y);
  return p;
}

KnnParams train_knn(const Hyperparams& hp, const Matrix& x, std::span<const std::uint8_t> y) {
  KnnParams p;
  p.k = std::min(hp.count("k"), x.rows());
  p.train = x;
  p.labels.assign(y.begin(), y.end());
  return p;
}

EnsembleParams train_forest(const Hyperparams& hp, const Matrix& x, std::span<const std::uint8_t> y,
                            std::uint64_t seed, ExecPolicy policy) {
  const std::size_t n = x.rows();
  const std::size_t d = x.cols();
  const PresortedData data(x);
  TreeParams tp;
  tp.criterion = SplitCriterion::Gini;
  tp.max_depth = hp.count("max_depth");
  const auto& mf = hp.text("max_features");
  tp.max_features = mf == "sqrt"  ? std::max<std::size_t>(1, static_cast<std::size_t>(std::sqrt(static_cast<double>(d))))
                    : mf == "all" ? 0
                                  : std::min(d, hp.count("max_features"));
  const bool bootstrap = hp.text("bootstrap") == "true";

  EnsembleParams p;
  p.trees.resize(hp.count("n_trees"));
  for_each_index(p.trees.size(), policy, [&](std::size_t t) {
    std::seed_seq sseq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                       static_cast<std::uint32_t>(t)};
    std::mt19937_64 rng(sseq);
    std::vector<double> w(n, 1.0);
    if (bootstrap) {
      std::fill(w.begin(), w.end(), 0.0);
      std::uniform_int_distribution<std::size_t> pick(0, n - 1);
      for (std::size_t i = 0; i < n; ++i) w[pick(rng)] += 1.0;
    }
    std::vector<double> g(n);
    std::vector<std::uint8_t> in_play(n);
    for (std::size_t i = 0; i < n; ++i) {
      g[i] = w[i] * y[i];
      in_play[i] = w[i] > 0;
    }
    p.trees[t] = grow_tree(data, g, w, in_play, tp, rng).tree;
  });
  return p;
}

double mean_log_loss(std::span<const double> f, std::span<const std::uint8_t> y) {
  double s = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) s += log_loss(f[i], y[i]);
  return s / static_cast<double>(f.size());
}

// Shared boosting loop. Each round grows a tree on the current gradients,
// sets leaf values, and halves any leaf step that would raise that leaf's loss.
EnsembleParams train_boosted(const Hyperparams& hp, const Matrix& x, std::span<const std::uint8_t> y,
                             std::uint64_t seed, bool second_order, TrainMeta& meta) {
  const std::size_t n = x.rows();
  const PresortedData data(x);
  TreeParams tp;
  tp.max_depth = hp.count("max_depth");
  const double lr = hp.number("learning_rate");
  std::size_t rounds = 0;
  if (second_order) {
    tp.criterion = SplitCriterion::SecondOrder;
    tp.lambda = hp.number("lambda");
    tp.min_child_hessian = hp.number("min_child_weight");
    rounds = hp.count("n_rounds");
  } else {
    tp.criterion = SplitCriterion::SquaredError;
    rounds = hp.count("n_trees");
  }

  const double prior = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
  EnsembleParams p;
  p.boosted = true;
  p.base_score = std::log(prior / (1.0 - prior));
  std::vector<double> f(n, p.base_score);
  std::vector<double> g(n);
  std::vector<double> h(n);
  std::vector<double> hess(n);
  const std::vector<std::uint8_t> in_play(n, 1);
  std::mt19937_64 rng(seed);
  meta.loss_history = {mean_log_loss(f, y)};

  for (std::size_t round = 0; round < rounds; ++round) {
    for (std::size_t i = 0; i < n; ++i) {
      const double pr = sigmoid(f[i]);
      g[i] = y[i] - pr;
      hess[i] = pr * (1.0 - pr);
      h[i] = second_order ? hess[i] : 1.0;
    }
    auto grown = grow_tree(data, g, h, in_play, tp, rng);
    auto& nodes = grown.tree.nodes;
    std::vector<std::vector<std::size_t>> members(nodes.size());
    for (std::size_t i = 0; i < n; ++i) members[grown.leaf_of_row[i]].push_back(i);
    for (std::size_t leaf = 0; leaf < nodes.size(); ++leaf) {
      if (nodes[leaf].feature >= 0) continue;
      const auto& rows = members[leaf];
      double sg = 0.0;
      double sh = 0.0;
      for (auto i : rows) {
        sg += g[i];
        sh += hess[i];
      }
      double step = 0.0;
      if (second_order) step = sg / (sh + tp.lambda);
      else if (sh > 1e-12) step = sg / sh;
      step *= lr;
      double before = 0.0;
      for (auto i : rows) before += log_loss(f[i], y[i]);
      for (int halving = 0; halving < 60 && step != 0.0; ++halving) {
        double after = 0.0;
        for (auto i : rows) after += log_loss(f[i] + step, y[i]);
        if (after <= before) break;
        step = halving == 59 ? 0.0 : 0.5 * step;
      }
      nodes[leaf].value = step;
      for (auto i : rows) f[i] += step;
    }
    p.trees.push_back(std::move(grown.tree));
    meta.loss_history.push_back(mean_log_loss(f, y));
  }
  return p;
}

LinearParams train_logistic(const Hyperparams& hp, const Matrix& x, std::span<const std::uint8_t> y,
                            TrainMeta& meta) {
  const auto n = static_cast<Eigen::Index>(x.rows());
  const auto d = static_cast<Eigen::Index>(x.cols());
  const double lambda = hp.number("lambda");
  const double tol = hp.number("grad_tol");
  const std::size_t max_iter = hp.count("max_iter");
  // Design matrix with a trailing bias column; the bias is not penalized.
  EMatrix a(n, d + 1);
  a.leftCols(d) = view(x);
  a.col(d).setOnes();
  EVector yv(n);
  for (Eigen::Index i = 0; i < n; ++i) yv(i) = y[i];
  EVector w = EVector::Zero(d + 1);
  EVector pen = EVector::Constant(d + 1, lambda);
  pen(d) = 0.0;

  const auto objective = [&](const EVector& wt) {
    const EVector z = a * wt;
    double s = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) s += log_loss(z(i), y[i]);
    return s / static_cast<double>(n) + 0.5 * (pen.array() * wt.array().square()).sum();
  };

  double obj = objective(w);
  meta.loss_history = {obj};
  for (std::size_t it = 0; it < max_iter; ++it) {
    const EVector z = a * w;
    EVector p(n);
    EVector s(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      p(i) = sigmoid(z(i));
      s(i) = std::sqrt(std::max(p(i) * (1.0 - p(i)), 1e-300));
    }
    const EVector grad = a.transpose() * (p - yv) / static_cast<double>(n) + pen.cwiseProduct(w);
    if (grad.norm() <= tol) break;
    const EMatrix as = s.asDiagonal() * a;
    Eigen::MatrixXd hess = Eigen::MatrixXd::Zero(d + 1, d + 1);
    hess.selfadjointView<Eigen::Lower>().rankUpdate(as.transpose(), 1.0 / static_cast<double>(n));
    hess.diagonal() += pen + EVector::Constant(d + 1, 1e-12);
    const EVector dir = hess.selfadjointView<Eigen::Lower>().ldlt().solve(-grad);
    double t = 1.0;
    const double slope = grad.dot(dir);
    EVector next = w + dir;
    double next_obj = objective(next);
    while (next_obj > obj + 1e-4 * t * slope && t > 1e-10) {
      t *= 0.5;
      next = w + t * dir;
      next_obj = objective(next);
    }
    if (next_obj > obj) break;
    w = next;
    obj = next_obj;
    meta.loss_history.push_back(obj);
  }
  LinearParams lp;
  lp.weights.assign(w.data(), w.data() + d);
  lp.bias = w(d);
  return lp;
}

LinearParams train_lda(const Hyperparams& hp, const Matrix& x, std::span<const std::uint8_t> y) {
  const auto n = static_cast<Eigen::Index>(x.rows());
  const auto d = static_cast<Eigen::Index>(x.cols());
  const auto ex = view(x);
  EVector mu[2] = {EVector::Zero(d), EVector::Zero(d)};
  double count[2] = {0.0, 0.0};
  for (Eigen::Index i = 0; i < n; ++i) {
    mu[y[i]] += ex.row(i).transpose();
    count[y[i]] += 1.0;
  }
  mu[0] /= count[0];
  mu[1] /= count[1];
  EMatrix centered(n, d);
  for (Eigen::Index i = 0; i < n; ++i) centered.row(i) = ex.row(i) - mu[y[i]].transpose();
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(d, d);
  cov.selfadjointView<Eigen::Lower>().rankUpdate(centered.transpose(), 1.0 / std::max(1.0, static_cast<double>(n) - 2.0));
  cov.diagonal().array() += hp.number("shrinkage");
  const EVector delta = mu[1] - mu[0];
  const EVector w = cov.selfadjointView<Eigen::Lower>().ldlt().solve(delta);
  LinearParams lp;
  lp.weights.assign(w.data(), w.data() + d);
  lp.bias = -0.5 * w.dot(mu[1] + mu[0]) + std::log(count[1] / count[0]);
  return lp;
}

NaiveBayesParams train_gnb(const Hyperparams& hp, const Matrix& x, std::span<const std::uint8_t> y) {
  const std::size_t n = x.rows();
  const std::size_t d = x.cols();
  NaiveBayesParams p;
  double count[2] = {0.0, 0.0};
  for (int c = 0; c < 2; ++c) {
    p.mean[c].assign(d, 0.0);
    p.var[c].assign(d, 0.0);
  }
  for (std::size_t i = 0; i < n; ++i) {
    count[y[i]] += 1.0;
    for (std::size_t j = 0; j < d; ++j) p.mean[y[i]][j] += x(i, j);
  }
  for (int c = 0; c < 2; ++c)
    for (auto& m : p.mean[c]) m /= count[c];
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      const double dv = x(i, j) - p.mean[y[i]][j];
      p.var[y[i]][j] += dv * dv;
    }
  double max_var = 0.0;
  for (std::size_t j = 0; j < d; ++j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += x(i, j);
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) ss += (x(i, j) - mean) * (x(i, j) - mean);
    max_var = std::max(max_var, ss / static_cast<double>(n));
  }
  p.epsilon = hp.number("var_smoothing") * max_var;
  if (p.epsilon <= 0) p.epsilon = std::numeric_limits<double>::min();
  for (int c = 0; c < 2; ++c) {
    for (auto& v : p.var[c]) v = v / count[c] + p.epsilon;
    p.log_prior[c] = std::log(count[c] / static_cast<double>(n));
  }
  return p;
}

}  // namespace

std::string_view to_string(AlgorithmId id) {
  for (const auto& e : kNames)
    if (e.id == id) return e.name;
  return "unknown";
}

AlgorithmId parse_algorithm(std::string_view name) {
  for (const auto& e : kNames)
    if (e.name == name) return e.id;
  throw Error(ErrorKind::UnknownAlgorithm, "unknown algorithm '" + std::string(name) + "'");
}

Hyperparams Hyperparams::defaults(AlgorithmId id) {
  Hyperparams hp;
  hp.algorithm_ = id;
  for (const auto& spec : key_specs(id)) hp.values_.emplace(spec.key, spec.fallback);
  return hp;
}

void Hyperparams::set(std::string_view key, std::string_view value) {
  for (const auto& spec : key_specs(algorithm_)) {
    if (spec.key != key) continue;
    if (!valid_value(spec.kind, value))
      throw Error(ErrorKind::InvalidArgument,
                  "bad value '" + std::string(value) + "' for " + std::string(to_string(algorithm_)) + "." + std::string(key));
    values_.find(key)->second = std::string(value);
    return;
  }
  throw Error(ErrorKind::InvalidArgument,
              "unknown hyperparameter '" + std::string(key) + "' for " + std::string(to_string(algorithm_)));
}

void Hyperparams::set_assignment(std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0)
    throw Error(ErrorKind::InvalidArgument, "expected key=value, got '" + std::string(assignment) + "'");
  set(assignment.substr(0, eq), assignment.substr(eq + 1));
}

const std::string& Hyperparams::text(std::string_view key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw Error(ErrorKind::InvalidArgument, "missing hyperparameter '" + std::string(key) + "'");
  return it->second;
}

double Hyperparams::number(std::string_view key) const {
  const auto v = parse_double(text(key));
  if (!v) throw Error(ErrorKind::InvalidArgument, "hyperparameter '" + std::string(key) + "' is not numeric");
  return *v;
}

std::size_t Hyperparams::count(std::string_view key) const { return static_cast<std::size_t>(number(key)); }

double scale_gamma(const Matrix& x) {
  const auto& v = x.storage();
  if (v.empty()) return 1.0;
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double ss = 0.0;
  for (double e : v) ss += (e - mean) * (e - mean);
  const double var = ss / static_cast<double>(v.size());
  return var > 0 ? 1.0 / (static_cast<double>(x.cols()) * var) : 1.0;
}

std::pair<double, double> fit_platt(std::span<const double> dec, std::span<const std::uint8_t> y) {
  const std::size_t n = dec.size();
  double prior1 = 0.0;
  for (auto v : y) prior1 += v;
  const double prior0 = static_cast<double>(n) - prior1;
  const double hi = (prior1 + 1.0) / (prior1 + 2.0);
  const double lo = 1.0 / (prior0 + 2.0);
  std::vector<double> t(n);
  for (std::size_t i = 0; i < n; ++i) t[i] = y[i] ? hi : lo;

  const double min_step = 1e-10;
  const double sigma = 1e-12;
  const double eps = 1e-5;
  double a = 0.0;
  double b = std::log((prior0 + 1.0) / (prior1 + 1.0));
  const auto fval_at = [&](double aa, double bb) {
    double f = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double fa = dec[i] * aa + bb;
      if (fa >= 0) f += t[i] * fa + std::log1p(std::exp(-fa));
      else f += (t[i] - 1.0) * fa + std::log1p(std::exp(fa));
    }
    return f;
  };
  double fval = fval_at(a, b);
  for (int it = 0; it < 100; ++it) {
    double h11 = sigma, h22 = sigma, h21 = 0.0, g1 = 0.0, g2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double fa = dec[i] * a + b;
      double p = 0.0, q = 0.0;
      if (fa >= 0) {
        p = std::exp(-fa) / (1.0 + std::exp(-fa));
        q = 1.0 / (1.0 + std::exp(-fa));
      } else {
        p = 1.0 / (1.0 + std::exp(fa));
        q = std::exp(fa) / (1.0 + std::exp(fa));
      }
      const double d2 = p * q;
      h11 += dec[i] * dec[i] * d2;
      h22 += d2;
      h21 += dec[i] * d2;
      const double d1 = t[i] - p;
      g1 += dec[i] * d1;
      g2 += d1;
    }
    if (std::abs(g1) < eps && std::abs(g2) < eps) break;
    const double det = h11 * h22 - h21 * h21;
    const double da = -(h22 * g1 - h21 * g2) / det;
    const double db = -(-h21 * g1 + h11 * g2) / det;
    const double gd = g1 * da + g2 * db;
    double step = 1.0;
    while (step >= min_step) {
      const double na = a + step * da;
      const double nb = b + step * db;
      const double nf = fval_at(na, nb);
      if (nf < fval + 1e-4 * step * gd) {
        a = na;
        b = nb;
        fval = nf;
        break;
      }
      step *= 0.5;
    }
    if (step < min_step) break;
  }
  return {a, b};
}

std::size_t TrainedModel::dims() const {
  return std::visit(
      [](const auto& p) -> std::size_t {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, SvmParams>) return p.dims;
        else if constexpr (std::is_same_v<P, KnnParams>) return p.train.cols();
        else if constexpr (std::is_same_v<P, LinearParams>) return p.weights.size();
        else if constexpr (std::is_same_v<P, NaiveBayesParams>) return p.mean[0].size();
        else return 0;
      },
      params);
}

double TrainedModel::decision_standardized(std::span<const double> x) const {
  return std::visit(
      [&](const auto& p) -> double {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, std::monostate>) {
          throw Error(ErrorKind::NotFitted, "model is not fitted");
        } else if constexpr (std::is_same_v<P, SvmParams>) {
          double f = p.bias;
          const std::size_t d = p.dims;
          for (std::size_t s = 0; s < p.coef.size(); ++s) {
            const double* sv = p.support_vectors.row(s).data();
            double dist = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
              const double diff = sv[j] - x[j];
              dist += diff * diff;
            }
            f += p.coef[s] * std::exp(-p.gamma * dist);
          }
          return f;
        } else if constexpr (std::is_same_v<P, KnnParams>) {
          const std::size_t n = p.train.rows();
          const std::size_t d = p.train.cols();
          std::vector<std::pair<double, std::uint32_t>> dist(n);
          for (std::size_t i = 0; i < n; ++i) {
            const double* r = p.train.row(i).data();
            double s = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
              const double diff = r[j] - x[j];
              s += diff * diff;
            }
            dist[i] = {s, static_cast<std::uint32_t>(i)};
          }
          std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(p.k), dist.end());
          double votes = 0.0;
          for (std::size_t i = 0; i < p.k; ++i) votes += p.labels[dist[i].second];
          return votes / static_cast<double>(p.k);
        } else if constexpr (std::is_same_v<P, EnsembleParams>) {
          double s = 0.0;
          for (const auto& t : p.trees) s += t.predict(x);
          if (p.boosted) return p.base_score + s;
          return p.trees.empty() ? 0.5 : s / static_cast<double>(p.trees.size());
        } else if constexpr (std::is_same_v<P, LinearParams>) {
          double z = p.bias;
          for (std::size_t j = 0; j < p.weights.size(); ++j) z += p.weights[j] * x[j];
          return z;
        } else {
          double ll = p.log_prior[1] - p.log_prior[0];
          for (std::size_t j = 0; j < p.mean[0].size(); ++j) {
            for (int c = 0; c < 2; ++c) {
              const double dv = x[j] - p.mean[c][j];
              const double term = -0.5 * std::log(2.0 * M_PI * p.var[c][j]) - 0.5 * dv * dv / p.var[c][j];
              ll += c == 1 ? term : -term;
            }
          }
          return ll;
        }
      },
      params);
}

double TrainedModel::proba_standardized(std::span<const double> x) const {
  const double f = decision_standardized(x);
  switch (algorithm) {
    case AlgorithmId::SvmRbf: {
      const auto& p = std::get<SvmParams>(params);
      return sigmoid(-(p.platt_a * f + p.platt_b));
    }
    case AlgorithmId::Knn:
      return f;
    case AlgorithmId::RandomForest:
      return std::clamp(f, 0.0, 1.0);
    default:
      return sigmoid(f);
  }
}

std::vector<double> TrainedModel::proba_standardized(const Matrix& rows, ExecPolicy policy) const {
  std::vector<double> out(rows.rows());
  for_each_index(rows.rows(), policy, [&](std::size_t i) { out[i] = proba_standardized(rows.row(i)); });
  return out;
}

TrainedModel train(const Hyperparams& hp, const Matrix& x, std::span<const std::uint8_t> y, std::uint64_t seed,
                   ExecPolicy policy) {
  check_training_data(x, y);
  const auto start = std::chrono::steady_clock::now();
  TrainedModel m;
  m.algorithm = hp.algorithm();
  m.hyperparams = hp;
  m.meta.seed = seed;
  switch (hp.algorithm()) {
    case AlgorithmId::SvmRbf:
      m.params = train_svm(hp, x, y, m.meta);
      break;
    case AlgorithmId::Knn:
      m.params = train_knn(hp, x, y);
      break;
    case AlgorithmId::RandomForest:
      m.params = train_forest(hp, x, y, seed, policy);
      break;
    case AlgorithmId::GradBoost:
      m.params = train_boosted(hp, x, y, seed, false, m.meta);
      break;
    case AlgorithmId::RegGradBoost:
      m.params = train_boosted(hp, x, y, seed, true, m.meta);
      break;
    case AlgorithmId::LogisticRegression:
      m.params = train_logistic(hp, x, y, m.meta);
      break;
    case AlgorithmId::LinearDiscriminant:
      m.params = train_lda(hp, x, y);
      break;
    case AlgorithmId::GaussianNb:
      m.params = train_gnb(hp, x, y);
      break;
  }
  m.meta.train_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return m;
}

double predict_proba(const TrainedModel& model, std::span<const double> raw, std::string_view manifest_hash) {
  if (!model.fitted()) throw Error(ErrorKind::NotFitted, "model is not fitted");
  if (!manifest_hash.empty() && !model.manifest_hash.empty() && manifest_hash != model.manifest_hash)
    throw Error(ErrorKind::ManifestMismatch, "feature manifest " + std::string(manifest_hash) +
                                                 " does not match model manifest " + model.manifest_hash);
  if (model.standardization.fitted) {
    if (raw.size() != model.standardization.slots())
      throw Error(ErrorKind::InvalidArgument, "vector length does not match the model");
    const auto z = apply_standardization(model.standardization, raw);
    return model.proba_standardized(z);
  }
  if (raw.size() != model.dims() && model.dims() != 0)
    throw Error(ErrorKind::InvalidArgument, "vector length does not match the model");
  return model.proba_standardized(raw);
}

double predict_proba(const TrainedModel& model, const FeatureVector& fv) {
  if (fv.manifest_hash.empty() && !model.manifest_hash.empty())
    throw Error(ErrorKind::ManifestMismatch, "feature vector carries no manifest hash");
  return predict_proba(model, fv.values, fv.manifest_hash);
}

PainLabel predict(const TrainedModel& model, const FeatureVector& fv, double threshold) {
  return predict_proba(model, fv) >= threshold ? PainLabel::High : PainLabel::Low;
}

}  // namespace painscope
