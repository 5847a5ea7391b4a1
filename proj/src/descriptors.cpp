#include "painscope/descriptors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>

#include "painscope/error.hpp"

namespace painscope {
namespace {

double mean_of(std::span<const double> x) {
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

double variance_of(std::span<const double> x) {
  const double m = mean_of(x);
  double ss = 0.0;
  for (double v : x) ss += (v - m) * (v - m);
  return ss / static_cast<double>(x.size());
}

std::vector<double> first_difference(std::span<const double> x) {
  std::vector<double> d(x.size() - 1);
  for (std::size_t i = 0; i + 1 < x.size(); ++i) d[i] = x[i + 1] - x[i];
  return d;
}

}  // namespace

TimeStats time_stats(std::span<const double> x, double fs_hz) {
  if (x.size() < 4) throw Error(ErrorKind::SignalTooShort, "time statistics need >= 4 samples");
  const auto n = static_cast<double>(x.size());
  TimeStats s;
  s.mean = mean_of(x);
  double m2 = 0, m3 = 0, m4 = 0;
  for (double v : x) {
    const double d = v - s.mean;
    const double d2 = d * d;
    m2 += d2;
    m3 += d2 * d;
    m4 += d2 * d2;
  }
  m2 /= n;
  m3 /= n;
  m4 /= n;
  s.sd = std::sqrt(m2);
  if (m2 > 0.0) {
    s.skewness = m3 / (m2 * s.sd);
    s.kurtosis = m4 / (m2 * m2);
  } else {
    s.zero_variance = true;
  }
  std::size_t crossings = 0;
  for (std::size_t i = 0; i + 1 < x.size(); ++i) {
    const bool a = x[i] - s.mean >= 0.0;
    const bool b = x[i + 1] - s.mean >= 0.0;
    if (a != b && !s.zero_variance) ++crossings;
  }
  s.zero_crossing_rate = static_cast<double>(crossings) * fs_hz / n;
  const auto [lo, hi] = std::minmax_element(x.begin(), x.end());
  s.peak_to_peak = *hi - *lo;
  return s;
}

Hjorth hjorth(std::span<const double> x) {
  if (x.size() < 3) throw Error(ErrorKind::SignalTooShort, "Hjorth parameters need >= 3 samples");
  Hjorth h;
  h.activity = variance_of(x);
  const auto d1 = first_difference(x);
  const auto d2 = first_difference(d1);
  const double v1 = variance_of(d1);
  const double v2 = variance_of(d2);
  if (!(h.activity > 0.0) || !(v1 > 0.0)) {
    h.zero_variance = true;
    return h;
  }
  h.mobility = std::sqrt(v1 / h.activity);
  h.complexity = std::sqrt(v2 / v1) / h.mobility;
  return h;
}

EntropyResult sample_entropy(std::span<const double> x, int m, double r_factor, ExecPolicy policy) {
  if (m < 1) throw Error(ErrorKind::InvalidArgument, "embedding dimension must be >= 1");
  const auto mm = static_cast<std::size_t>(m);
  if (x.size() < 10 * (mm + 1)) throw Error(ErrorKind::SignalTooShort, "sample entropy needs >= 10(m+1) samples");
  const double r = r_factor * std::sqrt(variance_of(x));

  const std::size_t n_templates = x.size() - mm;
  std::vector<std::uint32_t> order(n_templates);
  std::iota(order.begin(), order.end(), 0u);
  std::stable_sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) { return x[a] < x[b]; });

  std::uint64_t matches_m = 0;
  std::uint64_t matches_m1 = 0;
  const auto count_from = [&](std::size_t p, std::uint64_t& b, std::uint64_t& a) {
    const std::size_t i = order[p];
    const double xi = x[i];
    for (std::size_t q = p + 1; q < n_templates; ++q) {
      const std::size_t j = order[q];
      if (x[j] - xi > r) break;
      bool match = true;
      for (std::size_t k = 1; k < mm; ++k) {
        if (std::abs(x[i + k] - x[j + k]) > r) {
          match = false;
          break;
        }
      }
      if (!match) continue;
      ++b;
      if (std::abs(x[i + mm] - x[j + mm]) <= r) ++a;
    }
  };

  if (policy == ExecPolicy::Parallel) {
    std::uint64_t b = 0, a = 0;
#pragma omp parallel for schedule(dynamic, 64) reduction(+ : b, a)
    for (std::size_t p = 0; p < n_templates; ++p) count_from(p, b, a);
    matches_m = b;
    matches_m1 = a;
  } else {
    for (std::size_t p = 0; p < n_templates; ++p) count_from(p, matches_m, matches_m1);
  }

  EntropyResult res;
  if (matches_m1 == 0 || matches_m == 0) {
    const double pairs = static_cast<double>(n_templates) * static_cast<double>(n_templates - 1) / 2.0;
    res.value = std::log(pairs);
    res.sentinel = true;
    return res;
  }
  res.value = -std::log(static_cast<double>(matches_m1) / static_cast<double>(matches_m));
  return res;
}

FractalResult higuchi_fd(std::span<const double> x, int kmax) {
  if (kmax < 2) throw Error(ErrorKind::InvalidArgument, "kmax must be >= 2");
  const std::size_t n = x.size();
  if (n < 10 * static_cast<std::size_t>(kmax)) throw Error(ErrorKind::SignalTooShort, "Higuchi FD needs >= 10·kmax samples");

  std::vector<double> log_inv_k;
  std::vector<double> log_len;
  FractalResult res;
  for (int k = 1; k <= kmax; ++k) {
    const auto kk = static_cast<std::size_t>(k);
    double total = 0.0;
    for (std::size_t m = 0; m < kk; ++m) {
      const std::size_t steps = (n - 1 - m) / kk;
      if (steps == 0) continue;
      double curve = 0.0;
      for (std::size_t i = 1; i <= steps; ++i) curve += std::abs(x[m + i * kk] - x[m + (i - 1) * kk]);
      total += curve * static_cast<double>(n - 1) / (static_cast<double>(steps) * k) / k;
    }
    const double mean_len = total / k;
    if (!(mean_len > 0.0)) {
      res.degenerate = true;
      return res;
    }
    log_inv_k.push_back(std::log(1.0 / k));
    log_len.push_back(std::log(mean_len));
  }
  const double mx = mean_of(log_inv_k);
  const double my = mean_of(log_len);
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < log_inv_k.size(); ++i) {
    sxy += (log_inv_k[i] - mx) * (log_len[i] - my);
    sxx += (log_inv_k[i] - mx) * (log_inv_k[i] - mx);
  }
  res.value = sxy / sxx;
  return res;
}

const std::array<double, 8>& db4_lowpass() {
  static const std::array<double, 8> h{
      0.23037781330889650086, 0.71484657055291564709,  0.63088076792985890788,  -0.027983769416859854211,
      -0.18703481171909308408, 0.030841381835560763627, 0.032883011666885199735, -0.010597401785069032105};
  return h;
}

std::array<double, 8> db4_highpass() {
  const auto& h = db4_lowpass();
  std::array<double, 8> g{};
  for (std::size_t i = 0; i < 8; ++i) g[i] = ((i % 2 == 0) ? 1.0 : -1.0) * h[7 - i];
  return g;
}

WaveletDecomposition dwt_db4(std::span<const double> x, int levels) {
  if (levels < 1) throw Error(ErrorKind::InvalidArgument, "levels must be >= 1");
  const std::size_t block = std::size_t{1} << levels;
  if (x.size() < block * 8) throw Error(ErrorKind::SignalTooShort, "DWT needs >= 2^levels × filter length samples");
  const std::size_t padded = (x.size() + block - 1) / block * block;

  const auto& h = db4_lowpass();
  const auto g = db4_highpass();
  WaveletDecomposition out;
  out.padded_length = padded;
  std::vector<double> approx(padded, 0.0);
  std::copy(x.begin(), x.end(), approx.begin());
  for (int level = 0; level < levels; ++level) {
    const std::size_t len = approx.size();
    const std::size_t half = len / 2;
    std::vector<double> a(half), d(half);
    for (std::size_t k = 0; k < half; ++k) {
      double sa = 0.0, sd = 0.0;
      for (std::size_t i = 0; i < 8; ++i) {
        const double v = approx[(2 * k + i) % len];
        sa += h[i] * v;
        sd += g[i] * v;
      }
      a[k] = sa;
      d[k] = sd;
    }
    out.details.push_back(std::move(d));
    approx = std::move(a);
  }
  out.approximation = std::move(approx);
  return out;
}

std::vector<double> dwt_energies(std::span<const double> x, int levels) {
  const auto dec = dwt_db4(x, levels);
  const auto mean_abs = [](const std::vector<double>& v) {
    double acc = 0.0;
    for (double c : v) acc += std::abs(c);
    return acc / static_cast<double>(v.size());
  };
  std::vector<double> out;
  for (const auto& d : dec.details) out.push_back(mean_abs(d));
  out.push_back(mean_abs(dec.approximation));
  return out;
}

}  // namespace painscope
