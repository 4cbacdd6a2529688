#include "csfdyn/signal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace csfdyn::signal {

std::vector<double> moving_average(std::span<const double> x, std::size_t window) {
  const std::size_t n = x.size();
  std::vector<double> out(n);
  if (n == 0) return out;
  if (window < 1) window = 1;
  const std::size_t half = window / 2;
  // prefix sums keep this O(n) for the long detrend windows
  std::vector<double> prefix(n + 1, 0.0);
  CompensatedSum acc;
  for (std::size_t i = 0; i < n; ++i) {
    acc.add(x[i]);
    prefix[i + 1] = acc.value();
  }
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t lo = i >= half ? i - half : 0;
    const std::size_t hi = std::min(n, i + half + 1);
    out[i] = (prefix[hi] - prefix[lo]) / static_cast<double>(hi - lo);
  }
  return out;
}

std::size_t odd_window(double duration_ms, double sample_interval_ms) {
  auto w = static_cast<std::size_t>(std::llround(duration_ms / sample_interval_ms));
  if (w < 1) w = 1;
  if (w % 2 == 0) ++w;
  return w;
}

double percentile(std::vector<double> values, double p) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const double pos = std::clamp(p, 0.0, 100.0) / 100.0 * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

double median(std::vector<double> values) { return percentile(std::move(values), 50.0); }

std::vector<Peak> find_peaks(std::span<const double> y) {
  std::vector<Peak> peaks;
  const std::size_t n = y.size();
  if (n < 3) return peaks;
  std::size_t i = 1;
  while (i + 1 < n) {
    if (y[i] > y[i - 1]) {
      std::size_t j = i;
      while (j + 1 < n && y[j + 1] == y[i]) ++j;
      if (j + 1 < n && y[j + 1] < y[i]) {
        double left_min = y[i];
        for (std::size_t k = i; k-- > 0;) {
          if (y[k] > y[i]) break;
          left_min = std::min(left_min, y[k]);
        }
        double right_min = y[i];
        for (std::size_t k = j + 1; k < n; ++k) {
          if (y[k] > y[i]) break;
          right_min = std::min(right_min, y[k]);
        }
        peaks.push_back({i, y[i], y[i] - std::max(left_min, right_min)});
      }
      i = j + 1;
    } else {
      ++i;
    }
  }
  return peaks;
}

std::vector<Peak> enforce_refractory(std::vector<Peak> peaks, double min_distance) {
  std::vector<std::size_t> order(peaks.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return peaks[a].height > peaks[b].height;
  });
  std::vector<Peak> kept;
  for (std::size_t idx : order) {
    const auto& p = peaks[idx];
    const bool clear = std::none_of(kept.begin(), kept.end(), [&](const Peak& k) {
      const double d = std::abs(static_cast<double>(k.index) - static_cast<double>(p.index));
      return d < min_distance;
    });
    if (clear) kept.push_back(p);
  }
  std::sort(kept.begin(), kept.end(), [](const Peak& a, const Peak& b) { return a.index < b.index; });
  return kept;
}

double mean(std::span<const double> x) {
  if (x.empty()) return 0.0;
  CompensatedSum s;
  for (double v : x) s.add(v);
  return s.value() / static_cast<double>(x.size());
}

double stddev(std::span<const double> x) {
  if (x.size() < 2) return 0.0;
  const double m = mean(x);
  CompensatedSum s;
  for (double v : x) s.add((v - m) * (v - m));
  return std::sqrt(s.value() / static_cast<double>(x.size() - 1));
}

double pearson(std::span<const double> a, std::span<const double> b) {
  const std::size_t n = std::min(a.size(), b.size());
  if (n < 2) return std::numeric_limits<double>::quiet_NaN();
  const double ma = mean(a.first(n));
  const double mb = mean(b.first(n));
  CompensatedSum sab, saa, sbb;
  for (std::size_t i = 0; i < n; ++i) {
    const double da = a[i] - ma;
    const double db = b[i] - mb;
    sab.add(da * db);
    saa.add(da * da);
    sbb.add(db * db);
  }
  if (saa.value() <= 0.0 || sbb.value() <= 0.0) return std::numeric_limits<double>::quiet_NaN();
  return std::clamp(sab.value() / std::sqrt(saa.value() * sbb.value()), -1.0, 1.0);
}

void CompensatedSum::add(double v) noexcept {
  const double t = sum_ + v;
  if (std::abs(sum_) >= std::abs(v))
    comp_ += (sum_ - t) + v;
  else
    comp_ += (v - t) + sum_;
  sum_ = t;
}

}  // namespace csfdyn::signal
