#pragma once

// Small 1D signal utilities shared by the gating and flow stages.

#include <cstddef>
#include <span>
#include <vector>

namespace csfdyn::signal {

/// Centered moving average over `window` samples (rounded up to odd). Near the
/// edges the window is truncated to the available samples.
std::vector<double> moving_average(std::span<const double> x, std::size_t window);

/// Window length in samples for a duration, at least 1 and odd.
std::size_t odd_window(double duration_ms, double sample_interval_ms);

/// Linear-interpolated percentile, p in [0, 100]. Empty input returns 0.
double percentile(std::vector<double> values, double p);
double median(std::vector<double> values);

struct Peak {
  std::size_t index;
  double height;
  double prominence;
};

/// Local maxima (plateaus resolved to their first sample) with topographic
/// prominence: height above the higher of the two lowest points reached
/// before meeting a taller sample on either side.
std::vector<Peak> find_peaks(std::span<const double> y);

/// Keeps peaks at least `min_distance` samples apart, larger peaks first.
/// Output sorted by index.
std::vector<Peak> enforce_refractory(std::vector<Peak> peaks, double min_distance);

/// Pearson correlation; NaN when either side has zero variance.
double pearson(std::span<const double> a, std::span<const double> b);

double mean(std::span<const double> x);
/// Sample standard deviation (n - 1); 0 for fewer than two values.
double stddev(std::span<const double> x);

/// Neumaier compensated accumulator.
class CompensatedSum {
 public:
  void add(double v) noexcept;
  double value() const noexcept { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

}  // namespace csfdyn::signal
