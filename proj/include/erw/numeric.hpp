#pragma once

#include <cmath>

namespace erw {

/// Neumaier-compensated running sum. Long runs of tiny increments against a
/// large total (exit times at n ~ 1e6, the A_n table) keep full precision.
template <class T = long double>
class CompensatedSum {
public:
  CompensatedSum() = default;
  explicit CompensatedSum(T init) : sum_(init) {}

  CompensatedSum& operator+=(T x) noexcept {
    const T t = sum_ + x;
    if (std::fabs(sum_) >= std::fabs(x))
      comp_ += (sum_ - t) + x;
    else
      comp_ += (x - t) + sum_;
    sum_ = t;
    return *this;
  }

  T value() const noexcept { return sum_ + comp_; }

private:
  T sum_{0};
  T comp_{0};
};

/// Welford running mean / variance.
class RunningMoments {
public:
  void add(double x) noexcept {
    ++n_;
    const double d = x - mean_;
    mean_ += d / static_cast<double>(n_);
    m2_ += d * (x - mean_);
  }
  long long count() const noexcept { return n_; }
  double mean() const noexcept { return mean_; }
  /// Unbiased sample variance; 0 for fewer than two points.
  double variance() const noexcept {
    return n_ > 1 ? m2_ / static_cast<double>(n_ - 1) : 0.0;
  }
  double std_error() const noexcept {
    return n_ > 0 ? std::sqrt(variance() / static_cast<double>(n_)) : 0.0;
  }

private:
  long long n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

}  // namespace erw
