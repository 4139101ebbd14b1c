#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace g2i {

/// Conventional start-stop histogram: every start is paired with the first
/// stop at or after it, so later stops inside the range are never seen.
struct StartStopHistogram {
  std::int64_t bin_ps = 0;
  std::int64_t range_ps = 0;
  std::vector<std::uint64_t> counts; ///< bin k covers [k T, (k + 1) T)
  std::size_t start_channel = 0;
  std::size_t stop_channel = 1;
  std::uint64_t total_starts = 0;

  double lag_ns(std::size_t bin) const noexcept {
    return static_cast<double>(bin) * static_cast<double>(bin_ps) * 1e-3;
  }
  std::uint64_t total_counts() const noexcept;
};

StartStopHistogram start_stop_histogram(std::span<const std::int64_t> starts_ps, std::span<const std::int64_t> stops_ps,
                                        std::int64_t bin_ps, std::int64_t range_ps);

enum class AnchorMode { anchor_zero_lag, anchor_tail };

const char* to_string(AnchorMode mode) noexcept;
AnchorMode parse_anchor_mode(const char* text);

/// Divides the histogram by an anchor level: the mean of the three bins
/// nearest zero delay, or the mean of the outer 10% of the range. The
/// exp(-mu tau) decay of the method is left in place.
std::vector<double> normalize_histogram(const StartStopHistogram& histogram, AnchorMode mode);

struct StartStopBias {
  double exact;      ///< exp(-mu |tau|)
  double linearized; ///< 1 - mu |tau|
};

StartStopBias analytic_start_stop_bias(double rate_hz, double tau_s);

/// Weighted log-linear fit counts ~ A exp(-rate * tau) over non-empty bins.
struct ExponentialFit {
  double rate_hz;
  double amplitude;
};

ExponentialFit fit_exponential_decay(const StartStopHistogram& histogram);

/// CSV with columns lag_ns,counts,normalized_g2,mode; one block per mode.
void write_histogram_csv(const StartStopHistogram& histogram, std::span<const AnchorMode> modes,
                         const std::filesystem::path& path);

} // namespace g2i
