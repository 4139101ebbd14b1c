#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "g2i/config.hpp"
#include "g2i/field_synth.hpp"

namespace g2i {

/// Detected photon arrivals, one strictly increasing picosecond sequence per
/// pixel, all inside [0, duration_ps).
struct EventStream {
  std::int64_t duration_ps = 0;
  std::vector<std::vector<std::int64_t>> times_ps;
  std::vector<std::uint64_t> candidates; ///< events before the dead-time filter
  std::vector<std::uint64_t> discarded;  ///< candidates dropped by dead time

  std::size_t pixel_count() const noexcept { return times_ps.size(); }
  std::uint64_t accepted(std::size_t pixel) const { return times_ps.at(pixel).size(); }
};

/// Detection pipeline per pixel:
///  1. a candidate occurs in each sim_dt step with probability
///     p = min(1, (eta * I + dcr) * dt), eta = pde for physical-flux traces
///     and 1 otherwise; its time is uniform within the step;
///  2. Gaussian timing jitter with sigma = FWHM / (2 sqrt(2 ln 2));
///  3. non-paralyzable dead time.
/// Candidates are generated by inverting the cumulative hazard
/// sum(-log(1 - p)), which is the same process as per-step Bernoulli draws at
/// O(log block) cost per event. Each pixel uses its own RNG substreams.
/// Throws if any p exceeds 0.1.
EventStream detect_events(const IntensityTrace& trace, const DetectorSpec& detector, std::uint64_t seed,
                          unsigned threads = 1);

/// Non-paralyzable dead-time filter on one sorted candidate list. Returns the
/// number discarded. With zero dead time, coincident timestamps still
/// collapse so the output stays strictly increasing.
std::uint64_t apply_dead_time(std::vector<std::int64_t>& times_ps, std::int64_t dead_time_ps);

/// Layout shared by every pixel of a BinaryWindowSet.
struct WindowLayout {
  std::size_t window_N = 0;
  std::size_t max_lag = 0;
  std::size_t window_M = 0;
  std::int64_t bin_ps = 0;

  std::size_t span() const noexcept { return window_N + max_lag; }
  std::uint64_t total_bins() const noexcept { return static_cast<std::uint64_t>(window_M) * span(); }
  std::int64_t window_start_ps(std::size_t m) const noexcept {
    return static_cast<std::int64_t>(m * span()) * bin_ps;
  }

  friend bool operator==(const WindowLayout&, const WindowLayout&) = default;
};

WindowLayout window_layout(const TimeGrid& grid);

/// Binary occupancy X_i^(m)(n) for M back-to-back windows of N + max_lag
/// bins. Stored sparsely: per pixel, the sorted global indices
/// (m * span + n) of the bins that hold at least one event.
class BinaryWindowSet {
public:
  BinaryWindowSet() = default;
  BinaryWindowSet(WindowLayout layout, std::vector<std::vector<std::uint64_t>> set_bins);

  /// From dense 0/1 rows, one row of M * span values per pixel.
  static BinaryWindowSet from_dense(WindowLayout layout, const std::vector<std::vector<std::uint8_t>>& bits);

  const WindowLayout& layout() const noexcept { return layout_; }
  std::size_t pixel_count() const noexcept { return set_bins_.size(); }
  std::span<const std::uint64_t> set_bins(std::size_t pixel) const { return set_bins_.at(pixel); }
  bool bit(std::size_t pixel, std::size_t window, std::size_t n) const;
  /// Number of set bins of window m in [begin, end).
  std::size_t count(std::size_t pixel, std::size_t window, std::size_t begin, std::size_t end) const;
  /// Single-pixel view, e.g. to correlate pixels from different sets.
  BinaryWindowSet slice(std::size_t pixel) const;

private:
  WindowLayout layout_;
  std::vector<std::vector<std::uint64_t>> set_bins_;
};

/// Bin n of window m is set iff an event lies in
/// [start_m + n T, start_m + (n + 1) T). Throws if the stream is shorter
/// than M windows.
BinaryWindowSet binarize(const EventStream& events, const TimeGrid& grid);

/// Binary event format "G2EV": magic, u32 version, u32 pixel count, then per
/// pixel a u64 count followed by u64 picosecond timestamps (little-endian).
void write_events(const EventStream& events, const std::filesystem::path& path);

} // namespace g2i
