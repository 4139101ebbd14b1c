#include "g2i/baseline.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <string>

#include "g2i/config.hpp"

namespace g2i {

std::uint64_t StartStopHistogram::total_counts() const noexcept {
  return std::accumulate(counts.begin(), counts.end(), std::uint64_t{0});
}

StartStopHistogram start_stop_histogram(std::span<const std::int64_t> starts_ps, std::span<const std::int64_t> stops_ps,
                                        std::int64_t bin_ps, std::int64_t range_ps) {
  if (starts_ps.empty() || stops_ps.empty()) throw std::invalid_argument("start_stop_histogram: empty stream");
  if (bin_ps <= 0 || range_ps < bin_ps) throw std::invalid_argument("start_stop_histogram: need 0 < bin <= range");
  StartStopHistogram h;
  h.bin_ps = bin_ps;
  h.range_ps = range_ps;
  h.counts.assign(static_cast<std::size_t>(range_ps / bin_ps), 0);
  h.total_starts = starts_ps.size();
  const std::int64_t covered = static_cast<std::int64_t>(h.counts.size()) * bin_ps;
  std::size_t next = 0;
  for (const auto start : starts_ps) {
    while (next < stops_ps.size() && stops_ps[next] < start) ++next;
    if (next == stops_ps.size()) break;
    const auto delay = stops_ps[next] - start;
    if (delay < covered) ++h.counts[static_cast<std::size_t>(delay / bin_ps)];
  }
  return h;
}

const char* to_string(AnchorMode mode) noexcept {
  return mode == AnchorMode::anchor_zero_lag ? "anchor_zero_lag" : "anchor_tail";
}

AnchorMode parse_anchor_mode(const char* text) {
  if (std::strcmp(text, "anchor_zero_lag") == 0) return AnchorMode::anchor_zero_lag;
  if (std::strcmp(text, "anchor_tail") == 0) return AnchorMode::anchor_tail;
  throw std::invalid_argument(std::string("unknown anchor mode '") + text + "'");
}

std::vector<double> normalize_histogram(const StartStopHistogram& histogram, AnchorMode mode) {
  const auto bins = histogram.counts.size();
  if (bins == 0) throw std::invalid_argument("normalize_histogram: empty histogram");
  std::size_t first = 0;
  std::size_t last = 0;
  if (mode == AnchorMode::anchor_zero_lag) {
    last = std::min<std::size_t>(3, bins);
  } else {
    const auto tail = std::max<std::size_t>(1, (bins + 9) / 10);
    first = bins - tail;
    last = bins;
  }
  double anchor = 0.0;
  for (std::size_t k = first; k < last; ++k) anchor += static_cast<double>(histogram.counts[k]);
  anchor /= static_cast<double>(last - first);
  if (!(anchor > 0.0)) throw std::invalid_argument(std::string("normalize_histogram: ") + to_string(mode) + " region is empty");
  std::vector<double> out(bins);
  for (std::size_t k = 0; k < bins; ++k) out[k] = static_cast<double>(histogram.counts[k]) / anchor;
  return out;
}

StartStopBias analytic_start_stop_bias(double rate_hz, double tau_s) {
  if (!(rate_hz >= 0.0)) throw std::invalid_argument("rate must be >= 0");
  const double x = rate_hz * std::abs(tau_s);
  return {std::exp(-x), 1.0 - x};
}

ExponentialFit fit_exponential_decay(const StartStopHistogram& histogram) {
  // Weights ~ counts: the variance of log(n) is about 1/n.
  double sw = 0.0, sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (std::size_t k = 0; k < histogram.counts.size(); ++k) {
    const auto n = static_cast<double>(histogram.counts[k]);
    if (n <= 0.0) continue;
    const double tau = (static_cast<double>(k) + 0.5) * static_cast<double>(histogram.bin_ps) * 1e-12;
    const double y = std::log(n);
    sw += n;
    sx += n * tau;
    sy += n * y;
    sxx += n * tau * tau;
    sxy += n * tau * y;
  }
  const double det = sw * sxx - sx * sx;
  if (!(det > 0.0)) throw std::invalid_argument("fit_exponential_decay: need two non-empty bins");
  const double slope = (sw * sxy - sx * sy) / det;
  const double intercept = (sy - slope * sx) / sw;
  return {-slope, std::exp(intercept)};
}

void write_histogram_csv(const StartStopHistogram& histogram, std::span<const AnchorMode> modes,
                         const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << "lag_ns,counts,normalized_g2,mode\n";
  for (const auto mode : modes) {
    const auto normalized = normalize_histogram(histogram, mode);
    for (std::size_t k = 0; k < histogram.counts.size(); ++k) {
      out << format_double(histogram.lag_ns(k)) << ',' << histogram.counts[k] << ',' << format_double(normalized[k])
          << ',' << to_string(mode) << '\n';
    }
  }
}

} // namespace g2i
