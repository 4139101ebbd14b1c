#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "g2i/config.hpp"
#include "g2i/spad.hpp"

namespace g2i {

/// g2 versus lag for one detector pair.
///
/// Lags run from -max_lag to +max_lag; index k holds lag k - max_lag. A lag
/// whose denominator vanishes has no value (std::nullopt) and a diagnostic.
struct Correlogram {
  std::size_t pixel_i = 0;
  std::size_t pixel_j = 0;
  double separation_um = 0.0;
  Variant variant = Variant::per_window;
  std::int64_t bin_ps = 0;
  std::size_t max_lag = 0;
  std::vector<std::optional<double>> g2;
  std::vector<double> std_error;
  std::vector<std::int64_t> coincidences;
  std::vector<std::string> diagnostics;

  std::size_t lag_count() const noexcept { return 2 * max_lag + 1; }
  long lag(std::size_t index) const noexcept { return static_cast<long>(index) - static_cast<long>(max_lag); }
  double lag_ns(std::size_t index) const noexcept {
    return static_cast<double>(lag(index)) * static_cast<double>(bin_ps) * 1e-3;
  }
  std::size_t index_of(long lag) const;
  std::optional<double> at(long lag) const { return g2.at(index_of(lag)); }
  double std_error_at(long lag) const { return std_error.at(index_of(lag)); }
};

/// Multiphoton estimator over the binary windows. For lag l >= 0 and
/// pair (i, j):
///   C(l)  = sum_m sum_{n<N} X_i(m, n) X_j(m, n + l)
///   global:     g2 = N M C(l) / (S_i * S_j(l))
///   per_window: g2 = N C(l) / sum_m s_i(m) s_j(m, l)
/// where s_i(m) counts i's set bins in the N-bin core of window m and
/// s_j(m, l) counts j's set bins in [l, l + N). Negative lags swap the
/// roles of i and j, so g2_ij(l) == g2_ji(-l) exactly. The standard error
/// is g2 / sqrt(C) (one count stands in for C = 0).
///
/// `bins_i` and `bins_j` are single-pixel sets sharing one window layout.
Correlogram g2_pair(const BinaryWindowSet& bins_i, const BinaryWindowSet& bins_j, Variant variant);
Correlogram g2_pair(const BinaryWindowSet& bins, std::size_t i, std::size_t j, Variant variant,
                    double separation_um = 0.0);

/// One correlogram per unordered pair (i < j), in lexicographic order.
/// Separations come from `geometry` when it matches the pixel count.
std::vector<Correlogram> g2_all_pairs(const BinaryWindowSet& bins, Variant variant,
                                      const ArrayGeometry* geometry = nullptr, unsigned threads = 1);
std::vector<Correlogram> g2_pairs(const BinaryWindowSet& bins, const std::vector<PixelPair>& pairs, Variant variant,
                                  const ArrayGeometry* geometry = nullptr, unsigned threads = 1);

/// Zero-lag g2 for every pixel pair; the diagonal holds 2 by convention.
struct CorrelationMap {
  static constexpr double diagonal_value = 2.0;
  std::size_t pixels = 0;
  std::vector<double> values; ///< row-major pixels x pixels; NaN where missing

  double at(std::size_t i, std::size_t j) const { return values.at(i * pixels + j); }
};

CorrelationMap zero_lag_map(const std::vector<Correlogram>& correlograms, std::size_t pixels);

void write_correlograms_csv(const std::vector<Correlogram>& correlograms, const std::filesystem::path& path);
void write_map_csv(const CorrelationMap& map, const std::filesystem::path& path);
/// Reads rows written by write_correlograms_csv back into correlograms.
std::vector<Correlogram> read_correlograms_csv(const std::filesystem::path& path);

} // namespace g2i
