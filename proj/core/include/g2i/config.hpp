#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace g2i {

/// Error raised while parsing or validating a configuration.
/// `line()` is 0 when the problem is not tied to a specific line.
class ConfigError : public std::runtime_error {
public:
  ConfigError(const std::string& key, std::size_t line, const std::string& what);

  const std::string& key() const noexcept { return key_; }
  std::size_t line() const noexcept { return line_; }

private:
  std::string key_;
  std::size_t line_;
};

/// Rectangular SPAD array. Pixels are numbered row-major from the top-left.
struct ArrayGeometry {
  std::size_t rows = 4;
  std::size_t cols = 4;
  double pitch_x_um = 30.0;
  double pitch_y_um = 43.0;
  double active_diameter_um = 3.5;

  std::size_t pixel_count() const noexcept { return rows * cols; }
  void validate() const;

  friend bool operator==(const ArrayGeometry&, const ArrayGeometry&) = default;
};

struct PixelPosition {
  double x_um;
  double y_um;
};

enum class SourceKind { coherent, chaotic, incoherent };
enum class Polarization { polarized, unpolarized };

/// What the envelope represents: the detected-count rate (pde already folded
/// in) or the incident photon flux, in which case detection applies pde.
enum class FluxMode { detected, physical };

struct SourceSpec {
  SourceKind kind = SourceKind::chaotic;
  double wavelength_nm = 546.0;
  double linewidth_hz = 130e6;     // FWHM
  double angular_width_rad = 1e-2; // w / L
  Polarization polarization = Polarization::unpolarized;
  double mean_rate_hz = 2.5e6;
  std::size_t modes = 1024;
  std::size_t period_samples = std::size_t{1} << 20;
  FluxMode flux = FluxMode::detected;

  /// Angular linewidth Δω = 2πΔν.
  double linewidth_rad_s() const noexcept;
  std::size_t branches() const noexcept { return polarization == Polarization::unpolarized ? 2 : 1; }
  void validate() const;

  friend bool operator==(const SourceSpec&, const SourceSpec&) = default;
};

struct DetectorSpec {
  double pde = 0.25;
  double dead_time_ns = 15.0;
  double jitter_fwhm_ps = 80.0;
  double dcr_hz = 7.5;

  void validate() const;

  friend bool operator==(const DetectorSpec&, const DetectorSpec&) = default;
};

/// Time discretization. Picosecond quantities are integral so that bin
/// boundaries are exact.
struct TimeGrid {
  std::int64_t sim_dt_ps = 100;
  std::int64_t bin_ps = 1000;
  std::size_t window_N = 100;
  std::size_t window_M = 100000;
  std::size_t max_lag_bins = 50;

  /// Bins per stored window (core plus lag margin).
  std::size_t window_span() const noexcept { return window_N + max_lag_bins; }
  /// Virtual time needed to fill all M windows.
  std::int64_t acquisition_ps() const noexcept;
  void validate() const;

  friend bool operator==(const TimeGrid&, const TimeGrid&) = default;
};

enum class ExperimentKind { temporal_pair, spatial_row, full_map, method_compare, table1_suite };
enum class Variant { global, per_window };

using PixelPair = std::pair<std::size_t, std::size_t>;

/// Harness-level keys (`run.*`).
struct RunSpec {
  std::uint64_t seed = 1;
  ExperimentKind experiment = ExperimentKind::temporal_pair;
  Variant variant = Variant::per_window;
  std::vector<PixelPair> pairs{{5, 6}, {0, 15}};
  std::size_t row = 0;
  std::size_t virtual_pixel = 5;

  friend bool operator==(const RunSpec&, const RunSpec&) = default;
};

struct Config {
  ArrayGeometry geometry;
  SourceSpec source;
  DetectorSpec detector;
  TimeGrid grid;
  RunSpec run;

  /// Checks every type invariant plus cross-type constraints
  /// (pixel references in `run`).
  void validate() const;

  friend bool operator==(const Config&, const Config&) = default;
};

PixelPosition pixel_position(const ArrayGeometry& geometry, std::size_t pixel);
double pair_separation(const ArrayGeometry& geometry, std::size_t i, std::size_t j);
/// Separation components (x along the row, y across rows), j relative to i.
PixelPosition pair_offset(const ArrayGeometry& geometry, std::size_t i, std::size_t j);

/// All unordered pairs (i < j), in lexicographic order.
std::vector<PixelPair> all_pairs(std::size_t pixels);

Config parse_config(const std::string& text);
Config load_config(const std::filesystem::path& path);
/// Canonical text form. Every key is written, so parse_config(format_config(c)) == c.
std::string format_config(const Config& config);
void save_config(const Config& config, const std::filesystem::path& path);

const char* to_string(SourceKind kind) noexcept;
const char* to_string(Polarization polarization) noexcept;
const char* to_string(FluxMode flux) noexcept;
const char* to_string(ExperimentKind kind) noexcept;
const char* to_string(Variant variant) noexcept;
SourceKind parse_source_kind(const std::string& text);
ExperimentKind parse_experiment_kind(const std::string& text);
Variant parse_variant(const std::string& text);
/// "5-6,0-15" -> {{5,6},{0,15}}
std::vector<PixelPair> parse_pairs(const std::string& text);
std::string format_pairs(const std::vector<PixelPair>& pairs);

/// Shortest decimal form that round-trips through strtod.
std::string format_double(double value);

} // namespace g2i
