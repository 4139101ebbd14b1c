#include "g2i/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <set>
#include <sstream>

namespace g2i {

namespace {

std::string trim(std::string_view text) {
  const auto first = text.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = text.find_last_not_of(" \t\r");
  return std::string(text.substr(first, last - first + 1));
}

double parse_real(const std::string& key, std::size_t line, const std::string& value) {
  double out = 0.0;
  const auto* end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc{} || ptr != end || !std::isfinite(out)) {
    throw ConfigError(key, line, "expected a finite number, got '" + value + "'");
  }
  return out;
}

std::uint64_t parse_unsigned(const std::string& key, std::size_t line, const std::string& value) {
  std::uint64_t out = 0;
  const auto* end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc{} || ptr != end) {
    // Accept integral values written in exponent form, e.g. 1e5.
    const double real = parse_real(key, line, value);
    if (real < 0.0 || real != std::floor(real) || real > 9.0e18) {
      throw ConfigError(key, line, "expected a non-negative integer, got '" + value + "'");
    }
    return static_cast<std::uint64_t>(real);
  }
  return out;
}

std::int64_t to_picoseconds(const std::string& key, std::size_t line, double value, double scale) {
  const double ps = value * scale;
  const double rounded = std::round(ps);
  if (std::abs(ps - rounded) > 1e-6 * std::max(1.0, std::abs(ps))) {
    throw ConfigError(key, line, "must be a whole number of picoseconds");
  }
  return static_cast<std::int64_t>(rounded);
}

template <typename Enum>
Enum parse_enum(const std::string& key, std::size_t line, const std::string& value,
                std::initializer_list<Enum> options) {
  for (Enum option : options) {
    if (value == to_string(option)) return option;
  }
  std::string expected;
  for (Enum option : options) {
    if (!expected.empty()) expected += "|";
    expected += to_string(option);
  }
  throw ConfigError(key, line, "expected one of {" + expected + "}, got '" + value + "'");
}

using Setter = std::function<void(Config&, const std::string&, std::size_t)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = [] {
    std::map<std::string, Setter> t;
    t["geometry.rows"] = [](Config& c, const std::string& v, std::size_t l) {
      c.geometry.rows = parse_unsigned("geometry.rows", l, v);
    };
    t["geometry.cols"] = [](Config& c, const std::string& v, std::size_t l) {
      c.geometry.cols = parse_unsigned("geometry.cols", l, v);
    };
    t["geometry.pitch_x_um"] = [](Config& c, const std::string& v, std::size_t l) {
      c.geometry.pitch_x_um = parse_real("geometry.pitch_x_um", l, v);
    };
    t["geometry.pitch_y_um"] = [](Config& c, const std::string& v, std::size_t l) {
      c.geometry.pitch_y_um = parse_real("geometry.pitch_y_um", l, v);
    };
    t["geometry.active_diameter_um"] = [](Config& c, const std::string& v, std::size_t l) {
      c.geometry.active_diameter_um = parse_real("geometry.active_diameter_um", l, v);
    };
    t["source.kind"] = [](Config& c, const std::string& v, std::size_t l) {
      c.source.kind = parse_enum("source.kind", l, v,
                                 {SourceKind::coherent, SourceKind::chaotic, SourceKind::incoherent});
    };
    t["source.wavelength_nm"] = [](Config& c, const std::string& v, std::size_t l) {
      c.source.wavelength_nm = parse_real("source.wavelength_nm", l, v);
    };
    t["source.linewidth_hz"] = [](Config& c, const std::string& v, std::size_t l) {
      c.source.linewidth_hz = parse_real("source.linewidth_hz", l, v);
    };
    t["source.angular_width_rad"] = [](Config& c, const std::string& v, std::size_t l) {
      c.source.angular_width_rad = parse_real("source.angular_width_rad", l, v);
    };
    t["source.polarization"] = [](Config& c, const std::string& v, std::size_t l) {
      c.source.polarization = parse_enum("source.polarization", l, v,
                                         {Polarization::polarized, Polarization::unpolarized});
    };
    t["source.mean_rate_hz"] = [](Config& c, const std::string& v, std::size_t l) {
      c.source.mean_rate_hz = parse_real("source.mean_rate_hz", l, v);
    };
    t["source.modes"] = [](Config& c, const std::string& v, std::size_t l) {
      c.source.modes = parse_unsigned("source.modes", l, v);
    };
    t["source.period_samples"] = [](Config& c, const std::string& v, std::size_t l) {
      c.source.period_samples = parse_unsigned("source.period_samples", l, v);
    };
    t["source.flux"] = [](Config& c, const std::string& v, std::size_t l) {
      c.source.flux = parse_enum("source.flux", l, v, {FluxMode::detected, FluxMode::physical});
    };
    t["detector.pde"] = [](Config& c, const std::string& v, std::size_t l) {
      c.detector.pde = parse_real("detector.pde", l, v);
    };
    t["detector.dead_time_ns"] = [](Config& c, const std::string& v, std::size_t l) {
      c.detector.dead_time_ns = parse_real("detector.dead_time_ns", l, v);
    };
    t["detector.jitter_fwhm_ps"] = [](Config& c, const std::string& v, std::size_t l) {
      c.detector.jitter_fwhm_ps = parse_real("detector.jitter_fwhm_ps", l, v);
    };
    t["detector.dcr_hz"] = [](Config& c, const std::string& v, std::size_t l) {
      c.detector.dcr_hz = parse_real("detector.dcr_hz", l, v);
    };
    t["grid.sim_dt_ps"] = [](Config& c, const std::string& v, std::size_t l) {
      c.grid.sim_dt_ps = to_picoseconds("grid.sim_dt_ps", l, parse_real("grid.sim_dt_ps", l, v), 1.0);
    };
    t["grid.bin_T_ns"] = [](Config& c, const std::string& v, std::size_t l) {
      c.grid.bin_ps = to_picoseconds("grid.bin_T_ns", l, parse_real("grid.bin_T_ns", l, v), 1000.0);
    };
    t["grid.window_N"] = [](Config& c, const std::string& v, std::size_t l) {
      c.grid.window_N = parse_unsigned("grid.window_N", l, v);
    };
    t["grid.window_M"] = [](Config& c, const std::string& v, std::size_t l) {
      c.grid.window_M = parse_unsigned("grid.window_M", l, v);
    };
    t["grid.max_lag_bins"] = [](Config& c, const std::string& v, std::size_t l) {
      c.grid.max_lag_bins = parse_unsigned("grid.max_lag_bins", l, v);
    };
    t["run.seed"] = [](Config& c, const std::string& v, std::size_t l) {
      c.run.seed = parse_unsigned("run.seed", l, v);
    };
    t["run.experiment"] = [](Config& c, const std::string& v, std::size_t l) {
      c.run.experiment = parse_enum("run.experiment", l, v,
                                    {ExperimentKind::temporal_pair, ExperimentKind::spatial_row,
                                     ExperimentKind::full_map, ExperimentKind::method_compare,
                                     ExperimentKind::table1_suite});
    };
    t["run.variant"] = [](Config& c, const std::string& v, std::size_t l) {
      c.run.variant = parse_enum("run.variant", l, v, {Variant::global, Variant::per_window});
    };
    t["run.pairs"] = [](Config& c, const std::string& v, std::size_t l) {
      try {
        c.run.pairs = parse_pairs(v);
      } catch (const std::invalid_argument& e) {
        throw ConfigError("run.pairs", l, e.what());
      }
    };
    t["run.row"] = [](Config& c, const std::string& v, std::size_t l) {
      c.run.row = parse_unsigned("run.row", l, v);
    };
    t["run.virtual_pixel"] = [](Config& c, const std::string& v, std::size_t l) {
      c.run.virtual_pixel = parse_unsigned("run.virtual_pixel", l, v);
    };
    return t;
  }();
  return table;
}

} // namespace

ConfigError::ConfigError(const std::string& key, std::size_t line, const std::string& what)
    : std::runtime_error((line > 0 ? "line " + std::to_string(line) + ": " : std::string{}) +
                         (key.empty() ? what : key + ": " + what)),
      key_(key), line_(line) {}

void ArrayGeometry::validate() const {
  if (rows < 1) throw ConfigError("geometry.rows", 0, "must be >= 1");
  if (cols < 1) throw ConfigError("geometry.cols", 0, "must be >= 1");
  if (!(pitch_x_um > 0.0)) throw ConfigError("geometry.pitch_x_um", 0, "must be > 0");
  if (!(pitch_y_um > 0.0)) throw ConfigError("geometry.pitch_y_um", 0, "must be > 0");
  if (!(active_diameter_um >= 0.0) || !(active_diameter_um < std::min(pitch_x_um, pitch_y_um))) {
    throw ConfigError("geometry.active_diameter_um", 0, "must be in [0, min(pitch_x, pitch_y))");
  }
}

double SourceSpec::linewidth_rad_s() const noexcept {
  return 2.0 * std::numbers::pi * linewidth_hz;
}

void SourceSpec::validate() const {
  if (!(wavelength_nm > 0.0)) throw ConfigError("source.wavelength_nm", 0, "must be > 0");
  if (kind == SourceKind::chaotic && !(linewidth_hz > 0.0)) {
    throw ConfigError("source.linewidth_hz", 0, "must be > 0 for a chaotic source");
  }
  if (!(linewidth_hz >= 0.0)) throw ConfigError("source.linewidth_hz", 0, "must be >= 0");
  if (!(angular_width_rad >= 0.0)) throw ConfigError("source.angular_width_rad", 0, "must be >= 0");
  if (!(mean_rate_hz >= 0.0)) throw ConfigError("source.mean_rate_hz", 0, "must be >= 0");
  if (modes < 1) throw ConfigError("source.modes", 0, "must be >= 1");
  if (period_samples < 2) throw ConfigError("source.period_samples", 0, "must be >= 2");
}

void DetectorSpec::validate() const {
  if (!(pde >= 0.0 && pde <= 1.0)) throw ConfigError("detector.pde", 0, "must be in [0, 1]");
  if (!(dead_time_ns >= 0.0)) throw ConfigError("detector.dead_time_ns", 0, "must be >= 0");
  if (!(jitter_fwhm_ps >= 0.0)) throw ConfigError("detector.jitter_fwhm_ps", 0, "must be >= 0");
  if (!(dcr_hz >= 0.0)) throw ConfigError("detector.dcr_hz", 0, "must be >= 0");
}

std::int64_t TimeGrid::acquisition_ps() const noexcept {
  return static_cast<std::int64_t>(window_M * window_span()) * bin_ps;
}

void TimeGrid::validate() const {
  if (sim_dt_ps <= 0) throw ConfigError("grid.sim_dt_ps", 0, "must be > 0");
  if (bin_ps < sim_dt_ps) throw ConfigError("grid.bin_T_ns", 0, "bin_T must be >= sim_dt");
  if (bin_ps % sim_dt_ps != 0) {
    throw ConfigError("grid.bin_T_ns", 0, "bin_T must be an integer multiple of sim_dt");
  }
  if (window_N < 1) throw ConfigError("grid.window_N", 0, "must be >= 1");
  if (window_M < 1) throw ConfigError("grid.window_M", 0, "must be >= 1");
  if (max_lag_bins >= window_N) throw ConfigError("grid.max_lag_bins", 0, "must be < window_N");
}

void Config::validate() const {
  geometry.validate();
  source.validate();
  detector.validate();
  grid.validate();
  const auto pixels = geometry.pixel_count();
  if (run.pairs.empty()) throw ConfigError("run.pairs", 0, "at least one pair is required");
  for (const auto& [i, j] : run.pairs) {
    if (i >= pixels || j >= pixels || i == j) {
      throw ConfigError("run.pairs", 0,
                        "pair " + std::to_string(i) + "-" + std::to_string(j) + " is not a valid pixel pair");
    }
  }
  if (run.row >= geometry.rows) throw ConfigError("run.row", 0, "row out of range");
  if (run.virtual_pixel >= pixels) throw ConfigError("run.virtual_pixel", 0, "pixel out of range");
}

PixelPosition pixel_position(const ArrayGeometry& geometry, std::size_t pixel) {
  if (pixel >= geometry.pixel_count()) {
    throw std::out_of_range("pixel index " + std::to_string(pixel) + " out of range [0, " +
                            std::to_string(geometry.pixel_count()) + ")");
  }
  const auto row = pixel / geometry.cols;
  const auto col = pixel % geometry.cols;
  return {static_cast<double>(col) * geometry.pitch_x_um, static_cast<double>(row) * geometry.pitch_y_um};
}

PixelPosition pair_offset(const ArrayGeometry& geometry, std::size_t i, std::size_t j) {
  const auto a = pixel_position(geometry, i);
  const auto b = pixel_position(geometry, j);
  return {b.x_um - a.x_um, b.y_um - a.y_um};
}

double pair_separation(const ArrayGeometry& geometry, std::size_t i, std::size_t j) {
  const auto d = pair_offset(geometry, i, j);
  return std::hypot(d.x_um, d.y_um);
}

std::vector<PixelPair> all_pairs(std::size_t pixels) {
  std::vector<PixelPair> out;
  out.reserve(pixels * (pixels > 0 ? pixels - 1 : 0) / 2);
  for (std::size_t i = 0; i < pixels; ++i) {
    for (std::size_t j = i + 1; j < pixels; ++j) out.emplace_back(i, j);
  }
  return out;
}

Config parse_config(const std::string& text) {
  Config config;
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const auto hash = raw.find('#');
    const std::string content = trim(std::string_view(raw).substr(0, hash));
    if (content.empty()) continue;
    const auto eq = content.find('=');
    if (eq == std::string::npos) throw ConfigError("", line, "expected 'key = value'");
    const std::string key = trim(std::string_view(content).substr(0, eq));
    const std::string value = trim(std::string_view(content).substr(eq + 1));
    if (key.empty()) throw ConfigError("", line, "missing key");
    if (value.empty()) throw ConfigError(key, line, "missing value");
    const auto it = setters().find(key);
    if (it == setters().end()) throw ConfigError(key, line, "unknown key");
    if (!seen.insert(key).second) throw ConfigError(key, line, "duplicate key");
    it->second(config, value, line);
  }
  config.validate();
  return config;
}

Config load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", 0, "cannot open config file '" + path.string() + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str());
}

std::string format_config(const Config& c) {
  std::ostringstream out;
  auto line = [&out](const char* key, const std::string& value) { out << key << " = " << value << '\n'; };
  line("geometry.rows", std::to_string(c.geometry.rows));
  line("geometry.cols", std::to_string(c.geometry.cols));
  line("geometry.pitch_x_um", format_double(c.geometry.pitch_x_um));
  line("geometry.pitch_y_um", format_double(c.geometry.pitch_y_um));
  line("geometry.active_diameter_um", format_double(c.geometry.active_diameter_um));
  line("source.kind", to_string(c.source.kind));
  line("source.wavelength_nm", format_double(c.source.wavelength_nm));
  line("source.linewidth_hz", format_double(c.source.linewidth_hz));
  line("source.angular_width_rad", format_double(c.source.angular_width_rad));
  line("source.polarization", to_string(c.source.polarization));
  line("source.mean_rate_hz", format_double(c.source.mean_rate_hz));
  line("source.modes", std::to_string(c.source.modes));
  line("source.period_samples", std::to_string(c.source.period_samples));
  line("source.flux", to_string(c.source.flux));
  line("detector.pde", format_double(c.detector.pde));
  line("detector.dead_time_ns", format_double(c.detector.dead_time_ns));
  line("detector.jitter_fwhm_ps", format_double(c.detector.jitter_fwhm_ps));
  line("detector.dcr_hz", format_double(c.detector.dcr_hz));
  line("grid.sim_dt_ps", std::to_string(c.grid.sim_dt_ps));
  line("grid.bin_T_ns", format_double(static_cast<double>(c.grid.bin_ps) / 1000.0));
  line("grid.window_N", std::to_string(c.grid.window_N));
  line("grid.window_M", std::to_string(c.grid.window_M));
  line("grid.max_lag_bins", std::to_string(c.grid.max_lag_bins));
  line("run.seed", std::to_string(c.run.seed));
  line("run.experiment", to_string(c.run.experiment));
  line("run.variant", to_string(c.run.variant));
  line("run.pairs", format_pairs(c.run.pairs));
  line("run.row", std::to_string(c.run.row));
  line("run.virtual_pixel", std::to_string(c.run.virtual_pixel));
  return out.str();
}

void save_config(const Config& config, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write config file '" + path.string() + "'");
  out << format_config(config);
}

const char* to_string(SourceKind kind) noexcept {
  switch (kind) {
  case SourceKind::coherent: return "coherent";
  case SourceKind::chaotic: return "chaotic";
  case SourceKind::incoherent: return "incoherent";
  }
  return "?";
}

const char* to_string(Polarization polarization) noexcept {
  return polarization == Polarization::polarized ? "polarized" : "unpolarized";
}

const char* to_string(FluxMode flux) noexcept {
  return flux == FluxMode::detected ? "detected" : "physical";
}

const char* to_string(ExperimentKind kind) noexcept {
  switch (kind) {
  case ExperimentKind::temporal_pair: return "temporal_pair";
  case ExperimentKind::spatial_row: return "spatial_row";
  case ExperimentKind::full_map: return "full_map";
  case ExperimentKind::method_compare: return "method_compare";
  case ExperimentKind::table1_suite: return "table1_suite";
  }
  return "?";
}

const char* to_string(Variant variant) noexcept {
  return variant == Variant::global ? "global" : "per_window";
}

SourceKind parse_source_kind(const std::string& text) {
  return parse_enum("source.kind", 0, text, {SourceKind::coherent, SourceKind::chaotic, SourceKind::incoherent});
}

ExperimentKind parse_experiment_kind(const std::string& text) {
  return parse_enum("run.experiment", 0, text,
                    {ExperimentKind::temporal_pair, ExperimentKind::spatial_row, ExperimentKind::full_map,
                     ExperimentKind::method_compare, ExperimentKind::table1_suite});
}

Variant parse_variant(const std::string& text) {
  return parse_enum("variant", 0, text, {Variant::global, Variant::per_window});
}

std::vector<PixelPair> parse_pairs(const std::string& text) {
  std::vector<PixelPair> pairs;
  std::istringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    const auto dash = item.find('-');
    if (dash == std::string::npos) throw std::invalid_argument("pair '" + item + "' must look like i-j");
    std::size_t i = 0;
    std::size_t j = 0;
    const std::string a = trim(std::string_view(item).substr(0, dash));
    const std::string b = trim(std::string_view(item).substr(dash + 1));
    auto r1 = std::from_chars(a.data(), a.data() + a.size(), i);
    auto r2 = std::from_chars(b.data(), b.data() + b.size(), j);
    if (r1.ec != std::errc{} || r1.ptr != a.data() + a.size() || r2.ec != std::errc{} ||
        r2.ptr != b.data() + b.size()) {
      throw std::invalid_argument("pair '" + item + "' must look like i-j");
    }
    pairs.emplace_back(i, j);
  }
  return pairs;
}

std::string format_pairs(const std::vector<PixelPair>& pairs) {
  std::string out;
  for (const auto& [i, j] : pairs) {
    if (!out.empty()) out += ",";
    out += std::to_string(i) + "-" + std::to_string(j);
  }
  return out;
}

std::string format_double(double value) {
  if (std::isnan(value)) return "nan";
  char buffer[64];
  auto [ptr, ec] = std::to_chars(buffer, buffer + sizeof buffer, value);
  return std::string(buffer, ptr);
}

} // namespace g2i
