#include "g2i/correlator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "g2i/parallel.hpp"

namespace g2i {

namespace {

// Integer sums for one lag direction: pixel `a` supplies the N-bin core,
// pixel `b` the lag-shifted span. Index = lag in [0, L].
struct DirectionSums {
  std::vector<std::int64_t> coincidences;
  std::vector<std::int64_t> shifted;  // sum_m s_b(m, l)
  std::vector<std::int64_t> weighted; // sum_m s_a(m) s_b(m, l)
  std::int64_t core = 0;              // sum_m s_a(m)
};

DirectionSums accumulate(std::span<const std::uint64_t> a, std::span<const std::uint64_t> b,
                         const WindowLayout& layout) {
  const std::uint64_t N = layout.window_N;
  const std::uint64_t L = layout.max_lag;
  const std::uint64_t span = layout.span();

  DirectionSums sums;
  sums.coincidences.assign(L + 1, 0);
  std::vector<std::int64_t> diff_shifted(L + 2, 0);
  std::vector<std::int64_t> diff_weighted(L + 2, 0);

  std::size_t jb = 0;
  for (const auto g : a) {
    if (g % span >= N) continue;
    ++sums.core;
    while (jb < b.size() && b[jb] < g) ++jb;
    for (std::size_t k = jb; k < b.size() && b[k] <= g + L; ++k) ++sums.coincidences[b[k] - g];
  }

  // A set bin of b at window position p lies inside [l, l + N) for
  // l in [max(0, p - N + 1), min(L, p)].
  std::size_t pa = 0;
  std::uint64_t cached_window = std::numeric_limits<std::uint64_t>::max();
  std::int64_t core_in_window = 0;
  for (const auto g : b) {
    const std::uint64_t m = g / span;
    const std::uint64_t p = g % span;
    const std::uint64_t lo = p >= N ? p - N + 1 : 0;
    const std::uint64_t hi = std::min(L, p);
    if (m != cached_window) {
      const std::uint64_t start = m * span;
      while (pa < a.size() && a[pa] < start) ++pa;
      std::size_t q = pa;
      while (q < a.size() && a[q] < start + N) ++q;
      core_in_window = static_cast<std::int64_t>(q - pa);
      cached_window = m;
    }
    ++diff_shifted[lo];
    --diff_shifted[hi + 1];
    diff_weighted[lo] += core_in_window;
    diff_weighted[hi + 1] -= core_in_window;
  }
  sums.shifted.resize(L + 1);
  sums.weighted.resize(L + 1);
  std::int64_t run_shifted = 0;
  std::int64_t run_weighted = 0;
  for (std::uint64_t l = 0; l <= L; ++l) {
    run_shifted += diff_shifted[l];
    run_weighted += diff_weighted[l];
    sums.shifted[l] = run_shifted;
    sums.weighted[l] = run_weighted;
  }
  return sums;
}

void fill_lag(Correlogram& out, std::size_t index, const DirectionSums& sums, std::size_t l,
              const WindowLayout& layout) {
  const auto c = sums.coincidences[l];
  double numerator_scale = 0.0;
  double denominator = 0.0;
  if (out.variant == Variant::global) {
    numerator_scale = static_cast<double>(layout.window_N) * static_cast<double>(layout.window_M);
    denominator = static_cast<double>(sums.core) * static_cast<double>(sums.shifted[l]);
  } else {
    numerator_scale = static_cast<double>(layout.window_N);
    denominator = static_cast<double>(sums.weighted[l]);
  }
  out.coincidences[index] = c;
  if (denominator == 0.0) {
    out.g2[index] = std::nullopt;
    out.std_error[index] = std::numeric_limits<double>::quiet_NaN();
    out.diagnostics.push_back("lag " + std::to_string(out.lag(index)) + ": zero denominator, no estimate");
    return;
  }
  const double per_count = numerator_scale / denominator;
  out.g2[index] = per_count * static_cast<double>(c);
  out.std_error[index] = per_count * std::sqrt(static_cast<double>(std::max<std::int64_t>(c, 1)));
}

Correlogram correlate(std::span<const std::uint64_t> bits_i, std::span<const std::uint64_t> bits_j,
                      const WindowLayout& layout, Variant variant) {
  Correlogram out;
  out.variant = variant;
  out.bin_ps = layout.bin_ps;
  out.max_lag = layout.max_lag;
  const auto lags = out.lag_count();
  out.g2.resize(lags);
  out.std_error.resize(lags);
  out.coincidences.resize(lags);

  const auto forward = accumulate(bits_i, bits_j, layout);
  const auto backward = accumulate(bits_j, bits_i, layout);
  for (std::size_t l = 0; l <= layout.max_lag; ++l) fill_lag(out, layout.max_lag + l, forward, l, layout);
  for (std::size_t l = 1; l <= layout.max_lag; ++l) fill_lag(out, layout.max_lag - l, backward, l, layout);
  return out;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

} // namespace

std::size_t Correlogram::index_of(long lag) const {
  const long limit = static_cast<long>(max_lag);
  if (lag < -limit || lag > limit) throw std::out_of_range("lag " + std::to_string(lag) + " outside the correlogram");
  return static_cast<std::size_t>(lag + limit);
}

Correlogram g2_pair(const BinaryWindowSet& bins_i, const BinaryWindowSet& bins_j, Variant variant) {
  if (!(bins_i.layout() == bins_j.layout())) throw std::invalid_argument("g2_pair: window structures differ");
  if (bins_i.pixel_count() < 1 || bins_j.pixel_count() < 1) throw std::invalid_argument("g2_pair: empty window set");
  return correlate(bins_i.set_bins(0), bins_j.set_bins(0), bins_i.layout(), variant);
}

Correlogram g2_pair(const BinaryWindowSet& bins, std::size_t i, std::size_t j, Variant variant,
                    double separation_um) {
  if (i >= bins.pixel_count() || j >= bins.pixel_count()) throw std::out_of_range("g2_pair: pixel out of range");
  auto out = correlate(bins.set_bins(i), bins.set_bins(j), bins.layout(), variant);
  out.pixel_i = i;
  out.pixel_j = j;
  out.separation_um = separation_um;
  return out;
}

std::vector<Correlogram> g2_pairs(const BinaryWindowSet& bins, const std::vector<PixelPair>& pairs, Variant variant,
                                  const ArrayGeometry* geometry, unsigned threads) {
  const bool has_geometry = geometry != nullptr && geometry->pixel_count() == bins.pixel_count();
  std::vector<Correlogram> out(pairs.size());
  parallel_for(pairs.size(), threads, [&](std::size_t k) {
    const auto [i, j] = pairs[k];
    try {
      const double separation = has_geometry ? pair_separation(*geometry, i, j) : 0.0;
      out[k] = g2_pair(bins, i, j, variant, separation);
    } catch (const std::exception& e) {
      out[k] = Correlogram{};
      out[k].pixel_i = i;
      out[k].pixel_j = j;
      out[k].variant = variant;
      out[k].diagnostics.push_back(e.what());
    }
  });
  return out;
}

std::vector<Correlogram> g2_all_pairs(const BinaryWindowSet& bins, Variant variant, const ArrayGeometry* geometry,
                                      unsigned threads) {
  if (bins.pixel_count() < 2) throw std::invalid_argument("g2_all_pairs needs at least two pixels");
  return g2_pairs(bins, all_pairs(bins.pixel_count()), variant, geometry, threads);
}

CorrelationMap zero_lag_map(const std::vector<Correlogram>& correlograms, std::size_t pixels) {
  CorrelationMap map;
  map.pixels = pixels;
  map.values.assign(pixels * pixels, std::numeric_limits<double>::quiet_NaN());
  std::vector<bool> seen(pixels * pixels, false);
  for (const auto& c : correlograms) {
    if (c.pixel_i >= pixels || c.pixel_j >= pixels || c.pixel_i == c.pixel_j) continue;
    double value = std::numeric_limits<double>::quiet_NaN();
    if (!c.g2.empty()) {
      if (const auto v = c.at(0)) value = *v;
    }
    map.values[c.pixel_i * pixels + c.pixel_j] = value;
    map.values[c.pixel_j * pixels + c.pixel_i] = value;
    seen[c.pixel_i * pixels + c.pixel_j] = seen[c.pixel_j * pixels + c.pixel_i] = true;
  }
  for (std::size_t i = 0; i < pixels; ++i) {
    map.values[i * pixels + i] = CorrelationMap::diagonal_value;
    for (std::size_t j = i + 1; j < pixels; ++j) {
      if (!seen[i * pixels + j]) {
        throw std::invalid_argument("zero_lag_map: missing pair " + std::to_string(i) + "-" + std::to_string(j));
      }
    }
  }
  return map;
}

void write_correlograms_csv(const std::vector<Correlogram>& correlograms, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << "pair_i,pair_j,separation_um,lag_ns,g2,stderr,coincidences,variant\n";
  for (const auto& c : correlograms) {
    for (std::size_t k = 0; k < c.g2.size(); ++k) {
      out << c.pixel_i << ',' << c.pixel_j << ',' << format_double(c.separation_um) << ','
          << format_double(c.lag_ns(k)) << ',' << (c.g2[k] ? format_double(*c.g2[k]) : std::string{}) << ','
          << format_double(c.std_error[k]) << ',' << c.coincidences[k] << ',' << to_string(c.variant) << '\n';
    }
  }
}

void write_map_csv(const CorrelationMap& map, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  for (std::size_t i = 0; i < map.pixels; ++i) {
    for (std::size_t j = 0; j < map.pixels; ++j) {
      if (j > 0) out << ',';
      out << format_double(map.at(i, j));
    }
    out << '\n';
  }
}

std::vector<Correlogram> read_correlograms_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line) || line != "pair_i,pair_j,separation_um,lag_ns,g2,stderr,coincidences,variant") {
    throw std::runtime_error("'" + path.string() + "' is not a correlogram CSV");
  }
  std::vector<Correlogram> out;
  std::vector<std::vector<double>> lags_ns;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    const auto f = split_csv(line);
    if (f.size() != 8) throw std::runtime_error("row " + std::to_string(row) + ": expected 8 fields");
    try {
      const auto i = std::stoul(f[0]);
      const auto j = std::stoul(f[1]);
      if (out.empty() || out.back().pixel_i != i || out.back().pixel_j != j) {
        out.emplace_back();
        out.back().pixel_i = i;
        out.back().pixel_j = j;
        out.back().separation_um = std::stod(f[2]);
        out.back().variant = parse_variant(f[7]);
        lags_ns.emplace_back();
      }
      auto& c = out.back();
      lags_ns.back().push_back(std::stod(f[3]));
      c.g2.push_back(f[4].empty() ? std::nullopt : std::optional<double>(std::stod(f[4])));
      c.std_error.push_back(std::stod(f[5]));
      c.coincidences.push_back(std::stoll(f[6]));
    } catch (const std::logic_error&) {
      throw std::runtime_error("row " + std::to_string(row) + ": malformed field");
    }
  }
  for (std::size_t k = 0; k < out.size(); ++k) {
    auto& c = out[k];
    const auto& lags = lags_ns[k];
    if (lags.size() % 2 == 0) throw std::runtime_error("correlogram rows must cover a symmetric lag axis");
    c.max_lag = lags.size() / 2;
    const double step = lags.size() > 1 ? lags[1] - lags[0] : 1.0;
    c.bin_ps = static_cast<std::int64_t>(std::llround(step * 1e3));
  }
  return out;
}

} // namespace g2i
