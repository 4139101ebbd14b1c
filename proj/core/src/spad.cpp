#include "g2i/spad.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

#include "binary_io.hpp"
#include "g2i/parallel.hpp"
#include "g2i/random.hpp"

namespace g2i {

namespace {

constexpr double max_step_probability = 0.1;

// Candidate steps of one pixel via cumulative-hazard inversion over the
// repeating envelope block.
std::vector<std::int64_t> candidate_times(const std::vector<double>& block, double efficiency, double dcr_hz,
                                          std::int64_t sim_dt_ps, std::int64_t total_steps, Engine& engine) {
  const double dt_s = static_cast<double>(sim_dt_ps) * 1e-12;
  const std::size_t period = block.size();
  std::vector<double> cumulative(period + 1, 0.0);
  for (std::size_t n = 0; n < period; ++n) {
    const double p = std::min(1.0, (efficiency * block[n] + dcr_hz) * dt_s);
    if (p > max_step_probability) {
      throw std::invalid_argument("per-step detection probability " + std::to_string(p) +
                                  " exceeds 0.1; reduce grid.sim_dt_ps");
    }
    cumulative[n + 1] = cumulative[n] - std::log1p(-p);
  }
  const double per_period = cumulative[period];
  std::vector<std::int64_t> times;
  if (!(per_period > 0.0) || total_steps <= 0) return times;

  const auto period_steps = static_cast<std::int64_t>(period);
  std::exponential_distribution<double> hazard(1.0);
  std::uniform_int_distribution<std::int64_t> within(0, sim_dt_ps - 1);
  std::int64_t cycle = 0;    // current block repetition
  std::size_t position = 0; // first step of `cycle` still eligible
  for (;;) {
    double need = hazard(engine);
    const double available = per_period - cumulative[position];
    std::size_t hit = 0;
    if (need <= available) {
      const double target = cumulative[position] + need;
      hit = static_cast<std::size_t>(
          std::lower_bound(cumulative.begin() + static_cast<std::ptrdiff_t>(position) + 1, cumulative.end(), target) -
          cumulative.begin());
    } else {
      need -= available;
      const double whole = std::floor(need / per_period);
      need -= whole * per_period;
      cycle += 1 + static_cast<std::int64_t>(whole);
      hit = static_cast<std::size_t>(std::lower_bound(cumulative.begin() + 1, cumulative.end(), need) -
                                     cumulative.begin());
    }
    hit = std::min(hit, period); // guards the round-off edge need == per_period
    const std::int64_t step = cycle * period_steps + static_cast<std::int64_t>(hit) - 1;
    if (step >= total_steps) break;
    times.push_back(step * sim_dt_ps + within(engine));
    position = hit;
    if (position == period) {
      position = 0;
      ++cycle;
    }
  }
  return times;
}

void add_jitter(std::vector<std::int64_t>& times, double jitter_fwhm_ps, std::int64_t duration_ps, Engine& engine) {
  if (jitter_fwhm_ps > 0.0) {
    const double sigma = jitter_fwhm_ps / (2.0 * std::sqrt(2.0 * std::numbers::ln2));
    std::normal_distribution<double> spread(0.0, sigma);
    for (auto& t : times) {
      const auto shifted = t + static_cast<std::int64_t>(std::llround(spread(engine)));
      t = std::clamp<std::int64_t>(shifted, 0, duration_ps - 1);
    }
  }
  std::sort(times.begin(), times.end());
}

} // namespace

std::uint64_t apply_dead_time(std::vector<std::int64_t>& times_ps, std::int64_t dead_time_ps) {
  const std::int64_t gap = std::max<std::int64_t>(dead_time_ps, 1);
  std::size_t kept = 0;
  std::int64_t last = std::numeric_limits<std::int64_t>::min();
  for (std::size_t k = 0; k < times_ps.size(); ++k) {
    const auto t = times_ps[k];
    if (kept == 0 || t - last >= gap) {
      times_ps[kept++] = t;
      last = t;
    }
  }
  const auto discarded = times_ps.size() - kept;
  times_ps.resize(kept);
  return discarded;
}

EventStream detect_events(const IntensityTrace& trace, const DetectorSpec& detector, std::uint64_t seed,
                          unsigned threads) {
  detector.validate();
  if (trace.sim_dt_ps <= 0) throw std::invalid_argument("trace has no time grid");
  const double efficiency = trace.physical_flux ? detector.pde : 1.0;
  const auto dead_time_ps = static_cast<std::int64_t>(std::llround(detector.dead_time_ns * 1e3));

  EventStream events;
  events.duration_ps = trace.duration_ps();
  const auto pixels = trace.pixel_count();
  events.times_ps.resize(pixels);
  events.candidates.resize(pixels);
  events.discarded.resize(pixels);
  parallel_for(pixels, threads, [&](std::size_t pixel) {
    auto arrivals = make_engine(seed, Stream::arrivals, pixel);
    auto jitter = make_engine(seed, Stream::jitter, pixel);
    auto times = candidate_times(trace.rate_hz[pixel], efficiency, detector.dcr_hz, trace.sim_dt_ps,
                                 trace.duration_steps, arrivals);
    events.candidates[pixel] = times.size();
    add_jitter(times, detector.jitter_fwhm_ps, events.duration_ps, jitter);
    events.discarded[pixel] = apply_dead_time(times, dead_time_ps);
    events.times_ps[pixel] = std::move(times);
  });
  return events;
}

WindowLayout window_layout(const TimeGrid& grid) {
  return WindowLayout{grid.window_N, grid.max_lag_bins, grid.window_M, grid.bin_ps};
}

BinaryWindowSet::BinaryWindowSet(WindowLayout layout, std::vector<std::vector<std::uint64_t>> set_bins)
    : layout_(layout), set_bins_(std::move(set_bins)) {
  if (layout_.window_N == 0 || layout_.window_M == 0 || layout_.bin_ps <= 0) {
    throw std::invalid_argument("window layout needs N >= 1, M >= 1 and T > 0");
  }
  if (layout_.max_lag >= layout_.window_N) throw std::invalid_argument("max lag must be < N");
  for (const auto& bins : set_bins_) {
    for (std::size_t k = 0; k < bins.size(); ++k) {
      if (bins[k] >= layout_.total_bins() || (k > 0 && bins[k] <= bins[k - 1])) {
        throw std::invalid_argument("set bins must be strictly increasing and inside the windows");
      }
    }
  }
}

BinaryWindowSet BinaryWindowSet::from_dense(WindowLayout layout, const std::vector<std::vector<std::uint8_t>>& bits) {
  std::vector<std::vector<std::uint64_t>> set(bits.size());
  for (std::size_t p = 0; p < bits.size(); ++p) {
    if (bits[p].size() != layout.total_bins()) throw std::invalid_argument("dense row length must be M * span");
    for (std::size_t g = 0; g < bits[p].size(); ++g) {
      if (bits[p][g] > 1) throw std::invalid_argument("bits must be 0 or 1");
      if (bits[p][g] != 0) set[p].push_back(g);
    }
  }
  return BinaryWindowSet(layout, std::move(set));
}

bool BinaryWindowSet::bit(std::size_t pixel, std::size_t window, std::size_t n) const {
  const auto& bins = set_bins_.at(pixel);
  const std::uint64_t g = static_cast<std::uint64_t>(window) * layout_.span() + n;
  return std::binary_search(bins.begin(), bins.end(), g);
}

std::size_t BinaryWindowSet::count(std::size_t pixel, std::size_t window, std::size_t begin, std::size_t end) const {
  const auto& bins = set_bins_.at(pixel);
  const std::uint64_t base = static_cast<std::uint64_t>(window) * layout_.span();
  const auto lo = std::lower_bound(bins.begin(), bins.end(), base + begin);
  const auto hi = std::lower_bound(lo, bins.end(), base + end);
  return static_cast<std::size_t>(hi - lo);
}

BinaryWindowSet BinaryWindowSet::slice(std::size_t pixel) const {
  return BinaryWindowSet(layout_, {set_bins_.at(pixel)});
}

BinaryWindowSet binarize(const EventStream& events, const TimeGrid& grid) {
  grid.validate();
  const auto layout = window_layout(grid);
  const auto required = static_cast<std::int64_t>(layout.total_bins()) * layout.bin_ps;
  if (events.duration_ps < required) {
    throw std::invalid_argument("event stream too short: " + std::to_string(grid.window_M) + " windows of " +
                                std::to_string(layout.span()) + " bins need " + std::to_string(required) +
                                " ps, stream lasts " + std::to_string(events.duration_ps) + " ps");
  }
  std::vector<std::vector<std::uint64_t>> set(events.pixel_count());
  for (std::size_t p = 0; p < events.pixel_count(); ++p) {
    auto& bins = set[p];
    bins.reserve(events.times_ps[p].size());
    for (auto t : events.times_ps[p]) {
      if (t < 0) continue;
      if (t >= required) break;
      const auto g = static_cast<std::uint64_t>(t / layout.bin_ps);
      if (bins.empty() || bins.back() != g) bins.push_back(g);
    }
  }
  return BinaryWindowSet(layout, std::move(set));
}

void write_events(const EventStream& events, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out.write("G2EV", 4);
  detail::put_u32(out, 1);
  detail::put_u32(out, static_cast<std::uint32_t>(events.pixel_count()));
  for (const auto& times : events.times_ps) {
    detail::put_u64(out, times.size());
    for (auto t : times) detail::put_u64(out, static_cast<std::uint64_t>(t));
  }
  if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

} // namespace g2i
