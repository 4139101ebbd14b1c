#include "g2i/field_synth.hpp"

#include <fftw3.h>

#include <cmath>
#include <fstream>
#include <memory>
#include <mutex>
#include <numbers>
#include <stdexcept>

#include "binary_io.hpp"
#include "g2i/model.hpp"
#include "g2i/parallel.hpp"
#include "g2i/random.hpp"

namespace g2i {

namespace {

constexpr double two_pi = 2.0 * std::numbers::pi;
constexpr std::uint32_t trace_version = 1;

// The FFTW planner is not thread-safe; execution is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwFree {
  void operator()(fftw_complex* p) const noexcept { fftw_free(p); }
};
using FftwBuffer = std::unique_ptr<fftw_complex[], FftwFree>;

FftwBuffer make_buffer(std::size_t n) {
  auto* p = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n));
  if (p == nullptr) throw std::bad_alloc();
  return FftwBuffer(p);
}

class ForwardPlan {
public:
  ForwardPlan(std::size_t n, fftw_complex* in, fftw_complex* out) {
    std::lock_guard lock(planner_mutex());
    plan_ = fftw_plan_dft_1d(static_cast<int>(n), in, out, FFTW_FORWARD, FFTW_ESTIMATE);
    if (plan_ == nullptr) throw std::runtime_error("FFTW planning failed");
  }
  ~ForwardPlan() {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(plan_);
  }
  ForwardPlan(const ForwardPlan&) = delete;
  ForwardPlan& operator=(const ForwardPlan&) = delete;

  void execute() const { fftw_execute(plan_); }

private:
  fftw_plan plan_;
};

// Maps each mode frequency to a distinct bin of the period's DFT grid.
std::vector<std::size_t> assign_bins(const std::vector<Mode>& branch, double sim_dt_s, std::size_t period) {
  const double bin_width = two_pi / (static_cast<double>(period) * sim_dt_s);
  const auto half = static_cast<long long>(period / 2);
  std::vector<bool> used(period, false);
  std::vector<std::size_t> bins;
  bins.reserve(branch.size());
  for (const auto& mode : branch) {
    const long long centre = std::llround(mode.omega_rad_s / bin_width);
    bool placed = false;
    for (long long offset = 0; offset < half && !placed; ++offset) {
      for (long long candidate : {centre + offset, centre - offset}) {
        if (candidate <= -half || candidate >= half) continue;
        const auto index = static_cast<std::size_t>((candidate % static_cast<long long>(period) +
                                                     static_cast<long long>(period)) %
                                                    static_cast<long long>(period));
        if (!used[index]) {
          used[index] = true;
          bins.push_back(index);
          placed = true;
          break;
        }
      }
    }
    if (!placed || std::abs(centre) >= half) {
      throw std::invalid_argument("mode frequencies exceed the sim_dt Nyquist band; reduce grid.sim_dt_ps");
    }
  }
  return bins;
}

std::int64_t duration_steps(double duration_s, std::int64_t sim_dt_ps) {
  if (!(duration_s >= 0.0)) throw std::invalid_argument("duration must be >= 0");
  const auto ps = static_cast<std::int64_t>(std::llround(duration_s * 1e12));
  return (ps + sim_dt_ps - 1) / sim_dt_ps;
}

IntensityTrace constant_trace(const ArrayGeometry& geometry, const TimeGrid& grid, double duration_s,
                              double target_rate_hz) {
  geometry.validate();
  grid.validate();
  if (!(target_rate_hz >= 0.0)) throw std::invalid_argument("target rate must be >= 0");
  IntensityTrace trace;
  trace.sim_dt_ps = grid.sim_dt_ps;
  trace.duration_steps = duration_steps(duration_s, grid.sim_dt_ps);
  trace.rate_hz.assign(geometry.pixel_count(), std::vector<double>{target_rate_hz});
  trace.realized_mean_hz.assign(geometry.pixel_count(), target_rate_hz);
  return trace;
}

} // namespace

ModeSet sample_modes(const SourceSpec& spec, std::size_t mode_count, std::uint64_t seed) {
  if (spec.kind != SourceKind::chaotic) {
    throw std::invalid_argument("sample_modes: only chaotic sources are built from modes");
  }
  if (mode_count < 1) throw std::invalid_argument("sample_modes: need at least one mode");
  spec.validate();

  ModeSet set;
  set.wavelength_nm = spec.wavelength_nm;
  set.linewidth_rad_s = spec.linewidth_rad_s();
  set.angular_width_rad = spec.angular_width_rad;

  const double sigma_omega = set.linewidth_rad_s / (2.0 * std::sqrt(2.0 * std::numbers::ln2));
  const double half_width = spec.angular_width_rad / 2.0;
  const double amplitude = 1.0 / std::sqrt(static_cast<double>(mode_count));
  for (std::size_t b = 0; b < spec.branches(); ++b) {
    auto engine = make_engine(seed, Stream::modes, b);
    std::normal_distribution<double> frequency(0.0, sigma_omega);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<Mode> branch(mode_count);
    for (auto& mode : branch) {
      mode.omega_rad_s = frequency(engine);
      mode.angle_x_rad = half_width * (2.0 * unit(engine) - 1.0);
      mode.angle_y_rad = half_width * (2.0 * unit(engine) - 1.0);
      mode.phase_rad = two_pi * unit(engine);
      mode.amplitude = amplitude;
    }
    set.branches.push_back(std::move(branch));
  }
  return set;
}

std::complex<double> field_g1(const ModeSet& modes, double x_um, double y_um, double tau_s) {
  if (modes.branches.empty() || modes.mode_count() == 0) throw std::invalid_argument("field_g1: empty mode set");
  const double k = two_pi * 1e3 / modes.wavelength_nm; // per um of path, per rad of angle
  std::complex<double> total{0.0, 0.0};
  for (const auto& branch : modes.branches) {
    std::complex<double> sum{0.0, 0.0};
    for (const auto& mode : branch) {
      const double phase = k * (mode.angle_x_rad * x_um + mode.angle_y_rad * y_um) - mode.omega_rad_s * tau_s;
      sum += std::polar(1.0, phase);
    }
    total += sum / static_cast<double>(branch.size());
  }
  return total / static_cast<double>(modes.branches.size());
}

std::vector<std::complex<double>> synth_field(const std::vector<Mode>& branch, double wavelength_nm,
                                              PixelPosition position, std::int64_t sim_dt_ps,
                                              std::size_t period_samples) {
  if (period_samples < 2) throw std::invalid_argument("period must hold at least 2 samples");
  const auto bins = assign_bins(branch, static_cast<double>(sim_dt_ps) * 1e-12, period_samples);
  auto in = make_buffer(period_samples);
  auto out = make_buffer(period_samples);
  const ForwardPlan plan(period_samples, in.get(), out.get());
  for (std::size_t n = 0; n < period_samples; ++n) in[n][0] = in[n][1] = 0.0;

  const double k = two_pi * 1e3 / wavelength_nm;
  for (std::size_t m = 0; m < branch.size(); ++m) {
    const auto& mode = branch[m];
    const double phase = k * (mode.angle_x_rad * position.x_um + mode.angle_y_rad * position.y_um) + mode.phase_rad;
    in[bins[m]][0] += mode.amplitude * std::cos(phase);
    in[bins[m]][1] += mode.amplitude * std::sin(phase);
  }
  plan.execute();

  std::vector<std::complex<double>> field(period_samples);
  for (std::size_t n = 0; n < period_samples; ++n) field[n] = {out[n][0], out[n][1]};
  return field;
}

IntensityTrace synth_intensity(const ModeSet& modes, const ArrayGeometry& geometry, const TimeGrid& grid,
                               double duration_s, double target_rate_hz, std::size_t period_samples,
                               unsigned threads) {
  if (modes.branches.empty() || modes.mode_count() == 0) {
    throw std::invalid_argument("synth_intensity needs a chaotic mode set");
  }
  if (!(target_rate_hz > 0.0)) throw std::invalid_argument("synth_intensity: target rate must be > 0");
  geometry.validate();
  grid.validate();

  IntensityTrace trace;
  trace.sim_dt_ps = grid.sim_dt_ps;
  trace.duration_steps = duration_steps(duration_s, grid.sim_dt_ps);
  const double tau_c = coherence_time(modes.linewidth_rad_s);
  if (duration_s < 10.0 * tau_c) {
    trace.warnings.push_back("duration is shorter than 10 coherence times; statistics are unreliable");
  }

  const auto pixels = geometry.pixel_count();
  trace.rate_hz.resize(pixels);
  trace.realized_mean_hz.resize(pixels);
  parallel_for(pixels, threads, [&](std::size_t pixel) {
    const auto position = pixel_position(geometry, pixel);
    std::vector<double> intensity(period_samples, 0.0);
    for (const auto& branch : modes.branches) {
      const auto field = synth_field(branch, modes.wavelength_nm, position, grid.sim_dt_ps, period_samples);
      for (std::size_t n = 0; n < period_samples; ++n) intensity[n] += std::norm(field[n]);
    }
    double sum = 0.0;
    for (double v : intensity) sum += v;
    const double mean = sum / static_cast<double>(period_samples);
    if (!(mean > 0.0)) throw std::runtime_error("synthesized field has zero power");
    const double scale = target_rate_hz / mean;
    double realized = 0.0;
    for (double& v : intensity) {
      v *= scale;
      realized += v;
    }
    trace.realized_mean_hz[pixel] = realized / static_cast<double>(period_samples);
    trace.rate_hz[pixel] = std::move(intensity);
  });
  return trace;
}

IntensityTrace synth_intensity_coherent(const ArrayGeometry& geometry, const TimeGrid& grid, double duration_s,
                                        double target_rate_hz) {
  return constant_trace(geometry, grid, duration_s, target_rate_hz);
}

IntensityTrace synth_intensity_incoherent(const ArrayGeometry& geometry, const TimeGrid& grid, double duration_s,
                                          double target_rate_hz, std::uint64_t /*seed*/) {
  auto trace = constant_trace(geometry, grid, duration_s, target_rate_hz);
  trace.independent_pixels = true;
  return trace;
}

IntensityTrace select_pixels(const IntensityTrace& trace, const std::vector<std::size_t>& pixels) {
  IntensityTrace out;
  out.sim_dt_ps = trace.sim_dt_ps;
  out.duration_steps = trace.duration_steps;
  out.physical_flux = trace.physical_flux;
  out.independent_pixels = trace.independent_pixels;
  out.warnings = trace.warnings;
  for (auto p : pixels) {
    if (p >= trace.pixel_count()) throw std::out_of_range("select_pixels: pixel " + std::to_string(p));
    out.rate_hz.push_back(trace.rate_hz[p]);
    out.realized_mean_hz.push_back(trace.realized_mean_hz[p]);
  }
  return out;
}

void write_trace(const IntensityTrace& trace, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out.write("G2IT", 4);
  detail::put_u32(out, trace_version);
  detail::put_u32(out, static_cast<std::uint32_t>(trace.pixel_count()));
  detail::put_u64(out, trace.block_samples());
  detail::put_u64(out, static_cast<std::uint64_t>(trace.sim_dt_ps));
  for (const auto& block : trace.rate_hz) {
    for (double v : block) detail::put_f64(out, v);
  }
  if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

IntensityTrace read_trace(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
  detail::ByteReader reader(in);
  char magic[4];
  reader.read(magic, 4, "magic");
  if (std::string(magic, 4) != "G2IT") throw std::runtime_error("not a G2IT file (bad magic)");
  const auto version = reader.u32("version");
  if (version != trace_version) throw std::runtime_error("unsupported G2IT version " + std::to_string(version));
  const auto pixels = reader.u32("pixel count");
  const auto samples = reader.u64("sample count");
  IntensityTrace trace;
  trace.sim_dt_ps = static_cast<std::int64_t>(reader.u64("sim_dt_ps"));
  trace.duration_steps = static_cast<std::int64_t>(samples);
  trace.rate_hz.assign(pixels, std::vector<double>(samples));
  for (auto& block : trace.rate_hz) {
    double sum = 0.0;
    for (auto& v : block) {
      v = reader.f64("sample");
      sum += v;
    }
    trace.realized_mean_hz.push_back(samples > 0 ? sum / static_cast<double>(samples) : 0.0);
  }
  return trace;
}

} // namespace g2i
