#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "g2i/config.hpp"

namespace g2i {

/// One plane-wave mode of a chaotic field.
struct Mode {
  double omega_rad_s; ///< offset from the carrier
  double angle_x_rad; ///< transverse angle along the row axis
  double angle_y_rad; ///< transverse angle across rows
  double phase_rad;
  double amplitude;
};

/// Equal-weight random modes. Frequency offsets are Gaussian with
/// sigma = delta_omega / (2 sqrt(2 ln 2)); angles are uniform on
/// [-theta/2, theta/2] on both transverse axes; phases uniform on [0, 2 pi).
/// Unpolarized light carries two independently drawn branches.
struct ModeSet {
  std::vector<std::vector<Mode>> branches;
  double wavelength_nm = 0.0;
  double linewidth_rad_s = 0.0;
  double angular_width_rad = 0.0;

  std::size_t mode_count() const noexcept { return branches.empty() ? 0 : branches.front().size(); }
};

ModeSet sample_modes(const SourceSpec& spec, std::size_t mode_count, std::uint64_t seed);

/// Branch-averaged first-order coherence of the discrete-mode field,
/// (1/K) sum_k exp(i (2 pi (a_k x + b_k y) / lambda - omega_k tau)).
std::complex<double> field_g1(const ModeSet& modes, double x_um, double y_um, double tau_s);
inline std::complex<double> field_g1(const ModeSet& modes, double x_um, double tau_s) {
  return field_g1(modes, x_um, 0.0, tau_s);
}

/// Per-pixel rate envelopes on the sim_dt grid.
///
/// The envelope is stored as one block of `block_samples` samples that
/// repeats for the whole duration; constant sources use a one-sample block.
/// Rates are in Hz and already include detection efficiency unless
/// `physical_flux` is set.
struct IntensityTrace {
  std::int64_t sim_dt_ps = 0;
  std::int64_t duration_steps = 0;
  std::vector<std::vector<double>> rate_hz; ///< [pixel][block sample]
  std::vector<double> realized_mean_hz;
  bool physical_flux = false;
  /// Envelopes of different pixels are statistically independent, so no
  /// cross-pixel correlation is expected downstream.
  bool independent_pixels = false;
  std::vector<std::string> warnings;

  std::size_t pixel_count() const noexcept { return rate_hz.size(); }
  std::size_t block_samples() const noexcept { return rate_hz.empty() ? 0 : rate_hz.front().size(); }
  std::int64_t duration_ps() const noexcept { return duration_steps * sim_dt_ps; }
  double rate(std::size_t pixel, std::int64_t step) const {
    const auto& block = rate_hz[pixel];
    return block[static_cast<std::size_t>(step % static_cast<std::int64_t>(block.size()))];
  }
};

/// Complex field of one branch at a point, sampled at sim_dt over one period
/// of `period_samples`. Mode frequencies are snapped to the period's
/// frequency grid (distinct bins), so the block tiles seamlessly.
std::vector<std::complex<double>> synth_field(const std::vector<Mode>& branch, double wavelength_nm,
                                              PixelPosition position, std::int64_t sim_dt_ps,
                                              std::size_t period_samples);

/// Chaotic envelope: I_i(t) = c * sum_branches |E_branch(x_i, t)|^2, with c
/// chosen so that the block mean equals target_rate_hz exactly.
IntensityTrace synth_intensity(const ModeSet& modes, const ArrayGeometry& geometry, const TimeGrid& grid,
                               double duration_s, double target_rate_hz,
                               std::size_t period_samples = std::size_t{1} << 20, unsigned threads = 1);

IntensityTrace synth_intensity_coherent(const ArrayGeometry& geometry, const TimeGrid& grid, double duration_s,
                                        double target_rate_hz);

/// Constant, mutually independent envelopes. The seed is accepted for
/// interface symmetry; a constant envelope consumes no randomness.
IntensityTrace synth_intensity_incoherent(const ArrayGeometry& geometry, const TimeGrid& grid, double duration_s,
                                          double target_rate_hz, std::uint64_t seed);

/// Trace with the given pixels' envelopes (duplicates allowed). Two copies of
/// one pixel act as two detectors sampling the same point (x = 0).
IntensityTrace select_pixels(const IntensityTrace& trace, const std::vector<std::size_t>& pixels);

/// Binary block format "G2IT": magic, u32 version, u32 pixels, u64 samples,
/// u64 sim_dt_ps, then pixel-major little-endian f64 samples (one block).
void write_trace(const IntensityTrace& trace, const std::filesystem::path& path);
IntensityTrace read_trace(const std::filesystem::path& path);

} // namespace g2i
