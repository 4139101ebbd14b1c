#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "g2i/config.hpp"

namespace g2i {

/// Closed-form chaotic-light reference:
///   g2(x, tau) = 1 + f * sinc^2(pi * theta * x / lambda) * exp(-pi * tau^2 / tau_c^2)
/// with f = 1/B the polarization factor (B independent polarization branches).
struct ChaoticModelParams {
  double angular_width_rad = 1e-2;
  double wavelength_nm = 546.0;
  double coherence_time_ns = 5.11;
  double polarization_factor = 0.5;

  void validate() const;
};

/// tau_c = 2 sqrt(2 pi ln 2) / delta_omega, delta_omega the angular FWHM in rad/s.
/// Returns seconds.
double coherence_time(double linewidth_rad_s);

/// sin(u)/u, continuous at u = 0.
double sinc(double u) noexcept;
/// d/du sinc(u).
double sinc_derivative(double u) noexcept;

/// |g1| = |sinc(pi theta x / lambda)| * exp(-pi tau^2 / (2 tau_c^2)).
double g1_model(const ChaoticModelParams& params, double x_um, double tau_ns);
double g2_model(const ChaoticModelParams& params, double x_um, double tau_ns);

/// g2_model averaged over the triangular kernel of half-width `bin_ns`: the
/// lag response of a coincidence between two detectors each binned with
/// width `bin_ns`.
double bin_averaged_g2(const ChaoticModelParams& params, double x_um, double tau_ns, double bin_ns);

enum class CoherenceOrder { g1, g2 };

/// Zero-delay signature of each light state: incoherent (0, 1), coherent
/// (1, 1), chaotic (1, 2).
double table1_reference(SourceKind kind, CoherenceOrder which) noexcept;

/// Builds model parameters from a source description.
ChaoticModelParams model_params(const SourceSpec& source);

class FitError : public std::runtime_error {
public:
  FitError(const std::string& what, double last_iterate)
      : std::runtime_error(what), last_iterate_(last_iterate) {}
  double last_iterate() const noexcept { return last_iterate_; }

private:
  double last_iterate_;
};

/// One measured point: abscissa (x in um, or tau in ns), value and 1-sigma error.
struct FitSample {
  double at;
  double g2;
  double sigma;
};

struct FitResult {
  double value;
  double sigma; ///< 1-sigma from the curvature of chi^2 at the minimum
  double chi2;
  std::size_t iterations;
  std::size_t samples;
};

/// Weighted least-squares estimate of the angular width from zero-delay
/// samples g2(x, 0). Gauss-Newton with analytic Jacobian, started from the
/// best point of a coarse scan; converges when the relative step is below
/// 1e-10, gives up after 100 iterations.
FitResult fit_angular_width(std::vector<FitSample> samples, double wavelength_nm, double polarization_factor);

/// Same scheme for the coherence time (ns) from samples g2(0, tau).
FitResult fit_coherence_time(std::vector<FitSample> samples, double polarization_factor);

} // namespace g2i
