#include "g2i/model.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>

namespace g2i {

namespace {

constexpr double pi = std::numbers::pi;
constexpr std::size_t max_iterations = 100;
constexpr double relative_tolerance = 1e-10;

struct OneParameterModel {
  std::function<double(double, double)> value;      // (parameter, abscissa)
  std::function<double(double, double)> derivative; // d value / d parameter
};

double chi2(const std::vector<FitSample>& samples, const OneParameterModel& model, double p) {
  double sum = 0.0;
  for (const auto& s : samples) {
    const double r = (s.g2 - model.value(p, s.at)) / s.sigma;
    sum += r * r;
  }
  return sum;
}

void check_samples(std::vector<FitSample>& samples) {
  for (const auto& s : samples) {
    if (!(s.sigma > 0.0) || !std::isfinite(s.g2) || !std::isfinite(s.at)) {
      throw std::invalid_argument("fit samples need finite values and sigma > 0");
    }
  }
  // Canonical order makes the fit independent of the caller's ordering.
  std::sort(samples.begin(), samples.end(), [](const FitSample& a, const FitSample& b) {
    if (a.at != b.at) return a.at < b.at;
    if (a.g2 != b.g2) return a.g2 < b.g2;
    return a.sigma < b.sigma;
  });
}

FitResult gauss_newton(const std::vector<FitSample>& samples, const OneParameterModel& model,
                       const std::vector<double>& scan, const char* what) {
  double p = scan.front();
  double best = std::numeric_limits<double>::infinity();
  for (double candidate : scan) {
    const double c = chi2(samples, model, candidate);
    if (c < best) {
      best = c;
      p = candidate;
    }
  }

  auto normal_equations = [&](double at_p, double& jtj, double& jtr) {
    jtj = 0.0;
    jtr = 0.0;
    for (const auto& s : samples) {
      const double w = 1.0 / (s.sigma * s.sigma);
      const double j = model.derivative(at_p, s.at);
      jtj += w * j * j;
      jtr += w * j * (s.g2 - model.value(at_p, s.at));
    }
  };

  double current = chi2(samples, model, p);
  for (std::size_t iteration = 1; iteration <= max_iterations; ++iteration) {
    double jtj = 0.0;
    double jtr = 0.0;
    normal_equations(p, jtj, jtr);
    if (!(jtj > 0.0) || !std::isfinite(jtj)) {
      throw FitError(std::string(what) + ": parameter is not identifiable from these samples", p);
    }
    double step = jtr / jtj;
    double next = std::abs(p + step);
    double trial = chi2(samples, model, next);
    for (int halving = 0; halving < 60 && trial > current; ++halving) {
      step *= 0.5;
      next = std::abs(p + step);
      trial = chi2(samples, model, next);
    }
    const double change = std::abs(next - p);
    if (trial <= current) {
      p = next;
      current = trial;
    }
    if (change <= relative_tolerance * std::max(std::abs(p), std::numeric_limits<double>::min())) {
      normal_equations(p, jtj, jtr);
      const double information = jtj;
      // Zero curvature (e.g. theta = 0, where every sample sits at the
      // x -> 0 limit) means the data cannot pin the parameter down.
      if (!(information > 1e-12 * std::max(1.0, current))) {
        throw FitError(std::string(what) + ": parameter is not identifiable from these samples", p);
      }
      return FitResult{p, 1.0 / std::sqrt(information), current, iteration, samples.size()};
    }
  }
  throw FitError(std::string(what) + ": no convergence after 100 iterations", p);
}

} // namespace

void ChaoticModelParams::validate() const {
  if (!(angular_width_rad >= 0.0)) throw std::invalid_argument("angular width must be >= 0");
  if (!(wavelength_nm > 0.0)) throw std::invalid_argument("wavelength must be > 0");
  if (!(coherence_time_ns > 0.0)) throw std::invalid_argument("coherence time must be > 0");
  if (polarization_factor != 1.0 && polarization_factor != 0.5) {
    throw std::invalid_argument("polarization factor must be 1 or 1/2");
  }
}

double coherence_time(double linewidth_rad_s) {
  if (!(linewidth_rad_s > 0.0)) throw std::invalid_argument("linewidth must be > 0");
  return 2.0 * std::sqrt(2.0 * pi * std::numbers::ln2) / linewidth_rad_s;
}

double sinc(double u) noexcept {
  if (std::abs(u) < 1e-8) return 1.0 - u * u / 6.0;
  return std::sin(u) / u;
}

double sinc_derivative(double u) noexcept {
  if (std::abs(u) < 1e-4) return -u / 3.0 + u * u * u / 30.0;
  return (u * std::cos(u) - std::sin(u)) / (u * u);
}

double g1_model(const ChaoticModelParams& params, double x_um, double tau_ns) {
  params.validate();
  const double u = pi * params.angular_width_rad * x_um * 1e3 / params.wavelength_nm;
  const double r = tau_ns / params.coherence_time_ns;
  return std::abs(sinc(u)) * std::exp(-pi * r * r / 2.0);
}

double g2_model(const ChaoticModelParams& params, double x_um, double tau_ns) {
  params.validate();
  const double u = pi * params.angular_width_rad * x_um * 1e3 / params.wavelength_nm;
  const double r = tau_ns / params.coherence_time_ns;
  const double s = sinc(u);
  return 1.0 + params.polarization_factor * s * s * std::exp(-pi * r * r);
}

double bin_averaged_g2(const ChaoticModelParams& params, double x_um, double tau_ns, double bin_ns) {
  if (!(bin_ns > 0.0)) throw std::invalid_argument("bin width must be > 0");
  // Composite Simpson over [-T, T] with weight (1 - |s|/T) / T.
  constexpr int intervals = 800;
  const double h = 2.0 * bin_ns / intervals;
  double sum = 0.0;
  for (int k = 0; k <= intervals; ++k) {
    const double s = -bin_ns + k * h;
    const double weight = (1.0 - std::abs(s) / bin_ns) / bin_ns;
    const double coefficient = (k == 0 || k == intervals) ? 1.0 : (k % 2 == 1 ? 4.0 : 2.0);
    sum += coefficient * weight * g2_model(params, x_um, tau_ns + s);
  }
  return sum * h / 3.0;
}

double table1_reference(SourceKind kind, CoherenceOrder which) noexcept {
  switch (kind) {
  case SourceKind::incoherent: return which == CoherenceOrder::g1 ? 0.0 : 1.0;
  case SourceKind::coherent: return 1.0;
  case SourceKind::chaotic: return which == CoherenceOrder::g1 ? 1.0 : 2.0;
  }
  return 0.0;
}

ChaoticModelParams model_params(const SourceSpec& source) {
  ChaoticModelParams params;
  params.angular_width_rad = source.angular_width_rad;
  params.wavelength_nm = source.wavelength_nm;
  params.coherence_time_ns = coherence_time(source.linewidth_rad_s()) * 1e9;
  params.polarization_factor = 1.0 / static_cast<double>(source.branches());
  return params;
}

FitResult fit_angular_width(std::vector<FitSample> samples, double wavelength_nm, double polarization_factor) {
  if (!(wavelength_nm > 0.0)) throw std::invalid_argument("wavelength must be > 0");
  check_samples(samples);
  std::vector<double> distinct;
  for (const auto& s : samples) {
    if (distinct.empty() || distinct.back() != s.at) distinct.push_back(s.at);
  }
  if (distinct.size() < 3) throw FitError("angular width: need samples at >= 3 distinct separations", 0.0);
  double x_min = std::numeric_limits<double>::infinity();
  for (double x : distinct) {
    if (x > 0.0) x_min = std::min(x_min, x);
  }
  if (!std::isfinite(x_min)) throw FitError("angular width: all separations are zero", 0.0);

  const double scale = pi * 1e3 / wavelength_nm; // u = scale * theta * x
  OneParameterModel model{
      [=](double theta, double x) {
        const double s = sinc(scale * theta * x);
        return 1.0 + polarization_factor * s * s;
      },
      [=](double theta, double x) {
        const double u = scale * theta * x;
        return polarization_factor * 2.0 * sinc(u) * sinc_derivative(u) * scale * x;
      }};
  // Scan theta until the first sample's phase reaches 2 pi.
  const double theta_max = 2.0 * wavelength_nm / (1e3 * x_min);
  std::vector<double> scan;
  constexpr int points = 4000;
  for (int k = 0; k <= points; ++k) scan.push_back(theta_max * k / points);
  return gauss_newton(samples, model, scan, "angular width");
}

FitResult fit_coherence_time(std::vector<FitSample> samples, double polarization_factor) {
  check_samples(samples);
  if (samples.size() < 2) throw FitError("coherence time: need at least 2 samples", 0.0);
  double tau_min = std::numeric_limits<double>::infinity();
  double tau_max = 0.0;
  for (const auto& s : samples) {
    const double t = std::abs(s.at);
    if (t > 0.0) tau_min = std::min(tau_min, t);
    tau_max = std::max(tau_max, t);
  }
  if (!(tau_max > 0.0)) throw FitError("coherence time: all samples are at zero delay", 0.0);

  OneParameterModel model{
      [=](double tau_c, double tau) {
        const double r = tau / tau_c;
        return 1.0 + polarization_factor * std::exp(-pi * r * r);
      },
      [=](double tau_c, double tau) {
        const double r = tau / tau_c;
        return polarization_factor * std::exp(-pi * r * r) * 2.0 * pi * r * r / tau_c;
      }};
  std::vector<double> scan;
  const double lo = std::log(tau_min / 10.0);
  const double hi = std::log(tau_max * 10.0);
  constexpr int points = 2000;
  for (int k = 0; k <= points; ++k) scan.push_back(std::exp(lo + (hi - lo) * k / points));
  return gauss_newton(samples, model, scan, "coherence time");
}

} // namespace g2i
