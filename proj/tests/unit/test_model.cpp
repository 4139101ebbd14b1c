#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "g2i/model.hpp"

using namespace g2i;

namespace {

constexpr double pi = std::numbers::pi;

double oracle_tau_c(double delta_omega) { return 2.0 * std::sqrt(2.0 * pi * std::numbers::ln2) / delta_omega; }

ChaoticModelParams params(double theta, double factor, double tau_c_ns = 5.2) {
  return ChaoticModelParams{theta, 546.0, tau_c_ns, factor};
}

/// Composite trapezoid average of g2_model over a triangular kernel.
double oracle_bin_average(const ChaoticModelParams& p, double tau_ns, double bin_ns) {
  const int steps = 20000;
  double num = 0.0;
  double den = 0.0;
  for (int k = 0; k <= steps; ++k) {
    const double s = -bin_ns + 2.0 * bin_ns * k / steps;
    const double w = (1.0 - std::abs(s) / bin_ns) * ((k == 0 || k == steps) ? 0.5 : 1.0);
    num += w * g2_model(p, 0.0, tau_ns + s);
    den += w;
  }
  return num / den;
}

} // namespace

TEST_CASE("coherence time") {
  const double dw = 2.0 * pi * 130e6;
  CHECK(coherence_time(dw) == doctest::Approx(oracle_tau_c(dw)).epsilon(1e-14));
  CHECK(coherence_time(dw) * 1e9 == doctest::Approx(5.11).epsilon(2e-3));
  CHECK(coherence_time(2.0 * dw) == doctest::Approx(coherence_time(dw) / 2.0).epsilon(1e-14));
  CHECK(coherence_time(2.0 * std::sqrt(2.0 * pi * std::numbers::ln2)) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK_THROWS(coherence_time(0.0));
}

TEST_CASE("sinc and its derivative") {
  CHECK(sinc(0.0) == 1.0);
  CHECK(sinc(1e-9) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(sinc(pi) == doctest::Approx(0.0).epsilon(1e-15));
  for (double u : {-3.0, -0.5, 1e-9, 0.3, 1.553, 4.0}) {
    const double h = 1e-6;
    const double numeric = (sinc(u + h) - sinc(u - h)) / (2.0 * h);
    CHECK(sinc_derivative(u) == doctest::Approx(numeric).epsilon(1e-7));
  }
}

TEST_CASE("first-order model") {
  const auto p = params(0.9e-2, 0.5);
  CHECK(g1_model(p, 0.0, 0.0) == 1.0);
  CHECK(g1_model(p, 546e-3 / 0.9e-2, 0.0) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(g1_model(p, 0.0, 5.2) == doctest::Approx(std::exp(-pi / 2.0)).epsilon(1e-12));
  CHECK(std::exp(-pi / 2.0) == doctest::Approx(0.2079).epsilon(1e-3));
}

TEST_CASE("second-order model") {
  CHECK(g2_model(params(1e-2, 0.5), 0.0, 0.0) == 1.5);
  CHECK(g2_model(params(1e-2, 1.0), 0.0, 0.0) == 2.0);
  const double s = std::sin(pi * 0.9e-2 * 30.0 / 0.546) / (pi * 0.9e-2 * 30.0 / 0.546);
  CHECK(g2_model(params(0.9e-2, 0.5), 30.0, 0.0) == doctest::Approx(1.0 + 0.5 * s * s).epsilon(1e-12));
  CHECK(g2_model(params(0.9e-2, 0.5), 30.0, 0.0) == doctest::Approx(1.207).epsilon(1e-3));
  CHECK(g2_model(params(0.9e-2, 0.5), 0.0, 1e3) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("g2 equals 1 + f |g1|^2, at least 1, peaked at the origin") {
  for (double f : {0.5, 1.0}) {
    const auto p = params(0.9e-2, f);
    for (double x = 0.0; x <= 200.0; x += 7.5) {
      for (double tau = -20.0; tau <= 20.0; tau += 0.7) {
        const double g1 = g1_model(p, x, tau);
        const double g2 = g2_model(p, x, tau);
        CHECK(g2 == doctest::Approx(1.0 + f * g1 * g1).epsilon(1e-14));
        CHECK(g2 >= 1.0);
        CHECK(g2 <= g2_model(p, 0.0, 0.0));
      }
    }
  }
}

TEST_CASE("bin integration changes the peak by less than 2 percent") {
  const auto p = params(1e-2, 0.5, 5.2);
  const double averaged = bin_averaged_g2(p, 0.0, 0.0, 1.0);
  CHECK(averaged == doctest::Approx(oracle_bin_average(p, 0.0, 1.0)).epsilon(1e-6));
  const double peak = g2_model(p, 0.0, 0.0) - 1.0;
  CHECK((peak - (averaged - 1.0)) / peak < 0.02);
  CHECK((peak - (averaged - 1.0)) / peak > 0.0);
  CHECK(bin_averaged_g2(p, 0.0, 3.0, 1.0) == doctest::Approx(oracle_bin_average(p, 3.0, 1.0)).epsilon(1e-6));
}

TEST_CASE("zero-delay reference states") {
  CHECK(table1_reference(SourceKind::incoherent, CoherenceOrder::g1) == 0.0);
  CHECK(table1_reference(SourceKind::incoherent, CoherenceOrder::g2) == 1.0);
  CHECK(table1_reference(SourceKind::coherent, CoherenceOrder::g1) == 1.0);
  CHECK(table1_reference(SourceKind::coherent, CoherenceOrder::g2) == 1.0);
  CHECK(table1_reference(SourceKind::chaotic, CoherenceOrder::g1) == 1.0);
  CHECK(table1_reference(SourceKind::chaotic, CoherenceOrder::g2) == 2.0);
}

TEST_CASE("model parameters from a source") {
  SourceSpec s;
  auto p = model_params(s);
  CHECK(p.polarization_factor == 0.5);
  CHECK(p.coherence_time_ns == doctest::Approx(oracle_tau_c(2.0 * pi * 130e6) * 1e9).epsilon(1e-14));
  s.polarization = Polarization::polarized;
  CHECK(model_params(s).polarization_factor == 1.0);
}

TEST_CASE("angular width fit recovers noiseless data") {
  const auto p = params(0.9e-2, 0.5);
  std::vector<FitSample> samples;
  for (double x : {30.0, 60.0, 90.0}) samples.push_back({x, g2_model(p, x, 0.0), 0.01});
  const auto fit = fit_angular_width(samples, 546.0, 0.5);
  CHECK(fit.value == doctest::Approx(0.9e-2).epsilon(1e-3));
  CHECK(fit.sigma > 0.0);
  CHECK(fit.iterations <= 100);

  std::reverse(samples.begin(), samples.end());
  const auto reversed = fit_angular_width(samples, 546.0, 0.5);
  CHECK(reversed.value == fit.value);
  CHECK(reversed.sigma == fit.sigma);
}

TEST_CASE("angular width fit is not identifiable at the x = 0 limit") {
  std::vector<FitSample> flat;
  for (double x : {30.0, 60.0, 90.0}) flat.push_back({x, 1.5, 0.01});
  CHECK_THROWS_AS(fit_angular_width(flat, 546.0, 0.5), FitError);
  CHECK_THROWS_AS(fit_angular_width({{30.0, 1.2, 0.01}}, 546.0, 0.5), FitError);
}

TEST_CASE("coherence time fit recovers noiseless data") {
  const auto p = params(0.9e-2, 0.5, 5.2);
  std::vector<FitSample> samples;
  for (double tau = -20.0; tau <= 20.0; tau += 1.0) samples.push_back({tau, g2_model(p, 0.0, tau), 0.01});
  const auto fit = fit_coherence_time(samples, 0.5);
  CHECK(fit.value == doctest::Approx(5.2).epsilon(1e-3));

  std::mt19937_64 engine(7);
  std::shuffle(samples.begin(), samples.end(), engine);
  CHECK(fit_coherence_time(samples, 0.5).value == fit.value);

  CHECK_THROWS_AS(fit_coherence_time({{0.0, 1.5, 0.01}}, 0.5), FitError);
}

TEST_CASE("coherence time fit with noise reports a sensible error") {
  const auto p = params(0.9e-2, 0.5, 5.11);
  std::mt19937_64 engine(3);
  std::normal_distribution<double> noise(0.0, 0.01);
  std::vector<FitSample> samples;
  for (double tau = -50.0; tau <= 50.0; tau += 1.0) samples.push_back({tau, g2_model(p, 0.0, tau) + noise(engine), 0.01});
  const auto fit = fit_coherence_time(samples, 0.5);
  CHECK(std::abs(fit.value - 5.11) < 4.0 * fit.sigma);
  CHECK(fit.chi2 / static_cast<double>(fit.samples - 1) == doctest::Approx(1.0).epsilon(0.35));
}
