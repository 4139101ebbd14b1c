#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <filesystem>
#include <random>

#include "g2i/correlator.hpp"

using namespace g2i;

namespace {

using Dense = std::vector<std::vector<std::uint8_t>>; // [pixel][m * span + n]

Dense random_dense(std::size_t pixels, const WindowLayout& layout, double p, std::uint64_t seed) {
  std::mt19937_64 engine(seed);
  std::bernoulli_distribution bit(p);
  Dense dense(pixels, std::vector<std::uint8_t>(layout.total_bins()));
  for (auto& row : dense) {
    for (auto& b : row) b = bit(engine) ? 1 : 0;
  }
  return dense;
}

/// Direct evaluation of the estimator from dense windows.
struct OracleLag {
  std::int64_t c;
  double g2_global;
  double g2_per_window;
};

OracleLag oracle(const Dense& x, const WindowLayout& layout, std::size_t i, std::size_t j, long lag) {
  if (lag < 0) return oracle(x, layout, j, i, -lag);
  const auto l = static_cast<std::size_t>(lag);
  const std::size_t N = layout.window_N;
  const std::size_t span = layout.span();
  std::int64_t c = 0;
  std::int64_t s_i = 0;
  std::int64_t s_j = 0;
  std::int64_t weighted = 0;
  for (std::size_t m = 0; m < layout.window_M; ++m) {
    std::int64_t wi = 0;
    std::int64_t wj = 0;
    for (std::size_t n = 0; n < N; ++n) {
      const auto a = x[i][m * span + n];
      const auto b = x[j][m * span + n + l];
      c += a * b;
      wi += a;
      wj += b;
    }
    s_i += wi;
    s_j += wj;
    weighted += wi * wj;
  }
  const double nm = static_cast<double>(N) * static_cast<double>(layout.window_M);
  return {c, nm * static_cast<double>(c) / (static_cast<double>(s_i) * static_cast<double>(s_j)),
          static_cast<double>(N) * static_cast<double>(c) / static_cast<double>(weighted)};
}

std::vector<std::uint64_t> bernoulli_bins(std::uint64_t total, double p, std::mt19937_64& engine) {
  std::geometric_distribution<std::uint64_t> gap(p);
  std::vector<std::uint64_t> bins;
  for (std::uint64_t g = gap(engine); g < total; g += 1 + gap(engine)) bins.push_back(g);
  return bins;
}

} // namespace

TEST_CASE("single coincidence hand example") {
  const WindowLayout layout{4, 0, 1, 1000};
  const auto bins = BinaryWindowSet::from_dense(layout, {{0, 1, 0, 0}, {0, 1, 0, 0}});
  const auto c = g2_pair(bins, 0, 1, Variant::global);
  CHECK(c.at(0) == 4.0);
  CHECK(c.coincidences[0] == 1);
}

TEST_CASE("blanked-window hand example") {
  const WindowLayout layout{4, 0, 2, 1000};
  const auto bins = BinaryWindowSet::from_dense(layout, {{1, 1, 1, 1, 0, 0, 0, 0}, {1, 1, 1, 1, 0, 0, 0, 0}});
  CHECK(g2_pair(bins, 0, 1, Variant::global).at(0) == 2.0);
  CHECK(g2_pair(bins, 0, 1, Variant::per_window).at(0) == 1.0);
}

TEST_CASE("estimator matches the direct evaluation") {
  const WindowLayout layout{16, 5, 40, 1000};
  const auto dense = random_dense(3, layout, 0.2, 99);
  const auto bins = BinaryWindowSet::from_dense(layout, dense);
  for (auto [i, j] : std::vector<PixelPair>{{0, 1}, {1, 2}, {2, 0}, {1, 1}}) {
    const auto global = g2_pair(bins, i, j, Variant::global);
    const auto per_window = g2_pair(bins, i, j, Variant::per_window);
    CHECK(global.lag_count() == 11);
    for (std::size_t k = 0; k < global.lag_count(); ++k) {
      const auto expected = oracle(dense, layout, i, j, global.lag(k));
      CHECK(global.coincidences[k] == expected.c);
      CHECK(*global.g2[k] == doctest::Approx(expected.g2_global).epsilon(1e-13));
      CHECK(*per_window.g2[k] == doctest::Approx(expected.g2_per_window).epsilon(1e-13));
      CHECK(global.std_error[k] == doctest::Approx(*global.g2[k] / std::sqrt(static_cast<double>(expected.c))));
    }
  }
}

TEST_CASE("swapping the pair mirrors the lag axis bit-exactly") {
  const WindowLayout layout{32, 12, 200, 1000};
  const auto bins = BinaryWindowSet::from_dense(layout, random_dense(2, layout, 0.1, 5));
  for (auto variant : {Variant::global, Variant::per_window}) {
    const auto ij = g2_pair(bins, 0, 1, variant);
    const auto ji = g2_pair(bins, 1, 0, variant);
    for (long l = -12; l <= 12; ++l) {
      CHECK(ij.at(l) == ji.at(-l));
      CHECK(ij.std_error_at(l) == ji.std_error_at(-l));
    }
  }
}

TEST_CASE("independent Bernoulli streams are normalized to one") {
  const WindowLayout layout{100, 50, 1'000'000, 1000};
  std::mt19937_64 engine(2024);
  auto a = bernoulli_bins(layout.total_bins(), 0.0025, engine);
  auto b = bernoulli_bins(layout.total_bins(), 0.0025, engine);
  const BinaryWindowSet bins(layout, {std::move(a), std::move(b)});
  for (auto variant : {Variant::global, Variant::per_window}) {
    const auto c = g2_pair(bins, 0, 1, variant);
    for (long l : {-50L, -17L, -1L, 0L, 1L, 33L, 50L}) {
      CHECK(std::abs(*c.at(l) - 1.0) < 3.0 * c.std_error_at(l));
    }
  }
}

TEST_CASE("blanking windows inflates global but not per_window") {
  const WindowLayout layout{100, 10, 200'000, 1000};
  std::mt19937_64 engine(8);
  std::vector<std::vector<std::uint64_t>> set(2);
  for (auto& pixel : set) {
    for (auto g : bernoulli_bins(layout.total_bins(), 0.01, engine)) {
      if ((g / layout.span()) % 2 == 0) pixel.push_back(g); // odd windows dark
    }
  }
  const BinaryWindowSet bins(layout, std::move(set));
  const auto global = g2_pair(bins, 0, 1, Variant::global);
  const auto per_window = g2_pair(bins, 0, 1, Variant::per_window);
  CHECK(std::abs(*global.at(0) - 2.0) < 3.0 * global.std_error_at(0));
  CHECK(std::abs(*per_window.at(0) - 1.0) < 3.0 * per_window.std_error_at(0));
}

TEST_CASE("zero denominators are reported as missing") {
  const WindowLayout layout{4, 1, 2, 1000};
  const auto bins = BinaryWindowSet::from_dense(layout, {{1, 0, 0, 0, 0, 0, 0, 0, 0, 0}, std::vector<std::uint8_t>(10)});
  const auto c = g2_pair(bins, 0, 1, Variant::global);
  for (const auto& v : c.g2) CHECK_FALSE(v.has_value());
  CHECK(c.diagnostics.size() == 3);
  const auto empty_coincidence = g2_pair(BinaryWindowSet::from_dense(layout, {{1, 0, 0, 0, 0, 0, 0, 0, 0, 0},
                                                                              {0, 0, 1, 0, 0, 0, 0, 0, 0, 0}}),
                                         0, 1, Variant::global);
  CHECK(empty_coincidence.at(0) == 0.0);
  CHECK(empty_coincidence.std_error_at(0) > 0.0);
}

TEST_CASE("mismatched layouts are rejected") {
  const auto a = BinaryWindowSet(WindowLayout{4, 1, 2, 1000}, {{0}});
  const auto b = BinaryWindowSet(WindowLayout{4, 1, 3, 1000}, {{0}});
  CHECK_THROWS(g2_pair(a, b, Variant::global));
  CHECK_THROWS(g2_pair(a, 0, 1, Variant::global));
}

TEST_CASE("all pairs") {
  const WindowLayout layout{20, 4, 50, 1000};
  const auto bins = BinaryWindowSet::from_dense(layout, random_dense(16, layout, 0.15, 3));
  const ArrayGeometry geometry;
  const auto all = g2_all_pairs(bins, Variant::per_window, &geometry, 1);
  REQUIRE(all.size() == 120);
  const auto threaded = g2_all_pairs(bins, Variant::per_window, &geometry, 4);
  for (std::size_t k = 0; k < all.size(); ++k) {
    const auto single = g2_pair(bins, all[k].pixel_i, all[k].pixel_j, Variant::per_window);
    CHECK(all[k].g2 == single.g2);
    CHECK(all[k].std_error == threaded[k].std_error);
    CHECK(all[k].g2 == threaded[k].g2);
    CHECK(all[k].separation_um == pair_separation(geometry, all[k].pixel_i, all[k].pixel_j));
  }
  const auto two = BinaryWindowSet::from_dense(layout, random_dense(2, layout, 0.15, 4));
  CHECK(g2_all_pairs(two, Variant::global).size() == 1);
}

TEST_CASE("zero-lag map") {
  const WindowLayout layout{20, 4, 50, 1000};
  const auto bins = BinaryWindowSet::from_dense(layout, random_dense(16, layout, 0.15, 3));
  auto all = g2_all_pairs(bins, Variant::global);
  const auto map = zero_lag_map(all, 16);
  CHECK(map.pixels == 16);
  for (std::size_t i = 0; i < 16; ++i) {
    CHECK(map.at(i, i) == 2.0);
    for (std::size_t j = 0; j < 16; ++j) CHECK(map.at(i, j) == map.at(j, i));
  }
  const auto pair = std::find_if(all.begin(), all.end(), [](const Correlogram& c) { return c.pixel_i == 3 && c.pixel_j == 7; });
  CHECK(map.at(3, 7) == *pair->at(0));
  all.erase(all.begin() + 5);
  CHECK_THROWS_WITH(zero_lag_map(all, 16), doctest::Contains("0-6"));
}

TEST_CASE("correlogram CSV round-trip") {
  const WindowLayout layout{20, 3, 30, 1000};
  const auto bins = BinaryWindowSet::from_dense(layout, random_dense(3, layout, 0.2, 6));
  const auto all = g2_all_pairs(bins, Variant::global);
  const auto path = std::filesystem::temp_directory_path() / "g2i_test_correlograms.csv";
  write_correlograms_csv(all, path);
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  CHECK(header == "pair_i,pair_j,separation_um,lag_ns,g2,stderr,coincidences,variant");
  const auto back = read_correlograms_csv(path);
  REQUIRE(back.size() == all.size());
  for (std::size_t k = 0; k < all.size(); ++k) {
    CHECK(back[k].g2 == all[k].g2);
    CHECK(back[k].coincidences == all[k].coincidences);
    CHECK(back[k].max_lag == 3);
  }
  std::filesystem::remove(path);
}
