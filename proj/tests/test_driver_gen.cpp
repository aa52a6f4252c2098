#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <memory>

#include "sle/driver_gen.hpp"
#include "sle/errors.hpp"
#include "sle/philox.hpp"

using namespace sle;
using namespace sle::driver;

namespace {

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an sle::Error");
  return ErrorKind::invalid_argument;
}

// Exhaustive scan over all windows, independent of the sliding-window code.
std::vector<double> brute_force_constants(const DriverPath& d) {
  const int level = dyadic_level(d.step());
  const auto last = static_cast<std::size_t>(std::llround(1.0 / d.step()));
  std::vector<double> out;
  for (int j = 1; j <= level; ++j) {
    const std::size_t w = std::size_t{1} << (2 * (level - j));
    double worst = 0.0;
    for (std::size_t a = 0; a <= last; ++a)
      for (std::size_t b = a; b <= std::min(a + w, d.values.size() - 1); ++b)
        worst = std::max(worst, std::abs(d.values[b] - d.values[a]));
    out.push_back(worst / (std::sqrt(d.kappa) * std::sqrt(double(j)) * std::ldexp(1.0, -j)));
  }
  return out;
}

}  // namespace

TEST_CASE("philox known-answer vectors") {
  using rng::philox4x32_10;
  CHECK(philox4x32_10({0, 0, 0, 0}, {0, 0}) ==
        rng::Counter{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u});
  CHECK(philox4x32_10({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu},
                      {0xffffffffu, 0xffffffffu}) ==
        rng::Counter{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu});
  CHECK(philox4x32_10({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u},
                      {0xa4093822u, 0x299f31d0u}) ==
        rng::Counter{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u});
}

TEST_CASE("sample_brownian shape and determinism") {
  const BrownianPath a = sample_brownian(7, 4, 1.0);
  const BrownianPath b = sample_brownian(7, 4, 1.0);
  CHECK(a.values.size() == 257);
  CHECK(a.values[0] == 0.0);
  CHECK(a.values == b.values);
  CHECK(sample_brownian(8, 4, 1.0).values != a.values);
  CHECK(sample_brownian(7, 2, 2.5).values.size() == 41);
}

TEST_CASE("sample_brownian rejects bad grids") {
  CHECK(kind_of([] { sample_brownian(1, 0, 1.0); }) == ErrorKind::invalid_argument);
  CHECK(kind_of([] { sample_brownian(1, 3, 0.0); }) == ErrorKind::invalid_argument);
  CHECK(kind_of([] { sample_brownian(1, 3, -1.0); }) == ErrorKind::invalid_argument);
  CHECK(kind_of([] { sample_brownian(1, 1, 0.3); }) == ErrorKind::invalid_argument);
}

TEST_CASE("refinement and extension are pathwise consistent") {
  for (std::uint64_t seed : {1u, 2u, 99u}) {
    const BrownianPath coarse = sample_brownian(seed, 3, 2.0);
    const BrownianPath fine = sample_brownian(seed, 4, 2.0);
    for (std::size_t k = 0; k < coarse.size(); ++k) CHECK(coarse.values[k] == fine.values[4 * k]);
    const BrownianPath longer = sample_brownian(seed, 3, 4.0);
    for (std::size_t k = 0; k < coarse.size(); ++k) CHECK(coarse.values[k] == longer.values[k]);
  }
}

TEST_CASE("variance of B_1 over 1e5 seeds") {
  const int n = 100000;
  double s = 0.0, s2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double b1 = sample_brownian(rng::derive_seed(11, 0, i), 1, 1.0).values.back();
    s += b1;
    s2 += b1 * b1;
  }
  const double var = s2 / n - (s / n) * (s / n);
  CHECK(std::abs(var - 1.0) <= 3.0 * std::sqrt(2.0 / n));
}

TEST_CASE("bridge increments have the grid variance") {
  const BrownianPath p = sample_brownian(5, 5, 16.0);
  double s2 = 0.0;
  for (std::size_t k = 1; k < p.size(); ++k) s2 += std::pow(p.values[k] - p.values[k - 1], 2);
  const double n = double(p.size() - 1);
  CHECK(std::abs(s2 / n / p.step - 1.0) <= 3.0 * std::sqrt(2.0 / n));
}

TEST_CASE("couple scales the shared base path") {
  auto base = std::make_shared<const BrownianPath>(sample_brownian(3, 4, 1.0));
  const DriverPath one = couple(base, 1.0);
  const DriverPath four = couple(base, 4.0);
  CHECK(one.values == base->values);
  for (std::size_t k = 0; k < base->size(); ++k) CHECK(four.values[k] == 2.0 * base->values[k]);
  CHECK(four.values[0] == 0.0);

  const DriverPath a = couple(base, 3.0);
  const DriverPath b = couple(base, 6.5);
  CHECK(a.base.get() == b.base.get());
  for (std::size_t k = 0; k < base->size(); ++k) {
    CHECK(a.values[k] == std::sqrt(3.0) * base->values[k]);
    const double ra = a.values[k] / std::sqrt(3.0), rb = b.values[k] / std::sqrt(6.5);
    CHECK(std::abs(ra - rb) <= 4e-16 * std::abs(ra));
  }
}

TEST_CASE("couple rejects excluded kappa") {
  const BrownianPath p = sample_brownian(3, 2, 1.0);
  for (double k : {0.0, -1.0, 8.0, 7.9, 8.2, 0.3})
    CHECK(kind_of([&] { couple(p, k); }) == ErrorKind::rejected_kappa);
  AdmissibilityRules loose{0.1, 0.05};
  CHECK_NOTHROW(couple(p, 7.9, loose));
}

TEST_CASE("kappa grid validation") {
  CHECK(KappaGrid::make({2.5, 3, 4, 6, 7.5}).points.size() == 5);
  CHECK(kind_of([] { KappaGrid::make({3, 2.5}); }) == ErrorKind::invalid_argument);
  CHECK(kind_of([] { KappaGrid::make({3, 8}); }) == ErrorKind::rejected_kappa);
  CHECK(kind_of([] { KappaGrid::make({3, 5}, 3.0, 4.0); }) == ErrorKind::rejected_kappa);
  const KappaGrid u = KappaGrid::uniform(7.0, 9.0, 9);
  for (double k : u.points) CHECK(std::abs(k - 8.0) >= 0.25);
  CHECK(u.points.size() == 8);  // only 8 itself is excluded; 7.75 and 8.25 sit on the margin
}

TEST_CASE("realized quadratic variation of the driver is kappa") {
  const int seeds = 400;
  const double kappa = 3.0;
  double mean = 0.0;
  for (int i = 0; i < seeds; ++i) {
    const DriverPath d = couple(sample_brownian(rng::derive_seed(4, 1, i), 4, 1.0), kappa);
    double qv = 0.0;
    for (std::size_t k = 1; k < d.values.size(); ++k) qv += std::pow(d.values[k] - d.values[k - 1], 2);
    mean += qv / seeds;
  }
  const double se = kappa * std::sqrt(2.0 / 256.0) / std::sqrt(double(seeds));
  CHECK(std::abs(mean - kappa) <= 3.0 * se);
}

TEST_CASE("modulus certificate on injected drivers") {
  const DriverPath zero = couple(injected_path(4, 1.0, [](double) { return 0.0; }), 2.0);
  const ModulusReport z = modulus_certificate(zero, 1e-9);
  CHECK(z.holds);
  CHECK(z.fitted_c == 0.0);

  const DriverPath line = couple(injected_path(4, 1.0, [](double t) { return t; }), 1.0);
  const ModulusReport r = modulus_certificate(line, 1.0);
  const auto oracle = brute_force_constants(line);
  REQUIRE(r.per_scale_c.size() == oracle.size());
  for (std::size_t j = 0; j < oracle.size(); ++j) CHECK(r.per_scale_c[j] == doctest::Approx(oracle[j]).epsilon(1e-14));
  CHECK(r.fitted_c == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(r.worst_scale == 1);
}

TEST_CASE("modulus certificate matches brute force on Brownian drivers") {
  for (std::uint64_t seed : {1u, 17u, 23u}) {
    const DriverPath d = couple(sample_brownian(seed, 4, 2.0), 4.0);
    const ModulusReport r = modulus_certificate(d, 10.0);
    const auto oracle = brute_force_constants(d);
    for (std::size_t j = 0; j < oracle.size(); ++j) CHECK(r.per_scale_c[j] == doctest::Approx(oracle[j]).epsilon(1e-14));
    CHECK(modulus_certificate(d, r.fitted_c + 0.01).holds);
    CHECK(modulus_certificate(d, r.fitted_c).holds);
    CHECK_FALSE(modulus_certificate(d, r.fitted_c * (1 - 1e-6)).holds);
  }
}

TEST_CASE("modulus certificate preconditions") {
  const DriverPath coarse = couple(sample_brownian(1, 1, 1.0), 2.0);
  CHECK(kind_of([&] { modulus_certificate(coarse, 1.0); }) == ErrorKind::insufficient_resolution);
  const DriverPath tiny = couple(injected_path(3, 0.5, [](double) { return 0.0; }), 2.0);
  CHECK(kind_of([&] { modulus_certificate(tiny, 1.0); }) == ErrorKind::invalid_argument);
}

TEST_CASE("path export round trips") {
  const auto dir = std::filesystem::temp_directory_path() / "sle_driver_io";
  std::filesystem::create_directories(dir);
  const BrownianPath p = sample_brownian(42, 3, 1.0);
  write_binary(p, (dir / "p.bin").string());
  const BrownianPath q = read_binary((dir / "p.bin").string());
  CHECK(q.seed == 42);
  CHECK(q.level == 3);
  CHECK(q.horizon == 1.0);
  CHECK(q.values == p.values);
  CHECK(std::filesystem::file_size(dir / "p.bin") == 8 + 4 + 8 + 8 + 65 * 8);
  write_csv(p, (dir / "p.csv").string());
  CHECK(std::filesystem::file_size(dir / "p.csv") > 0);
}

TEST_CASE("rescaled path obeys Brownian scaling") {
  const BrownianPath p = sample_brownian(9, 3, 4.0);
  const BrownianPath s = rescale(p, 2.0);
  CHECK(s.horizon == 1.0);
  CHECK(s.at(0.25) == doctest::Approx(p.at(1.0) / 2.0));
}
