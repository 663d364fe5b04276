#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include <doctest.h>

#include "platoon/core/gdop.hpp"
#include "platoon/core/selftest.hpp"
#include "test_support.hpp"

using namespace platoon;
using platoon::test::throws_code;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace

TEST_CASE("ULA Fisher information uses the finite phase sum") {
  CHECK(fim_aoa_ula(0.0, 1.0, 1.0, 2) == doctest::Approx(2.0 * kPi * kPi));
  CHECK(fim_aoa_ula(kPi / 2.0, 1.0, 1.0, 8) == doctest::Approx(0.0));
  CHECK(fim_aoa_ula(0.3, 1.0, 1.0, 1) == 0.0);
  CHECK(fim_aoa_ula(0.0, 2.0, 0.5, 3) == doctest::Approx(2.0 / 0.5 * kPi * kPi * 4.0 * 5.0));
}

TEST_CASE("ULA CRLB follows the cubic array law") {
  CHECK(crlb_ula(0.0, 1.0, 1.0, 16) == doctest::Approx(3.0 / (2.0 * 4096.0 * kPi * kPi)));
  CHECK(crlb_ula(0.4, 1.0, 1.0, 8) / crlb_ula(0.4, 1.0, 1.0, 16) == doctest::Approx(8.0));
  CHECK(crlb_ula(kPi / 2.0, 1.0, 1.0, 8) == kInf);
}

TEST_CASE("ULA GDOP power laws") {
  const double g = gdop_ula(0.3, 20.0, 1e-3, 8, 7e9, 2.5);
  CHECK(gdop_ula(0.3, 40.0, 1e-3, 8, 7e9, 2.5) / g == doctest::Approx(std::pow(2.0, 3.5)));
  CHECK(g / gdop_ula(0.3, 20.0, 1e-3, 32, 7e9, 2.5) == doctest::Approx(8.0));
  CHECK(gdop_ula(kPi / 2.0, 20.0, 1e-3, 8, 7e9, 2.5) == kInf);

  const double gain = std::pow(kSpeedOfLight / (4.0 * kPi * 7e9), 2.5) * std::pow(20.0, -2.5);
  CHECK(g == doctest::Approx(20.0 * std::sqrt(crlb_ula(0.3, gain, 1e-6, 8))).epsilon(1e-12));

  const GdopCheck c = gdop_check();
  CHECK(c.exponent_error < 1e-12);
}

TEST_CASE("UPA and cascaded GDOP scaling") {
  const double phi = 0.2, theta = 0.0, d = 30.0, s = 1e-3, f = 7e9, z = 2.0;
  CHECK(gdop_upa(phi, theta, d, s, 8, 1, f, z) == doctest::Approx(gdop_ula(phi, d, s, 8, f, z)).epsilon(1e-12));
  CHECK(gdop_upa(phi, 0.3, d, s, 8, 2, f, z) / gdop_upa(phi, 0.3, d, s, 8, 8, f, z) == doctest::Approx(2.0));

  const double expect = std::sqrt(1.5) / kPi * std::pow(kSpeedOfLight / (4.0 * kPi), -z) * s *
                        std::pow(8.0, -1.5) * std::pow(4.0, -0.5) * std::pow(f, z) * std::pow(d, 1.0 + z) /
                        (std::cos(phi) * std::cos(0.3));
  CHECK(gdop_upa(phi, 0.3, d, s, 8, 4, f, z) == doctest::Approx(expect).epsilon(1e-12));
  CHECK(gdop_upa(kPi / 2.0, 0.3, d, s, 8, 4, f, z) == kInf);

  const double r = gdop_ris(phi, 0.3, d, s, 8, 4, 16, f, z, 0.5);
  CHECK(r / gdop_ris(phi, 0.3, d, s, 8, 4, 16, f, z, 1.0) == doctest::Approx(2.0));
  CHECK(r / gdop_ris(phi, 0.3, d, s, 8, 4, 64, f, z, 0.5) == doctest::Approx(2.0));
  CHECK(r == doctest::Approx(gdop_upa(phi, 0.3, d, s, 8, 4, f, z) / (0.5 * 4.0)));
}

TEST_CASE("combined GDOP is a harmonic combination bounded by its parts") {
  CHECK(gdop_combined(4.0, 4.0) == doctest::Approx(2.0));
  CHECK(gdop_combined(3.0, kInf) == 3.0);
  CHECK(gdop_combined(kInf, kInf) == kInf);
  std::mt19937_64 rng(1);
  std::lognormal_distribution<double> ln(0.0, 4.0);
  for (int i = 0; i < 100000; ++i) {
    const double a = ln(rng), b = ln(rng);
    CHECK(gdop_combined(a, b) <= std::min(a, b));
  }
}

TEST_CASE("GDOP ratio") {
  UlaGdopParams bs{0.2, 40.0, 1e-3, 8, 7e9, 2.0};
  RisGdopParams ris{0.1, 0.3, 40.0, 1e-3, 8, 4, 8, 7e9, 2.0, 0.7};
  const GdopRatio r = gdop_ratio(bs, ris);
  CHECK(r.full == doctest::Approx(gdop_ula(0.2, 40.0, 1e-3, 8, 7e9, 2.0) /
                                  gdop_ris(0.1, 0.3, 40.0, 1e-3, 8, 4, 8, 7e9, 2.0, 0.7)));
  CHECK(r.trimmed == doctest::Approx(0.7 / 8.0 * std::pow(8.0, 1.5) * 2.0));
  RisGdopParams ris2 = ris;
  ris2.N_h = 16;
  CHECK(gdop_ratio(bs, ris2).trimmed / r.trimmed == doctest::Approx(std::pow(2.0, 1.5)));
  RisGdopParams ris3 = ris;
  ris3.K = 16;
  bs.K = 16;
  CHECK(r.trimmed / gdop_ratio(bs, ris3).trimmed == doctest::Approx(2.0));
}

TEST_CASE("numeric Fisher information matches the closed forms") {
  CHECK(fim_oracle_error() < 1e-6);
  const RMat zero = fim_numeric_oracle([](const RVec&) { return CVec(CVec::Zero(4)); }, RVec::Constant(1, 0.3), 1.0);
  CHECK(zero.cwiseAbs().maxCoeff() == 0.0);
  const RMat one = fim_numeric_oracle(
      [](const RVec& p) { return CVec(0.8 * steering_ula_broadside(p(0), 6)); }, RVec::Constant(1, 0.4), 0.5);
  CHECK(one(0, 0) == doctest::Approx(fim_aoa_ula(0.4, 0.8, 0.5, 6)).epsilon(1e-6));
}

TEST_CASE("cascaded approximation stays within the median tolerance") {
  CHECK(cascaded_median_deviation(4, 30) <= 0.2);
}

TEST_CASE("twin anchors halve the GDOP at a symmetric broadside point") {
  ScenarioConfig cfg = preset_config("desk");
  cfg.bs_position = Position3(0.0, 10.0, 5.0);
  cfg.ris_position = Position3(0.0, -10.0, 5.0);
  GdopRaster raster{0.0, 0.0, 0.0, 0.0, 1.0, 0.0};
  const GdopReport r = gdop_map(cfg, raster, {GdopDeployment::Bs, GdopDeployment::BsBs}, 1.0);
  REQUIRE(r.points.size() == 1);
  CHECK(r.values(0, 1) == doctest::Approx(r.values(0, 0) / 2.0).epsilon(1e-12));
}

TEST_CASE("GDOP raster over the default scene") {
  const ScenarioConfig cfg = preset_config("default");
  const GdopReport r = gdop_map(cfg, GdopRaster{}, {GdopDeployment::Bs, GdopDeployment::Ris,
                                                    GdopDeployment::BsRis, GdopDeployment::BsBs}, 0.5);
  CHECK(r.points.size() == 41 * 25);
  for (Eigen::Index i = 0; i < r.values.rows(); ++i) {
    CHECK(r.values(i, 2) <= r.values(i, 0));
    CHECK(r.values(i, 2) <= r.values(i, 1));
    CHECK(r.values(i, 0) > 0.0);
  }
  const GdopCheck c = gdop_check();
  CHECK(c.half_error == 0.0);
  CHECK(c.combined_violations == 0);

  const auto path = std::filesystem::temp_directory_path() / "platoon_gdop_test.csv";
  write_gdop_csv(r, path.string());
  std::ifstream in(path);
  std::string header, first;
  std::getline(in, header);
  std::getline(in, first);
  CHECK(header == "x,y,deployment,gdop");
  CHECK(first.rfind("0,0,BS,", 0) == 0);
  std::size_t lines = 2;
  for (std::string l; std::getline(in, l);) ++lines;
  CHECK(lines == 1 + 4 * r.points.size());
  std::filesystem::remove(path);

  CHECK(throws_code([&] { gdop_map(cfg, GdopRaster{0, 1, 0, 1, 0.0, 0}, {GdopDeployment::Bs}, 1.0); },
                    ErrorCode::InvalidArgument));
  CHECK(deployment_from_name("BS+RIS") == GdopDeployment::BsRis);
  CHECK(deployment_name(GdopDeployment::BsBs) == "BS+BS");
  CHECK(throws_code([] { deployment_from_name("XYZ"); }, ErrorCode::InvalidArgument));
}
