#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "emloc/geometry.hpp"

using namespace emloc;

namespace {
constexpr double kLambda = 0.010706873500000; // 28 GHz
const DipoleDims kDims{kLambda / 4.0, kLambda / 500.0};

double min_pairwise_distance(const ElementLayout& l) {
  double best = 1e300;
  for (size_t i = 0; i < l.elements.size(); ++i)
    for (size_t j = i + 1; j < l.elements.size(); ++j)
      best = std::min(best, (l.elements[i].position - l.elements[j].position).norm());
  return best;
}
}  // namespace

TEST_CASE("uniform 8x8 half-wavelength array") {
  const double d = kLambda / 2.0;
  const auto bs = build_uniform_array(8, 8, d, d, kDims);
  REQUIRE(bs.size() == 64);

  std::set<double> xs;
  double sum_x = 0.0;
  for (const auto& e : bs.elements) {
    xs.insert(e.position.x() / d);
    sum_x += e.position.x();
    CHECK(e.position.z() == 0.0);
  }
  CHECK(xs.size() == 8);
  CHECK(*xs.begin() == doctest::Approx(-3.5).epsilon(1e-12));
  CHECK(*xs.rbegin() == doctest::Approx(3.5).epsilon(1e-12));
  CHECK(std::abs(sum_x) <= 1e-12 * 7.0 * d * 64);

  // row-major ordering: first row shares y, x increasing
  CHECK(bs.elements[0].position.y() == bs.elements[7].position.y());
  CHECK(bs.elements[1].position.x() > bs.elements[0].position.x());
  CHECK(bs.elements[8].position.y() > bs.elements[0].position.y());
}

TEST_CASE("degenerate and two-element arrays") {
  const auto one = build_uniform_array(1, 1, 0.01, 0.01, kDims);
  REQUIRE(one.size() == 1);
  CHECK(one.elements[0].position.norm() == 0.0);

  const double d = 0.0123;
  const auto two = build_uniform_array(2, 1, d, d, kDims);
  REQUIRE(two.size() == 2);
  CHECK(two.elements[0].position.x() == doctest::Approx(-d / 2).epsilon(1e-14));
  CHECK(two.elements[1].position.x() == doctest::Approx(d / 2).epsilon(1e-14));
  CHECK(two.elements[0].position.y() == 0.0);
}

TEST_CASE("uniform array argument validation") {
  CHECK_THROWS_AS(build_uniform_array(0, 8, 0.01, 0.01, kDims), std::invalid_argument);
  CHECK_THROWS_AS(build_uniform_array(8, 8, -0.01, 0.01, kDims), std::invalid_argument);
  CHECK_THROWS_AS(build_uniform_array(8, 8, 0.01, 0.0, kDims), std::invalid_argument);
  CHECK_THROWS_AS(build_uniform_array(2, 2, 0.01, 0.01, DipoleDims{0.0, 1e-5}),
                  std::invalid_argument);
  CHECK_THROWS_AS(build_uniform_array(2, 2, 0.01, 0.01, DipoleDims{1e-5, 2e-5}),
                  std::invalid_argument);
}

TEST_CASE("rotated RIS layout") {
  const double d = kLambda / 2.0;
  const Vec3 origin(1.0, 0.0, 1.0);

  const auto ris = build_ris_layout(10, 10, d, d, origin, M_PI / 2.0, kDims);
  REQUIRE(ris.size() == 100);
  double zmin = 1e300, zmax = -1e300;
  for (const auto& e : ris.elements) {
    CHECK(e.position.x() == doctest::Approx(1.0).epsilon(1e-12));
    zmin = std::min(zmin, e.position.z());
    zmax = std::max(zmax, e.position.z());
  }
  CHECK(zmin == doctest::Approx(1.0 - 4.5 * d).epsilon(1e-9));
  CHECK(zmax == doctest::Approx(1.0 + 4.5 * d).epsilon(1e-9));

  const auto flat = build_ris_layout(10, 10, d, d, origin, 0.0, kDims);
  for (const auto& e : flat.elements) CHECK(e.position.z() == doctest::Approx(1.0).epsilon(1e-12));

  const auto single = build_ris_layout(1, 1, d, d, origin, 0.7, kDims);
  REQUIRE(single.size() == 1);
  CHECK((single.elements[0].position - origin).norm() == 0.0);
}

TEST_CASE("minimum-redundancy layouts reproduce the stated apertures") {
  const double base = kLambda / 2.0;

  RedundancyPattern p8{{1, 3, 6, 6, 2, 3, 2}, base};
  CHECK(p8.num_positions() == 8);
  const auto offs8 = p8.grid_offsets();
  CHECK(offs8 == std::vector<int>({0, 1, 4, 10, 16, 18, 21, 23}));

  const auto bs = build_min_redundancy_layout(p8, p8, kDims);
  REQUIRE(bs.size() == 64);
  // 24-grid-point aperture => span of 23 base spacings on each axis
  double xmin = 1e300, xmax = -1e300, sum_x = 0.0;
  for (const auto& e : bs.elements) {
    xmin = std::min(xmin, e.position.x());
    xmax = std::max(xmax, e.position.x());
    sum_x += e.position.x();
  }
  CHECK(xmax - xmin == doctest::Approx(23.0 * base).epsilon(1e-12));
  CHECK(std::abs(sum_x) <= 1e-12 * 23.0 * base * 64);

  RedundancyPattern p10{{1, 2, 3, 7, 7, 7, 4, 4, 1}, base};
  CHECK(p10.num_positions() == 10);
  CHECK(p10.grid_offsets().back() == 36);  // 37 grid points
  const auto ris = build_min_redundancy_layout(p10, p10, kDims, LayoutKind::RIS,
                                               Vec3(1, 0, 1), M_PI / 2.0);
  REQUIRE(ris.size() == 100);
  for (const auto& e : ris.elements) CHECK(e.position.x() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("all-ones gaps reduce to the uniform array element-for-element") {
  const double base = 0.0077;
  RedundancyPattern ones{{1, 1, 1, 1, 1, 1, 1}, base};
  const auto nonuni = build_min_redundancy_layout(ones, ones, kDims);
  const auto uni = build_uniform_array(8, 8, base, base, kDims);
  REQUIRE(nonuni.size() == uni.size());
  for (int i = 0; i < uni.size(); ++i)
    CHECK((nonuni.elements[i].position - uni.elements[i].position).norm() <= 1e-12 * 8 * base);
}

TEST_CASE("minimum pairwise distance is at least the base spacing") {
  const double base = kLambda / 2.0;
  RedundancyPattern p8{{1, 3, 6, 6, 2, 3, 2}, base};
  CHECK(min_pairwise_distance(build_min_redundancy_layout(p8, p8, kDims)) >= base - 1e-12);
  CHECK(min_pairwise_distance(build_uniform_array(8, 8, base, base, kDims)) >= base - 1e-12);
  CHECK(min_pairwise_distance(build_ris_layout(10, 10, base, base, Vec3(1, 0, 1), M_PI / 2,
                                               kDims)) >= base - 1e-12);
}

TEST_CASE("pattern validation") {
  RedundancyPattern empty{{}, 0.01};
  RedundancyPattern ok{{1, 2}, 0.01};
  RedundancyPattern zero_gap{{1, 0}, 0.01};
  CHECK_THROWS_AS(build_min_redundancy_layout(empty, ok, kDims), std::invalid_argument);
  CHECK_THROWS_AS(build_min_redundancy_layout(ok, zero_gap, kDims), std::invalid_argument);
}
